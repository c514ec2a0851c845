#pragma once

#include <vector>

#include "smgarn/layers.hpp"

namespace smgarn {

enum class FusionMode { concat_conv, add_conv };
enum class GuidanceMode { residual, concat };

struct GFNetConfig {
    int embed_dim = 112;
    int levels = 2;
    FusionMode fusion = FusionMode::concat_conv;
    GuidanceMode guidance = GuidanceMode::residual;
};

// Residual conv unit with internal 2x channel expansion:
// Y = X + conv3(ReLU(conv2(ReLU(conv1(X))))), conv2: C->2C, conv3: 2C->C.
class ResUnit {
public:
    explicit ResUnit(int channels);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(ParamRefs& out, const std::string& prefix);
    void init(std::mt19937_64& rng);

private:
    Conv2d conv1_, conv2_, conv3_;
    ReLU relu1_, relu2_;
};

// Guidance-Fusion Network. Two parallel ResUnit encoders (snow image branch
// and mask feature branch) produce per-level adaptive residuals
// f_res^i = f_snow^i - f_mask^i, which are fused by two convolutions into
// F_fuse. guidance=concat swaps the subtraction for channel concatenation
// followed by a 2C->C convolution (ablation variant).
class GFNet {
public:
    explicit GFNet(const GFNetConfig& cfg);

    Tensor forward(const Tensor& snowy, const Tensor& mask_features);

    struct InputGrads {
        Tensor d_snowy;
        Tensor d_mask_features;
    };
    InputGrads backward(const Tensor& d_fuse);

    void collect(ParamRefs& out, const std::string& prefix = "gfnet");
    void init(std::mt19937_64& rng);

    const GFNetConfig& config() const { return cfg_; }

private:
    GFNetConfig cfg_;
    Conv2d conv_img_;   // 3 -> C
    Conv2d conv_mask_;  // C -> C
    std::vector<ResUnit> ru_snow_;  // one per level
    std::vector<ResUnit> ru_mask_;
    std::vector<Conv2d> cat_conv_;  // per level, only in concat guidance mode
    Conv2d fuse1_;
    ReLU fuse_relu_;
    Conv2d fuse2_;
};

}  // namespace smgarn
