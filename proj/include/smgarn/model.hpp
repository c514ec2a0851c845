#pragma once

#include <memory>
#include <optional>
#include <string>

#include "smgarn/gf_net.hpp"
#include "smgarn/mask_net.hpp"
#include "smgarn/reconstruct_net.hpp"

namespace smgarn {

// Mask-guidance ablation cases. case3_full is the complete model.
enum class GuidanceCase { case1_no_masknet, case2_no_maskloss, case3_full, case4_gt_mask };

std::string guidance_case_name(GuidanceCase c);
GuidanceCase guidance_case_from_name(const std::string& name);

struct ModelConfig {
    int embed_dim = 112;
    int mask_channels = 1;
    MaskNetConfig masknet;
    GFNetConfig gfnet;
    MARBConfig marb;
    GuidanceCase guidance = GuidanceCase::case3_full;
    // Swap GF-Net for a plain stack of 8 convolutions on concatenated
    // image/mask features (the tbl5_case1 ablation variant).
    bool gf_conv_stack = false;

    // Keeps sub-config channel counts in sync with embed_dim.
    void propagate();
};

struct LossBundle {
    double total = 0.0;
    double reconstruct = 0.0;
    double mask = 0.0;
    double lambda = 1.0;
    bool mask_active = false;
};

// Mean absolute error. If grad is non-null it receives dLoss/dPred.
double l1_loss(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr);

LossBundle total_loss(double reconstruct, double mask, double lambda, bool mask_active);

// Plain conv stack standing in for GF-Net in the tbl5_case1 ablation:
// conv_img lifts the image, the mask features are concatenated, and 8
// convolutions produce F_fuse.
class ConvStackGF {
public:
    explicit ConvStackGF(int embed_dim);

    Tensor forward(const Tensor& snowy, const Tensor& mask_features);
    GFNet::InputGrads backward(const Tensor& d_fuse);
    void collect(ParamRefs& out, const std::string& prefix = "gfstack");
    void init(std::mt19937_64& rng);

private:
    int embed_dim_;
    Conv2d conv_img_;
    std::vector<Conv2d> convs_;
    std::vector<ReLU> relus_;
};

// End-to-end SMGARN: Mask-Net -> GF-Net -> Reconstruct-Net, with the four
// guidance ablation cases wired per ModelConfig.
class Smgarn {
public:
    explicit Smgarn(const ModelConfig& cfg);

    struct Output {
        Tensor clear;                 // reconstructed snow-free image
        std::optional<Tensor> mask;   // predicted mask; absent in case1/case4
    };

    // gt_mask is required iff guidance is case4_gt_mask.
    Output forward(const Tensor& snowy, const Tensor* gt_mask = nullptr);

    // d_mask may be null when no mask supervision applies.
    void backward(const Tensor& d_clear, const Tensor* d_mask = nullptr);

    const ParamRefs& params() { return params_; }
    void init(unsigned long long seed);
    void zero_grad() { zero_grads(params_); }

    const ModelConfig& config() const { return cfg_; }
    bool has_mask_output() const;

private:
    ModelConfig cfg_;
    std::unique_ptr<MaskNet> masknet_;
    std::unique_ptr<GFNet> gfnet_;
    std::unique_ptr<ConvStackGF> gfstack_;
    std::unique_ptr<Conv2d> case1_lift_;  // learned 3->C encoding replacing F_mask
    std::unique_ptr<Conv2d> case4_lift_;  // 1->C lift of the ground-truth mask
    ReconstructNet recon_;
    ParamRefs params_;
};

// Total scalar parameter count; a pure function of the config.
std::int64_t param_count(const ModelConfig& cfg);

}  // namespace smgarn
