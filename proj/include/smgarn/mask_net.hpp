#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "smgarn/layers.hpp"

namespace smgarn {

struct MaskNetConfig {
    int embed_dim = 112;
    int num_blocks = 1;
    bool use_sa = true;
    bool use_ca = true;
    int mask_channels = 1;
};

// SA(X) = Conv0(X) ⊙ Conv0(X): one shared convolution applied once, result
// squared elementwise. With the unit disabled (ablation) the square is
// dropped and only the plain convolution remains.
class SelfPixelAttention {
public:
    SelfPixelAttention(int channels, bool squared);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(ParamRefs& out, const std::string& prefix);
    void init(std::mt19937_64& rng) { conv0_.init(rng); }

private:
    Conv2d conv0_;
    bool squared_;
    Tensor cached_encoding_;
};

// CA(X) = Conv1(X) ⊙ Conv2(X) with two independently parameterized
// convolutions. Disabled variant keeps Conv1 only.
class CrossPixelAttention {
public:
    CrossPixelAttention(int channels, bool hadamard);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(ParamRefs& out, const std::string& prefix);
    void init(std::mt19937_64& rng);

private:
    Conv2d conv1_;
    Conv2d conv2_;
    bool hadamard_;
    Tensor cached_a_, cached_b_;
};

// Y = X + CA(SA(X)), one residual skip around the attention pair.
class SnowMaskBlock {
public:
    SnowMaskBlock(int channels, bool use_sa, bool use_ca);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(ParamRefs& out, const std::string& prefix);
    void init(std::mt19937_64& rng);

private:
    SelfPixelAttention sa_;
    CrossPixelAttention ca_;
};

// Mask-Net: conv_in -> ReLU -> SnowMaskBlock(s) -> conv_out -> ReLU gives
// F_mask; a sigmoid head on F_mask gives the predicted snow mask m.
class MaskNet {
public:
    explicit MaskNet(const MaskNetConfig& cfg);

    struct Output {
        Tensor features;  // F_mask, (B, embed_dim, H, W)
        Tensor mask;      // m, (B, mask_channels, H, W), values in (0,1)
    };

    Output forward(const Tensor& snowy);
    // d_features: gradient w.r.t. F_mask; d_mask: gradient w.r.t. m.
    Tensor backward(const Tensor& d_features, const Tensor& d_mask);

    void collect(ParamRefs& out, const std::string& prefix = "masknet");
    void init(std::mt19937_64& rng);

    const MaskNetConfig& config() const { return cfg_; }

private:
    MaskNetConfig cfg_;
    Conv2d conv_in_;
    ReLU relu_in_;
    std::vector<SnowMaskBlock> blocks_;
    Conv2d conv_out_;
    ReLU relu_out_;
    Conv2d head_;
    Sigmoid head_sigmoid_;
};

}  // namespace smgarn
