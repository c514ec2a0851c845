#include "smgarn/mask_net.hpp"

namespace smgarn {

SelfPixelAttention::SelfPixelAttention(int channels, bool squared)
    : conv0_(channels, channels, 3), squared_(squared) {}

Tensor SelfPixelAttention::forward(const Tensor& x) {
    Tensor t = conv0_.forward(x);
    if (!squared_) return t;
    cached_encoding_ = t;
    return hadamard(t, t);
}

Tensor SelfPixelAttention::backward(const Tensor& dy) {
    if (!squared_) return conv0_.backward(dy);
    // d/dt (t ⊙ t) = 2 t
    Tensor dt = hadamard(dy, cached_encoding_);
    for (std::int64_t i = 0; i < dt.size(); ++i) dt[i] *= 2.0;
    return conv0_.backward(dt);
}

void SelfPixelAttention::collect(ParamRefs& out, const std::string& prefix) {
    conv0_.collect(out, prefix + ".conv0");
}

CrossPixelAttention::CrossPixelAttention(int channels, bool hadamard)
    : conv1_(channels, channels, 3), conv2_(channels, channels, 3), hadamard_(hadamard) {}

void CrossPixelAttention::init(std::mt19937_64& rng) {
    conv1_.init(rng);
    if (hadamard_) conv2_.init(rng);
}

Tensor CrossPixelAttention::forward(const Tensor& x) {
    Tensor a = conv1_.forward(x);
    if (!hadamard_) return a;
    Tensor b = conv2_.forward(x);
    cached_a_ = a;
    cached_b_ = b;
    return hadamard(a, b);
}

Tensor CrossPixelAttention::backward(const Tensor& dy) {
    if (!hadamard_) return conv1_.backward(dy);
    Tensor dx = conv1_.backward(hadamard(dy, cached_b_));
    Tensor dx2 = conv2_.backward(hadamard(dy, cached_a_));
    return add(dx, dx2);
}

void CrossPixelAttention::collect(ParamRefs& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".conv1");
    if (hadamard_) conv2_.collect(out, prefix + ".conv2");
}

SnowMaskBlock::SnowMaskBlock(int channels, bool use_sa, bool use_ca)
    : sa_(channels, use_sa), ca_(channels, use_ca) {}

void SnowMaskBlock::init(std::mt19937_64& rng) {
    sa_.init(rng);
    ca_.init(rng);
}

Tensor SnowMaskBlock::forward(const Tensor& x) {
    return add(x, ca_.forward(sa_.forward(x)));
}

Tensor SnowMaskBlock::backward(const Tensor& dy) {
    return add(dy, sa_.backward(ca_.backward(dy)));
}

void SnowMaskBlock::collect(ParamRefs& out, const std::string& prefix) {
    sa_.collect(out, prefix + ".sa");
    ca_.collect(out, prefix + ".ca");
}

MaskNet::MaskNet(const MaskNetConfig& cfg)
    : cfg_(cfg),
      conv_in_(3, cfg.embed_dim, 3),
      conv_out_(cfg.embed_dim, cfg.embed_dim, 3),
      head_(cfg.embed_dim, cfg.mask_channels, 3) {
    if (cfg.embed_dim < 1 || cfg.num_blocks < 1 || cfg.mask_channels < 1) {
        throw ParamError("MaskNetConfig: embed_dim, num_blocks, mask_channels must be >= 1");
    }
    for (int i = 0; i < cfg.num_blocks; ++i) {
        blocks_.emplace_back(cfg.embed_dim, cfg.use_sa, cfg.use_ca);
    }
}

void MaskNet::init(std::mt19937_64& rng) {
    conv_in_.init(rng);
    for (auto& b : blocks_) b.init(rng);
    conv_out_.init(rng);
    head_.init(rng);
}

MaskNet::Output MaskNet::forward(const Tensor& snowy) {
    if (snowy.c() != 3) {
        throw DimensionError("MaskNet: input must have 3 channels, got " + shape_str(snowy));
    }
    Tensor f = relu_in_.forward(conv_in_.forward(snowy));
    for (auto& b : blocks_) f = b.forward(f);
    Tensor features = relu_out_.forward(conv_out_.forward(f));
    Tensor mask = head_sigmoid_.forward(head_.forward(features));
    return {features, mask};
}

Tensor MaskNet::backward(const Tensor& d_features, const Tensor& d_mask) {
    Tensor df = add(d_features, head_.backward(head_sigmoid_.backward(d_mask)));
    Tensor g = conv_out_.backward(relu_out_.backward(df));
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
    return conv_in_.backward(relu_in_.backward(g));
}

void MaskNet::collect(ParamRefs& out, const std::string& prefix) {
    conv_in_.collect(out, prefix + ".conv_in");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].collect(out, prefix + ".block" + std::to_string(i));
    }
    conv_out_.collect(out, prefix + ".conv_out");
    head_.collect(out, prefix + ".head");
}

}  // namespace smgarn
