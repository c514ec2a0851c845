#include "smgarn/model.hpp"

#include <cmath>

namespace smgarn {

std::string guidance_case_name(GuidanceCase c) {
    switch (c) {
        case GuidanceCase::case1_no_masknet: return "case1_no_masknet";
        case GuidanceCase::case2_no_maskloss: return "case2_no_maskloss";
        case GuidanceCase::case3_full: return "case3_full";
        case GuidanceCase::case4_gt_mask: return "case4_gt_mask";
    }
    throw ParamError("unknown guidance case");
}

GuidanceCase guidance_case_from_name(const std::string& name) {
    if (name == "case1_no_masknet") return GuidanceCase::case1_no_masknet;
    if (name == "case2_no_maskloss") return GuidanceCase::case2_no_maskloss;
    if (name == "case3_full") return GuidanceCase::case3_full;
    if (name == "case4_gt_mask") return GuidanceCase::case4_gt_mask;
    throw ParamError("unknown guidance case '" + name + "'");
}

void ModelConfig::propagate() {
    masknet.embed_dim = embed_dim;
    masknet.mask_channels = mask_channels;
    gfnet.embed_dim = embed_dim;
    marb.channels = embed_dim;
}

double l1_loss(const Tensor& pred, const Tensor& target, Tensor* grad) {
    check_same_shape(pred, target, "l1_loss");
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    double acc = 0.0;
    if (grad) *grad = Tensor::zeros_like(pred);
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += std::fabs(d);
        if (grad) (*grad)[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
    }
    return acc * inv_n;
}

LossBundle total_loss(double reconstruct, double mask, double lambda, bool mask_active) {
    if (lambda < 0.0) throw ParamError("total_loss: lambda must be >= 0");
    LossBundle b;
    b.reconstruct = reconstruct;
    b.lambda = lambda;
    b.mask_active = mask_active;
    b.mask = mask_active ? mask : 0.0;
    b.total = mask_active ? reconstruct + lambda * mask : reconstruct;
    return b;
}

ConvStackGF::ConvStackGF(int embed_dim) : embed_dim_(embed_dim), conv_img_(3, embed_dim, 3) {
    convs_.emplace_back(2 * embed_dim, embed_dim, 3);
    for (int i = 1; i < 8; ++i) convs_.emplace_back(embed_dim, embed_dim, 3);
    relus_.resize(7);
}

void ConvStackGF::init(std::mt19937_64& rng) {
    conv_img_.init(rng);
    for (auto& c : convs_) c.init(rng);
}

Tensor ConvStackGF::forward(const Tensor& snowy, const Tensor& mask_features) {
    Tensor t = concat_channels(conv_img_.forward(snowy), mask_features);
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        t = convs_[i].forward(t);
        if (i + 1 < convs_.size()) t = relus_[i].forward(t);
    }
    return t;
}

GFNet::InputGrads ConvStackGF::backward(const Tensor& d_fuse) {
    Tensor d = d_fuse;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        if (i + 1 < convs_.size()) d = relus_[i].backward(d);
        d = convs_[i].backward(d);
    }
    GFNet::InputGrads g;
    g.d_snowy = conv_img_.backward(slice_channels(d, 0, embed_dim_));
    g.d_mask_features = slice_channels(d, embed_dim_, embed_dim_);
    return g;
}

void ConvStackGF::collect(ParamRefs& out, const std::string& prefix) {
    conv_img_.collect(out, prefix + ".conv_img");
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].collect(out, prefix + ".conv" + std::to_string(i + 1));
    }
}

Smgarn::Smgarn(const ModelConfig& cfg) : cfg_(cfg), recon_([&] {
    ModelConfig c = cfg;
    c.propagate();
    return c.marb;
}()) {
    cfg_.propagate();
    const bool has_masknet = cfg_.guidance == GuidanceCase::case2_no_maskloss ||
                             cfg_.guidance == GuidanceCase::case3_full;
    if (has_masknet) masknet_ = std::make_unique<MaskNet>(cfg_.masknet);
    if (cfg_.guidance == GuidanceCase::case1_no_masknet) {
        case1_lift_ = std::make_unique<Conv2d>(3, cfg_.embed_dim, 3);
    }
    if (cfg_.guidance == GuidanceCase::case4_gt_mask) {
        case4_lift_ = std::make_unique<Conv2d>(cfg_.mask_channels, cfg_.embed_dim, 3);
    }
    if (cfg_.gf_conv_stack) {
        gfstack_ = std::make_unique<ConvStackGF>(cfg_.embed_dim);
    } else {
        gfnet_ = std::make_unique<GFNet>(cfg_.gfnet);
    }

    if (masknet_) masknet_->collect(params_);
    if (case1_lift_) case1_lift_->collect(params_, "case1.lift");
    if (case4_lift_) case4_lift_->collect(params_, "case4.lift");
    if (gfnet_) gfnet_->collect(params_);
    if (gfstack_) gfstack_->collect(params_);
    recon_.collect(params_);
}

void Smgarn::init(unsigned long long seed) {
    std::mt19937_64 rng(seed);
    if (masknet_) masknet_->init(rng);
    if (case1_lift_) case1_lift_->init(rng);
    if (case4_lift_) case4_lift_->init(rng);
    if (gfnet_) gfnet_->init(rng);
    if (gfstack_) gfstack_->init(rng);
    recon_.init(rng);
}

bool Smgarn::has_mask_output() const { return masknet_ != nullptr; }

Smgarn::Output Smgarn::forward(const Tensor& snowy, const Tensor* gt_mask) {
    if (snowy.c() != 3) {
        throw DimensionError("Smgarn: input must be (B,3,H,W), got " + shape_str(snowy));
    }
    if (cfg_.guidance == GuidanceCase::case4_gt_mask && gt_mask == nullptr) {
        throw ParamError("Smgarn: guidance case4_gt_mask requires a ground-truth mask");
    }

    Tensor mask_features;
    Output out;
    if (masknet_) {
        MaskNet::Output mn = masknet_->forward(snowy);
        mask_features = mn.features;
        out.mask = mn.mask;
    } else if (case1_lift_) {
        mask_features = case1_lift_->forward(snowy);
    } else {
        mask_features = case4_lift_->forward(*gt_mask);
    }

    Tensor fuse = gfstack_ ? gfstack_->forward(snowy, mask_features)
                           : gfnet_->forward(snowy, mask_features);
    out.clear = recon_.forward(fuse);
    return out;
}

void Smgarn::backward(const Tensor& d_clear, const Tensor* d_mask) {
    Tensor d_fuse = recon_.backward(d_clear);
    GFNet::InputGrads g =
        gfstack_ ? gfstack_->backward(d_fuse) : gfnet_->backward(d_fuse);
    if (masknet_) {
        Tensor dm;
        if (d_mask) {
            dm = *d_mask;
        } else {
            dm = Tensor(d_clear.n(), cfg_.mask_channels, d_clear.h(), d_clear.w());
        }
        masknet_->backward(g.d_mask_features, dm);
    } else if (case1_lift_) {
        case1_lift_->backward(g.d_mask_features);
    } else if (case4_lift_) {
        case4_lift_->backward(g.d_mask_features);
    }
}

std::int64_t param_count(const ModelConfig& cfg) {
    Smgarn model(cfg);
    return total_param_size(model.params());
}

}  // namespace smgarn
