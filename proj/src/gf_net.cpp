#include "smgarn/gf_net.hpp"

namespace smgarn {

ResUnit::ResUnit(int channels)
    : conv1_(channels, channels, 3),
      conv2_(channels, 2 * channels, 3),
      conv3_(2 * channels, channels, 3) {}

void ResUnit::init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    conv3_.init(rng);
}

Tensor ResUnit::forward(const Tensor& x) {
    Tensor t = relu1_.forward(conv1_.forward(x));
    t = relu2_.forward(conv2_.forward(t));
    return add(x, conv3_.forward(t));
}

Tensor ResUnit::backward(const Tensor& dy) {
    Tensor dt = conv3_.backward(dy);
    dt = conv2_.backward(relu2_.backward(dt));
    dt = conv1_.backward(relu1_.backward(dt));
    return add(dy, dt);
}

void ResUnit::collect(ParamRefs& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".conv1");
    conv2_.collect(out, prefix + ".conv2");
    conv3_.collect(out, prefix + ".conv3");
}

GFNet::GFNet(const GFNetConfig& cfg)
    : cfg_(cfg),
      conv_img_(3, cfg.embed_dim, 3),
      conv_mask_(cfg.embed_dim, cfg.embed_dim, 3),
      fuse1_(cfg.fusion == FusionMode::concat_conv ? cfg.levels * cfg.embed_dim : cfg.embed_dim,
             cfg.embed_dim, 3),
      fuse2_(cfg.embed_dim, cfg.embed_dim, 3) {
    if (cfg.levels < 1) throw ParamError("GFNetConfig: levels must be >= 1");
    for (int i = 0; i < cfg.levels; ++i) {
        ru_snow_.emplace_back(cfg.embed_dim);
        ru_mask_.emplace_back(cfg.embed_dim);
        if (cfg.guidance == GuidanceMode::concat) {
            cat_conv_.emplace_back(2 * cfg.embed_dim, cfg.embed_dim, 3);
        }
    }
}

void GFNet::init(std::mt19937_64& rng) {
    conv_img_.init(rng);
    conv_mask_.init(rng);
    for (auto& r : ru_snow_) r.init(rng);
    for (auto& r : ru_mask_) r.init(rng);
    for (auto& c : cat_conv_) c.init(rng);
    fuse1_.init(rng);
    fuse2_.init(rng);
}

Tensor GFNet::forward(const Tensor& snowy, const Tensor& mask_features) {
    if (snowy.h() != mask_features.h() || snowy.w() != mask_features.w() ||
        snowy.n() != mask_features.n()) {
        throw DimensionError("GFNet: snowy " + shape_str(snowy) + " and mask features " +
                             shape_str(mask_features) + " must agree spatially");
    }
    Tensor s = conv_img_.forward(snowy);
    Tensor m = conv_mask_.forward(mask_features);

    std::vector<Tensor> residuals;
    for (int i = 0; i < cfg_.levels; ++i) {
        s = ru_snow_[i].forward(s);
        m = ru_mask_[i].forward(m);
        if (cfg_.guidance == GuidanceMode::residual) {
            residuals.push_back(sub(s, m));
        } else {
            residuals.push_back(cat_conv_[i].forward(concat_channels(s, m)));
        }
    }

    Tensor fused;
    if (cfg_.fusion == FusionMode::concat_conv) {
        fused = residuals[0];
        for (int i = 1; i < cfg_.levels; ++i) fused = concat_channels(fused, residuals[i]);
    } else {
        fused = residuals[0];
        for (int i = 1; i < cfg_.levels; ++i) fused = add(fused, residuals[i]);
    }
    return fuse2_.forward(fuse_relu_.forward(fuse1_.forward(fused)));
}

GFNet::InputGrads GFNet::backward(const Tensor& d_fuse) {
    Tensor d = fuse1_.backward(fuse_relu_.backward(fuse2_.backward(d_fuse)));
    const int C = cfg_.embed_dim;
    const int L = cfg_.levels;

    std::vector<Tensor> d_res(L);
    for (int i = 0; i < L; ++i) {
        d_res[i] = cfg_.fusion == FusionMode::concat_conv ? slice_channels(d, i * C, C) : d;
    }

    Tensor ds, dm;  // gradients w.r.t. s_i / m_i, walked from the deepest level down
    for (int i = L - 1; i >= 0; --i) {
        Tensor dsi, dmi;
        if (cfg_.guidance == GuidanceMode::residual) {
            dsi = d_res[i];
            dmi = Tensor::zeros_like(d_res[i]);
            for (std::int64_t j = 0; j < dmi.size(); ++j) dmi[j] = -d_res[i][j];
        } else {
            Tensor dcat = cat_conv_[i].backward(d_res[i]);
            dsi = slice_channels(dcat, 0, C);
            dmi = slice_channels(dcat, C, C);
        }
        if (!ds.empty()) dsi = add(dsi, ds);
        if (!dm.empty()) dmi = add(dmi, dm);
        ds = ru_snow_[i].backward(dsi);
        dm = ru_mask_[i].backward(dmi);
    }

    InputGrads g;
    g.d_snowy = conv_img_.backward(ds);
    g.d_mask_features = conv_mask_.backward(dm);
    return g;
}

void GFNet::collect(ParamRefs& out, const std::string& prefix) {
    conv_img_.collect(out, prefix + ".conv_img");
    conv_mask_.collect(out, prefix + ".conv_mask");
    for (int i = 0; i < cfg_.levels; ++i) {
        ru_snow_[i].collect(out, prefix + ".ru" + std::to_string(i + 1) + "1");
        ru_mask_[i].collect(out, prefix + ".ru" + std::to_string(i + 1) + "2");
        if (cfg_.guidance == GuidanceMode::concat) {
            cat_conv_[i].collect(out, prefix + ".cat" + std::to_string(i + 1));
        }
    }
    fuse1_.collect(out, prefix + ".fuse1");
    fuse2_.collect(out, prefix + ".fuse2");
}

}  // namespace smgarn
