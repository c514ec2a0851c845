#include "smgarn/reconstruct_net.hpp"

namespace smgarn {

MARB::MARB(int channels, ScaleMode scale, AggMode agg)
    : scale_(scale),
      agg_(agg),
      conv1_(channels, channels, scale == ScaleMode::multi ? 1 : 3),
      conv3_(channels, channels, 3),
      conv5_(channels, channels, scale == ScaleMode::multi ? 5 : 3),
      post1_(channels, channels, 3),
      post3_(channels, channels, 3),
      post5_(channels, channels, 3),
      n1_(2 * channels, channels, 3),
      n2_(2 * channels, channels, 3),
      agg_conv_(agg == AggMode::multi ? 2 * channels : 3 * channels, channels, 3) {}

void MARB::init(std::mt19937_64& rng) {
    conv1_.init(rng);
    conv3_.init(rng);
    conv5_.init(rng);
    post1_.init(rng);
    post3_.init(rng);
    post5_.init(rng);
    if (agg_ == AggMode::multi) {
        n1_.init(rng);
        n2_.init(rng);
    }
    agg_conv_.init(rng);
}

Tensor MARB::forward(const Tensor& x) {
    Tensor b1 = r_out1_.forward(post1_.forward(r_in1_.forward(conv1_.forward(x))));
    Tensor b3 = r_out3_.forward(post3_.forward(r_in3_.forward(conv3_.forward(x))));
    Tensor b5 = r_out5_.forward(post5_.forward(r_in5_.forward(conv5_.forward(x))));

    Tensor agg_in;
    if (agg_ == AggMode::multi) {
        Tensor t1 = r_n1_.forward(n1_.forward(concat_channels(b1, b3)));
        Tensor t2 = r_n2_.forward(n2_.forward(concat_channels(b5, b3)));
        agg_in = concat_channels(t1, t2);
    } else {
        agg_in = concat_channels(b1, b3, b5);
    }
    return add(x, agg_conv_.forward(agg_in));
}

Tensor MARB::backward(const Tensor& dy) {
    const Tensor d_agg_in = agg_conv_.backward(dy);
    const int C = dy.c();

    Tensor db1, db3, db5;
    if (agg_ == AggMode::multi) {
        Tensor dt1 = slice_channels(d_agg_in, 0, C);
        Tensor dt2 = slice_channels(d_agg_in, C, C);
        Tensor dcat1 = n1_.backward(r_n1_.backward(dt1));
        Tensor dcat2 = n2_.backward(r_n2_.backward(dt2));
        db1 = slice_channels(dcat1, 0, C);
        db5 = slice_channels(dcat2, 0, C);
        // b3 feeds both pairwise branches
        db3 = add(slice_channels(dcat1, C, C), slice_channels(dcat2, C, C));
    } else {
        db1 = slice_channels(d_agg_in, 0, C);
        db3 = slice_channels(d_agg_in, C, C);
        db5 = slice_channels(d_agg_in, 2 * C, C);
    }

    Tensor dx = conv1_.backward(r_in1_.backward(post1_.backward(r_out1_.backward(db1))));
    dx = add(dx, conv3_.backward(r_in3_.backward(post3_.backward(r_out3_.backward(db3)))));
    dx = add(dx, conv5_.backward(r_in5_.backward(post5_.backward(r_out5_.backward(db5)))));
    return add(dy, dx);
}

void MARB::collect(ParamRefs& out, const std::string& prefix) {
    conv1_.collect(out, prefix + ".b1.conv");
    conv3_.collect(out, prefix + ".b3.conv");
    conv5_.collect(out, prefix + ".b5.conv");
    post1_.collect(out, prefix + ".b1.post");
    post3_.collect(out, prefix + ".b3.post");
    post5_.collect(out, prefix + ".b5.post");
    if (agg_ == AggMode::multi) {
        n1_.collect(out, prefix + ".n1");
        n2_.collect(out, prefix + ".n2");
    }
    agg_conv_.collect(out, prefix + ".agg");
}

ReconstructNet::ReconstructNet(const MARBConfig& cfg)
    : cfg_(cfg), out_conv_(cfg.channels, 3, 3) {
    if (cfg.count < 1) throw ParamError("MARBConfig: count must be >= 1");
    for (int i = 0; i < cfg.count; ++i) marbs_.emplace_back(cfg.channels, cfg.scale, cfg.agg);
}

void ReconstructNet::init(std::mt19937_64& rng) {
    for (auto& m : marbs_) m.init(rng);
    out_conv_.init(rng);
}

Tensor ReconstructNet::forward(const Tensor& fuse) {
    if (fuse.c() != cfg_.channels) {
        throw DimensionError("ReconstructNet: expected " + std::to_string(cfg_.channels) +
                             " channels, got " + shape_str(fuse));
    }
    Tensor t = fuse;
    for (auto& m : marbs_) t = m.forward(t);
    cached_g_ = add(fuse, t);  // global residual
    return clamp_.forward(out_conv_.forward(cached_g_));
}

Tensor ReconstructNet::backward(const Tensor& dy) {
    Tensor dg = out_conv_.backward(clamp_.backward(dy));
    Tensor dt = dg;
    for (auto it = marbs_.rbegin(); it != marbs_.rend(); ++it) dt = it->backward(dt);
    return add(dg, dt);
}

void ReconstructNet::collect(ParamRefs& out, const std::string& prefix) {
    for (std::size_t i = 0; i < marbs_.size(); ++i) {
        marbs_[i].collect(out, prefix + ".marb" + std::to_string(i + 1));
    }
    out_conv_.collect(out, prefix + ".out");
}

}  // namespace smgarn
