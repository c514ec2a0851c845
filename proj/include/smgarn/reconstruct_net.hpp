#pragma once

#include <vector>

#include "smgarn/layers.hpp"

namespace smgarn {

enum class ScaleMode { multi, single };
enum class AggMode { multi, single };

struct MARBConfig {
    int channels = 112;
    ScaleMode scale = ScaleMode::multi;
    AggMode agg = AggMode::multi;
    int count = 3;
};

// Multi-scale Aggregated Residual Block. Three parallel branches with
// 1/3/5 kernels (all 3x3 in single-scale mode), each followed by a 3x3
// convolution; staged pairwise aggregation of (b1,b3) and (b5,b3) in
// multi-agg mode, a single 3C->C aggregation in single-agg mode; block
// residual around the whole thing.
class MARB {
public:
    MARB(int channels, ScaleMode scale, AggMode agg);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void collect(ParamRefs& out, const std::string& prefix);
    void init(std::mt19937_64& rng);

private:
    ScaleMode scale_;
    AggMode agg_;
    Conv2d conv1_, conv3_, conv5_;     // parallel entry branches
    Conv2d post1_, post3_, post5_;     // per-branch 3x3 follow-ups
    Conv2d n1_, n2_;                   // pairwise aggregations (multi-agg)
    Conv2d agg_conv_;                  // final aggregation before the residual add
    ReLU r_in1_, r_in3_, r_in5_, r_out1_, r_out3_, r_out5_, r_n1_, r_n2_;
};

// G = F_fuse + MARB_n(...MARB_1(F_fuse)); output conv C->3 then clamp to [0,1].
class ReconstructNet {
public:
    explicit ReconstructNet(const MARBConfig& cfg);

    Tensor forward(const Tensor& fuse);
    Tensor backward(const Tensor& dy);

    // Feature tensor G before the output conv from the last forward call.
    const Tensor& last_residual_features() const { return cached_g_; }

    void collect(ParamRefs& out, const std::string& prefix = "recon");
    void init(std::mt19937_64& rng);

    const MARBConfig& config() const { return cfg_; }

private:
    MARBConfig cfg_;
    std::vector<MARB> marbs_;
    Conv2d out_conv_;
    Clamp01 clamp_;
    Tensor cached_g_;
};

}  // namespace smgarn
