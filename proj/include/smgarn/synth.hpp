#pragma once

#include <optional>
#include <random>
#include <string>
#include <utility>

#include "smgarn/tensor.hpp"

namespace smgarn {

// Latent maps of the snow formation model:
//   K = J(1 - ZR) + CZR        (veiling-free snow scene)
//   I = KT + A(1 - T)          (snowy image with veiling effect)
struct SnowLatents {
    Tensor R;  // (B,1,H,W) snow location, soft mask in [0,1]
    Tensor Z;  // (B,1,H,W) snow opacity in [0,1]
    Tensor C;  // (B,3,H,W) snow chromatic map in [0,1]
    Tensor T;  // (B,1,H,W) media transmission in [0,1]
    Tensor A;  // (B,3,H,W) atmospheric light in [0,1]
};

struct SnowSample {
    std::string id;
    std::optional<Tensor> clean;  // (1,3,H,W)
    Tensor snowy;                 // (1,3,H,W)
    std::optional<Tensor> mask;   // (1,1,H,W)
    std::optional<SnowLatents> latents;
};

struct SynthParams {
    std::pair<int, int> flake_count_range{20, 60};
    std::pair<double, double> flake_radius_range{1.0, 4.0};
    std::pair<int, int> streak_count_range{5, 20};
    std::pair<double, double> streak_length_range{10.0, 40.0};
    std::pair<double, double> streak_angle_range{45.0, 135.0};  // degrees
    std::pair<double, double> opacity_range{0.4, 1.0};
    std::pair<double, double> transmission_range{0.6, 0.95};
    std::pair<double, double> atmospheric_range{0.7, 0.95};
    double chroma_jitter = 0.1;
    unsigned long long seed = 0;
    // Threshold the rendered mask to {0,1} instead of keeping soft edges.
    bool binary_mask = false;

    void validate() const;
};

// K(x) = J(x)(1 - Z(x)R(x)) + C(x)Z(x)R(x); ZR broadcast across RGB.
Tensor compose_veilfree(const Tensor& clean, const Tensor& R, const Tensor& Z, const Tensor& C);

// I(x) = K(x)T(x) + A(x)(1 - T(x)).
Tensor compose_snowy(const Tensor& K, const Tensor& T, const Tensor& A);

// Analytic inverse of compose_veilfree; requires ZR <= 1 - eps everywhere.
Tensor invert_veilfree(const Tensor& K, const Tensor& R, const Tensor& Z, const Tensor& C,
                       double eps = 0.05);

// Renders the particle mask R and opacity map Z. Pure function of
// (params, H, W); the same seed yields bitwise-identical output.
std::pair<Tensor, Tensor> render_snow_mask(const SynthParams& params, int H, int W);

// Samples latents and composes a full paired sample from a clean image.
SnowSample synth_sample(const Tensor& clean, const SynthParams& params);

// Procedural clean image (smooth gradients plus a few soft shapes); used
// when no photographic source data is available.
Tensor procedural_clean(int H, int W, std::mt19937_64& rng);

}  // namespace smgarn
