#include "smgarn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace smgarn {

namespace {

void check_latent_shapes(const Tensor& img, const Tensor& R, const Tensor& Z, const Tensor& C) {
    if (img.c() != 3) throw DimensionError("compose: image must be RGB, got " + shape_str(img));
    if (R.c() != 1 || Z.c() != 1) {
        throw DimensionError("compose: R and Z must be single channel");
    }
    if (R.n() != img.n() || R.h() != img.h() || R.w() != img.w() || !Z.same_shape(R)) {
        throw DimensionError("compose: latent shapes disagree with image " + shape_str(img));
    }
    check_same_shape(img, C, "compose: C");
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

template <typename T>
void check_range(const std::pair<T, T>& r, const char* name, double lo, double hi) {
    if (r.first > r.second) {
        throw ParamError(std::string("SynthParams: ") + name + " has lo > hi");
    }
    if (static_cast<double>(r.first) < lo || static_cast<double>(r.second) > hi) {
        throw ParamError(std::string("SynthParams: ") + name + " outside its domain");
    }
}

// Separable Gaussian blur on a single-channel (1,1,H,W) map.
void gaussian_blur(Tensor& t, double sigma) {
    const int H = t.h(), W = t.w();
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;

    Tensor tmp = Tensor::zeros_like(t);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, W - 1);
                acc += k[i + radius] * t(0, 0, y, xx);
            }
            tmp(0, 0, y, x) = acc;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, H - 1);
                acc += k[i + radius] * tmp(0, 0, yy, x);
            }
            t(0, 0, y, x) = acc;
        }
}

}  // namespace

void SynthParams::validate() const {
    check_range(flake_count_range, "flake_count_range", 0, 1e9);
    check_range(flake_radius_range, "flake_radius_range", 0.0, 1e9);
    check_range(streak_count_range, "streak_count_range", 0, 1e9);
    check_range(streak_length_range, "streak_length_range", 0.0, 1e9);
    check_range(streak_angle_range, "streak_angle_range", -360.0, 360.0);
    check_range(opacity_range, "opacity_range", 0.0, 1.0);
    check_range(transmission_range, "transmission_range", 0.0, 1.0);
    check_range(atmospheric_range, "atmospheric_range", 0.0, 1.0);
    if (chroma_jitter < 0.0 || chroma_jitter > 1.0) {
        throw ParamError("SynthParams: chroma_jitter must lie in [0,1]");
    }
}

Tensor compose_veilfree(const Tensor& clean, const Tensor& R, const Tensor& Z, const Tensor& C) {
    check_latent_shapes(clean, R, Z, C);
    check_unit_interval(clean, "compose_veilfree: J");
    check_unit_interval(R, "compose_veilfree: R");
    check_unit_interval(Z, "compose_veilfree: Z");
    check_unit_interval(C, "compose_veilfree: C");
    Tensor K = Tensor::zeros_like(clean);
    for (int b = 0; b < clean.n(); ++b)
        for (int y = 0; y < clean.h(); ++y)
            for (int x = 0; x < clean.w(); ++x) {
                const double zr = Z(b, 0, y, x) * R(b, 0, y, x);
                for (int ch = 0; ch < 3; ++ch) {
                    K(b, ch, y, x) = clean(b, ch, y, x) * (1.0 - zr) + C(b, ch, y, x) * zr;
                }
            }
    return K;
}

Tensor compose_snowy(const Tensor& K, const Tensor& T, const Tensor& A) {
    if (K.c() != 3 || T.c() != 1) {
        throw DimensionError("compose_snowy: K must be RGB and T single channel");
    }
    if (T.n() != K.n() || T.h() != K.h() || T.w() != K.w()) {
        throw DimensionError("compose_snowy: T shape disagrees with K");
    }
    check_same_shape(K, A, "compose_snowy: A");
    check_unit_interval(K, "compose_snowy: K");
    check_unit_interval(T, "compose_snowy: T");
    check_unit_interval(A, "compose_snowy: A");
    Tensor I = Tensor::zeros_like(K);
    for (int b = 0; b < K.n(); ++b)
        for (int y = 0; y < K.h(); ++y)
            for (int x = 0; x < K.w(); ++x) {
                const double t = T(b, 0, y, x);
                for (int ch = 0; ch < 3; ++ch) {
                    I(b, ch, y, x) = K(b, ch, y, x) * t + A(b, ch, y, x) * (1.0 - t);
                }
            }
    return I;
}

Tensor invert_veilfree(const Tensor& K, const Tensor& R, const Tensor& Z, const Tensor& C,
                       double eps) {
    check_latent_shapes(K, R, Z, C);
    std::int64_t singular = 0;
    for (int b = 0; b < K.n(); ++b)
        for (int y = 0; y < K.h(); ++y)
            for (int x = 0; x < K.w(); ++x) {
                if (Z(b, 0, y, x) * R(b, 0, y, x) > 1.0 - eps) ++singular;
            }
    if (singular > 0) {
        std::ostringstream os;
        os << "invert_veilfree: ZR exceeds " << (1.0 - eps) << " at " << singular << " pixel(s)";
        throw SingularityError(os.str());
    }
    Tensor J = Tensor::zeros_like(K);
    for (int b = 0; b < K.n(); ++b)
        for (int y = 0; y < K.h(); ++y)
            for (int x = 0; x < K.w(); ++x) {
                const double zr = Z(b, 0, y, x) * R(b, 0, y, x);
                for (int ch = 0; ch < 3; ++ch) {
                    J(b, ch, y, x) =
                        clamp01((K(b, ch, y, x) - C(b, ch, y, x) * zr) / (1.0 - zr));
                }
            }
    return J;
}

std::pair<Tensor, Tensor> render_snow_mask(const SynthParams& params, int H, int W) {
    params.validate();
    if (H < 16 || W < 16) throw DimensionError("render_snow_mask: H and W must be >= 16");

    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Tensor R(1, 1, H, W);
    Tensor Z(1, 1, H, W);

    auto splat = [&](int x0, int x1, int y0, int y1, double z, auto&& coverage) {
        x0 = std::max(0, x0);
        y0 = std::max(0, y0);
        x1 = std::min(W - 1, x1);
        y1 = std::min(H - 1, y1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double cov = coverage(static_cast<double>(x), static_cast<double>(y));
                if (cov <= 0.0) continue;
                R(0, 0, y, x) = std::max(R(0, 0, y, x), cov);
                Z(0, 0, y, x) = std::max(Z(0, 0, y, x), z * cov);
            }
    };

    std::uniform_int_distribution<int> flake_count(params.flake_count_range.first,
                                                   params.flake_count_range.second);
    const int flakes = flake_count(rng);
    for (int i = 0; i < flakes; ++i) {
        const double cx = uni(0.0, W - 1.0);
        const double cy = uni(0.0, H - 1.0);
        const double rx = uni(params.flake_radius_range.first, params.flake_radius_range.second);
        const double aspect = uni(0.6, 1.0);
        const double ry = std::max(0.5, rx * aspect);
        const double theta = uni(0.0, M_PI);
        const double z = uni(params.opacity_range.first, params.opacity_range.second);
        const double ct = std::cos(theta), st = std::sin(theta);
        const double ext = std::max(rx, ry) + 1.5;
        splat(static_cast<int>(cx - ext), static_cast<int>(cx + ext) + 1,
              static_cast<int>(cy - ext), static_cast<int>(cy + ext) + 1, z,
              [&](double x, double y) {
                  const double u = (x - cx) * ct + (y - cy) * st;
                  const double v = -(x - cx) * st + (y - cy) * ct;
                  const double s = std::sqrt((u / rx) * (u / rx) + (v / ry) * (v / ry));
                  // ~1px anti-aliased edge
                  return clamp01((1.0 - s) * std::min(rx, ry) + 0.5);
              });
    }

    std::uniform_int_distribution<int> streak_count(params.streak_count_range.first,
                                                    params.streak_count_range.second);
    const int streaks = streak_count(rng);
    for (int i = 0; i < streaks; ++i) {
        const double cx = uni(0.0, W - 1.0);
        const double cy = uni(0.0, H - 1.0);
        const double len =
            uni(params.streak_length_range.first, params.streak_length_range.second);
        const double ang =
            uni(params.streak_angle_range.first, params.streak_angle_range.second) * M_PI / 180.0;
        const double half_w = uni(0.5, 1.25);
        const double z = uni(params.opacity_range.first, params.opacity_range.second);
        const double dx = std::cos(ang), dy = std::sin(ang);
        const double ax = cx - 0.5 * len * dx, ay = cy - 0.5 * len * dy;
        const double bx = cx + 0.5 * len * dx, by = cy + 0.5 * len * dy;
        const double ext = 0.5 * len + half_w + 1.5;
        splat(static_cast<int>(cx - ext), static_cast<int>(cx + ext) + 1,
              static_cast<int>(cy - ext), static_cast<int>(cy + ext) + 1, z,
              [&](double x, double y) {
                  const double vx = bx - ax, vy = by - ay;
                  const double t =
                      clamp01(((x - ax) * vx + (y - ay) * vy) / (vx * vx + vy * vy + 1e-12));
                  const double px = ax + t * vx, py = ay + t * vy;
                  const double d = std::hypot(x - px, y - py);
                  return clamp01(half_w + 0.5 - d);
              });
    }

    if (params.binary_mask) {
        for (std::int64_t i = 0; i < R.size(); ++i) {
            R[i] = R[i] >= 0.5 ? 1.0 : 0.0;
            Z[i] = R[i] > 0.0 ? std::min(1.0, Z[i] > 0.0 ? Z[i] / std::max(R[i], 1e-12) : 0.0)
                              : 0.0;
        }
    }
    return {std::move(R), std::move(Z)};
}

SnowSample synth_sample(const Tensor& clean, const SynthParams& params) {
    params.validate();
    if (clean.c() != 3) throw DimensionError("synth_sample: clean must be RGB");
    check_unit_interval(clean, "synth_sample: clean");
    const int H = clean.h(), W = clean.w();

    SnowLatents lat;
    auto rz = render_snow_mask(params, H, W);
    lat.R = std::move(rz.first);
    lat.Z = std::move(rz.second);

    // Latents beyond the particle layer draw from an offset stream so the
    // mask stays a pure function of (params, H, W).
    std::mt19937_64 rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    // T: smoothed random field rescaled into transmission_range.
    lat.T = Tensor(1, 1, H, W);
    for (std::int64_t i = 0; i < lat.T.size(); ++i) lat.T[i] = unit(rng);
    gaussian_blur(lat.T, std::max(2.0, std::min(H, W) / 12.0));
    double lo = lat.T[0], hi = lat.T[0];
    for (std::int64_t i = 0; i < lat.T.size(); ++i) {
        lo = std::min(lo, lat.T[i]);
        hi = std::max(hi, lat.T[i]);
    }
    const double t0 = params.transmission_range.first, t1 = params.transmission_range.second;
    for (std::int64_t i = 0; i < lat.T.size(); ++i) {
        const double u = hi > lo ? (lat.T[i] - lo) / (hi - lo) : 0.5;
        lat.T[i] = t0 + (t1 - t0) * u;
    }

    // A: near-constant bright gray with a small per-channel offset.
    lat.A = Tensor(1, 3, H, W);
    const double a_base = uni(params.atmospheric_range.first, params.atmospheric_range.second);
    for (int ch = 0; ch < 3; ++ch) {
        const double a = clamp01(a_base + uni(-0.02, 0.02));
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) lat.A(0, ch, y, x) = a;
    }

    // C: near-white with per-channel jitter.
    lat.C = Tensor(1, 3, H, W);
    for (int ch = 0; ch < 3; ++ch) {
        const double c = clamp01(1.0 - params.chroma_jitter * unit(rng));
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) lat.C(0, ch, y, x) = c;
    }

    SnowSample s;
    s.clean = clean;
    s.snowy = compose_snowy(compose_veilfree(clean, lat.R, lat.Z, lat.C), lat.T, lat.A);
    s.mask = lat.R;
    s.latents = std::move(lat);
    return s;
}

Tensor procedural_clean(int H, int W, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor img(1, 3, H, W);

    // Smooth two-corner gradient per channel.
    double c00[3], c11[3];
    for (int ch = 0; ch < 3; ++ch) {
        c00[ch] = 0.1 + 0.8 * unit(rng);
        c11[ch] = 0.1 + 0.8 * unit(rng);
    }
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double u = 0.5 * (static_cast<double>(x) / (W - 1) +
                                        static_cast<double>(y) / (H - 1));
                img(0, ch, y, x) = c00[ch] * (1.0 - u) + c11[ch] * u;
            }

    // A few soft rectangles and disks for structure.
    const int shapes = 3 + static_cast<int>(unit(rng) * 4);
    for (int s = 0; s < shapes; ++s) {
        const bool disk = unit(rng) < 0.5;
        const double cx = unit(rng) * W, cy = unit(rng) * H;
        const double rx = (0.05 + 0.2 * unit(rng)) * W;
        const double ry = (0.05 + 0.2 * unit(rng)) * H;
        double col[3];
        for (int ch = 0; ch < 3; ++ch) col[ch] = 0.05 + 0.9 * unit(rng);
        const double alpha = 0.4 + 0.5 * unit(rng);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                bool inside;
                if (disk) {
                    const double u = (x - cx) / rx, v = (y - cy) / ry;
                    inside = u * u + v * v <= 1.0;
                } else {
                    inside = std::fabs(x - cx) <= rx && std::fabs(y - cy) <= ry;
                }
                if (!inside) continue;
                for (int ch = 0; ch < 3; ++ch) {
                    img(0, ch, y, x) =
                        clamp01(img(0, ch, y, x) * (1.0 - alpha) + col[ch] * alpha);
                }
            }
    }
    return img;
}

}  // namespace smgarn
