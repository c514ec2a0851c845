#pragma once

// Finite-difference gradient checking utilities shared by the test suites.
// The analytic gradients are validated against central differences with a
// random-projection scalar loss L = sum(P .* f(x)).

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "smgarn/layers.hpp"
#include "smgarn/tensor.hpp"

namespace gradcheck {

inline void fill_random(smgarn::Tensor& t, std::mt19937_64& rng, double lo = -1.0,
                        double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

inline double project(const smgarn::Tensor& y, const smgarn::Tensor& p) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) acc += y[i] * p[i];
    return acc;
}

inline double rel_err(double fd, double an) {
    const double scale = std::max({1e-6, std::abs(fd), std::abs(an)});
    return std::abs(fd - an) / scale;
}

// Central-difference check of `analytic` (a snapshot of dL/dvalue) against
// the pure re-evaluation `loss`. Samples `samples` coordinates; returns the
// number of coordinates whose relative error exceeds `tol`.
inline int check_tensor_fd(smgarn::Tensor& value, const smgarn::Tensor& analytic,
                           const std::function<double()>& loss, std::mt19937_64& rng,
                           int samples = 10, double h = 1e-5, double tol = 1e-3) {
    int failures = 0;
    std::uniform_int_distribution<std::int64_t> pick(0, value.size() - 1);
    for (int s = 0; s < samples; ++s) {
        const std::int64_t i = pick(rng);
        const double saved = value[i];
        const double an = analytic[i];
        // A ReLU kink within +-h of a preactivation corrupts the central
        // difference; shrinking h moves the stencil off the kink, while a
        // genuinely wrong analytic gradient keeps failing at every step.
        bool ok = false;
        for (const double step : {h, h / 10.0, h / 100.0}) {
            value[i] = saved + step;
            const double up = loss();
            value[i] = saved - step;
            const double dn = loss();
            value[i] = saved;
            const double fd = (up - dn) / (2.0 * step);
            if ((std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) || rel_err(fd, an) <= tol) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            // Zero-initialized biases can leave a ReLU preactivation exactly
            // at 0, a kink no step size moves off of. There the directional
            // derivatives differ and the analytic gradient is a valid
            // subgradient iff it matches one of the one-sided slopes.
            value[i] = saved + h;
            const double up = loss();
            value[i] = saved - h;
            const double dn = loss();
            value[i] = saved;
            const double mid = loss();
            const double right = (up - mid) / h;
            const double left = (mid - dn) / h;
            if (rel_err(right, an) <= tol || rel_err(left, an) <= tol) ok = true;
        }
        if (!ok) ++failures;
    }
    return failures;
}

// Checks every parameter in `params` (>= samples coordinates each) after the
// caller has run one analytic backward pass.
inline int check_params_fd(const smgarn::ParamRefs& params, const std::function<double()>& loss,
                           std::mt19937_64& rng, int samples = 10, double h = 1e-5,
                           double tol = 1e-3) {
    int failures = 0;
    for (smgarn::Param* p : params) {
        smgarn::Tensor analytic = p->grad;  // snapshot before re-evaluations
        failures += check_tensor_fd(p->value, analytic, loss, rng, samples, h, tol);
    }
    return failures;
}

// Sets a KxK conv to `scale` times the channel-wise identity (center tap of
// each matching in/out channel pair), zero bias.
inline void set_identity(smgarn::Conv2d& conv, double scale = 1.0) {
    conv.weight.value.fill(0.0);
    conv.bias.value.fill(0.0);
    const int k = conv.kernel();
    for (int c = 0; c < std::min(conv.in_channels(), conv.out_channels()); ++c) {
        conv.weight.value(c, c, k / 2, k / 2) = scale;
    }
}

}  // namespace gradcheck
