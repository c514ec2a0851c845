#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "smgarn/kernels.hpp"

namespace smgarn::kernels {

namespace {

// Packs one batch item into a (Ci*K*K) x (H*W) row-major patch matrix.
void im2col(const Tensor& x, int b, int K, std::vector<double>& col) {
    const int Ci = x.c(), H = x.h(), W = x.w(), P = K / 2;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    col.assign(static_cast<std::size_t>(Ci) * K * K * hw, 0.0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int ci = 0; ci < Ci; ++ci)
        for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
                double* row = col.data() + ((static_cast<std::int64_t>(ci) * K + ky) * K + kx) * hw;
                for (int oy = 0; oy < H; ++oy) {
                    const int iy = oy + ky - P;
                    if (iy < 0 || iy >= H) continue;
                    const int x0 = std::max(0, P - kx);
                    const int x1 = std::min(W, W + P - kx);
                    const double* src = &x(b, ci, iy, 0) + kx - P;
                    double* dst = row + static_cast<std::int64_t>(oy) * W;
                    for (int ox = x0; ox < x1; ++ox) dst[ox] = src[ox];
                }
            }
}

// Scatter-add of a patch matrix back onto the input plane.
void col2im_add(const std::vector<double>& col, int K, Tensor& dx, int b) {
    const int Ci = dx.c(), H = dx.h(), W = dx.w(), P = K / 2;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < Ci; ++ci)
        for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
                const double* row =
                    col.data() + ((static_cast<std::int64_t>(ci) * K + ky) * K + kx) * hw;
                for (int oy = 0; oy < H; ++oy) {
                    const int iy = oy + ky - P;
                    if (iy < 0 || iy >= H) continue;
                    const int x0 = std::max(0, P - kx);
                    const int x1 = std::min(W, W + P - kx);
                    double* dst = &dx(b, ci, iy, 0) + kx - P;
                    const double* src = row + static_cast<std::int64_t>(oy) * W;
                    for (int ox = x0; ox < x1; ++ox) dst[ox] += src[ox];
                }
            }
}

}  // namespace

namespace parallel {

void conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, Tensor& y) {
    check_conv_args(x, weight, bias);
    const int B = x.n(), H = x.h(), W = x.w();
    const int Co = weight.n(), Ci = weight.c(), K = weight.h();
    const int rows = Ci * K * K;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    y = Tensor(B, Co, H, W);
    std::vector<double> col;
    for (int b = 0; b < B; ++b) {
        im2col(x, b, K, col);
        double* yb = &y(b, 0, 0, 0);
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, Co, static_cast<int>(hw), rows, 1.0,
                    weight.data(), rows, col.data(), static_cast<int>(hw), 0.0, yb,
                    static_cast<int>(hw));
#pragma omp parallel for schedule(static)
        for (int co = 0; co < Co; ++co) {
            const double bv = bias(co, 0, 0, 0);
            double* p = yb + static_cast<std::int64_t>(co) * hw;
            for (std::int64_t i = 0; i < hw; ++i) p[i] += bv;
        }
    }
}

void conv2d_backward_input(const Tensor& weight, const Tensor& dy, Tensor& dx) {
    const int B = dy.n(), Co = dy.c(), H = dy.h(), W = dy.w();
    const int Ci = weight.c(), K = weight.h();
    if (Co != weight.n()) {
        throw DimensionError("conv2d_backward_input: dy channels vs weight mismatch");
    }
    const int rows = Ci * K * K;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    dx = Tensor(B, Ci, H, W);
    std::vector<double> dcol(static_cast<std::size_t>(rows) * hw);
    for (int b = 0; b < B; ++b) {
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, rows, static_cast<int>(hw), Co, 1.0,
                    weight.data(), rows, &dy(b, 0, 0, 0), static_cast<int>(hw), 0.0, dcol.data(),
                    static_cast<int>(hw));
        col2im_add(dcol, K, dx, b);
    }
}

void conv2d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db) {
    const int B = x.n(), Ci = x.c(), H = x.h(), W = x.w();
    const int Co = dy.c(), K = dw.h();
    if (dy.n() != B || dy.h() != H || dy.w() != W) {
        throw DimensionError("conv2d_backward_params: x/dy shape mismatch");
    }
    const int rows = Ci * K * K;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    std::vector<double> col;
    for (int b = 0; b < B; ++b) {
        im2col(x, b, K, col);
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, Co, rows, static_cast<int>(hw), 1.0,
                    &dy(b, 0, 0, 0), static_cast<int>(hw), col.data(), static_cast<int>(hw), 1.0,
                    dw.data(), rows);
#pragma omp parallel for schedule(static)
        for (int co = 0; co < Co; ++co) {
            double s = 0.0;
            const double* p = &dy(b, co, 0, 0);
            for (std::int64_t i = 0; i < hw; ++i) s += p[i];
            db(co, 0, 0, 0) += s;
        }
    }
}

}  // namespace parallel

Backend& active_backend() {
    static Backend be = Backend::parallel;
    return be;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    Tensor y;
    if (active_backend() == Backend::serial)
        serial::conv2d_forward(x, weight, bias, y);
    else
        parallel::conv2d_forward(x, weight, bias, y);
    return y;
}

Tensor conv2d_backward_input(const Tensor& weight, const Tensor& dy, int /*in_channels*/) {
    Tensor dx;
    if (active_backend() == Backend::serial)
        serial::conv2d_backward_input(weight, dy, dx);
    else
        parallel::conv2d_backward_input(weight, dy, dx);
    return dx;
}

void conv2d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db) {
    if (active_backend() == Backend::serial)
        serial::conv2d_backward_params(x, dy, dw, db);
    else
        parallel::conv2d_backward_params(x, dy, dw, db);
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx = Tensor::zeros_like(x);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

Tensor sigmoid_forward(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
    Tensor dx = Tensor::zeros_like(y);
    const std::int64_t n = y.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
    return dx;
}

Tensor clamp01_forward(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] < 0.0 ? 0.0 : (x[i] > 1.0 ? 1.0 : x[i]);
    return y;
}

Tensor clamp01_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx = Tensor::zeros_like(x);
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dx[i] = (x[i] > 0.0 && x[i] < 1.0) ? dy[i] : 0.0;
    return dx;
}

}  // namespace smgarn::kernels
