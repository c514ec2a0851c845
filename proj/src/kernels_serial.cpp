#include "smgarn/kernels.hpp"

namespace smgarn::kernels {

void check_conv_args(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const int k = weight.h();
    if (weight.h() != weight.w() || k % 2 == 0) {
        throw DimensionError("conv2d: kernel must be square and odd, got " + shape_str(weight));
    }
    if (x.c() != weight.c()) {
        throw DimensionError("conv2d: input channels " + shape_str(x) + " do not match weight " +
                             shape_str(weight));
    }
    if (bias.n() != weight.n() || bias.c() != 1 || bias.h() != 1 || bias.w() != 1) {
        throw DimensionError("conv2d: bias shape " + shape_str(bias) + " must be (Co,1,1,1)");
    }
}

namespace serial {

void conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, Tensor& y) {
    check_conv_args(x, weight, bias);
    const int B = x.n(), Ci = x.c(), H = x.h(), W = x.w();
    const int Co = weight.n(), K = weight.h(), P = K / 2;
    y = Tensor(B, Co, H, W);
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < Co; ++co)
            for (int oy = 0; oy < H; ++oy)
                for (int ox = 0; ox < W; ++ox) {
                    double acc = bias(co, 0, 0, 0);
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int ky = 0; ky < K; ++ky) {
                            const int iy = oy + ky - P;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < K; ++kx) {
                                const int ix = ox + kx - P;
                                if (ix < 0 || ix >= W) continue;
                                acc += x(b, ci, iy, ix) * weight(co, ci, ky, kx);
                            }
                        }
                    y(b, co, oy, ox) = acc;
                }
}

void conv2d_backward_input(const Tensor& weight, const Tensor& dy, Tensor& dx) {
    const int B = dy.n(), Co = dy.c(), H = dy.h(), W = dy.w();
    const int Ci = weight.c(), K = weight.h(), P = K / 2;
    if (Co != weight.n()) {
        throw DimensionError("conv2d_backward_input: dy channels vs weight mismatch");
    }
    dx = Tensor(B, Ci, H, W);
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < Co; ++co)
            for (int oy = 0; oy < H; ++oy)
                for (int ox = 0; ox < W; ++ox) {
                    const double g = dy(b, co, oy, ox);
                    if (g == 0.0) continue;
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int ky = 0; ky < K; ++ky) {
                            const int iy = oy + ky - P;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < K; ++kx) {
                                const int ix = ox + kx - P;
                                if (ix < 0 || ix >= W) continue;
                                dx(b, ci, iy, ix) += g * weight(co, ci, ky, kx);
                            }
                        }
                }
}

void conv2d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db) {
    const int B = x.n(), Ci = x.c(), H = x.h(), W = x.w();
    const int Co = dy.c(), K = dw.h(), P = K / 2;
    if (dy.n() != B || dy.h() != H || dy.w() != W) {
        throw DimensionError("conv2d_backward_params: x/dy shape mismatch");
    }
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < Co; ++co)
            for (int oy = 0; oy < H; ++oy)
                for (int ox = 0; ox < W; ++ox) {
                    const double g = dy(b, co, oy, ox);
                    db(co, 0, 0, 0) += g;
                    if (g == 0.0) continue;
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int ky = 0; ky < K; ++ky) {
                            const int iy = oy + ky - P;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < K; ++kx) {
                                const int ix = ox + kx - P;
                                if (ix < 0 || ix >= W) continue;
                                dw(co, ci, ky, kx) += g * x(b, ci, iy, ix);
                            }
                        }
                }
}

}  // namespace serial
}  // namespace smgarn::kernels
