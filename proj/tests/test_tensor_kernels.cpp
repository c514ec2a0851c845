#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "smgarn/kernels.hpp"
#include "smgarn/tensor.hpp"

using namespace smgarn;

namespace {

// Independent direct-convolution oracle: same-padding cross-correlation
// written as plainly as possible, used to vet both kernel backends.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int K = w.h(), P = K / 2;
    Tensor y(x.n(), w.n(), x.h(), x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int co = 0; co < w.n(); ++co)
            for (int oy = 0; oy < x.h(); ++oy)
                for (int ox = 0; ox < x.w(); ++ox) {
                    double acc = b(co, 0, 0, 0);
                    for (int ci = 0; ci < x.c(); ++ci)
                        for (int ky = 0; ky < K; ++ky)
                            for (int kx = 0; kx < K; ++kx) {
                                const int iy = oy + ky - P, ix = ox + kx - P;
                                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                                acc += x(n, ci, iy, ix) * w(co, ci, ky, kx);
                            }
                    y(n, co, oy, ox) = acc;
                }
    return y;
}

struct ConvCase {
    Tensor x, w, b;
};

ConvCase random_case(std::mt19937_64& rng, int n, int ci, int co, int k, int h, int wdt) {
    ConvCase c{Tensor(n, ci, h, wdt), Tensor(co, ci, k, k), Tensor(co, 1, 1, 1)};
    gradcheck::fill_random(c.x, rng);
    gradcheck::fill_random(c.w, rng);
    gradcheck::fill_random(c.b, rng);
    return c;
}

}  // namespace

TEST_CASE("tensor helpers") {
    Tensor a(1, 2, 3, 3, 1.0), b(1, 2, 3, 3, 2.0);
    CHECK(max_abs_diff(add(a, b), Tensor(1, 2, 3, 3, 3.0)) == 0.0);
    CHECK(max_abs_diff(sub(b, a), Tensor(1, 2, 3, 3, 1.0)) == 0.0);
    CHECK(max_abs_diff(hadamard(a, b), Tensor(1, 2, 3, 3, 2.0)) == 0.0);

    Tensor cat = concat_channels(a, b);
    CHECK(cat.c() == 4);
    CHECK(max_abs_diff(slice_channels(cat, 0, 2), a) == 0.0);
    CHECK(max_abs_diff(slice_channels(cat, 2, 2), b) == 0.0);

    Tensor cat3 = concat_channels(a, b, a);
    CHECK(cat3.c() == 6);
    CHECK(max_abs_diff(slice_channels(cat3, 4, 2), a) == 0.0);

    Tensor c(1, 2, 3, 4);
    CHECK_THROWS_AS(add(a, c), DimensionError);
    CHECK_THROWS_AS((void)check_same_shape(a, c, "test"), DimensionError);

    Tensor u(1, 1, 2, 2, 0.5);
    CHECK(u.in_unit_interval());
    u(0, 0, 0, 0) = 1.5;
    CHECK_FALSE(u.in_unit_interval());
    CHECK_THROWS_AS(check_unit_interval(u, "test"), DomainError);
}

TEST_CASE("serial conv matches independent oracle") {
    std::mt19937_64 rng(11);
    for (int k : {1, 3, 5}) {
        ConvCase c = random_case(rng, 2, 3, 4, k, 9, 7);
        Tensor y_ref = conv_oracle(c.x, c.w, c.b);
        Tensor y(c.x.n(), c.w.n(), c.x.h(), c.x.w());
        kernels::serial::conv2d_forward(c.x, c.w, c.b, y);
        CHECK(max_abs_diff(y, y_ref) < 1e-12);
    }
}

TEST_CASE("parallel conv matches serial on odd shapes") {
    std::mt19937_64 rng(22);
    for (int k : {1, 3, 5}) {
        ConvCase c = random_case(rng, 2, 4, 5, k, 13, 11);
        Tensor ys(c.x.n(), c.w.n(), c.x.h(), c.x.w());
        Tensor yp = Tensor::zeros_like(ys);
        kernels::serial::conv2d_forward(c.x, c.w, c.b, ys);
        kernels::parallel::conv2d_forward(c.x, c.w, c.b, yp);
        CHECK(max_abs_diff(ys, yp) < 1e-10);
    }
}

TEST_CASE("backward kernels agree across backends") {
    std::mt19937_64 rng(33);
    ConvCase c = random_case(rng, 2, 3, 4, 3, 10, 12);
    Tensor dy(c.x.n(), c.w.n(), c.x.h(), c.x.w());
    gradcheck::fill_random(dy, rng);

    Tensor dxs = Tensor::zeros_like(c.x), dxp = Tensor::zeros_like(c.x);
    kernels::serial::conv2d_backward_input(c.w, dy, dxs);
    kernels::parallel::conv2d_backward_input(c.w, dy, dxp);
    CHECK(max_abs_diff(dxs, dxp) < 1e-10);

    Tensor dws = Tensor::zeros_like(c.w), dbs = Tensor::zeros_like(c.b);
    Tensor dwp = Tensor::zeros_like(c.w), dbp = Tensor::zeros_like(c.b);
    kernels::serial::conv2d_backward_params(c.x, dy, dws, dbs);
    kernels::parallel::conv2d_backward_params(c.x, dy, dwp, dbp);
    CHECK(max_abs_diff(dws, dwp) < 1e-10);
    CHECK(max_abs_diff(dbs, dbp) < 1e-10);
}

TEST_CASE("conv backward matches finite differences") {
    std::mt19937_64 rng(44);
    ConvCase c = random_case(rng, 1, 3, 2, 3, 8, 8);
    Tensor p(1, 2, 8, 8);
    gradcheck::fill_random(p, rng);

    auto loss = [&] { return gradcheck::project(kernels::conv2d_forward(c.x, c.w, c.b), p); };

    Tensor dx = kernels::conv2d_backward_input(c.w, p, c.x.c());
    Tensor dw = Tensor::zeros_like(c.w), db = Tensor::zeros_like(c.b);
    kernels::conv2d_backward_params(c.x, p, dw, db);

    CHECK(gradcheck::check_tensor_fd(c.x, dx, loss, rng, 15) == 0);
    CHECK(gradcheck::check_tensor_fd(c.w, dw, loss, rng, 15) == 0);
    CHECK(gradcheck::check_tensor_fd(c.b, db, loss, rng, 4) == 0);
}

TEST_CASE("conv argument validation") {
    Tensor x(1, 3, 8, 8), b(4, 1, 1, 1);
    Tensor w_even(4, 3, 2, 2), w_badc(4, 2, 3, 3), w_ok(4, 3, 3, 3);
    CHECK_THROWS_AS(kernels::check_conv_args(x, w_even, b), DimensionError);
    CHECK_THROWS_AS(kernels::check_conv_args(x, w_badc, b), DimensionError);
    CHECK_NOTHROW(kernels::check_conv_args(x, w_ok, b));
}

TEST_CASE("pointwise ops and their gradients") {
    std::mt19937_64 rng(55);
    Tensor x(1, 2, 6, 6);
    gradcheck::fill_random(x, rng, -2.0, 2.0);
    Tensor p = Tensor::zeros_like(x);
    gradcheck::fill_random(p, rng);

    SUBCASE("relu") {
        Tensor y = kernels::relu_forward(x);
        for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == std::max(0.0, x[i]));
        Tensor dx = kernels::relu_backward(x, p);
        auto loss = [&] { return gradcheck::project(kernels::relu_forward(x), p); };
        CHECK(gradcheck::check_tensor_fd(x, dx, loss, rng, 15) == 0);
    }
    SUBCASE("sigmoid") {
        Tensor y = kernels::sigmoid_forward(x);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            CHECK(y[i] == doctest::Approx(1.0 / (1.0 + std::exp(-x[i]))));
            CHECK(y[i] > 0.0);
            CHECK(y[i] < 1.0);
        }
        Tensor dx = kernels::sigmoid_backward(y, p);
        auto loss = [&] { return gradcheck::project(kernels::sigmoid_forward(x), p); };
        CHECK(gradcheck::check_tensor_fd(x, dx, loss, rng, 15) == 0);
    }
    SUBCASE("clamp01") {
        Tensor y = kernels::clamp01_forward(x);
        CHECK(y.in_unit_interval());
        Tensor dx = kernels::clamp01_backward(x, p);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            if (x[i] <= 0.0 || x[i] >= 1.0) CHECK(dx[i] == 0.0);
        }
    }
}

TEST_CASE("backend dispatcher honors active_backend") {
    std::mt19937_64 rng(66);
    ConvCase c = random_case(rng, 1, 2, 3, 3, 7, 9);

    kernels::active_backend() = kernels::Backend::serial;
    Tensor ys = kernels::conv2d_forward(c.x, c.w, c.b);
    kernels::active_backend() = kernels::Backend::parallel;
    Tensor yp = kernels::conv2d_forward(c.x, c.w, c.b);
    CHECK(max_abs_diff(ys, yp) < 1e-10);
}
