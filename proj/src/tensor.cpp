#include "smgarn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace smgarn {

Tensor::Tensor(int n, int c, int h, int w, double fill) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
        std::ostringstream os;
        os << "tensor dims must be >= 1, got (" << n << "," << c << "," << h << "," << w << ")";
        throw DimensionError(os.str());
    }
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::in_unit_interval() const {
    for (double v : data_) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "(" << t.n() << "," << t.c() << "," << t.h() << "," << t.w() << ")";
    return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const std::string& ctx) {
    if (!a.same_shape(b)) {
        throw DimensionError(ctx + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}

void check_unit_interval(const Tensor& t, const std::string& ctx) {
    if (!t.in_unit_interval()) {
        throw DomainError(ctx + ": values outside [0,1]");
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor y = Tensor::zeros_like(a);
    for (std::int64_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor y = Tensor::zeros_like(a);
    for (std::int64_t i = 0; i < a.size(); ++i) y[i] = a[i] - b[i];
    return y;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "hadamard");
    Tensor y = Tensor::zeros_like(a);
    for (std::int64_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
    return y;
}

namespace {
void copy_channel_block(const Tensor& src, Tensor& dst, int dst_c0) {
    const std::int64_t plane = static_cast<std::int64_t>(src.h()) * src.w();
    for (int b = 0; b < src.n(); ++b) {
        const double* s = src.data() + static_cast<std::int64_t>(b) * src.c() * plane;
        double* d = dst.data() + (static_cast<std::int64_t>(b) * dst.c() + dst_c0) * plane;
        std::memcpy(d, s, static_cast<std::size_t>(src.c() * plane) * sizeof(double));
    }
}
}  // namespace

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw DimensionError("concat_channels: incompatible shapes " + shape_str(a) + " vs " +
                             shape_str(b));
    }
    Tensor y(a.n(), a.c() + b.c(), a.h(), a.w());
    copy_channel_block(a, y, 0);
    copy_channel_block(b, y, a.c());
    return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b, const Tensor& c) {
    return concat_channels(concat_channels(a, b), c);
}

Tensor slice_channels(const Tensor& x, int c_from, int channels) {
    if (c_from < 0 || c_from + channels > x.c()) {
        throw DimensionError("slice_channels: range out of bounds for " + shape_str(x));
    }
    Tensor y(x.n(), channels, x.h(), x.w());
    const std::int64_t plane = static_cast<std::int64_t>(x.h()) * x.w();
    for (int b = 0; b < x.n(); ++b) {
        const double* s = x.data() + (static_cast<std::int64_t>(b) * x.c() + c_from) * plane;
        double* d = y.data() + static_cast<std::int64_t>(b) * channels * plane;
        std::memcpy(d, s, static_cast<std::size_t>(channels * plane) * sizeof(double));
    }
    return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace smgarn
