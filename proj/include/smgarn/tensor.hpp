#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "smgarn/errors.hpp"

namespace smgarn {

// Dense rank-4 tensor in NCHW order, float64 throughout.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int c, int h, int w, double fill = 0.0);

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::array<int, 4> shape() const { return {n_, c_, h_, w_}; }

    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator()(int b, int ch, int y, int x) {
        return data_[((static_cast<std::int64_t>(b) * c_ + ch) * h_ + y) * w_ + x];
    }
    const double& operator()(int b, int ch, int y, int x) const {
        return data_[((static_cast<std::int64_t>(b) * c_ + ch) * h_ + y) * w_ + x];
    }
    double& operator[](std::int64_t i) { return data_[i]; }
    double operator[](std::int64_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape() == other.shape(); }

    void fill(double v);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.n_, t.c_, t.h_, t.w_); }

    bool in_unit_interval() const;

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

std::string shape_str(const Tensor& t);

void check_same_shape(const Tensor& a, const Tensor& b, const std::string& ctx);
void check_unit_interval(const Tensor& t, const std::string& ctx);

// Elementwise helpers used across modules.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b, const Tensor& c);
// Inverse of concat: copies the [c_from, c_from+channels) slice.
Tensor slice_channels(const Tensor& x, int c_from, int channels);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace smgarn
