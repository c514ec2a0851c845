#include "smgarn/layers.hpp"

#include <cmath>

namespace smgarn {

Conv2d::Conv2d(int in_channels, int out_channels, int kernel)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel) {
    if (in_channels < 1 || out_channels < 1) {
        throw ParamError("Conv2d: channel counts must be >= 1");
    }
    if (kernel % 2 == 0 || kernel < 1) {
        throw ParamError("Conv2d: kernel must be odd and positive");
    }
    weight.value = Tensor(out_channels, in_channels, kernel, kernel);
    weight.grad = Tensor::zeros_like(weight.value);
    bias.value = Tensor(out_channels, 1, 1, 1);
    bias.grad = Tensor::zeros_like(bias.value);
}

void Conv2d::init(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in_channels_) * kernel_ * kernel_;
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::int64_t i = 0; i < weight.value.size(); ++i) weight.value[i] = dist(rng);
    bias.value.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c() != in_channels_) {
        throw DimensionError("Conv2d: expected " + std::to_string(in_channels_) +
                             " input channels, got " + shape_str(x));
    }
    cached_input_ = x;
    return kernels::conv2d_forward(x, weight.value, bias.value);
}

Tensor Conv2d::backward(const Tensor& dy) {
    kernels::conv2d_backward_params(cached_input_, dy, weight.grad, bias.grad);
    return kernels::conv2d_backward_input(weight.value, dy, in_channels_);
}

void Conv2d::collect(ParamRefs& out, const std::string& prefix) {
    weight.name = prefix + ".weight";
    bias.name = prefix + ".bias";
    out.push_back(&weight);
    out.push_back(&bias);
}

void zero_grads(const ParamRefs& params) {
    for (Param* p : params) p->zero_grad();
}

std::int64_t total_param_size(const ParamRefs& params) {
    std::int64_t n = 0;
    for (Param* p : params) n += p->value.size();
    return n;
}

}  // namespace smgarn
