#pragma once

#include <random>
#include <string>
#include <vector>

#include "smgarn/kernels.hpp"
#include "smgarn/tensor.hpp"

namespace smgarn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    void zero_grad() { grad.fill(0.0); }
};

using ParamRefs = std::vector<Param*>;

// Same-padding 2D convolution layer. forward() caches its input so that a
// single backward() call can produce input and parameter gradients.
class Conv2d {
public:
    Conv2d(int in_channels, int out_channels, int kernel = 3);

    // Fan-in scaled uniform weights, zero biases.
    void init(std::mt19937_64& rng);

    Tensor forward(const Tensor& x);
    // Accumulates into weight.grad / bias.grad, returns dL/dx.
    Tensor backward(const Tensor& dy);

    void collect(ParamRefs& out, const std::string& prefix);

    int in_channels() const { return in_channels_; }
    int out_channels() const { return out_channels_; }
    int kernel() const { return kernel_; }

    Param weight;
    Param bias;

private:
    int in_channels_, out_channels_, kernel_;
    Tensor cached_input_;
};

// Stateless activations with forward-cache, mirroring the Conv2d call style.
class ReLU {
public:
    Tensor forward(const Tensor& x) {
        cached_input_ = x;
        return kernels::relu_forward(x);
    }
    Tensor backward(const Tensor& dy) { return kernels::relu_backward(cached_input_, dy); }

private:
    Tensor cached_input_;
};

class Sigmoid {
public:
    Tensor forward(const Tensor& x) {
        cached_output_ = kernels::sigmoid_forward(x);
        return cached_output_;
    }
    Tensor backward(const Tensor& dy) { return kernels::sigmoid_backward(cached_output_, dy); }

private:
    Tensor cached_output_;
};

class Clamp01 {
public:
    Tensor forward(const Tensor& x) {
        cached_input_ = x;
        return kernels::clamp01_forward(x);
    }
    Tensor backward(const Tensor& dy) { return kernels::clamp01_backward(cached_input_, dy); }

private:
    Tensor cached_input_;
};

void zero_grads(const ParamRefs& params);
std::int64_t total_param_size(const ParamRefs& params);

}  // namespace smgarn
