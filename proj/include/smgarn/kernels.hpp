#pragma once

#include "smgarn/tensor.hpp"

// Convolution kernels come in two flavors: a straightforward serial
// reference and a fast path (im2col + BLAS GEMM, OpenMP for the packing
// loops). Both implement same-padding cross-correlation with odd kernels.
// The serial reference stays around as the correctness oracle and as the
// baseline for the benchmark target.
namespace smgarn::kernels {

enum class Backend { serial, parallel };

// Process-wide default backend used by the layer dispatchers.
Backend& active_backend();

namespace serial {
void conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, Tensor& y);
void conv2d_backward_input(const Tensor& weight, const Tensor& dy, Tensor& dx);
// Accumulates into dw/db.
void conv2d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db);
}  // namespace serial

namespace parallel {
void conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, Tensor& y);
void conv2d_backward_input(const Tensor& weight, const Tensor& dy, Tensor& dx);
void conv2d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db);
}  // namespace parallel

// Dispatchers honoring active_backend(). weight is (Co,Ci,K,K), bias (Co,1,1,1).
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor conv2d_backward_input(const Tensor& weight, const Tensor& dy, int in_channels);
void conv2d_backward_params(const Tensor& x, const Tensor& dy, Tensor& dw, Tensor& db);

// Pointwise ops (single implementation, OpenMP-annotated loops).
Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);
Tensor sigmoid_forward(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);  // y = sigmoid output
Tensor clamp01_forward(const Tensor& x);
Tensor clamp01_backward(const Tensor& x, const Tensor& dy);  // x = pre-clamp input

void check_conv_args(const Tensor& x, const Tensor& weight, const Tensor& bias);

}  // namespace smgarn::kernels
