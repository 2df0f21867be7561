#pragma once

// Differentiable op set. Binary elementwise ops broadcast numpy-style
// (trailing dimensions aligned, size-1 dimensions stretched). Spatial ops
// (pooling, upsampling) act on the last two dimensions.
//
// Non-smooth points use the right-hand derivative: abs'(0) = 1,
// leaky_relu'(0) = 1. max_reduce routes its gradient to the first maximal
// element in row-major order.

#include <array>
#include <cstddef>

#include "ms3d/tensor.hpp"

namespace ms3d::ad {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& x);
Tensor operator*(const Tensor& x, double c);
Tensor operator*(double c, const Tensor& x);
Tensor operator+(const Tensor& x, double c);
Tensor operator+(double c, const Tensor& x);
Tensor operator-(const Tensor& x, double c);
Tensor operator-(double c, const Tensor& x);

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& x);

/// Direct cross-correlation. x: [N,Cin,H,W], w: [Cout,Cin,kh,kw].
Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride = 1, std::size_t padding = 0);
/// Adjoints of conv2d with respect to its input and its weight.
Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& w, const Shape& input_shape,
                         std::size_t stride, std::size_t padding);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out, const Shape& weight_shape,
                          std::size_t stride, std::size_t padding);

/// Mean over k x k windows moved by `stride` over the last two dims (no padding).
Tensor avg_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
/// Adjoint of avg_pool2d: scatters each window's gradient back over the window.
Tensor avg_pool2d_adjoint(const Tensor& grad_out, const Shape& input_shape, std::size_t kernel,
                          std::size_t stride);
/// Nearest-neighbour replication of the last two dims by `factor`.
Tensor upsample_nearest(const Tensor& x, std::size_t factor);
/// Sum over factor x factor blocks of the last two dims (adjoint of upsample_nearest).
Tensor sum_pool2d(const Tensor& x, std::size_t factor);

/// 3x3 stencil over the last two dims with mirror ("reflect", edge not
/// repeated) borders. `kernel` is row-major, 9 entries.
Tensor stencil3x3_reflect(const Tensor& x, const std::array<double, 9>& kernel);
Tensor stencil3x3_reflect_adjoint(const Tensor& grad_out, const std::array<double, 9>& kernel);
/// Keeps every `factor`-th row and column of the last two dims, starting at 0.
Tensor decimate(const Tensor& x, std::size_t factor);
/// Adjoint of decimate: zero-insertion up to the original size.
Tensor decimate_adjoint(const Tensor& grad_out, std::size_t factor);

Tensor reshape(const Tensor& x, Shape shape);
/// Appends zeros along the last dimension up to `new_size`.
Tensor pad_zero(const Tensor& x, std::size_t new_size);
/// Keeps the first `new_size` entries of the last dimension.
Tensor crop_last(const Tensor& x, std::size_t new_size);

Tensor broadcast_to(const Tensor& x, const Shape& shape);
/// Sums a broadcast tensor back down to `shape`.
Tensor sum_to(const Tensor& x, const Shape& shape);

/// Reductions over dims [from_axis, rank). from_axis = 0 gives a scalar
/// (shape {}); otherwise the leading dims are kept and reduced dims become 1.
Tensor sum_reduce(const Tensor& x, std::size_t from_axis = 0);
Tensor mean_reduce(const Tensor& x, std::size_t from_axis = 0);
Tensor max_reduce(const Tensor& x, std::size_t from_axis = 0);

Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// log(1 + exp(x)), evaluated stably.
Tensor softplus(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double alpha);
Tensor relu(const Tensor& x);
Tensor reciprocal(const Tensor& x);
/// Natural log; throws std::domain_error on any non-positive entry.
Tensor log(const Tensor& x);

/// mean((a - b)^2)
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace ms3d::ad
