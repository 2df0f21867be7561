#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ms3d/tensor.hpp"

namespace ms3d::ad {

/// Max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-12),
/// where analytic comes from grad() and central from f(x +- h e_i).
/// Throws std::domain_error if f returns a non-finite value.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h = 1e-5);

/// Same error measure for a scalar function of several leaf tensors that it
/// reads directly (model parameters). The leaves are perturbed in place and
/// restored.
double finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                         double h = 1e-5);

/// Error measure between two flat gradient vectors.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// max |analytic - numeric| / max |numeric|. Unlike the per-coordinate measure
/// it is not dominated by coordinates near the rounding floor of the central
/// difference (about eps * |f| / h).
double normwise_error(std::span<const double> analytic, std::span<const double> numeric);

struct GradientPair {
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Both gradients of a scalar function of in-place leaves, flattened in order.
GradientPair gradient_pair(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                           double h = 1e-5);

}  // namespace ms3d::ad
