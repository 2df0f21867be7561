#include "ms3d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ms3d::ad {
namespace {

double checked_value(const Tensor& t) {
  const double v = t.item();
  if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: non-finite function value");
  return v;
}

}  // namespace

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("relative_error: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err =
        std::abs(analytic[i] - numeric[i]) / (std::abs(analytic[i]) + std::abs(numeric[i]) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double h) {
  Tensor leaf = x.detach();
  leaf.set_requires_grad(true);
  Tensor out = f(leaf);
  checked_value(out);
  const auto analytic = grad(out, {leaf}).grads[0];

  auto values = leaf.mutable_values();
  std::vector<double> numeric(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + h;
    const double up = checked_value(f(leaf));
    values[i] = orig - h;
    const double down = checked_value(f(leaf));
    values[i] = orig;
    numeric[i] = (up - down) / (2.0 * h);
  }
  return relative_error(analytic.values(), numeric);
}

double normwise_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("normwise_error: length mismatch");
  }
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  return diff / (scale + 1e-12);
}

GradientPair gradient_pair(const std::function<Tensor()>& f, std::span<Tensor> leaves, double h) {
  Tensor out = f();
  checked_value(out);
  const auto g = grad(out, std::span<const Tensor>(leaves.data(), leaves.size()));

  GradientPair pair;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const auto a = g.grads[k].values();
    pair.analytic.insert(pair.analytic.end(), a.begin(), a.end());
    auto values = leaves[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = checked_value(f());
      values[i] = orig - h;
      const double down = checked_value(f());
      values[i] = orig;
      pair.numeric.push_back((up - down) / (2.0 * h));
    }
  }
  return pair;
}

double finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> leaves, double h) {
  const auto pair = gradient_pair(f, leaves, h);
  return relative_error(pair.analytic, pair.numeric);
}

}  // namespace ms3d::ad
