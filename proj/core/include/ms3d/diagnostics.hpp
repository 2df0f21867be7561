#pragma once

// Measurement instruments for discriminator behaviour: aggregation of the
// input-gradient field, a stochastic diagonal Fisher trace, pairwise cosine
// similarity of embeddings, and 2-D loss-landscape slices.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ms3d/rgflow.hpp"
#include "ms3d/tensor.hpp"

namespace ms3d::diag {

struct AggregationResult {
  std::size_t n_agg = 0;
  double r_agg = 0.0;  // n_agg / (H * W)
  double tau = 0.2;
  int connectivity = 8;
};

/// Binarizes the field at value > tau and counts connected regions.
/// Throws std::invalid_argument unless 0 < tau < 1 and connectivity is 4 or 8.
AggregationResult aggregation_metric(const rg::Field2D& field, double tau = 0.2,
                                     int connectivity = 8);

/// Component labels for a binary h x w mask (0 = background, 1..n otherwise),
/// row-major, produced by two-pass union-find.
std::vector<std::size_t> label_components(std::span<const std::uint8_t> mask, std::size_t h,
                                          std::size_t w, int connectivity);

/// (1/k) * sum over probes of ||d<Psi(x_i), eps>/dphi||^2, averaged over the
/// batch. Each sample is differentiated on its own so the per-sample norms are
/// exact. Throws std::invalid_argument if no probe is given or a probe's length
/// differs from the per-sample input size.
double fisher_trace_with_probes(const ad::Tensor& x, const rg::Critic& critic,
                                std::span<const ad::Tensor> params,
                                const std::vector<std::vector<double>>& probes);

/// Same with k standard-normal probes drawn from a generator seeded by `seed`.
double fisher_trace(const ad::Tensor& x, const rg::Critic& critic,
                    std::span<const ad::Tensor> params, std::size_t k = 8, std::uint64_t seed = 0);

struct CosineResult {
  double mean = 0.0;
  std::size_t pairs = 0;          // pairs that entered the mean
  std::size_t skipped_pairs = 0;  // pairs involving a zero vector
};

/// Mean of cos(u_i, u_j) over unordered pairs. Pairs touching a zero vector
/// are skipped and counted. Throws std::invalid_argument if fewer than two
/// nonzero vectors remain or lengths differ.
CosineResult mean_pairwise_cosine(const std::vector<std::vector<double>>& embeddings);

/// Random direction with the norm of every filter matched to the parameter's
/// filter. Filters are output units: columns of a rank-2 [in, out] weight and
/// leading slices of a rank-4 [out, in, kh, kw] kernel. Rank <= 1 parameters
/// (biases) get a zero direction. Returned flat, in parameter order.
std::vector<double> filter_normalized_direction(std::span<const ad::Tensor> params,
                                                std::uint64_t seed);

struct LossSlice {
  std::size_t n = 0;
  std::vector<double> coords;                 // a_i == b_i, evenly spaced in [-r, r]
  std::vector<std::optional<double>> values;  // row-major, n x n; empty when non-finite

  [[nodiscard]] std::optional<double> at(std::size_t i, std::size_t j) const {
    return values[i * n + j];
  }
};

using FlatLoss = std::function<double(std::span<const double>)>;

/// grid[i][j] = loss(phi + a_i d1 + b_j d2). The lattice contains 0 when n is
/// odd. Throws std::invalid_argument on n == 0, negative radius or length
/// mismatch.
LossSlice loss_slice(const FlatLoss& loss, std::span<const double> phi, std::span<const double> d1,
                     std::span<const double> d2, std::size_t n = 21, double radius = 1.0);

/// One row of the training log.
struct MetricRecord {
  std::size_t step = 0;
  double d_train = 0.0;  // mean logit on training reals
  double d_val = 0.0;    // mean logit on held-out reals
  double d_fake = 0.0;   // mean logit on generated samples
  double r_agg = 0.0;
  double ms3d = 0.0;
  double fisher = 0.0;
  double cosine = 0.0;
};

}  // namespace ms3d::diag
