#pragma once

// Renormalization-group coarse-graining of gradient fields and the
// multi-scale structural self-dissimilarity (MS3D) descriptor.
//
// A field is embedded into an L x L square (L a power of the coarse-graining
// factor zeta), normalized to |f| / max|f|, and coarse-grained repeatedly.
// Every coarse field is kept at the full L x L resolution, so step s of the
// chain holds constant zeta^s x zeta^s blocks. The self-dissimilarity of one
// step is the mean squared difference between consecutive fields; the MS3D
// descriptor is the sum over all steps.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ms3d/tensor.hpp"

namespace ms3d::rg {

enum class Filter { kadanoff, gaussian };

std::string_view to_string(Filter filter);
/// Accepts "kadanoff" or "gaussian"; throws std::invalid_argument otherwise.
Filter parse_filter(std::string_view name);

/// Square L x L field stored row-major. `scale` is the chain index of the
/// field (0 = finest); a field at scale s is constant on zeta^s blocks.
struct Field2D {
  std::size_t size = 0;
  std::vector<double> values;
  std::size_t scale = 0;

  Field2D() = default;
  Field2D(std::size_t side, std::vector<double> data, std::size_t scale_index = 0);

  [[nodiscard]] double at(std::size_t row, std::size_t col) const {
    return values[row * size + col];
  }
  [[nodiscard]] double mean() const;
};

struct RGChain {
  std::vector<Field2D> fields;  // Gamma_0 ... Gamma_t, all L x L
  std::size_t zeta = 2;
  Filter filter = Filter::kadanoff;
  double sigma = 1.0;

  [[nodiscard]] std::size_t steps() const { return fields.empty() ? 0 : fields.size() - 1; }
};

struct SDProfile {
  std::vector<double> per_scale;
  double total = 0.0;
};

/// Smallest power of zeta that is >= ceil(sqrt(count)).
std::size_t embed_side(std::size_t count, std::size_t zeta);

/// Flattens a field row-major and zero-pads it to embed_side(n, zeta)^2.
/// Throws std::invalid_argument on empty input or zeta < 2.
Field2D embed_square(std::span<const double> flat, std::size_t zeta);
/// h x w x c gradient field (row-major h, then w, then c).
Field2D embed_square(std::span<const double> values, std::size_t h, std::size_t w, std::size_t c,
                     std::size_t zeta);

/// |f / max|f||; the all-zero field maps to itself. Throws std::domain_error
/// on non-finite input.
Field2D normalize(const Field2D& field);

/// Replaces every zeta^(s+1) block of a scale-s field by its mean.
Field2D kadanoff_step(const Field2D& field, std::size_t zeta);

/// Normalized 3 x 3 Gaussian stencil, row-major.
std::array<double, 9> gaussian_kernel(double sigma);

/// Blurs the field's native grid (one sample per zeta^s block) with the 3x3
/// Gaussian stencil under reflect borders. Returns the native-grid values.
std::vector<double> gaussian_blur_native(const Field2D& field, std::size_t zeta, double sigma);

/// Gaussian blur on the native grid, keep every zeta-th sample, replicate
/// back to L x L.
Field2D gaussian_step(const Field2D& field, std::size_t zeta, double sigma = 1.0);

/// floor(log_zeta(L)), computed in integers.
std::size_t chain_depth(std::size_t side, std::size_t zeta);

RGChain build_chain(const Field2D& field, std::size_t zeta, Filter filter = Filter::kadanoff,
                    double sigma = 1.0);

/// mean over cells of (coarse - fine)^2.
double sd_step(const Field2D& fine, const Field2D& coarse);
/// mean over cells of a * b.
double inner_product(const Field2D& a, const Field2D& b);

SDProfile profile_of(const RGChain& chain);
SDProfile ms3d(const Field2D& normalized, std::size_t zeta, Filter filter = Filter::kadanoff,
               double sigma = 1.0);

// ---------------------------------------------------------------------------
// Differentiable penalty

/// Maps an input batch [B, ...] to one logit per sample ([B] or [B,1]).
using Critic = std::function<ad::Tensor(const ad::Tensor&)>;

enum class NormalizationGrad {
  /// max|Psi| is a constant during differentiation.
  detached,
  /// gradient also flows through max|Psi| (to the first maximal cell).
  through_max,
};

struct PenaltyOptions {
  std::size_t zeta = 2;
  Filter filter = Filter::kadanoff;
  double sigma = 1.0;
  NormalizationGrad normalization = NormalizationGrad::detached;
  /// Optional per-sample normalization denominators replacing max|Psi|.
  /// Used to evaluate the penalty with the scale frozen at a reference point.
  std::vector<double> fixed_scales;
};

/// Psi = d(sum of logits)/dx for a batch, shape [B, n]. When grad mode is on
/// the result stays on the tape (differentiable w.r.t. the critic's
/// parameters). Throws std::invalid_argument if the critic does not return
/// one value per sample.
ad::Tensor input_gradients(const ad::Tensor& x, const Critic& critic);

/// Mean over the batch of the MS3D descriptor of each row of `psi` ([B, n]).
ad::Tensor ms3d_penalty_of_fields(const ad::Tensor& psi, const PenaltyOptions& options);

/// ms3d_penalty_of_fields(input_gradients(x, critic), options).
ad::Tensor ms3d_penalty(const ad::Tensor& x, const Critic& critic,
                        const PenaltyOptions& options = {});

/// Per-sample max|Psi| of a [B, n] field batch (the default normalization scales).
std::vector<double> normalization_scales(const ad::Tensor& psi);

}  // namespace ms3d::rg
