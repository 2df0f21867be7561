#pragma once

// Toy generator / discriminator pair, the GAN loss family, optimizers and
// the MS3D-regularized training loop.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ms3d/data.hpp"
#include "ms3d/diagnostics.hpp"
#include "ms3d/rgflow.hpp"
#include "ms3d/tensor.hpp"

namespace ms3d::gan {

using ad::Tensor;

struct ModelSpec {
  std::size_t height = 16, width = 16;
  std::size_t latent = 32;
  std::vector<std::size_t> g_hidden{128};
  std::vector<std::size_t> d_hidden{64, 32};
  /// 0 disables the leading 3x3 stride-2 convolution of the discriminator.
  std::size_t d_conv_channels = 0;
  bool d_bias = true;
  /// Zero weights and bias in the generator's output layer.
  bool g_zero_last = false;
  double leaky_slope = 0.2;

  [[nodiscard]] std::size_t image_size() const { return height * width; }
};

struct DenseLayer {
  Tensor w;  // [in, out]
  Tensor b;  // [out], absent when the layer has no bias
};

/// Latent [B, latent] -> dense/leaky-ReLU stack -> dense -> tanh, reshaped to [B, H, W].
struct Generator {
  std::vector<DenseLayer> layers;
  double leaky_slope = 0.2;
  std::size_t height = 0, width = 0;

  [[nodiscard]] Tensor forward(const Tensor& z) const;
  [[nodiscard]] std::vector<Tensor> params() const;
};

/// Images [B, H, W] (or [B, H, W, 1]) -> optional conv -> softplus dense stack -> [B, 1].
struct Discriminator {
  Tensor conv_w;  // [C, 1, 3, 3], empty when unused
  Tensor conv_b;  // [C, 1, 1]
  std::vector<DenseLayer> layers;  // last layer maps to one logit
  std::size_t height = 0, width = 0;

  [[nodiscard]] Tensor forward(const Tensor& x) const;
  /// Activations feeding the final layer, [B, hidden].
  [[nodiscard]] Tensor embed(const Tensor& x) const;
  [[nodiscard]] std::vector<Tensor> params() const;
};

struct GanModel {
  ModelSpec spec;
  Generator generator;
  Discriminator discriminator;
};

/// Seeded initialization: weights uniform in +-1/sqrt(fan_in), biases zero.
GanModel make_model(const ModelSpec& spec, std::uint64_t seed);

/// Concatenated parameter values, in params() order.
std::vector<double> flatten(std::span<const Tensor> params);
/// Writes `values` back into the parameter tensors (in place).
void assign(std::span<const Tensor> params, std::span<const double> values);

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { ns, wasserstein, ls, hinge, rahinge };
enum class ApplyTo { real, fake, both };

std::string_view to_string(LossKind kind);
LossKind parse_loss(std::string_view name);
std::string_view to_string(ApplyTo target);
ApplyTo parse_apply_to(std::string_view name);

struct LossPair {
  Tensor d;
  Tensor g;
};

/// Both losses from one logit per sample ([B] or [B, 1] each). Non-finite
/// logits raise std::domain_error.
LossPair gan_loss(LossKind kind, const Tensor& real_logits, const Tensor& fake_logits);

struct TrainConfig {
  double lambda = 10.0;
  std::size_t zeta = 2;
  rg::Filter filter = rg::Filter::kadanoff;
  double sigma = 1.0;
  rg::NormalizationGrad normalization = rg::NormalizationGrad::detached;
  LossKind loss = LossKind::ns;
  ApplyTo apply_to = ApplyTo::real;
  /// When false the penalty term is never built (reference trajectory for
  /// the lambda = 0 equivalence check).
  bool penalty_path = true;

  std::size_t steps = 2000;
  std::size_t batch = 16;
  std::size_t d_steps = 1;
  std::string optimizer = "adam";  // adam | sgd
  double lr_d = 2e-4, lr_g = 2e-4;
  double beta1 = 0.0, beta2 = 0.99, eps = 1e-8;
  std::uint64_t seed = 0;

  std::size_t metric_every = 20;
  std::size_t metric_batch = 8;
  std::size_t fisher_probes = 8;
  double tau = 0.2;
  int connectivity = 8;
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

/// Base discriminator loss plus lambda times the mean MS3D penalty over the
/// apply-to pool(s); `both` averages the real and fake penalties.
Tensor discriminator_loss(const Discriminator& d, const Tensor& real, const Tensor& fake,
                          const TrainConfig& config);

/// The penalty term alone (mean over the selected pools), without lambda.
Tensor penalty_term(const Discriminator& d, const Tensor& real, const Tensor& fake,
                    const TrainConfig& config);

// ---------------------------------------------------------------------------
// Optimizers

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Updates the parameters in place from matching gradients.
  virtual void step(std::span<const Tensor> params, std::span<const Tensor> grads) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(std::span<const Tensor> params, std::span<const Tensor> grads) override;

 private:
  double lr_;
};

class Adam final : public Optimizer {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<const Tensor> params, std::span<const Tensor> grads) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainSinks {
  std::function<void(const diag::MetricRecord&)> on_record;
  std::function<void(std::size_t step, const GanModel&)> on_checkpoint;
};

struct TrainResult {
  GanModel model;
  std::vector<diag::MetricRecord> records;
  bool diverged = false;
  std::string message;  // reason for halting, empty on success
};

/// Diagnostics of the current model on fixed evaluation batches.
diag::MetricRecord measure(const GanModel& model, const data::Dataset& dataset,
                           const TrainConfig& config, std::size_t step);

/// Alternating discriminator / generator updates. Deterministic for fixed
/// config and dataset. A non-finite loss stops the run and appends a record
/// whose metric fields are NaN.
TrainResult train(const TrainConfig& config, const data::Dataset& dataset,
                  const ModelSpec& spec = {}, const TrainSinks& sinks = {});

/// n generator outputs from standard-normal latents seeded by `seed`, [n, H, W].
std::vector<double> sample(const GanModel& model, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints (little-endian binary, versioned)

struct Checkpoint {
  std::size_t step = 0;
  GanModel model;
};

void save_checkpoint(const std::filesystem::path& path, const GanModel& model, std::size_t step);
/// Throws std::runtime_error on a bad magic, version or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ms3d::gan
