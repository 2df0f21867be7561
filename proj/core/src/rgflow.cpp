#include "ms3d/rgflow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ms3d/ops.hpp"

namespace ms3d::rg {
namespace {

void require_zeta(std::size_t zeta, const char* op) {
  if (zeta < 2) {
    throw std::invalid_argument(std::string(op) + ": coarse-graining factor must be >= 2, got " +
                                std::to_string(zeta));
  }
}

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

void require_same_size(const Field2D& a, const Field2D& b, const char* op) {
  if (a.size != b.size) {
    throw std::invalid_argument(std::string(op) + ": resolution mismatch " +
                                std::to_string(a.size) + " vs " + std::to_string(b.size));
  }
}

// Native-grid resolution of a scale-s field, checking that one more step fits.
std::size_t native_side_for_step(const Field2D& field, std::size_t zeta, const char* op) {
  require_zeta(zeta, op);
  const std::size_t block = ipow(zeta, field.scale + 1);
  if (field.size == 0 || field.size % block != 0) {
    throw std::invalid_argument(std::string(op) + ": side " + std::to_string(field.size) +
                                " not divisible by block " + std::to_string(block) +
                                " at scale " + std::to_string(field.scale));
  }
  return field.size / ipow(zeta, field.scale);
}

Field2D replicate(const std::vector<double>& native, std::size_t native_side, std::size_t factor,
                  std::size_t scale) {
  const std::size_t side = native_side * factor;
  std::vector<double> out(side * side);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j)
      out[i * side + j] = native[(i / factor) * native_side + j / factor];
  return Field2D(side, std::move(out), scale);
}

}  // namespace

std::string_view to_string(Filter filter) {
  return filter == Filter::kadanoff ? "kadanoff" : "gaussian";
}

Filter parse_filter(std::string_view name) {
  if (name == "kadanoff") return Filter::kadanoff;
  if (name == "gaussian") return Filter::gaussian;
  throw std::invalid_argument("unknown RG filter '" + std::string(name) +
                              "' (expected kadanoff or gaussian)");
}

Field2D::Field2D(std::size_t side, std::vector<double> data, std::size_t scale_index)
    : size(side), values(std::move(data)), scale(scale_index) {
  if (values.size() != side * side) {
    throw std::invalid_argument("Field2D: " + std::to_string(values.size()) +
                                " values do not fill a " + std::to_string(side) + "x" +
                                std::to_string(side) + " square");
  }
}

double Field2D::mean() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

std::size_t embed_side(std::size_t count, std::size_t zeta) {
  require_zeta(zeta, "embed_side");
  if (count == 0) throw std::invalid_argument("embed_side: empty field");
  auto root = static_cast<std::size_t>(std::sqrt(static_cast<double>(count)));
  while (root * root < count) ++root;
  while (root > 0 && (root - 1) * (root - 1) >= count) --root;
  std::size_t side = 1;
  while (side < root) side *= zeta;
  return side;
}

Field2D embed_square(std::span<const double> flat, std::size_t zeta) {
  if (flat.empty()) throw std::invalid_argument("embed_square: empty gradient field");
  const std::size_t side = embed_side(flat.size(), zeta);
  std::vector<double> values(side * side, 0.0);
  std::copy(flat.begin(), flat.end(), values.begin());
  return Field2D(side, std::move(values));
}

Field2D embed_square(std::span<const double> values, std::size_t h, std::size_t w, std::size_t c,
                     std::size_t zeta) {
  if (h == 0 || w == 0 || c == 0) throw std::invalid_argument("embed_square: empty dimensions");
  if (values.size() != h * w * c) {
    throw std::invalid_argument("embed_square: expected " + std::to_string(h * w * c) +
                                " values for " + std::to_string(h) + "x" + std::to_string(w) +
                                "x" + std::to_string(c) + ", got " +
                                std::to_string(values.size()));
  }
  return embed_square(values, zeta);
}

Field2D normalize(const Field2D& field) {
  double peak = 0.0;
  for (double v : field.values) {
    if (!std::isfinite(v)) throw std::domain_error("normalize: non-finite entry in field");
    peak = std::max(peak, std::abs(v));
  }
  Field2D out = field;
  if (peak == 0.0) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (double& v : out.values) v = std::abs(v / peak);
  return out;
}

Field2D kadanoff_step(const Field2D& field, std::size_t zeta) {
  native_side_for_step(field, zeta, "kadanoff_step");
  const std::size_t block = ipow(zeta, field.scale + 1);
  const std::size_t blocks = field.size / block;
  const double inv = 1.0 / static_cast<double>(block * block);
  std::vector<double> means(blocks * blocks, 0.0);
  for (std::size_t i = 0; i < field.size; ++i)
    for (std::size_t j = 0; j < field.size; ++j)
      means[(i / block) * blocks + j / block] += field.at(i, j);
  for (double& m : means) m *= inv;
  return replicate(means, blocks, block, field.scale + 1);
}

std::array<double, 9> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_kernel: sigma must be positive, got " +
                                std::to_string(sigma));
  }
  std::array<double, 9> k{};
  double total = 0.0;
  for (int u = -1; u <= 1; ++u)
    for (int v = -1; v <= 1; ++v) {
      const double w = std::exp(-static_cast<double>(u * u + v * v) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>((u + 1) * 3 + (v + 1))] = w;
      total += w;
    }
  for (double& w : k) w /= total;
  return k;
}

std::vector<double> gaussian_blur_native(const Field2D& field, std::size_t zeta, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  require_zeta(zeta, "gaussian_blur_native");
  const std::size_t stride = ipow(zeta, field.scale);
  if (field.size % stride != 0) {
    throw std::invalid_argument("gaussian_blur_native: side not divisible by block size");
  }
  const std::size_t n = field.size / stride;
  auto reflect = [n](std::ptrdiff_t i) -> std::size_t {
    if (n == 1) return 0;
    const auto m = static_cast<std::ptrdiff_t>(n);
    if (i < 0) return static_cast<std::size_t>(-i);
    if (i >= m) return static_cast<std::size_t>(2 * m - 2 - i);
    return static_cast<std::size_t>(i);
  };
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int u = -1; u <= 1; ++u)
        for (int v = -1; v <= 1; ++v) {
          const std::size_t r = reflect(static_cast<std::ptrdiff_t>(i) + u);
          const std::size_t c = reflect(static_cast<std::ptrdiff_t>(j) + v);
          acc += kernel[static_cast<std::size_t>((u + 1) * 3 + (v + 1))] *
                 field.at(r * stride, c * stride);
        }
      out[i * n + j] = acc;
    }
  return out;
}

Field2D gaussian_step(const Field2D& field, std::size_t zeta, double sigma) {
  const std::size_t n = native_side_for_step(field, zeta, "gaussian_step");
  const auto blurred = gaussian_blur_native(field, zeta, sigma);
  const std::size_t m = n / zeta;
  std::vector<double> kept(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) kept[i * m + j] = blurred[(i * zeta) * n + j * zeta];
  return replicate(kept, m, ipow(zeta, field.scale + 1), field.scale + 1);
}

std::size_t chain_depth(std::size_t side, std::size_t zeta) {
  require_zeta(zeta, "chain_depth");
  std::size_t t = 0;
  std::size_t reach = zeta;
  while (reach <= side) {
    ++t;
    reach *= zeta;
  }
  return t;
}

RGChain build_chain(const Field2D& field, std::size_t zeta, Filter filter, double sigma) {
  require_zeta(zeta, "build_chain");
  if (field.size < zeta) {
    throw std::invalid_argument("build_chain: side " + std::to_string(field.size) +
                                " is smaller than zeta " + std::to_string(zeta) +
                                "; no coarse-graining step possible");
  }
  if (filter == Filter::gaussian) (void)gaussian_kernel(sigma);
  RGChain chain{.fields = {}, .zeta = zeta, .filter = filter, .sigma = sigma};
  const std::size_t t = chain_depth(field.size, zeta);
  chain.fields.reserve(t + 1);
  Field2D start = field;
  start.scale = 0;
  chain.fields.push_back(std::move(start));
  for (std::size_t s = 0; s < t; ++s) {
    const Field2D& prev = chain.fields.back();
    chain.fields.push_back(filter == Filter::kadanoff ? kadanoff_step(prev, zeta)
                                                      : gaussian_step(prev, zeta, sigma));
  }
  return chain;
}

double sd_step(const Field2D& fine, const Field2D& coarse) {
  require_same_size(fine, coarse, "sd_step");
  double acc = 0.0;
  for (std::size_t i = 0; i < fine.values.size(); ++i) {
    const double d = coarse.values[i] - fine.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(fine.values.size());
}

double inner_product(const Field2D& a, const Field2D& b) {
  require_same_size(a, b, "inner_product");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) acc += a.values[i] * b.values[i];
  return acc / static_cast<double>(a.values.size());
}

SDProfile profile_of(const RGChain& chain) {
  SDProfile profile;
  for (std::size_t s = 0; s + 1 < chain.fields.size(); ++s) {
    const double sd = sd_step(chain.fields[s], chain.fields[s + 1]);
    profile.per_scale.push_back(sd);
    profile.total += sd;
  }
  return profile;
}

SDProfile ms3d(const Field2D& normalized, std::size_t zeta, Filter filter, double sigma) {
  return profile_of(build_chain(normalized, zeta, filter, sigma));
}

// ---------------------------------------------------------------------------

ad::Tensor input_gradients(const ad::Tensor& x, const Critic& critic) {
  if (x.dim() == 0 || x.size(0) == 0) {
    throw std::invalid_argument("input_gradients: empty batch " + ad::shape_str(x.shape()));
  }
  const bool create_graph = ad::grad_mode_enabled();
  ad::GradModeGuard record(true);
  const std::size_t batch = x.size(0);
  const std::size_t per_sample = x.numel() / batch;

  ad::Tensor leaf = x.detach();
  leaf.set_requires_grad(true);
  ad::Tensor logits = critic(leaf);
  if (logits.numel() != batch) {
    throw std::invalid_argument("ms3d_penalty: discriminator must return one scalar logit per "
                                "sample, got shape " +
                                ad::shape_str(logits.shape()) + " for batch " +
                                std::to_string(batch));
  }
  auto g = ad::grad(ad::sum_reduce(logits), {leaf}, {.create_graph = create_graph});
  ad::GradModeGuard restore(create_graph);
  return ad::reshape(g[0], {batch, per_sample});
}

std::vector<double> normalization_scales(const ad::Tensor& psi) {
  const std::size_t batch = psi.size(0);
  const std::size_t n = psi.numel() / batch;
  std::vector<double> scales(batch, 0.0);
  const auto v = psi.values();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) scales[b] = std::max(scales[b], std::abs(v[b * n + i]));
  return scales;
}

ad::Tensor ms3d_penalty_of_fields(const ad::Tensor& psi, const PenaltyOptions& options) {
  require_zeta(options.zeta, "ms3d_penalty");
  if (psi.dim() != 2 || psi.size(0) == 0 || psi.size(1) == 0) {
    throw std::invalid_argument("ms3d_penalty: expected [B, n] gradient fields, got " +
                                ad::shape_str(psi.shape()));
  }
  for (double v : psi.values()) {
    if (!std::isfinite(v)) throw std::domain_error("ms3d_penalty: non-finite gradient field");
  }
  const std::size_t batch = psi.size(0);
  const std::size_t side = embed_side(psi.size(1), options.zeta);
  const std::size_t depth = chain_depth(side, options.zeta);
  if (depth == 0) {
    throw std::invalid_argument("ms3d_penalty: field too small for one coarse-graining step");
  }

  ad::Tensor square_field =
      ad::reshape(ad::pad_zero(psi, side * side), {batch, side, side});
  ad::Tensor magnitude = ad::abs(square_field);

  ad::Tensor field;
  if (options.normalization == NormalizationGrad::through_max && options.fixed_scales.empty()) {
    ad::Tensor peak = ad::max_reduce(magnitude, 1);
    std::vector<double> guard(batch, 0.0);
    for (std::size_t b = 0; b < batch; ++b) guard[b] = peak.at(b) == 0.0 ? 1.0 : 0.0;
    ad::Tensor safe = peak + ad::Tensor::from({batch, 1, 1}, std::move(guard));
    field = magnitude * ad::reciprocal(safe);
  } else {
    std::vector<double> scales =
        options.fixed_scales.empty() ? normalization_scales(psi) : options.fixed_scales;
    if (scales.size() != batch) {
      throw std::invalid_argument("ms3d_penalty: expected " + std::to_string(batch) +
                                  " normalization scales, got " + std::to_string(scales.size()));
    }
    for (double& s : scales) s = s > 0.0 ? 1.0 / s : 0.0;
    field = magnitude * ad::Tensor::from({batch, 1, 1}, std::move(scales));
  }

  const auto kernel = options.filter == Filter::gaussian ? gaussian_kernel(options.sigma)
                                                         : std::array<double, 9>{};
  ad::Tensor native = field;
  ad::Tensor fine = field;
  ad::Tensor total;
  std::size_t factor = 1;
  for (std::size_t s = 0; s < depth; ++s) {
    native = options.filter == Filter::kadanoff
                 ? ad::avg_pool2d(native, options.zeta, options.zeta)
                 : ad::decimate(ad::stencil3x3_reflect(native, kernel), options.zeta);
    factor *= options.zeta;
    ad::Tensor coarse = ad::upsample_nearest(native, factor);
    ad::Tensor sd = ad::mse(coarse, fine);
    total = total.defined() ? total + sd : sd;
    fine = coarse;
  }
  return total;
}

ad::Tensor ms3d_penalty(const ad::Tensor& x, const Critic& critic, const PenaltyOptions& options) {
  return ms3d_penalty_of_fields(input_gradients(x, critic), options);
}

}  // namespace ms3d::rg
