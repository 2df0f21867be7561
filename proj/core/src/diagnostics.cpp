#include "ms3d/diagnostics.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "ms3d/ops.hpp"

namespace ms3d::diag {

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;

  std::size_t make() {
    parent.push_back(parent.size());
    return parent.size() - 1;
  }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

void require_connectivity(int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw std::invalid_argument("connectivity must be 4 or 8, got " + std::to_string(connectivity));
  }
}

ad::Tensor sample_slice(const ad::Tensor& x, std::size_t b) {
  ad::Shape shape = x.shape();
  const std::size_t per = x.numel() / shape[0];
  shape[0] = 1;
  auto v = x.values().subspan(b * per, per);
  return ad::Tensor::from(std::move(shape), std::vector<double>(v.begin(), v.end()));
}

}  // namespace

std::vector<std::size_t> label_components(std::span<const std::uint8_t> mask, std::size_t h,
                                          std::size_t w, int connectivity) {
  require_connectivity(connectivity);
  if (mask.size() != h * w) throw std::invalid_argument("label_components: mask size mismatch");

  // First pass: provisional labels from already visited neighbours.
  std::vector<std::size_t> label(h * w, 0);
  DisjointSet sets;
  sets.make();  // label 0 is background
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      if (!mask[i * w + j]) continue;
      std::size_t found = 0;
      auto visit = [&](std::size_t r, std::size_t c) {
        const std::size_t l = label[r * w + c];
        if (l == 0) return;
        if (found == 0) {
          found = l;
        } else {
          sets.unite(found, l);
        }
      };
      if (j > 0) visit(i, j - 1);
      if (i > 0) {
        visit(i - 1, j);
        if (connectivity == 8) {
          if (j > 0) visit(i - 1, j - 1);
          if (j + 1 < w) visit(i - 1, j + 1);
        }
      }
      label[i * w + j] = found ? found : sets.make();
    }
  }

  // Second pass: resolve to roots and renumber densely in scan order.
  std::vector<std::size_t> dense(sets.parent.size(), 0);
  std::size_t next = 0;
  for (auto& l : label) {
    if (l == 0) continue;
    const std::size_t root = sets.find(l);
    if (dense[root] == 0) dense[root] = ++next;
    l = dense[root];
  }
  return label;
}

AggregationResult aggregation_metric(const rg::Field2D& field, double tau, int connectivity) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("aggregation_metric: tau must lie in (0, 1), got " +
                                std::to_string(tau));
  }
  require_connectivity(connectivity);
  const std::size_t n = field.size;
  std::vector<std::uint8_t> mask(n * n);
  for (std::size_t i = 0; i < n * n; ++i) mask[i] = field.values[i] > tau ? 1 : 0;
  const auto labels = label_components(mask, n, n, connectivity);

  AggregationResult r;
  r.tau = tau;
  r.connectivity = connectivity;
  for (std::size_t l : labels) r.n_agg = std::max(r.n_agg, l);
  r.r_agg = n == 0 ? 0.0 : static_cast<double>(r.n_agg) / static_cast<double>(n * n);
  return r;
}

double fisher_trace_with_probes(const ad::Tensor& x, const rg::Critic& critic,
                                std::span<const ad::Tensor> params,
                                const std::vector<std::vector<double>>& probes) {
  if (probes.empty()) throw std::invalid_argument("fisher_trace: need at least one probe");
  if (x.dim() == 0 || x.size(0) == 0) throw std::invalid_argument("fisher_trace: empty batch");
  const std::size_t batch = x.size(0);
  const std::size_t per = x.numel() / batch;
  for (const auto& p : probes) {
    if (p.size() != per) {
      throw std::invalid_argument("fisher_trace: probe length " + std::to_string(p.size()) +
                                  " != per-sample size " + std::to_string(per));
    }
  }

  ad::GradModeGuard record(true);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const ad::Tensor psi = rg::input_gradients(sample_slice(x, b), critic);
    double sample_sum = 0.0;
    for (const auto& p : probes) {
      ad::Tensor eps = ad::Tensor::from({1, per}, p);
      ad::Tensor proj = ad::sum_reduce(psi * eps);
      const auto g = ad::grad(proj, params);
      for (const auto& gi : g.grads)
        for (double v : gi.values()) sample_sum += v * v;
    }
    total += sample_sum / static_cast<double>(probes.size());
  }
  return total / static_cast<double>(batch);
}

double fisher_trace(const ad::Tensor& x, const rg::Critic& critic,
                    std::span<const ad::Tensor> params, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("fisher_trace: k must be >= 1");
  if (x.dim() == 0 || x.size(0) == 0) throw std::invalid_argument("fisher_trace: empty batch");
  const std::size_t per = x.numel() / x.size(0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> probes(k, std::vector<double>(per));
  for (auto& p : probes)
    for (auto& v : p) v = normal(rng);
  return fisher_trace_with_probes(x, critic, params, probes);
}

CosineResult mean_pairwise_cosine(const std::vector<std::vector<double>>& embeddings) {
  CosineResult r;
  std::vector<double> norms(embeddings.size());
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != embeddings.front().size()) {
      throw std::invalid_argument("mean_pairwise_cosine: vectors differ in length");
    }
    norms[i] = std::sqrt(std::inner_product(embeddings[i].begin(), embeddings[i].end(),
                                            embeddings[i].begin(), 0.0));
    if (norms[i] > 0.0) ++nonzero;
  }
  if (nonzero < 2) {
    throw std::invalid_argument("mean_pairwise_cosine: need at least two nonzero vectors");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) {
        ++r.skipped_pairs;
        continue;
      }
      const double dot = std::inner_product(embeddings[i].begin(), embeddings[i].end(),
                                            embeddings[j].begin(), 0.0);
      acc += dot / (norms[i] * norms[j]);
      ++r.pairs;
    }
  }
  r.mean = acc / static_cast<double>(r.pairs);
  return r;
}

std::vector<double> filter_normalized_direction(std::span<const ad::Tensor> params,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out;
  for (const auto& p : params) {
    const auto values = p.values();
    std::vector<double> d(values.size());
    for (auto& v : d) v = normal(rng);

    if (p.dim() <= 1) {
      std::fill(d.begin(), d.end(), 0.0);
    } else {
      // index -> filter id
      const auto& shape = p.shape();
      const bool columns = p.dim() == 2;
      const std::size_t filters = columns ? shape[1] : shape[0];
      const std::size_t stride = values.size() / shape[0];
      auto filter_of = [&](std::size_t idx) { return columns ? idx % shape[1] : idx / stride; };
      std::vector<double> dn(filters, 0.0), pn(filters, 0.0);
      for (std::size_t i = 0; i < d.size(); ++i) {
        dn[filter_of(i)] += d[i] * d[i];
        pn[filter_of(i)] += values[i] * values[i];
      }
      for (std::size_t i = 0; i < d.size(); ++i) {
        const std::size_t f = filter_of(i);
        d[i] = dn[f] > 0.0 ? d[i] * std::sqrt(pn[f] / dn[f]) : 0.0;
      }
    }
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

LossSlice loss_slice(const FlatLoss& loss, std::span<const double> phi, std::span<const double> d1,
                     std::span<const double> d2, std::size_t n, double radius) {
  if (n == 0) throw std::invalid_argument("loss_slice: grid size must be >= 1");
  if (!(radius >= 0.0)) throw std::invalid_argument("loss_slice: radius must be >= 0");
  if (d1.size() != phi.size() || d2.size() != phi.size()) {
    throw std::invalid_argument("loss_slice: direction length differs from parameter count");
  }
  LossSlice s;
  s.n = n;
  s.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // symmetric lattice, exact 0 at the middle index for odd n
    s.coords[i] = n == 1 ? 0.0
                         : radius * (2.0 * static_cast<double>(i) - static_cast<double>(n - 1)) /
                               static_cast<double>(n - 1);
  }
  s.values.resize(n * n);
  std::vector<double> point(phi.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t q = 0; q < phi.size(); ++q)
        point[q] = phi[q] + s.coords[i] * d1[q] + s.coords[j] * d2[q];
      const double v = loss(point);
      if (std::isfinite(v)) s.values[i * n + j] = v;
    }
  }
  return s;
}

}  // namespace ms3d::diag
