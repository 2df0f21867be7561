#include "ms3d/gan.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ms3d/ops.hpp"

namespace ms3d::gan {

namespace {

// SplitMix64 finalizer; derives independent stream seeds from one run seed.
std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor uniform_param(ad::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor dense(const Tensor& h, const DenseLayer& layer) {
  Tensor out = ad::matmul(h, layer.w);
  return layer.b.defined() ? out + layer.b : out;
}

Tensor as_rows(const Tensor& t) { return ad::reshape(t, {t.numel()}); }

Tensor normal_batch(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = normal(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Models

Tensor Generator::forward(const Tensor& z) const {
  Tensor h = z;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) h = ad::leaky_relu(dense(h, layers[i]), leaky_slope);
  h = ad::tanh(dense(h, layers.back()));
  return ad::reshape(h, {z.size(0), height, width});
}

std::vector<Tensor> Generator::params() const {
  std::vector<Tensor> p;
  for (const auto& l : layers) {
    p.push_back(l.w);
    if (l.b.defined()) p.push_back(l.b);
  }
  return p;
}

Tensor Discriminator::embed(const Tensor& x) const {
  const std::size_t batch = x.size(0);
  Tensor h;
  if (conv_w.defined()) {
    h = ad::conv2d(ad::reshape(x, {batch, 1, height, width}), conv_w, 2, 1);
    if (conv_b.defined()) h = h + conv_b;
    h = ad::softplus(h);
    h = ad::reshape(h, {batch, h.numel() / batch});
  } else {
    h = ad::reshape(x, {batch, height * width});
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) h = ad::softplus(dense(h, layers[i]));
  return h;
}

Tensor Discriminator::forward(const Tensor& x) const { return dense(embed(x), layers.back()); }

std::vector<Tensor> Discriminator::params() const {
  std::vector<Tensor> p;
  if (conv_w.defined()) p.push_back(conv_w);
  if (conv_b.defined()) p.push_back(conv_b);
  for (const auto& l : layers) {
    p.push_back(l.w);
    if (l.b.defined()) p.push_back(l.b);
  }
  return p;
}

GanModel make_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.height == 0 || spec.width == 0 || spec.latent == 0) {
    throw std::invalid_argument("make_model: image size and latent size must be positive");
  }
  std::mt19937_64 rng(derive(seed, 0));
  GanModel m;
  m.spec = spec;

  auto stack = [&](std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, bool bias) {
    std::vector<DenseLayer> layers;
    std::vector<std::size_t> sizes = hidden;
    sizes.push_back(out);
    for (std::size_t s : sizes) {
      if (s == 0) throw std::invalid_argument("make_model: zero-width layer");
      DenseLayer l;
      l.w = uniform_param({in, s}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
      if (bias) l.b = Tensor::from({s}, std::vector<double>(s, 0.0), true);
      layers.push_back(std::move(l));
      in = s;
    }
    return layers;
  };

  m.generator.height = spec.height;
  m.generator.width = spec.width;
  m.generator.leaky_slope = spec.leaky_slope;
  m.generator.layers = stack(spec.latent, spec.g_hidden, spec.image_size(), true);
  if (spec.g_zero_last) {
    for (auto& v : m.generator.layers.back().w.mutable_values()) v = 0.0;
  }

  auto& d = m.discriminator;
  d.height = spec.height;
  d.width = spec.width;
  std::size_t features = spec.image_size();
  if (spec.d_conv_channels > 0) {
    d.conv_w = uniform_param({spec.d_conv_channels, 1, 3, 3}, 1.0 / 3.0, rng);
    if (spec.d_bias) {
      d.conv_b = Tensor::from({spec.d_conv_channels, 1, 1},
                              std::vector<double>(spec.d_conv_channels, 0.0), true);
    }
    features = spec.d_conv_channels * ((spec.height - 1) / 2 + 1) * ((spec.width - 1) / 2 + 1);
  }
  d.layers = stack(features, spec.d_hidden, 1, spec.d_bias);
  return m;
}

std::vector<double> flatten(std::span<const Tensor> params) {
  std::vector<double> out;
  for (const auto& p : params) out.insert(out.end(), p.values().begin(), p.values().end());
  return out;
}

void assign(std::span<const Tensor> params, std::span<const double> values) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.numel();
  if (total != values.size()) {
    throw std::invalid_argument("assign: expected " + std::to_string(total) + " values, got " +
                                std::to_string(values.size()));
  }
  std::size_t off = 0;
  for (Tensor p : params) {
    auto dst = p.mutable_values();
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(off),
              values.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
    off += dst.size();
  }
}

// ---------------------------------------------------------------------------
// Losses

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ns: return "ns";
    case LossKind::wasserstein: return "wasserstein";
    case LossKind::ls: return "ls";
    case LossKind::hinge: return "hinge";
    case LossKind::rahinge: return "rahinge";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  for (auto k : {LossKind::ns, LossKind::wasserstein, LossKind::ls, LossKind::hinge, LossKind::rahinge})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown loss '" + std::string(name) +
                              "' (expected ns, wasserstein, ls, hinge or rahinge)");
}

std::string_view to_string(ApplyTo target) {
  switch (target) {
    case ApplyTo::real: return "real";
    case ApplyTo::fake: return "fake";
    case ApplyTo::both: return "both";
  }
  return "?";
}

ApplyTo parse_apply_to(std::string_view name) {
  for (auto a : {ApplyTo::real, ApplyTo::fake, ApplyTo::both})
    if (name == to_string(a)) return a;
  throw std::invalid_argument("unknown apply_to '" + std::string(name) + "' (expected real, fake or both)");
}

LossPair gan_loss(LossKind kind, const Tensor& real_logits, const Tensor& fake_logits) {
  if (!all_finite(real_logits) || !all_finite(fake_logits)) {
    throw std::domain_error("gan_loss: non-finite logits");
  }
  const Tensor r = as_rows(real_logits);
  const Tensor f = as_rows(fake_logits);
  auto mean = [](const Tensor& t) { return ad::mean_reduce(t); };
  switch (kind) {
    case LossKind::ns:
      // -log sigmoid(x) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x)
      return {mean(ad::softplus(-r)) + mean(ad::softplus(f)), mean(ad::softplus(-f))};
    case LossKind::wasserstein:
      return {mean(f) - mean(r), -mean(f)};
    case LossKind::ls:
      return {0.5 * mean(ad::square(r - 1.0)) + 0.5 * mean(ad::square(f)),
              0.5 * mean(ad::square(f - 1.0))};
    case LossKind::hinge:
      return {mean(ad::relu(1.0 - r)) + mean(ad::relu(1.0 + f)), -mean(f)};
    case LossKind::rahinge: {
      const Tensor r_rel = r - mean(f);
      const Tensor f_rel = f - mean(r);
      return {mean(ad::relu(1.0 - r_rel)) + mean(ad::relu(1.0 + f_rel)),
              mean(ad::relu(1.0 + r_rel)) + mean(ad::relu(1.0 - f_rel))};
    }
  }
  throw std::invalid_argument("gan_loss: unknown kind");
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument(what); };
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be finite and >= 0");
  if (zeta < 2 || zeta > 4) bad("zeta must be 2, 3 or 4");
  if (!(sigma > 0.0)) bad("sigma must be > 0");
  if (batch == 0) bad("batch must be >= 1");
  if (d_steps == 0) bad("d_steps must be >= 1");
  if (optimizer != "adam" && optimizer != "sgd") bad("optimizer must be adam or sgd");
  if (!(lr_d >= 0.0) || !(lr_g >= 0.0)) bad("learning rates must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("betas must lie in [0, 1)");
  if (!(eps > 0.0)) bad("eps must be > 0");
  if (metric_every == 0) bad("metric_every must be >= 1");
  if (metric_batch < 2) bad("metric_batch must be >= 2");
  if (fisher_probes == 0) bad("fisher_probes must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) bad("tau must lie in (0, 1)");
  if (connectivity != 4 && connectivity != 8) bad("connectivity must be 4 or 8");
}

Tensor penalty_term(const Discriminator& d, const Tensor& real, const Tensor& fake,
                    const TrainConfig& config) {
  rg::PenaltyOptions opt;
  opt.zeta = config.zeta;
  opt.filter = config.filter;
  opt.sigma = config.sigma;
  opt.normalization = config.normalization;
  const rg::Critic critic = [&d](const Tensor& x) { return d.forward(x); };
  switch (config.apply_to) {
    case ApplyTo::real: return rg::ms3d_penalty(real, critic, opt);
    case ApplyTo::fake: return rg::ms3d_penalty(fake, critic, opt);
    case ApplyTo::both:
      return 0.5 * (rg::ms3d_penalty(real, critic, opt) + rg::ms3d_penalty(fake, critic, opt));
  }
  throw std::invalid_argument("penalty_term: unknown apply_to");
}

Tensor discriminator_loss(const Discriminator& d, const Tensor& real, const Tensor& fake,
                          const TrainConfig& config) {
  const Tensor base = gan_loss(config.loss, d.forward(real), d.forward(fake)).d;
  if (!config.penalty_path) return base;
  return base + config.lambda * penalty_term(d, real, fake, config);
}

// ---------------------------------------------------------------------------
// Optimizers

void Sgd::step(std::span<const Tensor> params, std::span<const Tensor> grads) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto v = p.mutable_values();
    const auto g = grads[k].values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr_ * g[i];
  }
}

void Adam::step(std::span<const Tensor> params, std::span<const Tensor> grads) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto w = p.mutable_values();
    const auto g = grads[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

Tensor images_tensor(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  return Tensor::from({idx.size(), ds.h, ds.w}, ds.gather(idx));
}

std::vector<std::size_t> first_n(const std::vector<std::size_t>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

double mean_of(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.values()) acc += v;
  return acc / static_cast<double>(t.numel());
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& c, double lr) {
  if (c.optimizer == "sgd") return std::make_unique<Sgd>(lr);
  return std::make_unique<Adam>(lr, c.beta1, c.beta2, c.eps);
}

diag::MetricRecord halted_record(std::size_t step) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {step, nan, nan, nan, nan, nan, nan, nan};
}

}  // namespace

diag::MetricRecord measure(const GanModel& model, const data::Dataset& dataset,
                           const TrainConfig& config, std::size_t step) {
  ad::NoGradGuard no_grad;
  const auto& d = model.discriminator;
  const Tensor real = images_tensor(dataset, first_n(dataset.train, config.metric_batch));
  const Tensor val = images_tensor(dataset, first_n(dataset.val, config.metric_batch));
  const auto fake_values = sample(model, config.metric_batch, derive(config.seed, 3));
  const Tensor fake = Tensor::from({config.metric_batch, dataset.h, dataset.w}, fake_values);

  diag::MetricRecord rec;
  rec.step = step;
  rec.d_train = mean_of(d.forward(real));
  rec.d_val = mean_of(d.forward(val));
  rec.d_fake = mean_of(d.forward(fake));

  const rg::Critic critic = [&d](const Tensor& x) { return d.forward(x); };
  const Tensor psi = rg::input_gradients(real, critic);
  const std::size_t rows = real.size(0), per = psi.size(1);
  double agg = 0.0, desc = 0.0;
  for (std::size_t b = 0; b < rows; ++b) {
    const auto field = rg::normalize(
        rg::embed_square(psi.values().subspan(b * per, per), dataset.h, dataset.w, 1, config.zeta));
    agg += diag::aggregation_metric(field, config.tau, config.connectivity).r_agg;
    desc += rg::ms3d(field, config.zeta, config.filter, config.sigma).total;
  }
  rec.r_agg = agg / static_cast<double>(rows);
  rec.ms3d = desc / static_cast<double>(rows);

  const auto params = d.params();
  rec.fisher = diag::fisher_trace(real, critic, params, config.fisher_probes, derive(config.seed, 1000 + step));

  const Tensor emb = d.embed(real);
  const std::size_t width = emb.numel() / rows;
  std::vector<std::vector<double>> vecs(rows);
  for (std::size_t b = 0; b < rows; ++b)
    vecs[b].assign(emb.values().begin() + static_cast<std::ptrdiff_t>(b * width),
                   emb.values().begin() + static_cast<std::ptrdiff_t>((b + 1) * width));
  try {
    rec.cosine = diag::mean_pairwise_cosine(vecs).mean;
  } catch (const std::invalid_argument&) {
    rec.cosine = std::numeric_limits<double>::quiet_NaN();
  }
  return rec;
}

TrainResult train(const TrainConfig& config, const data::Dataset& dataset, const ModelSpec& spec_in,
                  const TrainSinks& sinks) {
  config.validate();
  if (dataset.train.size() < config.batch) {
    throw std::invalid_argument("train: dataset has " + std::to_string(dataset.train.size()) +
                                " training images, fewer than batch " + std::to_string(config.batch));
  }
  if (dataset.c != 1) throw std::invalid_argument("train: only single-channel images are supported");
  ModelSpec spec = spec_in;
  spec.height = dataset.h;
  spec.width = dataset.w;

  TrainResult result;
  result.model = make_model(spec, config.seed);
  auto& model = result.model;
  const auto d_params = model.discriminator.params();
  const auto g_params = model.generator.params();
  auto opt_d = make_optimizer(config, config.lr_d);
  auto opt_g = make_optimizer(config, config.lr_g);

  std::mt19937_64 rng(derive(config.seed, 2));
  std::uniform_int_distribution<std::size_t> pick(0, dataset.train.size() - 1);
  auto real_batch = [&] {
    std::vector<std::size_t> idx(config.batch);
    for (auto& i : idx) i = dataset.train[pick(rng)];
    return images_tensor(dataset, idx);
  };

  auto emit = [&](const diag::MetricRecord& rec) {
    result.records.push_back(rec);
    if (sinks.on_record) sinks.on_record(rec);
  };

  for (std::size_t step = 1; step <= config.steps; ++step) {
    try {
      Tensor real;
      for (std::size_t k = 0; k < config.d_steps; ++k) {
        real = real_batch();
        const Tensor z = normal_batch(config.batch, spec.latent, rng);
        Tensor fake;
        {
          ad::NoGradGuard no_grad;
          fake = model.generator.forward(z);
        }
        const Tensor loss = discriminator_loss(model.discriminator, real, fake, config);
        if (!std::isfinite(loss.item())) throw std::domain_error("non-finite discriminator loss");
        opt_d->step(d_params, ad::grad(loss, d_params).grads);
      }

      const Tensor z = normal_batch(config.batch, spec.latent, rng);
      const Tensor fake_logits = model.discriminator.forward(model.generator.forward(z));
      Tensor real_logits;
      {
        ad::NoGradGuard no_grad;
        real_logits = model.discriminator.forward(real);
      }
      const Tensor g_loss = gan_loss(config.loss, real_logits, fake_logits).g;
      if (!std::isfinite(g_loss.item())) throw std::domain_error("non-finite generator loss");
      opt_g->step(g_params, ad::grad(g_loss, g_params).grads);

      if (step % config.metric_every == 0) emit(measure(model, dataset, config, step));
    } catch (const std::domain_error& e) {
      result.diverged = true;
      result.message = "diverged at step " + std::to_string(step) + ": " + e.what();
      emit(halted_record(step));
      return result;
    }

    if (config.checkpoint_every && step % config.checkpoint_every == 0 && sinks.on_checkpoint) {
      sinks.on_checkpoint(step, model);
    }
  }
  return result;
}

std::vector<double> sample(const GanModel& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) return {};
  std::mt19937_64 rng(seed);
  ad::NoGradGuard no_grad;
  const Tensor out = model.generator.forward(normal_batch(n, model.spec.latent, rng));
  return {out.values().begin(), out.values().end()};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'M', 'S', '3', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::string out;
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out += s;
  }
  void sizes(const std::vector<std::size_t>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (auto x : v) u64(x);
  }
};

struct Reader {
  const std::string& in;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > in.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * b);
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * b);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = in.substr(pos, n);
    pos += n;
    return s;
  }
  std::vector<std::size_t> sizes() {
    const auto n = u32();
    if (n > 1024) throw std::runtime_error("checkpoint: implausible list length");
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = u64();
    return v;
  }
};

std::vector<std::pair<std::string, Tensor>> named_arrays(const GanModel& m) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < m.generator.layers.size(); ++i) {
    out.emplace_back("g." + std::to_string(i) + ".w", m.generator.layers[i].w);
    if (m.generator.layers[i].b.defined()) out.emplace_back("g." + std::to_string(i) + ".b", m.generator.layers[i].b);
  }
  if (m.discriminator.conv_w.defined()) out.emplace_back("d.conv.w", m.discriminator.conv_w);
  if (m.discriminator.conv_b.defined()) out.emplace_back("d.conv.b", m.discriminator.conv_b);
  for (std::size_t i = 0; i < m.discriminator.layers.size(); ++i) {
    out.emplace_back("d." + std::to_string(i) + ".w", m.discriminator.layers[i].w);
    if (m.discriminator.layers[i].b.defined()) out.emplace_back("d." + std::to_string(i) + ".b", m.discriminator.layers[i].b);
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GanModel& model, std::size_t step) {
  Writer w;
  w.out.append(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(step);
  const auto& s = model.spec;
  w.u64(s.height);
  w.u64(s.width);
  w.u64(s.latent);
  w.sizes(s.g_hidden);
  w.sizes(s.d_hidden);
  w.u64(s.d_conv_channels);
  w.u32(s.d_bias ? 1 : 0);
  w.u32(s.g_zero_last ? 1 : 0);
  w.f64(s.leaky_slope);
  const auto arrays = named_arrays(model);
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    w.str(name);
    w.sizes(t.shape());
    for (double v : t.values()) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(w.out.data(), static_cast<std::streamsize>(w.out.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string raw = ss.str();
  if (raw.size() < sizeof kMagic || raw.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a checkpoint (bad magic)");
  }
  Reader r{raw, sizeof kMagic};
  const auto version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.step = r.u64();
  ModelSpec s;
  s.height = r.u64();
  s.width = r.u64();
  s.latent = r.u64();
  s.g_hidden = r.sizes();
  s.d_hidden = r.sizes();
  s.d_conv_channels = r.u64();
  s.d_bias = r.u32() != 0;
  s.g_zero_last = r.u32() != 0;
  s.leaky_slope = r.f64();
  if (s.height * s.width > (1u << 24) || s.latent > (1u << 24)) throw std::runtime_error("checkpoint: implausible spec");
  ck.model = make_model(s, 0);

  auto expected = named_arrays(ck.model);
  const auto count = r.u32();
  if (count != expected.size()) throw std::runtime_error("checkpoint: array count does not match architecture");
  for (auto& [name, t] : expected) {
    const std::string got = r.str();
    const auto shape = r.sizes();
    if (got != name || shape != t.shape()) {
      throw std::runtime_error("checkpoint: unexpected array '" + got + "' " + ad::shape_str(shape));
    }
    auto dst = t.mutable_values();
    for (auto& v : dst) v = r.f64();
  }
  if (r.pos != raw.size()) throw std::runtime_error("checkpoint: trailing bytes");
  return ck;
}

}  // namespace ms3d::gan
