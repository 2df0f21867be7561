// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance <id>...    run the named criteria
//   acceptance --list     print the criterion ids
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ms3d/diagnostics.hpp"
#include "ms3d/gan.hpp"
#include "ms3d/gradcheck.hpp"
#include "ms3d/ops.hpp"
#include "ms3d/rgflow.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#ifdef MS3D_HAVE_CLI
#include <fstream>

#include "ms3d/cli.hpp"
#endif

namespace {

namespace ad = ms3d::ad;
namespace rg = ms3d::rg;
namespace diag = ms3d::diag;
namespace gan = ms3d::gan;
namespace oracle = ms3d::oracle;
using ms3d::testing::uniform_tensor;
using ms3d::testing::uniform_values;

// Tolerances and budgets of the criteria.
constexpr double kIdentityTol = 1e-12;
constexpr double kInvarianceTol = 1e-12;
constexpr double kFirstOrderTol = 1e-6;
constexpr double kSecondOrderTol = 1e-4;
constexpr double kFisherBand = 0.15;
constexpr double kProjectionSeconds = 5.0;
constexpr double kSeparationSeconds = 5.0;
constexpr double kAutodiffSeconds = 60.0;
constexpr double kPairSeconds = 600.0;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> reasons;

  void require(bool ok, const std::string& why) {
    if (!ok) {
      pass = false;
      reasons.push_back(why);
    }
  }

  std::string summary() const {
    std::string out;
    for (const auto& r : reasons) out += (out.empty() ? "" : "; ") + r;
    const auto d = detail.str();
    if (!d.empty()) out += (out.empty() ? "" : " | ") + d;
    return out;
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

rg::Field2D random_normalized(std::size_t side, std::uint64_t seed) {
  return rg::normalize(rg::Field2D(side, uniform_values(side * side, seed, -1.0, 1.0)));
}

// ---------------------------------------------------------------------------

Verdict projection_identity() {
  Verdict v;
  const auto t0 = Clock::now();
  double worst_overlap = 0.0, worst_energy = 0.0, worst_oracle = 0.0;
  const std::size_t sides[] = {8, 16, 32, 64};
  const std::size_t zetas[] = {2, 4};
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t side = sides[i % 4];
    const std::size_t zeta = zetas[(i / 4) % 2];
    const auto field = random_normalized(side, 1000 + i);
    const auto chain = rg::build_chain(field, zeta);
    auto ref = oracle::from_flat(field.values, side);
    std::size_t block = zeta;
    for (std::size_t s = 0; s + 1 < chain.fields.size(); ++s, block *= zeta) {
      const auto& a = chain.fields[s];
      const auto& b = chain.fields[s + 1];
      worst_overlap = std::max(worst_overlap, std::abs(rg::inner_product(a, b) - rg::inner_product(b, b)));
      worst_energy = std::max(
          worst_energy, std::abs(rg::sd_step(a, b) - (rg::inner_product(a, a) - rg::inner_product(b, b))));
      const auto next = oracle::block_average(ref, block);
      worst_oracle = std::max(worst_oracle, std::abs(oracle::mean_sq_diff(ref, next) - rg::sd_step(a, b)));
      ref = next;
    }
  }
  const double secs = seconds_since(t0);
  v.detail << "max |<s|s+1>-<s+1|s+1>| " << sci(worst_overlap) << ", max energy gap " << sci(worst_energy)
           << ", oracle gap " << sci(worst_oracle) << ", " << secs << " s";
  v.require(worst_overlap < kIdentityTol, "overlap identity off by " + sci(worst_overlap));
  v.require(worst_energy < kIdentityTol, "energy identity off by " + sci(worst_energy));
  v.require(worst_oracle < kIdentityTol, "library and oracle SDs differ by " + sci(worst_oracle));
  v.require(secs < kProjectionSeconds, "took " + std::to_string(secs) + " s");
  return v;
}

Verdict fixed_point_invariance() {
  Verdict v;
  for (double c : {1e-3, 0.3, 1.0, 7.0, 1e3})
    for (std::size_t zeta : {2u, 4u}) {
      const auto field = rg::normalize(rg::Field2D(16, std::vector<double>(256, c)));
      const double total = rg::ms3d(field, zeta).total;
      v.require(total == 0.0, "constant " + std::to_string(c) + " gives " + sci(total));
    }
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto raw = uniform_values(256, 77 + seed, -1.0, 1.0);
    for (auto filter : {rg::Filter::kadanoff, rg::Filter::gaussian}) {
      const double base = rg::ms3d(rg::normalize(rg::Field2D(16, raw)), 2, filter).total;
      for (double c : {1e-3, 1.0, 1e3}) {
        auto scaled = raw;
        for (auto& x : scaled) x *= c;
        worst = std::max(worst, std::abs(rg::ms3d(rg::normalize(rg::Field2D(16, scaled)), 2, filter).total - base));
      }
    }
  }
  v.detail << "constant fields checked for exact 0; max scale deviation " << sci(worst);
  v.require(worst < kInvarianceTol, "scale deviation " + sci(worst));
  return v;
}

Verdict worked_value() {
  Verdict v;
  std::vector<double> cells(16, 0.0);
  cells[5] = 1.0;
  const auto lib = rg::ms3d(rg::normalize(rg::Field2D(4, cells)), 2);
  const auto ref = oracle::kadanoff_sd(oracle::from_flat(oracle::normalized(cells), 4), 2);
  const std::vector<double> expected{0.046875, 0.01171875};
  v.detail << "per-scale [" << lib.per_scale.at(0) << ", " << lib.per_scale.at(1) << "], total " << lib.total;
  v.require(lib.per_scale == expected, "library per-scale SDs differ");
  v.require(ref == expected, "oracle per-scale SDs differ");
  v.require(lib.total == 0.05859375, "total " + std::to_string(lib.total));
  return v;
}

Verdict pattern_separation() {
  Verdict v;
  const auto t0 = Clock::now();
  std::ostringstream values;
  for (std::size_t k : {2u, 4u, 8u}) {
    std::vector<double> block(256, 0.0), scattered(256, 0.0);
    const std::size_t spacing = 16 / k;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        block[i * 16 + j] = 1.0;
        scattered[(i * spacing) * 16 + j * spacing] = 1.0;
      }
    const double solid = rg::ms3d(rg::normalize(rg::Field2D(16, block)), 2).total;
    const double spread = rg::ms3d(rg::normalize(rg::Field2D(16, scattered)), 2).total;
    double solid_ref = 0.0, spread_ref = 0.0;
    for (double s : oracle::kadanoff_sd(oracle::from_flat(oracle::normalized(block), 16), 2)) solid_ref += s;
    for (double s : oracle::kadanoff_sd(oracle::from_flat(oracle::normalized(scattered), 16), 2)) spread_ref += s;
    values << (k == 2 ? "" : ", ") << "k=" << k << " block " << solid << " scattered " << spread;
    v.require(std::abs(solid - solid_ref) < kIdentityTol && std::abs(spread - spread_ref) < kIdentityTol,
              "k=" + std::to_string(k) + " library disagrees with oracle");
    v.require(solid > spread, "k=" + std::to_string(k) + ": block " + std::to_string(solid) +
                                  " is not above scattered " + std::to_string(spread));
  }
  const double secs = seconds_since(t0);
  v.require(secs < kSeparationSeconds, "took " + std::to_string(secs) + " s");
  v.detail << values.str();
  return v;
}

// ---------------------------------------------------------------------------

struct OpCheck {
  const char* name;
  ad::Shape shape;
  double lo, hi;
  std::function<ad::Tensor(const ad::Tensor&)> f;
};

ad::Tensor w(ad::Shape s, std::uint64_t seed) { return uniform_tensor(std::move(s), seed); }

std::vector<OpCheck> op_checks() {
  return {
      {"add", {3, 4}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(t + w({4}, 1))); }},
      {"sub", {3, 4}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(w({3, 1}, 2) - t)); }},
      {"mul", {3, 4}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(t * t * w({3, 4}, 3)); }},
      {"scale_shift", {5}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::tanh(2.5 * t - 0.3)); }},
      {"matmul", {3, 4}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::tanh(ad::matmul(t, w({4, 2}, 4)))); }},
      {"transpose", {3, 4}, -1, 1,
       [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(ad::transpose(t)) * w({4, 3}, 5)); }},
      {"conv2d", {2, 2, 5, 5}, -1, 1,
       [](const ad::Tensor& t) { return ad::sum_reduce(ad::tanh(ad::conv2d(t, w({3, 2, 3, 3}, 6), 2, 1))); }},
      {"conv2d_weight", {3, 2, 3, 3}, -1, 1,
       [](const ad::Tensor& k) { return ad::sum_reduce(ad::tanh(ad::conv2d(w({2, 2, 5, 5}, 7), k, 1, 1))); }},
      {"avg_pool2d", {2, 6, 6}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(ad::avg_pool2d(t, 3, 2))); }},
      {"sum_pool2d", {2, 4, 4}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(ad::sum_pool2d(t, 2))); }},
      {"upsample_nearest", {2, 3, 3}, -1, 1,
       [](const ad::Tensor& t) { return ad::sum_reduce(ad::tanh(ad::upsample_nearest(t, 2) * w({6, 6}, 8))); }},
      {"stencil3x3_reflect", {2, 5, 5}, -1, 1,
       [](const ad::Tensor& t) {
         return ad::sum_reduce(ad::square(ad::stencil3x3_reflect(t, rg::gaussian_kernel(1.0)) * w({5, 5}, 17)));
       }},
      {"decimate", {2, 6, 6}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(ad::decimate(t, 3))); }},
      {"reshape_pad_crop", {2, 5}, -1, 1,
       [](const ad::Tensor& t) {
         auto p = ad::pad_zero(t, 8);
         // weights bounded away from 0 keep every coordinate above the FD rounding floor
         return ad::sum_reduce(ad::square(ad::crop_last(ad::reshape(p, {4, 4}), 3) * uniform_tensor({4, 3}, 9, 0.5, 1.0)));
       }},
      {"broadcast_sum_to", {3, 1}, -1, 1,
       [](const ad::Tensor& t) { return ad::sum_reduce(ad::tanh(ad::broadcast_to(t, {3, 4}) * w({3, 4}, 16))); }},
      {"abs", {6}, 0.1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::abs(t - 0.5) * w({6}, 10)); }},
      {"max_reduce", {2, 5}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(ad::max_reduce(t, 1))); }},
      {"mean_reduce", {2, 5}, -1, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::square(ad::mean_reduce(t, 1))); }},
      {"tanh", {6}, -2, 2, [](const ad::Tensor& t) { return ad::sum_reduce(ad::tanh(t) * w({6}, 18)); }},
      {"sigmoid", {6}, -3, 3, [](const ad::Tensor& t) { return ad::sum_reduce(ad::sigmoid(t) * w({6}, 11)); }},
      {"softplus", {6}, -3, 3, [](const ad::Tensor& t) { return ad::sum_reduce(ad::softplus(t) * w({6}, 12)); }},
      {"leaky_relu", {6}, 0.05, 1,
       [](const ad::Tensor& t) { return ad::sum_reduce(ad::leaky_relu(t - 0.5, 0.2) * w({6}, 13)); }},
      {"relu", {6}, 0.05, 1, [](const ad::Tensor& t) { return ad::sum_reduce(ad::relu(t - 0.5) * w({6}, 19)); }},
      {"reciprocal", {6}, 0.5, 2, [](const ad::Tensor& t) { return ad::sum_reduce(ad::reciprocal(t) * w({6}, 20)); }},
      {"log", {6}, 0.5, 2, [](const ad::Tensor& t) { return ad::sum_reduce(ad::log(t) * w({6}, 14)); }},
      {"mse", {3, 3}, -1, 1, [](const ad::Tensor& t) { return ad::mse(t, w({3, 3}, 15)); }},
  };
}

Verdict autodiff() {
  Verdict v;
  const auto t0 = Clock::now();
  double worst_op = 0.0;
  for (const auto& c : op_checks()) {
    const auto x = uniform_tensor(c.shape, 101, c.lo, c.hi);
    const double err = ad::finite_diff_check(c.f, x, 1e-5);
    worst_op = std::max(worst_op, err);
    v.require(err < kFirstOrderTol, std::string(c.name) + " first-order error " + sci(err));
  }

  // 2-layer softplus discriminator on 16 x 16 inputs
  gan::ModelSpec spec;
  spec.d_hidden = {8};
  spec.g_hidden = {8};
  spec.latent = 4;
  const auto model = gan::make_model(spec, 3);
  const auto& d = model.discriminator;
  auto params = d.params();
  const auto real = uniform_tensor({2, 16, 16}, 31), fake = uniform_tensor({2, 16, 16}, 32);

  gan::TrainConfig cfg;
  cfg.normalization = rg::NormalizationGrad::through_max;
  double worst_loss = 0.0;
  for (auto kind : {gan::LossKind::ns, gan::LossKind::wasserstein, gan::LossKind::ls, gan::LossKind::hinge,
                    gan::LossKind::rahinge}) {
    cfg.loss = kind;
    const auto pair = ad::gradient_pair([&] { return gan::discriminator_loss(d, real, fake, cfg); }, params, 1e-6);
    const double err = ad::normwise_error(pair.analytic, pair.numeric);
    worst_loss = std::max(worst_loss, err);
    v.require(err < kFirstOrderTol, "full " + std::string(gan::to_string(kind)) + " loss error " + sci(err));
  }

  const rg::Critic critic = [&d](const ad::Tensor& x) { return d.forward(x); };
  rg::PenaltyOptions frozen;
  {
    ad::NoGradGuard ng;
    frozen.fixed_scales = rg::normalization_scales(rg::input_gradients(real, critic));
  }
  const double second = ad::finite_diff_check([&] { return rg::ms3d_penalty(real, critic, frozen); }, params, 1e-5);
  rg::PenaltyOptions through;
  through.normalization = rg::NormalizationGrad::through_max;
  const double second_max =
      ad::finite_diff_check([&] { return rg::ms3d_penalty(real, critic, through); }, params, 1e-5);
  v.require(second < kSecondOrderTol, "penalty gradient error " + sci(second));
  v.require(second_max < kSecondOrderTol, "through-max penalty gradient error " + sci(second_max));

  const double secs = seconds_since(t0);
  v.require(secs < kAutodiffSeconds, "took " + std::to_string(secs) + " s");
  v.detail << "ops " << sci(worst_op) << ", full loss " << sci(worst_loss) << ", penalty d/dphi " << sci(second)
             << " (through max " << sci(second_max) << "), " << secs << " s";
  return v;
}

Verdict cc_oracle() {
  Verdict v;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> density(0.1, 0.9);
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::bernoulli_distribution on(density(rng));
    std::vector<std::uint8_t> mask(256);
    std::vector<double> field(256);
    for (std::size_t i = 0; i < 256; ++i) {
      mask[i] = on(rng) ? 1 : 0;
      field[i] = mask[i] ? 1.0 : 0.0;
    }
    for (int conn : {4, 8}) {
      const auto got = diag::aggregation_metric(rg::Field2D(16, field), 0.5, conn).n_agg;
      const auto want = oracle::flood_fill_count(mask, 16, 16, conn);
      ++compared;
      if (got != want) {
        v.require(false, "trial " + std::to_string(trial) + " connectivity " + std::to_string(conn) + ": " +
                             std::to_string(got) + " vs " + std::to_string(want));
        return v;
      }
    }
  }
  v.detail << compared << " grid/connectivity pairs agree";
  return v;
}

Verdict fisher_sanity() {
  Verdict v;
  constexpr std::size_t dim = 64;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ad::Tensor phi = uniform_tensor({dim, 1}, 40 + seed, -1, 1, true);
    const rg::Critic linear = [&phi](const ad::Tensor& x) {
      return ad::matmul(ad::reshape(x, {x.size(0), x.numel() / x.size(0)}), phi);
    };
    std::vector<ad::Tensor> params{phi};
    const double est = diag::fisher_trace(uniform_tensor({2, 8, 8}, 50 + seed), linear, params, 256, seed);
    v.detail << (seed == 1 ? "" : ", ") << "seed " << seed << " estimate " << est;
    v.require(std::abs(est - dim) <= kFisherBand * dim,
              "seed " + std::to_string(seed) + " estimate " + std::to_string(est) + " vs " + std::to_string(dim));
  }
  ad::Tensor bias = ad::Tensor::from({1}, {0.3}, true);
  const ad::Tensor fixed = uniform_tensor({16, 1}, 3);
  const rg::Critic detached = [&](const ad::Tensor& x) {
    return ad::matmul(ad::reshape(x, {x.size(0), 16}), fixed) + bias;
  };
  std::vector<ad::Tensor> params{bias};
  const double zero = diag::fisher_trace(uniform_tensor({3, 4, 4}, 1), detached, params, 16, 0);
  v.require(zero == 0.0, "phi-independent field gives " + sci(zero));
  v.detail << " (dim " << dim << "); phi-independent field gives " << zero;
  return v;
}

// ---------------------------------------------------------------------------

struct WindowMeans {
  double ms3d = 0.0;
  double fisher = 0.0;
};

WindowMeans final_window(const std::vector<diag::MetricRecord>& records) {
  const std::size_t n = records.size();
  const std::size_t start = n - std::max<std::size_t>(1, n / 5);
  WindowMeans m;
  for (std::size_t i = start; i < n; ++i) {
    m.ms3d += records[i].ms3d;
    m.fisher += records[i].fisher;
  }
  m.ms3d /= static_cast<double>(n - start);
  m.fisher /= static_cast<double>(n - start);
  return m;
}

Verdict directional_training() {
  Verdict v;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto ds = ms3d::data::make_synthetic_budget(ms3d::data::Family::gauss_blobs, 50, 16, seed);
    WindowMeans m[2];
    const auto t0 = Clock::now();
    for (int i = 0; i < 2; ++i) {
      gan::TrainConfig cfg;
      cfg.lambda = i == 0 ? 0.0 : 10.0;
      cfg.steps = 2000;
      cfg.seed = seed;
      const auto r = gan::train(cfg, ds);
      if (r.diverged || r.records.empty()) {
        v.require(false, "seed " + std::to_string(seed) + " lambda " + std::to_string(cfg.lambda) + " diverged");
        return v;
      }
      m[i] = final_window(r.records);
    }
    const double secs = seconds_since(t0);
    v.detail << (seed == 0 ? "" : "; ") << "seed " << seed << ": ms3d " << m[1].ms3d << " vs " << m[0].ms3d
             << ", fisher " << m[1].fisher << " vs " << m[0].fisher << " (" << secs << " s)";
    const std::string tag = "seed " + std::to_string(seed);
    v.require(m[1].ms3d < m[0].ms3d, tag + " ms3d not lower");
    v.require(m[1].fisher < m[0].fisher, tag + " fisher not lower");
    v.require(secs < kPairSeconds, tag + " pair took " + std::to_string(secs) + " s");
  }
  return v;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Verdict lambda_zero_equivalence() {
  Verdict v;
  const auto ds = ms3d::data::make_synthetic_budget(ms3d::data::Family::gauss_blobs, 50, 16, 4);
  for (auto apply : {gan::ApplyTo::real, gan::ApplyTo::both}) {
    gan::TrainConfig on;
    on.lambda = 0.0;
    on.steps = 200;
    on.seed = 9;
    on.apply_to = apply;
    auto off = on;
    off.penalty_path = false;
    const auto a = gan::train(on, ds);
    const auto b = gan::train(off, ds);
    bool same = a.records.size() == b.records.size();
    for (std::size_t i = 0; same && i < a.records.size(); ++i) {
      const auto &x = a.records[i], &y = b.records[i];
      same = x.step == y.step && same_bits(x.d_train, y.d_train) && same_bits(x.d_val, y.d_val) &&
             same_bits(x.d_fake, y.d_fake) && same_bits(x.r_agg, y.r_agg) && same_bits(x.ms3d, y.ms3d) &&
             same_bits(x.fisher, y.fisher) && same_bits(x.cosine, y.cosine);
    }
    const auto fa = gan::flatten(a.model.discriminator.params());
    const auto fb = gan::flatten(b.model.discriminator.params());
    const auto ga = gan::flatten(a.model.generator.params());
    const auto gb = gan::flatten(b.model.generator.params());
    same = same && fa.size() == fb.size() && ga.size() == gb.size() &&
           std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)) == 0 &&
           std::memcmp(ga.data(), gb.data(), ga.size() * sizeof(double)) == 0;
    v.require(same, std::string("apply_to ") + std::string(gan::to_string(apply)) + " trajectories differ");
  }
  if (v.pass) v.detail << "200 steps, records and final weights bit-identical (apply_to real and both)";
  return v;
}

#ifdef MS3D_HAVE_CLI

namespace fs = std::filesystem;
const fs::path kFixtures = MS3D_FIXTURE_DIR;

std::string cli_out(const std::vector<std::string>& args, int& code) {
  std::ostringstream out, err;
  code = ms3d::cli::run(args, out, err);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict cli_round_trip() {
  namespace cli = ms3d::cli;
  Verdict v;
  int code = 0;
  std::size_t checks = 0;
  for (const char* name : {"single_cell.csv", "gradient.pgm", "constant.pgm", "two_blobs.csv"}) {
    const auto path = kFixtures / name;
    const auto img = ms3d::data::load_image(path);
    const auto lib = rg::ms3d(rg::normalize(rg::embed_square(img.values, img.h, img.w, img.c, 2)), 2);
    const auto text = cli_out({"ms3d", path.string()}, code);
    std::string want;
    for (std::size_t s = 0; s < lib.per_scale.size(); ++s)
      want += "sd " + std::to_string(s) + " " + cli::format_double(lib.per_scale[s]) + "\n";
    want += "total " + cli::format_double(lib.total) + "\n";
    ++checks;
    v.require(code == 0 && text.ends_with(want), std::string("ms3d text differs on ") + name);
    const auto json = cli_out({"ms3d", path.string(), "--json"}, code);
    ++checks;
    v.require(code == 0 && json.find("\"total\": " + cli::format_double(lib.total)) != std::string::npos,
              std::string("ms3d json differs on ") + name);
  }
  for (const char* name : {"two_blobs.csv", "zeros.csv"}) {
    const auto path = kFixtures / name;
    const auto dump = ms3d::data::read_dump(path);
    const auto agg = diag::aggregation_metric(
        rg::normalize(rg::embed_square(dump.values, dump.h, dump.w, dump.c, 2)), 0.2, 8);
    const auto csv = cli_out({"analyze", path.string(), "--csv"}, code);
    ++checks;
    v.require(code == 0 && csv == "sample,n_agg,r_agg,fisher\n0," + std::to_string(agg.n_agg) + "," +
                                      cli::format_double(agg.r_agg) + ",\n",
              std::string("analyze differs on ") + name);
  }

  ms3d::testing::TempDir tmp("acceptance_cli");
  const std::string cfg = "steps = 40\nmetric_every = 10\nbatch = 8\nmetric_batch = 4\nfisher_probes = 2\n";
  for (const char* run : {"a", "b"}) {
    std::ofstream(tmp / (std::string(run) + ".cfg")) << cfg << "out_dir = " << (tmp / run).string() << "\n";
    cli_out({"train", (tmp / (std::string(run) + ".cfg")).string()}, code);
    v.require(code == 0, std::string("train run ") + run + " failed");
  }
  const auto csv_a = slurp(tmp / "a" / "metrics.csv");
  ++checks;
  v.require(!csv_a.empty() && csv_a == slurp(tmp / "b" / "metrics.csv"), "repeated train CSVs differ");

  const auto rc = cli::parse_config(cfg);
  const auto ds = ms3d::data::make_synthetic_budget(rc.family, rc.budget, rc.image_size, rc.data_seed);
  std::string expected = cli::metrics_csv_header() + "\n";
  for (const auto& r : gan::train(rc.train, ds, rc.model).records) expected += cli::metrics_csv_row(r) + "\n";
  ++checks;
  v.require(csv_a == expected, "train CSV differs from library records");
  if (v.pass) v.detail << checks << " outputs equal library results byte for byte";
  return v;
}

#else

Verdict cli_round_trip() {
  Verdict v;
  v.require(false, "built without the command-line tool (MS3D_BUILD_TOOLS=OFF)");
  return v;
}

#endif

struct Criterion {
  const char* id;
  Verdict (*run)();
};

const Criterion kCriteria[] = {
    {"projection_identity", projection_identity},
    {"fixed_point_invariance", fixed_point_invariance},
    {"worked_value", worked_value},
    {"pattern_separation", pattern_separation},
    {"autodiff", autodiff},
    {"cc_oracle", cc_oracle},
    {"fisher_sanity", fisher_sanity},
    {"directional_training", directional_training},
    {"lambda_zero_equivalence", lambda_zero_equivalence},
    {"cli_round_trip", cli_round_trip},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.size() == 1 && wanted[0] == "--list") {
    for (const auto& c : kCriteria) std::cout << c.id << "\n";
    return 0;
  }
  for (const auto& name : wanted) {
    bool known = false;
    for (const auto& c : kCriteria) known = known || name == c.id;
    if (!known) {
      std::cerr << "unknown criterion '" << name << "' (try --list)\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.id << ": " << v.summary() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
