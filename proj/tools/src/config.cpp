#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ms3d/cli.hpp"

namespace ms3d::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view s) {
  T v{};
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::size_t> parse_sizes(std::string_view s) {
  std::vector<std::size_t> out;
  s = trim(s);
  if (s.empty() || s == "none") return out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(parse_number<std::size_t>(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

rg::NormalizationGrad parse_normalization(std::string_view s) {
  if (s == "detached") return rg::NormalizationGrad::detached;
  if (s == "through_max") return rg::NormalizationGrad::through_max;
  throw std::invalid_argument("expected detached or through_max");
}

struct Key {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MS3D_NUM_KEY(key, field, type, doc)                                                     \
  Key {                                                                                         \
    key, doc, [](RunConfig& c, std::string_view v) { c.field = parse_number<type>(v); },        \
        [](const RunConfig& c) {                                                                \
          if constexpr (std::is_floating_point_v<type>) return format_double(c.field);          \
          else return std::to_string(c.field);                                                  \
        }                                                                                       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"out_dir", "directory for metrics.csv, checkpoints and samples.pgm",
          [](RunConfig& c, std::string_view v) { c.out_dir = std::string(trim(v)); },
          [](const RunConfig& c) { return c.out_dir; }},
      Key{"family", "synthetic dataset: gauss-blobs | rings | bars",
          [](RunConfig& c, std::string_view v) { c.family = data::parse_family(trim(v)); },
          [](const RunConfig& c) { return std::string(data::to_string(c.family)); }},
      MS3D_NUM_KEY("budget", budget, std::size_t, "number of training images N"),
      MS3D_NUM_KEY("image_size", image_size, std::size_t, "image side, 16 or 32"),
      MS3D_NUM_KEY("data_seed", data_seed, std::uint64_t, "seed of the synthetic dataset"),
      MS3D_NUM_KEY("samples", samples, std::size_t, "images in the final sample grid"),
      MS3D_NUM_KEY("lambda", train.lambda, double, "weight of the MS3D penalty"),
      MS3D_NUM_KEY("zeta", train.zeta, std::size_t, "coarse-graining factor, 2 | 3 | 4"),
      Key{"filter", "RG filter: kadanoff | gaussian",
          [](RunConfig& c, std::string_view v) { c.train.filter = rg::parse_filter(trim(v)); },
          [](const RunConfig& c) { return std::string(rg::to_string(c.train.filter)); }},
      MS3D_NUM_KEY("sigma", train.sigma, double, "width of the gaussian filter"),
      Key{"normalization", "gradient through max|Psi|: detached | through_max",
          [](RunConfig& c, std::string_view v) { c.train.normalization = parse_normalization(trim(v)); },
          [](const RunConfig& c) {
            return std::string(c.train.normalization == rg::NormalizationGrad::detached ? "detached"
                                                                                        : "through_max");
          }},
      Key{"loss", "ns | wasserstein | ls | hinge | rahinge",
          [](RunConfig& c, std::string_view v) { c.train.loss = gan::parse_loss(trim(v)); },
          [](const RunConfig& c) { return std::string(gan::to_string(c.train.loss)); }},
      Key{"apply_to", "penalty target: real | fake | both",
          [](RunConfig& c, std::string_view v) { c.train.apply_to = gan::parse_apply_to(trim(v)); },
          [](const RunConfig& c) { return std::string(gan::to_string(c.train.apply_to)); }},
      Key{"penalty_path", "false never builds the penalty term",
          [](RunConfig& c, std::string_view v) { c.train.penalty_path = parse_bool(v); },
          [](const RunConfig& c) { return std::string(c.train.penalty_path ? "true" : "false"); }},
      MS3D_NUM_KEY("steps", train.steps, std::size_t, "generator steps"),
      MS3D_NUM_KEY("batch", train.batch, std::size_t, "batch size"),
      MS3D_NUM_KEY("d_steps", train.d_steps, std::size_t, "discriminator steps per generator step"),
      Key{"optimizer", "adam | sgd",
          [](RunConfig& c, std::string_view v) { c.train.optimizer = std::string(trim(v)); },
          [](const RunConfig& c) { return c.train.optimizer; }},
      MS3D_NUM_KEY("lr_d", train.lr_d, double, "discriminator learning rate"),
      MS3D_NUM_KEY("lr_g", train.lr_g, double, "generator learning rate"),
      MS3D_NUM_KEY("beta1", train.beta1, double, "Adam beta1"),
      MS3D_NUM_KEY("beta2", train.beta2, double, "Adam beta2"),
      MS3D_NUM_KEY("eps", train.eps, double, "Adam epsilon"),
      MS3D_NUM_KEY("seed", train.seed, std::uint64_t, "seed of initialization, batches and latents"),
      MS3D_NUM_KEY("metric_every", train.metric_every, std::size_t, "steps between metric rows"),
      MS3D_NUM_KEY("metric_batch", train.metric_batch, std::size_t, "images per metric evaluation"),
      MS3D_NUM_KEY("fisher_probes", train.fisher_probes, std::size_t, "probes of the Fisher estimate"),
      MS3D_NUM_KEY("tau", train.tau, double, "aggregation threshold on the normalized field"),
      MS3D_NUM_KEY("connectivity", train.connectivity, int, "aggregation connectivity, 4 | 8"),
      MS3D_NUM_KEY("checkpoint_every", train.checkpoint_every, std::size_t, "0 disables periodic checkpoints"),
      MS3D_NUM_KEY("latent", model.latent, std::size_t, "generator latent size"),
      Key{"g_hidden", "generator hidden widths, comma separated or none",
          [](RunConfig& c, std::string_view v) { c.model.g_hidden = parse_sizes(v); },
          [](const RunConfig& c) { return join_sizes(c.model.g_hidden); }},
      Key{"d_hidden", "discriminator hidden widths, comma separated or none",
          [](RunConfig& c, std::string_view v) { c.model.d_hidden = parse_sizes(v); },
          [](const RunConfig& c) { return join_sizes(c.model.d_hidden); }},
      MS3D_NUM_KEY("d_conv_channels", model.d_conv_channels, std::size_t, "0 disables the conv layer"),
      Key{"d_bias", "discriminator biases",
          [](RunConfig& c, std::string_view v) { c.model.d_bias = parse_bool(v); },
          [](const RunConfig& c) { return std::string(c.model.d_bias ? "true" : "false"); }},
      Key{"g_zero_last", "zero generator output weights at init",
          [](RunConfig& c, std::string_view v) { c.model.g_zero_last = parse_bool(v); },
          [](const RunConfig& c) { return std::string(c.model.g_zero_last ? "true" : "false"); }},
  };
  return table;
}

#undef MS3D_NUM_KEY

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::map<std::string, const Key*> by_name;
  for (const auto& k : keys()) by_name[k.name] = &k;

  std::vector<std::string> bad;
  std::string message;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string_view::npos) {
      bad.push_back(std::string(line));
      message += where + "expected key = value\n";
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto it = by_name.find(key);
    if (it == by_name.end()) {
      bad.push_back(key);
      message += where + "unknown key '" + key + "'\n";
      continue;
    }
    if (!seen.insert(key).second) {
      bad.push_back(key);
      message += where + "repeated key '" + key + "'\n";
      continue;
    }
    try {
      it->second->set(base, value);
    } catch (const std::exception& e) {
      bad.push_back(key);
      message += where + key + ": " + e.what() + "\n";
    }
  }
  if (!bad.empty()) throw ConfigError(message, bad);
  return base;
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what + "\n", {key});
  };
  if (c.image_size != 16 && c.image_size != 32) fail("image_size", "must be 16 or 32");
  if (c.budget < 1) fail("budget", "must be >= 1");
  if (c.budget < c.train.batch) fail("budget", "must be >= batch");
  if (c.out_dir.empty()) fail("out_dir", "must not be empty");
  if (c.model.latent == 0) fail("latent", "must be >= 1");
  for (auto w : c.model.g_hidden)
    if (w == 0) fail("g_hidden", "widths must be >= 1");
  for (auto w : c.model.d_hidden)
    if (w == 0) fail("d_hidden", "widths must be >= 1");
  try {
    c.train.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    std::string key = what.substr(0, what.find(' '));
    if (key == "learning") key = "lr_d, lr_g";
    if (key == "betas") key = "beta1, beta2";
    throw ConfigError(what + "\n", {key});
  }
}

std::string show_config(const RunConfig& config) {
  std::size_t width = 0;
  for (const auto& k : keys()) width = std::max(width, k.name.size());
  std::string out;
  for (const auto& k : keys()) {
    std::string line = k.name;
    line.resize(width, ' ');
    line += " = " + k.get(config);
    if (line.size() < width + 16) line.resize(width + 16, ' ');
    out += line + "  # " + k.doc + "\n";
  }
  return out;
}

std::string metrics_csv_header() { return "step,d_train,d_val,d_fake,r_agg,ms3d,fisher,cosine"; }

std::string metrics_csv_row(const diag::MetricRecord& r) {
  return std::to_string(r.step) + "," + format_double(r.d_train) + "," + format_double(r.d_val) + "," +
         format_double(r.d_fake) + "," + format_double(r.r_agg) + "," + format_double(r.ms3d) + "," +
         format_double(r.fisher) + "," + format_double(r.cosine);
}

}  // namespace ms3d::cli
