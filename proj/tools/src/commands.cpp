#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ms3d/cli.hpp"
#include "ms3d/ops.hpp"
#include "ms3d/rgflow.hpp"

namespace ms3d::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// ms3d

struct DescriptorArgs {
  std::string input;
  std::size_t zeta = 2;
  std::string filter = "kadanoff";
  double sigma = 1.0;
  bool json = false;
};

int cmd_ms3d(const DescriptorArgs& a, std::ostream& out) {
  const auto img = data::load_image(a.input);
  const auto filter = rg::parse_filter(a.filter);
  const auto field = rg::normalize(rg::embed_square(img.values, img.h, img.w, img.c, a.zeta));
  const auto profile = rg::ms3d(field, a.zeta, filter, a.sigma);

  if (a.json) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["input"] = a.input;
    j["height"] = img.h;
    j["width"] = img.w;
    j["channels"] = img.c;
    j["side"] = field.size;
    j["zeta"] = a.zeta;
    j["filter"] = a.filter;
    if (filter == rg::Filter::gaussian) j["sigma"] = a.sigma;
    j["per_scale"] = profile.per_scale;
    j["total"] = profile.total;
    out << j.dump(2) << "\n";
    return kSuccess;
  }
  out << "input " << a.input << " (" << img.h << "x" << img.w << "x" << img.c << ")\n";
  out << "side " << field.size << " zeta " << a.zeta << " filter " << a.filter << "\n";
  for (std::size_t s = 0; s < profile.per_scale.size(); ++s)
    out << "sd " << s << " " << format_double(profile.per_scale[s]) << "\n";
  out << "total " << format_double(profile.total) << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config_path;
  std::optional<std::size_t> steps;
  std::optional<std::string> out_dir;
  bool show = false;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  if (!a.config_path.empty()) {
    std::string text;
    try {
      text = read_text(a.config_path);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kRuntimeFailure;
    }
    try {
      rc = parse_config(text);
    } catch (const ConfigError& e) {
      err << "invalid config " << a.config_path << ":\n" << e.what();
      return kUsageError;
    }
  }
  if (a.steps) rc.train.steps = *a.steps;
  if (a.out_dir) rc.out_dir = *a.out_dir;
  if (a.show) {
    out << show_config(rc);
    return kSuccess;
  }
  try {
    validate(rc);
  } catch (const ConfigError& e) {
    err << "invalid config:\n" << e.what();
    return kUsageError;
  }

  const fs::path dir = rc.out_dir;
  fs::create_directories(dir);
  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
  csv << metrics_csv_header() << "\n";

  const auto dataset = data::make_synthetic_budget(rc.family, rc.budget, rc.image_size, rc.data_seed);
  gan::TrainSinks sinks;
  sinks.on_record = [&](const diag::MetricRecord& r) { csv << metrics_csv_row(r) << "\n" << std::flush; };
  sinks.on_checkpoint = [&](std::size_t step, const gan::GanModel& m) {
    gan::save_checkpoint(dir / ("checkpoint_" + std::to_string(step) + ".ckpt"), m, step);
  };
  const auto result = gan::train(rc.train, dataset, rc.model, sinks);
  csv.close();

  const std::size_t last = result.records.empty() ? (result.diverged ? 0 : rc.train.steps)
                                                  : (result.diverged ? result.records.back().step : rc.train.steps);
  gan::save_checkpoint(dir / "final.ckpt", result.model, last);
  const auto samples = gan::sample(result.model, rc.samples, rc.train.seed);
  if (rc.samples > 0) data::save_pgm(dir / "samples.pgm", data::tile_grid(samples, rc.samples, rc.image_size, rc.image_size));

  if (result.diverged) {
    err << "error: " << result.message << " (partial log in " << (dir / "metrics.csv").string() << ")\n";
    return kRuntimeFailure;
  }
  out << "wrote " << result.records.size() << " metric rows to " << (dir / "metrics.csv").string() << "\n";
  out << "final checkpoint " << (dir / "final.ckpt").string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------
// analyze

struct DataArgs {
  std::string family = "gauss-blobs";
  std::size_t budget = 50;
  std::uint64_t data_seed = 0;
};

struct AnalyzeArgs {
  std::string dump;
  std::string checkpoint;
  DataArgs data;
  std::size_t count = 8;
  std::size_t probes = 8;
  std::uint64_t seed = 0;
  std::size_t zeta = 2;
  double tau = 0.2;
  int connectivity = 8;
  bool csv = false;
};

data::Dataset dataset_for(const DataArgs& d, const gan::ModelSpec& spec) {
  if (spec.height != spec.width) throw std::runtime_error("checkpoint images are not square");
  return data::make_synthetic_budget(data::parse_family(d.family), d.budget, spec.height, d.data_seed);
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.dump.empty() == a.checkpoint.empty()) {
    err << "error: analyze needs either a gradient dump or --checkpoint\n";
    return kUsageError;
  }
  struct Row {
    diag::AggregationResult agg;
    std::optional<double> fisher;
  };
  std::vector<Row> rows;

  if (!a.dump.empty()) {
    const auto d = data::read_dump(a.dump);
    const auto field = rg::normalize(rg::embed_square(d.values, d.h, d.w, d.c, a.zeta));
    rows.push_back({diag::aggregation_metric(field, a.tau, a.connectivity), std::nullopt});
  } else {
    const auto ck = gan::load_checkpoint(a.checkpoint);
    const auto ds = dataset_for(a.data, ck.model.spec);
    const auto& d = ck.model.discriminator;
    const rg::Critic critic = [&d](const ad::Tensor& x) { return d.forward(x); };
    const auto params = d.params();
    const std::size_t n = std::min(a.count, ds.train.size());
    for (std::size_t i = 0; i < n; ++i) {
      const ad::Tensor x = ad::Tensor::from({1, ds.h, ds.w}, ds.gather({ds.train[i]}));
      ad::Tensor psi;
      {
        ad::NoGradGuard no_grad;
        psi = rg::input_gradients(x, critic);
      }
      const auto field = rg::normalize(rg::embed_square(psi.values(), ds.h, ds.w, 1, a.zeta));
      rows.push_back({diag::aggregation_metric(field, a.tau, a.connectivity),
                      diag::fisher_trace(x, critic, params, a.probes, a.seed + i)});
    }
  }

  if (a.csv) {
    out << "sample,n_agg,r_agg,fisher\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
      out << i << "," << rows[i].agg.n_agg << "," << format_double(rows[i].agg.r_agg) << ","
          << (rows[i].fisher ? format_double(*rows[i].fisher) : "") << "\n";
    return kSuccess;
  }
  out << "tau " << format_double(a.tau) << " connectivity " << a.connectivity << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << "sample " << i << " n_agg " << rows[i].agg.n_agg << " r_agg " << format_double(rows[i].agg.r_agg);
    if (rows[i].fisher) out << " fisher " << format_double(*rows[i].fisher);
    out << "\n";
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// landscape

struct LandscapeArgs {
  std::string checkpoint;
  DataArgs data;
  std::size_t grid = 21;
  double radius = 1.0;
  std::uint64_t seed = 0;
  std::size_t batch = 16;
  std::string loss = "ns";
  double lambda = 0.0;
  std::string out;
};

int cmd_landscape(const LandscapeArgs& a, std::ostream& out) {
  const auto ck = gan::load_checkpoint(a.checkpoint);
  const auto ds = dataset_for(a.data, ck.model.spec);
  const auto& d = ck.model.discriminator;
  const std::size_t n = std::min(a.batch, ds.train.size());
  const std::vector<std::size_t> idx(ds.train.begin(), ds.train.begin() + static_cast<std::ptrdiff_t>(n));
  const ad::Tensor real = ad::Tensor::from({n, ds.h, ds.w}, ds.gather(idx));
  const ad::Tensor fake = ad::Tensor::from({n, ds.h, ds.w}, gan::sample(ck.model, n, a.seed));

  gan::TrainConfig cfg;
  cfg.loss = gan::parse_loss(a.loss);
  cfg.lambda = a.lambda;
  cfg.penalty_path = a.lambda > 0.0;
  if (!(a.lambda >= 0.0)) throw std::invalid_argument("--lambda must be >= 0");

  const auto params = d.params();
  const auto phi = gan::flatten(params);
  const auto d1 = diag::filter_normalized_direction(params, 2 * a.seed);
  const auto d2 = diag::filter_normalized_direction(params, 2 * a.seed + 1);
  const diag::FlatLoss loss = [&](std::span<const double> point) {
    gan::assign(params, point);
    ad::NoGradGuard no_grad;
    try {
      return gan::discriminator_loss(d, real, fake, cfg).item();
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const auto slice = diag::loss_slice(loss, phi, d1, d2, a.grid, a.radius);
  gan::assign(params, phi);

  std::ostringstream csv;
  for (std::size_t i = 0; i < slice.n; ++i) {
    for (std::size_t j = 0; j < slice.n; ++j) {
      if (j) csv << ",";
      if (const auto v = slice.at(i, j)) csv << format_double(*v);
    }
    csv << "\n";
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + a.out);
    f << csv.str();
  }
  return kSuccess;
}

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--family", d.family, "synthetic dataset family")
      ->check(CLI::IsMember({"gauss-blobs", "rings", "bars"}))
      ->capture_default_str();
  cmd->add_option("--budget", d.budget, "training images of the dataset")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--data-seed", d.data_seed, "dataset seed")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scale structural self-dissimilarity toolkit", "ms3d"};
  app.require_subcommand(1);

  DescriptorArgs desc;
  auto* ms = app.add_subcommand("ms3d", "per-scale self-dissimilarity and MS3D total of an image");
  ms->add_option("input", desc.input, "image file (.pgm, .png or .csv)")->required();
  ms->add_option("--zeta", desc.zeta, "coarse-graining factor")->check(CLI::Range(2, 16))->capture_default_str();
  ms->add_option("--filter", desc.filter, "kadanoff or gaussian")
      ->check(CLI::IsMember({"kadanoff", "gaussian"}))
      ->capture_default_str();
  ms->add_option("--sigma", desc.sigma, "gaussian filter width")->check(CLI::PositiveNumber)->capture_default_str();
  ms->add_flag("--json", desc.json, "machine-readable report");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train a regularized toy GAN from a config file");
  train->add_option("config", tr.config_path, "key = value config file");
  train->add_option("--steps", tr.steps, "override the number of steps");
  train->add_option("--out", tr.out_dir, "override out_dir");
  train->add_flag("--show-config", tr.show, "print the effective configuration and exit");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "gradient aggregation and Fisher trace");
  analyze->add_option("dump", an.dump, "gradient dump (.csv or F64LE binary)");
  analyze->add_option("--checkpoint", an.checkpoint, "checkpoint to analyze on dataset images");
  add_data_options(analyze, an.data);
  analyze->add_option("--count", an.count, "images to analyze")->capture_default_str();
  analyze->add_option("--probes", an.probes, "Fisher probes")->check(CLI::PositiveNumber)->capture_default_str();
  analyze->add_option("--seed", an.seed, "probe seed")->capture_default_str();
  analyze->add_option("--zeta", an.zeta, "embedding factor")->check(CLI::Range(2, 16))->capture_default_str();
  analyze->add_option("--tau", an.tau, "threshold in (0, 1)")->capture_default_str();
  analyze->add_option("--connectivity", an.connectivity, "4 or 8")->check(CLI::IsMember({4, 8}))->capture_default_str();
  analyze->add_flag("--csv", an.csv, "CSV output");

  LandscapeArgs ls;
  auto* land = app.add_subcommand("landscape", "2-D slice of the discriminator loss");
  land->add_option("checkpoint", ls.checkpoint, "checkpoint file")->required();
  add_data_options(land, ls.data);
  land->add_option("--grid", ls.grid, "points per axis")->check(CLI::PositiveNumber)->capture_default_str();
  land->add_option("--radius", ls.radius, "half-width of the slice")->check(CLI::NonNegativeNumber)->capture_default_str();
  land->add_option("--seed", ls.seed, "direction and fake-sample seed")->capture_default_str();
  land->add_option("--batch", ls.batch, "images in the loss batch")->check(CLI::PositiveNumber)->capture_default_str();
  land->add_option("--loss", ls.loss, "loss kind")
      ->check(CLI::IsMember({"ns", "wasserstein", "ls", "hinge", "rahinge"}))
      ->capture_default_str();
  land->add_option("--lambda", ls.lambda, "penalty weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  land->add_option("--out", ls.out, "write the grid here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'ms3d --help' for usage\n";
    return kUsageError;
  }

  try {
    if (ms->parsed()) return cmd_ms3d(desc, out);
    if (train->parsed()) return cmd_train(tr, out, err);
    if (analyze->parsed()) {
      if (!(an.tau > 0.0 && an.tau < 1.0)) {
        err << "error: --tau must lie in (0, 1)\n";
        return kUsageError;
      }
      return cmd_analyze(an, out, err);
    }
    if (land->parsed()) return cmd_landscape(ls, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace ms3d::cli
