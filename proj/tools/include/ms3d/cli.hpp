#pragma once

// Command-line front end: run configuration, CSV formatting and the
// subcommand dispatcher used by the `ms3d` executable.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ms3d/data.hpp"
#include "ms3d/diagnostics.hpp"
#include "ms3d/gan.hpp"

namespace ms3d::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeFailure = 2 };

/// Everything `ms3d train` reads from its config file.
struct RunConfig {
  gan::TrainConfig train;
  gan::ModelSpec model;
  data::Family family = data::Family::gauss_blobs;
  std::size_t budget = 50;  // training images
  std::size_t image_size = 16;
  std::uint64_t data_seed = 0;
  std::size_t samples = 16;  // images in the final sample grid
  std::string out_dir = "run";
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string message, std::vector<std::string> keys)
      : std::runtime_error(std::move(message)), keys_(std::move(keys)) {}
  [[nodiscard]] const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

/// `key = value` lines; `#` starts a comment. Unknown, repeated or malformed
/// keys are all collected into one ConfigError.
RunConfig parse_config(std::string_view text, RunConfig base = {});
/// Semantic checks of a parsed config; throws ConfigError naming the key.
void validate(const RunConfig& config);
/// Every key with its effective value and a short description.
std::string show_config(const RunConfig& config);

/// Shortest decimal that round-trips, independent of the C locale.
std::string format_double(double v);
std::string metrics_csv_header();
std::string metrics_csv_row(const diag::MetricRecord& record);

/// Runs one command line (without the program name). Output goes to `out`,
/// diagnostics to `err`. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ms3d::cli
