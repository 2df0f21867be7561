#pragma once

// Synthetic limited-data image sets and plain-file image I/O.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ms3d::data {

enum class Family { gauss_blobs, rings, bars };

std::string_view to_string(Family family);
/// "gauss-blobs", "rings" or "bars".
Family parse_family(std::string_view name);

struct Dataset {
  std::size_t n = 0, h = 0, w = 0, c = 1;
  std::vector<double> images;  // n x h x w x c, values in [-1, 1]
  std::vector<std::size_t> train, val;
  Family family = Family::gauss_blobs;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t image_size() const { return h * w * c; }
  /// Gathers the listed images into one contiguous n x h x w x c block.
  [[nodiscard]] std::vector<double> gather(const std::vector<std::size_t>& indices) const;
};

/// Renders n images of size x size with randomized pose, then splits them.
/// The held-out part has `val_count` images, default max(1, n / 10).
/// Throws std::invalid_argument for n < 2, size not 16 or 32, or a split that
/// leaves either side empty.
Dataset make_synthetic(Family family, std::size_t n, std::size_t size, std::uint64_t seed,
                       std::optional<std::size_t> val_count = std::nullopt);

/// A dataset with exactly `train_count` training images (and max(1, N / 9)
/// held-out images).
Dataset make_synthetic_budget(Family family, std::size_t train_count, std::size_t size,
                              std::uint64_t seed);

struct Image {
  std::size_t h = 0, w = 0, c = 1;
  std::vector<double> values;  // row-major h x w x c
};

enum class Format { pgm, png, csv };

/// From the file extension (.pgm, .png, .csv); throws std::invalid_argument.
Format format_from_path(const std::filesystem::path& path);

/// Decodes an image. 8-bit samples map to [0, 1] by /255 (PGM with a larger
/// maxval by /maxval); CSV values are returned unchanged. Colour PNGs are
/// converted to gray. Throws std::runtime_error naming the format on
/// unreadable or corrupt files.
Image load_image(const std::filesystem::path& path, std::optional<Format> format = std::nullopt);

/// Binary P5 with maxval 255; values are clamped to [0, 1] and rounded.
void save_pgm(const std::filesystem::path& path, const Image& image);
void save_png(const std::filesystem::path& path, const Image& image);
/// One row per image row, channels flattened; shortest round-trip decimal form.
void save_csv(const std::filesystem::path& path, const Image& image);
void save_image(const std::filesystem::path& path, const Image& image,
                std::optional<Format> format = std::nullopt);

/// Gradient-field interchange: CSV (as save_csv) or raw little-endian float64
/// preceded by the one-line header "F64LE h w c".
struct GradientDump {
  std::size_t h = 0, w = 0, c = 1;
  std::vector<double> values;
};

void write_dump_binary(const std::filesystem::path& path, const GradientDump& dump);
/// Reads either form; binary is detected by the "F64LE" header.
GradientDump read_dump(const std::filesystem::path& path);

/// Tiles k images of h x w (single channel, [-1, 1]) into a near-square grid
/// mapped to [0, 1]; a one-pixel gap is left dark.
Image tile_grid(const std::vector<double>& images, std::size_t k, std::size_t h, std::size_t w);

}  // namespace ms3d::data
