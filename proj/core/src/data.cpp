#include "ms3d/data.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ms3d::data {

namespace fs = std::filesystem;

std::string_view to_string(Family family) {
  switch (family) {
    case Family::gauss_blobs: return "gauss-blobs";
    case Family::rings: return "rings";
    case Family::bars: return "bars";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "gauss-blobs") return Family::gauss_blobs;
  if (name == "rings") return Family::rings;
  if (name == "bars") return Family::bars;
  throw std::invalid_argument("unknown dataset family '" + std::string(name) +
                              "' (expected gauss-blobs, rings or bars)");
}

std::vector<double> Dataset::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t sz = image_size();
  std::vector<double> out;
  out.reserve(indices.size() * sz);
  for (std::size_t i : indices)
    out.insert(out.end(), images.begin() + static_cast<std::ptrdiff_t>(i * sz),
               images.begin() + static_cast<std::ptrdiff_t>((i + 1) * sz));
  return out;
}

namespace {

// Intensity in [0, 1] at pixel (r, c) of one image.
using Canvas = std::vector<double>;

void render_blobs(Canvas& img, std::size_t s, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_real_distribution<double> pos(0.2 * s, 0.8 * s), width(0.06 * s, 0.16 * s);
  const int k = count(rng);
  for (int b = 0; b < k; ++b) {
    const double cy = pos(rng), cx = pos(rng), sg = width(rng);
    for (std::size_t r = 0; r < s; ++r)
      for (std::size_t c = 0; c < s; ++c) {
        const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
        img[r * s + c] += std::exp(-(dx * dx + dy * dy) / (2 * sg * sg));
      }
  }
}

void render_ring(Canvas& img, std::size_t s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.35 * s, 0.65 * s), rad(0.15 * s, 0.3 * s),
      thick(0.04 * s, 0.08 * s);
  const double cy = pos(rng), cx = pos(rng), rr = rad(rng), th = thick(rng);
  for (std::size_t r = 0; r < s; ++r)
    for (std::size_t c = 0; c < s; ++c) {
      const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
      const double d = std::sqrt(dx * dx + dy * dy) - rr;
      img[r * s + c] = std::exp(-d * d / (2 * th * th));
    }
}

void render_bar(Canvas& img, std::size_t s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi), pos(0.3 * s, 0.7 * s),
      half_len(0.25 * s, 0.4 * s), thick(0.05 * s, 0.1 * s);
  const double a = angle(rng), cy = pos(rng), cx = pos(rng), hl = half_len(rng), th = thick(rng);
  const double uy = std::sin(a), ux = std::cos(a);
  for (std::size_t r = 0; r < s; ++r)
    for (std::size_t c = 0; c < s; ++c) {
      const double dy = static_cast<double>(r) + 0.5 - cy, dx = static_cast<double>(c) + 0.5 - cx;
      const double along = dx * ux + dy * uy, across = -dx * uy + dy * ux;
      const double over = std::max(0.0, std::abs(along) - hl);
      img[r * s + c] = std::exp(-(across * across + over * over) / (2 * th * th));
    }
}

}  // namespace

Dataset make_synthetic(Family family, std::size_t n, std::size_t size, std::uint64_t seed,
                       std::optional<std::size_t> val_count) {
  if (n < 2) throw std::invalid_argument("make_synthetic: need n >= 2, got " + std::to_string(n));
  if (size != 16 && size != 32) {
    throw std::invalid_argument("make_synthetic: size must be 16 or 32, got " + std::to_string(size));
  }
  const std::size_t nval = val_count.value_or(std::max<std::size_t>(1, n / 10));
  if (nval == 0 || nval >= n) throw std::invalid_argument("make_synthetic: invalid split");

  Dataset ds;
  ds.n = n;
  ds.h = ds.w = size;
  ds.family = family;
  ds.seed = seed;
  ds.images.resize(n * size * size);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Canvas img(size * size, 0.0);
    switch (family) {
      case Family::gauss_blobs: render_blobs(img, size, rng); break;
      case Family::rings: render_ring(img, size, rng); break;
      case Family::bars: render_bar(img, size, rng); break;
    }
    const double peak = *std::max_element(img.begin(), img.end());
    for (std::size_t p = 0; p < img.size(); ++p)
      ds.images[i * size * size + p] = std::clamp(2.0 * img[p] / peak - 1.0, -1.0, 1.0);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  ds.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nval));
  ds.train.assign(order.begin() + static_cast<std::ptrdiff_t>(nval), order.end());
  std::sort(ds.val.begin(), ds.val.end());
  std::sort(ds.train.begin(), ds.train.end());
  return ds;
}

Dataset make_synthetic_budget(Family family, std::size_t train_count, std::size_t size,
                              std::uint64_t seed) {
  if (train_count < 1) throw std::invalid_argument("make_synthetic_budget: need at least one image");
  const std::size_t nval = std::max<std::size_t>(1, train_count / 9);
  return make_synthetic(family, train_count + nval, size, seed, nval);
}

// ---------------------------------------------------------------------------
// File formats

Format format_from_path(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".pgm") return Format::pgm;
  if (ext == ".png") return Format::png;
  if (ext == ".csv" || ext == ".txt") return Format::csv;
  throw std::invalid_argument("cannot infer image format from '" + path.string() +
                              "' (expected .pgm, .png or .csv)");
}

namespace {

[[noreturn]] void fail(std::string_view format, const fs::path& path, const std::string& what) {
  throw std::runtime_error(std::string(format) + ": " + path.string() + ": " + what);
}

std::string read_all(const fs::path& path, std::string_view format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(format, path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// PGM header token reader skipping whitespace and '#' comments.
struct PgmCursor {
  const std::string& s;
  std::size_t pos = 0;

  std::optional<std::string> token() {
    while (pos < s.size()) {
      if (s[pos] == '#') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '#') ++pos;
    if (start == pos) return std::nullopt;
    return s.substr(start, pos - start);
  }
};

std::size_t parse_size(std::optional<std::string> tok) {
  std::size_t v = 0;
  if (!tok) throw std::invalid_argument("truncated header");
  auto [ptr, ec] = std::from_chars(tok->data(), tok->data() + tok->size(), v);
  if (ec != std::errc() || ptr != tok->data() + tok->size()) throw std::invalid_argument("bad integer '" + *tok + "'");
  return v;
}

Image load_pgm(const fs::path& path) {
  const std::string raw = read_all(path, "pgm");
  PgmCursor cur{raw};
  Image img;
  try {
    const auto magic = cur.token();
    if (!magic || (*magic != "P2" && *magic != "P5")) fail("pgm", path, "missing P2/P5 magic");
    img.w = parse_size(cur.token());
    img.h = parse_size(cur.token());
    const std::size_t maxval = parse_size(cur.token());
    if (img.w == 0 || img.h == 0 || maxval == 0 || maxval > 65535) fail("pgm", path, "invalid header");
    const std::size_t count = img.w * img.h;
    img.values.resize(count);
    if (*magic == "P2") {
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t v = parse_size(cur.token());
        if (v > maxval) fail("pgm", path, "sample exceeds maxval");
        img.values[i] = static_cast<double>(v) / static_cast<double>(maxval);
      }
    } else {
      const std::size_t data = cur.pos + 1;  // single whitespace after maxval
      const std::size_t bytes = maxval > 255 ? 2 : 1;
      if (raw.size() < data + count * bytes) fail("pgm", path, "truncated pixel data");
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t v = static_cast<unsigned char>(raw[data + i * bytes]);
        if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(raw[data + i * 2 + 1]);
        if (v > maxval) fail("pgm", path, "sample exceeds maxval");
        img.values[i] = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  } catch (const std::invalid_argument& e) {
    fail("pgm", path, e.what());
  }
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

Image load_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) fail("png", path, "cannot open file");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail("png", path, "not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("png", path, "libpng initialization failed");
  }
  Image img;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("png", path, "corrupt PNG data");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  img.w = png_get_image_width(png, info);
  img.h = png_get_image_height(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * img.h);
  rows.resize(img.h);
  for (std::size_t r = 0; r < img.h; ++r) rows[r] = pixels.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  img.values.resize(img.w * img.h);
  for (std::size_t r = 0; r < img.h; ++r)
    for (std::size_t c = 0; c < img.w; ++c) img.values[r * img.w + c] = rows[r][c] / 255.0;
  return img;
}

std::vector<double> parse_csv_row(std::string_view line, const fs::path& path, std::size_t lineno) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string_view cell = line.substr(pos, end - pos);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      fail("csv", path, "line " + std::to_string(lineno) + ": not a number '" + std::string(cell) + "'");
    }
    row.push_back(v);
    pos = end + 1;
  }
  return row;
}

Image load_csv(const fs::path& path) {
  const std::string raw = read_all(path, "csv");
  Image img;
  std::istringstream in(raw);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto row = parse_csv_row(line, path, lineno);
    if (img.h == 0) img.w = row.size();
    if (row.size() != img.w) fail("csv", path, "line " + std::to_string(lineno) + ": ragged row");
    img.values.insert(img.values.end(), row.begin(), row.end());
    ++img.h;
  }
  if (img.h == 0) fail("csv", path, "no data");
  return img;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_all(const fs::path& path, std::string_view bytes, std::string_view format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(format, path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(format, path, "write failed");
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void require_gray(const Image& image, std::string_view format, const fs::path& path) {
  if (image.c != 1) fail(format, path, "only single-channel images can be written");
  if (image.values.size() != image.h * image.w) fail(format, path, "size mismatch");
}

}  // namespace

Image load_image(const fs::path& path, std::optional<Format> format) {
  switch (format.value_or(format_from_path(path))) {
    case Format::pgm: return load_pgm(path);
    case Format::png: return load_png(path);
    case Format::csv: return load_csv(path);
  }
  throw std::invalid_argument("load_image: unknown format");
}

void save_pgm(const fs::path& path, const Image& image) {
  require_gray(image, "pgm", path);
  std::string out = "P5\n" + std::to_string(image.w) + " " + std::to_string(image.h) + "\n255\n";
  for (double v : image.values) out.push_back(static_cast<char>(to_byte(v)));
  write_all(path, out, "pgm");
}

void save_png(const fs::path& path, const Image& image) {
  require_gray(image, "png", path);
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) fail("png", path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail("png", path, "libpng initialization failed");
  }
  std::vector<png_byte> pixels(image.values.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_byte(image.values[i]);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("png", path, "encoding failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.w), static_cast<png_uint_32>(image.h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < image.h; ++r) png_write_row(png, pixels.data() + r * image.w);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_csv(const fs::path& path, const Image& image) {
  const std::size_t cols = image.w * image.c;
  if (image.values.size() != image.h * cols) fail("csv", path, "size mismatch");
  std::string out;
  for (std::size_t r = 0; r < image.h; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out.push_back(',');
      out += format_double(image.values[r * cols + c]);
    }
    out.push_back('\n');
  }
  write_all(path, out, "csv");
}

void save_image(const fs::path& path, const Image& image, std::optional<Format> format) {
  switch (format.value_or(format_from_path(path))) {
    case Format::pgm: save_pgm(path, image); return;
    case Format::png: save_png(path, image); return;
    case Format::csv: save_csv(path, image); return;
  }
}

void write_dump_binary(const fs::path& path, const GradientDump& dump) {
  if (dump.values.size() != dump.h * dump.w * dump.c) fail("dump", path, "size mismatch");
  std::string out = "F64LE " + std::to_string(dump.h) + " " + std::to_string(dump.w) + " " +
                    std::to_string(dump.c) + "\n";
  for (double v : dump.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
  write_all(path, out, "dump");
}

GradientDump read_dump(const fs::path& path) {
  const std::string raw = read_all(path, "dump");
  GradientDump d;
  if (raw.rfind("F64LE", 0) == 0) {
    const std::size_t eol = raw.find('\n');
    if (eol == std::string::npos) fail("dump", path, "missing header line");
    std::istringstream header(raw.substr(5, eol - 5));
    header.imbue(std::locale::classic());
    if (!(header >> d.h >> d.w >> d.c) || d.h * d.w * d.c == 0) fail("dump", path, "bad shape header");
    const std::size_t count = d.h * d.w * d.c;
    if (raw.size() != eol + 1 + count * 8) fail("dump", path, "payload size does not match header");
    d.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[eol + 1 + i * 8 + b])) << (8 * b);
      d.values[i] = std::bit_cast<double>(bits);
    }
    return d;
  }
  Image img = load_csv(path);
  d.h = img.h;
  d.w = img.w;
  d.c = 1;
  d.values = std::move(img.values);
  return d;
}

Image tile_grid(const std::vector<double>& images, std::size_t k, std::size_t h, std::size_t w) {
  Image grid;
  if (k == 0) return grid;
  if (images.size() != k * h * w) throw std::invalid_argument("tile_grid: size mismatch");
  std::size_t cols = 1;
  while (cols * cols < k) ++cols;
  const std::size_t rows = (k + cols - 1) / cols;
  grid.h = rows * (h + 1) - 1;
  grid.w = cols * (w + 1) - 1;
  grid.values.assign(grid.h * grid.w, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r0 = (i / cols) * (h + 1), c0 = (i % cols) * (w + 1);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        grid.values[(r0 + r) * grid.w + c0 + c] = std::clamp((images[i * h * w + r * w + c] + 1.0) / 2.0, 0.0, 1.0);
  }
  return grid;
}

}  // namespace ms3d::data
