#pragma once

// Brute-force reference implementations used only by tests. They follow the
// textbook definitions directly (block index = floor(i / block) * block + m)
// and share no code with the library.

#include <cmath>
#include <cstddef>
#include <vector>
#include <cstdint>
#include <utility>

namespace ms3d::oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid zeros(std::size_t n) { return Grid(n, std::vector<double>(n, 0.0)); }

inline Grid from_flat(const std::vector<double>& v, std::size_t n) {
  Grid g = zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g[i][j] = v[i * n + j];
  return g;
}

/// Every cell replaced by the mean of its aligned block x block tile.
inline Grid block_average(const Grid& g, std::size_t block) {
  const std::size_t n = g.size();
  Grid out = zeros(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < block; ++m)
        for (std::size_t k = 0; k < block; ++k)
          acc += g[(i / block) * block + m][(j / block) * block + k];
      out[i][j] = acc / static_cast<double>(block * block);
    }
  return out;
}

inline double mean_sq_diff(const Grid& a, const Grid& b) {
  double acc = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) acc += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
  return acc / static_cast<double>(n * n);
}

inline double overlap(const Grid& a, const Grid& b) {
  double acc = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) acc += a[i][j] * b[i][j];
  return acc / static_cast<double>(n * n);
}

/// Kadanoff chain on an already normalized grid; returns per-scale SDs.
inline std::vector<double> kadanoff_sd(const Grid& g0, std::size_t zeta) {
  std::vector<double> sds;
  Grid prev = g0;
  for (std::size_t block = zeta; block <= g0.size(); block *= zeta) {
    Grid next = block_average(prev, block);
    sds.push_back(mean_sq_diff(prev, next));
    prev = next;
  }
  return sds;
}

/// |v / max|v||, zero stays zero.
inline std::vector<double> normalized(std::vector<double> v) {
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  for (double& x : v) x = peak == 0.0 ? 0.0 : std::abs(x / peak);
  return v;
}

/// Side of the zero-padded square: smallest power of zeta >= ceil(sqrt(count)).
inline std::size_t padded_side(std::size_t count, std::size_t zeta) {
  std::size_t root = 0;
  while (root * root < count) ++root;
  std::size_t side = 1;
  while (side < root) side *= zeta;
  return side;
}

/// Number of connected foreground regions by breadth-first flood fill.
inline std::size_t flood_fill_count(const std::vector<std::uint8_t>& mask, std::size_t h,
                                    std::size_t w, int connectivity) {
  std::vector<bool> seen(mask.size(), false);
  std::size_t regions = 0;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    ++regions;
    std::vector<std::size_t> queue{start};
    seen[start] = true;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const long r = static_cast<long>(queue[head] / w), c = static_cast<long>(queue[head] % w);
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (connectivity == 4 && dr != 0 && dc != 0) continue;
          const long nr = r + dr, nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= static_cast<long>(h) || nc >= static_cast<long>(w)) continue;
          const std::size_t idx = static_cast<std::size_t>(nr) * w + static_cast<std::size_t>(nc);
          if (mask[idx] && !seen[idx]) {
            seen[idx] = true;
            queue.push_back(idx);
          }
        }
    }
  }
  return regions;
}

}  // namespace ms3d::oracle
