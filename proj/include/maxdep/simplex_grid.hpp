#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "matrix.hpp"

namespace maxdep {

/// Number of compositions of `total` into `parts` nonnegative integers.
inline std::uint64_t composition_count(std::uint64_t total, std::uint64_t parts) {
  if (parts == 0) return total == 0 ? 1 : 0;
  // C(total + parts - 1, parts - 1), computed incrementally and exactly.
  std::uint64_t result = 1;
  const std::uint64_t n = total + parts - 1;
  const std::uint64_t r = std::min(parts - 1, total);
  for (std::uint64_t i = 1; i <= r; ++i) {
    result = result * (n - r + i) / i;
  }
  return result;
}

/// Regular grid {j / k : j_d >= 0, sum_d j_d = k} on the unit simplex,
/// enumerated in ascending lexicographic order of (j_1, ..., j_D).
class SimplexGrid {
 public:
  static constexpr std::uint64_t max_points = 5'000'000;

  SimplexGrid(std::size_t dimension, std::size_t resolution)
      : dimension_(dimension), resolution_(resolution) {
    if (dimension < 2) throw std::invalid_argument("simplex_grid: dimension must be >= 2");
    if (resolution < 1) throw std::invalid_argument("simplex_grid: resolution must be >= 1");
    const std::uint64_t count = composition_count(resolution, dimension);
    if (count > max_points) {
      throw std::invalid_argument("simplex_grid: " + std::to_string(count) +
                                  " points exceeds the supported maximum");
    }
    points_ = RowMatrix(count, dimension);
    std::vector<std::size_t> counts(dimension, 0);
    std::size_t next = 0;
    enumerate(0, resolution, counts, next);
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t resolution() const { return resolution_; }
  std::size_t size() const { return points_.rows(); }
  std::span<const double> point(std::size_t i) const { return points_.row(i); }
  const RowMatrix& points() const { return points_; }

  /// Position of the point with integer coordinates `counts` (sum = k).
  std::size_t index_of(std::span<const std::size_t> counts) const {
    if (counts.size() != dimension_) throw std::invalid_argument("SimplexGrid::index_of: dimension mismatch");
    std::uint64_t rank = 0;
    std::size_t remaining = resolution_;
    for (std::size_t d = 0; d + 1 < dimension_; ++d) {
      for (std::size_t t = 0; t < counts[d]; ++t) {
        rank += composition_count(remaining - t, dimension_ - d - 1);
      }
      if (counts[d] > remaining) throw std::invalid_argument("SimplexGrid::index_of: counts exceed resolution");
      remaining -= counts[d];
    }
    if (counts[dimension_ - 1] != remaining) {
      throw std::invalid_argument("SimplexGrid::index_of: counts do not sum to resolution");
    }
    return static_cast<std::size_t>(rank);
  }

  /// Nearest grid point to v (largest-remainder rounding of k * v).
  std::size_t nearest_index(std::span<const double> v) const {
    if (v.size() != dimension_) throw std::invalid_argument("SimplexGrid::nearest_index: dimension mismatch");
    const double k = static_cast<double>(resolution_);
    std::vector<std::size_t> counts(dimension_);
    std::vector<double> remainder(dimension_);
    std::size_t assigned = 0;
    for (std::size_t d = 0; d < dimension_; ++d) {
      const double scaled = std::max(0.0, v[d]) * k;
      counts[d] = static_cast<std::size_t>(std::floor(scaled));
      remainder[d] = scaled - static_cast<double>(counts[d]);
      assigned += counts[d];
    }
    std::vector<std::size_t> order(dimension_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < resolution_; i = (i + 1) % dimension_) {
      ++counts[order[i]];
      ++assigned;
    }
    while (assigned > resolution_) {
      auto it = std::max_element(counts.begin(), counts.end());
      --*it;
      --assigned;
    }
    return index_of(counts);
  }

  /// Indices of the D vertices e_1, ..., e_D.
  std::vector<std::size_t> vertex_indices() const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> counts(dimension_, 0);
    for (std::size_t d = 0; d < dimension_; ++d) {
      std::fill(counts.begin(), counts.end(), 0);
      counts[d] = resolution_;
      out.push_back(index_of(counts));
    }
    return out;
  }

 private:
  void enumerate(std::size_t d, std::size_t remaining, std::vector<std::size_t>& counts, std::size_t& next) {
    if (d + 1 == dimension_) {
      counts[d] = remaining;
      const double k = static_cast<double>(resolution_);
      for (std::size_t e = 0; e < dimension_; ++e) {
        points_(next, e) = static_cast<double>(counts[e]) / k;
      }
      ++next;
      return;
    }
    for (std::size_t j = 0; j <= remaining; ++j) {
      counts[d] = j;
      enumerate(d + 1, remaining - j, counts, next);
    }
  }

  std::size_t dimension_;
  std::size_t resolution_;
  RowMatrix points_;
};

/// simplex_grid(D, k): exact enumeration of the regular grid.
inline SimplexGrid simplex_grid(std::size_t dimension, std::size_t resolution) {
  return SimplexGrid(dimension, resolution);
}

}  // namespace maxdep
