#pragma once

// Rank transforms, the empirical copula and Kendall pseudo-observations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "matrix.hpp"

namespace maxdep {

/// n x D matrix of observations (e.g. annual maxima at D sites).
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(RowMatrix values, std::vector<std::string> labels = {})
      : values_(std::move(values)), labels_(std::move(labels)) {
    if (values_.rows() < 1 || values_.cols() < 1) throw std::invalid_argument("Dataset: empty");
    for (double x : values_.data()) {
      if (!std::isfinite(x)) throw std::invalid_argument("Dataset: non-finite value");
    }
    if (labels_.empty()) {
      for (std::size_t d = 0; d < values_.cols(); ++d) labels_.push_back("X" + std::to_string(d + 1));
    }
    if (labels_.size() != values_.cols()) throw std::invalid_argument("Dataset: label count mismatch");
  }

  static Dataset from_rows(const std::vector<std::vector<double>>& rows) {
    return Dataset(RowMatrix::from_rows(rows));
  }

  std::size_t size() const { return values_.rows(); }
  std::size_t dimension() const { return values_.cols(); }
  const RowMatrix& values() const { return values_; }
  const std::vector<std::string>& labels() const { return labels_; }
  double operator()(std::size_t i, std::size_t d) const { return values_(i, d); }

 private:
  RowMatrix values_;
  std::vector<std::string> labels_;
};

/// Rank scaling: rank / n (the empirical copula's convention) or
/// rank / (n + 1) (strictly inside (0,1), needed wherever logs are taken).
enum class RankScaling { over_n, over_n_plus_1 };

inline const char* to_string(RankScaling s) {
  return s == RankScaling::over_n ? "over_n" : "over_n_plus_1";
}

/// Normalised (mid)ranks of a dataset.
class PseudoObservations {
 public:
  PseudoObservations(RowMatrix uhat, RankScaling scaling, std::size_t tied_observations = 0)
      : uhat_(std::move(uhat)), scaling_(scaling), ties_(tied_observations) {
    for (double x : uhat_.data()) {
      const bool ok = scaling_ == RankScaling::over_n ? (x > 0.0 && x <= 1.0) : (x > 0.0 && x < 1.0);
      if (!ok) throw std::invalid_argument("PseudoObservations: value outside the range of its scaling");
    }
  }

  std::size_t size() const { return uhat_.rows(); }
  std::size_t dimension() const { return uhat_.cols(); }
  RankScaling scaling() const { return scaling_; }
  /// Observations sharing their value with at least one other in the same column.
  std::size_t tied_observations() const { return ties_; }
  const RowMatrix& values() const { return uhat_; }
  std::span<const double> row(std::size_t i) const { return uhat_.row(i); }
  double operator()(std::size_t i, std::size_t d) const { return uhat_(i, d); }

 private:
  RowMatrix uhat_;
  RankScaling scaling_;
  std::size_t ties_;
};

/// Midranks of one column (1-based), plus the number of tied entries.
inline std::vector<double> midranks(std::span<const double> column, std::size_t* tied = nullptr) {
  const std::size_t n = column.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });
  std::vector<double> ranks(n);
  std::size_t ties = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && column[order[end]] == column[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t j = start; j < end; ++j) ranks[order[j]] = rank;
    if (end - start > 1) ties += end - start;
    start = end;
  }
  if (tied) *tied += ties;
  return ranks;
}

/// Entry (i, d) is the midrank of Y_id in column d divided by n or n + 1.
inline PseudoObservations pseudo_observations(const Dataset& data, RankScaling scaling) {
  const std::size_t n = data.size();
  const std::size_t D = data.dimension();
  if (n < 2) throw std::invalid_argument("pseudo_observations: need at least 2 observations");
  const double denom = scaling == RankScaling::over_n ? static_cast<double>(n) : static_cast<double>(n + 1);
  RowMatrix uhat(n, D);
  std::size_t ties = 0;
  for (std::size_t d = 0; d < D; ++d) {
    const std::vector<double> column = data.values().column(d);
    const std::vector<double> ranks = midranks(column, &ties);
    for (std::size_t i = 0; i < n; ++i) uhat(i, d) = ranks[i] / denom;
  }
  return PseudoObservations(std::move(uhat), scaling, ties);
}

/// C_n(u) = (1/n) #{i : Uhat_i <= u componentwise}, for rank/n scaling.
inline double empirical_copula(const PseudoObservations& pobs, std::span<const double> u) {
  if (pobs.scaling() != RankScaling::over_n) {
    throw std::invalid_argument("empirical_copula: pseudo-observations must use rank/n scaling");
  }
  detail::require_same_dimension(u.size(), pobs.dimension(), "empirical_copula");
  const std::size_t n = pobs.size();
  const std::size_t D = pobs.dimension();
  const double* base = pobs.values().data().data();
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = base + i * D;
    bool below = true;
    for (std::size_t d = 0; d < D && below; ++d) below = row[d] <= u[d];
    count += below ? 1 : 0;
  }
  return static_cast<double>(count) / static_cast<double>(n);
}

inline double empirical_copula(const PseudoObservations& pobs, const HypercubePoint& u) {
  return empirical_copula(pobs, u.values());
}

/// W_ni = (1/n) #{t : Y_t1 <= Y_i1, Y_t2 <= Y_i2}; bivariate only.
inline std::vector<double> kendall_pseudo(const Dataset& data) {
  if (data.dimension() != 2) throw std::invalid_argument("kendall_pseudo: requires D = 2");
  const std::size_t n = data.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double yi1 = data(i, 0);
    const double yi2 = data(i, 1);
    std::size_t count = 0;
    for (std::size_t t = 0; t < n; ++t) count += (data(t, 0) <= yi1 && data(t, 1) <= yi2) ? 1 : 0;
    w[i] = static_cast<double>(count) / static_cast<double>(n);
  }
  return w;
}

}  // namespace maxdep
