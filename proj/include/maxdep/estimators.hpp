#pragma once

// Rank-based estimators of the Pickands dependence function.
//
// Both estimators start from C(u^{v_1}, ..., u^{v_D}) = u^{A(v)}. Plugging
// in the empirical copula of pseudo-observations Uhat and writing
//
//   xi_i(v) = min_{d : v_d > 0} (-log Uhat_id) / v_d,
//
// one has C_n(u^v) = (1/n) #{i : -log u <= xi_i(v)}, so that
//
//   * with f(x) = x, g(u) = 1/u:  int_0^1 C_n(u^v) / u du = mean_i xi_i(v),
//     while int_0^1 u^{A - 1} du = 1/A  -> Pickands estimator;
//   * with f(x) = log x after the change of variables u = exp(-t), the
//     population identity E[log xi(v)] = -gamma - log A(v) for the
//     exponential variable xi(v) with rate A(v)  -> CFG estimator.
//
// Endpoint corrections are vertex-anchored and linear in v so that the
// corrected estimates equal 1 at every vertex e_d.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "empirical.hpp"
#include "matrix.hpp"
#include "simplex_grid.hpp"

namespace maxdep {

enum class EstimatorMethod { pickands, cfg, weighted };

inline const char* to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::pickands: return "pickands";
    case EstimatorMethod::cfg: return "cfg";
    case EstimatorMethod::weighted: return "weighted";
  }
  return "unknown";
}

inline EstimatorMethod parse_estimator_method(const std::string& name) {
  if (name == "pickands") return EstimatorMethod::pickands;
  if (name == "cfg") return EstimatorMethod::cfg;
  if (name == "weighted") return EstimatorMethod::weighted;
  throw std::invalid_argument("unknown estimator method '" + name + "'");
}

/// Pilot estimate of A on a regular simplex grid.
struct DependenceEstimate {
  SimplexGrid grid;
  std::vector<double> values;
  EstimatorMethod method = EstimatorMethod::cfg;
  bool corrected = true;
  std::size_t n = 0;
  /// Weight of the Pickands estimator in the weighted combination.
  double pickands_weight = 0.5;

  PickandsFunction as_function() const { return PickandsFunction::grid_estimate(grid, values); }
};

/// -log Uhat for rank/(n+1) pseudo-observations with cached vertex means;
/// the workhorse behind every estimator evaluation.
class NegLogRanks {
 public:
  explicit NegLogRanks(const PseudoObservations& pobs)
      : n_(pobs.size()), D_(pobs.dimension()), logs_(pobs.size(), pobs.dimension()) {
    if (pobs.scaling() != RankScaling::over_n_plus_1) {
      throw std::invalid_argument("estimators require rank/(n+1) pseudo-observations");
    }
    vertex_mean_.assign(D_, 0.0);
    vertex_mean_log_.assign(D_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t d = 0; d < D_; ++d) {
        const double u = pobs(i, d);
        if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("estimators: pseudo-observation outside (0,1)");
        const double l = -std::log(u);
        logs_(i, d) = l;
        vertex_mean_[d] += l;
        vertex_mean_log_[d] += std::log(l);
      }
    }
    for (std::size_t d = 0; d < D_; ++d) {
      vertex_mean_[d] /= static_cast<double>(n_);
      vertex_mean_log_[d] /= static_cast<double>(n_);
    }
  }

  std::size_t size() const { return n_; }
  std::size_t dimension() const { return D_; }

  double xi(std::size_t i, std::span<const double> v) const {
    const double* row = logs_.data().data() + i * D_;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < D_; ++d) {
      if (v[d] > 0.0) best = std::min(best, row[d] / v[d]);
    }
    return best;
  }

  std::vector<double> xi_values(std::span<const double> v) const {
    check(v);
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = xi(i, v);
    return out;
  }

  double mean_xi(std::span<const double> v) const {
    check(v);
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) total += xi(i, v);
    return total / static_cast<double>(n_);
  }

  double mean_log_xi(std::span<const double> v) const {
    check(v);
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) total += std::log(xi(i, v));
    return total / static_cast<double>(n_);
  }

  double pickands(std::span<const double> v, bool corrected) const {
    double inverse = mean_xi(v);
    if (corrected) {
      for (std::size_t d = 0; d < D_; ++d) inverse -= v[d] * (vertex_mean_[d] - 1.0);
    }
    if (!(inverse > 0.0)) throw NumericalError("pickands_estimator: non-positive reciprocal estimate");
    return 1.0 / inverse;
  }

  double cfg(std::span<const double> v, bool corrected) const {
    double log_a = -euler_gamma - mean_log_xi(v);
    if (corrected) {
      for (std::size_t d = 0; d < D_; ++d) log_a -= v[d] * (-euler_gamma - vertex_mean_log_[d]);
    }
    return std::exp(log_a);
  }

  double weighted(std::span<const double> v, double pickands_weight, bool corrected) const {
    if (!(pickands_weight >= 0.0 && pickands_weight <= 1.0)) {
      throw std::invalid_argument("weighted_estimator: weight must lie in [0,1]");
    }
    return pickands_weight * pickands(v, corrected) + (1.0 - pickands_weight) * cfg(v, corrected);
  }

  double evaluate(EstimatorMethod method, std::span<const double> v, bool corrected, double weight = 0.5) const {
    switch (method) {
      case EstimatorMethod::pickands: return pickands(v, corrected);
      case EstimatorMethod::cfg: return cfg(v, corrected);
      case EstimatorMethod::weighted: return weighted(v, weight, corrected);
    }
    throw std::invalid_argument("unknown estimator method");
  }

 private:
  void check(std::span<const double> v) const {
    detail::require_same_dimension(v.size(), D_, "estimator");
    double sum = 0.0;
    for (double x : v) {
      if (!(x >= 0.0)) throw std::invalid_argument("estimator: v is not on the simplex");
      sum += x;
    }
    if (std::abs(sum - 1.0) > simplex_tolerance) throw std::invalid_argument("estimator: v is not on the simplex");
  }

  std::size_t n_;
  std::size_t D_;
  RowMatrix logs_;
  std::vector<double> vertex_mean_;
  std::vector<double> vertex_mean_log_;
};

/// xi_i(v) = min_{d : v_d > 0} (-log Uhat_id) / v_d.
inline std::vector<double> xi_values(const PseudoObservations& pobs, const SimplexPoint& v) {
  return NegLogRanks(pobs).xi_values(v.values());
}

/// 1 / A_P(v) = mean_i xi_i(v); corrected:
/// 1 / A_c(v) = 1 / A_P(v) - sum_d v_d (1 / A_P(e_d) - 1).
inline double pickands_estimator(const PseudoObservations& pobs, const SimplexPoint& v, bool corrected) {
  return NegLogRanks(pobs).pickands(v.values(), corrected);
}

/// log A_CFG(v) = -gamma - mean_i log xi_i(v); corrected:
/// log A_c(v) = log A_CFG(v) - sum_d v_d log A_CFG(e_d).
inline double cfg_estimator(const PseudoObservations& pobs, const SimplexPoint& v, bool corrected) {
  return NegLogRanks(pobs).cfg(v.values(), corrected);
}

/// Convex combination weight * A_P + (1 - weight) * A_CFG.
inline double weighted_estimator(const PseudoObservations& pobs, const SimplexPoint& v, double pickands_weight,
                                 bool corrected) {
  return NegLogRanks(pobs).weighted(v.values(), pickands_weight, corrected);
}

/// Evaluates the chosen estimator at every point of the resolution-k grid.
inline DependenceEstimate estimate_surface(const NegLogRanks& ranks, std::size_t resolution, EstimatorMethod method,
                                           bool corrected, double pickands_weight = 0.5) {
  SimplexGrid grid(ranks.dimension(), resolution);
  std::vector<double> values(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    values[j] = ranks.evaluate(method, grid.point(j), corrected, pickands_weight);
  }
  return DependenceEstimate{std::move(grid), std::move(values), method, corrected, ranks.size(), pickands_weight};
}

inline DependenceEstimate estimate_surface(const PseudoObservations& pobs, std::size_t resolution,
                                           EstimatorMethod method, bool corrected, double pickands_weight = 0.5) {
  return estimate_surface(NegLogRanks(pobs), resolution, method, corrected, pickands_weight);
}

}  // namespace maxdep
