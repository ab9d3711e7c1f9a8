#pragma once

// Hypothesis tests of max-stability and parametric goodness of fit.
//
// All statistics are functions of ranks only. Resampling replicates run on
// streams keyed by (seed, replicate index) and are written to preallocated
// slots, so reports do not depend on the number of worker threads.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "empirical.hpp"
#include "estimators.hpp"
#include "parallel.hpp"
#include "projection.hpp"
#include "random.hpp"
#include "simulation.hpp"

namespace maxdep {

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  /// Method metadata: per-m statistics, grid resolutions, fitted parameters.
  std::vector<std::pair<std::string, double>> details;
  std::vector<std::string> warnings;
  std::vector<double> replicate_statistics;

  double detail(const std::string& key) const {
    for (const auto& [k, v] : details) {
      if (k == key) return v;
    }
    throw std::out_of_range("TestReport: no detail '" + key + "'");
  }
};

/// (1 + #{replicate >= observed}) / (B + 1).
inline double resampling_p_value(double observed, const std::vector<double>& replicates) {
  std::size_t exceed = 0;
  for (double r : replicates) exceed += r >= observed ? 1 : 0;
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(replicates.size()) + 1.0);
}

namespace detail {

inline void add_tie_warning(TestReport& report, std::size_t ties, std::size_t n) {
  if (ties > 0) {
    report.warnings.push_back(std::to_string(ties) + " tied observations; midranks used");
  }
  if (ties * 10 > n) report.warnings.push_back("excessive ties (more than 10% of observations)");
}

}  // namespace detail

/// The plug-in moment combination -1 + 8 mean(W) - 9 mean(W^2), which has
/// expectation zero under bivariate max-stability.
inline double kendall_moment_combination(std::span<const double> w) {
  double m1 = 0.0;
  double m2 = 0.0;
  for (double x : w) {
    m1 += x;
    m2 += x * x;
  }
  const double n = static_cast<double>(w.size());
  return -1.0 + 8.0 * m1 / n - 9.0 * m2 / n;
}

/// For a bivariate extreme-value copula the Kendall distribution is
/// K(w) = w - (1 - tau) w log w, so E[W] = (1 + tau) / 4 and
/// E[W^2] = (1 + 2 tau) / 9, giving -1 + 8 E[W] - 9 E[W^2] = 0.
/// The statistic is the plug-in combination divided by its jackknife
/// standard error (leave-one-out recomputation); p-value two-sided normal.
inline TestReport kendall_moment_test(const Dataset& data) {
  if (data.dimension() != 2) throw std::invalid_argument("kendall_moment_test: requires D = 2");
  const std::size_t n = data.size();
  if (n < 3) throw std::invalid_argument("kendall_moment_test: need at least 3 observations");
  TestReport report;
  report.name = "kendall_moment";

  std::vector<double> counts(n, 0.0);
  const std::vector<double> w = kendall_pseudo(data);
  for (std::size_t i = 0; i < n; ++i) counts[i] = w[i] * static_cast<double>(n);
  const double combination = kendall_moment_combination(w);

  std::vector<double> loo(n);
  const double m = static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      const bool dominated = data(j, 0) <= data(i, 0) && data(j, 1) <= data(i, 1);
      const double wi = (counts[i] - (dominated ? 1.0 : 0.0)) / m;
      m1 += wi;
      m2 += wi * wi;
    }
    loo[j] = -1.0 + 8.0 * m1 / m - 9.0 * m2 / m;
  }
  const double mean_loo = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : loo) ss += (x - mean_loo) * (x - mean_loo);
  const double jackknife_se = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
  if (!(jackknife_se > 0.0)) {
    throw NumericalError("kendall_moment_test: zero jackknife variance (degenerate data, combination " +
                         std::to_string(combination) + ")");
  }
  report.statistic = combination / jackknife_se;
  report.p_value = std::min(1.0, std::erfc(std::abs(report.statistic) * 0.70710678118654752440));
  report.details = {{"moment_combination", combination},
                    {"jackknife_se", jackknife_se},
                    {"sigma_hat", jackknife_se * std::sqrt(static_cast<double>(n))},
                    {"n", static_cast<double>(n)}};
  if (n < 20) report.warnings.push_back("fewer than 20 observations; normal approximation is rough");
  std::size_t ties = 0;
  for (std::size_t d = 0; d < 2; ++d) midranks(data.values().column(d), &ties);
  detail::add_tie_warning(report, ties, n);
  return report;
}

namespace detail {

/// Column a(u) of the linearised empirical copula process:
/// a_t = 1{U_t <= u} - sum_d dC_n(u)/du_d 1{U_td <= u_d}, with derivatives
/// from finite differences of bandwidth h, one-sided at the cube boundary.
inline void process_column(const PseudoObservations& pobs, std::span<const double> u, double h, double* column) {
  const std::size_t n = pobs.size();
  const std::size_t D = pobs.dimension();
  for (std::size_t t = 0; t < n; ++t) {
    bool below = true;
    for (std::size_t d = 0; d < D && below; ++d) below = pobs(t, d) <= u[d];
    column[t] = below ? 1.0 : 0.0;
  }
  std::vector<double> shifted(D);
  for (std::size_t d = 0; d < D; ++d) {
    std::copy(u.begin(), u.end(), shifted.begin());
    const double hi = std::min(1.0, u[d] + h);
    const double lo = std::max(0.0, u[d] - h);
    shifted[d] = hi;
    const double upper = empirical_copula(pobs, shifted);
    shifted[d] = lo;
    const double lower = empirical_copula(pobs, shifted);
    const double derivative = (upper - lower) / (hi - lo);
    if (derivative == 0.0) continue;
    for (std::size_t t = 0; t < n; ++t) column[t] -= pobs(t, d) <= u[d] ? derivative : 0.0;
  }
}

/// B x n matrix of centred standard normal multipliers scaled by 1/sqrt(n);
/// row b comes from the stream (seed, multiplier, b).
inline Eigen::MatrixXd multiplier_matrix(std::size_t n, std::size_t B, std::uint64_t seed) {
  Eigen::MatrixXd xi(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(n));
  for (std::size_t b = 0; b < B; ++b) {
    Rng rng = Rng::stream(seed, StreamPurpose::multiplier, b);
    for (std::size_t t = 0; t < n; ++t) xi(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t)) = rng.normal();
    const double mean = xi.row(static_cast<Eigen::Index>(b)).mean();
    xi.row(static_cast<Eigen::Index>(b)).array() -= mean;
  }
  return xi / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

/// B multiplier replicates of sqrt(n) (C_n(u) - C(u)) at each row of
/// `points`, as a B x points matrix. Pseudo-observations must use rank/n.
inline Eigen::MatrixXd multiplier_replicates(const PseudoObservations& pobs, const RowMatrix& points, std::size_t B,
                                             std::uint64_t seed) {
  detail::require_same_dimension(points.cols(), pobs.dimension(), "multiplier_replicates");
  const std::size_t n = pobs.size();
  const double h = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd columns(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(points.rows()));
  for (std::size_t p = 0; p < points.rows(); ++p) {
    detail::process_column(pobs, points.row(p), h, columns.col(static_cast<Eigen::Index>(p)).data());
  }
  return detail::multiplier_matrix(n, B, seed) * columns;
}

struct CvmOptions {
  std::vector<int> m_set = {2, 3, 4, 5};
  std::size_t replicates = 500;
  std::uint64_t seed = 1;
};

/// Compares C_n(u) with C_n(u^{1/m})^m at the pseudo-observations:
/// S_m = sum_i (C_n(U_i) - C_n(U_i^{1/m})^m)^2, combined by summation over m.
/// Null distribution by multiplier resampling of the empirical copula
/// process, with partial derivatives of C_n from finite differences of
/// bandwidth 1/sqrt(n) (one-sided at the cube boundary) and the linearisation
/// D(u) = C(u) - m C_n(u^{1/m})^{m-1} C(u^{1/m}).
inline TestReport cvm_maxstability_test(const Dataset& data, const CvmOptions& options = {}) {
  if (options.replicates < 1) throw std::invalid_argument("cvm_maxstability_test: B must be >= 1");
  if (options.m_set.empty()) throw std::invalid_argument("cvm_maxstability_test: empty m-set");
  for (int m : options.m_set) {
    if (m < 2) throw std::invalid_argument("cvm_maxstability_test: m must be an integer >= 2");
  }
  const PseudoObservations pobs = pseudo_observations(data, RankScaling::over_n);
  const std::size_t n = pobs.size();
  const std::size_t D = pobs.dimension();
  const std::size_t M = options.m_set.size();
  const std::size_t B = options.replicates;
  const double h = 1.0 / std::sqrt(static_cast<double>(n));

  TestReport report;
  report.name = "cvm_maxstability";
  report.replicates = B;
  report.seed = options.seed;

  const Eigen::MatrixXd xi = detail::multiplier_matrix(n, B, options.seed);
  auto fill_column = [&](std::span<const double> u, double* column) { detail::process_column(pobs, u, h, column); };

  std::vector<double> per_m(M, 0.0);
  Eigen::MatrixXd replicate_per_m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(M));
  constexpr std::size_t chunk = 64;
  std::vector<double> root(D);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t rows = std::min(chunk, n - start);
    // Columns: base points, then the u^{1/m} points for each m.
    Eigen::MatrixXd columns(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows * (M + 1)));
    std::vector<double> base_value(rows);
    std::vector<double> root_value(rows * M);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto u = pobs.row(start + r);
      base_value[r] = empirical_copula(pobs, u);
      fill_column(u, columns.col(static_cast<Eigen::Index>(r)).data());
      for (std::size_t k = 0; k < M; ++k) {
        const double inv_m = 1.0 / static_cast<double>(options.m_set[k]);
        for (std::size_t d = 0; d < D; ++d) root[d] = std::pow(u[d], inv_m);
        root_value[r * M + k] = empirical_copula(pobs, root);
        fill_column(root, columns.col(static_cast<Eigen::Index>(rows * (k + 1) + r)).data());
      }
    }
    const Eigen::MatrixXd process = xi * columns;  // B x columns
    for (std::size_t k = 0; k < M; ++k) {
      const int m = options.m_set[k];
      for (std::size_t r = 0; r < rows; ++r) {
        const double cm = root_value[r * M + k];
        const double diff = base_value[r] - std::pow(cm, m);
        per_m[k] += diff * diff;
        const double slope = static_cast<double>(m) * std::pow(cm, m - 1);
        const auto base_col = static_cast<Eigen::Index>(r);
        const auto root_col = static_cast<Eigen::Index>(rows * (k + 1) + r);
        replicate_per_m.col(static_cast<Eigen::Index>(k)) +=
            (process.col(base_col) - slope * process.col(root_col)).array().square().matrix() /
            static_cast<double>(n);
      }
    }
  }

  report.statistic = std::accumulate(per_m.begin(), per_m.end(), 0.0);
  report.replicate_statistics.resize(B);
  for (std::size_t b = 0; b < B; ++b) report.replicate_statistics[b] = replicate_per_m.row(static_cast<Eigen::Index>(b)).sum();
  report.p_value = resampling_p_value(report.statistic, report.replicate_statistics);
  for (std::size_t k = 0; k < M; ++k) report.details.emplace_back("S_m" + std::to_string(options.m_set[k]), per_m[k]);
  report.details.emplace_back("bandwidth", h);
  if (n < 50) report.warnings.push_back("fewer than 50 observations; resampling approximation is rough");
  detail::add_tie_warning(report, pobs.tied_observations(), n);
  return report;
}

/// Atom/evaluation grid resolution used by the estimator comparison test.
inline std::size_t comparison_resolution(std::size_t dimension) {
  if (dimension == 2) return 50;
  if (dimension == 3) return 20;
  return 8;
}

struct ComparisonFit {
  double statistic = 0.0;
  ProjectionResult projection;
};

/// Statistic sum_i (C_n(U_i) - C_{A*}(U_i))^2 with A* the corrected estimator
/// projected onto valid dependence functions.
inline ComparisonFit comparison_statistic(const Dataset& data, EstimatorMethod method, std::size_t resolution) {
  const PseudoObservations ranks = pseudo_observations(data, RankScaling::over_n_plus_1);
  const DependenceEstimate pilot = estimate_surface(ranks, resolution, method, true);
  ProjectionResult projection = project_pickands(pilot, SimplexGrid(data.dimension(), resolution));
  const PickandsFunction fitted = projection.as_function();
  const PseudoObservations pobs = pseudo_observations(data, RankScaling::over_n);
  double total = 0.0;
  for (std::size_t i = 0; i < pobs.size(); ++i) {
    const auto u = pobs.row(i);
    const double diff = empirical_copula(pobs, u) - ev_copula_cdf(fitted, u);
    total += diff * diff;
  }
  return {total, std::move(projection)};
}

struct ComparisonOptions {
  EstimatorMethod method = EstimatorMethod::cfg;
  std::size_t replicates = 500;
  std::uint64_t seed = 1;
  /// 0 selects comparison_resolution(D).
  std::size_t resolution = 0;
};

/// Compares the empirical copula with the extreme-value copula of the
/// projected estimator. The projected spectral measure is itself an exact
/// simulable null model: replicates are drawn from it with
/// sample_spectral_ev and the whole pipeline is recomputed.
inline TestReport estimator_comparison_test(const Dataset& data, const ComparisonOptions& options = {}) {
  if (options.replicates < 1) throw std::invalid_argument("estimator_comparison_test: B must be >= 1");
  const std::size_t n = data.size();
  const std::size_t D = data.dimension();
  const std::size_t k = options.resolution == 0 ? comparison_resolution(D) : options.resolution;
  TestReport report;
  report.name = "estimator_comparison";
  report.replicates = options.replicates;
  report.seed = options.seed;

  const ComparisonFit observed = comparison_statistic(data, options.method, k);
  const DiscreteSpectralMeasure& null_measure = observed.projection.measure;
  report.statistic = observed.statistic;
  report.replicate_statistics.assign(options.replicates, 0.0);
  parallel_for(options.replicates, [&](std::size_t b) {
    const Dataset sample =
        sample_spectral_ev(null_measure, n, Rng::derive_seed(options.seed, StreamPurpose::bootstrap, b));
    report.replicate_statistics[b] = comparison_statistic(sample, options.method, k).statistic;
  });
  report.p_value = resampling_p_value(report.statistic, report.replicate_statistics);
  report.details = {{"resolution", static_cast<double>(k)},
                    {"projection_objective", observed.projection.objective},
                    {"projection_residual", observed.projection.constraint_residual},
                    {"atoms", static_cast<double>(null_measure.size())}};
  if (observed.projection.clipped > 0) {
    report.warnings.push_back(std::to_string(observed.projection.clipped) + " pilot values clipped before projection");
  }
  if (n < 50) report.warnings.push_back("fewer than 50 observations; bootstrap approximation is rough");
  std::size_t ties = 0;
  for (std::size_t d = 0; d < D; ++d) midranks(data.values().column(d), &ties);
  detail::add_tie_warning(report, ties, n);
  return report;
}

struct GofOptions {
  ParametricFamily family = ParametricFamily::logistic;
  std::size_t replicates = 500;
  std::uint64_t seed = 1;
  std::size_t resolution = 50;
  /// Discretisation of the Husler-Reiss spectral measure for resampling.
  std::size_t husler_reiss_discretization = 200;
};

struct ParametricFitSummary {
  FitResult fit;
  double statistic = 0.0;
};

/// Fits the family to the corrected CFG surface and returns the uniform-grid
/// mean squared difference between the two.
inline ParametricFitSummary parametric_distance(const Dataset& data, ParametricFamily family, std::size_t resolution) {
  const PseudoObservations ranks = pseudo_observations(data, RankScaling::over_n_plus_1);
  const DependenceEstimate pilot = estimate_surface(ranks, resolution, EstimatorMethod::cfg, true);
  FitResult fit = fit_parametric_min_distance(pilot, family);
  return {fit, fit.objective};
}

/// Goodness of fit of a parametric family by comparing the fitted model with
/// the nonparametric estimate; parametric bootstrap from the fitted model.
inline TestReport gof_parametric_test(const Dataset& data, const GofOptions& options = {}) {
  if (options.replicates < 1) throw std::invalid_argument("gof_parametric_test: B must be >= 1");
  const std::size_t n = data.size();
  const std::size_t D = data.dimension();
  if (options.family == ParametricFamily::husler_reiss && D != 2) {
    throw std::invalid_argument("gof_parametric_test: husler_reiss requires D = 2");
  }
  TestReport report;
  report.name = std::string("gof_") + to_string(options.family);
  report.replicates = options.replicates;
  report.seed = options.seed;

  const ParametricFitSummary observed = parametric_distance(data, options.family, options.resolution);
  report.statistic = observed.statistic;
  const double parameter = observed.fit.parameter;

  std::optional<DiscreteSpectralMeasure> hr_measure;
  if (options.family == ParametricFamily::husler_reiss) {
    hr_measure = discretize_bivariate(PickandsFunction::husler_reiss(parameter), options.husler_reiss_discretization);
  }
  report.replicate_statistics.assign(options.replicates, 0.0);
  std::vector<char> boundary(options.replicates, 0);
  parallel_for(options.replicates, [&](std::size_t b) {
    const std::uint64_t seed = Rng::derive_seed(options.seed, StreamPurpose::bootstrap, b);
    const Dataset sample = options.family == ParametricFamily::logistic ? sample_logistic_ev(n, D, parameter, seed)
                                                                        : sample_spectral_ev(*hr_measure, n, seed);
    const ParametricFitSummary refit = parametric_distance(sample, options.family, options.resolution);
    report.replicate_statistics[b] = refit.statistic;
    boundary[b] = refit.fit.at_boundary ? 1 : 0;
  });
  report.p_value = resampling_p_value(report.statistic, report.replicate_statistics);
  report.details = {{"parameter", parameter},
                    {"resolution", static_cast<double>(options.resolution)},
                    {"boundary_fit", observed.fit.at_boundary ? 1.0 : 0.0},
                    {"multimodal_scan", observed.fit.multimodal_scan ? 1.0 : 0.0},
                    {"bootstrap_boundary_fits",
                     static_cast<double>(std::accumulate(boundary.begin(), boundary.end(), std::size_t{0}))}};
  if (options.family == ParametricFamily::husler_reiss) {
    report.details.emplace_back("spectral_discretization", static_cast<double>(options.husler_reiss_discretization));
  }
  if (observed.fit.at_boundary) report.warnings.push_back("fitted parameter lies on the boundary of its range");
  if (observed.fit.multimodal_scan) report.warnings.push_back("objective scan has several local minima");
  std::size_t ties = 0;
  for (std::size_t d = 0; d < D; ++d) midranks(data.values().column(d), &ties);
  detail::add_tie_warning(report, ties, n);
  return report;
}

}  // namespace maxdep
