#pragma once

// Projection of a pilot estimate onto valid Pickands dependence functions
// with discrete spectral measures on a fixed atom grid, and minimum-distance
// fitting of parametric families.
//
// Given evaluation points v_j with weights nu_j, pilot values b_j and atoms
// s_k, the projection solves the convex quadratic program
//
//   minimise   sum_j nu_j (b_j - sum_k m_k max_d(v_jd s_kd))^2
//   subject to sum_k m_k s_kd = 1 for every d,  m_k >= 0.
//
// Solver outline:
//   1. Lawson-Hanson active-set NNLS on the system augmented with the moment
//      rows scaled by a penalty rho (rho = 1e4, 1e5, ... until the moment
//      residual is <= 1e-6).
//   2. A primal active-set refinement of the exact equality-constrained
//      problem, warm-started from the support found in step 1. Each step
//      solves the equality-constrained least squares problem on the current
//      support by the null-space method, so the returned masses satisfy the
//      moment constraints to round-off and the objective is the exact
//      constrained minimum.
// Candidates are scanned in atom order and ties go to the lowest index.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "estimators.hpp"
#include "matrix.hpp"
#include "simplex_grid.hpp"

namespace maxdep {

struct NnlsResult {
  Eigen::VectorXd x;
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = true;
};

/// Lawson-Hanson active-set solution of min ||A x - b|| subject to x >= 0.
/// objective_trace holds ||A x - b||^2 after every outer iteration.
inline NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, std::size_t max_iterations = 0) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size()) throw std::invalid_argument("nnls: dimension mismatch");
  if (max_iterations == 0) max_iterations = 3 * static_cast<std::size_t>(n) + 30;

  NnlsResult out;
  out.x = Eigen::VectorXd::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  std::vector<char> banned(static_cast<std::size_t>(n), 0);
  const double tol = 1e-13 * std::max(1.0, A.cwiseAbs().maxCoeff() * std::max(1.0, b.cwiseAbs().maxCoeff())) *
                     static_cast<double>(std::max<Eigen::Index>(A.rows(), 1));

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    z = Eigen::VectorXd::Zero(n);
    if (idx.empty()) return;
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    const Eigen::VectorXd zp = sub.colPivHouseholderQr().solve(b);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = zp(static_cast<Eigen::Index>(c));
  };

  Eigen::VectorXd residual = b;
  Eigen::VectorXd z;
  while (true) {
    const Eigen::VectorXd w = A.transpose() * residual;
    Eigen::Index best = -1;
    double best_value = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto js = static_cast<std::size_t>(j);
      if (!passive[js] && !banned[js] && w(j) > best_value) {
        best_value = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    if (out.iterations >= max_iterations) {
      out.converged = false;
      break;
    }
    ++out.iterations;
    passive[static_cast<std::size_t>(best)] = 1;
    solve_passive(z);
    if (z(best) <= 0.0) {
      // Round-off can make the entering variable non-positive; exclude it.
      passive[static_cast<std::size_t>(best)] = 0;
      banned[static_cast<std::size_t>(best)] = 1;
      continue;
    }
    std::fill(banned.begin(), banned.end(), 0);
    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(n); ++inner) {
      bool feasible = true;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          feasible = false;
          alpha = std::min(alpha, out.x(j) / (out.x(j) - z(j)));
        }
      }
      if (feasible) break;
      out.x += alpha * (z - out.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && out.x(j) <= 1e-15 * std::max(1.0, out.x.cwiseAbs().maxCoeff())) {
          passive[static_cast<std::size_t>(j)] = 0;
          out.x(j) = 0.0;
        }
      }
      solve_passive(z);
    }
    out.x = z.cwiseMax(0.0);
    residual = b - A * out.x;
    out.objective_trace.push_back(residual.squaredNorm());
  }
  return out;
}

namespace detail {

/// min ||A_P x - b|| subject to S_P x = 1 on the columns listed in `support`,
/// by the null-space method. Returns nullopt if the moment rows cannot be
/// satisfied on this support.
inline std::optional<Eigen::VectorXd> equality_constrained_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                                               const Eigen::MatrixXd& S,
                                                               const std::vector<Eigen::Index>& support) {
  const auto p = static_cast<Eigen::Index>(support.size());
  if (p == 0) return std::nullopt;
  Eigen::MatrixXd Ap(A.rows(), p);
  Eigen::MatrixXd Sp(S.rows(), p);
  for (Eigen::Index c = 0; c < p; ++c) {
    Ap.col(c) = A.col(support[static_cast<std::size_t>(c)]);
    Sp.col(c) = S.col(support[static_cast<std::size_t>(c)]);
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(S.rows());

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Sp.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  const Eigen::VectorXd x0 = Sp.completeOrthogonalDecomposition().solve(ones);
  if ((Sp * x0 - ones).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;
  if (rank == p) return x0;

  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd Z = Q.rightCols(p - rank);
  const Eigen::MatrixXd AZ = Ap * Z;
  const Eigen::VectorXd y = AZ.completeOrthogonalDecomposition().solve(b - Ap * x0);
  return Eigen::VectorXd(x0 + Z * y);
}

}  // namespace detail

struct SpectralQpResult {
  Eigen::VectorXd masses;
  double objective = 0.0;
  double constraint_residual = 0.0;
  double penalty = 0.0;
  std::size_t iterations = 0;
  std::vector<double> penalty_trace;
  std::vector<double> objective_trace;
  bool kkt_satisfied = true;
};

/// Solves min ||A m - b||^2 subject to S m = 1, m >= 0, where the columns
/// `vertex_columns` of S form the identity (so vertex masses 1 are feasible).
inline SpectralQpResult solve_spectral_qp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& S,
                                          const std::vector<Eigen::Index>& vertex_columns) {
  const Eigen::Index K = A.cols();
  const Eigen::Index D = S.rows();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(D);
  SpectralQpResult out;

  // Step 1: penalised NNLS with escalating rho.
  NnlsResult penalised;
  constexpr int max_escalations = 5;
  double rho = 1e4;
  for (int escalation = 0;; ++escalation) {
    Eigen::MatrixXd augmented(D + A.rows(), K);
    augmented.topRows(D) = rho * S;
    augmented.bottomRows(A.rows()) = A;
    Eigen::VectorXd rhs(D + A.rows());
    rhs.head(D) = rho * ones;
    rhs.tail(A.rows()) = b;
    penalised = nnls(augmented, rhs);
    out.iterations += penalised.iterations;
    const double residual = (S * penalised.x - ones).cwiseAbs().maxCoeff();
    if (residual <= 1e-6 || escalation == max_escalations || rho * 10.0 > 1e10) break;
    rho *= 10.0;
  }
  out.penalty = rho;
  out.penalty_trace = penalised.objective_trace;

  // Step 2: exact primal active set from a feasible start.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(K);
  for (Eigen::Index c : vertex_columns) x(c) = 1.0;
  std::vector<char> passive(static_cast<std::size_t>(K), 0);
  for (Eigen::Index c : vertex_columns) passive[static_cast<std::size_t>(c)] = 1;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (penalised.x(k) > 0.0) passive[static_cast<std::size_t>(k)] = 1;
  }
  auto support_of = [&] {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (passive[static_cast<std::size_t>(k)]) idx.push_back(k);
    }
    return idx;
  };
  auto objective_of = [&](const Eigen::VectorXd& m) { return (A * m - b).squaredNorm(); };
  const double scale = std::max(1.0, b.squaredNorm());
  const double reduced_cost_tol = 1e-12 * scale * std::max(1.0, A.cwiseAbs().maxCoeff());

  // Settle the support: solve, step back toward the feasible iterate while
  // any mass is negative, dropping atoms that hit zero.
  auto settle = [&]() -> bool {
    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(K) + 1; ++inner) {
      const auto support = support_of();
      const auto solved = detail::equality_constrained_ls(A, b, S, support);
      if (!solved) return false;
      Eigen::VectorXd z = Eigen::VectorXd::Zero(K);
      for (std::size_t c = 0; c < support.size(); ++c) z(support[c]) = (*solved)(static_cast<Eigen::Index>(c));
      double alpha = 1.0;
      bool feasible = true;
      for (Eigen::Index k : support) {
        if (z(k) < 0.0) {
          feasible = false;
          const double step = x(k) / (x(k) - z(k));
          alpha = std::min(alpha, step);
        }
      }
      if (feasible) {
        x = z;
        return true;
      }
      x += alpha * (z - x);
      // Drop the blocking atoms. Warm-start atoms still at zero stay in
      // the support as long as the solve keeps them positive.
      for (Eigen::Index k : support) {
        if (x(k) <= 1e-14 && z(k) < 0.0) {
          x(k) = 0.0;
          passive[static_cast<std::size_t>(k)] = 0;
        }
      }
    }
    return false;
  };

  // x starts at the vertex measure: feasible and inside the warm-start support.
  bool ok = settle();
  std::size_t outer = 0;
  const std::size_t max_outer = 3 * static_cast<std::size_t>(K) + 50;
  out.objective_trace.push_back(objective_of(x));
  while (ok) {
    const Eigen::VectorXd gradient = 2.0 * A.transpose() * (A * x - b);
    const auto support = support_of();
    Eigen::MatrixXd Sp(D, static_cast<Eigen::Index>(support.size()));
    Eigen::VectorXd gp(static_cast<Eigen::Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) {
      Sp.col(static_cast<Eigen::Index>(c)) = S.col(support[c]);
      gp(static_cast<Eigen::Index>(c)) = gradient(support[c]);
    }
    const Eigen::VectorXd mu = (Sp.transpose()).completeOrthogonalDecomposition().solve(-gp);
    const Eigen::VectorXd reduced = gradient + S.transpose() * mu;
    Eigen::Index entering = -1;
    double most_negative = -reduced_cost_tol;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!passive[static_cast<std::size_t>(k)] && reduced(k) < most_negative) {
        most_negative = reduced(k);
        entering = k;
      }
    }
    if (entering < 0) break;
    if (outer++ >= max_outer) {
      out.kkt_satisfied = false;
      break;
    }
    passive[static_cast<std::size_t>(entering)] = 1;
    const Eigen::VectorXd before = x;
    ok = settle();
    if (!ok) {
      x = before;
      break;
    }
    const double value = objective_of(x);
    if (value > out.objective_trace.back() * (1.0 + 1e-12) + 1e-300) {
      // No progress possible along this atom (degenerate step); stop here.
      x = before;
      out.kkt_satisfied = false;
      break;
    }
    out.objective_trace.push_back(value);
  }
  out.iterations += outer;

  if (!((S * x - ones).cwiseAbs().maxCoeff() <= 1e-9)) {
    out.kkt_satisfied = false;
    x = penalised.x;
  }
  out.masses = x.cwiseMax(0.0);
  out.objective = objective_of(out.masses);
  out.constraint_residual = (S * out.masses - ones).cwiseAbs().maxCoeff();
  return out;
}

struct ProjectionResult {
  DiscreteSpectralMeasure measure;
  /// Weighted squared error sum_j nu_j (b_j - A_proj(v_j))^2.
  double objective = 0.0;
  /// max_d |sum_k m_k s_kd - 1|.
  double constraint_residual = 0.0;
  std::size_t iterations = 0;
  double penalty = 0.0;
  /// Number of pilot values clipped to [max_d v_d, 1].
  std::size_t clipped = 0;
  bool kkt_satisfied = true;
  std::vector<double> objective_trace;
  std::vector<double> penalty_trace;

  PickandsFunction as_function() const { return PickandsFunction::spectral(measure); }
};

/// Projects pilot values b_j at points v_j (rows of `points`) onto Pickands
/// functions whose spectral measure lives on the atom grid. Empty weights
/// mean the uniform probability on the evaluation points.
inline ProjectionResult project_pickands(const RowMatrix& points, std::span<const double> pilot,
                                         const SimplexGrid& atom_grid, std::span<const double> weights = {}) {
  const std::size_t J = points.rows();
  const std::size_t D = atom_grid.dimension();
  if (J == 0) throw std::invalid_argument("project_pickands: empty pilot grid");
  if (pilot.size() != J) throw std::invalid_argument("project_pickands: pilot value count mismatch");
  detail::require_same_dimension(points.cols(), D, "project_pickands");
  if (!weights.empty() && weights.size() != J) throw std::invalid_argument("project_pickands: weight count mismatch");

  const std::size_t K = atom_grid.size();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(K));
  Eigen::VectorXd b(static_cast<Eigen::Index>(J));
  std::size_t clipped = 0;
  for (std::size_t j = 0; j < J; ++j) {
    const auto v = points.row(j);
    const double nu = weights.empty() ? 1.0 / static_cast<double>(J) : weights[j];
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw std::invalid_argument("project_pickands: invalid weight");
    const double root = std::sqrt(nu);
    const double lower = *std::max_element(v.begin(), v.end());
    double target = pilot[j];
    if (!std::isfinite(target)) throw std::invalid_argument("project_pickands: non-finite pilot value");
    if (target < lower || target > 1.0) {
      target = std::clamp(target, lower, 1.0);
      ++clipped;
    }
    b(static_cast<Eigen::Index>(j)) = root * target;
    for (std::size_t k = 0; k < K; ++k) {
      const auto s = atom_grid.point(k);
      double best = 0.0;
      for (std::size_t d = 0; d < D; ++d) best = std::max(best, v[d] * s[d]);
      A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = root * best;
    }
  }
  Eigen::MatrixXd S(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t d = 0; d < D; ++d) S(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = atom_grid.point(k)[d];
  }
  std::vector<Eigen::Index> vertices;
  for (std::size_t idx : atom_grid.vertex_indices()) vertices.push_back(static_cast<Eigen::Index>(idx));

  SpectralQpResult qp = solve_spectral_qp(A, b, S, vertices);
  if (!(qp.constraint_residual <= DiscreteSpectralMeasure::moment_tolerance)) {
    throw NumericalError("project_pickands: moment constraints not met after " + std::to_string(qp.iterations) +
                         " iterations (residual " + std::to_string(qp.constraint_residual) + ", penalty " +
                         std::to_string(qp.penalty) + ")");
  }

  // Keep only atoms with positive mass; vertex masses carry roundoff from the equality solve.
  const double negligible = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(D);
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < K; ++k) {
    if (qp.masses(static_cast<Eigen::Index>(k)) > negligible) kept.push_back(k);
  }
  RowMatrix atoms(kept.size(), D);
  std::vector<double> masses(kept.size());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const auto s = atom_grid.point(kept[c]);
    std::copy(s.begin(), s.end(), atoms.row(c).begin());
    masses[c] = qp.masses(static_cast<Eigen::Index>(kept[c]));
  }
  ProjectionResult result{DiscreteSpectralMeasure(std::move(atoms), std::move(masses)),
                          qp.objective,
                          qp.constraint_residual,
                          qp.iterations,
                          qp.penalty,
                          clipped,
                          qp.kkt_satisfied,
                          std::move(qp.objective_trace),
                          std::move(qp.penalty_trace)};
  return result;
}

inline ProjectionResult project_pickands(const DependenceEstimate& pilot, const SimplexGrid& atom_grid,
                                         std::span<const double> weights = {}) {
  detail::require_same_dimension(pilot.grid.dimension(), atom_grid.dimension(), "project_pickands");
  return project_pickands(pilot.grid.points(), pilot.values, atom_grid, weights);
}

enum class ParametricFamily { logistic, husler_reiss };

inline const char* to_string(ParametricFamily f) {
  return f == ParametricFamily::logistic ? "logistic" : "husler_reiss";
}

inline ParametricFamily parse_family(const std::string& name) {
  if (name == "logistic") return ParametricFamily::logistic;
  if (name == "husler_reiss" || name == "husler-reiss") return ParametricFamily::husler_reiss;
  throw std::invalid_argument("unknown parametric family '" + name + "'");
}

struct ParameterBounds {
  double lower;
  double upper;
};

inline ParameterBounds default_bounds(ParametricFamily family) {
  return family == ParametricFamily::logistic ? ParameterBounds{1.0, 50.0} : ParameterBounds{0.01, 10.0};
}

inline PickandsFunction family_pickands(ParametricFamily family, double parameter, std::size_t dimension) {
  if (family == ParametricFamily::logistic) return PickandsFunction::logistic(parameter, dimension);
  if (dimension != 2) throw std::invalid_argument("husler_reiss family requires D = 2");
  return PickandsFunction::husler_reiss(parameter);
}

struct FitResult {
  ParametricFamily family = ParametricFamily::logistic;
  double parameter = 0.0;
  double objective = 0.0;
  bool at_boundary = false;
  /// More than one local minimum in the coarse scan.
  bool multimodal_scan = false;
  std::size_t evaluations = 0;
};

/// Minimum-distance fit: the parameter minimising the uniform-weight squared
/// error against the pilot grid values. A 64-point geometric scan of the
/// bounds brackets the minimum, then golden-section search refines it to an
/// absolute tolerance of 1e-6.
inline FitResult fit_parametric_min_distance(const RowMatrix& points, std::span<const double> pilot,
                                             ParametricFamily family, std::optional<ParameterBounds> bounds = {}) {
  const std::size_t D = points.cols();
  if (family == ParametricFamily::husler_reiss && D != 2) {
    throw std::invalid_argument("fit_parametric_min_distance: husler_reiss requires D = 2");
  }
  if (pilot.size() != points.rows() || pilot.empty()) {
    throw std::invalid_argument("fit_parametric_min_distance: pilot value count mismatch");
  }
  const ParameterBounds range = bounds.value_or(default_bounds(family));
  const double domain_floor = family == ParametricFamily::logistic ? 1.0 : 0.0;
  if (!(range.lower < range.upper) || range.lower < domain_floor ||
      (family == ParametricFamily::husler_reiss && range.lower <= 0.0)) {
    throw std::invalid_argument("fit_parametric_min_distance: invalid bounds");
  }

  FitResult fit;
  fit.family = family;
  auto objective = [&](double parameter) {
    ++fit.evaluations;
    double total = 0.0;
    for (std::size_t j = 0; j < points.rows(); ++j) {
      const auto v = points.row(j);
      const double model = family == ParametricFamily::logistic ? logistic_pickands(parameter, v)
                                                                : husler_reiss_pickands(parameter, v);
      const double diff = pilot[j] - model;
      total += diff * diff;
    }
    return total / static_cast<double>(points.rows());
  };

  constexpr std::size_t scan_points = 64;
  std::vector<double> grid(scan_points);
  std::vector<double> values(scan_points);
  const double log_lo = std::log(range.lower);
  const double log_hi = std::log(range.upper);
  for (std::size_t i = 0; i < scan_points; ++i) {
    grid[i] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(scan_points - 1));
    values[i] = objective(grid[i]);
  }
  grid.front() = range.lower;
  grid.back() = range.upper;
  const std::size_t best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  std::size_t local_minima = 0;
  for (std::size_t i = 0; i < scan_points; ++i) {
    const bool left = i == 0 || values[i] < values[i - 1];
    const bool right = i + 1 == scan_points || values[i] <= values[i + 1];
    if (left && right) ++local_minima;
  }
  fit.multimodal_scan = local_minima > 1;

  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, scan_points - 1)];
  constexpr double tolerance = 1e-6;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  double estimate = 0.5 * (a + b);
  double value = objective(estimate);
  for (double candidate : {range.lower, range.upper, grid[best]}) {
    const double f = objective(candidate);
    if (f < value) {
      value = f;
      estimate = candidate;
    }
  }
  fit.parameter = estimate;
  fit.objective = value;
  fit.at_boundary = estimate - range.lower <= 2.0 * tolerance || range.upper - estimate <= 2.0 * tolerance;
  return fit;
}

inline FitResult fit_parametric_min_distance(const DependenceEstimate& pilot, ParametricFamily family,
                                             std::optional<ParameterBounds> bounds = {}) {
  return fit_parametric_min_distance(pilot.grid.points(), pilot.values, family, bounds);
}

}  // namespace maxdep
