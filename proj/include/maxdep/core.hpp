#pragma once

// Simplex geometry, discrete spectral measures, Pickands dependence functions
// and extreme-value copula evaluation.
//
// An extreme-value copula in dimension D is determined by its Pickands
// dependence function A on the unit simplex through
//
//   C(u) = exp(-r * A(v)),   r = -sum_d log u_d,   v_d = -log(u_d) / r,
//
// and every valid A admits the spectral representation
//
//   A(v) = integral of max_d(v_d * s_d) dM(s),   integral of s_d dM(s) = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "matrix.hpp"
#include "simplex_grid.hpp"

namespace maxdep {

inline constexpr double simplex_tolerance = 1e-9;
inline constexpr double euler_gamma = 0.57721566490153286061;

/// Standard normal CDF, Phi(x) = erfc(-x / sqrt(2)) / 2. The C library erfc
/// is accurate to a few ulp, well inside an absolute error of 1e-12.
inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

namespace detail {

inline void require_same_dimension(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

/// Validates v as a point of the unit simplex, clamping round-off negatives
/// and renormalising sums within tolerance.
inline void normalize_simplex(std::vector<double>& v, const char* what) {
  if (v.size() < 2) throw std::invalid_argument(std::string(what) + ": dimension must be >= 2");
  double sum = 0.0;
  for (double& x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
    if (x < 0.0) {
      if (x < -simplex_tolerance) throw std::invalid_argument(std::string(what) + ": negative coordinate");
      x = 0.0;
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > simplex_tolerance) {
    throw std::invalid_argument(std::string(what) + ": coordinates sum to " + std::to_string(sum) +
                                ", not 1");
  }
  for (double& x : v) x /= sum;
}

}  // namespace detail

/// A point v of the unit simplex S_D = {v in [0,1]^D : sum_d v_d = 1}.
class SimplexPoint {
 public:
  explicit SimplexPoint(std::vector<double> v) : v_(std::move(v)) {
    detail::normalize_simplex(v_, "SimplexPoint");
  }

  static SimplexPoint vertex(std::size_t dimension, std::size_t d) {
    std::vector<double> v(dimension, 0.0);
    if (d >= dimension) throw std::invalid_argument("SimplexPoint::vertex: index out of range");
    v[d] = 1.0;
    return SimplexPoint(std::move(v));
  }

  static SimplexPoint barycenter(std::size_t dimension) {
    return SimplexPoint(std::vector<double>(dimension, 1.0 / static_cast<double>(dimension)));
  }

  std::size_t dimension() const { return v_.size(); }
  double operator[](std::size_t d) const { return v_[d]; }
  std::span<const double> values() const { return v_; }
  operator std::span<const double>() const { return v_; }  // NOLINT

 private:
  std::vector<double> v_;
};

/// A point u of the unit hypercube [0,1]^D.
class HypercubePoint {
 public:
  explicit HypercubePoint(std::vector<double> u) : u_(std::move(u)) {
    if (u_.empty()) throw std::invalid_argument("HypercubePoint: empty");
    for (double x : u_) {
      if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("HypercubePoint: coordinate outside [0,1]");
    }
  }
  std::size_t dimension() const { return u_.size(); }
  double operator[](std::size_t d) const { return u_[d]; }
  std::span<const double> values() const { return u_; }
  operator std::span<const double>() const { return u_; }  // NOLINT

 private:
  std::vector<double> u_;
};

/// Finite measure with atoms s_k on the simplex and masses m_k >= 0.
///
/// A valid spectral measure satisfies sum_k m_k s_kd = 1 for every d, which
/// forces total mass D. Use unchecked() for Monte Carlo estimates that only
/// satisfy the constraints approximately.
class DiscreteSpectralMeasure {
 public:
  static constexpr double moment_tolerance = 1e-6;

  DiscreteSpectralMeasure(RowMatrix atoms, std::vector<double> masses)
      : DiscreteSpectralMeasure(std::move(atoms), std::move(masses), true) {}

  static DiscreteSpectralMeasure unchecked(RowMatrix atoms, std::vector<double> masses) {
    return DiscreteSpectralMeasure(std::move(atoms), std::move(masses), false);
  }

  /// Unit masses at the vertices: the independence measure.
  static DiscreteSpectralMeasure vertices(std::size_t dimension) {
    RowMatrix atoms(dimension, dimension, 0.0);
    for (std::size_t d = 0; d < dimension; ++d) atoms(d, d) = 1.0;
    return DiscreteSpectralMeasure(std::move(atoms), std::vector<double>(dimension, 1.0));
  }

  /// Mass D at the barycenter: complete dependence.
  static DiscreteSpectralMeasure barycenter(std::size_t dimension) {
    RowMatrix atoms(1, dimension, 1.0 / static_cast<double>(dimension));
    return DiscreteSpectralMeasure(std::move(atoms), {static_cast<double>(dimension)});
  }

  std::size_t dimension() const { return atoms_.cols(); }
  std::size_t size() const { return atoms_.rows(); }
  std::span<const double> atom(std::size_t k) const { return atoms_.row(k); }
  double mass(std::size_t k) const { return masses_[k]; }
  const RowMatrix& atoms() const { return atoms_; }
  const std::vector<double>& masses() const { return masses_; }

  /// First moments sum_k m_k s_kd, one per coordinate.
  std::vector<double> moments() const {
    std::vector<double> out(dimension(), 0.0);
    for (std::size_t k = 0; k < size(); ++k) {
      for (std::size_t d = 0; d < dimension(); ++d) out[d] += masses_[k] * atoms_(k, d);
    }
    return out;
  }

  /// max_d |sum_k m_k s_kd - 1|.
  double moment_residual() const {
    double worst = 0.0;
    for (double m : moments()) worst = std::max(worst, std::abs(m - 1.0));
    return worst;
  }

  double total_mass() const {
    double total = 0.0;
    for (double m : masses_) total += m;
    return total;
  }

  bool satisfies_moments() const { return moment_residual() <= moment_tolerance; }

  /// A(v) = sum_k m_k max_d(v_d s_kd).
  double pickands(std::span<const double> v) const {
    detail::require_same_dimension(v.size(), dimension(), "spectral_to_pickands");
    double total = 0.0;
    const std::size_t D = dimension();
    for (std::size_t k = 0; k < size(); ++k) {
      const double* s = atoms_.data().data() + k * D;
      double best = 0.0;
      for (std::size_t d = 0; d < D; ++d) best = std::max(best, v[d] * s[d]);
      total += masses_[k] * best;
    }
    return total;
  }

 private:
  DiscreteSpectralMeasure(RowMatrix atoms, std::vector<double> masses, bool check_moments)
      : atoms_(std::move(atoms)), masses_(std::move(masses)) {
    if (atoms_.cols() < 2) throw std::invalid_argument("DiscreteSpectralMeasure: dimension must be >= 2");
    if (atoms_.rows() != masses_.size()) {
      throw std::invalid_argument("DiscreteSpectralMeasure: atom and mass counts differ");
    }
    if (masses_.empty()) throw std::invalid_argument("DiscreteSpectralMeasure: no atoms");
    for (std::size_t k = 0; k < atoms_.rows(); ++k) {
      std::vector<double> s(atoms_.row(k).begin(), atoms_.row(k).end());
      detail::normalize_simplex(s, "DiscreteSpectralMeasure atom");
      std::copy(s.begin(), s.end(), atoms_.row(k).begin());
      if (!(masses_[k] >= 0.0) || !std::isfinite(masses_[k])) {
        throw std::invalid_argument("DiscreteSpectralMeasure: masses must be finite and nonnegative");
      }
    }
    if (check_moments && !satisfies_moments()) {
      throw std::invalid_argument("DiscreteSpectralMeasure: moment constraints violated (residual " +
                                  std::to_string(moment_residual()) + ")");
    }
  }

  RowMatrix atoms_;
  std::vector<double> masses_;
};

/// spectral_to_pickands(M, v) = sum_k m_k max_d(v_d s_kd).
inline double spectral_to_pickands(const DiscreteSpectralMeasure& measure, const SimplexPoint& v) {
  return measure.pickands(v.values());
}

/// Logistic (Gumbel) family: A(v) = (sum_d v_d^theta)^(1/theta), theta >= 1.
inline double logistic_pickands(double theta, std::span<const double> v) {
  if (!(theta >= 1.0)) throw std::invalid_argument("logistic_pickands: theta must be >= 1");
  const double top = *std::max_element(v.begin(), v.end());
  if (top <= 0.0) return 0.0;
  if (std::isinf(theta)) return top;
  double sum = 0.0;
  for (double x : v) sum += std::pow(x / top, theta);
  return top * std::pow(sum, 1.0 / theta);
}

/// Husler-Reiss family (bivariate):
///   A(v) = v1 Phi(lambda + log(v1/v2)/(2 lambda)) + v2 Phi(lambda + log(v2/v1)/(2 lambda)).
/// lambda -> infinity gives independence and lambda -> 0 complete dependence.
/// For the Smith model at lag h, lambda = sqrt(h' Sigma^{-1} h) / 2.
inline double husler_reiss_pickands(double lambda, std::span<const double> v) {
  if (v.size() != 2) throw std::invalid_argument("husler_reiss_pickands: requires D = 2");
  if (!(lambda > 0.0)) throw std::invalid_argument("husler_reiss_pickands: lambda must be > 0");
  const double v1 = v[0];
  const double v2 = v[1];
  if (v1 <= 0.0 || v2 <= 0.0) return v1 + v2;
  if (std::isinf(lambda)) return v1 + v2;
  const double ratio = std::log(v1 / v2) / (2.0 * lambda);
  return v1 * standard_normal_cdf(lambda + ratio) + v2 * standard_normal_cdf(lambda - ratio);
}

inline double logistic_pickands(double theta, const SimplexPoint& v) {
  return logistic_pickands(theta, v.values());
}
inline double husler_reiss_pickands(double lambda, const SimplexPoint& v) {
  return husler_reiss_pickands(lambda, v.values());
}

struct LogisticModel {
  double theta;
  std::size_t dimension;
};

struct HuslerReissModel {
  double lambda;
};

/// Values on a regular simplex grid. D = 2 interpolates linearly in v_1;
/// D >= 3 evaluates at the nearest grid point.
struct GridPickands {
  SimplexGrid grid;
  std::vector<double> values;
};

struct SpectralPickands {
  DiscreteSpectralMeasure measure;
};

/// A Pickands dependence function in parametric, grid or spectral form.
class PickandsFunction {
 public:
  using Representation = std::variant<LogisticModel, HuslerReissModel, GridPickands, SpectralPickands>;

  static PickandsFunction logistic(double theta, std::size_t dimension) {
    if (!(theta >= 1.0)) throw std::invalid_argument("logistic: theta must be >= 1");
    if (dimension < 2) throw std::invalid_argument("logistic: dimension must be >= 2");
    return PickandsFunction(LogisticModel{theta, dimension});
  }
  static PickandsFunction husler_reiss(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("husler_reiss: lambda must be > 0");
    return PickandsFunction(HuslerReissModel{lambda});
  }
  static PickandsFunction grid_estimate(SimplexGrid grid, std::vector<double> values) {
    if (values.size() != grid.size()) throw std::invalid_argument("grid_estimate: value count mismatch");
    return PickandsFunction(GridPickands{std::move(grid), std::move(values)});
  }
  static PickandsFunction spectral(DiscreteSpectralMeasure measure) {
    return PickandsFunction(SpectralPickands{std::move(measure)});
  }
  static PickandsFunction independence(std::size_t dimension) { return logistic(1.0, dimension); }
  static PickandsFunction comonotone(std::size_t dimension) {
    return spectral(DiscreteSpectralMeasure::barycenter(dimension));
  }

  std::size_t dimension() const {
    return std::visit(
        [](const auto& rep) -> std::size_t {
          using T = std::decay_t<decltype(rep)>;
          if constexpr (std::is_same_v<T, LogisticModel>) return rep.dimension;
          else if constexpr (std::is_same_v<T, HuslerReissModel>) return 2;
          else if constexpr (std::is_same_v<T, GridPickands>) return rep.grid.dimension();
          else return rep.measure.dimension();
        },
        rep_);
  }

  const Representation& representation() const { return rep_; }

  /// Evaluates A at v; v is assumed to lie on the simplex.
  double operator()(std::span<const double> v) const {
    detail::require_same_dimension(v.size(), dimension(), "PickandsFunction");
    return std::visit(
        [&](const auto& rep) -> double {
          using T = std::decay_t<decltype(rep)>;
          if constexpr (std::is_same_v<T, LogisticModel>) return logistic_pickands(rep.theta, v);
          else if constexpr (std::is_same_v<T, HuslerReissModel>) return husler_reiss_pickands(rep.lambda, v);
          else if constexpr (std::is_same_v<T, GridPickands>) return evaluate_grid(rep, v);
          else return rep.measure.pickands(v);
        },
        rep_);
  }

  double operator()(const SimplexPoint& v) const { return (*this)(v.values()); }

 private:
  explicit PickandsFunction(Representation rep) : rep_(std::move(rep)) {}

  static double evaluate_grid(const GridPickands& g, std::span<const double> v) {
    const std::size_t k = g.grid.resolution();
    if (g.grid.dimension() == 2) {
      const double t = std::clamp(v[0], 0.0, 1.0) * static_cast<double>(k);
      const std::size_t j = std::min(static_cast<std::size_t>(std::floor(t)), k - 1);
      const double frac = t - static_cast<double>(j);
      return (1.0 - frac) * g.values[j] + frac * g.values[j + 1];
    }
    return g.values[g.grid.nearest_index(v)];
  }

  Representation rep_;
};

/// Extreme-value copula C(u) = exp(-r A(v)). Returns 0 if any u_d = 0
/// (without evaluating A) and 1 when every u_d = 1.
inline double ev_copula_cdf(const PickandsFunction& A, std::span<const double> u) {
  detail::require_same_dimension(u.size(), A.dimension(), "ev_copula_cdf");
  double r = 0.0;
  for (double x : u) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("ev_copula_cdf: coordinate outside [0,1]");
    if (x == 0.0) return 0.0;
  }
  std::vector<double> v(u.size());
  for (std::size_t d = 0; d < u.size(); ++d) {
    v[d] = -std::log(u[d]);
    r += v[d];
  }
  if (r == 0.0) return 1.0;
  for (double& x : v) x /= r;
  return std::exp(-r * A(v));
}

inline double ev_copula_cdf(const PickandsFunction& A, const HypercubePoint& u) {
  return ev_copula_cdf(A, u.values());
}

/// Discrete spectral measure whose Pickands function is the piecewise-linear
/// interpolant of a bivariate A at t_j = j / k (t = v_1).
///
/// Interior atoms (1 - t_j, t_j) carry the slope change
/// k (A(t_{j+1}) - 2 A(t_j) + A(t_{j-1})); the vertex masses then follow from
/// the two moment constraints. Negative slope changes (non-convex input) are
/// clipped to zero.
inline DiscreteSpectralMeasure discretize_bivariate(const PickandsFunction& A, std::size_t resolution) {
  if (A.dimension() != 2) throw std::invalid_argument("discretize_bivariate: requires D = 2");
  if (resolution < 2) throw std::invalid_argument("discretize_bivariate: resolution must be >= 2");
  const double k = static_cast<double>(resolution);
  std::vector<double> values(resolution + 1);
  for (std::size_t j = 0; j <= resolution; ++j) {
    const double t = static_cast<double>(j) / k;
    const double v[2] = {t, 1.0 - t};
    values[j] = A(v);
  }
  RowMatrix atoms(resolution + 1, 2);
  std::vector<double> masses(resolution + 1, 0.0);
  double first = 0.0;
  double second = 0.0;
  for (std::size_t j = 1; j < resolution; ++j) {
    const double t = static_cast<double>(j) / k;
    const double jump = std::max(0.0, k * (values[j + 1] - 2.0 * values[j] + values[j - 1]));
    atoms(j, 0) = 1.0 - t;
    atoms(j, 1) = t;
    masses[j] = jump;
    first += jump * (1.0 - t);
    second += jump * t;
  }
  atoms(0, 0) = 1.0;
  atoms(0, 1) = 0.0;
  masses[0] = std::max(0.0, 1.0 - first);
  atoms(resolution, 0) = 0.0;
  atoms(resolution, 1) = 1.0;
  masses[resolution] = std::max(0.0, 1.0 - second);
  return DiscreteSpectralMeasure(std::move(atoms), std::move(masses));
}

}  // namespace maxdep
