#pragma once

// Simulation of simple max-stable processes
//
//   Z(x) = max_j S_j W_j^+(x),
//
// where S_1 > S_2 > ... are the points of a Poisson process on (0, inf) with
// intensity s^-2 ds (realised as S_j = 1 / Gamma_j with Gamma_j the arrival
// times of a unit-rate Poisson process) and W_j are iid copies of a spectral
// process with E[W^+(x)] = 1. Z has unit-Frechet margins and its copula is
// the extreme-value copula with A(v) = E[max_d v_d W^+(x_d)].
//
// Also provides exact samplers for the logistic family and for extreme-value
// copulas with a discrete spectral measure.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "empirical.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace maxdep {

/// Site coordinates, one row per site, p in {1, 2} columns.
class SiteLayout {
 public:
  explicit SiteLayout(RowMatrix coordinates) : coords_(std::move(coordinates)) {
    if (coords_.rows() < 1) throw std::invalid_argument("SiteLayout: need at least one site");
    if (coords_.cols() < 1 || coords_.cols() > 2) throw std::invalid_argument("SiteLayout: coordinates must be 1-D or 2-D");
    for (double x : coords_.data()) {
      if (!std::isfinite(x)) throw std::invalid_argument("SiteLayout: non-finite coordinate");
    }
    for (std::size_t a = 0; a < coords_.rows(); ++a) {
      for (std::size_t b = a + 1; b < coords_.rows(); ++b) {
        if (distance(a, b) == 0.0) throw std::invalid_argument("SiteLayout: duplicate sites");
      }
    }
  }

  static SiteLayout from_points(const std::vector<std::vector<double>>& points) {
    return SiteLayout(RowMatrix::from_rows(points));
  }

  std::size_t size() const { return coords_.rows(); }
  std::size_t space_dimension() const { return coords_.cols(); }
  const RowMatrix& coordinates() const { return coords_; }

  double distance(std::size_t a, std::size_t b) const {
    double sum = 0.0;
    for (std::size_t c = 0; c < coords_.cols(); ++c) {
      const double diff = coords_(a, c) - coords_(b, c);
      sum += diff * diff;
    }
    return std::sqrt(sum);
  }

 private:
  RowMatrix coords_;
};

enum class CorrelationKind { exponential, gaussian, constant };

inline const char* to_string(CorrelationKind k) {
  switch (k) {
    case CorrelationKind::exponential: return "exponential";
    case CorrelationKind::gaussian: return "gaussian";
    case CorrelationKind::constant: return "constant";
  }
  return "unknown";
}

inline CorrelationKind parse_correlation(const std::string& name) {
  if (name == "exponential") return CorrelationKind::exponential;
  if (name == "gaussian") return CorrelationKind::gaussian;
  if (name == "constant") return CorrelationKind::constant;
  throw std::invalid_argument("unknown correlation kind '" + name + "'");
}

/// rho(h) for the given kind; `constant` is identically 1.
inline double correlation(CorrelationKind kind, double range, double h) {
  switch (kind) {
    case CorrelationKind::exponential: return std::exp(-h / range);
    case CorrelationKind::gaussian: return std::exp(-(h / range) * (h / range));
    case CorrelationKind::constant: return 1.0;
  }
  return 1.0;
}

/// W(x) = sqrt(2 pi) max(0, eps(x)), eps a stationary standard Gaussian
/// process. `truncation` is the a.s. bound B assumed for eps in the
/// stopping rule.
struct SchlatherModel {
  CorrelationKind kind = CorrelationKind::exponential;
  double range = 1.0;
  double truncation = 5.0;
};

/// W(x) = c phi_Sigma(x - P), P uniform on the site bounding box padded by
/// padding * sqrt(largest eigenvalue of Sigma); c is the window volume.
struct SmithModel {
  std::vector<double> covariance;  // p x p, row-major
  double padding = 5.0;
};

/// W identically 1 (complete dependence); a degenerate reference model.
struct UnitModel {};

using SpectralProcessConfig = std::variant<SchlatherModel, SmithModel, UnitModel>;

inline std::string model_name(const SpectralProcessConfig& config) {
  if (std::holds_alternative<SchlatherModel>(config)) return "schlather";
  if (std::holds_alternative<SmithModel>(config)) return "smith";
  return "unit";
}

/// n x D sample on unit-Frechet margins.
struct FieldSample {
  RowMatrix values;
  std::string model;
  std::uint64_t seed = 0;

  Dataset to_dataset() const { return Dataset(values); }
};

namespace detail {

/// Draws W^+ at the sites for a fixed configuration.
class SpectralFunctionSampler {
 public:
  SpectralFunctionSampler(const SpectralProcessConfig& config, const SiteLayout& sites)
      : sites_(sites.size()), config_(config) {
    if (const auto* sch = std::get_if<SchlatherModel>(&config)) {
      prepare_schlather(*sch, sites);
    } else if (const auto* smith = std::get_if<SmithModel>(&config)) {
      prepare_smith(*smith, sites);
    } else {
      bound_ = 1.0;
    }
  }

  std::size_t sites() const { return sites_; }

  /// Almost-sure (or assumed) upper bound of W^+ used by the stopping rule.
  double bound() const { return bound_; }

  void draw(Rng& rng, std::span<double> out) const {
    if (std::holds_alternative<SchlatherModel>(config_)) {
      Eigen::VectorXd g(static_cast<Eigen::Index>(sites_));
      for (std::size_t d = 0; d < sites_; ++d) g(static_cast<Eigen::Index>(d)) = rng.normal();
      const Eigen::VectorXd eps = root_ * g;
      constexpr double scale = 2.5066282746310002;  // sqrt(2 pi)
      for (std::size_t d = 0; d < sites_; ++d) out[d] = scale * std::max(0.0, eps(static_cast<Eigen::Index>(d)));
    } else if (std::holds_alternative<SmithModel>(config_)) {
      const std::size_t p = lower_.size();
      double centre[2];
      for (std::size_t c = 0; c < p; ++c) centre[c] = rng.uniform(lower_[c], upper_[c]);
      for (std::size_t d = 0; d < sites_; ++d) {
        double diff[2];
        for (std::size_t c = 0; c < p; ++c) diff[c] = site_coords_(d, c) - centre[c];
        double quad = 0.0;
        for (std::size_t a = 0; a < p; ++a) {
          for (std::size_t b = 0; b < p; ++b) quad += diff[a] * precision_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * diff[b];
        }
        out[d] = peak_ * std::exp(-0.5 * quad);
      }
    } else {
      std::fill(out.begin(), out.end(), 1.0);
    }
  }

 private:
  void prepare_schlather(const SchlatherModel& model, const SiteLayout& sites) {
    if (model.kind != CorrelationKind::constant && !(model.range > 0.0)) {
      throw std::invalid_argument("schlather: range must be > 0");
    }
    if (!(model.truncation > 0.0)) throw std::invalid_argument("schlather: truncation bound must be > 0");
    const auto D = static_cast<Eigen::Index>(sites_);
    Eigen::MatrixXd corr(D, D);
    for (Eigen::Index a = 0; a < D; ++a) {
      for (Eigen::Index b = 0; b < D; ++b) {
        corr(a, b) = a == b ? 1.0
                            : correlation(model.kind, model.range,
                                          sites.distance(static_cast<std::size_t>(a), static_cast<std::size_t>(b)));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.minCoeff() < -1e-8) {
      throw std::invalid_argument("schlather: correlation matrix is not positive semi-definite");
    }
    for (Eigen::Index i = 0; i < D; ++i) values(i) = values(i) < 1e-12 ? 0.0 : std::sqrt(values(i));
    root_ = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    bound_ = 2.5066282746310002 * model.truncation;
  }

  void prepare_smith(const SmithModel& model, const SiteLayout& sites) {
    const std::size_t p = sites.space_dimension();
    if (model.covariance.size() != p * p) {
      throw std::invalid_argument("smith: covariance must be " + std::to_string(p) + "x" + std::to_string(p));
    }
    if (!(model.padding > 0.0)) throw std::invalid_argument("smith: padding must be > 0");
    Eigen::MatrixXd sigma(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < p; ++b) sigma(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = model.covariance[a * p + b];
    }
    if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw std::invalid_argument("smith: covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    if (eig.eigenvalues().minCoeff() <= 0.0) throw std::invalid_argument("smith: covariance must be positive definite");
    precision_ = sigma.inverse();
    const double pad = model.padding * std::sqrt(eig.eigenvalues().maxCoeff());
    site_coords_ = sites.coordinates();
    lower_.assign(p, 0.0);
    upper_.assign(p, 0.0);
    double volume = 1.0;
    for (std::size_t c = 0; c < p; ++c) {
      double lo = site_coords_(0, c);
      double hi = lo;
      for (std::size_t d = 0; d < sites_; ++d) {
        lo = std::min(lo, site_coords_(d, c));
        hi = std::max(hi, site_coords_(d, c));
      }
      lower_[c] = lo - pad;
      upper_[c] = hi + pad;
      volume *= upper_[c] - lower_[c];
    }
    const double density_peak =
        1.0 / (std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(p)) * std::sqrt(sigma.determinant()));
    peak_ = volume * density_peak;
    bound_ = peak_;
  }

  std::size_t sites_;
  SpectralProcessConfig config_;
  double bound_ = 1.0;
  Eigen::MatrixXd root_;
  Eigen::MatrixXd precision_;
  RowMatrix site_coords_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  double peak_ = 1.0;
};

constexpr std::size_t sampler_block = 1024;

}  // namespace detail

inline constexpr std::size_t max_points_per_realization = 1'000'000;

/// n realisations of Z at the sites. Realisation i uses the stream
/// (seed, simulation, i); the loop over Poisson points stops once
/// S_j * bound < min_d Z(x_d).
inline FieldSample simulate_field(const SpectralProcessConfig& config, const SiteLayout& sites, std::size_t n,
                                  std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_field: n must be >= 1");
  const detail::SpectralFunctionSampler sampler(config, sites);
  const std::size_t D = sites.size();
  RowMatrix values(n, D, 0.0);
  parallel_for(n, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, StreamPurpose::simulation, i);
    auto z = values.row(i);
    std::vector<double> w(D);
    double gamma = 0.0;
    for (std::size_t j = 0;; ++j) {
      if (j >= max_points_per_realization) {
        throw NumericalError("simulate_field: realisation " + std::to_string(i) + " did not terminate after " +
                             std::to_string(max_points_per_realization) + " points (bound " +
                             std::to_string(sampler.bound()) + ")");
      }
      gamma += rng.exponential();
      const double s = 1.0 / gamma;
      const double floor = *std::min_element(z.begin(), z.end());
      if (floor > 0.0 && s * sampler.bound() < floor) break;
      sampler.draw(rng, w);
      for (std::size_t d = 0; d < D; ++d) z[d] = std::max(z[d], s * w[d]);
    }
  });
  return FieldSample{std::move(values), model_name(config), seed};
}

/// Positive stable variate with Laplace transform exp(-t^alpha), 0 < alpha < 1,
/// by the Chambers-Mallows-Stuck / Kanter transform of U ~ Unif(0, pi) and
/// E ~ Exp(1):
///
///   V = sin(alpha U) / sin(U)^(1/alpha) * (sin((1 - alpha) U) / E)^((1 - alpha)/alpha).
inline double positive_stable(double alpha, Rng& rng) {
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  return std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha) *
         std::pow(std::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
}

/// Exact sampler for the logistic extreme-value copula: V positive stable
/// with index 1/theta, U_d = exp(-(E_d / V)^(1/theta)). Rows in block b of
/// 1024 use the stream (seed, simulation, b).
inline Dataset sample_logistic_ev(std::size_t n, std::size_t dimension, double theta, std::uint64_t seed) {
  if (!(theta >= 1.0)) throw std::invalid_argument("sample_logistic_ev: theta must be >= 1");
  if (n < 1 || dimension < 1) throw std::invalid_argument("sample_logistic_ev: empty sample requested");
  RowMatrix values(n, dimension);
  const double alpha = 1.0 / theta;
  const std::size_t blocks = (n + detail::sampler_block - 1) / detail::sampler_block;
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    Rng rng = Rng::stream(seed, StreamPurpose::simulation, blk);
    const std::size_t end = std::min(n, (blk + 1) * detail::sampler_block);
    for (std::size_t i = blk * detail::sampler_block; i < end; ++i) {
      if (theta == 1.0) {
        for (std::size_t d = 0; d < dimension; ++d) values(i, d) = rng.uniform();
        continue;
      }
      const double v = positive_stable(alpha, rng);
      for (std::size_t d = 0; d < dimension; ++d) {
        values(i, d) = std::exp(-std::pow(rng.exponential() / v, alpha));
      }
    }
  }
  return Dataset(std::move(values));
}

/// Exact sampler for the extreme-value copula with a discrete spectral
/// measure: Z_d = max_k m_k s_kd / E_k has P(Z <= z) = exp(-sum_k m_k max_d s_kd / z_d),
/// mapped to uniform margins by U_d = exp(-c_d / Z_d), c_d = sum_k m_k s_kd.
inline Dataset sample_spectral_ev(const DiscreteSpectralMeasure& measure, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_spectral_ev: n must be >= 1");
  const std::size_t D = measure.dimension();
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < measure.size(); ++k) {
    if (measure.mass(k) > 0.0) active.push_back(k);
  }
  RowMatrix weighted(active.size(), D);
  for (std::size_t c = 0; c < active.size(); ++c) {
    for (std::size_t d = 0; d < D; ++d) weighted(c, d) = measure.mass(active[c]) * measure.atom(active[c])[d];
  }
  const std::vector<double> scale = measure.moments();
  RowMatrix values(n, D);
  std::vector<double> z(D);
  const std::size_t blocks = (n + detail::sampler_block - 1) / detail::sampler_block;
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    Rng rng = Rng::stream(seed, StreamPurpose::simulation, blk);
    const std::size_t end = std::min(n, (blk + 1) * detail::sampler_block);
    for (std::size_t i = blk * detail::sampler_block; i < end; ++i) {
      std::fill(z.begin(), z.end(), 0.0);
      for (std::size_t c = 0; c < active.size(); ++c) {
        const double inv_e = 1.0 / rng.exponential();
        const auto row = weighted.row(c);
        for (std::size_t d = 0; d < D; ++d) z[d] = std::max(z[d], row[d] * inv_e);
      }
      for (std::size_t d = 0; d < D; ++d) values(i, d) = std::exp(-scale[d] / z[d]);
    }
  }
  return Dataset(std::move(values));
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// A(v) = E[max_d v_d W^+(x_d)] by averaging over N draws of W (no Poisson
/// points). Draws in block b of 1024 use the stream (seed, monte_carlo, b).
inline MonteCarloEstimate monte_carlo_pickands(const SpectralProcessConfig& config, const SiteLayout& sites,
                                               const SimplexPoint& v, std::size_t draws, std::uint64_t seed) {
  if (draws < 100) throw std::invalid_argument("monte_carlo_pickands: need at least 100 draws");
  detail::require_same_dimension(v.dimension(), sites.size(), "monte_carlo_pickands");
  const detail::SpectralFunctionSampler sampler(config, sites);
  const std::size_t D = sites.size();
  const std::size_t blocks = (draws + detail::sampler_block - 1) / detail::sampler_block;
  std::vector<double> sums(blocks, 0.0);
  std::vector<double> squares(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t blk) {
    Rng rng = Rng::stream(seed, StreamPurpose::monte_carlo, blk);
    std::vector<double> w(D);
    const std::size_t end = std::min(draws, (blk + 1) * detail::sampler_block);
    for (std::size_t j = blk * detail::sampler_block; j < end; ++j) {
      sampler.draw(rng, w);
      double best = 0.0;
      for (std::size_t d = 0; d < D; ++d) best = std::max(best, v[d] * w[d]);
      sums[blk] += best;
      squares[blk] += best * best;
    }
  });
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    sum += sums[b];
    sq += squares[b];
  }
  const double N = static_cast<double>(draws);
  const double mean = sum / N;
  const double variance = std::max(0.0, (sq - N * mean * mean) / (N - 1.0));
  return {mean, std::sqrt(variance / N)};
}

struct EmpiricalSpectralMeasure {
  /// Atoms W^+/R and masses R/N over draws with R > 0; not moment-repaired.
  DiscreteSpectralMeasure measure;
  std::vector<double> moments;
  /// Standard errors of the moments, sd(W^+(x_d)) / sqrt(N).
  std::vector<double> moment_standard_errors;
  double moment_residual = 0.0;
  double total_mass = 0.0;
  double total_mass_standard_error = 0.0;
  std::size_t draws = 0;
  std::size_t zero_draws = 0;
};

/// Recovers the spectral measure from N draws of W: on {R > 0}, with
/// R = sum_d W^+(x_d), each draw contributes the atom W^+/R with mass R/N.
inline EmpiricalSpectralMeasure empirical_spectral_measure(const SpectralProcessConfig& config,
                                                           const SiteLayout& sites, std::size_t draws,
                                                           std::uint64_t seed) {
  if (draws < 100) throw std::invalid_argument("empirical_spectral_measure: need at least 100 draws");
  if (sites.size() < 2) throw std::invalid_argument("empirical_spectral_measure: need at least 2 sites");
  const detail::SpectralFunctionSampler sampler(config, sites);
  const std::size_t D = sites.size();
  RowMatrix raw(draws, D);
  const std::size_t blocks = (draws + detail::sampler_block - 1) / detail::sampler_block;
  parallel_for(blocks, [&](std::size_t blk) {
    Rng rng = Rng::stream(seed, StreamPurpose::monte_carlo, blk);
    const std::size_t end = std::min(draws, (blk + 1) * detail::sampler_block);
    for (std::size_t j = blk * detail::sampler_block; j < end; ++j) sampler.draw(rng, raw.row(j));
  });

  const double N = static_cast<double>(draws);
  std::vector<double> atoms;
  std::vector<double> masses;
  std::vector<double> sum(D, 0.0);
  std::vector<double> sq(D, 0.0);
  double r_sum = 0.0;
  double r_sq = 0.0;
  std::size_t zero = 0;
  for (std::size_t j = 0; j < draws; ++j) {
    const auto w = raw.row(j);
    double r = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      r += w[d];
      sum[d] += w[d];
      sq[d] += w[d] * w[d];
    }
    r_sum += r;
    r_sq += r * r;
    if (r <= 0.0) {
      ++zero;
      continue;
    }
    for (std::size_t d = 0; d < D; ++d) atoms.push_back(w[d] / r);
    masses.push_back(r / N);
  }
  if (masses.empty()) throw NumericalError("empirical_spectral_measure: every draw has R = 0");

  const std::size_t kept = masses.size();
  EmpiricalSpectralMeasure out{
      DiscreteSpectralMeasure::unchecked(RowMatrix(kept, D, std::move(atoms)), std::move(masses)),
      {}, {}, 0.0, 0.0, 0.0, draws, zero};
  for (std::size_t d = 0; d < D; ++d) {
    const double mean = sum[d] / N;
    out.moments.push_back(mean);
    out.moment_standard_errors.push_back(std::sqrt(std::max(0.0, (sq[d] - N * mean * mean) / (N - 1.0)) / N));
    out.moment_residual = std::max(out.moment_residual, std::abs(mean - 1.0));
  }
  out.total_mass = r_sum / N;
  out.total_mass_standard_error =
      std::sqrt(std::max(0.0, (r_sq - N * out.total_mass * out.total_mass) / (N - 1.0)) / N);
  return out;
}

}  // namespace maxdep
