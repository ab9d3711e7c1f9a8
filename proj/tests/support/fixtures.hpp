#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the estimators under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <maxdep/maxdep.hpp>

namespace fixtures {

/// Clayton copula sample by conditional inversion; tau = theta / (theta + 2).
inline maxdep::Dataset clayton(std::size_t n, double theta, std::uint64_t seed) {
  maxdep::Rng rng = maxdep::Rng::stream(seed, maxdep::StreamPurpose::fixture, 0);
  maxdep::RowMatrix m(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double w = rng.uniform();
    m(i, 0) = u;
    m(i, 1) = std::pow((std::pow(w, -theta / (1.0 + theta)) - 1.0) * std::pow(u, -theta) + 1.0, -1.0 / theta);
  }
  return maxdep::Dataset(std::move(m));
}

/// Uniform draws with no ties (continuous), used as tie-free data.
inline maxdep::RowMatrix uniform_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  maxdep::Rng rng = maxdep::Rng::stream(seed, maxdep::StreamPurpose::fixture, 1);
  maxdep::RowMatrix m(n, d);
  for (double& x : m.data()) x = rng.uniform();
  return m;
}

inline std::vector<double> random_simplex(std::size_t d, maxdep::Rng& rng) {
  std::vector<double> v(d);
  double sum = 0.0;
  for (double& x : v) sum += (x = rng.exponential());
  for (double& x : v) x /= sum;
  return v;
}

/// Ranks 1..n by direct counting (no ties assumed).
inline std::vector<double> brute_ranks(const maxdep::RowMatrix& x, std::size_t col) {
  std::vector<double> r(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < x.rows(); ++j) count += x(j, col) <= x(i, col);
    r[i] = static_cast<double>(count);
  }
  return r;
}

/// C_n(u) with pseudo-observations rank / n.
inline double brute_empirical_copula(const maxdep::RowMatrix& x, std::span<const double> u) {
  const std::size_t n = x.rows();
  std::vector<std::vector<double>> ranks;
  for (std::size_t d = 0; d < x.cols(); ++d) ranks.push_back(brute_ranks(x, d));
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool inside = true;
    for (std::size_t d = 0; d < x.cols(); ++d) inside = inside && ranks[d][i] / n <= u[d];
    count += inside;
  }
  return static_cast<double>(count) / n;
}

/// Exact value of the integral over (0,1) of C_n(u^v)/u du, where C_n uses
/// pseudo-observations rank/(n+1). Observation i contributes the length of
/// {t : u^{v_d} >= U_id for all d with v_d > 0} on the log scale, which is
/// -log of the largest threshold U_id^{1/v_d}.
inline double stepwise_integral(const maxdep::RowMatrix& x, std::span<const double> v) {
  const std::size_t n = x.rows();
  std::vector<std::vector<double>> ranks;
  for (std::size_t d = 0; d < x.cols(); ++d) ranks.push_back(brute_ranks(x, d));
  // Integrate piecewise: C_n(u^v)/u is a step function of log u. Collect all
  // breakpoints t = log U_id / v_d and sum count(t) * width on each piece.
  std::vector<double> breaks;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < x.cols(); ++d) {
      if (v[d] > 0.0) breaks.push_back(std::log(ranks[d][i] / (n + 1.0)) / v[d]);
    }
  }
  breaks.push_back(0.0);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double lo = breaks[b];
    const double hi = breaks[b + 1];
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool inside = true;
      for (std::size_t d = 0; d < x.cols(); ++d) {
        if (v[d] > 0.0) inside = inside && v[d] * mid >= std::log(ranks[d][i] / (n + 1.0));
      }
      count += inside;
    }
    total += (hi - lo) * static_cast<double>(count) / n;
  }
  return total;
}

/// Brute-force Kendall tau (no ties).
inline double kendall_tau(const maxdep::RowMatrix& x) {
  const std::size_t n = x.rows();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      s += ((x(i, 0) - x(j, 0)) * (x(i, 1) - x(j, 1)) > 0.0) ? 1.0 : -1.0;
    }
  }
  return 2.0 * s / (static_cast<double>(n) * (n - 1.0));
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
template <class Cdf>
double ks_distance(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    worst = std::max({worst, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return worst;
}

/// min ||A m - b||^2 subject to S m = 1, m >= 0 by enumerating every
/// support and solving the KKT system on it. Returns +inf if infeasible.
inline double enumerate_qp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& S) {
  const Eigen::Index K = A.cols();
  const Eigen::Index D = S.rows();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << K); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (mask & (1u << k)) idx.push_back(k);
    }
    const Eigen::Index p = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(p + D, p + D);
    Eigen::VectorXd rhs(p + D);
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index c = 0; c < p; ++c) kkt(a, c) = 2.0 * A.col(idx[a]).dot(A.col(idx[c]));
      for (Eigen::Index d = 0; d < D; ++d) {
        kkt(a, p + d) = S(d, idx[a]);
        kkt(p + d, a) = S(d, idx[a]);
      }
      rhs(a) = 2.0 * A.col(idx[a]).dot(b);
    }
    rhs.tail(D).setOnes();
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(K);
    bool feasible = true;
    for (Eigen::Index a = 0; a < p; ++a) {
      m(idx[a]) = sol(a);
      feasible = feasible && sol(a) >= -1e-12;
    }
    if (!feasible) continue;
    m = m.cwiseMax(0.0);
    if ((S * m - Eigen::VectorXd::Ones(D)).cwiseAbs().maxCoeff() > 1e-9) continue;
    best = std::min(best, (A * m - b).squaredNorm());
  }
  return best;
}

}  // namespace fixtures
