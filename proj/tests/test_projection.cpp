#include <catch_amalgamated.hpp>

#include <cmath>

#include <maxdep/maxdep.hpp>

#include "support/fixtures.hpp"

using namespace maxdep;
using Catch::Approx;

namespace {

std::vector<double> surface(const SimplexGrid& grid, const std::function<double(std::span<const double>)>& f) {
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = f(grid.point(j));
  return out;
}

double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

TEST_CASE("nnls matches a known solution", "[projection]") {
  Eigen::MatrixXd A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd b(3);
  b << 2, -1, 1;
  const NnlsResult r = nnls(A, b);
  CHECK(r.converged);
  CHECK(r.x(0) == Approx(1.5));
  CHECK(r.x(1) == Approx(0.0).margin(1e-15));
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("independence pilot projects to the vertex measure", "[projection]") {
  for (std::size_t D : {2u, 3u}) {
    const SimplexGrid pilot_grid(D, 6);
    const SimplexGrid atoms(D, 4);
    const auto result =
        project_pickands(pilot_grid.points(), std::vector<double>(pilot_grid.size(), 1.0), atoms);
    CHECK(result.objective <= 1e-20);
    CHECK(result.measure.size() == D);
    for (std::size_t k = 0; k < result.measure.size(); ++k) {
      CHECK(max_of(result.measure.atom(k)) == 1.0);
      CHECK(result.measure.mass(k) == Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("comonotone pilot projects to the barycenter atom", "[projection]") {
  for (std::size_t D : {2u, 3u}) {
    const SimplexGrid pilot_grid(D, 6);
    const SimplexGrid atoms(D, D == 2 ? 4 : 6);
    const auto result = project_pickands(pilot_grid.points(), surface(pilot_grid, max_of), atoms);
    CHECK(result.objective <= 1e-20);
    CHECK(result.measure.size() == 1);
    CHECK(result.measure.mass(0) == Approx(static_cast<double>(D)).margin(1e-9));
    CHECK(result.measure.atom(0)[0] == Approx(1.0 / D));
  }
}

TEST_CASE("exact logistic surface is recovered", "[projection]") {
  const SimplexGrid grid(2, 100);
  const auto exact = surface(grid, [](std::span<const double> v) { return logistic_pickands(2.0, v); });
  const auto result = project_pickands(grid.points(), exact, grid);
  double sup = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) sup = std::max(sup, std::abs(result.measure.pickands(grid.point(j)) - exact[j]));
  CHECK(sup < 0.01);
  CHECK(result.constraint_residual <= 1e-6);
  CHECK(result.kkt_satisfied);
}

TEST_CASE("projection output is valid, monotone and idempotent", "[projection]") {
  Rng rng(5);
  for (std::size_t D : {2u, 3u}) {
    const std::size_t k = D == 2 ? 30 : 10;
    const auto pobs = pseudo_observations(sample_logistic_ev(150, D, 1.4, 60 + D), RankScaling::over_n_plus_1);
    const auto pilot = estimate_surface(pobs, k, EstimatorMethod::pickands, false);
    const SimplexGrid atoms(D, k);
    const auto result = project_pickands(pilot, atoms);
    CHECK(result.measure.moment_residual() <= 1e-6);
    for (double m : result.measure.masses()) CHECK(m >= 0.0);
    CHECK(result.objective >= 0.0);
    for (std::size_t i = 1; i < result.objective_trace.size(); ++i) {
      CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] * (1 + 1e-12) + 1e-300);
    }
    const auto A = result.as_function();
    for (int s = 0; s < 100; ++s) {
      const auto x = fixtures::random_simplex(D, rng);
      const auto y = fixtures::random_simplex(D, rng);
      const double t = rng.uniform();
      std::vector<double> z(D);
      for (std::size_t d = 0; d < D; ++d) z[d] = t * x[d] + (1 - t) * y[d];
      REQUIRE(A(z) <= t * A(x) + (1 - t) * A(y) + 1e-10);
      REQUIRE(A(x) >= max_of(x) - 1e-12);
      REQUIRE(A(x) <= 1.0 + 1e-12);
    }
    std::vector<double> again(pilot.grid.size());
    for (std::size_t j = 0; j < again.size(); ++j) again[j] = A(pilot.grid.point(j));
    const auto second = project_pickands(pilot.grid.points(), again, atoms);
    CHECK(second.objective <= 1e-10);
  }
}

TEST_CASE("degenerate pilots are clipped", "[projection]") {
  const SimplexGrid grid(2, 10);
  const auto result = project_pickands(grid.points(), std::vector<double>(grid.size(), 0.0), grid);
  CHECK(result.clipped == grid.size());
  // Clipping to max(v) makes the comonotone function the exact target.
  CHECK(result.objective <= 1e-20);
  const auto negative = project_pickands(grid.points(), std::vector<double>(grid.size(), -3.0), grid);
  CHECK(negative.clipped == grid.size());
}

TEST_CASE("user weights", "[projection]") {
  const SimplexGrid grid(2, 8);
  auto pilot = surface(grid, [](std::span<const double> v) { return logistic_pickands(3.0, v); });
  pilot[4] = 0.9;  // an outlier at the barycenter
  std::vector<double> weights(grid.size(), 1.0);
  weights[4] = 0.0;
  const auto ignored = project_pickands(grid.points(), pilot, grid, weights);
  const auto uniform = project_pickands(grid.points(), pilot, grid);
  const double truth = logistic_pickands(3.0, SimplexPoint::barycenter(2));
  CHECK(std::abs(ignored.measure.pickands(grid.point(4)) - truth) <
        std::abs(uniform.measure.pickands(grid.point(4)) - truth));
  CHECK_THROWS_AS(project_pickands(grid.points(), pilot, grid, std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(project_pickands(grid.points(), std::vector<double>{1.0}, grid), std::invalid_argument);
  CHECK_THROWS_AS(project_pickands(grid.points(), pilot, SimplexGrid(3, 2)), std::invalid_argument);
}

TEST_CASE("QP solver agrees with enumeration on tiny instances", "[projection]") {
  Rng rng(8);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t D = 2 + rep % 2;
    const std::size_t K = std::min<std::size_t>(6, D + 1 + rep % 4);
    const std::size_t J = 3 + rep % 6;
    std::vector<std::vector<double>> atoms;
    std::vector<Eigen::Index> vertices;
    for (std::size_t d = 0; d < D; ++d) {
      std::vector<double> e(D, 0.0);
      e[d] = 1.0;
      vertices.push_back(static_cast<Eigen::Index>(atoms.size()));
      atoms.push_back(e);
    }
    while (atoms.size() < K) atoms.push_back(fixtures::random_simplex(D, rng));
    Eigen::MatrixXd A(J, K);
    Eigen::VectorXd b(J);
    Eigen::MatrixXd S(D, K);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t d = 0; d < D; ++d) S(d, k) = atoms[k][d];
    }
    for (std::size_t j = 0; j < J; ++j) {
      const auto v = fixtures::random_simplex(D, rng);
      for (std::size_t k = 0; k < K; ++k) {
        double best = 0.0;
        for (std::size_t d = 0; d < D; ++d) best = std::max(best, v[d] * atoms[k][d]);
        A(j, k) = best;
      }
      b(j) = 0.2 + rng.uniform();  // not necessarily inside [max v, 1]
    }
    const auto qp = solve_spectral_qp(A, b, S, vertices);
    REQUIRE(qp.objective == Approx(fixtures::enumerate_qp(A, b, S)).margin(1e-9));
    REQUIRE(qp.constraint_residual <= 1e-9);
  }
}

TEST_CASE("parametric fit self-recovery", "[projection]") {
  const SimplexGrid grid(2, 50);
  const auto logistic = surface(grid, [](std::span<const double> v) { return logistic_pickands(2.0, v); });
  const auto fit = fit_parametric_min_distance(grid.points(), logistic, ParametricFamily::logistic);
  CHECK(fit.parameter == Approx(2.0).margin(1e-4));
  CHECK(fit.objective <= 1e-12);
  CHECK_FALSE(fit.at_boundary);

  const auto flat = fit_parametric_min_distance(grid.points(), std::vector<double>(grid.size(), 1.0),
                                                ParametricFamily::logistic);
  CHECK(flat.parameter == 1.0);
  CHECK(flat.at_boundary);

  const auto hr = surface(grid, [](std::span<const double> v) { return husler_reiss_pickands(1.0, v); });
  const auto hr_fit = fit_parametric_min_distance(grid.points(), hr, ParametricFamily::husler_reiss);
  CHECK(hr_fit.parameter == Approx(1.0).margin(1e-3));

  const SimplexGrid grid3(3, 10);
  const auto l3 = surface(grid3, [](std::span<const double> v) { return logistic_pickands(3.5, v); });
  CHECK(fit_parametric_min_distance(grid3.points(), l3, ParametricFamily::logistic).parameter ==
        Approx(3.5).margin(1e-4));
}

TEST_CASE("parametric fit errors and bounds", "[projection]") {
  const SimplexGrid grid(2, 10);
  const std::vector<double> pilot(grid.size(), 0.9);
  CHECK_THROWS_AS(fit_parametric_min_distance(grid.points(), pilot, ParametricFamily::logistic, ParameterBounds{3, 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      fit_parametric_min_distance(grid.points(), pilot, ParametricFamily::logistic, ParameterBounds{0.5, 2}),
      std::invalid_argument);
  CHECK_THROWS_AS(fit_parametric_min_distance(SimplexGrid(3, 4).points(), std::vector<double>(15, 0.9),
                                              ParametricFamily::husler_reiss),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_parametric_min_distance(grid.points(), std::vector<double>{0.9}, ParametricFamily::logistic),
                  std::invalid_argument);
  const auto capped = fit_parametric_min_distance(
      grid.points(), surface(grid, [](std::span<const double> v) { return logistic_pickands(8.0, v); }),
      ParametricFamily::logistic, ParameterBounds{1.0, 4.0});
  CHECK(capped.parameter == 4.0);
  CHECK(capped.at_boundary);
  CHECK(parse_family("logistic") == ParametricFamily::logistic);
  CHECK(parse_family("husler_reiss") == ParametricFamily::husler_reiss);
  CHECK_THROWS_AS(parse_family("gumbel"), std::invalid_argument);
}
