#include "nonlocal/spectra.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace nonlocal;

namespace {
Mat scalar(double a) {
  Mat m(1, 1);
  m << a;
  return m;
}
}  // namespace

TEST_SUITE("spectra") {

TEST_CASE("dense oracle agreement on small grids") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int n = 0; n < 8; ++n) {
    const int d = n % 2 ? 2 : 1;
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = (i == j ? 1.3 : 0.0) + 0.6 * unif(rng);
    const auto shape = n % 3 ? ProfileShape::epanechnikov : ProfileShape::indicator;
    const DeformationKernel k(Profile::normalized(shape, d), MapSpec::linear(a));
    const double radius = d == 1 ? 2.0 : 1.0;
    const double h = d == 1 ? 0.1 : 0.3;
    const Grid g = build_grid(d, radius, h, k.map());
    REQUIRE(g.size() <= 50);
    const DiscreteOperator op = assemble_operator(g, k);
    const double ref = oracle::dense_smallest(oracle::dense_operator(g, k, oracle::linear_reach(a, radius)));
    EigenOptions opt;
    opt.tol = 1e-12;
    const SpectralResult r = smallest_eigenpair(op, opt);
    CHECK(r.converged);
    CHECK(r.lambda_T == doctest::Approx(ref).epsilon(1e-8));
    CHECK(r.lambda1 == 2.0 * r.lambda_T);
    CHECK(r.residual <= opt.tol * r.lambda_max_bound);
    CHECK(r.eigvec.squaredNorm() * g.cell_volume() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("eigenvector positivity and Rayleigh consistency") {
  const DeformationKernel k(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::linear(scalar(2.0)));
  const Grid g = build_grid(1, 8.0, 0.05, k.map());
  const DiscreteOperator op = assemble_operator(g, k);
  EigenOptions opt;
  const SpectralResult r = smallest_eigenpair(op, opt);
  REQUIRE(r.converged);
  CHECK(r.eigvec.minCoeff() > 0.0);
  CHECK(r.lambda1 >= 0.171573 - 0.002);
  CHECK(std::abs(rayleigh_quotient(g, k, r.eigvec) - r.lambda1) <= 10.0 * opt.tol);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss;
  for (int n = 0; n < 20; ++n) {
    Vec u(r.eigvec.size());
    for (auto& x : u) x = gauss(rng);
    if (n % 2) u = r.eigvec + 0.01 * u;
    CHECK(rayleigh_quotient(g, k, u) >= r.lambda1 - 1e-10);
  }
  CHECK_THROWS_AS(rayleigh_quotient(g, k, Vec::Zero(r.eigvec.size())), ValidationError);
}

TEST_CASE("a = 2x at R = 16 lies between the closed form and a dense pilot at R = 4") {
  const DeformationKernel k(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::linear(scalar(2.0)));
  const Grid pilot = build_grid(1, 4.0, 0.05, k.map());
  const double upper =
      2.0 * oracle::dense_smallest(oracle::dense_operator(pilot, k, oracle::linear_reach(k.map().matrix(), 4.0)));
  const SpectralResult r = smallest_eigenpair(assemble_operator(build_grid(1, 16.0, 0.05, k.map()), k));
  REQUIRE(r.converged);
  MESSAGE("lambda1(B_16) = " << r.lambda1 << ", pilot lambda1(B_4) = " << upper);
  CHECK(r.lambda1 >= 0.1716);
  CHECK(r.lambda1 <= upper);
}

TEST_CASE("constant function quotient decreases with the radius") {
  const DeformationKernel k(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::identity(1));
  double prev = 1e300;
  for (double radius : {4.0, 8.0, 16.0}) {
    const Grid g = build_grid(1, radius, 0.05, k.map());
    const double q = rayleigh_quotient(g, k, Vec::Ones(static_cast<Eigen::Index>(g.size())));
    CHECK(q < prev);
    prev = q;
  }
}

TEST_CASE("tolerance is honoured and non-convergence is flagged") {
  const DeformationKernel k(Profile::normalized(ProfileShape::indicator, 1), MapSpec::linear(scalar(0.5)));
  const DiscreteOperator op = assemble_operator(build_grid(1, 4.0, 0.02, k.map()), k);
  EigenOptions loose;
  loose.tol = 1e-6;
  const SpectralResult r = smallest_eigenpair(op, loose);
  CHECK(r.converged);
  CHECK(r.residual <= 1e-6 * r.lambda_max_bound);
  EigenOptions starved;
  starved.maxiter = 3;
  starved.krylov_dim = 3;
  starved.tol = 1e-15;
  const SpectralResult s = smallest_eigenpair(op, starved);
  CHECK_FALSE(s.converged);
  CHECK(s.eigvec.size() == r.eigvec.size());
  EigenOptions bad;
  bad.tol = -1.0;
  CHECK_THROWS_AS(smallest_eigenpair(op, bad), ValidationError);
}

TEST_CASE("result is independent of the start seed") {
  const DeformationKernel k(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::linear(scalar(-2.0)));
  const DiscreteOperator op = assemble_operator(build_grid(1, 4.0, 0.05, k.map()), k);
  EigenOptions a, b;
  b.seed = 12345;
  const SpectralResult ra = smallest_eigenpair(op, a), rb = smallest_eigenpair(op, b);
  CHECK(ra.lambda1 == doctest::Approx(rb.lambda1).epsilon(1e-9));
  CHECK((ra.eigvec - rb.eigvec).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("radius sweep") {
  const DeformationKernel conv(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::identity(1));
  SweepOptions opt;
  opt.jobs = 2;
  const ConvergenceTable t = sweep_radius(conv, {2, 4, 8, 16}, SpacingRule::fixed(0.05), opt);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.all_converged());
  for (std::size_t i = 1; i < t.rows.size(); ++i) CHECK(t.rows[i].lambda1 < t.rows[i - 1].lambda1);
  for (const auto& row : t.rows) CHECK(row.min_eigvec > 0.0);
  CHECK(t.tail_exponent.has_value());
  CHECK(t.limit_method == "power-tail");
  CHECK(t.limit_estimate <= t.rows.back().lambda1);

  const ConvergenceTable one = sweep_radius(conv, {4}, SpacingRule::fraction(80));
  REQUIRE(one.rows.size() == 1);
  CHECK(one.limit_method == "single-row");
  CHECK(one.limit_estimate == one.rows[0].lambda1);
  CHECK(one.rows[0].spacing == doctest::Approx(0.05));

  std::ostringstream csv;
  one.write_csv(csv);
  CHECK(csv.str().rfind("R,h,lambda1,lambda_T,iterations,residual,converged\n", 0) == 0);

  CHECK_THROWS_AS(sweep_radius(conv, {4, 2}, SpacingRule::fixed(0.05)), ValidationError);
  CHECK_THROWS_AS(sweep_radius(conv, {}, SpacingRule::fixed(0.05)), ValidationError);
  CHECK_THROWS_AS(sweep_radius(conv, {0.1}, SpacingRule::fixed(0.05)), ValidationError);
}

TEST_CASE("sweep rows do not depend on the job count") {
  const DeformationKernel k(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::linear(scalar(2.0)));
  SweepOptions serial, parallel;
  parallel.jobs = 3;
  const auto a = sweep_radius(k, {2, 4, 8}, SpacingRule::fraction(80), serial);
  const auto b = sweep_radius(k, {2, 4, 8}, SpacingRule::fraction(80), parallel);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.rows[i].lambda1 == b.rows[i].lambda1);
}

TEST_CASE("power tail fit") {
  // lambda = 0.2 + 3 R^{-1.5}
  auto f = [](double r) { return 0.2 + 3.0 * std::pow(r, -1.5); };
  const auto fit = fit_power_tail({4, 8, 16}, {f(4), f(8), f(16)});
  REQUIRE(fit.has_value());
  CHECK(fit->limit == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(fit->exponent == doctest::Approx(1.5).epsilon(1e-8));
  CHECK(fit->coefficient == doctest::Approx(3.0).epsilon(1e-8));
  CHECK_FALSE(fit_power_tail({4, 8, 16}, {1.0, 2.0, 3.0}).has_value());
}

}  // TEST_SUITE
