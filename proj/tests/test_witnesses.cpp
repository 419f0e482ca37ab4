#include "nonlocal/witnesses.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace nonlocal;

namespace {
Mat scalar(double a) {
  Mat m(1, 1);
  m << a;
  return m;
}
MonteCarloOptions mc(std::size_t n, std::uint64_t seed = 1) {
  MonteCarloOptions o;
  o.samples = n;
  o.seed = seed;
  return o;
}
void check_ceiling(const OverlapReport& r) { CHECK(r.measured_ratio <= 1.0 + 3.0 * r.std_error + 1e-12); }
}  // namespace

TEST_SUITE("witnesses") {

TEST_CASE("power-law ratios") {
  const double sigmas[] = {0.1, 0.25, 0.4, 0.49};
  double prev = 0.0;
  for (double s : sigmas) {
    const PowerLawWitness w({2.0}, s, 1.0);
    const OverlapReport r = measure_overlap(w);
    CHECK(r.analytic_ratio == doctest::Approx(std::pow(2.0, s - 0.5)).epsilon(1e-14));
    CHECK(std::abs(r.measured_ratio - r.analytic_ratio) < 1e-6);
    CHECK(r.measured_ratio > prev);
    check_ceiling(r);
    prev = r.measured_ratio;
  }
  CHECK(measure_overlap(PowerLawWitness({2.0}, 0.25, 1.0)).analytic_ratio == doctest::Approx(0.840896).epsilon(1e-6));
  CHECK(measure_overlap(PowerLawWitness({2.0}, 0.49, 1.0)).measured_ratio == doctest::Approx(0.993092).epsilon(1e-6));
  CHECK(prev > 0.95);
  const OverlapReport one = measure_overlap(PowerLawWitness({1.0}, 0.3, 1.0));
  CHECK(one.measured_ratio == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("power-law ratio by Simpson on a substituted integrand") {
  // x = u^{1/(1-2 sigma)} removes the endpoint singularity of phi^2.
  const double s = 0.25, e = 0.5;
  const double p = 1.0 / (1.0 - 2.0 * s);
  auto phi = [&](double x) { return x > 0 && x < 1 ? std::pow(x, -s) : 0.0; };
  const double norm = oracle::simpson([&](double u) {
    const double x = std::pow(u, p);
    return phi(x) * phi(x) * p * std::pow(u, p - 1);
  }, 1e-12, 1.0, 200000);
  const double cross = oracle::simpson([&](double u) {
    const double x = std::pow(u, p);
    return phi(x) * phi(2.0 * x) * p * std::pow(u, p - 1);
  }, 1e-12, std::pow(e, 1.0 / p), 200000);
  const OverlapReport r = measure_overlap(PowerLawWitness({2.0}, s, 1.0));
  CHECK(r.measured_ratio == doctest::Approx(std::sqrt(2.0) * cross / norm).epsilon(1e-4));
}

TEST_CASE("power-law in several dimensions and with negative entries") {
  const PowerLawWitness w({2.0, 0.5, -3.0}, 0.3, 0.5);
  const OverlapReport r = measure_overlap(w);
  CHECK(r.measured_ratio == doctest::Approx(w.analytic_ratio()).epsilon(1e-6));
  CHECK(w.analytic_ratio() == doctest::Approx(std::pow(2.0, -0.2) * std::pow(2.0, -0.2) * std::pow(3.0, -0.2)));
  check_ceiling(r);
  const PowerLawWitness neg({-2.0}, 0.25, 1.0);
  CHECK(measure_overlap(neg).measured_ratio == doctest::Approx(std::pow(2.0, -0.25)).epsilon(1e-6));
  Vec x(1);
  x << -0.3;
  CHECK(neg(x) > 0.0);
  const OverlapReport g = measure_overlap_grid(neg, 200000);
  CHECK(g.measured_ratio == doctest::Approx(std::pow(2.0, -0.25)).epsilon(2e-2));

  CHECK_THROWS_AS(PowerLawWitness({2.0}, 0.5, 1.0), ValidationError);
  CHECK_THROWS_AS(PowerLawWitness({2.0}, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(PowerLawWitness({2.0, 2.0}, 0.25, 0.9), ValidationError);
  CHECK_THROWS_AS(PowerLawWitness({0.0}, 0.25, 1.0), ValidationError);
}

TEST_CASE("expansive family analytic values and validation") {
  CHECK(ExpansiveWitness(scalar(2.0), 1.0).analytic_ratio() == doctest::Approx(0.707107).epsilon(1e-6));
  CHECK(ExpansiveWitness(scalar(2.0), 1.4).analytic_ratio() == doctest::Approx(0.989949).epsilon(1e-6));
  CHECK(ExpansiveWitness(scalar(2.0), 1e-3).analytic_ratio() < 1e-3);
  CHECK(ExpansiveWitness(scalar(0.5), 1.0).inverted());
  CHECK_THROWS_AS(ExpansiveWitness(scalar(2.0), 1.5), ValidationError);
  CHECK_THROWS_AS(ExpansiveWitness(Mat::Identity(2, 2), 0.5), ValidationError);
  Mat saddle(2, 2);
  saddle << 2.0, 0.0, 0.0, 0.5;
  CHECK_THROWS_AS(ExpansiveWitness(saddle, 0.5), ValidationError);
  const ExpansiveWitness w(scalar(2.0), 1.4);
  CHECK(std::pow(w.q(), w.j_max() + 1) < 1e-8);
  CHECK(w.truncated_ratio() <= w.analytic_ratio());
}

TEST_CASE("expansive Monte Carlo: ratio, ceiling and level measures") {
  const ExpansiveWitness w(scalar(2.0), 1.4);
  const ExpansiveOverlapReport r = measure_overlap(w, mc(100000, 3), 6);
  CHECK(std::abs(r.overlap.measured_ratio - r.truncated_ratio) < 4.0 * r.overlap.std_error);
  CHECK(r.overlap.std_error > 0.0);
  CHECK(r.overlap.std_error < 5e-3);
  check_ceiling(r.overlap);
  REQUIRE(r.level_measure.size() == 6);
  for (std::size_t j = 1; j < 6; ++j) {
    const double expect = r.level_measure[0] * std::pow(2.0, -static_cast<double>(j));
    // error of the ratio, dominated by the level-j error
    const double se = std::hypot(r.level_std_error[j], expect / r.level_measure[0] * r.level_std_error[0]);
    CHECK(std::abs(r.level_measure[j] - expect) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("expansive ratio increases with sigma") {
  double prev = 0.0;
  for (double s : {0.5, 1.0, 1.3}) {
    const auto r = measure_overlap(ExpansiveWitness(scalar(2.0), s), mc(50000, 5), 2);
    CHECK(r.overlap.measured_ratio > prev);
    CHECK(std::abs(r.overlap.measured_ratio - r.truncated_ratio) < 4.0 * r.overlap.std_error);
    prev = r.overlap.measured_ratio;
  }
}

TEST_CASE("expansive family in two dimensions and contracting input") {
  Mat a(2, 2);
  a << 1.5, 0.5, 0.0, 1.5;
  const ExpansiveWitness w(a, 0.9 * 1.5);
  const auto r = measure_overlap(w, mc(100000, 9), 3);
  CHECK(std::abs(r.overlap.measured_ratio - r.truncated_ratio) < 4.0 * r.overlap.std_error);
  check_ceiling(r.overlap);
  const ExpansiveWitness inv(scalar(0.5), 1.2);
  const auto ri = measure_overlap(inv, mc(100000, 9), 3);
  CHECK(std::abs(ri.overlap.measured_ratio - ri.truncated_ratio) < 4.0 * ri.overlap.std_error);
  // support stays in B_1
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int n = 0; n < 20000; ++n) {
    Vec x(2);
    x << unif(rng), unif(rng);
    if (x.norm() > 1.0) CHECK(w(x) == 0.0);
  }
}

TEST_CASE("Monte Carlo is reproducible and independent of jobs") {
  const ExpansiveWitness w(scalar(2.0), 1.4);
  MonteCarloOptions a = mc(20000, 11), b = mc(20000, 11), c = mc(20000, 12);
  b.jobs = 3;
  const auto ra = measure_overlap(w, a, 2), rb = measure_overlap(w, b, 2), rc = measure_overlap(w, c, 2);
  CHECK(ra.overlap.measured_ratio == rb.overlap.measured_ratio);
  CHECK(ra.overlap.std_error == rb.overlap.std_error);
  CHECK(ra.overlap.measured_ratio != rc.overlap.measured_ratio);
  const auto j = ra.overlap.to_json();
  for (const char* key : {"family", "params", "analytic_ratio", "measured_ratio", "stderr", "samples", "seed"})
    CHECK(j.contains(key));
}

TEST_CASE("jordan shear family") {
  double prev = 0.0;
  for (int k : {5, 9, 19}) {
    const JordanWitness w = JordanWitness::shear(k, 1.0, 2);
    CHECK(w.analytic_ratio() == doctest::Approx(static_cast<double>(k) / (k + 1)));
    CHECK(w.support_radius() <= 1.0);
    const JordanOverlapReport r = measure_overlap(w, mc(100000, 2));
    CHECK(r.multiply_covered == 0);
    CHECK(r.overlap.measured_ratio == doctest::Approx(w.analytic_ratio()).epsilon(1e-9));
    CHECK(r.overlap.measured_ratio > prev);
    check_ceiling(r.overlap);
    prev = r.overlap.measured_ratio;
  }
  CHECK(prev >= 0.95 - 1e-12);
  CHECK(JordanWitness::shear(99, 1.0, 2).analytic_ratio() == doctest::Approx(0.99));
  const JordanWitness neg = JordanWitness::shear(9, -1.0, 3);
  const auto rn = measure_overlap(neg, mc(100000, 4));
  CHECK(rn.multiply_covered == 0);
  CHECK(rn.overlap.measured_ratio == doctest::Approx(0.9).epsilon(1e-9));
  CHECK_THROWS_AS(JordanWitness::shear(4, 1.0, 2), ValidationError);
  CHECK_THROWS_AS(JordanWitness::shear(9, 0.5, 2), ValidationError);
  CHECK_THROWS_AS(JordanWitness::shear(9, 1.0, 1), ValidationError);
}

TEST_CASE("jordan images are disjoint on random points") {
  // points drawn inside A^j S; membership in A^l S tested through A^{-l} built here
  for (const JordanWitness& w : {JordanWitness::shear(9, 1.0, 2), JordanWitness::rotation(9, 1.0, 4)}) {
    const int d = w.dim();
    const int k = w.k();
    std::vector<Mat> fwd(k + 1), inv(k + 1);
    fwd[0] = inv[0] = Mat::Identity(d, d);
    const Mat ainv = w.matrix().inverse();
    for (int j = 1; j <= k; ++j) {
      fwd[j] = w.matrix() * fwd[j - 1];
      inv[j] = ainv * inv[j - 1];
    }
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    long overlaps = 0;
    for (int n = 0; n < 100000; ++n) {
      Vec u(d);
      for (auto& c : u) c = gauss(rng);
      u *= w.ball_radius() * std::pow(unif(rng), 1.0 / d) / u.norm();
      const Vec x = fwd[n % (k + 1)] * (w.center() + u);
      CHECK(x.norm() <= 1.0);
      int inside = 0;
      for (int l = 0; l <= k; ++l)
        if ((inv[l] * x - w.center()).norm() <= w.ball_radius()) ++inside;
      if (inside != 1) ++overlaps;
      CHECK(w(x) == doctest::Approx(1.0));
    }
    CHECK(overlaps == 0);
  }
}

TEST_CASE("jordan rotation family") {
  const JordanWitness w = JordanWitness::rotation(9, 1.0, 4);
  const auto r = measure_overlap(w, mc(100000, 6));
  CHECK(r.multiply_covered == 0);
  CHECK(r.overlap.measured_ratio == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(JordanWitness::rotation(7, 1.0, 4).analytic_ratio() == doctest::Approx(7.0 / 8.0));
  const JordanWitness flat = JordanWitness::rotation(7, 0.0, 4);
  const auto rf = measure_overlap(flat, mc(50000, 6));
  CHECK(rf.multiply_covered == 0);
  CHECK(rf.overlap.measured_ratio == doctest::Approx(7.0 / 8.0).epsilon(1e-9));
  CHECK_THROWS_AS(JordanWitness::rotation(6, 1.0, 4), ValidationError);
  CHECK_THROWS_AS(JordanWitness::rotation(9, 1.0, 5), ValidationError);
}

TEST_CASE("ball witness") {
  const double t = 0.7;
  Mat q(2, 2);
  q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  const BallWitness b(q);
  const OverlapReport r = measure_overlap_grid(b, 400);
  CHECK(r.measured_ratio == doctest::Approx(1.0).epsilon(1e-2));
  check_ceiling(r);
  CHECK_THROWS_AS(BallWitness(2.0 * q), ValidationError);
}

TEST_CASE("composed witness") {
  // C = 1: the composed function is the block witness itself
  auto block = std::make_shared<PowerLawWitness>(std::vector<double>{2.0}, 0.25, 1.0);
  const ComposedWitness same(Mat::Identity(1, 1), {block});
  CHECK(same.scale() == doctest::Approx(1.0));
  CHECK(same.prefactor() == doctest::Approx(1.0));
  for (double x : {-0.5, 0.1, 0.3, 0.9}) {
    Vec p(1);
    p << x;
    CHECK(same(p) == (*block)(p));
  }

  // A = C diag(2, 1) C^{-1}
  Mat c(2, 2);
  c << 1.0, 0.5, 0.0, 1.0;
  std::vector<std::shared_ptr<const Witness>> blocks{block_witness(JordanBlock::real(2.0, 1), 0.9, 9),
                                                     block_witness(JordanBlock::real(1.0, 1), 0.9, 9)};
  const ComposedWitness w(c, blocks);
  Mat j(2, 2);
  j << 2.0, 0.0, 0.0, 1.0;
  CHECK((w.matrix() - c * j * c.inverse()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(w.analytic_ratio() == doctest::Approx(0.9));
  // unit L2 norm preserved: int Phi^2 = int phi^2 (Monte Carlo over B_1 vs the block product)
  const auto r = measure_overlap_uniform(w, mc(400000, 7));
  CHECK(std::abs(r.measured_ratio - 0.9) < 4.0 * r.std_error + 5e-3);
  check_ceiling(r);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int n = 0; n < 20000; ++n) {
    Vec x(2);
    x << unif(rng), unif(rng);
    if (x.norm() > 1.0) CHECK(w(x) == 0.0);
  }
  CHECK_THROWS_AS(ComposedWitness(Mat::Identity(3, 3), blocks), ValidationError);
}

TEST_CASE("ratio chain from witnesses dominates the closed form") {
  for (double s : {0.25, 0.4, 0.49}) {
    const auto r = measure_overlap(PowerLawWitness({2.0}, s, 1.0));
    CHECK(upper_bound_from_ratio(2.0, 1.0, r.measured_ratio) >= closed_form_linear(scalar(2.0), 1.0));
  }
}

}  // TEST_SUITE
