#include "nonlocal/kernel.hpp"
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
Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}
}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("profile values at sample points") {
  const Profile epa = Profile::normalized(ProfileShape::epanechnikov, 1);
  CHECK(epa(v1(0.0)) == doctest::Approx(0.75).epsilon(1e-14));
  const Profile ind = Profile::normalized(ProfileShape::indicator, 1);
  CHECK(ind(v1(0.5)) == doctest::Approx(0.5).epsilon(1e-14));
  for (auto shape : {ProfileShape::indicator, ProfileShape::epanechnikov, ProfileShape::bump}) {
    for (int d = 1; d <= 3; ++d) {
      const Profile p = Profile::normalized(shape, d);
      Vec z = Vec::Zero(d);
      z(0) = 1.5;
      CHECK(p(z) == 0.0);
      z(0) = 1.0;
      CHECK(p(z) == 0.0);
    }
  }
  CHECK_THROWS_AS(epa(Vec::Zero(2)), ValidationError);
}

TEST_CASE("profile masses and moments") {
  CHECK(Profile::scaled(ProfileShape::indicator, 1, 1.0).mass() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(Profile::scaled(ProfileShape::epanechnikov, 2, 1.0).mass() ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));
  CHECK(Profile::normalized(ProfileShape::epanechnikov, 1).second_moment() == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(Profile::normalized(ProfileShape::indicator, 1).second_moment() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (int d = 1; d <= 3; ++d) {
    CHECK(Profile::normalized(ProfileShape::epanechnikov, d).mass() == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(Profile::scaled(ProfileShape::indicator, 1, 0.0), ValidationError);
  CHECK_THROWS_AS(Profile::normalized(ProfileShape::bump, 1, -1.0), ValidationError);
}

TEST_CASE("stored mass and moment agree with radial quadrature") {
  // int psi = |S^{d-1}| int_0^1 base(r) r^{d-1} dr
  auto base = [](ProfileShape s, double r) {
    if (r >= 1.0) return 0.0;
    switch (s) {
      case ProfileShape::indicator: return 1.0;
      case ProfileShape::epanechnikov: return 1.0 - r * r;
      case ProfileShape::bump: return std::exp(-1.0 / (1.0 - r * r));
    }
    return 0.0;
  };
  for (auto shape : {ProfileShape::indicator, ProfileShape::epanechnikov, ProfileShape::bump}) {
    for (int d = 1; d <= 3; ++d) {
      const Profile p = Profile::scaled(shape, d, 1.0);
      const double area = d == 1 ? 2.0 : (d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
      const double m = area * oracle::simpson([&](double r) { return base(shape, r) * std::pow(r, d - 1); }, 0.0,
                                              1.0 - 1e-15, 200000);
      const double mom = area * oracle::simpson([&](double r) { return base(shape, r) * std::pow(r, d + 1); },
                                                0.0, 1.0 - 1e-15, 200000);
      CHECK(p.mass() == doctest::Approx(m).epsilon(1e-6));
      CHECK(p.second_moment() == doctest::Approx(mom).epsilon(1e-6));
    }
  }
}

TEST_CASE("kernel values") {
  const DeformationKernel conv(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::identity(1));
  CHECK(conv(v1(0.0), v1(0.0)) == doctest::Approx(1.5).epsilon(1e-14));
  const DeformationKernel dbl(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::linear(scalar(2.0)));
  CHECK(dbl(v1(0.2), v1(3.0)) == 0.0);
  // both terms contribute c = 1/2 here: |y - 2x| = 0.1, |x - 2y| = 0.7
  const DeformationKernel ind(Profile::normalized(ProfileShape::indicator, 1), MapSpec::linear(scalar(2.0)));
  CHECK(ind(v1(0.3), v1(0.5)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(conv(Vec::Zero(2), Vec::Zero(2)), ValidationError);
}

TEST_CASE("kernel symmetry, sign and support on random pairs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  Mat a(2, 2);
  a << 1.3, 0.4, -0.2, 0.9;
  const DeformationKernel k(Profile::normalized(ProfileShape::epanechnikov, 2), MapSpec::linear(a));
  const DeformationKernel k1(Profile::normalized(ProfileShape::indicator, 1), MapSpec::scaled_sine(1, 2.0, 0.25));
  int support_checked = 0;
  for (int n = 0; n < 10000; ++n) {
    Vec x(2), y(2);
    x << unif(rng), unif(rng);
    y << unif(rng), unif(rng);
    const double kxy = k(x, y);
    CHECK(kxy == k(y, x));
    CHECK(kxy >= 0.0);
    if ((y - a * x).norm() >= 1.0 && (x - a * y).norm() >= 1.0) {
      CHECK(kxy == 0.0);
      ++support_checked;
    }
    const Vec s = v1(unif(rng)), t = v1(unif(rng));
    CHECK(k1(s, t) == k1(t, s));
  }
  CHECK(support_checked > 1000);
}

TEST_CASE("mass at a point") {
  const DeformationKernel dbl(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::linear(scalar(2.0)));
  for (double x : {-3.0, 0.0, 0.7, 10.0}) CHECK(dbl.mass_at(v1(x)) == doctest::Approx(1.5).epsilon(1e-12));
  const DeformationKernel conv(Profile::normalized(ProfileShape::epanechnikov, 2), MapSpec::identity(2));
  CHECK(conv.mass_at(Vec::Zero(2)) == doctest::Approx(2.0).epsilon(1e-12));

  const DeformationKernel sine(Profile::normalized(ProfileShape::epanechnikov, 1), MapSpec::scaled_sine(1, 2.0, 0.25));
  const double m0 = sine.mass_at(v1(0.0));
  CHECK(m0 >= 1.0 + 1.0 / 2.25);
  CHECK(m0 <= 1.0 + 1.0 / 1.75);
  // oracle: int psi(z) |J_{a^{-1}}|(z) dz with J_{a^{-1}}(z) = 1 / a'(a^{-1}(z))
  const MapSpec& map = sine.map();
  const double ref = 1.0 + oracle::simpson([&](double z) {
                       return sine.profile()(v1(-z)) * map.jacobian_inverse_abs(v1(z));
                     }, -1.0, 1.0, 4000);
  CHECK(m0 == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("linear maps") {
  Mat a(2, 2);
  a << 2.0, 1.0, 0.0, 0.5;
  const MapSpec m = MapSpec::linear(a);
  CHECK(m.abs_det() == doctest::Approx(1.0).epsilon(1e-14));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int n = 0; n < 100; ++n) {
    Vec y(2);
    y << g(rng), g(rng);
    CHECK((m.apply(m.apply_inverse(y)) - y).norm() < 1e-10);
    CHECK(m.jacobian_inverse_abs(y) == doctest::Approx(1.0 / m.abs_det()));
  }
  Mat sing(2, 2);
  sing << 1.0, 2.0, 2.0, 4.0;
  CHECK_THROWS_AS(MapSpec::linear(sing), ValidationError);
}

TEST_CASE("jordan data is validated") {
  Mat c(2, 2);
  c << 1.0, 1.0, 0.0, 1.0;
  JordanData jd;
  jd.transform = c;
  jd.blocks = {JordanBlock::real(2.0, 1), JordanBlock::real(0.5, 1)};
  const Mat a = c * jd.block_diagonal() * c.inverse();
  CHECK_NOTHROW(MapSpec::linear(a, jd));
  Mat wrong = a;
  wrong(0, 1) += 1e-6;
  CHECK_THROWS_AS(MapSpec::linear(wrong, jd), ValidationError);

  const JordanBlock rot = JordanBlock::rotation(std::cos(1.0), std::sin(1.0), 2);
  CHECK(rot.dim() == 4);
  CHECK(rot.modulus() == doctest::Approx(1.0));
  const Mat r = rot.matrix();
  CHECK(r(0, 2) == 1.0);
  CHECK(r(1, 3) == 1.0);
  CHECK(r(0, 1) == doctest::Approx(std::sin(1.0)));
}

TEST_CASE("diffeomorphism bounds are checked by sampling") {
  const MapSpec s = MapSpec::scaled_sine(1, 2.0, 0.25);
  CHECK(s.jac_sup() == doctest::Approx(1.0 / 1.75));
  CHECK(s.jac_inf() == doctest::Approx(1.0 / 2.25));
  CHECK_FALSE(s.homogeneous());
  for (double x = -5.0; x <= 5.0; x += 0.01) {
    const double j = s.jacobian_inverse_abs(v1(x));
    CHECK(j >= s.jac_inf() - 1e-14);
    CHECK(j <= s.jac_sup() + 1e-14);
    CHECK(std::abs(s.apply(s.apply_inverse(v1(x)))(0) - x) < 1e-10);
  }
  DiffeoSpec bad;
  bad.name = "bad";
  bad.forward = [](const Vec& x) { return Vec(2.0 * x); };
  bad.inverse = [](const Vec& y) { return Vec(0.5 * y); };
  bad.jacobian_inverse_abs = [](const Vec&) { return 0.5; };
  bad.jac_sup = 0.4;
  bad.jac_inf = 0.3;
  CHECK_THROWS_AS(MapSpec::diffeo(bad), ValidationError);
  bad.jac_sup = 0.5;
  bad.jac_inf = 0.5;
  bad.forward_lipschitz = 2.0;
  bad.inverse_lipschitz = 0.5;
  CHECK_NOTHROW(MapSpec::diffeo(bad));
  CHECK_THROWS_AS(MapSpec::scaled_sine(1, 1.0, 1.0), ValidationError);
}

}  // TEST_SUITE
