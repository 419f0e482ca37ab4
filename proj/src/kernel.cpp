#include "nonlocal/kernel.hpp"

#include "nonlocal/quadrature.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace nonlocal {

std::string to_string(ProfileShape shape) {
  switch (shape) {
    case ProfileShape::indicator: return "indicator";
    case ProfileShape::epanechnikov: return "epanechnikov";
    case ProfileShape::bump: return "bump";
  }
  return "unknown";
}

ProfileShape profile_shape_from_string(const std::string& name) {
  if (name == "indicator") return ProfileShape::indicator;
  if (name == "epanechnikov") return ProfileShape::epanechnikov;
  if (name == "bump") return ProfileShape::bump;
  throw ValidationError("unknown profile shape '" + name + "'");
}

namespace {

double bump_radial(double r) {
  const double s = 1.0 - r * r;
  return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

// Integral over the unit ball of base(|z|) |z|^power.
double bump_radial_moment(int dim, int power) {
  auto integrand = [&](double r) { return bump_radial(r) * std::pow(r, dim - 1 + power); };
  return unit_sphere_area(dim) * quadrature::tanh_sinh(integrand, 0.0, 1.0, 1e-14).value;
}

}  // namespace

Profile::Profile(ProfileShape shape, int dim, double coefficient)
    : shape_(shape), dim_(dim), coefficient_(coefficient) {
  require(dim >= 1, "profile dimension must be positive");
  require(std::isfinite(coefficient) && coefficient > 0.0,
          "profile coefficient must be positive and finite (zero-mass profiles are degenerate)");
  const double d = dim;
  const double ball = unit_ball_volume(dim);
  switch (shape) {
    case ProfileShape::indicator:
      base_mass_ = ball;
      base_moment_ = ball * d / (d + 2.0);
      break;
    case ProfileShape::epanechnikov:
      base_mass_ = ball * 2.0 / (d + 2.0);
      base_moment_ = ball * 2.0 * d / ((d + 2.0) * (d + 4.0));
      break;
    case ProfileShape::bump:
      base_mass_ = bump_radial_moment(dim, 0);
      base_moment_ = bump_radial_moment(dim, 2);
      break;
  }
}

Profile Profile::normalized(ProfileShape shape, int dim, double mass) {
  require(std::isfinite(mass) && mass > 0.0, "profile mass must be positive");
  const Profile unit(shape, dim, 1.0);
  return Profile(shape, dim, mass / unit.base_mass_);
}

Profile Profile::scaled(ProfileShape shape, int dim, double coefficient) {
  return Profile(shape, dim, coefficient);
}

double Profile::eval(const double* z) const {
  double r2 = 0.0;
  for (int k = 0; k < dim_; ++k) r2 += z[k] * z[k];
  if (r2 >= 1.0) return 0.0;
  switch (shape_) {
    case ProfileShape::indicator: return coefficient_;
    case ProfileShape::epanechnikov: return coefficient_ * (1.0 - r2);
    case ProfileShape::bump: return coefficient_ * std::exp(-1.0 / (1.0 - r2));
  }
  return 0.0;
}

double Profile::operator()(std::span<const double> z) const {
  require(z.size() == static_cast<std::size_t>(dim_), "profile evaluated at a point of the wrong dimension");
  return eval(z.data());
}

double Profile::sup() const {
  return shape_ == ProfileShape::bump ? coefficient_ * std::exp(-1.0) : coefficient_;
}

// ---------------------------------------------------------------------------

JordanBlock JordanBlock::real(double lambda, int size) {
  require(size >= 1, "Jordan block size must be positive");
  require(lambda != 0.0, "Jordan block eigenvalue must be nonzero");
  return JordanBlock{Kind::real, lambda, 0.0, size};
}

JordanBlock JordanBlock::rotation(double alpha, double beta, int size) {
  require(size >= 1, "Jordan block size must be positive");
  require(alpha != 0.0 || beta != 0.0, "rotation block must be invertible");
  return JordanBlock{Kind::complex, alpha, beta, size};
}

Mat JordanBlock::matrix() const {
  const int n = dim();
  Mat m = Mat::Zero(n, n);
  if (kind == Kind::real) {
    for (int i = 0; i < size; ++i) {
      m(i, i) = lambda;
      if (i + 1 < size) m(i, i + 1) = 1.0;
    }
    return m;
  }
  for (int b = 0; b < size; ++b) {
    const int o = 2 * b;
    m(o, o) = lambda;
    m(o, o + 1) = beta;
    m(o + 1, o) = -beta;
    m(o + 1, o + 1) = lambda;
    if (b + 1 < size) {
      m(o, o + 2) = 1.0;
      m(o + 1, o + 3) = 1.0;
    }
  }
  return m;
}

double JordanBlock::modulus() const {
  return kind == Kind::real ? std::abs(lambda) : std::hypot(lambda, beta);
}

int JordanData::dim() const {
  int d = 0;
  for (const auto& b : blocks) d += b.dim();
  return d;
}

Mat JordanData::block_diagonal() const {
  const int d = dim();
  Mat j = Mat::Zero(d, d);
  int offset = 0;
  for (const auto& b : blocks) {
    j.block(offset, offset, b.dim(), b.dim()) = b.matrix();
    offset += b.dim();
  }
  return j;
}

// ---------------------------------------------------------------------------

MapSpec MapSpec::identity(int dim) {
  require(dim >= 1, "map dimension must be positive");
  return linear(Mat::Identity(dim, dim));
}

MapSpec MapSpec::linear(Mat matrix, std::optional<JordanData> jordan) {
  require(matrix.rows() >= 1 && matrix.rows() == matrix.cols(), "linear map matrix must be square and nonempty");
  require(matrix.allFinite(), "linear map matrix has non-finite entries");
  MapSpec map;
  map.kind_ = Kind::linear;
  map.dim_ = static_cast<int>(matrix.rows());
  map.name_ = "linear";

  Eigen::JacobiSVD<Mat> svd(matrix);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 1e-14 * smax)) throw ValidationError("linear map matrix is singular");
  map.matrix_ = std::move(matrix);
  map.inverse_ = map.matrix_.inverse();
  map.abs_det_ = std::abs(map.matrix_.determinant());
  map.jac_sup_ = map.jac_inf_ = 1.0 / map.abs_det_;
  map.forward_lipschitz_ = smax;
  map.inverse_lipschitz_ = 1.0 / smin;

  if (jordan) {
    const int d = map.dim_;
    require(jordan->dim() == d, "Jordan blocks do not partition the map dimension");
    require(jordan->transform.rows() == d && jordan->transform.cols() == d,
            "Jordan transform has the wrong shape");
    Eigen::FullPivLU<Mat> lu(jordan->transform);
    require(lu.isInvertible(), "Jordan transform is singular");
    const Mat rebuilt = jordan->transform * jordan->block_diagonal() * lu.inverse();
    const double err = (rebuilt - map.matrix_).cwiseAbs().maxCoeff();
    if (err > 1e-10) {
      throw ValidationError("Jordan data does not reproduce the matrix (max entry error " + std::to_string(err) + ")");
    }
    map.jordan_ = std::move(jordan);
  }
  return map;
}

MapSpec MapSpec::diffeo(DiffeoSpec spec) {
  require(spec.dim >= 1, "diffeomorphism dimension must be positive");
  require(spec.forward && spec.inverse && spec.jacobian_inverse_abs,
          "diffeomorphism requires forward, inverse and Jacobian callables");
  require(spec.jac_inf > 0.0 && spec.jac_inf <= spec.jac_sup && std::isfinite(spec.jac_sup),
          "diffeomorphism Jacobian bounds must satisfy 0 < m <= M < inf");
  require(spec.forward_lipschitz > 0.0 && spec.inverse_lipschitz > 0.0,
          "diffeomorphism Lipschitz bounds must be positive");
  MapSpec map;
  map.kind_ = Kind::diffeo;
  map.dim_ = spec.dim;
  map.name_ = spec.name.empty() ? "diffeo" : spec.name;
  map.jac_sup_ = spec.jac_sup;
  map.jac_inf_ = spec.jac_inf;
  map.forward_lipschitz_ = spec.forward_lipschitz;
  map.inverse_lipschitz_ = spec.inverse_lipschitz;
  map.diffeo_ = std::move(spec);
  map.validate_samples();
  return map;
}

namespace {

// Solves alpha x + beta sin(x) = y for |beta| < |alpha| (strictly monotone).
double invert_scaled_sine(double alpha, double beta, double y) {
  double lo = (y - std::abs(beta)) / alpha;
  double hi = (y + std::abs(beta)) / alpha;
  if (lo > hi) std::swap(lo, hi);
  const double sign = alpha > 0.0 ? 1.0 : -1.0;
  double x = y / alpha;
  for (int it = 0; it < 100; ++it) {
    const double g = alpha * x + beta * std::sin(x) - y;
    if (g == 0.0) return x;
    if (sign * g > 0.0) hi = x; else lo = x;
    const double step = g / (alpha + beta * std::cos(x));
    double next = x - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-16 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace

MapSpec MapSpec::scaled_sine(int dim, double alpha, double beta) {
  require(std::abs(beta) < std::abs(alpha), "scaled sine map requires |beta| < |alpha|");
  DiffeoSpec spec;
  spec.name = "scaled_sine";
  spec.dim = dim;
  spec.forward = [alpha, beta](const Vec& x) {
    return Vec(alpha * x.array() + beta * x.array().sin());
  };
  spec.inverse = [alpha, beta](const Vec& y) {
    Vec x(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) x(i) = invert_scaled_sine(alpha, beta, y(i));
    return x;
  };
  spec.jacobian_inverse_abs = [alpha, beta](const Vec& x) {
    double jac = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double pre = invert_scaled_sine(alpha, beta, x(i));
      jac /= std::abs(alpha + beta * std::cos(pre));
    }
    return jac;
  };
  const double slow = std::abs(alpha) - std::abs(beta);
  const double fast = std::abs(alpha) + std::abs(beta);
  spec.jac_sup = std::pow(1.0 / slow, dim);
  spec.jac_inf = std::pow(1.0 / fast, dim);
  spec.forward_lipschitz = fast;
  spec.inverse_lipschitz = 1.0 / slow;
  spec.homogeneous = (beta == 0.0);
  return diffeo(std::move(spec));
}

void MapSpec::validate_samples() const {
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  Vec y(dim_);
  const double slack = 1e-12;
  for (int s = 0; s < 256; ++s) {
    for (int k = 0; k < dim_; ++k) y(k) = unif(rng);
    const Vec back = apply(apply_inverse(y));
    if (back.size() != dim_ || (back - y).norm() > 1e-10 * std::max(1.0, y.norm())) {
      throw ValidationError("map inverse check failed: a(a^{-1}(y)) != y on a sampled point");
    }
    const double jac = jacobian_inverse_abs(y);
    if (!(jac >= jac_inf_ * (1.0 - slack) && jac <= jac_sup_ * (1.0 + slack))) {
      throw ValidationError("declared Jacobian bounds [m, M] do not bracket a sampled |J_{a^{-1}}| value");
    }
  }
}

Vec MapSpec::apply(const Vec& x) const {
  require(x.size() == dim_, "map applied to a point of the wrong dimension");
  if (kind_ == Kind::linear) return matrix_ * x;
  return diffeo_.forward(x);
}

Vec MapSpec::apply_inverse(const Vec& y) const {
  require(y.size() == dim_, "inverse map applied to a point of the wrong dimension");
  if (kind_ == Kind::linear) return inverse_ * y;
  return diffeo_.inverse(y);
}

void MapSpec::apply_into(const double* x, double* out) const {
  if (kind_ == Kind::linear) {
    for (int r = 0; r < dim_; ++r) {
      double acc = 0.0;
      for (int c = 0; c < dim_; ++c) acc += matrix_(r, c) * x[c];
      out[r] = acc;
    }
    return;
  }
  const Vec y = diffeo_.forward(Eigen::Map<const Vec>(x, dim_));
  std::copy(y.data(), y.data() + dim_, out);
}

double MapSpec::jacobian_inverse_abs(const Vec& x) const {
  require(x.size() == dim_, "Jacobian evaluated at a point of the wrong dimension");
  if (kind_ == Kind::linear) return 1.0 / abs_det_;
  return diffeo_.jacobian_inverse_abs(x);
}

const Mat& MapSpec::matrix() const {
  require(is_linear(), "matrix() requested from a nonlinear map");
  return matrix_;
}

const Mat& MapSpec::inverse_matrix() const {
  require(is_linear(), "inverse_matrix() requested from a nonlinear map");
  return inverse_;
}

double MapSpec::abs_det() const {
  require(is_linear(), "abs_det() requested from a nonlinear map");
  return abs_det_;
}

// ---------------------------------------------------------------------------

DeformationKernel::DeformationKernel(Profile profile, MapSpec map)
    : profile_(std::move(profile)), map_(std::move(map)) {
  require(profile_.dim() == map_.dim(), "profile and map dimensions differ");
}

double DeformationKernel::operator()(const Vec& x, const Vec& y) const {
  require(x.size() == dim() && y.size() == dim(), "kernel evaluated at points of the wrong dimension");
  const Vec ax = map_.apply(x);
  const Vec ay = map_.apply(y);
  const Vec z1 = y - ax;
  const Vec z2 = x - ay;
  return profile_.eval(z1.data()) + profile_.eval(z2.data());
}

double DeformationKernel::mass_at(const Vec& x, double rel_tol) const {
  require(x.size() == dim(), "kernel mass evaluated at a point of the wrong dimension");
  const double psi_mass = profile_.mass();
  if (map_.is_linear()) return psi_mass * (1.0 + 1.0 / map_.abs_det());
  if (dim() > 3) throw NumericalError("kernel mass quadrature supports dimensions 1 to 3");

  // (psi * |J_{a^{-1}}|)(x) over the support box of psi(x - .)
  const int d = dim();
  std::array<double, 3> lo{}, hi{};
  for (int k = 0; k < d; ++k) {
    lo[k] = x(k) - 1.0;
    hi[k] = x(k) + 1.0;
  }
  Vec z(d);
  std::array<double, 3> diff{};
  auto integrand = [&](std::span<const double> p) {
    for (int k = 0; k < d; ++k) {
      diff[k] = x(k) - p[k];
      z(k) = p[k];
    }
    const double w = profile_.eval(diff.data());
    return w == 0.0 ? 0.0 : w * map_.jacobian_inverse_abs(z);
  };
  const auto est = quadrature::box(integrand, d, std::span<const double>(lo.data(), d),
                                   std::span<const double>(hi.data(), d), rel_tol);
  if (!std::isfinite(est.value) || est.error > std::max(1e-6 * std::abs(est.value), 1e-12)) {
    throw NumericalError("kernel mass quadrature did not converge");
  }
  return psi_mass + est.value;
}

}  // namespace nonlocal
