#include "nonlocal/bounds.hpp"

#include "nonlocal/quadrature.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nonlocal {

namespace {

// 1/sqrt|det A| -- shared by the lower bound and the closed form so that the
// two agree bit for bit on linear maps.
double inv_sqrt_det(double abs_det) { return 1.0 / std::sqrt(abs_det); }

double sandwich_value(double s, double psi_mass) { return 2.0 * (1.0 - s) * (1.0 - s) * psi_mass; }

double support_extent(const MapSpec& map) {
  if (map.is_linear()) {
    const Eigen::JacobiSVD<Mat> svd(map.inverse_matrix());
    return std::max(1.0, svd.singularValues()(0));
  }
  const Vec zero = Vec::Zero(map.dim());
  return std::max(1.0, map.apply_inverse(zero).norm() + map.inverse_lipschitz());
}

CandidateIntegrals integrals_1d(const MapSpec& map, const Candidate& phi, const CandidateOptions& options) {
  const double extent = support_extent(map);
  std::vector<double> breaks = phi.breakpoints;
  breaks.insert(breaks.end(), {-1.0, 0.0, 1.0});
  const std::size_t base = breaks.size();
  for (std::size_t i = 0; i < base; ++i) {
    Vec y(1);
    y(0) = breaks[i];
    breaks.push_back(map.apply_inverse(y)(0));
  }
  Vec x(1), ax(1);
  auto f = [&](double t) {
    x(0) = t;
    return phi.value(x);
  };
  auto g = [&](double t) {
    x(0) = t;
    map.apply_into(x.data(), ax.data());
    return phi.value(ax);
  };
  const double lo = -extent, hi = extent;
  const double exponent = 2.0 * phi.singularity;
  auto integrate = [&](const std::function<double(double)>& h, double e) {
    return quadrature::piecewise_singular(h, lo, hi, breaks, 0.0, e, options.rel_tol).value;
  };
  CandidateIntegrals out;
  out.norm2 = integrate([&](double t) { const double v = f(t); return v * v; }, exponent);
  require(out.norm2 > 0.0 && std::isfinite(out.norm2), "candidate function is numerically zero");
  out.cross = integrate([&](double t) { return f(t) * g(t); }, exponent) / out.norm2;
  out.image = integrate([&](double t) { const double v = g(t); return v * v; }, exponent) / out.norm2;
  out.energy = integrate([&](double t) { const double v = f(t) - g(t); return v * v; }, exponent) / out.norm2;
  if (phi.gradient) {
    require(phi.singularity == 0.0, "gradient energy needs a bounded candidate");
    out.gradient = integrate([&](double t) {
                     x(0) = t;
                     return phi.gradient(x).squaredNorm();
                   }, 0.0) / out.norm2;
  }
  return out;
}

CandidateIntegrals integrals_grid(const MapSpec& map, const Candidate& phi, const CandidateOptions& options) {
  const int d = phi.dim;
  require(d == 2 || d == 3, "grid quadrature supports dimensions 2 and 3");
  const double extent = support_extent(map);
  const int n = d == 2 ? options.grid_2d : options.grid_3d;
  require(n >= 4, "quadrature grid too coarse");
  const double h = 2.0 * extent / n;
  const double vol = std::pow(h, d);
  Vec x(d), ax(d);
  std::array<int, 3> k{};
  double s_norm = 0.0, s_cross = 0.0, s_image = 0.0, s_energy = 0.0, s_grad = 0.0;
  while (true) {
    for (int c = 0; c < d; ++c) x(c) = -extent + (k[c] + 0.5) * h;
    map.apply_into(x.data(), ax.data());
    const double f = phi.value(x);
    const double g = phi.value(ax);
    s_norm += f * f;
    s_cross += f * g;
    s_image += g * g;
    s_energy += (f - g) * (f - g);
    if (phi.gradient && f != 0.0) s_grad += phi.gradient(x).squaredNorm();
    int c = d - 1;
    while (c >= 0 && ++k[c] == n) {
      k[c] = 0;
      --c;
    }
    if (c < 0) break;
  }
  CandidateIntegrals out;
  out.norm2 = s_norm * vol;
  require(out.norm2 > 0.0 && std::isfinite(out.norm2), "candidate function is numerically zero");
  out.cross = s_cross / s_norm;
  out.image = s_image / s_norm;
  out.energy = s_energy / s_norm;
  out.gradient = s_grad / s_norm;
  return out;
}

}  // namespace

Candidate indicator_candidate(int dim) {
  require(dim >= 1 && dim <= 3, "candidate dimension must be 1, 2 or 3");
  Candidate c;
  c.dim = dim;
  if (dim == 1) {
    c.name = "indicator(0,1)";
    c.value = [](const Vec& x) { return x(0) > 0.0 && x(0) < 1.0 ? 1.0 : 0.0; };
    c.breakpoints = {0.0, 1.0};
  } else {
    c.name = "indicator(B1)";
    c.value = [](const Vec& x) { return x.squaredNorm() < 1.0 ? 1.0 : 0.0; };
  }
  return c;
}

Candidate smooth_candidate(int dim) {
  require(dim >= 1 && dim <= 3, "candidate dimension must be 1, 2 or 3");
  Candidate c;
  c.name = "cos2";
  c.dim = dim;
  c.value = [](const Vec& x) {
    const double r = x.norm();
    if (r >= 1.0) return 0.0;
    const double v = std::cos(0.5 * std::numbers::pi * r);
    return v * v;
  };
  c.gradient = [](const Vec& x) -> Vec {
    const double r = x.norm();
    if (r >= 1.0 || r == 0.0) return Vec::Zero(x.size());
    // d/dr cos^2(pi r / 2) = -(pi/2) sin(pi r)
    return (-0.5 * std::numbers::pi * std::sin(std::numbers::pi * r) / r) * x;
  };
  if (dim == 1) c.breakpoints = {-1.0, 0.0, 1.0};
  return c;
}

std::string to_string(LowerCase c) {
  switch (c) {
    case LowerCase::jac_sup_below_one: return "M<1";
    case LowerCase::jac_inf_above_one: return "m>1";
    case LowerCase::not_applicable: break;
  }
  return "not-applicable";
}

LowerBound lower_bound_jacobian(const DeformationKernel& kernel) {
  const MapSpec& map = kernel.map();
  const double mass = kernel.profile().mass();
  const double big_m = map.jac_sup();
  const double small_m = map.jac_inf();
  LowerBound out;
  if (big_m < 1.0) {
    // theta = M^{1/2}
    const double s = map.is_linear() ? inv_sqrt_det(map.abs_det()) : std::sqrt(big_m);
    out.value = sandwich_value(s, mass);
    out.which = LowerCase::jac_sup_below_one;
  } else if (small_m > 1.0) {
    const double s = map.is_linear() ? inv_sqrt_det(map.abs_det()) : std::sqrt(small_m);
    out.value = sandwich_value(s, mass);
    out.which = LowerCase::jac_inf_above_one;
  }
  return out;
}

double upper_bound_sup(const DeformationKernel& kernel) {
  return 2.0 * (1.0 + kernel.map().jac_sup()) * kernel.profile().mass();
}

double closed_form_linear(const Mat& matrix, double psi_mass) {
  require(matrix.rows() == matrix.cols() && matrix.rows() > 0, "matrix must be square");
  require(std::isfinite(psi_mass) && psi_mass > 0.0, "profile mass must be positive");
  const double abs_det = std::abs(matrix.determinant());
  const Eigen::JacobiSVD<Mat> svd(matrix);
  const auto& sv = svd.singularValues();
  if (!(abs_det > 0.0) || sv(sv.size() - 1) <= 1e-14 * sv(0)) throw ValidationError("matrix is singular");
  return sandwich_value(inv_sqrt_det(abs_det), psi_mass);
}

CandidateIntegrals candidate_integrals(const MapSpec& map, const Candidate& phi, const CandidateOptions& options) {
  require(phi.value != nullptr, "candidate has no value function");
  require(phi.dim == map.dim(), "candidate dimension differs from the map dimension");
  return phi.dim == 1 ? integrals_1d(map, phi, options) : integrals_grid(map, phi, options);
}

double upper_bound_candidate(const DeformationKernel& kernel, const Candidate& phi, const CandidateOptions& options) {
  require(kernel.map().homogeneous(), "candidate bound needs a map homogeneous of degree one");
  const CandidateIntegrals ints = candidate_integrals(kernel.map(), phi, options);
  return 2.0 * kernel.profile().mass() * ints.energy;
}

FiniteRadiusBound finite_radius_bound(const DeformationKernel& kernel, const Candidate& phi, double radius,
                                      double delta, const CandidateOptions& options) {
  require(kernel.map().homogeneous(), "finite-radius bound needs a map homogeneous of degree one");
  require(static_cast<bool>(phi.gradient), "finite-radius bound needs the candidate gradient");
  require(delta > 0.0 && std::isfinite(delta), "delta must be positive");
  require(radius > 0.0 && std::isfinite(radius), "radius must be positive");
  const CandidateIntegrals ints = candidate_integrals(kernel.map(), phi, options);
  const MapSpec& map = kernel.map();
  FiniteRadiusBound out;
  out.delta = delta;
  out.radius = radius;
  out.constant = 2.0 * (1.0 + 2.0 / delta);
  out.candidate_energy = ints.energy;
  out.gradient_energy = ints.gradient;
  // Declared global sup for diffeos; it dominates the sup over B_{1+1/R}.
  out.jac_sup = map.is_linear() ? 1.0 / map.abs_det() : map.jac_sup();
  const Profile& psi = kernel.profile();
  out.value = (2.0 + delta) * psi.mass() * ints.energy +
              out.constant / (radius * radius) * psi.second_moment() * ints.gradient * out.jac_sup;
  return out;
}

double upper_bound_from_ratio(double abs_det, double psi_mass, double ratio) {
  require(abs_det > 0.0, "determinant must be nonzero");
  return 2.0 * psi_mass * (1.0 + 1.0 / abs_det - 2.0 * inv_sqrt_det(abs_det) * ratio);
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["lower"] = lower.value ? nlohmann::json(*lower.value) : nlohmann::json(nullptr);
  j["lower_case"] = to_string(lower.which);
  j["upper_sup"] = upper_sup;
  if (upper_candidate) {
    j["upper_candidate"] = {{"value", *upper_candidate}, {"candidate", candidate_name}};
  } else {
    j["upper_candidate"] = nullptr;
  }
  j["exact_linear"] = exact_linear ? nlohmann::json(*exact_linear) : nlohmann::json(nullptr);
  j["psi_mass"] = psi_mass;
  return j;
}

BoundReport bound_report(const DeformationKernel& kernel, const std::optional<Candidate>& phi,
                         const CandidateOptions& options) {
  BoundReport r;
  r.psi_mass = kernel.profile().mass();
  r.lower = lower_bound_jacobian(kernel);
  r.upper_sup = upper_bound_sup(kernel);
  if (kernel.map().is_linear()) r.exact_linear = closed_form_linear(kernel.map().matrix(), r.psi_mass);
  if (phi && kernel.map().homogeneous()) {
    r.upper_candidate = upper_bound_candidate(kernel, *phi, options);
    r.candidate_name = phi->name;
  }
  return r;
}

}  // namespace nonlocal
