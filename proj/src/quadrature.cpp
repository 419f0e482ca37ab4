#include "nonlocal/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace nonlocal::quadrature {

Estimate gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                       double rel_tol, unsigned max_depth) {
  Estimate out;
  if (a == b) return out;
  double l1 = 0.0;
  out.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol,
                                                                            &out.error, &l1);
  return out;
}

Estimate tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  Estimate out;
  if (a == b) return out;
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  double l1 = 0.0;
  auto g = [&f](double x) { return f(x); };
  out.value = integrator.integrate(g, a, b, rel_tol, &out.error, &l1);
  return out;
}

Estimate piecewise_tanh_sinh(const std::function<double(double)>& f, double a, double b,
                             std::vector<double> breakpoints, double rel_tol) {
  breakpoints.push_back(a);
  breakpoints.push_back(b);
  std::erase_if(breakpoints, [&](double t) { return t < a || t > b || !std::isfinite(t); });
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  Estimate total;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const Estimate piece = tanh_sinh(f, breakpoints[i], breakpoints[i + 1], rel_tol);
    total.value += piece.value;
    total.error += piece.error;
  }
  return total;
}

Estimate singular_endpoint(const std::function<double(double)>& f, double a, double b, double exponent,
                           double rel_tol) {
  require(exponent >= 0.0 && exponent < 1.0, "singular exponent must lie in [0, 1)");
  Estimate out;
  if (a == b) return out;
  const double p = 1.0 / (1.0 - exponent);
  const double len = b - a;
  auto g = [&](double u) {
    if (u <= 0.0) return 0.0;
    return f(a + len * std::pow(u, p)) * len * p * std::pow(u, p - 1.0);
  };
  return gauss_kronrod(g, 0.0, 1.0, rel_tol, 20);
}

Estimate piecewise_singular(const std::function<double(double)>& f, double a, double b,
                            std::vector<double> breakpoints, double singular_point, double exponent,
                            double rel_tol) {
  breakpoints.push_back(a);
  breakpoints.push_back(b);
  if (singular_point > a && singular_point < b) breakpoints.push_back(singular_point);
  std::erase_if(breakpoints, [&](double t) { return t < a || t > b || !std::isfinite(t); });
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  Estimate total;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double lo = breakpoints[i], hi = breakpoints[i + 1];
    Estimate piece;
    if (exponent > 0.0 && lo == singular_point) {
      piece = singular_endpoint(f, lo, hi, exponent, rel_tol);
    } else if (exponent > 0.0 && hi == singular_point) {
      piece = singular_endpoint(f, hi, lo, exponent, rel_tol);
      piece.value = -piece.value;
    } else {
      piece = gauss_kronrod(f, lo, hi, rel_tol, 20);
    }
    total.value += piece.value;
    total.error += piece.error;
  }
  return total;
}

namespace {

Estimate box_level(const std::function<double(std::span<const double>)>& f, int dim, int level,
                   std::array<double, 3>& point, std::span<const double> lo, std::span<const double> hi,
                   double rel_tol) {
  double inner_error = 0.0;
  auto slice = [&](double t) {
    point[level] = t;
    if (level + 1 == dim) return f(std::span<const double>(point.data(), dim));
    const Estimate inner = box_level(f, dim, level + 1, point, lo, hi, rel_tol);
    inner_error = std::max(inner_error, inner.error);
    return inner.value;
  };
  Estimate out = gauss_kronrod(slice, lo[level], hi[level], rel_tol, 12);
  out.error += inner_error * (hi[level] - lo[level]);
  return out;
}

}  // namespace

Estimate box(const std::function<double(std::span<const double>)>& f, int dim,
             std::span<const double> lo, std::span<const double> hi, double rel_tol) {
  require(dim >= 1 && dim <= 3, "box quadrature supports dimensions 1 to 3");
  require(lo.size() >= static_cast<std::size_t>(dim) && hi.size() >= static_cast<std::size_t>(dim),
          "box quadrature bounds have the wrong size");
  std::array<double, 3> point{};
  return box_level(f, dim, 0, point, lo, hi, rel_tol);
}

}  // namespace nonlocal::quadrature
