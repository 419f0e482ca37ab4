#pragma once

#include "nonlocal/common.hpp"

#include <span>
#include <vector>

namespace nonlocal::quadrature {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod (15-point) on [a, b].
Estimate gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                       double rel_tol = 1e-10, unsigned max_depth = 18);

// Tanh-sinh on [a, b]; tolerates integrable endpoint singularities.
Estimate tanh_sinh(const std::function<double(double)>& f, double a, double b,
                   double rel_tol = 1e-10);

// Sum of tanh-sinh integrals over consecutive pieces of the sorted,
// deduplicated breakpoint list restricted to [a, b].
Estimate piecewise_tanh_sinh(const std::function<double(double)>& f, double a, double b,
                             std::vector<double> breakpoints, double rel_tol = 1e-10);

// Integral from a to b (oriented) of f with an integrable singularity of
// order |x - a|^{-exponent} at a, 0 <= exponent < 1. The substitution
// x = a + (b - a) u^{1/(1 - exponent)} makes the integrand bounded.
Estimate singular_endpoint(const std::function<double(double)>& f, double a, double b, double exponent,
                           double rel_tol = 1e-12);

// As piecewise_tanh_sinh, but pieces ending at `singular_point` use
// singular_endpoint with the given exponent.
Estimate piecewise_singular(const std::function<double(double)>& f, double a, double b,
                            std::vector<double> breakpoints, double singular_point, double exponent,
                            double rel_tol = 1e-12);

// Nested adaptive Gauss-Kronrod over the box [lo, hi]^dim, dim <= 3.
Estimate box(const std::function<double(std::span<const double>)>& f, int dim,
             std::span<const double> lo, std::span<const double> hi, double rel_tol = 1e-8);

}  // namespace nonlocal::quadrature
