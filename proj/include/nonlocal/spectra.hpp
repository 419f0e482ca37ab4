#pragma once

#include "nonlocal/discretize.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nonlocal {

// Principal eigenpair of T. Both conventions are carried: lambda_T is the
// smallest eigenvalue of T, lambda1 = 2 lambda_T is the value of the energy
// quotient (double integral of K (u(x) - u(y))^2 over the integral of u^2).
struct SpectralResult {
  double lambda_T = 0.0;
  double lambda1 = 0.0;
  Vec eigvec;                 // h-weighted L2 norm 1, nonnegative after sign normalization
  double residual = 0.0;      // ||T v - lambda_T v||_2 for Euclidean-unit v
  double lambda_max_bound = 0.0;
  int iterations = 0;         // operator applications (solves) performed
  bool converged = false;
  bool near_degenerate = false;
};

struct EigenOptions {
  double tol = 1e-10;     // relative to lambda_max_bound
  int maxiter = 5000;
  int krylov_dim = 48;
  std::uint64_t seed = 7;
};

// Shift-invert Lanczos on T (sparse LDL^T factorization) with explicit
// restarts and full reorthogonalization; falls back to plain Lanczos on T
// when the factorization fails.
SpectralResult smallest_eigenpair(const DiscreteOperator& op, const EigenOptions& options = {});

// Energy quotient of u evaluated directly from the kernel:
//   sum_ij K(x_i, x_j) (ũ_i - ũ_j)^2 h^{2d} / sum_i u_i^2 h^d,
// sums over interior and extension nodes with ũ = 0 outside B_R.
double rayleigh_quotient(const Grid& grid, const DeformationKernel& kernel, const Vec& u);

struct SpacingRule {
  enum class Kind { fixed, fraction };
  Kind kind = Kind::fraction;
  double value = 320.0;  // h for fixed, N in h = R / N for fraction

  static SpacingRule fixed(double h) { return {Kind::fixed, h}; }
  static SpacingRule fraction(double divisions) { return {Kind::fraction, divisions}; }
  double spacing(double radius) const { return kind == Kind::fixed ? value : radius / value; }
};

struct ConvergenceRow {
  double radius = 0.0;
  double spacing = 0.0;
  double lambda1 = 0.0;
  double lambda_T = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::size_t nodes = 0;
  double min_eigvec = 0.0;  // smallest entry of the sign-normalized eigenvector
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double limit_estimate = 0.0;
  std::string limit_method;  // "single-row", "last-value" or "power-tail"
  std::optional<double> tail_exponent;

  bool all_converged() const;
  void write_csv(std::ostream& out) const;
};

struct SweepOptions {
  EigenOptions eigen;
  GridOptions grid;
  int jobs = 1;  // rows run concurrently
};

ConvergenceTable sweep_radius(const DeformationKernel& kernel, const std::vector<double>& radii,
                              const SpacingRule& rule, const SweepOptions& options = {});

// Fit lambda(R) = limit + c R^{-p} through three points; nullopt when the
// data are not monotone and convex in the required sense.
struct TailFit {
  double limit = 0.0;
  double coefficient = 0.0;
  double exponent = 0.0;
};
std::optional<TailFit> fit_power_tail(const std::array<double, 3>& radii, const std::array<double, 3>& values);

}  // namespace nonlocal
