#pragma once

// Analytic bounds on lambda1 (energy-quotient convention) and the closed form
// for linear maps.

#include "nonlocal/kernel.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nonlocal {

// Test function on B_1. Need not be normalized.
struct Candidate {
  std::string name;
  int dim = 1;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;  // empty when not available
  // 1-D only: points where the function jumps, kinks or blows up.
  std::vector<double> breakpoints;
  // 1-D only: phi(x) ~ |x|^{-singularity} at the origin, 0 <= singularity < 1/2.
  double singularity = 0.0;
};

// chi_(0,1) in 1-D, chi_{B_1} otherwise.
Candidate indicator_candidate(int dim);
// cos^2(pi |x| / 2) on B_1, with gradient.
Candidate smooth_candidate(int dim);

enum class LowerCase { jac_sup_below_one, jac_inf_above_one, not_applicable };
std::string to_string(LowerCase c);  // "M<1", "m>1", "not-applicable"

struct LowerBound {
  std::optional<double> value;
  LowerCase which = LowerCase::not_applicable;
};

LowerBound lower_bound_jacobian(const DeformationKernel& kernel);
double upper_bound_sup(const DeformationKernel& kernel);
double closed_form_linear(const Mat& matrix, double psi_mass);

struct CandidateOptions {
  int grid_2d = 400;  // midpoint cells per axis for d = 2
  int grid_3d = 80;   // and for d = 3
  double rel_tol = 1e-10;
};

// Normalized integrals of phi: cross = int phi phi(a x), image = int phi(a x)^2,
// each divided by int phi^2.
struct CandidateIntegrals {
  double norm2 = 0.0;  // int phi^2 before normalization
  double cross = 0.0;
  double image = 0.0;
  double energy = 0.0;    // int (phi - phi o a)^2 / int phi^2
  double gradient = 0.0;  // int |grad phi|^2 / int phi^2, when a gradient is given
};
CandidateIntegrals candidate_integrals(const MapSpec& map, const Candidate& phi,
                                       const CandidateOptions& options = {});

// 2 int psi * int (phi - phi o a)^2 / int phi^2.
double upper_bound_candidate(const DeformationKernel& kernel, const Candidate& phi,
                             const CandidateOptions& options = {});

struct FiniteRadiusBound {
  double delta = 0.0;
  double radius = 0.0;
  double constant = 0.0;          // C(delta) = 2 (1 + 2 / delta)
  double candidate_energy = 0.0;  // normalized
  double gradient_energy = 0.0;   // normalized
  double jac_sup = 0.0;
  double value = 0.0;
};
FiniteRadiusBound finite_radius_bound(const DeformationKernel& kernel, const Candidate& phi, double radius,
                                      double delta, const CandidateOptions& options = {});

// 2 int psi (1 + 1/|det A| - 2 |det A|^{-1/2} ratio).
double upper_bound_from_ratio(double abs_det, double psi_mass, double ratio);

struct BoundReport {
  LowerBound lower;
  double upper_sup = 0.0;
  std::optional<double> upper_candidate;
  std::string candidate_name;
  std::optional<double> exact_linear;
  double psi_mass = 0.0;

  nlohmann::json to_json() const;
};

BoundReport bound_report(const DeformationKernel& kernel, const std::optional<Candidate>& phi = std::nullopt,
                         const CandidateOptions& options = {});

}  // namespace nonlocal
