#pragma once

// Near-extremal test functions for the overlap functional
//   ratio(phi) = int phi(x) phi(A x) dx / (|det A|^{-1/2} int phi^2),
// which is at most 1 by Cauchy-Schwarz and approaches 1 along each family.

#include "nonlocal/bounds.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace nonlocal {

struct OverlapReport {
  std::string family;
  nlohmann::json params;
  std::string method;  // "closed-form", "grid-quadrature" or "monte-carlo"
  double analytic_ratio = 0.0;
  double measured_ratio = 0.0;
  double std_error = 0.0;  // zero for deterministic quadrature
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  double abs_error() const { return std::abs(measured_ratio - analytic_ratio); }
  nlohmann::json to_json() const;
};

class Witness {
 public:
  virtual ~Witness() = default;
  virtual int dim() const = 0;
  virtual std::string family() const = 0;
  virtual nlohmann::json params() const = 0;
  // The linear map the overlap ratio refers to.
  virtual const Mat& matrix() const = 0;
  virtual double analytic_ratio() const = 0;
  virtual double operator()(const Vec& x) const = 0;
  // Radius of a ball containing the support (at most 1).
  virtual double support_radius() const = 0;
};

struct MonteCarloOptions {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  int jobs = 1;
  int shards = 64;  // fixed, so results do not depend on jobs
};

// ---------------------------------------------------------------------------
// Separable power law: product over coordinates of |x_i|^{-sigma} on (0, eps)
// (alpha_i > 0) or on (-eps, eps) (alpha_i < 0), for A = diag(alpha).
class PowerLawWitness final : public Witness {
 public:
  PowerLawWitness(std::vector<double> alphas, double sigma, double eps);
  int dim() const override { return static_cast<int>(alphas_.size()); }
  std::string family() const override { return "power_law"; }
  nlohmann::json params() const override;
  const Mat& matrix() const override { return matrix_; }
  double analytic_ratio() const override;
  double operator()(const Vec& x) const override;
  double support_radius() const override { return eps_ * std::sqrt(static_cast<double>(dim())); }

  double sigma() const { return sigma_; }
  double eps() const { return eps_; }
  const std::vector<double>& alphas() const { return alphas_; }
  // 1-D candidate for the quadrature-based bounds (d = 1 only).
  Candidate candidate() const;

 private:
  std::vector<double> alphas_;
  double sigma_;
  double eps_;
  Mat matrix_;
};

// Per-coordinate tanh-sinh quadrature of the separable overlap.
OverlapReport measure_overlap(const PowerLawWitness& w, double rel_tol = 1e-12);

// ---------------------------------------------------------------------------
// sum_{j <= J} sigma^j chi_{E_j}, with E_j the points whose last visit to the
// seed ball B under iteration of E happens at step j. E is A when A is
// expansive and A^{-1} when A is contracting; the ratio is the same for both.
class ExpansiveWitness final : public Witness {
 public:
  ExpansiveWitness(const Mat& matrix, double sigma, int j_max = -1);
  int dim() const override { return static_cast<int>(matrix_.rows()); }
  std::string family() const override { return "expansive_geometric"; }
  nlohmann::json params() const override;
  const Mat& matrix() const override { return matrix_; }
  double analytic_ratio() const override;  // sigma |det E|^{-1/2}
  double operator()(const Vec& x) const override;
  double support_radius() const override { return 1.0; }

  // Ratio of the truncated sum: analytic * (1 - q^J) / (1 - q^{J+1}).
  double truncated_ratio() const;
  int j_max() const { return j_max_; }
  double q() const { return q_; }
  double seed_radius() const { return seed_radius_; }
  const Mat& expansive() const { return expansive_; }
  bool inverted() const { return inverted_; }
  // Last j >= 0 with E^j x in B, or -1 when the orbit never meets B.
  int level(const double* x) const;

 private:
  Mat matrix_;
  Mat expansive_;
  bool inverted_ = false;
  double sigma_;
  double abs_det_e_;
  double q_;
  int j_max_;
  double seed_radius_;
  double escape_radius_;
};

struct ExpansiveOverlapReport {
  OverlapReport overlap;
  // Estimated |E_j| for j = 0..levels-1 with standard errors.
  std::vector<double> level_measure;
  std::vector<double> level_std_error;
  double truncated_ratio = 0.0;
};

ExpansiveOverlapReport measure_overlap(const ExpansiveWitness& w, const MonteCarloOptions& mc, int levels = 8);

// ---------------------------------------------------------------------------
// Union of the k+1 images A^j S, j = 0..k, of a small ball S, for a unipotent
// (up to sign) or rotation-unipotent Jordan block A. The ball radius is halved
// until pairwise disjointness and containment in B_1 are certified.
class JordanWitness final : public Witness {
 public:
  // lambda = +-1 real block of size d >= 2.
  static JordanWitness shear(int k, double lambda, int dim);
  // Rotation-shear block of size dim/2 (dim even, >= 4) with angle theta.
  static JordanWitness rotation(int k, double theta, int dim);

  int dim() const override { return static_cast<int>(matrix_.rows()); }
  std::string family() const override { return family_; }
  nlohmann::json params() const override;
  const Mat& matrix() const override { return matrix_; }
  double analytic_ratio() const override { return static_cast<double>(k_) / (k_ + 1); }
  double operator()(const Vec& x) const override;  // number of images containing x
  double support_radius() const override { return support_radius_; }

  int k() const { return k_; }
  double ball_radius() const { return radius_; }
  const Vec& center() const { return center_; }

 private:
  JordanWitness(std::string family, Mat matrix, int k, Vec base_point, nlohmann::json params);

  std::string family_;
  Mat matrix_;
  std::vector<Mat> inverse_powers_;  // A^{-j}, j = 0..k
  int k_;
  Vec center_;
  double radius_ = 0.0;
  double support_radius_ = 0.0;
  nlohmann::json params_;
};

struct JordanOverlapReport {
  OverlapReport overlap;
  // Samples lying in more than one image (zero when the images are disjoint).
  std::size_t multiply_covered = 0;
};

// Equal sample counts per image; x drawn uniformly from A^j S.
JordanOverlapReport measure_overlap(const JordanWitness& w, const MonteCarloOptions& mc);

// ---------------------------------------------------------------------------
// chi_{B_1} for an orthogonal A; ratio 1.
class BallWitness final : public Witness {
 public:
  explicit BallWitness(const Mat& matrix);
  int dim() const override { return static_cast<int>(matrix_.rows()); }
  std::string family() const override { return "unimodular_ball"; }
  nlohmann::json params() const override;
  const Mat& matrix() const override { return matrix_; }
  double analytic_ratio() const override { return 1.0; }
  double operator()(const Vec& x) const override { return x.squaredNorm() <= 1.0 ? 1.0 : 0.0; }
  double support_radius() const override { return 1.0; }

 private:
  Mat matrix_;
};

// ---------------------------------------------------------------------------
// Phi(x) = c phi(t C^{-1} x), phi the product of the block witnesses, with
// t = sqrt(#blocks) ||C|| (support in B_1) and c = t^{d/2} |det C|^{-1/2}
// (L^2 norm of phi preserved). The ratio under A = C J C^{-1} is the product of
// the block ratios.
class ComposedWitness final : public Witness {
 public:
  ComposedWitness(Mat transform, std::vector<std::shared_ptr<const Witness>> blocks);
  int dim() const override { return static_cast<int>(transform_.rows()); }
  std::string family() const override { return "composed"; }
  nlohmann::json params() const override;
  const Mat& matrix() const override { return matrix_; }
  double analytic_ratio() const override;
  double operator()(const Vec& x) const override;
  double support_radius() const override { return 1.0; }

  double scale() const { return scale_; }
  double prefactor() const { return prefactor_; }

 private:
  Mat transform_;
  Mat transform_inverse_;
  Mat matrix_;
  std::vector<std::shared_ptr<const Witness>> blocks_;
  double scale_;
  double prefactor_;
};

// Midpoint grid over [-r, r]^d (d <= 3), r the support radius.
OverlapReport measure_overlap_grid(const Witness& w, int cells_per_axis);
// Uniform sampling of the support ball.
OverlapReport measure_overlap_uniform(const Witness& w, const MonteCarloOptions& mc);

// Builds per-block witnesses for a Jordan decomposition: expansive blocks get
// the geometric family (parameter `sigma_fraction` of |det|^{1/2}), unipotent
// blocks the Jordan families with index k, orthogonal 1x1 / 2x2 blocks the ball.
std::shared_ptr<const Witness> block_witness(const JordanBlock& block, double sigma_fraction, int k);

}  // namespace nonlocal
