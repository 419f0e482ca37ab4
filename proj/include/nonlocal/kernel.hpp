#pragma once

// Profiles psi, deformation maps a and the kernel
//   K(x, y) = psi(y - a(x)) + psi(x - a(y)).

#include "nonlocal/common.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nonlocal {

enum class ProfileShape { indicator, epanechnikov, bump };

std::string to_string(ProfileShape shape);
ProfileShape profile_shape_from_string(const std::string& name);

// psi(z) = coefficient * base(|z|), supported in the closed unit ball with
//   indicator:     base = 1
//   epanechnikov:  base = 1 - |z|^2
//   bump:          base = exp(-1 / (1 - |z|^2))
class Profile {
 public:
  // Coefficient chosen so that the integral of psi equals `mass`.
  static Profile normalized(ProfileShape shape, int dim, double mass = 1.0);
  // psi = coefficient * base; the coefficient must be positive.
  static Profile scaled(ProfileShape shape, int dim, double coefficient);

  double operator()(std::span<const double> z) const;
  double operator()(const Vec& z) const { return (*this)(std::span<const double>(z.data(), z.size())); }
  // No dimension check; z must point at dim() values.
  double eval(const double* z) const;

  double mass() const { return coefficient_ * base_mass_; }
  // Integral of psi(z) |z|^2.
  double second_moment() const { return coefficient_ * base_moment_; }
  double sup() const;

  int dim() const { return dim_; }
  ProfileShape shape() const { return shape_; }
  double coefficient() const { return coefficient_; }

 private:
  Profile(ProfileShape shape, int dim, double coefficient);

  ProfileShape shape_;
  int dim_;
  double coefficient_;
  double base_mass_;
  double base_moment_;
};

// One block of a real Jordan form.
//   real:    size x size, eigenvalue `lambda` on the diagonal, ones above it.
//   complex: (2 size) x (2 size), 2x2 blocks [[alpha, beta], [-beta, alpha]]
//            on the diagonal and 2x2 identities above them.
struct JordanBlock {
  enum class Kind { real, complex };

  Kind kind = Kind::real;
  double lambda = 1.0;  // eigenvalue (real) or alpha (complex)
  double beta = 0.0;
  int size = 1;

  static JordanBlock real(double lambda, int size);
  static JordanBlock rotation(double alpha, double beta, int size);

  int dim() const { return kind == Kind::real ? size : 2 * size; }
  Mat matrix() const;
  // Modulus of the (complex) eigenvalue of the block.
  double modulus() const;
};

struct JordanData {
  Mat transform;  // C, with A = C J C^{-1}
  std::vector<JordanBlock> blocks;

  int dim() const;
  Mat block_diagonal() const;
};

// Black-box diffeomorphism with declared bounds on |J_{a^{-1}}| and on the
// Lipschitz constants of a and a^{-1} (the latter drive the extension zone).
struct DiffeoSpec {
  std::string name;
  int dim = 1;
  std::function<Vec(const Vec&)> forward;
  std::function<Vec(const Vec&)> inverse;
  // |det D(a^{-1})| evaluated at x.
  std::function<double(const Vec&)> jacobian_inverse_abs;
  double jac_sup = 1.0;  // M
  double jac_inf = 1.0;  // m
  double forward_lipschitz = 1.0;
  double inverse_lipschitz = 1.0;
  bool homogeneous = false;
};

class MapSpec {
 public:
  enum class Kind { linear, diffeo };

  static MapSpec identity(int dim);
  static MapSpec linear(Mat matrix, std::optional<JordanData> jordan = std::nullopt);
  static MapSpec diffeo(DiffeoSpec spec);
  // a(x)_i = alpha x_i + beta sin(x_i), requires |beta| < |alpha|.
  static MapSpec scaled_sine(int dim, double alpha, double beta);

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::linear; }
  int dim() const { return dim_; }
  bool homogeneous() const { return kind_ == Kind::linear || diffeo_.homogeneous; }
  const std::string& name() const { return name_; }

  Vec apply(const Vec& x) const;
  Vec apply_inverse(const Vec& y) const;
  // Raw-pointer fast path used during assembly; out must hold dim() values.
  void apply_into(const double* x, double* out) const;
  double jacobian_inverse_abs(const Vec& x) const;

  double jac_sup() const { return jac_sup_; }
  double jac_inf() const { return jac_inf_; }
  double forward_lipschitz() const { return forward_lipschitz_; }
  double inverse_lipschitz() const { return inverse_lipschitz_; }

  // Linear maps only.
  const Mat& matrix() const;
  const Mat& inverse_matrix() const;
  double abs_det() const;
  const std::optional<JordanData>& jordan() const { return jordan_; }

 private:
  MapSpec() = default;
  void validate_samples() const;

  Kind kind_ = Kind::linear;
  int dim_ = 1;
  std::string name_;
  Mat matrix_;
  Mat inverse_;
  double abs_det_ = 1.0;
  std::optional<JordanData> jordan_;
  DiffeoSpec diffeo_;
  double jac_sup_ = 1.0;
  double jac_inf_ = 1.0;
  double forward_lipschitz_ = 1.0;
  double inverse_lipschitz_ = 1.0;
};

class DeformationKernel {
 public:
  DeformationKernel(Profile profile, MapSpec map);

  const Profile& profile() const { return profile_; }
  const MapSpec& map() const { return map_; }
  int dim() const { return profile_.dim(); }

  double operator()(const Vec& x, const Vec& y) const;

  // m(x) = integral of K(x, y) dy = int psi + (psi * |J_{a^{-1}}|)(x).
  // Closed form for linear maps, adaptive quadrature otherwise.
  double mass_at(const Vec& x, double rel_tol = 1e-9) const;

 private:
  Profile profile_;
  MapSpec map_;
};

}  // namespace nonlocal
