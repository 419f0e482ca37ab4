#include "nonlocal/witnesses.hpp"

#include "nonlocal/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace nonlocal {

namespace {

double spectral_norm(const Mat& m) {
  const Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

// Per-stratum sums for the ratio estimator sum(a) / sum(b).
struct StratumSums {
  double n = 0, a = 0, b = 0, aa = 0, bb = 0, ab = 0;
  void add(double x, double y) {
    n += 1;
    a += x;
    b += y;
    aa += x * x;
    bb += y * y;
    ab += x * y;
  }
  void merge(const StratumSums& o) {
    n += o.n;
    a += o.a;
    b += o.b;
    aa += o.aa;
    bb += o.bb;
    ab += o.ab;
  }
};

struct RatioEstimate {
  double numerator = 0, denominator = 0, ratio = 0, std_error = 0;
};

// Delta method on stratified sums: Var(N - R D) / D^2.
RatioEstimate ratio_of_sums(const std::vector<StratumSums>& strata) {
  RatioEstimate r;
  for (const auto& s : strata) {
    r.numerator += s.a;
    r.denominator += s.b;
  }
  require(r.denominator > 0.0, "Monte Carlo estimate of the L2 norm is zero");
  r.ratio = r.numerator / r.denominator;
  double var = 0.0;
  for (const auto& s : strata) {
    if (s.n < 2) continue;
    const double va = (s.aa - s.a * s.a / s.n) / (s.n - 1);
    const double vb = (s.bb - s.b * s.b / s.n) / (s.n - 1);
    const double cab = (s.ab - s.a * s.b / s.n) / (s.n - 1);
    var += s.n * (va - 2.0 * r.ratio * cab + r.ratio * r.ratio * vb);
  }
  r.std_error = std::sqrt(std::max(var, 0.0)) / r.denominator;
  return r;
}

struct ShardState {
  std::vector<StratumSums> strata;
  std::vector<double> extra;
};

// Runs counts[l] samples of stratum l split over a fixed number of shards,
// each with its own generator; shard results are merged in shard order.
template <class Sample>
ShardState run_shards(const std::vector<std::size_t>& counts, std::size_t extra_size, const MonteCarloOptions& mc,
                      Sample&& sample) {
  require(mc.shards > 0, "shard count must be positive");
  const std::size_t shards = static_cast<std::size_t>(mc.shards);
  std::vector<ShardState> states(shards);
  parallel_for(shards, mc.jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      ShardState& st = states[s];
      st.strata.assign(counts.size(), {});
      st.extra.assign(extra_size, 0.0);
      std::mt19937_64 rng(splitmix64(mc.seed ^ splitmix64(s + 1)));
      for (std::size_t l = 0; l < counts.size(); ++l) {
        const std::size_t lo = counts[l] * s / shards;
        const std::size_t hi = counts[l] * (s + 1) / shards;
        for (std::size_t i = lo; i < hi; ++i) sample(l, rng, st);
      }
    }
  });
  ShardState total;
  total.strata.assign(counts.size(), {});
  total.extra.assign(extra_size, 0.0);
  for (const auto& st : states) {
    for (std::size_t l = 0; l < counts.size(); ++l) total.strata[l].merge(st.strata[l]);
    for (std::size_t e = 0; e < extra_size; ++e) total.extra[e] += st.extra[e];
  }
  return total;
}

// Uniform point in the ball of radius r centred at 0.
template <class Rng>
void uniform_in_ball(Rng& rng, int dim, double r, double* out) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (dim == 1) {
    out[0] = r * (2.0 * unif(rng) - 1.0);
    return;
  }
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int c = 0; c < dim; ++c) {
      out[c] = normal(rng);
      norm2 += out[c] * out[c];
    }
  } while (norm2 == 0.0);
  const double scale = r * std::pow(unif(rng), 1.0 / dim) / std::sqrt(norm2);
  for (int c = 0; c < dim; ++c) out[c] *= scale;
}

double power_factor(double alpha, double sigma, double eps, double x) {
  const double ax = std::abs(x);
  if (ax == 0.0 || ax >= eps) return 0.0;
  if (alpha > 0.0 && x < 0.0) return 0.0;
  return std::pow(ax, -sigma);
}

}  // namespace

nlohmann::json OverlapReport::to_json() const {
  return {{"family", family},
          {"params", params},
          {"method", method},
          {"analytic_ratio", analytic_ratio},
          {"measured_ratio", measured_ratio},
          {"stderr", std_error},
          {"samples", samples},
          {"seed", seed}};
}

// ---------------------------------------------------------------------------

PowerLawWitness::PowerLawWitness(std::vector<double> alphas, double sigma, double eps)
    : alphas_(std::move(alphas)), sigma_(sigma), eps_(eps) {
  require(!alphas_.empty() && alphas_.size() <= 3, "power-law witness needs 1 to 3 diagonal entries");
  for (double a : alphas_) require(std::isfinite(a) && a != 0.0, "diagonal entries must be finite and nonzero");
  require(sigma_ > 0.0 && sigma_ < 0.5, "sigma must lie in (0, 1/2)");
  require(eps_ > 0.0 && eps_ <= 1.0 / std::sqrt(static_cast<double>(alphas_.size())) + 1e-15,
          "eps must lie in (0, d^{-1/2}]");
  matrix_ = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) matrix_(i, i) = alphas_[static_cast<std::size_t>(i)];
}

nlohmann::json PowerLawWitness::params() const {
  return {{"alphas", alphas_}, {"sigma", sigma_}, {"eps", eps_}};
}

double PowerLawWitness::analytic_ratio() const {
  double r = 1.0;
  for (double a : alphas_) r *= std::pow(std::max(std::abs(a), 1.0 / std::abs(a)), sigma_ - 0.5);
  return r;
}

double PowerLawWitness::operator()(const Vec& x) const {
  require(x.size() == dim(), "point dimension differs from the witness dimension");
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) {
    v *= power_factor(alphas_[static_cast<std::size_t>(i)], sigma_, eps_, x(i));
    if (v == 0.0) break;
  }
  return v;
}

Candidate PowerLawWitness::candidate() const {
  require(dim() == 1, "power-law candidate is one-dimensional");
  Candidate c;
  c.name = "power_law(sigma=" + std::to_string(sigma_) + ")";
  c.dim = 1;
  const double alpha = alphas_[0], sigma = sigma_, eps = eps_;
  c.value = [alpha, sigma, eps](const Vec& x) { return power_factor(alpha, sigma, eps, x(0)); };
  c.breakpoints = {-eps, 0.0, eps};
  c.singularity = sigma;
  return c;
}

OverlapReport measure_overlap(const PowerLawWitness& w, double rel_tol) {
  OverlapReport rep;
  rep.family = w.family();
  rep.params = w.params();
  rep.method = "quadrature";
  rep.analytic_ratio = w.analytic_ratio();
  double ratio = 1.0;
  const double sigma = w.sigma(), eps = w.eps();
  for (double alpha : w.alphas()) {
    const double ab = std::abs(alpha);
    const std::vector<double> breaks{-eps, eps, -eps / ab, eps / ab};
    const double lim = std::max(eps, eps / ab);
    auto f = [&](double x) { return power_factor(alpha, sigma, eps, x); };
    const double norm = quadrature::piecewise_singular([&](double x) { const double v = f(x); return v * v; },
                                                       -lim, lim, breaks, 0.0, 2.0 * sigma, rel_tol).value;
    const double cross = quadrature::piecewise_singular([&](double x) { return f(x) * f(alpha * x); }, -lim, lim,
                                                        breaks, 0.0, 2.0 * sigma, rel_tol).value;
    ratio *= cross / (norm / std::sqrt(ab));
  }
  rep.measured_ratio = ratio;
  return rep;
}

// ---------------------------------------------------------------------------

ExpansiveWitness::ExpansiveWitness(const Mat& matrix, double sigma, int j_max) : matrix_(matrix), sigma_(sigma) {
  require(matrix.rows() == matrix.cols() && matrix.rows() >= 1 && matrix.rows() <= 3,
          "expansive witness needs a square matrix of size 1 to 3");
  const Eigen::EigenSolver<Mat> es(matrix, false);
  const Eigen::VectorXd moduli = es.eigenvalues().cwiseAbs();
  if (moduli.minCoeff() > 1.0) {
    expansive_ = matrix;
  } else if (moduli.maxCoeff() < 1.0 && moduli.minCoeff() > 0.0) {
    expansive_ = matrix.inverse();
    inverted_ = true;
  } else {
    throw ValidationError("matrix is neither expansive nor contracting");
  }
  abs_det_e_ = std::abs(expansive_.determinant());
  require(sigma > 0.0 && sigma < std::sqrt(abs_det_e_), "sigma must lie in (0, |det|^{1/2})");
  q_ = sigma * sigma / abs_det_e_;

  if (j_max >= 0) {
    j_max_ = j_max;
  } else {
    // smallest J with q^{J+1} < 1e-8 (1 - q^{J+1})
    int j = 0;
    double qj = q_;
    while (!(qj < 1e-8 * (1.0 - qj))) {
      ++j;
      qj *= q_;
      require(j <= 100000, "sigma too close to |det|^{1/2}: truncation exceeds 100000 levels");
    }
    j_max_ = j;
  }

  // Seed ball radius 1/c with c = sup_j ||E^{-j}||, computed up to the first
  // power K with ||E^{-K}|| < 1 (submultiplicativity covers the rest).
  const Mat inv = expansive_.inverse();
  Mat power = Mat::Identity(dim(), dim());
  double c = 1.0;
  int k = 0;
  while (true) {
    power = inv * power;
    ++k;
    const double norm = spectral_norm(power);
    if (norm < 1.0) break;
    c = std::max(c, norm);
    if (k > 10000) throw NumericalError("no power of the inverse is a contraction within 10000 steps");
  }
  seed_radius_ = 1.0 / c;
  escape_radius_ = 1.0;
}

nlohmann::json ExpansiveWitness::params() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < dim(); ++i) {
    std::vector<double> row;
    for (int j = 0; j < dim(); ++j) row.push_back(matrix_(i, j));
    rows.push_back(row);
  }
  return {{"matrix", rows}, {"sigma", sigma_}, {"j_max", j_max_}, {"seed_radius", seed_radius_},
          {"inverted", inverted_}};
}

double ExpansiveWitness::analytic_ratio() const { return sigma_ / std::sqrt(abs_det_e_); }

double ExpansiveWitness::truncated_ratio() const {
  const double qj = std::pow(q_, j_max_);
  return analytic_ratio() * (1.0 - qj) / (1.0 - qj * q_);
}

int ExpansiveWitness::level(const double* x) const {
  const int d = dim();
  std::array<double, 3> y{}, z{};
  for (int c = 0; c < d; ++c) y[c] = x[c];
  const double r2 = seed_radius_ * seed_radius_;
  const double esc2 = escape_radius_ * escape_radius_;
  int last = -1;
  const int horizon = j_max_ + 64;
  for (int j = 0; j <= horizon; ++j) {
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += y[c] * y[c];
    if (n2 <= r2) last = j;
    // Beyond radius 1 no later iterate can return to B.
    if (n2 > esc2) return last;
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += expansive_(i, c) * y[c];
      z[i] = s;
    }
    y = z;
  }
  throw NumericalError("orbit did not leave the unit ball within the iteration horizon");
}

double ExpansiveWitness::operator()(const Vec& x) const {
  require(x.size() == dim(), "point dimension differs from the witness dimension");
  const int l = level(x.data());
  if (l < 0 || l > j_max_) return 0.0;
  return std::pow(sigma_, l);
}

ExpansiveOverlapReport measure_overlap(const ExpansiveWitness& w, const MonteCarloOptions& mc, int levels) {
  require(mc.samples >= 2, "Monte Carlo needs at least two samples");
  require(levels >= 1, "level count must be positive");
  const int d = w.dim();
  const int jm = w.j_max();
  const double q = w.q();
  const double det = std::abs(w.expansive().determinant());
  const double log_det = std::log(det);
  const double sigma = w.analytic_ratio() * std::sqrt(det);
  const double ball = unit_ball_volume(d) * std::pow(w.seed_radius(), d);
  const Mat inv = w.expansive().inverse();

  // Stratum l samples E^{-l} B; weights proportional to q^l.
  std::vector<double> weights(static_cast<std::size_t>(jm) + 1);
  double wsum = 0.0;
  for (int l = 0; l <= jm; ++l) wsum += (weights[static_cast<std::size_t>(l)] = std::pow(q, l));
  std::vector<std::size_t> counts(weights.size());
  std::size_t assigned = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    counts[l] = static_cast<std::size_t>(std::floor(static_cast<double>(mc.samples) * weights[l] / wsum));
    assigned += counts[l];
  }
  counts[0] += mc.samples - assigned;

  std::vector<Mat> inv_powers(weights.size());
  inv_powers[0] = Mat::Identity(d, d);
  for (std::size_t l = 1; l < inv_powers.size(); ++l) inv_powers[l] = inv * inv_powers[l - 1];

  const std::size_t n_levels = static_cast<std::size_t>(levels);
  const std::size_t extra_size = counts.size() * n_levels * 2;
  const double r2 = w.seed_radius() * w.seed_radius();
  const int horizon = jm + 64;

  ShardState total = run_shards(counts, extra_size, mc, [&](std::size_t l, std::mt19937_64& rng, ShardState& st) {
    std::array<double, 3> u{}, x{}, y{}, z{};
    uniform_in_ball(rng, d, w.seed_radius(), u.data());
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += inv_powers[l](i, c) * u[c];
      x[i] = s;
    }
    // Walk the orbit once: visits to B give both the level and the mixture density.
    y = x;
    int last = -1;
    std::vector<int> visits;
    bool escaped = false;
    for (int j = 0; j <= horizon; ++j) {
      double n2 = 0.0;
      for (int c = 0; c < d; ++c) n2 += y[c] * y[c];
      if (n2 <= r2) {
        last = j;
        visits.push_back(j);
      }
      if (n2 > 1.0) {
        escaped = true;
        break;
      }
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += w.expansive()(i, c) * y[c];
        z[i] = s;
      }
      y = z;
    }
    if (!escaped) throw NumericalError("orbit did not leave the unit ball within the iteration horizon");
    // Q(x) det^{-last} |B| = sum over visited strata k of n_k det^{k - last}.
    double scaled_density = 0.0;
    for (int k : visits) {
      if (k > jm) continue;
      scaled_density += static_cast<double>(counts[static_cast<std::size_t>(k)]) * std::exp((k - last) * log_det);
    }
    double a = 0.0, b = 0.0;
    if (last >= 0 && scaled_density > 0.0) {
      const double base = ball * std::pow(q, last) / scaled_density;
      if (last <= jm) b = base;                         // phi(x)^2
      if (last >= 1 && last <= jm) a = base / sigma;    // phi(x) phi(E x)
      if (static_cast<std::size_t>(last) < n_levels) {
        const double ind = ball * std::exp(-last * log_det) / scaled_density;
        const std::size_t at = (l * n_levels + static_cast<std::size_t>(last)) * 2;
        st.extra[at] += ind;
        st.extra[at + 1] += ind * ind;
      }
    }
    st.strata[l].add(a, b);
  });

  const RatioEstimate est = ratio_of_sums(total.strata);
  ExpansiveOverlapReport rep;
  rep.overlap.family = w.family();
  rep.overlap.params = w.params();
  rep.overlap.method = "monte-carlo";
  rep.overlap.analytic_ratio = w.analytic_ratio();
  rep.overlap.measured_ratio = std::sqrt(det) * est.ratio;
  rep.overlap.std_error = std::sqrt(det) * est.std_error;
  rep.overlap.samples = mc.samples;
  rep.overlap.seed = mc.seed;
  rep.truncated_ratio = w.truncated_ratio();
  rep.level_measure.assign(n_levels, 0.0);
  rep.level_std_error.assign(n_levels, 0.0);
  for (std::size_t j = 0; j < n_levels; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
      const double n = total.strata[l].n;
      const double s1 = total.extra[(l * n_levels + j) * 2];
      const double s2 = total.extra[(l * n_levels + j) * 2 + 1];
      mean += s1;
      if (n >= 2) var += n * (s2 - s1 * s1 / n) / (n - 1);
    }
    rep.level_measure[j] = mean;
    rep.level_std_error[j] = std::sqrt(std::max(var, 0.0));
  }
  return rep;
}

// ---------------------------------------------------------------------------

JordanWitness JordanWitness::shear(int k, double lambda, int dim) {
  require(k >= 5, "shear family needs k >= 5");
  require(lambda == 1.0 || lambda == -1.0, "shear eigenvalue must be +1 or -1");
  require(dim >= 2, "shear family needs dimension >= 2");
  Vec p = Vec::Zero(dim);
  p(0) = 1.0;
  p(1) = 1.0;
  return JordanWitness("jordan_shear", JordanBlock::real(lambda, dim).matrix(), k, p,
                       {{"k", k}, {"lambda", lambda}, {"dim", dim}});
}

JordanWitness JordanWitness::rotation(int k, double theta, int dim) {
  require(k >= 7, "rotation family needs k >= 7");
  require(dim >= 4 && dim % 2 == 0, "rotation family needs an even dimension >= 4");
  require(std::isfinite(theta), "theta must be finite");
  Vec p = Vec::Zero(dim);
  p.head(4).setOnes();
  return JordanWitness("jordan_rotation", JordanBlock::rotation(std::cos(theta), std::sin(theta), dim / 2).matrix(),
                       k, p, {{"k", k}, {"theta", theta}, {"dim", dim}});
}

JordanWitness::JordanWitness(std::string family, Mat matrix, int k, Vec base_point, nlohmann::json params)
    : family_(std::move(family)), matrix_(std::move(matrix)), k_(k), params_(std::move(params)) {
  const double scale = std::ldexp(1.0, -k);
  center_ = scale * base_point;
  std::vector<Mat> powers(static_cast<std::size_t>(k) + 2);
  powers[0] = Mat::Identity(dim(), dim());
  for (std::size_t j = 1; j < powers.size(); ++j) powers[j] = matrix_ * powers[j - 1];
  std::vector<double> norms(powers.size());
  for (std::size_t j = 0; j < powers.size(); ++j) norms[j] = spectral_norm(powers[j]);

  // A^m S and S are disjoint when ||A^m c - c|| > r (||A^m|| + 1); images
  // A^i S, A^j S then separate through A^{j-i}. m runs to k+1 so that A^{k+1} S
  // misses the union as well.
  double r = 0.25 * scale;
  const double floor = 1e-14 * scale;
  auto separated = [&](double radius) {
    for (std::size_t m = 1; m < powers.size(); ++m) {
      if ((powers[m] * center_ - center_).norm() <= radius * (norms[m] + 1.0)) return false;
    }
    return true;
  };
  while (!separated(r)) {
    r *= 0.5;
    if (r < floor) throw NumericalError("images of the base ball collide for every admissible radius");
  }
  radius_ = r;
  double reach = 0.0;
  for (int j = 0; j <= k; ++j) {
    const auto js = static_cast<std::size_t>(j);
    reach = std::max(reach, (powers[js] * center_).norm() + r * norms[js]);
  }
  require(reach <= 1.0, "images of the base ball leave the unit ball for this k and dimension");
  support_radius_ = reach;
  const Mat inv = matrix_.inverse();
  inverse_powers_.resize(static_cast<std::size_t>(k) + 1);
  inverse_powers_[0] = Mat::Identity(dim(), dim());
  for (std::size_t j = 1; j < inverse_powers_.size(); ++j) inverse_powers_[j] = inv * inverse_powers_[j - 1];
  params_["ball_radius"] = radius_;
}

nlohmann::json JordanWitness::params() const { return params_; }

double JordanWitness::operator()(const Vec& x) const {
  require(x.size() == dim(), "point dimension differs from the witness dimension");
  const double r2 = radius_ * radius_;
  int count = 0;
  for (const Mat& p : inverse_powers_) {
    if ((p * x - center_).squaredNorm() <= r2) ++count;
  }
  return count;
}

JordanOverlapReport measure_overlap(const JordanWitness& w, const MonteCarloOptions& mc) {
  const std::size_t images = static_cast<std::size_t>(w.k()) + 1;
  require(mc.samples >= 2 * images, "Monte Carlo needs at least two samples per image");
  std::vector<std::size_t> counts(images, mc.samples / images);
  for (std::size_t j = 0; j < mc.samples % images; ++j) ++counts[j];
  const int d = w.dim();
  std::vector<Mat> powers(images);
  powers[0] = Mat::Identity(d, d);
  for (std::size_t j = 1; j < images; ++j) powers[j] = w.matrix() * powers[j - 1];
  std::vector<Mat> inverse_powers(images);
  for (std::size_t j = 0; j < images; ++j) inverse_powers[j] = powers[j].inverse();
  const double ball = unit_ball_volume(d) * std::pow(w.ball_radius(), d);
  const double det = std::abs(w.matrix().determinant());

  ShardState total = run_shards(counts, 1, mc, [&](std::size_t l, std::mt19937_64& rng, ShardState& st) {
    Vec v(d);
    uniform_in_ball(rng, d, w.ball_radius(), v.data());
    const Vec x = powers[l] * (w.center() + v);
    const double fx = w(x);
    const double fax = w(Vec(w.matrix() * x));
    // Mixture density: each image is sampled uniformly; |A^j S| = |S| |det|^j.
    double density = 0.0;
    for (std::size_t j = 0; j < images; ++j) {
      const Vec back = inverse_powers[j] * x - w.center();
      if (back.squaredNorm() <= w.ball_radius() * w.ball_radius())
        density += static_cast<double>(counts[j]) / (ball * std::pow(det, static_cast<double>(j)));
    }
    if (fx > 1.0) st.extra[0] += 1.0;
    st.strata[l].add(fx * fax / density, fx * fx / density);
  });

  const RatioEstimate est = ratio_of_sums(total.strata);
  JordanOverlapReport rep;
  rep.overlap.family = w.family();
  rep.overlap.params = w.params();
  rep.overlap.method = "monte-carlo";
  rep.overlap.analytic_ratio = w.analytic_ratio();
  rep.overlap.measured_ratio = std::sqrt(det) * est.ratio;
  rep.overlap.std_error = std::sqrt(det) * est.std_error;
  rep.overlap.samples = mc.samples;
  rep.overlap.seed = mc.seed;
  rep.multiply_covered = static_cast<std::size_t>(total.extra[0]);
  return rep;
}

// ---------------------------------------------------------------------------

BallWitness::BallWitness(const Mat& matrix) : matrix_(matrix) {
  require(matrix.rows() == matrix.cols() && matrix.rows() >= 1, "ball witness needs a square matrix");
  const Mat gram = matrix.transpose() * matrix;
  require((gram - Mat::Identity(matrix.rows(), matrix.cols())).cwiseAbs().maxCoeff() <= 1e-10,
          "ball witness needs an orthogonal matrix");
}

nlohmann::json BallWitness::params() const { return {{"dim", dim()}}; }

// ---------------------------------------------------------------------------

ComposedWitness::ComposedWitness(Mat transform, std::vector<std::shared_ptr<const Witness>> blocks)
    : transform_(std::move(transform)), blocks_(std::move(blocks)) {
  require(transform_.rows() == transform_.cols() && transform_.rows() >= 1, "transform must be square");
  require(!blocks_.empty(), "composed witness needs at least one block");
  int total = 0;
  for (const auto& b : blocks_) {
    require(b != nullptr, "null block witness");
    total += b->dim();
  }
  require(total == transform_.rows(), "block dimensions do not add up to the transform size");
  const Eigen::JacobiSVD<Mat> svd(transform_);
  const auto& sv = svd.singularValues();
  require(sv(sv.size() - 1) > 1e-14 * sv(0), "transform is singular");
  transform_inverse_ = transform_.inverse();
  Mat jordan = Mat::Zero(total, total);
  int at = 0;
  for (const auto& b : blocks_) {
    jordan.block(at, at, b->dim(), b->dim()) = b->matrix();
    at += b->dim();
  }
  matrix_ = transform_ * jordan * transform_inverse_;
  const int d = total;
  scale_ = std::sqrt(static_cast<double>(blocks_.size())) * sv(0);
  prefactor_ = std::pow(scale_, 0.5 * d) / std::sqrt(std::abs(transform_.determinant()));
}

nlohmann::json ComposedWitness::params() const {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : blocks_) blocks.push_back({{"family", b->family()}, {"params", b->params()}});
  return {{"blocks", blocks}, {"scale", scale_}, {"prefactor", prefactor_}};
}

double ComposedWitness::analytic_ratio() const {
  double r = 1.0;
  for (const auto& b : blocks_) r *= b->analytic_ratio();
  return r;
}

double ComposedWitness::operator()(const Vec& x) const {
  require(x.size() == dim(), "point dimension differs from the witness dimension");
  const Vec y = scale_ * (transform_inverse_ * x);
  double v = prefactor_;
  int at = 0;
  for (const auto& b : blocks_) {
    v *= (*b)(y.segment(at, b->dim()));
    if (v == 0.0) return 0.0;
    at += b->dim();
  }
  return v;
}

// ---------------------------------------------------------------------------

OverlapReport measure_overlap_grid(const Witness& w, int cells_per_axis) {
  const int d = w.dim();
  require(d >= 1 && d <= 3, "grid overlap supports dimensions 1 to 3");
  require(cells_per_axis >= 2, "grid too coarse");
  const double extent = w.support_radius();
  const double h = 2.0 * extent / cells_per_axis;
  Vec x(d);
  std::array<int, 3> k{};
  double cross = 0.0, norm = 0.0;
  while (true) {
    for (int c = 0; c < d; ++c) x(c) = -extent + (k[c] + 0.5) * h;
    const double f = w(x);
    if (f != 0.0) {
      norm += f * f;
      cross += f * w(Vec(w.matrix() * x));
    }
    int c = d - 1;
    while (c >= 0 && ++k[c] == cells_per_axis) {
      k[c] = 0;
      --c;
    }
    if (c < 0) break;
  }
  require(norm > 0.0, "witness is numerically zero on the grid");
  OverlapReport rep;
  rep.family = w.family();
  rep.params = w.params();
  rep.method = "grid-quadrature";
  rep.analytic_ratio = w.analytic_ratio();
  rep.measured_ratio = std::sqrt(std::abs(w.matrix().determinant())) * cross / norm;
  rep.samples = static_cast<std::size_t>(std::pow(cells_per_axis, d));
  return rep;
}

OverlapReport measure_overlap_uniform(const Witness& w, const MonteCarloOptions& mc) {
  require(mc.samples >= 2, "Monte Carlo needs at least two samples");
  const int d = w.dim();
  const double radius = w.support_radius();
  ShardState total = run_shards({mc.samples}, 0, mc, [&](std::size_t, std::mt19937_64& rng, ShardState& st) {
    Vec x(d);
    uniform_in_ball(rng, d, radius, x.data());
    const double f = w(x);
    const double g = f != 0.0 ? w(Vec(w.matrix() * x)) : 0.0;
    st.strata[0].add(f * g, f * f);
  });
  const RatioEstimate est = ratio_of_sums(total.strata);
  const double s = std::sqrt(std::abs(w.matrix().determinant()));
  OverlapReport rep;
  rep.family = w.family();
  rep.params = w.params();
  rep.method = "monte-carlo";
  rep.analytic_ratio = w.analytic_ratio();
  rep.measured_ratio = s * est.ratio;
  rep.std_error = s * est.std_error;
  rep.samples = mc.samples;
  rep.seed = mc.seed;
  return rep;
}

std::shared_ptr<const Witness> block_witness(const JordanBlock& block, double sigma_fraction, int k) {
  const double modulus = block.modulus();
  const Mat m = block.matrix();
  if (std::abs(modulus - 1.0) > 1e-12) {
    require(sigma_fraction > 0.0 && sigma_fraction < 1.0, "sigma fraction must lie in (0, 1)");
    const double det = std::abs(m.determinant());
    const double det_e = std::max(det, 1.0 / det);
    return std::make_shared<ExpansiveWitness>(m, sigma_fraction * std::sqrt(det_e));
  }
  if (block.size == 1) return std::make_shared<BallWitness>(m);
  if (block.kind == JordanBlock::Kind::real) {
    return std::make_shared<JordanWitness>(JordanWitness::shear(k, block.lambda, block.size));
  }
  const double theta = std::atan2(block.beta, block.lambda);
  return std::make_shared<JordanWitness>(JordanWitness::rotation(std::max(k, 7), theta, 2 * block.size));
}

}  // namespace nonlocal
