#include "nonlocal/spectra.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace nonlocal {

namespace {

using ApplyFn = std::function<Vec(const Vec&)>;

struct LanczosCycle {
  Mat basis;         // n x k, orthonormal columns
  Vec ritz_values;   // ascending, of the projected operator
  Mat ritz_coeffs;   // k x k
};

// k steps of Lanczos from unit vector `start`, full reorthogonalization.
LanczosCycle lanczos_cycle(const ApplyFn& apply, const Vec& start, int steps, int& applications) {
  const Eigen::Index n = start.size();
  const int k_max = static_cast<int>(std::min<Eigen::Index>(steps, n));
  Mat basis(n, k_max);
  Vec alpha(k_max), beta(k_max);
  basis.col(0) = start;
  int k = 0;
  for (; k < k_max; ++k) {
    Vec w = apply(basis.col(k));
    ++applications;
    alpha(k) = basis.col(k).dot(w);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      const Vec coeffs = basis.leftCols(k + 1).transpose() * w;
      w.noalias() -= basis.leftCols(k + 1) * coeffs;
    }
    beta(k) = w.norm();
    if (k + 1 == k_max) {
      ++k;
      break;
    }
    const double scale = std::max(1.0, std::abs(alpha(k)));
    if (beta(k) <= 1e-14 * scale) {
      ++k;
      break;  // invariant subspace
    }
    basis.col(k + 1) = w / beta(k);
  }
  Mat tri = Mat::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    tri(i, i) = alpha(i);
    if (i + 1 < k) tri(i, i + 1) = tri(i + 1, i) = beta(i);
  }
  // Symmetrize the projection exactly through the basis (accounts for reorthogonalization).
  Eigen::SelfAdjointEigenSolver<Mat> eig(tri);
  return {basis.leftCols(k), eig.eigenvalues(), eig.eigenvectors()};
}

double sign_consistency(const Vec& v) {
  const double l1 = v.cwiseAbs().sum();
  return l1 > 0.0 ? std::abs(v.sum()) / l1 : 0.0;
}

}  // namespace

SpectralResult smallest_eigenpair(const DiscreteOperator& op, const EigenOptions& options) {
  require(options.tol > 0.0, "eigensolver tolerance must be positive");
  require(options.maxiter > 0, "eigensolver maxiter must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(op.size());
  const double lambda_max_bound = op.lambda_max_bound();
  const double threshold = options.tol * lambda_max_bound;

  Eigen::SparseMatrix<double> colmajor = op.matrix();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.compute(colmajor);
  const bool shift_invert = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0;

  ApplyFn apply;
  if (shift_invert) {
    apply = [&ldlt](const Vec& v) { return Vec(ldlt.solve(v)); };
  } else {
    apply = [&op](const Vec& v) { return op.apply(v); };
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 0.1);
  Vec start(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = 1.0 + unif(rng);
  start.normalize();

  SpectralResult best;
  best.lambda_max_bound = lambda_max_bound;
  best.residual = std::numeric_limits<double>::infinity();
  int applications = 0;

  while (applications < options.maxiter) {
    const int steps = std::min(options.krylov_dim, options.maxiter - applications);
    const LanczosCycle cycle = lanczos_cycle(apply, start, std::max(steps, 1), applications);
    const Eigen::Index k = cycle.ritz_values.size();

    // Index of the wanted Ritz pair and its neighbour in the spectrum of T.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    if (shift_invert) std::reverse(order.begin(), order.end());  // largest of T^{-1} first

    auto ritz_vector = [&](Eigen::Index idx) { return Vec(cycle.basis * cycle.ritz_coeffs.col(idx)); };
    Vec v = ritz_vector(order[0]);
    v.normalize();
    Vec tv = op.apply(v);
    double lambda = v.dot(tv);
    bool near_degenerate = false;

    if (k > 1) {
      Vec v2 = ritz_vector(order[1]);
      v2.normalize();
      const double lambda2 = v2.dot(op.apply(v2));
      if (std::abs(lambda2 - lambda) <= 10.0 * threshold) {
        near_degenerate = true;
        // The principal eigenvector is the one of constant sign.
        if (sign_consistency(v2) > sign_consistency(v)) {
          v = v2;
          tv = op.apply(v);
          lambda = lambda2;
        }
      }
    }
    const double residual = (tv - lambda * v).norm();

    if (residual < best.residual) {
      best.lambda_T = lambda;
      best.eigvec = v;
      best.residual = residual;
      best.near_degenerate = near_degenerate;
    }
    if (residual <= threshold) {
      best.converged = true;
      break;
    }
    if (k < std::min<Eigen::Index>(options.krylov_dim, n) && k == n) break;  // exhausted space
    start = v;
  }

  best.iterations = applications;
  best.lambda1 = 2.0 * best.lambda_T;
  if (best.eigvec.sum() < 0.0) best.eigvec = -best.eigvec;
  const double weighted_norm = std::sqrt(best.eigvec.squaredNorm() * op.grid().cell_volume());
  best.eigvec /= weighted_norm;
  return best;
}

double rayleigh_quotient(const Grid& grid, const DeformationKernel& kernel, const Vec& u) {
  require(static_cast<std::size_t>(u.size()) == grid.size(), "vector length differs from the grid size");
  const double mass = u.squaredNorm();
  require(mass > 0.0, "Rayleigh quotient of the zero vector is undefined");
  const NeighbourScan scan(grid, kernel);
  double energy = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ui = u(static_cast<Eigen::Index>(i));
    double row = 0.0;
    scan.for_each(i, [&](std::span<const int> k, std::span<const double>, double value) {
      const long j = grid.interior_lookup(k);
      if (j >= 0) {
        const double diff = ui - u(j);
        row += value * diff * diff;
      } else {
        // pair (i, ext) and its mirror (ext, i)
        row += 2.0 * value * ui * ui;
      }
    });
    energy += row;
  }
  const double vol = grid.cell_volume();
  return energy * vol * vol / (mass * vol);
}

// ---------------------------------------------------------------------------

bool ConvergenceTable::all_converged() const {
  return std::all_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) { return r.converged; });
}

void ConvergenceTable::write_csv(std::ostream& out) const {
  out << "R,h,lambda1,lambda_T,iterations,residual,converged\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.radius << ',' << r.spacing << ',' << r.lambda1 << ',' << r.lambda_T << ',' << r.iterations << ','
        << r.residual << ',' << (r.converged ? "true" : "false") << '\n';
  }
}

std::optional<TailFit> fit_power_tail(const std::array<double, 3>& radii, const std::array<double, 3>& values) {
  const auto [r1, r2, r3] = radii;
  const auto [v1, v2, v3] = values;
  if (!(r1 > 0.0 && r1 < r2 && r2 < r3)) return std::nullopt;
  const double d1 = v1 - v2;
  const double d2 = v2 - v3;
  if (!(d1 > 0.0 && d2 > 0.0)) return std::nullopt;
  const double target = d1 / d2;
  auto ratio = [&](double p) {
    return (std::pow(r1, -p) - std::pow(r2, -p)) / (std::pow(r2, -p) - std::pow(r3, -p));
  };
  double lo = 1e-6;
  double hi = 50.0;
  if (target <= ratio(lo) || target >= ratio(hi)) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ratio(mid) < target) lo = mid; else hi = mid;
  }
  const double p = 0.5 * (lo + hi);
  const double c = d1 / (std::pow(r1, -p) - std::pow(r2, -p));
  return TailFit{v3 - c * std::pow(r3, -p), c, p};
}

ConvergenceTable sweep_radius(const DeformationKernel& kernel, const std::vector<double>& radii,
                              const SpacingRule& rule, const SweepOptions& options) {
  require(!radii.empty(), "radius sweep needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0, "radii must be positive");
    if (i > 0) require(radii[i] > radii[i - 1], "radii must be strictly increasing");
    require(rule.spacing(radii[i]) <= radii[i] / 4.0 + 1e-15, "spacing rule must give h <= R/4");
  }

  ConvergenceTable table;
  table.rows.resize(radii.size());
  parallel_for(radii.size(), options.jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double radius = radii[i];
      const double h = rule.spacing(radius);
      const Grid grid = build_grid(kernel.dim(), radius, h, kernel.map(), options.grid);
      const DiscreteOperator op = assemble_operator(grid, kernel);
      const SpectralResult res = smallest_eigenpair(op, options.eigen);
      ConvergenceRow& row = table.rows[i];
      row.radius = radius;
      row.spacing = h;
      row.lambda1 = res.lambda1;
      row.lambda_T = res.lambda_T;
      row.iterations = res.iterations;
      row.residual = res.residual;
      row.converged = res.converged;
      row.nodes = grid.size();
      row.min_eigvec = res.eigvec.minCoeff();
    }
  });

  const auto& rows = table.rows;
  if (rows.size() == 1) {
    table.limit_estimate = rows.front().lambda1;
    table.limit_method = "single-row";
    return table;
  }
  table.limit_estimate = rows.back().lambda1;
  table.limit_method = "last-value";
  if (rows.size() >= 3) {
    const std::size_t m = rows.size();
    const auto fit = fit_power_tail({rows[m - 3].radius, rows[m - 2].radius, rows[m - 1].radius},
                                    {rows[m - 3].lambda1, rows[m - 2].lambda1, rows[m - 1].lambda1});
    if (fit) {
      table.limit_estimate = fit->limit;
      table.limit_method = "power-tail";
      table.tail_exponent = fit->exponent;
    }
  }
  return table;
}

}  // namespace nonlocal
