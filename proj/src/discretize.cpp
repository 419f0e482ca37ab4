#include "nonlocal/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace nonlocal {

namespace {

double lattice_shift(LatticeOffset offset) {
  return offset == LatticeOffset::cell_centered ? 0.5 : 0.0;
}

bool strictly_inside(std::span<const double> p, double radius) {
  double r2 = 0.0;
  for (double c : p) r2 += c * c;
  return r2 < radius * radius;
}

// Nodes with acc + sum of the remaining squared coordinates < radius^2. The
// squares are added in the same order as strictly_inside so that nodes lying
// on the sphere are classified identically.
std::size_t count_rows(int remaining_dims, double acc, double radius, double h, double shift) {
  const double r2 = radius * radius;
  if (!(acc < r2)) return 0;
  const double r = std::sqrt(r2 - acc);
  const long lo = static_cast<long>(std::floor(-r / h - shift)) - 1;
  const long hi = static_cast<long>(std::ceil(r / h - shift)) + 1;
  std::size_t total = 0;
  for (long k = lo; k <= hi; ++k) {
    const double c = (k + shift) * h;
    const double next = acc + c * c;
    if (remaining_dims == 1) {
      total += next < r2 ? 1 : 0;
    } else {
      total += count_rows(remaining_dims - 1, next, radius, h, shift);
    }
  }
  return total;
}

}  // namespace

Vec Grid::point_vec(std::size_t i) const {
  const auto p = point(i);
  return Eigen::Map<const Vec>(p.data(), dim_);
}

long Grid::interior_lookup(std::span<const int> lattice_index) const {
  std::size_t flat = 0;
  const std::size_t width = static_cast<std::size_t>(hi_ - lo_ + 1);
  for (int c = 0; c < dim_; ++c) {
    const int k = lattice_index[c];
    if (k < lo_ || k > hi_) return -1;
    flat = flat * width + static_cast<std::size_t>(k - lo_);
  }
  return lookup_[flat];
}

std::size_t Grid::extension_box_size() const {
  const int lo = static_cast<int>(std::floor(-extension_radius_ / spacing_ - shift_));
  const int hi = static_cast<int>(std::ceil(extension_radius_ / spacing_ - shift_));
  const std::size_t width = static_cast<std::size_t>(hi - lo + 1);
  std::size_t total = 1;
  for (int c = 0; c < dim_; ++c) total *= width;
  return total;
}

std::vector<Vec> Grid::extension_nodes() const {
  const int lo = static_cast<int>(std::floor(-extension_radius_ / spacing_ - shift_));
  const int hi = static_cast<int>(std::ceil(extension_radius_ / spacing_ - shift_));
  std::vector<Vec> nodes;
  std::vector<int> k(dim_, lo);
  Vec y(dim_);
  while (true) {
    if (interior_lookup(k) < 0) {
      for (int c = 0; c < dim_; ++c) y(c) = coordinate(k[c]);
      nodes.push_back(y);
    }
    int c = dim_ - 1;
    while (c >= 0 && ++k[c] > hi) {
      k[c] = lo;
      --c;
    }
    if (c < 0) break;
  }
  return nodes;
}

std::size_t Grid::interior_count(int dim, double radius, double spacing, LatticeOffset offset) {
  require(dim >= 1 && dim <= 3, "grid dimension must be 1, 2 or 3");
  require(spacing > 0.0 && radius > 0.0, "grid radius and spacing must be positive");
  return count_rows(dim, 0.0, radius, spacing, lattice_shift(offset));
}

Grid build_grid(int dim, double radius, double spacing, const MapSpec& map, const GridOptions& options) {
  require(dim >= 1 && dim <= 3, "grid dimension must be 1, 2 or 3");
  require(std::isfinite(spacing) && spacing > 0.0, "grid spacing must be positive");
  require(std::isfinite(radius) && radius > 0.0, "grid radius must be positive");
  require(spacing < 2.0 * radius, "grid spacing must be smaller than the domain diameter");
  require(radius >= spacing, "grid radius must be at least one spacing");
  require(map.dim() == dim, "map dimension differs from grid dimension");

  Grid grid;
  grid.dim_ = dim;
  grid.radius_ = radius;
  grid.spacing_ = spacing;
  grid.cell_volume_ = std::pow(spacing, dim);
  grid.offset_ = options.offset;
  grid.shift_ = lattice_shift(options.offset);

  // Extension zone: a(B_R) + B_1 together with a^{-1}(B_{R+1}).
  double forward_reach = 0.0;
  double inverse_reach = 0.0;
  if (map.is_linear()) {
    forward_reach = map.forward_lipschitz() * radius + 1.0;
    inverse_reach = map.inverse_lipschitz() * (radius + 1.0);
  } else {
    const Vec origin = Vec::Zero(dim);
    forward_reach = map.apply(origin).norm() + map.forward_lipschitz() * radius + 1.0;
    inverse_reach = map.apply_inverse(origin).norm() + map.inverse_lipschitz() * (radius + 1.0);
  }
  grid.extension_radius_ = std::max({radius, forward_reach, inverse_reach});

  grid.lo_ = static_cast<int>(std::floor(-radius / spacing - grid.shift_)) - 1;
  grid.hi_ = static_cast<int>(std::ceil(radius / spacing - grid.shift_)) + 1;
  const std::size_t width = static_cast<std::size_t>(grid.hi_ - grid.lo_ + 1);
  std::size_t box = 1;
  for (int c = 0; c < dim; ++c) box *= width;

  const std::size_t expected = Grid::interior_count(dim, radius, spacing, options.offset);
  if (expected + grid.extension_box_size() > options.max_nodes || box > options.max_nodes) {
    throw ValidationError("grid exceeds the node cap (" + std::to_string(options.max_nodes) + " nodes)");
  }

  grid.lookup_.assign(box, -1);
  grid.coords_.reserve(expected * dim);
  grid.indices_.reserve(expected * dim);
  std::vector<int> k(dim, grid.lo_);
  std::vector<double> p(dim);
  std::size_t flat = 0;
  while (true) {
    for (int c = 0; c < dim; ++c) p[c] = grid.coordinate(k[c]);
    if (strictly_inside(p, radius)) {
      grid.lookup_[flat] = static_cast<long>(grid.interior_count_++);
      grid.coords_.insert(grid.coords_.end(), p.begin(), p.end());
      grid.indices_.insert(grid.indices_.end(), k.begin(), k.end());
    }
    ++flat;
    int c = dim - 1;
    while (c >= 0 && ++k[c] > grid.hi_) {
      k[c] = grid.lo_;
      --c;
    }
    if (c < 0) break;
  }
  require(grid.interior_count_ > 0, "grid has no interior nodes");
  return grid;
}

// ---------------------------------------------------------------------------

NeighbourScan::NeighbourScan(const Grid& grid, const DeformationKernel& kernel)
    : grid_(grid), kernel_(kernel), linear_(kernel.map().is_linear()) {
  require(grid.dim() == kernel.dim(), "grid and kernel dimensions differ");
  const int d = grid.dim();
  if (linear_) {
    const Mat& inv = kernel.map().inverse_matrix();
    for (int c = 0; c < d; ++c) inverse_halfwidth_[c] = inv.row(c).norm();
  } else {
    for (int c = 0; c < d; ++c) inverse_halfwidth_[c] = kernel.map().inverse_lipschitz();
  }
}

void NeighbourScan::boxes(std::size_t i, std::array<int, 3>& lo1, std::array<int, 3>& hi1,
                          std::array<int, 3>& lo2, std::array<int, 3>& hi2, std::array<double, 3>& ax) const {
  const int d = grid_.dim();
  const double h = grid_.spacing();
  const double s = grid_.coordinate(0) / h;
  const auto x = grid_.point(i);
  kernel_.map().apply_into(x.data(), ax.data());
  const Vec pre = kernel_.map().apply_inverse(Eigen::Map<const Vec>(x.data(), d));
  for (int c = 0; c < d; ++c) {
    lo1[c] = static_cast<int>(std::floor((ax[c] - 1.0) / h - s));
    hi1[c] = static_cast<int>(std::ceil((ax[c] + 1.0) / h - s));
    lo2[c] = static_cast<int>(std::floor((pre(c) - inverse_halfwidth_[c]) / h - s));
    hi2[c] = static_cast<int>(std::ceil((pre(c) + inverse_halfwidth_[c]) / h - s));
  }
}

DiscreteOperator::DiscreteOperator(Grid grid, SparseMatrix coupling, Vec diagonal)
    : grid_(std::move(grid)), coupling_(std::move(coupling)), diagonal_(std::move(diagonal)) {
  require(coupling_.rows() == diagonal_.size() && coupling_.cols() == diagonal_.size(),
          "operator blocks have inconsistent sizes");
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(coupling_.nonZeros() + diagonal_.size()));
  for (int r = 0; r < coupling_.outerSize(); ++r) {
    entries.emplace_back(r, r, diagonal_(r));
    for (SparseMatrix::InnerIterator it(coupling_, r); it; ++it) entries.emplace_back(r, it.col(), -it.value());
  }
  matrix_.resize(coupling_.rows(), coupling_.cols());
  matrix_.setFromTriplets(entries.begin(), entries.end());
  matrix_.makeCompressed();
}

Vec DiscreteOperator::apply(const Vec& u, int jobs) const {
  require(static_cast<std::size_t>(u.size()) == size(), "operator applied to a vector of the wrong length");
  Vec out(u.size());
  const int* outer = matrix_.outerIndexPtr();
  const int* inner = matrix_.innerIndexPtr();
  const double* values = matrix_.valuePtr();
  parallel_for(size(), jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      double acc = 0.0;
      for (int p = outer[r]; p < outer[r + 1]; ++p) acc += values[p] * u(inner[p]);
      out(static_cast<Eigen::Index>(r)) = acc;
    }
  });
  return out;
}

double DiscreteOperator::quadratic_form(const Vec& u) const {
  return u.dot(apply(u));
}

void DiscreteOperator::write_triplets(std::ostream& out) const {
  out << std::setprecision(17);
  for (int r = 0; r < matrix_.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

DiscreteOperator assemble_operator(const Grid& grid, const DeformationKernel& kernel,
                                   const AssemblyOptions& options) {
  require(grid.dim() == kernel.dim(), "grid and kernel dimensions differ");
  const std::size_t n = grid.size();
  const double vol = grid.cell_volume();
  const NeighbourScan scan(grid, kernel);

  std::vector<std::vector<std::pair<int, double>>> rows(n);
  Vec diagonal(static_cast<Eigen::Index>(n));
  parallel_for(n, options.jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double sum = 0.0;
      auto& row = rows[i];
      scan.for_each(i, [&](std::span<const int> k, std::span<const double>, double value) {
        sum += value;
        const long j = grid.interior_lookup(k);
        if (j >= 0) row.emplace_back(static_cast<int>(j), value * vol);
      });
      std::sort(row.begin(), row.end());
      diagonal(static_cast<Eigen::Index>(i)) = sum * vol;
    }
  });

  std::size_t nnz = 0;
  for (const auto& row : rows) nnz += row.size();
  if (nnz > options.max_nonzeros) {
    throw ValidationError("operator exceeds the nonzero cap (" + std::to_string(options.max_nonzeros) + ")");
  }

  SparseMatrix coupling(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXi per_row(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) per_row(static_cast<Eigen::Index>(i)) = static_cast<int>(rows[i].size());
  coupling.reserve(per_row);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, w] : rows[i]) coupling.insert(static_cast<Eigen::Index>(i), j) = w;
  }
  coupling.makeCompressed();
  return DiscreteOperator(grid, std::move(coupling), std::move(diagonal));
}

}  // namespace nonlocal
