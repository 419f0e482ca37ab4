#pragma once

// Uniform lattice on the ball B_R plus the exterior extension zone, and the
// Dirichlet-constrained operator T = D - W assembled by the midpoint rule.

#include "nonlocal/kernel.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace nonlocal {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// cell_centered: nodes at (k + 1/2) h.  vertex_centered: nodes at k h.
enum class LatticeOffset { cell_centered, vertex_centered };

struct GridOptions {
  LatticeOffset offset = LatticeOffset::cell_centered;
  std::size_t max_nodes = 8'000'000;  // cap on interior + extension lattice size
};

class Grid {
 public:
  int dim() const { return dim_; }
  double radius() const { return radius_; }
  double spacing() const { return spacing_; }
  double cell_volume() const { return cell_volume_; }
  LatticeOffset offset() const { return offset_; }
  double extension_radius() const { return extension_radius_; }

  std::size_t size() const { return interior_count_; }
  // Coordinates of interior node i (dim() values).
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  Vec point_vec(std::size_t i) const;
  std::span<const int> index(std::size_t i) const {
    return {indices_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }

  double coordinate(int lattice_index) const { return (lattice_index + shift_) * spacing_; }
  // Interior node number of the lattice index tuple, or -1.
  long interior_lookup(std::span<const int> lattice_index) const;

  // Lattice nodes in the extension box that are not interior (ũ = 0 there).
  // Materialized on demand; intended for small grids and verification.
  std::vector<Vec> extension_nodes() const;
  std::size_t extension_box_size() const;

  // Count of lattice nodes strictly inside B_R, computed row by row.
  static std::size_t interior_count(int dim, double radius, double spacing,
                                    LatticeOffset offset = LatticeOffset::cell_centered);

 private:
  friend Grid build_grid(int, double, double, const MapSpec&, const GridOptions&);

  int dim_ = 1;
  double radius_ = 0.0;
  double spacing_ = 0.0;
  double cell_volume_ = 0.0;
  double shift_ = 0.5;
  LatticeOffset offset_ = LatticeOffset::cell_centered;
  double extension_radius_ = 0.0;
  std::size_t interior_count_ = 0;
  std::vector<double> coords_;
  std::vector<int> indices_;
  // Dense lookup over the interior index box [lo_, hi_]^dim.
  int lo_ = 0;
  int hi_ = 0;
  std::vector<long> lookup_;
};

Grid build_grid(int dim, double radius, double spacing, const MapSpec& map,
                const GridOptions& options = {});

struct AssemblyOptions {
  int jobs = 1;
  std::size_t max_nonzeros = 200'000'000;
};

class DiscreteOperator {
 public:
  DiscreteOperator(Grid grid, SparseMatrix coupling, Vec diagonal);

  const Grid& grid() const { return grid_; }
  // W, with W_ij = K(x_i, x_j) h^d over interior pairs.
  const SparseMatrix& coupling() const { return coupling_; }
  // d_i = sum over interior and extension nodes of K(x_i, x_j) h^d.
  const Vec& diagonal() const { return diagonal_; }
  // T = D - W.
  const SparseMatrix& matrix() const { return matrix_; }

  std::size_t size() const { return static_cast<std::size_t>(diagonal_.size()); }
  // Gershgorin bound: lambda_max(T) <= 2 max_i d_i.
  double lambda_max_bound() const { return 2.0 * diagonal_.maxCoeff(); }

  Vec apply(const Vec& u, int jobs = 1) const;
  // <Tu, u> in the unweighted Euclidean pairing.
  double quadratic_form(const Vec& u) const;

  // "row col value" per line, zero-based indices.
  void write_triplets(std::ostream& out) const;

 private:
  Grid grid_;
  SparseMatrix coupling_;
  Vec diagonal_;
  SparseMatrix matrix_;
};

DiscreteOperator assemble_operator(const Grid& grid, const DeformationKernel& kernel,
                                   const AssemblyOptions& options = {});

// Visits every lattice node y (with kernel value K(x_i, y) != 0 possible) in
// the support neighbourhood of interior node i: the box around a(x_i) of
// half-width 1 and the box bounding a^{-1}(B_1(x_i)). Each node is visited
// once. Shared by assembly and the direct energy evaluation.
class NeighbourScan {
 public:
  NeighbourScan(const Grid& grid, const DeformationKernel& kernel);

  // f(lattice_index, coords, kernel_value) for kernel_value > 0.
  template <class F>
  void for_each(std::size_t i, F&& f) const;

 private:
  void boxes(std::size_t i, std::array<int, 3>& lo1, std::array<int, 3>& hi1, std::array<int, 3>& lo2,
             std::array<int, 3>& hi2, std::array<double, 3>& ax) const;

  const Grid& grid_;
  const DeformationKernel& kernel_;
  std::array<double, 3> inverse_halfwidth_{};
  bool linear_ = true;
};

template <class F>
void NeighbourScan::for_each(std::size_t i, F&& f) const {
  const int d = grid_.dim();
  std::array<int, 3> lo1{}, hi1{}, lo2{}, hi2{};
  std::array<double, 3> ax{};
  boxes(i, lo1, hi1, lo2, hi2, ax);
  const auto x = grid_.point(i);
  const Profile& psi = kernel_.profile();
  const MapSpec& map = kernel_.map();

  std::array<int, 3> k{};
  std::array<double, 3> y{}, ay{}, z1{}, z2{};
  auto visit = [&] {
    for (int c = 0; c < d; ++c) y[c] = grid_.coordinate(k[c]);
    map.apply_into(y.data(), ay.data());
    for (int c = 0; c < d; ++c) {
      z1[c] = y[c] - ax[c];
      z2[c] = x[c] - ay[c];
    }
    const double value = psi.eval(z1.data()) + psi.eval(z2.data());
    if (value > 0.0) f(std::span<const int>(k.data(), d), std::span<const double>(y.data(), d), value);
  };
  auto inside = [&](const std::array<int, 3>& lo, const std::array<int, 3>& hi) {
    for (int c = 0; c < d; ++c)
      if (k[c] < lo[c] || k[c] > hi[c]) return false;
    return true;
  };
  // Odometer over a box; second pass skips nodes already seen in the first box.
  auto sweep = [&](const std::array<int, 3>& lo, const std::array<int, 3>& hi, bool skip_first) {
    for (int c = 0; c < d; ++c)
      if (lo[c] > hi[c]) return;
    k = lo;
    while (true) {
      if (!skip_first || !inside(lo1, hi1)) visit();
      int c = d - 1;
      while (c >= 0 && ++k[c] > hi[c]) {
        k[c] = lo[c];
        --c;
      }
      if (c < 0) break;
    }
  };
  sweep(lo1, hi1, false);
  sweep(lo2, hi2, true);
}

}  // namespace nonlocal
