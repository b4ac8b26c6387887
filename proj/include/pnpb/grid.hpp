#pragma once

#include <array>
#include <cstddef>

namespace pnpb {

/// Uniform cell-centred mesh on [-L, L]^dim with 2N+1 nodes per axis.
///
/// Node j (0-based, 0..2N) sits at x_j = (j - N)*dx, dx = L/N, so x_{2N-j} = -x_j exactly. Interior cells
/// are [x_j - dx/2, x_j + dx/2]; the first and last cell on each axis are
/// half-width. Cells are stored x-fastest: index = ix + (2N+1)*iy.
class Grid {
 public:
  Grid() = default;
  Grid(int dim, int n, double half_extent = 1.0);

  int dim() const noexcept { return dim_; }
  int n() const noexcept { return n_; }
  double half_extent() const noexcept { return half_extent_; }
  double dx() const noexcept { return half_extent_ / n_; }
  int nodes_per_axis() const noexcept { return 2 * n_ + 1; }
  std::size_t cell_count() const noexcept;

  /// dx^dim: the uniform weight used for discrete masses and energies.
  double cell_weight() const noexcept;
  /// Total uniform weight, cell_weight() * cell_count().
  double measure() const noexcept;

  double coord(int node) const noexcept { return (node - n_) * dx(); }
  std::size_t index(int ix, int iy = 0) const noexcept {
    return static_cast<std::size_t>(ix) + static_cast<std::size_t>(nodes_per_axis()) * iy;
  }
  std::array<int, 2> node_of(std::size_t cell) const noexcept;
  std::array<double, 2> position(std::size_t cell) const noexcept;

  /// Geometric cell measure (boundary cells counted at half width per axis).
  double geometric_weight(std::size_t cell) const noexcept;

  bool operator==(const Grid&) const = default;

 private:
  int dim_ = 1;
  int n_ = 1;
  double half_extent_ = 1.0;
};

}  // namespace pnpb
