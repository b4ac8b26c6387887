#include "pnpb/grid.hpp"

#include <cmath>
#include <string>

#include "pnpb/error.hpp"

namespace pnpb {

Grid::Grid(int dim, int n, double half_extent) : dim_(dim), n_(n), half_extent_(half_extent) {
  if (dim != 1 && dim != 2) {
    throw Error(ErrorKind::InvalidParameter, "grid dimension must be 1 or 2, got " + std::to_string(dim));
  }
  if (n < 1) throw Error(ErrorKind::InvalidParameter, "grid N must be >= 1");
  if (!(half_extent > 0.0) || !std::isfinite(half_extent)) {
    throw Error(ErrorKind::InvalidParameter, "grid half extent must be positive");
  }
}

std::size_t Grid::cell_count() const noexcept {
  const auto per_axis = static_cast<std::size_t>(nodes_per_axis());
  return dim_ == 1 ? per_axis : per_axis * per_axis;
}

double Grid::cell_weight() const noexcept { return dim_ == 1 ? dx() : dx() * dx(); }

double Grid::measure() const noexcept { return cell_weight() * static_cast<double>(cell_count()); }

std::array<int, 2> Grid::node_of(std::size_t cell) const noexcept {
  const auto per_axis = static_cast<std::size_t>(nodes_per_axis());
  return {static_cast<int>(cell % per_axis), static_cast<int>(cell / per_axis)};
}

std::array<double, 2> Grid::position(std::size_t cell) const noexcept {
  const auto node = node_of(cell);
  return {coord(node[0]), dim_ == 2 ? coord(node[1]) : 0.0};
}

double Grid::geometric_weight(std::size_t cell) const noexcept {
  const auto node = node_of(cell);
  const int last = nodes_per_axis() - 1;
  auto axis_width = [&](int j) { return (j == 0 || j == last) ? 0.5 * dx() : dx(); };
  double w = axis_width(node[0]);
  if (dim_ == 2) w *= axis_width(node[1]);
  return w;
}

}  // namespace pnpb
