#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pnpb/grid.hpp"
#include "pnpb/kernel.hpp"

namespace pnpb {

/// Species 0..K-1 are charged ions, species K is water (valence 0).
struct SpeciesSet {
  int count_charged = 0;
  std::vector<int> valence;
  std::vector<double> volume;
  std::vector<double> diffusivity;
  std::vector<double> bulk;

  std::size_t size() const noexcept { return valence.size(); }
  /// Throws DimensionMismatch / InvalidParameter on a broken invariant.
  void check() const;
};

/// External potential V_0 sampled at cell nodes.
struct ExternalField {
  enum class Kind { None, Linear, Tabulated };
  Kind kind = Kind::None;
  std::array<double, 2> slope{0.0, 0.0};  // V_0 = slope . x
  std::vector<double> table;              // one value per cell

  static ExternalField linear(double sx, double sy = 0.0) {
    ExternalField f;
    f.kind = Kind::Linear;
    f.slope = {sx, sy};
    return f;
  }

  std::vector<double> sample(const Grid& grid) const;
};

struct ModelParams {
  double eta = 0.0;
  double lambda = 1.0;
  double nu = 1.0;
  std::optional<double> v0;  ///< defaults to the mean species volume
  KernelFamily kernel = KernelFamily::Screened1DPicard;
  double kernel_constant = 0.0;
  std::optional<double> slab_width;  ///< Slab1DPicard; defaults to the uniform y extent
  ExternalField external_field;
  double gamma_bulk = 1.0;  ///< derived by validate()

  KernelSpec kernel_spec(const Grid& grid) const;
};

struct State {
  Grid grid;
  std::vector<std::vector<double>> concentrations;  // [species][cell]
  double time = 0.0;

  static State uniform(const Grid& grid, const std::vector<double>& values);
  std::size_t species_count() const noexcept { return concentrations.size(); }
};

enum class EventKind { VoidCollapse, NegativeConcentration, Saturation, NonpositiveConcentration, EnergyIncrease };

std::string to_string(EventKind kind);

struct Event {
  EventKind kind;
  int species = -1;  // -1 when not species-specific
  std::size_t cell = 0;
  double value = 0.0;
  double time = 0.0;
};

/// A configuration that passed validate(): v0 and gamma_bulk are resolved.
struct Problem {
  Grid grid;
  SpeciesSet species;
  ModelParams params;
  State initial;
  std::vector<double> masses;  ///< uniform-weight initial masses

  double v0() const { return *params.v0; }
};

/// 1 - eta * sum_i v_i C_i^B.
double bulk_void(const ModelParams& params, const SpeciesSet& species);

/// dx^dim * sum_j C_ij, boundary cells at full weight.
double discrete_mass(const State& state, std::size_t species);
/// Mass with geometric half-cell weights on the boundary (reporting only).
double geometric_mass(const State& state, std::size_t species);

/// Checks Gamma^B > 0 and 1 - eta sum v_i m_i^0 > 0 and resolves derived values.
Problem validate(const ModelParams& params, const SpeciesSet& species, const State& state);

/// Saturation bound 0 <= C_ij < 1/(eta v_i) for eta > 0; one event per violating cell.
std::vector<Event> check_saturation(const State& state, const ModelParams& params, const SpeciesSet& species);

}  // namespace pnpb
