#include "pnpb/model.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pnpb/error.hpp"

namespace pnpb {

void SpeciesSet::check() const {
  const std::size_t n = valence.size();
  if (n < 1 || volume.size() != n || diffusivity.size() != n || bulk.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("species arrays have lengths z={}, v={}, D={}, bulk={}", valence.size(), volume.size(),
                            diffusivity.size(), bulk.size()));
  }
  if (count_charged < 0 || static_cast<std::size_t>(count_charged) + 1 != n) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("expected {} charged species plus water, got {} species", count_charged, n));
  }
  if (valence.back() != 0) throw Error(ErrorKind::InvalidParameter, "water (last species) must have valence 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(volume[i] > 0.0) || !std::isfinite(volume[i])) {
      throw Error(ErrorKind::InvalidParameter, fmt::format("volume of species {} must be positive", i + 1));
    }
    if (!(diffusivity[i] > 0.0) || !std::isfinite(diffusivity[i])) {
      throw Error(ErrorKind::InvalidParameter, fmt::format("diffusivity of species {} must be positive", i + 1));
    }
    if (!(bulk[i] > 0.0) || !std::isfinite(bulk[i])) {
      throw Error(ErrorKind::InvalidParameter, fmt::format("bulk concentration of species {} must be positive", i + 1));
    }
  }
}

std::vector<double> ExternalField::sample(const Grid& grid) const {
  std::vector<double> values(grid.cell_count(), 0.0);
  switch (kind) {
    case Kind::None:
      break;
    case Kind::Linear:
      for (std::size_t c = 0; c < values.size(); ++c) {
        const auto x = grid.position(c);
        values[c] = slope[0] * x[0] + (grid.dim() == 2 ? slope[1] * x[1] : 0.0);
      }
      break;
    case Kind::Tabulated:
      if (table.size() != values.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("external field table has {} values, grid has {} cells", table.size(), values.size()));
      }
      values = table;
      break;
  }
  return values;
}

KernelSpec ModelParams::kernel_spec(const Grid& grid) const {
  KernelSpec spec;
  spec.family = kernel;
  spec.dim = grid.dim();
  spec.lambda = lambda;
  spec.nu = nu;
  spec.constant = kernel_constant;
  spec.slab_width = slab_width.value_or(grid.dx() * grid.nodes_per_axis());
  return spec;
}

State State::uniform(const Grid& grid, const std::vector<double>& values) {
  State s;
  s.grid = grid;
  for (double v : values) s.concentrations.emplace_back(grid.cell_count(), v);
  return s;
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::VoidCollapse: return "VoidCollapse";
    case EventKind::NegativeConcentration: return "NegativeConcentration";
    case EventKind::Saturation: return "Saturation";
    case EventKind::NonpositiveConcentration: return "NonpositiveConcentration";
    case EventKind::EnergyIncrease: return "EnergyIncrease";
  }
  return "Unknown";
}

double bulk_void(const ModelParams& params, const SpeciesSet& species) {
  double sum = 0.0;
  for (std::size_t i = 0; i < species.size(); ++i) sum += species.volume[i] * species.bulk[i];
  return 1.0 - params.eta * sum;
}

double discrete_mass(const State& state, std::size_t species) {
  const auto& c = state.concentrations.at(species);
  return state.grid.cell_weight() * std::accumulate(c.begin(), c.end(), 0.0);
}

double geometric_mass(const State& state, std::size_t species) {
  const auto& c = state.concentrations.at(species);
  double sum = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) sum += c[j] * state.grid.geometric_weight(j);
  return sum;
}

Problem validate(const ModelParams& params, const SpeciesSet& species, const State& state) {
  species.check();
  if (state.species_count() != species.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("state has {} species, species set has {}", state.species_count(), species.size()));
  }
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    if (state.concentrations[i].size() != state.grid.cell_count()) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("species {} has {} cells, grid has {}", i + 1, state.concentrations[i].size(),
                              state.grid.cell_count()));
    }
    for (double c : state.concentrations[i]) {
      if (!std::isfinite(c)) throw Error(ErrorKind::InvalidParameter, "initial concentrations must be finite");
    }
  }
  if (!(params.eta >= 0.0) || !std::isfinite(params.eta)) {
    throw Error(ErrorKind::InvalidParameter, "eta must be non-negative");
  }
  if (!(params.lambda >= 0.0)) throw Error(ErrorKind::InvalidParameter, "lambda must be non-negative");
  if (!(params.nu > 0.0)) throw Error(ErrorKind::InvalidParameter, "nu must be positive");

  Problem problem;
  problem.grid = state.grid;
  problem.species = species;
  problem.params = params;
  problem.initial = state;
  if (!problem.params.v0) {
    problem.params.v0 = std::accumulate(species.volume.begin(), species.volume.end(), 0.0) /
                        static_cast<double>(species.size());
  }
  if (!(*problem.params.v0 > 0.0)) throw Error(ErrorKind::InvalidParameter, "v0 must be positive");

  problem.params.gamma_bulk = bulk_void(params, species);
  if (!(problem.params.gamma_bulk > 0.0)) {
    throw Error(ErrorKind::NonPositiveBulkVoid,
                fmt::format("1 - eta sum v_i C_i^B = {} <= 0", problem.params.gamma_bulk));
  }

  double occupied = 0.0;
  for (std::size_t i = 0; i < species.size(); ++i) {
    problem.masses.push_back(discrete_mass(state, i));
    occupied += species.volume[i] * problem.masses.back();
  }
  const double total_void = 1.0 - params.eta * occupied;
  if (!(total_void > 0.0)) {
    throw Error(ErrorKind::NonPositiveTotalVoid, fmt::format("1 - eta sum v_i m_i^0 = {} <= 0", total_void));
  }

  problem.params.kernel_spec(state.grid).check();
  (void)problem.params.external_field.sample(state.grid);
  return problem;
}

std::vector<Event> check_saturation(const State& state, const ModelParams& params, const SpeciesSet& species) {
  std::vector<Event> events;
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    const double cap = params.eta > 0.0 ? 1.0 / (params.eta * species.volume[i]) : INFINITY;
    const auto& c = state.concentrations[i];
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c[j] < 0.0 || c[j] >= cap) {
        events.push_back({EventKind::Saturation, static_cast<int>(i), j, c[j], state.time});
      }
    }
  }
  return events;
}

}  // namespace pnpb
