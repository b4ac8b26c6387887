#include "pnpb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "pnpb/error.hpp"
#include "pnpb/scheme.hpp"

namespace pnpb {

double discrete_energy(const Problem& problem, const State& state, const FieldSet& fields) {
  const auto& species = problem.species;
  const auto& params = problem.params;
  const double weight = state.grid.cell_weight();
  const double v0 = problem.v0();
  const std::size_t cells = state.grid.cell_count();

  double entropy = 0.0;
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    const double z = species.valence[i];
    const double steric_weight = species.volume[i] / v0;
    const double log_bulk = std::log(species.bulk[i]);
    const auto& c = state.concentrations[i];
    for (std::size_t j = 0; j < cells; ++j) {
      if (c[j] == 0.0) continue;
      if (c[j] < 0.0) {
        throw Error(ErrorKind::NonpositiveConcentration,
                    fmt::format("energy needs C >= 0; species {} cell {} has {}", i + 1, j, c[j]));
      }
      const double g = z * (0.5 * fields.phi[j] + fields.external[j]) - steric_weight * fields.steric[j];
      entropy += c[j] * (std::log(c[j]) - log_bulk + g - 1.0);
    }
  }
  double energy = weight * entropy;
  if (params.eta > 0.0) {
    double void_sum = 0.0;
    for (std::size_t j = 0; j < cells; ++j) void_sum += fields.steric[j] - fields.gamma[j];
    energy += weight / (v0 * params.eta) * void_sum;
  }
  return energy;
}

double discrete_dissipation(const Problem& problem, const State& state, const FieldSet& fields) {
  const Grid& grid = state.grid;
  const int n = grid.nodes_per_axis();
  const double factor = grid.cell_weight() / (grid.dx() * grid.dx());
  double total = 0.0;
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    const auto& c = state.concentrations[i];
    const auto& f = fields.drift[i];
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (!(c[j] > 0.0)) {
        throw Error(ErrorKind::NonpositiveConcentration,
                    fmt::format("dissipation needs C > 0; species {} cell {} has {}", i + 1, j, c[j]));
      }
    }
    const double d = problem.species.diffusivity[i];
    auto face = [&](std::size_t a, std::size_t b) {
      const auto w = face_weights(f[a], f[b]);
      const double log_ratio = (std::log(c[b]) + f[b]) - (std::log(c[a]) + f[a]);
      return (w.upper * c[b] - w.lower * c[a]) * log_ratio;
    };
    const int rows = grid.dim() == 2 ? n : 1;
    double sum = 0.0;
    for (int iy = 0; iy < rows; ++iy) {
      for (int ix = 0; ix + 1 < n; ++ix) sum += face(grid.index(ix, iy), grid.index(ix + 1, iy));
    }
    if (grid.dim() == 2) {
      for (int iy = 0; iy + 1 < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) sum += face(grid.index(ix, iy), grid.index(ix, iy + 1));
      }
    }
    total += d * sum;
  }
  return factor * total;
}

std::vector<double> steady_state_residual(const State& state, const FieldSet& fields) {
  std::vector<double> spread(state.species_count(), 0.0);
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    double lo = INFINITY, hi = -INFINITY;
    const auto& c = state.concentrations[i];
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c[j] < 1e-14) continue;
      lo = std::min(lo, fields.chem[i][j]);
      hi = std::max(hi, fields.chem[i][j]);
    }
    spread[i] = hi >= lo ? hi - lo : 0.0;
  }
  return spread;
}

DiagnosticsRecord make_record(const Problem& problem, const State& state, const FieldSet& fields) {
  DiagnosticsRecord r;
  r.time = state.time;
  r.energy = discrete_energy(problem, state, fields);
  try {
    r.dissipation = discrete_dissipation(problem, state, fields);
  } catch (const Error&) {
    r.dissipation = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    r.masses.push_back(discrete_mass(state, i));
    const auto [lo, hi] = std::minmax_element(state.concentrations[i].begin(), state.concentrations[i].end());
    r.min_conc.push_back(*lo);
    r.max_conc.push_back(*hi);
  }
  r.min_gamma = *std::min_element(fields.gamma.begin(), fields.gamma.end());
  r.mu_spread = steady_state_residual(state, fields);
  r.events = fields.events;
  auto saturation = check_saturation(state, problem.params, problem.species);
  r.events.insert(r.events.end(), saturation.begin(), saturation.end());
  return r;
}

std::string summarize_events(const std::vector<Event>& events) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : events) ++counts[to_string(e.kind)];
  std::string out;
  for (const auto& [name, count] : counts) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}:{}", name, count);
  }
  return out;
}

TraceWriter::TraceWriter(std::ostream& out, std::size_t species_count) : out_(&out), species_(species_count) {
  std::string header = "time,E,D";
  for (std::size_t i = 1; i <= species_; ++i) header += fmt::format(",m_{}", i);
  header += ",minGamma";
  for (std::size_t i = 1; i <= species_; ++i) header += fmt::format(",muSpread_{}", i);
  header += ",events\n";
  *out_ << header;
}

void TraceWriter::write(const DiagnosticsRecord& r) {
  std::string line = fmt::format("{:.17g},{:.17g},{:.17g}", r.time, r.energy, r.dissipation);
  for (double m : r.masses) line += fmt::format(",{:.17g}", m);
  line += fmt::format(",{:.17g}", r.min_gamma);
  for (double s : r.mu_spread) line += fmt::format(",{:.17g}", s);
  line += ',';
  line += summarize_events(r.events);
  line += '\n';
  *out_ << line;
}

}  // namespace pnpb
