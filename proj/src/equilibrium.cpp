#include "pnpb/equilibrium.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pnpb/diagnostics.hpp"
#include "pnpb/error.hpp"

namespace pnpb {

State fermi_map(const State& state, const FieldSet& fields, const std::vector<double>& masses) {
  const std::size_t cells = state.grid.cell_count();
  for (std::size_t j = 0; j < cells; ++j) {
    if (fields.gamma[j] <= 0.0) {
      throw Error(ErrorKind::VoidCollapse, fmt::format("Fermi map input has Gamma = {:.6g} at cell {}", fields.gamma[j], j));
    }
  }
  if (masses.size() != state.species_count()) {
    throw Error(ErrorKind::DimensionMismatch, "one target mass per species required");
  }
  State out;
  out.grid = state.grid;
  out.time = state.time;
  out.concentrations.resize(state.species_count());
  const double weight = state.grid.cell_weight();
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    const auto& f = fields.drift[i];
    const double f_min = *std::min_element(f.begin(), f.end());
    auto& c = out.concentrations[i];
    c.resize(cells);
    double sum = 0.0;
    for (std::size_t j = 0; j < cells; ++j) {
      c[j] = std::exp(-(f[j] - f_min));
      sum += c[j];
    }
    const double scale = masses[i] / (weight * sum);
    for (double& v : c) v *= scale;
  }
  return out;
}

State fermi_map(const State& state, const FieldEvaluator& evaluator, const std::vector<double>& masses) {
  return fermi_map(state, evaluator.compute(state), masses);
}

EquilibriumReport solve_equilibrium(const Problem& problem, const FieldEvaluator& evaluator, const State& initial,
                                    const EquilibriumOptions& options) {
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw Error(ErrorKind::InvalidParameter, "damping must lie in (0, 1]");
  }
  std::vector<double> masses;
  for (std::size_t i = 0; i < initial.species_count(); ++i) masses.push_back(discrete_mass(initial, i));

  EquilibriumReport report;
  State state = initial;
  FieldSet fields = evaluator.compute(state);
  double previous_energy = discrete_energy(problem, state, fields);
  const double theta = options.damping;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const State mapped = fermi_map(state, fields, masses);
    double update = 0.0;
    for (std::size_t i = 0; i < state.species_count(); ++i) {
      auto& c = state.concentrations[i];
      const auto& target = mapped.concentrations[i];
      for (std::size_t j = 0; j < c.size(); ++j) {
        const double next = (1.0 - theta) * c[j] + theta * target[j];
        update = std::max(update, std::abs(next - c[j]) / c[j]);
        c[j] = next;
      }
    }
    fields = evaluator.compute(state);
    const double energy = discrete_energy(problem, state, fields);
    if (iter > 3 && energy > previous_energy + 1e-12 * std::max(1.0, std::abs(previous_energy))) {
      report.energy_increases.push_back(iter);
    }
    previous_energy = energy;

    report.iterations = iter;
    report.final_update = update;
    if (report.final_update < options.tolerance) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) {
    throw Error(ErrorKind::NoConvergence, fmt::format("no convergence after {} iterations (last update {:.3g})",
                                                      report.iterations, report.final_update));
  }
  report.free_energy = previous_energy;
  report.state = std::move(state);
  report.fields = std::move(fields);
  return report;
}

}  // namespace pnpb
