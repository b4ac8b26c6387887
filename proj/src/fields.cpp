#include "pnpb/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pnpb/error.hpp"

namespace pnpb {

namespace {
constexpr std::size_t kDirectCells1D = 4097;
}  // namespace

FieldEvaluator::FieldEvaluator(const Problem& problem, GammaGuard guard)
    : FieldEvaluator(problem, guard, build_tensor(problem.params.kernel_spec(problem.grid), problem.grid)) {}

FieldEvaluator::FieldEvaluator(const Problem& problem, GammaGuard guard, KernelTable table)
    : problem_(&problem),
      guard_(guard),
      convolver_(std::move(table)),
      external_(problem.params.external_field.sample(problem.grid)) {
  if (convolver_.size() != problem.grid.cell_count()) {
    throw Error(ErrorKind::DimensionMismatch, "kernel table does not match the problem grid");
  }
}

FieldSet FieldEvaluator::compute(const State& state) const {
  const auto& species = problem_->species;
  const auto& params = problem_->params;
  const std::size_t cells = state.grid.cell_count();
  const std::size_t count = species.size();
  if (state.species_count() != count || cells != convolver_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "state does not match the problem");
  }

  FieldSet fields;
  fields.external = external_;
  fields.gamma.assign(cells, 1.0);
  fields.steric.assign(cells, 0.0);
  fields.charge.assign(cells, 0.0);

  for (std::size_t i = 0; i < static_cast<std::size_t>(species.count_charged); ++i) {
    const double z = species.valence[i];
    const auto& c = state.concentrations[i];
    for (std::size_t j = 0; j < cells; ++j) fields.charge[j] += z * c[j];
  }

  if (params.eta > 0.0) {
    const double log_bulk = std::log(params.gamma_bulk);
    for (std::size_t j = 0; j < cells; ++j) {
      double occupied = 0.0;
      for (std::size_t i = 0; i < count; ++i) occupied += species.volume[i] * state.concentrations[i][j];
      const double gamma = 1.0 - params.eta * occupied;
      fields.gamma[j] = gamma;
      if (gamma <= 0.0) {
        if (guard_ == GammaGuard::Strict) {
          throw Error(ErrorKind::VoidCollapse,
                      fmt::format("Gamma = {:.6g} at cell {} (t = {:.6g})", gamma, j, state.time));
        }
        fields.events.push_back({EventKind::VoidCollapse, -1, j, gamma, state.time});
      }
      fields.steric[j] = std::log(std::max(gamma, kGammaFloor)) - log_bulk;
    }
  }

  // 1D uses the mirror-exact direct sum; the FFT path is reserved for large or 2D grids.
  const bool direct = state.grid.dim() == 1 && cells <= kDirectCells1D;
  fields.phi = convolver_.apply(fields.charge, direct ? ConvolutionPath::Direct : ConvolutionPath::Fast);

  const double v0 = problem_->v0();
  fields.drift.assign(count, std::vector<double>(cells));
  fields.chem.assign(count, std::vector<double>(cells));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = species.valence[i];
    const double steric_weight = species.volume[i] / v0;
    const double log_bulk = std::log(species.bulk[i]);
    for (std::size_t j = 0; j < cells; ++j) {
      const double f = z * (fields.phi[j] + external_[j]) - steric_weight * fields.steric[j];
      fields.drift[i][j] = f;
      const double c = state.concentrations[i][j];
      if (c > 0.0) {
        fields.chem[i][j] = std::log(c) - log_bulk + f;
      } else {
        fields.chem[i][j] = std::numeric_limits<double>::quiet_NaN();
        fields.events.push_back({EventKind::NonpositiveConcentration, static_cast<int>(i), j, c, state.time});
      }
    }
  }
  return fields;
}

FieldSet compute_fields(const State& state, const FieldEvaluator& evaluator) { return evaluator.compute(state); }

SlotboomVars slotboom(const State& state, const FieldSet& fields) {
  SlotboomVars vars;
  vars.u.resize(state.species_count());
  for (std::size_t i = 0; i < state.species_count(); ++i) {
    const auto& c = state.concentrations[i];
    auto& u = vars.u[i];
    u.resize(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) u[j] = c[j] / std::exp(-fields.drift[i][j]);
  }
  return vars;
}

}  // namespace pnpb
