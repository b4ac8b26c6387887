#pragma once

#include <vector>

#include "pnpb/fields.hpp"
#include "pnpb/model.hpp"

namespace pnpb {

/// C'_ij = m_i w_ij / (cell_weight sum_p w_ip), w = exp(-f_i) evaluated from
/// the input state's fields. Throws VoidCollapse when Gamma <= 0 anywhere.
State fermi_map(const State& state, const FieldSet& fields, const std::vector<double>& masses);
State fermi_map(const State& state, const FieldEvaluator& evaluator, const std::vector<double>& masses);

struct EquilibriumOptions {
  double damping = 0.5;  ///< theta in (0, 1]
  double tolerance = 1e-10;
  int max_iterations = 20000;
};

struct EquilibriumReport {
  bool converged = false;
  int iterations = 0;
  double final_update = 0.0;  ///< max over cells of abs(C_new - C) / C
  State state;
  FieldSet fields;
  double free_energy = 0.0;
  /// Iterations at which the energy rose (after the first few); warnings only.
  std::vector<int> energy_increases;
};

/// Iterates C <- (1 - theta) C + theta fermi_map(C) from `initial`.
/// Throws NoConvergence when max_iterations is reached.
EquilibriumReport solve_equilibrium(const Problem& problem, const FieldEvaluator& evaluator, const State& initial,
                                    const EquilibriumOptions& options = {});

}  // namespace pnpb
