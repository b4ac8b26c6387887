#pragma once

#include <vector>

#include "pnpb/kernel.hpp"
#include "pnpb/model.hpp"

namespace pnpb {

/// Strict mode rejects Gamma_j <= 0. Permissive mode clamps Gamma to
/// kGammaFloor inside the logarithm only and records a VoidCollapse event.
enum class GammaGuard { Strict, Permissive };

inline constexpr double kGammaFloor = 1e-14;

struct FieldSet {
  std::vector<double> gamma;                // raw void fraction
  std::vector<double> steric;               // ln(max(Gamma, floor) / Gamma^B)
  std::vector<double> charge;               // rho
  std::vector<double> phi;                  // K * rho
  std::vector<double> external;             // V_0 at nodes
  std::vector<std::vector<double>> drift;   // f_i = z_i (phi + V_0) - (v_i/v0) S
  std::vector<std::vector<double>> chem;    // mu_i = ln(C_i / C_i^B) + f_i, NaN where C <= 0
  std::vector<Event> events;
};

struct SlotboomVars {
  std::vector<std::vector<double>> u;  // C_i exp(f_i)
};

/// Owns the precomputed kernel for one problem and evaluates derived fields.
class FieldEvaluator {
 public:
  FieldEvaluator(const Problem& problem, GammaGuard guard);
  FieldEvaluator(const Problem& problem, GammaGuard guard, KernelTable table);

  const Problem& problem() const noexcept { return *problem_; }
  GammaGuard guard() const noexcept { return guard_; }
  const Convolver& convolver() const noexcept { return convolver_; }
  const std::vector<double>& external() const noexcept { return external_; }

  FieldSet compute(const State& state) const;

 private:
  const Problem* problem_;
  GammaGuard guard_;
  Convolver convolver_;
  std::vector<double> external_;
};

FieldSet compute_fields(const State& state, const FieldEvaluator& evaluator);

SlotboomVars slotboom(const State& state, const FieldSet& fields);

}  // namespace pnpb
