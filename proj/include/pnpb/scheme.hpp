#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pnpb/fields.hpp"
#include "pnpb/model.hpp"

namespace pnpb {

/// Harmonic-mean face transmissibility times the Slotboom factors, written
/// without overflow: with d = f_b - f_a,
///   upper = exp(-f_{a+1/2}) exp(f_b) = 2 / (1 + exp(-d)),
///   lower = exp(-f_{a+1/2}) exp(f_a) = 2 / (1 + exp(d)).
/// The flux from cell a to cell b is -(D/h) (upper C_b - lower C_a).
struct FaceWeights {
  double upper;
  double lower;
};

FaceWeights face_weights(double f_a, double f_b);

/// Semi-discrete flux through the face between `cell` and its +axis
/// neighbour; zero on the domain boundary (no-flux).
double face_flux(const Problem& problem, const State& state, const FieldSet& fields, std::size_t species,
                 std::size_t cell, int axis = 0);

struct StepReport {
  State state;
  std::vector<double> residuals;  // per species, normwise relative
  double min_concentration = 0.0;
  double min_gamma = 1.0;
  std::vector<Event> events;
};

/// Linearly implicit step: backward Euler in C with the drift f frozen at t^n.
class Stepper {
 public:
  explicit Stepper(const Problem& problem);
  ~Stepper();
  Stepper(Stepper&&) noexcept;
  Stepper& operator=(Stepper&&) noexcept;

  /// 1D residual tolerance; 2D uses tolerance_2d.
  double tolerance_1d = 1e-12;
  double tolerance_2d = 1e-10;

  StepReport step(const State& state, const FieldSet& fields, double dt);

 private:
  struct Sparse;
  const Problem* problem_;
  std::unique_ptr<Sparse> sparse_;
};

StepReport step(const Problem& problem, const State& state, const FieldSet& fields, double dt);

/// Minimum of Gamma_j = 1 - eta sum_i v_i C_ij over cells (1 when eta = 0).
double min_void(const Problem& problem, const State& state);

struct StepSummary {
  double time = 0.0;
  std::vector<double> residuals;
  double min_concentration = 0.0;
  double min_gamma = 1.0;
  std::vector<Event> events;
};

struct DynamicsHooks {
  /// Called for the initial state and after every step with that state's fields.
  std::function<void(const State&, const FieldSet&)> on_state;
};

struct Trajectory {
  std::vector<StepSummary> steps;
  State final_state;
  FieldSet final_fields;
};

/// Advances `initial` from initial.time to t_end with step dt (the last step
/// may be shorter). Throws on VoidCollapse in strict mode and on solver failure.
Trajectory run_dynamics(const Problem& problem, const FieldEvaluator& evaluator, const State& initial, double dt,
                        double t_end, const DynamicsHooks& hooks = {});
/// Same, starting from problem.initial.
Trajectory run_dynamics(const Problem& problem, GammaGuard guard, double dt, double t_end,
                        const DynamicsHooks& hooks = {});

}  // namespace pnpb
