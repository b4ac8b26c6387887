#pragma once

#include <ostream>
#include <vector>

#include "pnpb/fields.hpp"
#include "pnpb/model.hpp"

namespace pnpb {

/// Discrete free energy with uniform cell weights:
///   E = w sum_i sum_j C_ij (ln(C_ij / C_i^B) + g_ij - 1) + w/(v0 eta) sum_j (S_j - Gamma_j),
///   g_i = z_i (phi/2 + V_0) - (v_i/v0) S.
/// Cells with C = 0 contribute nothing. For eta = 0 the void term is omitted.
double discrete_energy(const Problem& problem, const State& state, const FieldSet& fields);

/// D = sum over faces of (w/h^2) D_i (upper C_b - lower C_a)(ln u_b - ln u_a),
/// the exact form of the mean-value expression with the logarithmic mean.
/// Throws NonpositiveConcentration when any C <= 0.
double discrete_dissipation(const Problem& problem, const State& state, const FieldSet& fields);

/// max_j mu_ij - min_j mu_ij per species, ignoring cells with C < 1e-14.
std::vector<double> steady_state_residual(const State& state, const FieldSet& fields);

struct DiagnosticsRecord {
  double time = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;
  std::vector<double> masses;
  std::vector<double> min_conc;
  std::vector<double> max_conc;
  double min_gamma = 1.0;
  std::vector<double> mu_spread;
  std::vector<Event> events;
};

/// Dissipation is NaN when some concentration is non-positive.
DiagnosticsRecord make_record(const Problem& problem, const State& state, const FieldSet& fields);

/// Writes "time,E,D,m_1..,minGamma,muSpread_1..,events" rows.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, std::size_t species_count);
  void write(const DiagnosticsRecord& record);

 private:
  std::ostream* out_;
  std::size_t species_;
};

/// Compact event summary such as "VoidCollapse:3;NegativeConcentration:1".
std::string summarize_events(const std::vector<Event>& events);

}  // namespace pnpb
