#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pnpb/config.hpp"
#include "pnpb/fields.hpp"

namespace pnpb {

/// Profile CSV: x[,y],C_1..C_n,rho,theta,Gamma,phi,S,mu_1..mu_n.
void write_profile(std::ostream& out, const Problem& problem, const State& state, const FieldSet& fields);
/// 2D x-marginals: x,Cint_1..Cint_n with Cint_i(x) = dy * sum over y of C_i.
void write_marginals(std::ostream& out, const State& state);
/// x-marginal of one species (2D states only).
std::vector<double> x_marginal(const State& state, std::size_t species);

struct PointResult {
  std::string label;
  std::filesystem::path directory;
  bool ok = true;
  int exit_code = 0;  // 0 ok, 1 validation, 2 solver failure
  std::string message;
};

struct RunSummary {
  std::vector<PointResult> points;
  int exit_code = 0;
};

/// Output root: $PNPB_OUTPUT_ROOT when set, else the config's output_dir.
std::filesystem::path output_root(const RunSettings& settings);

/// Runs every sweep point; a failing point does not stop the others.
RunSummary run(const RunConfig& config, std::ostream& log);

}  // namespace pnpb
