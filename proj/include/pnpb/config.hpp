#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pnpb/equilibrium.hpp"
#include "pnpb/fields.hpp"
#include "pnpb/model.hpp"

namespace pnpb {

enum class RunMode { Dynamics, Equilibrium, Both };

struct InitialCondition {
  struct Bump {
    double amplitude;
    double decay;
    double cx;
    double cy;
  };
  enum class Kind { Uniform, Gaussian };
  Kind kind = Kind::Uniform;
  std::vector<double> uniform{0.5};  // one value for all species, or one per species
  std::vector<Bump> bumps;           // one per species: A exp(-k |x - c|^2)

  State build(const Grid& grid, std::size_t species_count) const;
};

/// One fully specified run.
struct RunSettings {
  int dim = 1;
  int n = 100;
  double half_extent = 1.0;
  double eta = 0.0;
  double lambda = 1.0;
  double nu = 1.0;
  std::optional<double> v0;
  std::optional<KernelFamily> kernel;  // default: screened-1d-picard in 1D, log-2d in 2D
  double kernel_constant = 0.0;
  std::vector<int> valence{1, -1, 0};
  std::vector<double> volume{0.01, 0.01, 0.01};
  std::vector<double> diffusivity{1.0, 1.0, 1.0};
  std::optional<std::vector<double>> bulk;  // default: domain-average initial concentration
  InitialCondition initial;
  ExternalField external_field;
  double dt = 0.005;
  double t_end = 1.0;
  std::vector<double> output_times;  // default: {t_end}
  RunMode mode = RunMode::Dynamics;
  GammaGuard guard = GammaGuard::Strict;
  EquilibriumOptions equilibrium;
  std::string output_dir = "output";
  std::string kernel_cache;  // empty: no cache

  Grid grid() const { return Grid(dim, n, half_extent); }
  /// Builds and validates the problem (throws validation errors).
  Problem problem() const;
};

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct SweepPoint {
  std::string label;  // e.g. "eta_1" or "eta_2_z1_4"; "base" without sweeps
  RunSettings settings;
};

struct RunConfig {
  std::string preset;  // empty when none
  RunSettings base;
  std::vector<SweepAxis> sweep;
  std::vector<std::pair<std::string, std::string>> assignments;  // as parsed, in order

  /// Cartesian product of the sweep axes applied to `base`.
  std::vector<SweepPoint> points() const;
};

/// Parses the line-oriented "key = value" format ('#' comments, comma lists).
/// Throws ParseError (with line number) or a validation error.
RunConfig parse_config(std::string_view text);

struct PresetInfo {
  std::string name;
  std::string description;
  std::string text;  // config text the preset expands to
};

const std::vector<PresetInfo>& preset_registry();
const PresetInfo* find_preset(std::string_view name);

/// Parses "1.5", "1/3", "pi", "40/pi".
double parse_number(std::string_view token);

}  // namespace pnpb
