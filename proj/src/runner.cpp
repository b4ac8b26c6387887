#include "pnpb/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "pnpb/diagnostics.hpp"
#include "pnpb/equilibrium.hpp"
#include "pnpb/error.hpp"
#include "pnpb/scheme.hpp"

namespace pnpb {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

std::string time_tag(double t) { return fmt::format("{:g}", t); }

}  // namespace

void write_profile(std::ostream& out, const Problem& problem, const State& state, const FieldSet& fields) {
  const std::size_t count = state.species_count();
  const bool two_d = state.grid.dim() == 2;
  std::string header = two_d ? "x,y" : "x";
  for (std::size_t i = 1; i <= count; ++i) header += fmt::format(",C_{}", i);
  header += ",rho,theta,Gamma,phi,S";
  for (std::size_t i = 1; i <= count; ++i) header += fmt::format(",mu_{}", i);
  out << header << '\n';

  for (std::size_t j = 0; j < state.grid.cell_count(); ++j) {
    const auto x = state.grid.position(j);
    std::string line = fmt::format("{:.17g}", x[0]);
    if (two_d) line += fmt::format(",{:.17g}", x[1]);
    double theta = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      line += fmt::format(",{:.17g}", state.concentrations[i][j]);
      theta += problem.species.volume[i] * state.concentrations[i][j];
    }
    line += fmt::format(",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", fields.charge[j], theta, fields.gamma[j],
                        fields.phi[j], fields.steric[j]);
    for (std::size_t i = 0; i < count; ++i) line += fmt::format(",{:.17g}", fields.chem[i][j]);
    out << line << '\n';
  }
}

std::vector<double> x_marginal(const State& state, std::size_t species) {
  const Grid& g = state.grid;
  if (g.dim() != 2) throw Error(ErrorKind::DimensionMismatch, "x-marginals need a 2D state");
  const int n = g.nodes_per_axis();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) out[static_cast<std::size_t>(ix)] += state.concentrations[species][g.index(ix, iy)];
  }
  for (double& v : out) v *= g.dx();
  return out;
}

void write_marginals(std::ostream& out, const State& state) {
  const std::size_t count = state.species_count();
  std::string header = "x";
  for (std::size_t i = 1; i <= count; ++i) header += fmt::format(",Cint_{}", i);
  out << header << '\n';
  std::vector<std::vector<double>> marginals;
  for (std::size_t i = 0; i < count; ++i) marginals.push_back(x_marginal(state, i));
  for (int ix = 0; ix < state.grid.nodes_per_axis(); ++ix) {
    std::string line = fmt::format("{:.17g}", state.grid.coord(ix));
    for (const auto& m : marginals) line += fmt::format(",{:.17g}", m[static_cast<std::size_t>(ix)]);
    out << line << '\n';
  }
}

std::filesystem::path output_root(const RunSettings& settings) {
  if (const char* env = std::getenv("PNPB_OUTPUT_ROOT"); env && *env) return env;
  return settings.output_dir;
}

namespace {

void run_point(const SweepPoint& point, const std::filesystem::path& dir, std::ostream& log) {
  const RunSettings& s = point.settings;
  const Problem problem = s.problem();
  std::filesystem::create_directories(dir);

  const auto spec = problem.params.kernel_spec(problem.grid);
  KernelTable table = s.kernel_cache.empty() ? build_tensor(spec, problem.grid)
                                             : cached_tensor(spec, problem.grid, s.kernel_cache);
  const FieldEvaluator evaluator(problem, s.guard, std::move(table));

  if (s.mode == RunMode::Dynamics || s.mode == RunMode::Both) {
    auto trace_file = open_output(dir / "trace.csv");
    TraceWriter trace(trace_file, problem.species.size());
    std::vector<double> pending = s.output_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next_output = 0;
    const double eps = 1e-9 * s.dt;

    DynamicsHooks hooks;
    hooks.on_state = [&](const State& state, const FieldSet& fields) {
      trace.write(make_record(problem, state, fields));
      while (next_output < pending.size() && state.time >= pending[next_output] - eps) {
        const auto tag = time_tag(pending[next_output]);
        auto profile = open_output(dir / fmt::format("profile_t{}.csv", tag));
        write_profile(profile, problem, state, fields);
        if (state.grid.dim() == 2) {
          auto marginal = open_output(dir / fmt::format("marginal_t{}.csv", tag));
          write_marginals(marginal, state);
        }
        ++next_output;
      }
    };
    const auto trajectory = run_dynamics(problem, evaluator, problem.initial, s.dt, s.t_end, hooks);
    std::size_t collapse_steps = 0;
    for (const auto& step : trajectory.steps) {
      for (const auto& e : step.events) {
        if (e.kind == EventKind::VoidCollapse) {
          ++collapse_steps;
          break;
        }
      }
    }
    log << fmt::format("  dynamics: {} steps to t = {:g}, min Gamma {:.6g}{}\n", trajectory.steps.size(),
                       trajectory.final_state.time,
                       *std::min_element(trajectory.final_fields.gamma.begin(), trajectory.final_fields.gamma.end()),
                       collapse_steps ? fmt::format(", VoidCollapse in {} steps", collapse_steps) : "");
  }

  if (s.mode == RunMode::Equilibrium || s.mode == RunMode::Both) {
    const auto eq = solve_equilibrium(problem, evaluator, problem.initial, s.equilibrium);
    auto profile = open_output(dir / "equilibrium_profile.csv");
    write_profile(profile, problem, eq.state, eq.fields);
    if (eq.state.grid.dim() == 2) {
      auto marginal = open_output(dir / "equilibrium_marginal.csv");
      write_marginals(marginal, eq.state);
    }
    const auto spread = steady_state_residual(eq.state, eq.fields);
    auto summary = open_output(dir / "equilibrium_summary.csv");
    summary << "iterations,final_update,free_energy,dissipation";
    for (std::size_t i = 1; i <= spread.size(); ++i) summary << fmt::format(",muSpread_{}", i);
    summary << '\n'
            << fmt::format("{},{:.17g},{:.17g},{:.17g}", eq.iterations, eq.final_update, eq.free_energy,
                           discrete_dissipation(problem, eq.state, eq.fields));
    for (double v : spread) summary << fmt::format(",{:.17g}", v);
    summary << '\n';
    log << fmt::format("  equilibrium: {} iterations, energy {:.10g}\n", eq.iterations, eq.free_energy);
  }
}

}  // namespace

RunSummary run(const RunConfig& config, std::ostream& log) {
  RunSummary summary;
  const auto root = output_root(config.base) / (config.preset.empty() ? std::string("run") : config.preset);
  for (const auto& point : config.points()) {
    PointResult result;
    result.label = point.label;
    result.directory = root / point.label;
    log << fmt::format("[{}]\n", point.label);
    try {
      run_point(point, result.directory, log);
    } catch (const Error& e) {
      result.ok = false;
      result.exit_code = is_validation_error(e.kind()) ? 1 : 2;
      result.message = e.what();
      log << "  failed: " << e.what() << '\n';
    }
    summary.exit_code = std::max(summary.exit_code, result.exit_code);
    summary.points.push_back(std::move(result));
  }
  return summary;
}

}  // namespace pnpb
