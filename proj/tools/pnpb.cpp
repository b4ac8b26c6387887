#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pnpb/config.hpp"
#include "pnpb/error.hpp"
#include "pnpb/runner.hpp"

namespace {

int exit_code_for(const pnpb::Error& e) { return pnpb::is_validation_error(e.kind()) ? 1 : 2; }

pnpb::RunConfig load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pnpb::Error(pnpb::ErrorKind::ParseError, "cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return pnpb::parse_config(text.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pnpb: Poisson-Nernst-Planck-Bikerman solver"};
  app.require_subcommand(1);

  std::string run_path, verify_path;
  auto* run_cmd = app.add_subcommand("run", "run every sweep point of a config file");
  run_cmd->add_option("config", run_path, "config file")->required();
  auto* presets_cmd = app.add_subcommand("presets", "list the built-in presets");
  auto* verify_cmd = app.add_subcommand("verify", "parse and validate a config file without running it");
  verify_cmd->add_option("config", verify_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*presets_cmd) {
      for (const auto& p : pnpb::preset_registry()) std::cout << fmt::format("{:<14} {}\n", p.name, p.description);
      return 0;
    }
    if (*verify_cmd) {
      const auto config = load(verify_path);
      const auto points = config.points();
      for (const auto& point : points) point.settings.problem();
      std::cout << fmt::format("ok: {} sweep point(s)\n", points.size());
      return 0;
    }
    if (*run_cmd) {
      const auto config = load(run_path);
      const auto summary = pnpb::run(config, std::cout);
      for (const auto& p : summary.points) {
        if (!p.ok) std::cerr << fmt::format("{}: {}\n", p.label, p.message);
      }
      return summary.exit_code;
    }
  } catch (const pnpb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
