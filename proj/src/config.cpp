#include "pnpb/config.hpp"

#include <cctype>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "pnpb/error.hpp"

namespace pnpb {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_atom(std::string_view token) {
  token = trim(token);
  if (token == "pi") return std::numbers::pi;
  double value = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw Error(ErrorKind::ParseError, fmt::format("'{}' is not a number", token));
  }
  return value;
}

std::vector<double> parse_numbers(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number(item));
  return out;
}

int parse_int(std::string_view token) {
  const double v = parse_number(token);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw Error(ErrorKind::ParseError, fmt::format("'{}' is not an integer", token));
  }
  return static_cast<int>(v);
}

std::vector<int> parse_ints(std::string_view text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_int(item));
  return out;
}

InitialCondition parse_initial(std::string_view text) {
  text = trim(text);
  const auto space = text.find_first_of(" \t");
  const auto kind = text.substr(0, space);
  const auto rest = space == std::string_view::npos ? std::string_view{} : trim(text.substr(space));
  InitialCondition ic;
  if (kind == "uniform") {
    ic.kind = InitialCondition::Kind::Uniform;
    ic.uniform = parse_numbers(rest);
    return ic;
  }
  if (kind == "gaussian") {
    ic.kind = InitialCondition::Kind::Gaussian;
    for (const auto& item : split(rest, ';')) {
      const auto v = parse_numbers(item);
      if (v.size() != 4) {
        throw Error(ErrorKind::ParseError, "gaussian bumps need 'amplitude, decay, cx, cy' per species");
      }
      ic.bumps.push_back({v[0], v[1], v[2], v[3]});
    }
    return ic;
  }
  throw Error(ErrorKind::ParseError, fmt::format("unknown initial condition '{}'", kind));
}

ExternalField parse_field(std::string_view text) {
  text = trim(text);
  const auto space = text.find_first_of(" \t");
  const auto kind = text.substr(0, space);
  const auto rest = space == std::string_view::npos ? std::string_view{} : trim(text.substr(space));
  if (kind == "none") return {};
  if (kind == "linear") {
    const auto v = parse_numbers(rest);
    if (v.empty() || v.size() > 2) throw Error(ErrorKind::ParseError, "linear field takes one or two slopes");
    return ExternalField::linear(v[0], v.size() == 2 ? v[1] : 0.0);
  }
  if (kind == "table") {
    ExternalField f;
    f.kind = ExternalField::Kind::Tabulated;
    f.table = parse_numbers(rest);
    return f;
  }
  throw Error(ErrorKind::ParseError, fmt::format("unknown external field '{}'", kind));
}

template <typename T>
void set_element(std::vector<T>& values, std::string_view key, std::size_t index, T value) {
  if (index == 0 || index > values.size()) {
    throw Error(ErrorKind::ParseError, fmt::format("{}: species index {} out of range 1..{}", key, index, values.size()));
  }
  values[index - 1] = value;
}

// Splits "z1" into ("z", 1); returns index 0 for plain keys.
std::pair<std::string, std::size_t> split_indexed(std::string_view key) {
  static const std::set<std::string, std::less<>> arrays{"z", "v", "D", "bulk"};
  std::size_t digits = key.size();
  while (digits > 0 && std::isdigit(static_cast<unsigned char>(key[digits - 1]))) --digits;
  if (digits < key.size() && arrays.count(key.substr(0, digits))) {
    return {std::string(key.substr(0, digits)), static_cast<std::size_t>(parse_int(key.substr(digits)))};
  }
  return {std::string(key), 0};
}

void apply(RunSettings& s, std::string_view key, std::string_view value) {
  const auto [name, index] = split_indexed(key);
  if (index > 0) {
    if (name == "z") set_element(s.valence, name, index, parse_int(value));
    if (name == "v") set_element(s.volume, name, index, parse_number(value));
    if (name == "D") set_element(s.diffusivity, name, index, parse_number(value));
    if (name == "bulk") {
      if (!s.bulk) throw Error(ErrorKind::ParseError, "set 'bulk' before assigning single entries");
      set_element(*s.bulk, name, index, parse_number(value));
    }
    return;
  }
  if (name == "dim") s.dim = parse_int(value);
  else if (name == "N") s.n = parse_int(value);
  else if (name == "L") s.half_extent = parse_number(value);
  else if (name == "eta") s.eta = parse_number(value);
  else if (name == "lambda") s.lambda = parse_number(value);
  else if (name == "nu") s.nu = parse_number(value);
  else if (name == "v0") s.v0 = parse_number(value);
  else if (name == "kernel") {
    const auto family = parse_kernel_family(trim(value));
    if (!family) throw Error(ErrorKind::ParseError, fmt::format("unknown kernel '{}'", value));
    s.kernel = *family;
  } else if (name == "kernel_constant") s.kernel_constant = parse_number(value);
  else if (name == "z") s.valence = parse_ints(value);
  else if (name == "v") s.volume = parse_numbers(value);
  else if (name == "D") s.diffusivity = parse_numbers(value);
  else if (name == "bulk") s.bulk = parse_numbers(value);
  else if (name == "initial") s.initial = parse_initial(value);
  else if (name == "external_field") s.external_field = parse_field(value);
  else if (name == "dt") s.dt = parse_number(value);
  else if (name == "t_end") s.t_end = parse_number(value);
  else if (name == "output_times") s.output_times = parse_numbers(value);
  else if (name == "mode") {
    if (value == "dynamics") s.mode = RunMode::Dynamics;
    else if (value == "equilibrium") s.mode = RunMode::Equilibrium;
    else if (value == "both") s.mode = RunMode::Both;
    else throw Error(ErrorKind::ParseError, fmt::format("unknown mode '{}'", value));
  } else if (name == "gamma_guard") {
    if (value == "strict") s.guard = GammaGuard::Strict;
    else if (value == "permissive") s.guard = GammaGuard::Permissive;
    else throw Error(ErrorKind::ParseError, fmt::format("unknown gamma_guard '{}'", value));
  } else if (name == "damping") s.equilibrium.damping = parse_number(value);
  else if (name == "eq_tol") s.equilibrium.tolerance = parse_number(value);
  else if (name == "eq_max_iter") s.equilibrium.max_iterations = parse_int(value);
  else if (name == "output_dir") s.output_dir = std::string(trim(value));
  else if (name == "kernel_cache") s.kernel_cache = std::string(trim(value));
  else throw Error(ErrorKind::ParseError, fmt::format("unknown key '{}'", key));
}

void check_settings(const RunSettings& s) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidParameter, what); };
  if (!(s.eta >= 0.0)) fail("eta must be >= 0");
  if (!(s.lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(s.nu > 0.0)) fail("nu must be > 0");
  if (!(s.dt > 0.0)) fail("dt must be > 0");
  if (!(s.t_end >= 0.0)) fail("t_end must be >= 0");
  if (s.equilibrium.damping <= 0.0 || s.equilibrium.damping > 1.0) fail("damping must lie in (0, 1]");
  if (!(s.equilibrium.tolerance > 0.0)) fail("eq_tol must be > 0");
  for (double t : s.output_times) {
    if (t < 0.0 || t > s.t_end) fail(fmt::format("output time {} outside [0, t_end]", t));
  }
  (void)s.problem();
}

std::string sanitize(std::string_view value) {
  std::string out;
  for (char c : value) {
    if (c == '/') out += 'd';
    else if (c == ' ') continue;
    else out += c;
  }
  return out;
}

const std::string kBase1D = R"(dim = 1
N = 100
L = 1
kernel = screened-1d-picard
lambda = 1
nu = 1
z = 1, -1, 0
v = 0.01, 0.01, 0.01
D = 1, 1, 1
initial = uniform 0.5
external_field = linear 10
dt = 0.005
t_end = 1
)";

const std::string kBase2D = R"(dim = 2
N = 25
L = 1
kernel = log-2d
nu = 1
z = 1, -1, 0
v = 0.01, 0.01, 0.01
D = 1, 1, 1
initial = gaussian 40/pi, 10, 0.2, 0.2; 40/pi, 10, -0.2, -0.2; 40/pi, 10, 0, 0
external_field = linear 10
dt = 0.001
t_end = 3
)";

}  // namespace

double parse_number(std::string_view token) {
  token = trim(token);
  const auto slash = token.find('/');
  if (slash == std::string_view::npos) return parse_atom(token);
  const double den = parse_atom(token.substr(slash + 1));
  if (den == 0.0) throw Error(ErrorKind::ParseError, fmt::format("division by zero in '{}'", token));
  return parse_atom(token.substr(0, slash)) / den;
}

State InitialCondition::build(const Grid& grid, std::size_t species_count) const {
  if (kind == Kind::Uniform) {
    std::vector<double> values = uniform;
    if (values.size() == 1) values.assign(species_count, uniform.front());
    if (values.size() != species_count) {
      throw Error(ErrorKind::DimensionMismatch,
                  fmt::format("uniform initial data has {} values for {} species", values.size(), species_count));
    }
    return State::uniform(grid, values);
  }
  if (bumps.size() != species_count) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("gaussian initial data has {} bumps for {} species", bumps.size(), species_count));
  }
  State s;
  s.grid = grid;
  for (const auto& bump : bumps) {
    std::vector<double> c(grid.cell_count());
    for (std::size_t j = 0; j < c.size(); ++j) {
      const auto x = grid.position(j);
      const double dy = grid.dim() == 2 ? x[1] - bump.cy : 0.0;
      const double r2 = (x[0] - bump.cx) * (x[0] - bump.cx) + dy * dy;
      c[j] = bump.amplitude * std::exp(-bump.decay * r2);
    }
    s.concentrations.push_back(std::move(c));
  }
  return s;
}

Problem RunSettings::problem() const {
  const Grid g = grid();
  if (valence.size() < 1 || volume.size() != valence.size() || diffusivity.size() != valence.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("z, v, D must have equal lengths (got {}, {}, {})", valence.size(), volume.size(),
                            diffusivity.size()));
  }
  SpeciesSet species;
  species.count_charged = static_cast<int>(valence.size()) - 1;
  species.valence = valence;
  species.volume = volume;
  species.diffusivity = diffusivity;
  State state = initial.build(g, valence.size());
  if (bulk) {
    species.bulk = *bulk;
  } else {
    for (std::size_t i = 0; i < valence.size(); ++i) species.bulk.push_back(discrete_mass(state, i) / g.measure());
  }
  ModelParams params;
  params.eta = eta;
  params.lambda = lambda;
  params.nu = nu;
  params.v0 = v0;
  params.kernel = kernel.value_or(dim == 1 ? KernelFamily::Screened1DPicard : KernelFamily::Log2D);
  params.kernel_constant = kernel_constant;
  params.external_field = external_field;
  return validate(params, species, state);
}

std::vector<SweepPoint> RunConfig::points() const {
  std::vector<SweepPoint> out{{"", base}};
  for (const auto& axis : sweep) {
    std::vector<SweepPoint> next;
    for (const auto& point : out) {
      for (const auto& value : axis.values) {
        SweepPoint p = point;
        apply(p.settings, axis.key, value);
        if (p.settings.output_times.empty()) p.settings.output_times = {p.settings.t_end};
        p.label += (p.label.empty() ? "" : "_") + axis.key + "_" + sanitize(value);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  if (out.size() == 1 && out.front().label.empty()) out.front().label = "base";
  return out;
}

RunConfig parse_config(std::string_view text) {
  struct Line {
    std::size_t number;  // 0 for preset-provided lines
    std::string key;
    std::string value;
  };

  auto tokenize = [](std::string_view body, bool from_user) {
    std::vector<Line> lines;
    std::size_t number = 0;
    for (const auto& raw : split(body, '\n')) {
      ++number;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::ParseError, fmt::format("line {}: expected 'key = value'", number));
      }
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(ErrorKind::ParseError, fmt::format("line {}: empty key", number));
      lines.push_back({from_user ? number : 0, std::string(key), std::string(value)});
    }
    return lines;
  };

  auto user = tokenize(text, true);
  RunConfig config;
  std::vector<Line> lines;
  for (const auto& line : user) {
    if (line.key != "preset") continue;
    if (!config.preset.empty()) throw Error(ErrorKind::ParseError, fmt::format("line {}: preset given twice", line.number));
    const auto* preset = find_preset(line.value);
    if (!preset) throw Error(ErrorKind::ParseError, fmt::format("line {}: unknown preset '{}'", line.number, line.value));
    config.preset = preset->name;
    lines = tokenize(preset->text, false);
  }

  std::set<std::string> seen;
  std::set<std::string> user_sweeps;
  for (const auto& line : user) {
    if (line.key == "preset") continue;
    if (line.key != "sweep" && !seen.insert(line.key).second) {
      throw Error(ErrorKind::ParseError, fmt::format("line {}: duplicate key '{}'", line.number, line.key));
    }
    lines.push_back(line);
  }

  auto where = [](const Line& line) {
    return line.number ? fmt::format("line {}", line.number) : std::string("preset");
  };

  for (const auto& line : lines) {
    try {
      if (line.key == "sweep") {
        const auto colon = line.value.find(':');
        if (colon == std::string::npos) throw Error(ErrorKind::ParseError, "sweep needs 'key: v1, v2, ...'");
        SweepAxis axis{std::string(trim(std::string_view(line.value).substr(0, colon))),
                       split(std::string_view(line.value).substr(colon + 1), ',')};
        RunSettings probe = config.base;
        for (const auto& v : axis.values) apply(probe, axis.key, v);
        auto existing = std::find_if(config.sweep.begin(), config.sweep.end(),
                                     [&](const SweepAxis& a) { return a.key == axis.key; });
        if (line.number && existing != config.sweep.end() && !user_sweeps.count(axis.key)) {
          *existing = axis;  // user sweep replaces the preset's
        } else if (existing != config.sweep.end()) {
          throw Error(ErrorKind::ParseError, fmt::format("sweep over '{}' given twice", axis.key));
        } else {
          config.sweep.push_back(axis);
        }
        if (line.number) user_sweeps.insert(axis.key);
      } else {
        apply(config.base, line.key, line.value);
      }
      config.assignments.emplace_back(line.key, line.value);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) {
        throw Error(ErrorKind::ParseError, fmt::format("{}: {}", where(line), e.what()));
      }
      throw;
    }
  }

  // A swept key fixed by the user overrides the preset's sweep over it.
  std::erase_if(config.sweep, [&](const SweepAxis& a) { return seen.count(a.key) && !user_sweeps.count(a.key); });

  if (config.base.output_times.empty()) config.base.output_times = {config.base.t_end};
  check_settings(config.base);
  for (const auto& point : config.points()) check_settings(point.settings);
  return config;
}

const std::vector<PresetInfo>& preset_registry() {
  static const std::vector<PresetInfo> registry{
      {"test1-eta", "1D steric strength sweep, eta = 0, 1, 3, 5", kBase1D + "sweep = eta: 0, 1, 3, 5\n"},
      {"test2-gamma", "1D void positivity threshold, eta = 8, 8.1, 8.21 (permissive guard)",
       kBase1D + "gamma_guard = permissive\nsweep = eta: 8, 8.1, 8.21\n"},
      {"test3-nu", "1D scaled Debye length sweep, nu = 1/3, 1, 3", kBase1D + "eta = 1\nsweep = nu: 1/3, 1, 3\n"},
      {"test4-lambda", "1D correlation length sweep, lambda = 1/10, 1, 10",
       kBase1D + "eta = 1\nsweep = lambda: 1/10, 1, 10\n"},
      {"test5-z1", "1D cation valence sweep z1 = 1, 2, 4 for eta = 2 and eta = 0",
       kBase1D + "sweep = eta: 2, 0\nsweep = z1: 1, 2, 4\n"},
      {"test6-v1", "1D cation volume sweep v1 = 0.01, 0.03, 0.05 for eta = 1 and eta = 0",
       kBase1D + "sweep = eta: 1, 0\nsweep = v1: 0.01, 0.03, 0.05\n"},
      {"test-2d", "2D steady state with log kernel, eta = 3", kBase2D + "eta = 3\n"},
      {"test-2d-eta", "2D steric strength sweep, eta = 0, 1, 3", kBase2D + "sweep = eta: 0, 1, 3\n"},
  };
  return registry;
}

const PresetInfo* find_preset(std::string_view name) {
  static const std::map<std::string, std::string, std::less<>> aliases{{"test4-z", "test5-z1"},
                                                                        {"test3-v", "test6-v1"}};
  if (auto it = aliases.find(name); it != aliases.end()) name = it->second;
  for (const auto& p : preset_registry()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace pnpb
