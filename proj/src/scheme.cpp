#include "pnpb/scheme.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "pnpb/error.hpp"

namespace pnpb {

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Face {
  std::size_t a;
  std::size_t b;
  double coef;  // D / h^2
};

// Faces between neighbouring cells; boundary faces carry zero flux and are omitted.
std::vector<Face> interior_faces(const Grid& grid) {
  std::vector<Face> faces;
  const int n = grid.nodes_per_axis();
  const double inv_h2 = 1.0 / (grid.dx() * grid.dx());
  const int rows = grid.dim() == 2 ? n : 1;
  for (int iy = 0; iy < rows; ++iy) {
    for (int ix = 0; ix + 1 < n; ++ix) faces.push_back({grid.index(ix, iy), grid.index(ix + 1, iy), inv_h2});
  }
  if (grid.dim() == 2) {
    for (int iy = 0; iy + 1 < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) faces.push_back({grid.index(ix, iy), grid.index(ix, iy + 1), inv_h2});
    }
  }
  return faces;
}

// A C = C^n with A = I + dt * (divergence of the Slotboom flux), applied matrix-free.
std::vector<double> apply_operator(const std::vector<Face>& faces, const std::vector<double>& drift, double diffusivity,
                                   double dt, const std::vector<double>& c) {
  std::vector<double> out = c;
  for (const auto& face : faces) {
    const auto w = face_weights(drift[face.a], drift[face.b]);
    const double transfer = dt * diffusivity * face.coef * (w.upper * c[face.b] - w.lower * c[face.a]);
    out[face.a] -= transfer;
    out[face.b] += transfer;
  }
  return out;
}

// Normwise relative residual |b - A x| / (|A| |x| + |b|) in the max norm.
double relative_residual(const std::vector<Face>& faces, const std::vector<double>& drift, double diffusivity,
                         double dt, const std::vector<double>& x, const std::vector<double>& b) {
  const auto ax = apply_operator(faces, drift, diffusivity, dt, x);
  std::vector<double> row_norm(x.size(), 1.0);
  for (const auto& face : faces) {
    const auto w = face_weights(drift[face.a], drift[face.b]);
    const double k = dt * diffusivity * face.coef;
    row_norm[face.a] += k * (w.lower + w.upper);
    row_norm[face.b] += k * (w.upper + w.lower);
  }
  double r = 0.0, a_norm = 0.0, x_norm = 0.0, b_norm = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    r = std::max(r, std::abs(b[j] - ax[j]));
    a_norm = std::max(a_norm, row_norm[j]);
    x_norm = std::max(x_norm, std::abs(x[j]));
    b_norm = std::max(b_norm, std::abs(b[j]));
  }
  const double scale = a_norm * x_norm + b_norm;
  return scale > 0.0 ? r / scale : 0.0;
}

std::vector<double> solve_tridiagonal_1d(const std::vector<double>& drift, double diffusivity, double dt, double h,
                                         const std::vector<double>& rhs) {
  const std::size_t n = rhs.size();
  const double k = dt * diffusivity / (h * h);
  std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0);
  std::vector<double> from_left(n, 0.0), from_right(n, 0.0);
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const auto w = face_weights(drift[a], drift[a + 1]);
    from_right[a] = k * w.lower;
    upper[a] = -k * w.upper;
    from_left[a + 1] = k * w.upper;
    lower[a + 1] = -k * w.lower;
  }
  for (std::size_t j = 0; j < n; ++j) diag[j] = 1.0 + (from_left[j] + from_right[j]);
  // M-matrix: positive diagonal, non-positive off-diagonals, strict column dominance.
  for (std::size_t j = 0; j < n; ++j) {
    double off = 0.0;
    if (j + 1 < n) off += -lower[j + 1];
    if (j > 0) off += -upper[j - 1];
    if (!(diag[j] > 0.0) || lower[j] > 0.0 || upper[j] > 0.0 || !(diag[j] - off > 0.0)) {
      throw Error(ErrorKind::LinearSolveFailure, fmt::format("implicit matrix is not an M-matrix at row {}", j));
    }
  }
  // Elimination from both ends towards the centre row (stable without pivoting for
  // column-dominant matrices). The order is mirror-invariant, so a mirrored system
  // yields a bitwise mirrored solution.
  const std::size_t mid = n / 2;
  std::vector<double> c_top(n, 0.0), d_top(n, 0.0), c_bot(n, 0.0), d_bot(n, 0.0);
  for (std::size_t j = 0; j < mid; ++j) {
    const double denom = j == 0 ? diag[j] : diag[j] - lower[j] * c_top[j - 1];
    c_top[j] = upper[j] / denom;
    d_top[j] = (j == 0 ? rhs[j] : rhs[j] - lower[j] * d_top[j - 1]) / denom;
  }
  for (std::size_t j = n - 1; j > mid; --j) {
    const double denom = j == n - 1 ? diag[j] : diag[j] - upper[j] * c_bot[j + 1];
    c_bot[j] = lower[j] / denom;
    d_bot[j] = (j == n - 1 ? rhs[j] : rhs[j] - upper[j] * d_bot[j + 1]) / denom;
  }
  const double left_c = mid > 0 ? lower[mid] * c_top[mid - 1] : 0.0;
  const double left_d = mid > 0 ? lower[mid] * d_top[mid - 1] : 0.0;
  const double right_c = mid + 1 < n ? upper[mid] * c_bot[mid + 1] : 0.0;
  const double right_d = mid + 1 < n ? upper[mid] * d_bot[mid + 1] : 0.0;
  std::vector<double> x(n);
  x[mid] = (rhs[mid] - (left_d + right_d)) / (diag[mid] - (left_c + right_c));
  for (std::size_t j = mid; j-- > 0;) x[j] = d_top[j] - c_top[j] * x[j + 1];
  for (std::size_t j = mid + 1; j < n; ++j) x[j] = d_bot[j] - c_bot[j] * x[j - 1];
  return x;
}

}  // namespace

FaceWeights face_weights(double f_a, double f_b) {
  const double d = f_b - f_a;
  return {2.0 * logistic(d), 2.0 * logistic(-d)};
}

double face_flux(const Problem& problem, const State& state, const FieldSet& fields, std::size_t species,
                 std::size_t cell, int axis) {
  const Grid& grid = state.grid;
  const auto node = grid.node_of(cell);
  if (axis < 0 || axis >= grid.dim()) throw Error(ErrorKind::InvalidParameter, "face axis out of range");
  if (node[static_cast<std::size_t>(axis)] + 1 >= grid.nodes_per_axis()) return 0.0;
  const std::size_t neighbour = axis == 0 ? cell + 1 : cell + static_cast<std::size_t>(grid.nodes_per_axis());
  const auto& f = fields.drift[species];
  const auto& c = state.concentrations[species];
  const auto w = face_weights(f[cell], f[neighbour]);
  return -problem.species.diffusivity[species] / grid.dx() * (w.upper * c[neighbour] - w.lower * c[cell]);
}

double min_void(const Problem& problem, const State& state) {
  if (problem.params.eta == 0.0) return 1.0;
  double lowest = INFINITY;
  for (std::size_t j = 0; j < state.grid.cell_count(); ++j) {
    double occupied = 0.0;
    for (std::size_t i = 0; i < state.species_count(); ++i) {
      occupied += problem.species.volume[i] * state.concentrations[i][j];
    }
    lowest = std::min(lowest, 1.0 - problem.params.eta * occupied);
  }
  return lowest;
}

struct Stepper::Sparse {
  std::vector<Face> faces;
  Eigen::SparseMatrix<double> matrix;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analysed = false;
};

Stepper::Stepper(const Problem& problem) : problem_(&problem), sparse_(std::make_unique<Sparse>()) {
  sparse_->faces = interior_faces(problem.grid);
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

StepReport Stepper::step(const State& state, const FieldSet& fields, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidParameter, "time step must be positive");
  const Problem& problem = *problem_;
  const Grid& grid = state.grid;
  const std::size_t cells = grid.cell_count();
  const std::size_t count = state.species_count();
  const auto& faces = sparse_->faces;

  StepReport report;
  report.state.grid = grid;
  report.state.time = state.time + dt;
  report.state.concentrations.resize(count);
  report.residuals.resize(count);

  for (std::size_t i = 0; i < count; ++i) {
    const double diffusivity = problem.species.diffusivity[i];
    const auto& drift = fields.drift[i];
    const auto& rhs = state.concentrations[i];
    std::vector<double> next;

    if (grid.dim() == 1) {
      next = solve_tridiagonal_1d(drift, diffusivity, dt, grid.dx(), rhs);
    } else {
      // Symmetrise with y = exp((f - f_max)/2) C: off-diagonals become -k / cosh(d/2).
      const double f_max = *std::max_element(drift.begin(), drift.end());
      const double f_min = *std::min_element(drift.begin(), drift.end());
      std::vector<Eigen::Triplet<double>> triplets;
      triplets.reserve(cells + 2 * faces.size());
      std::vector<double> diag(cells, 1.0);
      for (const auto& face : faces) {
        const double k = dt * diffusivity * face.coef;
        const auto w = face_weights(drift[face.a], drift[face.b]);
        diag[face.a] += k * w.lower;
        diag[face.b] += k * w.upper;
        const double off = -k / std::cosh(0.5 * (drift[face.b] - drift[face.a]));
        triplets.emplace_back(static_cast<int>(face.a), static_cast<int>(face.b), off);
        triplets.emplace_back(static_cast<int>(face.b), static_cast<int>(face.a), off);
      }
      for (std::size_t j = 0; j < cells; ++j) triplets.emplace_back(static_cast<int>(j), static_cast<int>(j), diag[j]);
      auto& matrix = sparse_->matrix;
      matrix.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(cells));
      matrix.setFromTriplets(triplets.begin(), triplets.end());

      Eigen::VectorXd b(static_cast<Eigen::Index>(cells));
      std::vector<double> scale(cells);
      const bool can_symmetrise = f_max - f_min < 1200.0;
      if (can_symmetrise) {
        for (std::size_t j = 0; j < cells; ++j) {
          scale[j] = std::exp(0.5 * (drift[j] - f_max));
          b[static_cast<Eigen::Index>(j)] = scale[j] * rhs[j];
        }
        if (!sparse_->analysed) {
          sparse_->ldlt.analyzePattern(matrix);
          sparse_->analysed = true;
        }
        sparse_->ldlt.factorize(matrix);
        if (sparse_->ldlt.info() != Eigen::Success) {
          throw Error(ErrorKind::LinearSolveFailure, fmt::format("LDLT factorisation failed for species {}", i + 1));
        }
        const Eigen::VectorXd y = sparse_->ldlt.solve(b);
        next.resize(cells);
        for (std::size_t j = 0; j < cells; ++j) next[j] = y[static_cast<Eigen::Index>(j)] / scale[j];
      } else {
        // Drift range too wide for the diagonal scaling; solve the C-form directly.
        std::vector<Eigen::Triplet<double>> c_form;
        std::vector<double> c_diag(cells, 1.0);
        for (const auto& face : faces) {
          const double k = dt * diffusivity * face.coef;
          const auto w = face_weights(drift[face.a], drift[face.b]);
          c_diag[face.a] += k * w.lower;
          c_diag[face.b] += k * w.upper;
          c_form.emplace_back(static_cast<int>(face.a), static_cast<int>(face.b), -k * w.upper);
          c_form.emplace_back(static_cast<int>(face.b), static_cast<int>(face.a), -k * w.lower);
        }
        for (std::size_t j = 0; j < cells; ++j) c_form.emplace_back(static_cast<int>(j), static_cast<int>(j), c_diag[j]);
        Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(cells));
        a.setFromTriplets(c_form.begin(), c_form.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) {
          throw Error(ErrorKind::LinearSolveFailure, fmt::format("LU factorisation failed for species {}", i + 1));
        }
        for (std::size_t j = 0; j < cells; ++j) b[static_cast<Eigen::Index>(j)] = rhs[j];
        const Eigen::VectorXd x = lu.solve(b);
        next.assign(x.data(), x.data() + x.size());
      }
    }

    const double residual = relative_residual(faces, drift, diffusivity, dt, next, rhs);
    const double tolerance = grid.dim() == 1 ? tolerance_1d : tolerance_2d;
    if (!(residual <= tolerance)) {
      throw Error(ErrorKind::LinearSolveFailure,
                  fmt::format("species {} residual {:.3g} exceeds {:.3g}", i + 1, residual, tolerance));
    }
    report.residuals[i] = residual;
    report.state.concentrations[i] = std::move(next);
  }

  report.min_concentration = INFINITY;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& c = report.state.concentrations[i];
    for (std::size_t j = 0; j < cells; ++j) {
      report.min_concentration = std::min(report.min_concentration, c[j]);
      if (c[j] < 0.0) {
        report.events.push_back({EventKind::NegativeConcentration, static_cast<int>(i), j, c[j], report.state.time});
      }
    }
  }
  report.min_gamma = min_void(problem, report.state);
  if (problem.params.eta > 0.0 && report.min_gamma <= 0.0) {
    for (std::size_t j = 0; j < cells; ++j) {
      double occupied = 0.0;
      for (std::size_t i = 0; i < count; ++i) occupied += problem.species.volume[i] * report.state.concentrations[i][j];
      const double gamma = 1.0 - problem.params.eta * occupied;
      if (gamma <= 0.0) report.events.push_back({EventKind::VoidCollapse, -1, j, gamma, report.state.time});
    }
  }
  return report;
}

StepReport step(const Problem& problem, const State& state, const FieldSet& fields, double dt) {
  Stepper stepper(problem);
  return stepper.step(state, fields, dt);
}

Trajectory run_dynamics(const Problem& problem, const FieldEvaluator& evaluator, const State& initial, double dt,
                        double t_end, const DynamicsHooks& hooks) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidParameter, "time step must be positive");
  if (!(t_end >= initial.time)) throw Error(ErrorKind::InvalidParameter, "end time precedes the initial time");

  Stepper stepper(problem);
  Trajectory trajectory;
  State state = initial;
  FieldSet fields = evaluator.compute(state);
  if (hooks.on_state) hooks.on_state(state, fields);

  const double t0 = initial.time;
  const double slack = 1e-12 * std::max(1.0, std::abs(t_end));
  for (long n = 1;; ++n) {
    if (state.time >= t_end - slack) break;
    double target = t0 + static_cast<double>(n) * dt;
    if (target > t_end - slack) target = t_end;
    const double h = target - state.time;
    auto report = stepper.step(state, fields, h);
    report.state.time = target;
    for (auto& e : report.events) e.time = target;

    state = std::move(report.state);
    fields = evaluator.compute(state);
    if (hooks.on_state) hooks.on_state(state, fields);

    StepSummary summary;
    summary.time = state.time;
    summary.residuals = std::move(report.residuals);
    summary.min_concentration = report.min_concentration;
    summary.min_gamma = report.min_gamma;
    summary.events = std::move(report.events);
    trajectory.steps.push_back(std::move(summary));
  }
  trajectory.final_state = std::move(state);
  trajectory.final_fields = std::move(fields);
  return trajectory;
}

Trajectory run_dynamics(const Problem& problem, GammaGuard guard, double dt, double t_end, const DynamicsHooks& hooks) {
  FieldEvaluator evaluator(problem, guard);
  return run_dynamics(problem, evaluator, problem.initial, dt, t_end, hooks);
}

}  // namespace pnpb
