#include <functional>

#include <gtest/gtest.h>

#include "pnpb/error.hpp"
#include "pnpb/grid.hpp"
#include "pnpb/model.hpp"

namespace {

using namespace pnpb;

SpeciesSet three_species(double v = 0.01, double bulk = 0.5) {
  SpeciesSet s;
  s.count_charged = 2;
  s.valence = {1, -1, 0};
  s.volume = {v, v, v};
  s.diffusivity = {1.0, 1.0, 1.0};
  s.bulk = {bulk, bulk, bulk};
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::IoError;
}

TEST(Grid, NodesAndSpacing) {
  const Grid g(1, 100);
  EXPECT_EQ(g.nodes_per_axis(), 201);
  EXPECT_EQ(g.cell_count(), 201u);
  EXPECT_DOUBLE_EQ(g.dx(), 0.01);
  EXPECT_DOUBLE_EQ(g.coord(0), -1.0);
  EXPECT_NEAR(g.coord(200), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(g.cell_weight(), 0.01);
  EXPECT_NEAR(g.measure(), 2.01, 1e-14);
}

TEST(Grid, TwoDimensionalIndexing) {
  const Grid g(2, 25);
  EXPECT_EQ(g.nodes_per_axis(), 51);
  EXPECT_EQ(g.cell_count(), 51u * 51u);
  EXPECT_DOUBLE_EQ(g.dx(), 0.04);
  EXPECT_DOUBLE_EQ(g.cell_weight(), 0.04 * 0.04);
  const std::size_t cell = g.index(7, 30);
  EXPECT_EQ(cell, 7u + 51u * 30u);
  EXPECT_EQ(g.node_of(cell), (std::array<int, 2>{7, 30}));
  const auto p = g.position(cell);
  EXPECT_NEAR(p[0], -1.0 + 7 * 0.04, 1e-15);
  EXPECT_NEAR(p[1], -1.0 + 30 * 0.04, 1e-15);
}

TEST(Grid, GeometricWeightHalvesBoundaryCells) {
  const Grid g(2, 4);
  EXPECT_DOUBLE_EQ(g.geometric_weight(g.index(0, 0)), 0.25 * g.cell_weight());
  EXPECT_DOUBLE_EQ(g.geometric_weight(g.index(0, 3)), 0.5 * g.cell_weight());
  EXPECT_DOUBLE_EQ(g.geometric_weight(g.index(3, 3)), g.cell_weight());
}

TEST(Grid, RejectsBadShape) {
  EXPECT_EQ(kind_of([] { Grid(3, 10); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { Grid(1, 0); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { Grid(1, 10, -1.0); }), ErrorKind::InvalidParameter);
}

TEST(Validate, ZeroEtaAlwaysAdmissible) {
  const Grid g(1, 10);
  ModelParams p;
  p.eta = 0.0;
  const auto problem = validate(p, three_species(0.3, 5.0), State::uniform(g, {5.0, 5.0, 5.0}));
  EXPECT_DOUBLE_EQ(problem.params.gamma_bulk, 1.0);
}

TEST(Validate, BulkVoidForEtaOne) {
  const Grid g(1, 100);
  ModelParams p;
  p.eta = 1.0;
  const auto problem = validate(p, three_species(), State::uniform(g, {0.5, 0.5, 0.5}));
  EXPECT_NEAR(problem.params.gamma_bulk, 0.985, 1e-15);
  EXPECT_NEAR(problem.v0(), 0.01, 1e-15);
  EXPECT_NEAR(problem.masses[0], 0.5 * 2.01, 1e-13);
}

TEST(Validate, NonPositiveBulkVoid) {
  const Grid g(1, 100);
  ModelParams p;
  p.eta = 200.0;
  EXPECT_EQ(kind_of([&] { validate(p, three_species(), State::uniform(g, {0.5, 0.5, 0.5})); }),
            ErrorKind::NonPositiveBulkVoid);
}

TEST(Validate, NonPositiveTotalVoid) {
  const Grid g(1, 10);
  ModelParams p;
  p.eta = 1.0;
  auto species = three_species(0.1, 0.1);
  // bulk is fine (Gamma^B = 0.97) but the initial mass overfills the domain
  EXPECT_EQ(kind_of([&] { validate(p, species, State::uniform(g, {5.0, 5.0, 5.0})); }),
            ErrorKind::NonPositiveTotalVoid);
}

TEST(Validate, ParameterChecks) {
  const Grid g(1, 10);
  const auto state = State::uniform(g, {0.5, 0.5, 0.5});
  ModelParams p;
  p.eta = -1.0;
  EXPECT_EQ(kind_of([&] { validate(p, three_species(), state); }), ErrorKind::InvalidParameter);
  p.eta = 0.0;
  p.nu = 0.0;
  EXPECT_EQ(kind_of([&] { validate(p, three_species(), state); }), ErrorKind::InvalidParameter);
  p.nu = 1.0;
  auto bad = three_species();
  bad.valence.back() = 1;
  EXPECT_EQ(kind_of([&] { validate(p, bad, state); }), ErrorKind::InvalidParameter);
  auto short_set = three_species();
  short_set.volume.pop_back();
  EXPECT_EQ(kind_of([&] { validate(p, short_set, state); }), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([&] { validate(p, three_species(), State::uniform(g, {0.5, 0.5})); }),
            ErrorKind::DimensionMismatch);
}

TEST(Masses, UniformAndGeometricWeights) {
  const Grid g(1, 10);
  const auto s = State::uniform(g, {1.0});
  EXPECT_NEAR(discrete_mass(s, 0), 2.1, 1e-14);
  EXPECT_NEAR(geometric_mass(s, 0), 2.0, 1e-14);
}

TEST(Saturation, FlagsCellsAboveBound) {
  const Grid g(1, 2);
  ModelParams p;
  p.eta = 10.0;
  auto s = State::uniform(g, {1.0, 1.0, 1.0});
  s.concentrations[0][2] = 10.5;  // bound 1/(eta v) = 10
  const auto events = check_saturation(s, p, three_species());
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].kind, EventKind::Saturation);
  EXPECT_EQ(events[0].species, 0);
  EXPECT_EQ(events[0].cell, 2u);
  p.eta = 0.0;
  EXPECT_TRUE(check_saturation(s, p, three_species()).empty());
}

TEST(ExternalField, LinearSamples) {
  const Grid g(2, 2);
  const auto v = ExternalField::linear(10.0, -2.0).sample(g);
  ASSERT_EQ(v.size(), g.cell_count());
  for (std::size_t j = 0; j < g.cell_count(); ++j) {
    const auto x = g.position(j);
    EXPECT_NEAR(v[j], 10.0 * x[0] - 2.0 * x[1], 1e-14);
  }
}

}  // namespace
