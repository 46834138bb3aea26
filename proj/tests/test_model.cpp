#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"

using namespace crbsde;

namespace {

ReflectedProblem constant_problem(double terminal, double barrier) {
  ReflectedProblem p;
  p.terminal = [terminal](const ScenarioTree&, std::size_t) {
    return terminal;
  };
  p.barrier = [barrier](const ScenarioTree&, int, std::size_t) {
    return barrier;
  };
  p.driver = make_zero_driver();
  p.filtration = Filtration::Partial;
  return p;
}

}  // namespace

TEST_CASE("validation: constant payoffs") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  const ValidationReport ok =
      validate_problem(constant_problem(1.0, 0.0), tree);
  CHECK(ok.ok);
  CHECK(ok.terminal_margin == doctest::Approx(1.0));
  for (double m : ok.terminal_margins) CHECK(m == doctest::Approx(1.0));

  const ValidationReport bad =
      validate_problem(constant_problem(0.0, 1.0), tree, true);
  CHECK(!bad.ok);
  CHECK(bad.terminal_margin == doctest::Approx(-1.0));
  CHECK_THROWS_AS(validate_problem(constant_problem(0.0, 1.0), tree), Error);
  try {
    validate_problem(constant_problem(0.0, 1.0), tree);
  } catch (const Error& e) {
    CHECK(e.tag() == "VALIDATION_TERMINAL");
    CHECK(static_cast<int>(e.code()) == 2);
  }
}

TEST_CASE("validation: sign payoff splits across the two observed atoms") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  ReflectedProblem p = constant_problem(0.0, 0.0);
  p.terminal = [](const ScenarioTree& t, std::size_t leaf) {
    return static_cast<double>(ScenarioTree::eps1(t.step_code(1, leaf, 0)));
  };
  const ValidationReport r = validate_problem(p, tree, true);
  CHECK(!r.ok);
  REQUIRE(r.terminal_margins.size() == 2);
  CHECK(r.terminal_margins[0] == doctest::Approx(1.0));
  CHECK(r.terminal_margins[1] == doctest::Approx(-1.0));
}

TEST_CASE("rollout: zero drift identity diffusion reproduces the paths") {
  const ScenarioTree tree = ScenarioTree::build(3, 1.0);
  StateModel m;
  m.x0 = {0.0, 0.0};
  m.diffusion = [](double, const PathView&) {
    return Mat2{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  };
  const StatePaths paths = rollout_state(m, tree);
  for (int l = 0; l <= 3; ++l)
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      CHECK(paths.x[l][node][0] == doctest::Approx(tree.w1(l, node)));
      CHECK(paths.x[l][node][1] == doctest::Approx(tree.w2(l, node)));
    }
}

TEST_CASE("rollout: one Euler step with unit drift") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  StateModel m;
  m.x0 = {0.0, 0.0};
  m.drift = [](double, const PathView&, std::optional<double>) {
    return Vec2{1.0, 0.0};
  };
  m.diffusion = [](double, const PathView&) {
    return Mat2{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  };
  const StatePaths paths = rollout_state(m, tree);
  for (std::size_t leaf = 0; leaf < 4; ++leaf) {
    const int e1 = ScenarioTree::eps1(tree.step_code(1, leaf, 0));
    CHECK(paths.x[1][leaf][0] == doctest::Approx(1.0 + e1));
  }
}

TEST_CASE("rollout: path-dependent drift matches a hand recursion") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  StateModel m;
  m.x0 = {0.2, 0.0};
  m.drift = [](double, const PathView& pv, std::optional<double>) {
    return Vec2{pv.running_max1(), 0.0};
  };
  m.diffusion = [](double, const PathView&) {
    return Mat2{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  };
  const StatePaths paths = rollout_state(m, tree);
  // independent 16-branch recursion
  const double dt = tree.dt(), sq = tree.sqrt_dt();
  for (std::size_t leaf = 0; leaf < 16; ++leaf) {
    double x = 0.2, runmax = 0.2;
    for (int s = 0; s < 2; ++s) {
      const int e1 = ScenarioTree::eps1(tree.step_code(2, leaf, s));
      x = x + runmax * dt + e1 * sq;
      runmax = std::max(runmax, x);
    }
    CHECK(paths.x[2][leaf][0] == doctest::Approx(x).epsilon(1e-14));
  }
}

TEST_CASE("rollout: drift bound enforced") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  StateModel m;
  m.drift = [](double, const PathView&, std::optional<double>) {
    return Vec2{5.0, 0.0};
  };
  m.diffusion = [](double, const PathView&) {
    return Mat2{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  };
  m.drift_bound = 1.0;
  CHECK_THROWS_AS(rollout_state(m, tree), Error);
}

TEST_CASE("driver evaluation: catalog hand cases") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  const Driver affine = make_affine_driver(
      [](const ScenarioTree&, int, std::size_t) { return 1.0; }, nullptr,
      nullptr);
  CHECK(affine.eval(tree, 0, 0, 2.0, 9.0, 9.0) == doctest::Approx(2.0));

  std::vector<Driver::Piece> pieces(2);
  pieces[0].alpha = 1.0;
  pieces[1].alpha = -1.0;
  pieces[1].c = [](const ScenarioTree&, int, std::size_t,
                   std::optional<double>) { return 1.0; };
  const Driver ma = make_max_affine_driver(std::move(pieces));
  CHECK(ma.eval(tree, 0, 0, 0.3, 0.0, 0.0) == doctest::Approx(0.7));

  const Driver ct = make_constant_driver(
      [](const ScenarioTree& t, int l, std::size_t) { return t.time(l); });
  CHECK(ct.eval(tree, 0, 0, 5.0, 5.0, 5.0) == doctest::Approx(0.0));
  CHECK(ct.eval(tree, 1, 2, -7.0, 1.0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("max-affine drivers are convex and Lipschitz in (y, z1)") {
  testgen::Rng rng(555);
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  std::vector<Driver::Piece> pieces(3);
  double mu = 0.0;
  for (auto& p : pieces) {
    p.alpha = testgen::uni(rng, -1.0, 1.0);
    p.beta1 = testgen::uni(rng, -1.0, 1.0);
    const double c = testgen::uni(rng, -1.0, 1.0);
    p.c = [c](const ScenarioTree&, int, std::size_t, std::optional<double>) {
      return c;
    };
    mu = std::max(mu, std::fabs(p.alpha) + std::fabs(p.beta1));
  }
  const Driver d = make_max_affine_driver(std::move(pieces));
  for (int trial = 0; trial < 200; ++trial) {
    const double y1 = testgen::uni(rng, -2, 2), z1 = testgen::uni(rng, -2, 2);
    const double y2 = testgen::uni(rng, -2, 2), z2 = testgen::uni(rng, -2, 2);
    const double lam = testgen::uni(rng, 0, 1);
    const double fmix = d.eval(tree, 0, 0, lam * y1 + (1 - lam) * y2,
                               lam * z1 + (1 - lam) * z2, 0.0);
    const double f1 = d.eval(tree, 0, 0, y1, z1, 0.0);
    const double f2 = d.eval(tree, 0, 0, y2, z2, 0.0);
    CHECK(fmix <= lam * f1 + (1 - lam) * f2 + 1e-12);
    CHECK(std::fabs(f1 - f2) <=
          mu * (std::fabs(y1 - y2) + std::fabs(z1 - z2)) + 1e-12);
  }
}

TEST_CASE("control grid validation") {
  CHECK_THROWS_AS(validate_grid(ControlGrid{}), Error);
  CHECK_THROWS_AS(validate_grid(ControlGrid{{0.0, 1.0, 0.0}}), Error);
  CHECK_THROWS_AS(validate_grid(ControlGrid{{0.0, std::nan("")}}), Error);
  CHECK_NOTHROW(validate_grid(ControlGrid{{-1.0, 0.0, 1.0}}));
}

TEST_CASE("validation rejects affine coefficients that vary inside an atom") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  ReflectedProblem p = constant_problem(1.0, 0.0);
  p.filtration = Filtration::Trivial;
  p.driver = make_affine_driver(
      nullptr,
      [](const ScenarioTree& t, int l, std::size_t node) {
        return l == 0 ? 0.0
                      : static_cast<double>(
                            ScenarioTree::eps1(t.step_code(l, node, l - 1)));
      },
      nullptr);
  p.driver.mu = 1.0;
  // beta must be constant on the (single) atom per level; it is not at level 0
  // children... the coefficient is evaluated at decision levels 0..N-1 only,
  // where it is 0 here, so this passes
  CHECK_NOTHROW(validate_problem(p, tree));

  const ScenarioTree tree2 = ScenarioTree::build(2, 1.0);
  CHECK_THROWS_AS(validate_problem(p, tree2), Error);
  try {
    validate_problem(p, tree2);
  } catch (const Error& e) {
    CHECK(e.tag() == "VALIDATION_DRIVER");
  }
}
