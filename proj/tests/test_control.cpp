#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "crbsde/control.hpp"
#include "helpers.hpp"

using namespace crbsde;

namespace {

StateModel diag_state(double s1, double s2, Vec2 x0) {
  StateModel m;
  m.x0 = x0;
  m.diffusion = [s1, s2](double, const PathView&) {
    return Mat2{Vec2{s1, 0.0}, Vec2{0.0, s2}};
  };
  return m;
}

LinearBrrProblem linear_instance() {
  LinearBrrProblem p;
  p.state = diag_state(0.3, 0.4, {1.0, 0.5});
  p.alpha = [](int, std::size_t) { return 0.2; };
  p.beta = [](int, std::size_t) { return 0.1; };
  p.g = [](double, const Vec2& xhat, double v) {
    return v * xhat[0] - 0.5 * v * v;
  };
  p.b = [](double, const Vec2&, double v) { return v; };
  p.h = [](double, const Vec2& x) { return x[0] - 1.2; };
  p.phi = [](const Vec2& x) { return x[0]; };
  p.mu = 1.5;
  return p;
}

AtomControl constant_control(const ScenarioTree& tree, double v) {
  AtomControl c(tree.num_steps());
  for (int l = 0; l < tree.num_steps(); ++l)
    c[l].assign(tree.atom_count(l, Filtration::Partial), v);
  return c;
}

}  // namespace

TEST_CASE("partial-information linear problem: singleton grid is one value") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  const LinearBrrProblem p = linear_instance();
  const LinearBrrResult res = solve_linear_brr(p, tree, ControlGrid{{0.5}});
  const double direct = weak_value_for_control(p, tree,
                                               constant_control(tree, 0.5));
  CHECK(res.value == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("dominated controls: penalized control stays at zero") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  LinearBrrProblem p = linear_instance();
  p.g = [](double, const Vec2&, double v) { return -v * v; };
  p.b = [](double, const Vec2&, double) { return 0.0; };
  const LinearBrrResult res =
      solve_linear_brr(p, tree, ControlGrid{{-1.0, 0.0, 1.0}});
  const double uncontrolled =
      weak_value_for_control(p, tree, constant_control(tree, 0.0));
  CHECK(res.value == doctest::Approx(uncontrolled).epsilon(1e-12));
  for (const auto& lvl : res.feedback)
    for (double v : lvl) CHECK(v == 0.0);
}

TEST_CASE("linear value matches both enumeration oracles") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  const LinearBrrProblem p = linear_instance();
  const ControlGrid grid{{-0.5, 0.5}};
  const LinearBrrResult res = solve_linear_brr(p, tree, grid);
  const auto brute = oracle::brute_force_controls(p, tree, grid);
  CHECK(res.value == doctest::Approx(brute.value).epsilon(1e-9));
  const double mixed = mixed_value_oracle(p, tree, grid);
  CHECK(res.value == doctest::Approx(mixed).epsilon(1e-9));
  // the reported feedback is itself an admissible control attaining the value
  const double replay = weak_value_for_control(p, tree, res.feedback);
  CHECK(replay == doctest::Approx(res.value).epsilon(1e-9));
  // and the brute-force argmax reproduces the brute-force value
  CHECK(weak_value_for_control(p, tree, brute.best_control) ==
        doctest::Approx(brute.value).epsilon(1e-12));
}

TEST_CASE("feedback argmax is invariant under positive scaling of the gain") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  LinearBrrProblem p = linear_instance();
  p.b = [](double, const Vec2&, double) { return 0.0; };
  const ControlGrid grid{{-0.5, 0.0, 0.5}};
  const AtomControl f1 = solve_linear_brr(p, tree, grid).feedback;
  p.g = [](double, const Vec2& xhat, double v) {
    return 7.0 * (v * xhat[0] - 0.5 * v * v);
  };
  const AtomControl f2 = solve_linear_brr(p, tree, grid).feedback;
  CHECK(f1 == f2);
}

TEST_CASE("hand-computed weak value under a one-step tilt") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  LinearBrrProblem p;
  p.state = diag_state(1.0, 1.0, {0.0, 0.0});
  p.g = [](double, const Vec2&, double) { return 0.0; };
  p.b = [](double, const Vec2&, double v) { return v; };
  p.h = [](double, const Vec2&) { return -100.0; };
  p.phi = [](const Vec2& x) { return x[0] + 2.0 * x[1]; };
  p.mu = 0.5;
  const double v = weak_value_for_control(p, tree,
                                          constant_control(tree, 0.5));
  // weights (0.375, 0.375, 0.125, 0.125) on states (1,1) (1,-1) (-1,1) (-1,-1)
  CHECK(v == doctest::Approx(0.375 * 3.0 - 0.375 * 1.0 + 0.125 * 1.0 -
                             0.125 * 3.0)
                 .epsilon(1e-12));
}

TEST_CASE("conjugate family of a polyhedral generator") {
  {
    std::vector<ConvexBrrProblem::Piece> one(1);
    one[0].alpha = 0.4;
    one[0].beta = -0.2;
    one[0].c = [](double, const Vec2&, double v) { return 1.0 - v * v; };
    const DualFamily d = fenchel_dual(one, ControlGrid{{-1.0, 0.0, 2.0}});
    REQUIRE(d.entries.size() == 1);
    CHECK(d.entries[0].alpha == doctest::Approx(0.4));
    CHECK(d.entries[0].beta == doctest::Approx(-0.2));
    CHECK(d.entries[0].cbar(0.0, {0.0, 0.0}) == doctest::Approx(1.0));
  }
  {
    std::vector<ConvexBrrProblem::Piece> two(2);
    two[0].alpha = 1.0;
    two[0].c = [](double, const Vec2&, double) { return 0.0; };
    two[1].alpha = -1.0;
    two[1].c = [](double, const Vec2&, double) { return 1.0; };
    const DualFamily d = fenchel_dual(two, ControlGrid{{0.0}});
    CHECK(d.reconstruct(0.0, {0, 0}, 0.3, 0.0) == doctest::Approx(0.7));
  }
  // biconjugation on random uncontrolled polyhedral generators
  testgen::Rng rng(606);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ConvexBrrProblem::Piece> pieces(3);
    for (auto& pc : pieces) {
      pc.alpha = testgen::uni(rng, -1, 1);
      pc.beta = testgen::uni(rng, -1, 1);
      const double c = testgen::uni(rng, -1, 1);
      pc.c = [c](double, const Vec2&, double) { return c; };
    }
    const DualFamily d = fenchel_dual(pieces, ControlGrid{{0.0}});
    for (int probe = 0; probe < 20; ++probe) {
      const double y = testgen::uni(rng, -2, 2), z = testgen::uni(rng, -2, 2);
      double direct = -1e300;
      for (const auto& pc : pieces)
        direct = std::max(direct,
                          pc.alpha * y + pc.beta * z + pc.c(0.0, {0, 0}, 0.0));
      CHECK(d.reconstruct(0.0, {0, 0}, y, z) ==
            doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("one-piece convex problem degenerates to the linear solver") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  const LinearBrrProblem lin = linear_instance();
  ConvexBrrProblem cvx;
  cvx.state = lin.state;
  cvx.pieces.resize(1);
  cvx.pieces[0].alpha = 0.2;
  cvx.pieces[0].beta = 0.1;
  cvx.pieces[0].c = lin.g;
  cvx.b = lin.b;
  cvx.h = lin.h;
  cvx.phi = lin.phi;
  cvx.mu = lin.mu;
  const ControlGrid grid{{-0.5, 0.5}};
  const double a = solve_convex_brr(cvx, tree, grid).value;
  const double b = solve_linear_brr(lin, tree, grid).value;
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("convex value dominates every fixed-control value") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  ConvexBrrProblem cvx;
  cvx.state = diag_state(0.3, 0.4, {1.0, 0.5});
  cvx.pieces.resize(2);
  cvx.pieces[0].alpha = 0.2;
  cvx.pieces[0].beta = 0.1;
  cvx.pieces[0].c = [](double, const Vec2& x, double v) { return v * x[0]; };
  cvx.pieces[1].alpha = -0.1;
  cvx.pieces[1].beta = 0.2;
  cvx.pieces[1].c = [](double, const Vec2&, double v) { return -v * v; };
  cvx.b = [](double, const Vec2&, double v) { return 0.5 * v; };
  cvx.h = [](double, const Vec2& x) { return x[0] - 1.2; };
  cvx.phi = [](const Vec2& x) { return x[0]; };
  cvx.mu = 1.5;
  const ControlGrid grid{{-0.5, 0.5}};
  const ConvexBrrResult res = solve_convex_brr(cvx, tree, grid);
  for (double v : grid.points)
    CHECK(res.value >=
          weak_value_for_control(cvx, tree, constant_control(tree, v)) - 1e-10);
}

TEST_CASE("full-information problem: driftless and exact-linear cases") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  StrongBrrProblem p;
  p.state = diag_state(1.0, 1.0, {0.0, 0.0});
  p.b = [](double, const PathView&, double) { return Vec2{0.0, 0.0}; };
  p.f = [](double, const PathView&, double, const Vec2&, double) {
    return 0.1;
  };
  p.h = [](double, const PathView&) { return -100.0; };
  p.phi = [](const PathView& pv) { return pv.back()[0] + 0.5 * pv.back()[1]; };
  p.mu = 0.2;
  const ControlGrid grid{{-1.0, 1.0}};
  {
    // no drift response: value equals the uncontrolled reflected value
    const StrongBrrResult res = solve_strong_brrf(p, tree, grid);
    const double direct = weak_value_for_control(p, tree,
                                                 NodeControl{{0.0}, {0, 0, 0, 0}});
    CHECK(res.value == doctest::Approx(direct).epsilon(1e-10));
    CHECK(res.value == doctest::Approx(0.1).epsilon(1e-10));
  }
  {
    // with linear payoff and z-free generator the tilted and Hamiltonian
    // routes agree exactly, so a singleton grid pins the value
    p.b = [](double, const PathView&, double v) { return Vec2{0.2 * v, 0.0}; };
    const StrongBrrResult res = solve_strong_brrf(p, tree, ControlGrid{{1.0}});
    NodeControl one(2);
    one[0].assign(1, 1.0);
    one[1].assign(4, 1.0);
    const double weak = weak_value_for_control(p, tree, one);
    CHECK(res.value == doctest::Approx(weak).epsilon(1e-10));
  }
}

TEST_CASE("zero-sum game: separable instance with known value") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  ZeroSumProblem p;
  p.state = diag_state(1.0, 1.0, {0.0, 0.0});
  p.b = [](double, const PathView&, double, double) { return Vec2{0.0, 0.0}; };
  p.f = [](double, const PathView&, double, const Vec2&, double u, double v) {
    return 0.2 + u * u + v;
  };
  p.h = [](double, const PathView&) { return -100.0; };
  p.phi = [](const PathView& pv) { return pv.back()[0]; };
  p.mu = 0.2;
  const ControlGrid gu{{-1.0, 0.0, 1.0}}, gv{{-0.5, 0.5}};
  const ZeroSumResult res = solve_zero_sum(p, tree, gu, gv);
  CHECK(res.worst_isaacs_gap <= 1e-12);
  // E[phi] = 0, running gain (0.2 + min u^2 + max v) over horizon 1
  CHECK(res.value == doctest::Approx(0.7).epsilon(1e-10));
  const double oracle_val = game_minmax_oracle(p, tree, gu, gv, 2000000);
  CHECK(res.value == doctest::Approx(oracle_val).epsilon(1e-8));

  // unilateral deviations never help either player
  for (double u : gu.points)
    for (double vdev : gv.points) {
      NodeControl cu(2), cv(2);
      cu[0].assign(1, u);
      cu[1].assign(4, u);
      cv[0].assign(1, vdev);
      cv[1].assign(4, vdev);
      const double j_star_v =
          weak_value_for_control(p, tree, res.feedback_u, cv);
      const double j_u_star =
          weak_value_for_control(p, tree, cu, res.feedback_v);
      CHECK(j_star_v <= res.value + 1e-8);
      CHECK(j_u_star >= res.value - 1e-8);
    }
}

TEST_CASE("isaacs violation is rejected") {
  const ScenarioTree tree = ScenarioTree::build(1, 1.0);
  ZeroSumProblem p;
  p.state = diag_state(1.0, 1.0, {0.0, 0.0});
  p.b = [](double, const PathView&, double, double) { return Vec2{0.0, 0.0}; };
  // coupled payoff u*v has minmax 0.25 vs maxmin -0.25 on {-0.5, 0.5}
  p.f = [](double, const PathView&, double, const Vec2&, double u, double v) {
    return u * v;
  };
  p.h = [](double, const PathView&) { return -100.0; };
  p.phi = [](const PathView&) { return 0.0; };
  p.mu = 0.2;
  try {
    solve_zero_sum(p, tree, ControlGrid{{-0.5, 0.5}}, ControlGrid{{-0.5, 0.5}});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.tag() == "GUARD_ISAACS");
  }
}

TEST_CASE("mixed oracle grows with the control grid") {
  const ScenarioTree tree = ScenarioTree::build(2, 1.0);
  const LinearBrrProblem p = linear_instance();
  const double small = mixed_value_oracle(p, tree, ControlGrid{{0.0}});
  const double big = mixed_value_oracle(p, tree, ControlGrid{{0.0, 0.5}});
  CHECK(big >= small - 1e-12);
}
