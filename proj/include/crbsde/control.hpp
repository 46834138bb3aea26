#pragma once

#include "crbsde/control_problems.hpp"
#include "crbsde/crbsde.hpp"
#include "crbsde/stopping.hpp"

namespace crbsde {

// Solution of a reflected recursion on the partial-filtration atom tree:
// value p, first-component coefficient q, push dk, projected barrier.
struct FilteredTriple {
  std::vector<std::vector<double>> p;        // levels 0..N
  std::vector<std::vector<double>> q;        // levels 0..N-1
  std::vector<std::vector<double>> dk;       // levels 0..N-1
  std::vector<std::vector<double>> barrier;  // levels 0..N
};

struct LinearBrrResult {
  double value = 0.0;
  FilteredTriple sol;
  // argmax control per (level, atom), evaluated along the solution
  AtomControl feedback;
  GStoppingTime tau_star;
  // the feedback rule itself: (level, z1, xhat) -> control
  std::function<double(int level, double z1, const Vec2& xhat)> feedback_rule;
};

// Value of the partially observed control problem: reflected recursion on
// the atom tree with the drift absorbed into the generator,
//   driver(y, q) = alpha y + beta q + max_v { q b(t, xhat, v) + g(t, xhat, v) }.
LinearBrrResult solve_linear_brr(const LinearBrrProblem& p,
                                 const ScenarioTree& tree,
                                 const ControlGrid& grid);

// Value of a fixed adapted control: tilted obstacle solve, Y_0.
double weak_value_for_control(const LinearBrrProblem& p, const ScenarioTree& tree,
                              const AtomControl& control);
double weak_value_for_control(const ConvexBrrProblem& p, const ScenarioTree& tree,
                              const AtomControl& control);
double weak_value_for_control(const StrongBrrProblem& p, const ScenarioTree& tree,
                              const NodeControl& control);
double weak_value_for_control(const ZeroSumProblem& p, const ScenarioTree& tree,
                              const NodeControl& u, const NodeControl& v);

// Double sup over enumerated stopping rules and per-atom grid controls of
// stopped tilted values; brute-force reference for solve_linear_brr.
double mixed_value_oracle(const LinearBrrProblem& p, const ScenarioTree& tree,
                          const ControlGrid& grid, std::size_t guard = 1000000);

// Convex conjugate family of a max-affine generator over a control grid:
// one entry per affine piece, with the control resolved by a pointwise sup.
struct DualFamily {
  struct Entry {
    double alpha = 0.0;
    double beta = 0.0;
    std::function<double(double t, const Vec2& xhat)> cbar;
  };
  std::vector<Entry> entries;
  // max_i { alpha_i y + beta_i z1 + cbar_i(t, x) }, the biconjugate
  double reconstruct(double t, const Vec2& xhat, double y, double z1) const;
};
DualFamily fenchel_dual(const std::vector<ConvexBrrProblem::Piece>& pieces,
                        const ControlGrid& grid);

struct ConvexBrrResult {
  double value = 0.0;
  FilteredTriple sol;
  DualFamily dual;  // of the generator alone (drift not folded in)
};

// Value with a max-affine generator: reflected atom-tree recursion whose
// driver is the upper envelope over pieces and grid controls, with the
// drift folded into each piece's slope on q.
ConvexBrrResult solve_convex_brr(const ConvexBrrProblem& p,
                                 const ScenarioTree& tree,
                                 const ControlGrid& grid);

struct StrongBrrResult {
  double value = 0.0;
  SolutionTriple sol;
  NodeControl feedback;  // argmax per (level, node)
};

// Full-information value: pointwise-reflected solve under the base measure
// with the Hamiltonian driver sup_v { f + z . sigma^{-1} b }.
StrongBrrResult solve_strong_brrf(const StrongBrrProblem& p,
                                  const ScenarioTree& tree,
                                  const ControlGrid& grid);

struct ZeroSumResult {
  double value = 0.0;
  SolutionTriple sol;
  NodeControl feedback_u, feedback_v;
  double worst_isaacs_gap = 0.0;
};

// Game value under the min-max = max-min condition on the grid; throws
// Error(Guard) when the two envelopes differ by more than isaacs_tol at any
// evaluation point.
ZeroSumResult solve_zero_sum(const ZeroSumProblem& p, const ScenarioTree& tree,
                             const ControlGrid& grid_u, const ControlGrid& grid_v,
                             double isaacs_tol = 1e-9);

// Exhaustive min over u-processes of max over v-processes of fixed-control
// values; reference for solve_zero_sum on tiny trees.
double game_minmax_oracle(const ZeroSumProblem& p, const ScenarioTree& tree,
                          const ControlGrid& grid_u, const ControlGrid& grid_v,
                          std::size_t guard = 1000000);

}  // namespace crbsde
