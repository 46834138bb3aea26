#pragma once

#include "crbsde/model.hpp"

namespace crbsde {

enum class Scheme { Explicit, ImplicitY };

struct Diagnostics {
  double worst_constraint_gap = 0.0;  // min over (level, atom) of projected gap
  double flatness_defect = 0.0;       // sum of gap * dK over (level, atom)
  double max_step_residual = 0.0;     // one-step identity defect
  int picard_iterations = 0;
  double last_picard_ratio = 0.0;
};

// Backward solution: Y per node, martingale coefficients per node (rotated
// frame, residual channel kept separate), and the nondecreasing compensator
// K per atom of the constraint filtration. K_0 = 0 and increments are
// attributed to the left endpoint: K_{i+1} = K_i + dK_i with dK_i the push
// applied at level i.
struct SolutionTriple {
  AdaptedProcess y;           // Full, levels 0..N
  AdaptedProcess z1, z2, zr;  // Full, levels 0..N-1
  AdaptedProcess k;           // constraint filtration, levels 0..N
  std::vector<std::vector<double>> dk;  // per (level 0..N-1, atom)
  Diagnostics diag;
};

// One backward sweep with one-sided reflection per atom:
//   dK_i = max(0, -E[Ytilde_i - S_i | atom]),   Y_i = Ytilde_i + dK_i.
// ImplicitY solves y = mean + f(y, z) dt to 1e-13 (at most 200 iterations);
// Explicit evaluates f at the conditional mean. A non-base measure solves
// the equation under tilted branch probabilities with centered increments.
SolutionTriple solve_backward(const ReflectedProblem& problem,
                              const ScenarioTree& tree,
                              Scheme scheme = Scheme::ImplicitY,
                              const Measure& mu = Measure::base());

// Iterated frozen-coefficient sweeps: each sweep solves the problem with the
// generator evaluated along the previous iterate. Stops when the weighted
// successive-difference norm falls below tol.
SolutionTriple solve_picard(const ReflectedProblem& problem,
                            const ScenarioTree& tree, double tol = 1e-12,
                            int max_iters = 200,
                            const Measure& mu = Measure::base());

// Max discrepancy, over levels i and leaves, between K_N - K_i and the
// running negative-part envelope of the projected terminal/generator/
// martingale/barrier aggregate. Exact (up to rounding) when the generator
// does not depend on y.
double k_representation_check(const SolutionTriple& sol,
                              const ReflectedProblem& problem,
                              const ScenarioTree& tree,
                              const Measure& mu = Measure::base());

// Recomputes the diagnostics of a solution from scratch.
Diagnostics residuals(const SolutionTriple& sol, const ReflectedProblem& problem,
                      const ScenarioTree& tree,
                      const Measure& mu = Measure::base());

}  // namespace crbsde
