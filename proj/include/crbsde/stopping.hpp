#pragma once

#include "crbsde/crbsde.hpp"

namespace crbsde {

// Stopping rule adapted to the atoms of `g`: stop[level][atom] == 1 means
// the rule stops there, provided no ancestor atom at level >= `from`
// already stopped. Canonical form: flags under a stopped ancestor are 0.
struct GStoppingTime {
  Filtration g = Filtration::Partial;
  int from = 0;
  std::vector<std::vector<std::uint8_t>> stop;  // levels 0..N

  // First stopping level >= from on the atom path of a leaf; N if none.
  int stop_level(const ScenarioTree& tree, std::size_t leaf) const;
};

// Number of stopping rules from `from`, saturating at `guard`+1.
std::size_t count_g_stopping_times(const ScenarioTree& tree, Filtration g,
                                   int from, std::size_t guard = 1000000);

// All stopping rules from `from`. Throws Error(Guard) when the count
// exceeds `guard`.
std::vector<GStoppingTime> enumerate_g_stopping_times(
    const ScenarioTree& tree, Filtration g, int from,
    std::size_t guard = 1000000);

// Value at `t` (projected on atoms of problem.filtration) of the plain
// backward equation stopped at tau: payoff is the barrier where tau < N and
// the terminal payoff where tau == N. No reflection.
LevelSlice stopped_value(const ReflectedProblem& problem,
                         const GStoppingTime& tau, int t,
                         const ScenarioTree& tree,
                         const Measure& mu = Measure::base());

// Projected value E[Y_t | atom] for every level, from one reflected solve.
// For general nonlinear generators the optimal-stopping identity is only
// conjectural; pass allow_general to proceed anyway.
std::vector<LevelSlice> snell_value(const ReflectedProblem& problem,
                                    const ScenarioTree& tree,
                                    bool allow_general = false,
                                    const Measure& mu = Measure::base());

// First time the projected gap E[Y - S | atom] falls to <= tol.
GStoppingTime optimal_stopping_time(const SolutionTriple& sol,
                                    const ReflectedProblem& problem,
                                    const ScenarioTree& tree, double tol = 1e-10,
                                    const Measure& mu = Measure::base());

// Multiplicative adjoint started at 1 at level `from`:
//   Gamma_{i+1} = Gamma_i (1 + a_i dt + b_i e1 sqrt(dt))
// on the atom tree of `g`. Throws Error(Guard) if positivity fails.
AdaptedProcess adjoint_gamma(const ScenarioTree& tree, Filtration g,
                             const AdaptedProcess& a, const AdaptedProcess& b,
                             int from);

}  // namespace crbsde
