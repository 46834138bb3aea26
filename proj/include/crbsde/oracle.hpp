#pragma once

#include "crbsde/control_problems.hpp"

namespace crbsde::oracle {

// Independently coded reference solvers. Everything here is written against
// the lattice and model layers only, with its own stepping logic (bisection
// instead of fixed-point iteration, direct probability sums), so agreement
// with the main solvers is meaningful evidence.

struct OracleSolution {
  std::vector<std::vector<double>> y;   // per (level, node)
  std::vector<std::vector<double>> dk;  // per (level, atom)
};

// Classical pointwise-reflected scheme (node-by-node floor at the barrier).
std::vector<std::vector<double>> classical_pointwise_values(
    const ReflectedProblem& problem, const ScenarioTree& tree,
    const Measure& mu = Measure::base());

// Conditional-reflection scheme with each implicit step solved by bisection.
OracleSolution direct_fixed_point(const ReflectedProblem& problem,
                                  const ScenarioTree& tree,
                                  const Measure& mu = Measure::base());

// Per-(level, atom) sup over exhaustively enumerated stopping rules of
// directly evaluated stopped values.
std::vector<std::vector<double>> brute_force_stopping(
    const ReflectedProblem& problem, const ScenarioTree& tree,
    std::size_t guard = 1000000, const Measure& mu = Measure::base());

struct ControlSearchResult {
  double value = 0.0;
  AtomControl best_control;
};

// Exhaustive max over per-atom grid controls of fixed-control tilted values.
ControlSearchResult brute_force_controls(const LinearBrrProblem& p,
                                         const ScenarioTree& tree,
                                         const ControlGrid& grid,
                                         std::size_t guard = 1000000);

}  // namespace crbsde::oracle
