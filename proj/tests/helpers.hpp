#pragma once

// Shared generators for the randomized suites. Everything is seeded
// explicitly so failures replay exactly.

#include <cmath>
#include <random>
#include <vector>

#include "crbsde/crbsde.hpp"
#include "crbsde/oracle.hpp"

namespace testgen {

using namespace crbsde;

using Rng = std::mt19937_64;

inline double uni(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random terminal payoff per leaf, stored so lambdas stay valid.
struct TableData {
  std::vector<double> terminal;                 // per leaf
  std::vector<std::vector<double>> barrier;     // per (level, node)
  std::vector<double> a, b, c;                  // per level (atom-constant)
};

// Adds per-atom constants to the terminal until E[xi - S_N | atom] >= floor
// on every atom, keeping the payoff F-measurable.
inline void repair_terminal(TableData& d, const ScenarioTree& tree,
                            Filtration g, double floor_margin = 0.05) {
  const int n = tree.num_steps();
  std::vector<double> gap(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < gap.size(); ++leaf)
    gap[leaf] = d.terminal[leaf] - d.barrier[n][leaf];
  const LevelSlice m = cond_expect(tree, gap, n, g, n);
  for (std::size_t leaf = 0; leaf < gap.size(); ++leaf) {
    const double margin = m.v[tree.atom_of(n, leaf, g)];
    if (margin < floor_margin) d.terminal[leaf] += floor_margin - margin;
  }
}

struct RandomInstance {
  std::shared_ptr<TableData> data;
  ReflectedProblem problem;
};

enum class DriverChoice { Zero, Constant, Affine, MaxAffine, General };

// Random validated instance. Coefficients are level-constant, so they are
// measurable with respect to every filtration.
inline RandomInstance random_instance(Rng& rng, const ScenarioTree& tree,
                                      Filtration g, DriverChoice dc,
                                      bool active_barrier = true) {
  const int n = tree.num_steps();
  auto d = std::make_shared<TableData>();
  d->terminal.resize(tree.node_count(n));
  for (double& v : d->terminal) v = uni(rng, -1.0, 1.0);
  d->barrier.resize(n + 1);
  for (int l = 0; l <= n; ++l) {
    d->barrier[l].resize(tree.node_count(l));
    for (double& v : d->barrier[l])
      v = active_barrier ? uni(rng, -0.5, 0.5) : -100.0;
  }
  d->a.resize(n);
  d->b.resize(n);
  d->c.resize(n);
  for (int l = 0; l < n; ++l) {
    d->a[l] = uni(rng, -0.4, 0.4);
    d->b[l] = uni(rng, -0.4, 0.4);
    d->c[l] = uni(rng, -0.5, 0.5);
  }
  repair_terminal(*d, tree, g);

  RandomInstance inst;
  inst.data = d;
  inst.problem.filtration = g;
  inst.problem.terminal = [d](const ScenarioTree&, std::size_t leaf) {
    return d->terminal[leaf];
  };
  inst.problem.barrier = [d](const ScenarioTree&, int l, std::size_t node) {
    return d->barrier[l][node];
  };
  switch (dc) {
    case DriverChoice::Zero:
      inst.problem.driver = make_zero_driver();
      break;
    case DriverChoice::Constant:
      inst.problem.driver = make_constant_driver(
          [d](const ScenarioTree&, int l, std::size_t) { return d->c[l]; });
      break;
    case DriverChoice::Affine: {
      inst.problem.driver = make_affine_driver(
          [d](const ScenarioTree&, int l, std::size_t) { return d->a[l]; },
          [d](const ScenarioTree&, int l, std::size_t) { return d->b[l]; },
          [d](const ScenarioTree&, int l, std::size_t) { return d->c[l]; });
      inst.problem.driver.mu = 0.8;
      break;
    }
    case DriverChoice::MaxAffine: {
      std::vector<Driver::Piece> pieces(2);
      pieces[0].alpha = d->a[0];
      pieces[0].beta1 = d->b[0];
      pieces[0].c = [d](const ScenarioTree&, int l, std::size_t,
                        std::optional<double>) { return d->c[l]; };
      pieces[1].alpha = -d->a[0];
      pieces[1].beta1 = 0.3;
      pieces[1].c = [d](const ScenarioTree&, int l, std::size_t,
                        std::optional<double>) { return -d->c[l]; };
      inst.problem.driver = make_max_affine_driver(std::move(pieces));
      break;
    }
    case DriverChoice::General: {
      const double a0 = d->a[0], b0 = d->b[0];
      inst.problem.driver.kind = DriverKind::General;
      inst.problem.driver.mu = std::fabs(a0) + std::fabs(b0) + 0.3;
      inst.problem.driver.general =
          [a0, b0](const ScenarioTree&, int, std::size_t, double y, double z1,
                   double z2, std::optional<double>) {
            return a0 * std::sin(y) + b0 * z1 + 0.3 * std::cos(z2);
          };
      break;
    }
  }
  return inst;
}

}  // namespace testgen
