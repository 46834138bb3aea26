#include "crbsde/oracle.hpp"

#include <climits>
#include <cmath>
#include <cstdint>
#include <limits>

namespace crbsde::oracle {

namespace {

// Solves y = mean + f(y) dt by bisection on r(y) = y - mean - f(y) dt.
// r is strictly increasing when mu dt < 1.
double bisect_step(const std::function<double(double)>& f, double mean,
                   double mu, double dt) {
  if (mu * dt >= 1.0)
    throw Error(ErrorCode::Guard, "GUARD_IMPLICIT",
                "mu * dt >= 1 in the reference solver");
  const double f0 = f(mean);
  double r = (std::fabs(f0) * dt + 1e-9) / (1.0 - mu * dt) + 1e-9;
  double lo = mean - r, hi = mean + r;
  auto resid = [&](double y) { return y - mean - f(y) * dt; };
  // widen if the bracket estimate was off
  for (int i = 0; i < 64 && resid(lo) > 0.0; ++i) lo -= r *= 2.0;
  for (int i = 0; i < 64 && resid(hi) < 0.0; ++i) hi += r *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (resid(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * (1.0 + std::fabs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

struct Step {
  double mean, z1, z2;
};

// Direct probability-weighted sums, written independently of the lattice
// helper used by the main solver.
Step step_sums(const ScenarioTree& tree, const double ch[4], double m1,
               double m2) {
  static const int e1[4] = {1, 1, -1, -1};
  static const int e2[4] = {1, -1, 1, -1};
  double mean = 0.0, s1 = 0.0, s2 = 0.0;
  for (int c = 0; c < 4; ++c) {
    const double p = (1.0 + e1[c] * m1) * (1.0 + e2[c] * m2) / 4.0;
    mean += p * ch[c];
    s1 += p * ch[c] * (e1[c] - m1);
    s2 += p * ch[c] * (e2[c] - m2);
  }
  return {mean, s1 / (tree.sqrt_dt() * (1.0 - m1 * m1)),
          s2 / (tree.sqrt_dt() * (1.0 - m2 * m2))};
}

}  // namespace

std::vector<std::vector<double>> classical_pointwise_values(
    const ReflectedProblem& problem, const ScenarioTree& tree,
    const Measure& mu) {
  const int n = tree.num_steps();
  std::vector<std::vector<double>> y(n + 1);
  y[n].resize(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < y[n].size(); ++leaf)
    y[n][leaf] = problem.terminal(tree, leaf);
  for (int l = n - 1; l >= 0; --l) {
    y[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < y[l].size(); ++node) {
      const double ch[4] = {y[l + 1][4 * node], y[l + 1][4 * node + 1],
                            y[l + 1][4 * node + 2], y[l + 1][4 * node + 3]};
      const Step st = step_sums(tree, ch, mu.m1(l, node), mu.m2(l, node));
      const double ytil = bisect_step(
          [&](double yy) {
            return problem.driver.eval(tree, l, node, yy, st.z1, st.z2);
          },
          st.mean, problem.driver.mu, tree.dt());
      y[l][node] = std::max(ytil, problem.barrier(tree, l, node));
    }
  }
  return y;
}

OracleSolution direct_fixed_point(const ReflectedProblem& problem,
                                  const ScenarioTree& tree, const Measure& mu) {
  const int n = tree.num_steps();
  OracleSolution sol;
  sol.y.resize(n + 1);
  sol.dk.resize(n);
  sol.y[n].resize(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < sol.y[n].size(); ++leaf)
    sol.y[n][leaf] = problem.terminal(tree, leaf);
  for (int l = n - 1; l >= 0; --l) {
    sol.y[l].resize(tree.node_count(l));
    std::vector<double> gap(tree.node_count(l));
    for (std::size_t node = 0; node < sol.y[l].size(); ++node) {
      const double ch[4] = {sol.y[l + 1][4 * node], sol.y[l + 1][4 * node + 1],
                            sol.y[l + 1][4 * node + 2],
                            sol.y[l + 1][4 * node + 3]};
      const Step st = step_sums(tree, ch, mu.m1(l, node), mu.m2(l, node));
      sol.y[l][node] = bisect_step(
          [&](double yy) {
            return problem.driver.eval(tree, l, node, yy, st.z1, st.z2);
          },
          st.mean, problem.driver.mu, tree.dt());
      gap[node] = sol.y[l][node] - problem.barrier(tree, l, node);
    }
    const LevelSlice slice = cond_expect(tree, gap, l, problem.filtration, l, mu);
    sol.dk[l].resize(slice.v.size());
    for (std::size_t a = 0; a < slice.v.size(); ++a)
      sol.dk[l][a] = slice.v[a] < 0.0 ? -slice.v[a] : 0.0;
    for (std::size_t node = 0; node < sol.y[l].size(); ++node)
      sol.y[l][node] += sol.dk[l][tree.atom_of(l, node, problem.filtration)];
  }
  return sol;
}

namespace {

int children_per_atom(Filtration g) {
  return g == Filtration::Full ? 4 : g == Filtration::Partial ? 2 : 1;
}

}  // namespace

std::vector<std::vector<double>> brute_force_stopping(
    const ReflectedProblem& problem, const ScenarioTree& tree,
    std::size_t guard, const Measure& mu) {
  const int n = tree.num_steps();
  const Filtration g = problem.filtration;
  const int kids = children_per_atom(g);

  // count rules per level first: c(N) = 1, c(l) = 1 + c(l+1)^kids
  std::vector<double> cnt(n + 1);
  cnt[n] = 1;
  for (int l = n - 1; l >= 0; --l) cnt[l] = 1 + std::pow(cnt[l + 1], kids);

  std::vector<std::vector<double>> best(n + 1);

  // directly evaluated stopped value, given per-node first-stop levels
  std::vector<std::vector<int>> fs(n + 1);
  std::vector<std::vector<std::uint8_t>> stop(n + 1);
  for (int l = 0; l <= n; ++l) stop[l].assign(tree.atom_count(l, g), 0);

  auto eval_from = [&](int t) -> std::vector<double> {
    for (int l = t; l <= n; ++l) {
      fs[l].assign(tree.node_count(l), INT32_MAX);
      for (std::size_t node = 0; node < fs[l].size(); ++node) {
        const int prev = l == t ? INT32_MAX : fs[l - 1][node >> 2];
        if (prev != INT32_MAX)
          fs[l][node] = prev;
        else if (stop[l][tree.atom_of(l, node, g)])
          fs[l][node] = l;
      }
    }
    std::vector<std::vector<double>> v(n + 1);
    v[n].resize(tree.node_count(n));
    for (std::size_t leaf = 0; leaf < v[n].size(); ++leaf) {
      const int s = std::min(fs[n][leaf], n);
      v[n][leaf] = s >= n ? problem.terminal(tree, leaf)
                          : problem.barrier(tree, s, leaf >> (2 * (n - s)));
    }
    for (int l = n - 1; l >= t; --l) {
      v[l].resize(tree.node_count(l));
      for (std::size_t node = 0; node < v[l].size(); ++node) {
        if (fs[l][node] <= l) {
          const int s = fs[l][node];
          v[l][node] = problem.barrier(tree, s, node >> (2 * (l - s)));
          continue;
        }
        const double ch[4] = {v[l + 1][4 * node], v[l + 1][4 * node + 1],
                              v[l + 1][4 * node + 2], v[l + 1][4 * node + 3]};
        const Step st = step_sums(tree, ch, mu.m1(l, node), mu.m2(l, node));
        v[l][node] = bisect_step(
            [&](double yy) {
              return problem.driver.eval(tree, l, node, yy, st.z1, st.z2);
            },
            st.mean, problem.driver.mu, tree.dt());
      }
    }
    return cond_expect(tree, v[t], t, g, t, mu).v;
  };

  for (int t = 0; t <= n; ++t) {
    const std::size_t atoms = tree.atom_count(t, g);
    const double total = std::pow(cnt[t], static_cast<double>(atoms));
    if (!(total <= static_cast<double>(guard)))
      throw Error(ErrorCode::Guard, "GUARD_ENUMERATION",
                  "stopping-rule enumeration at level " + std::to_string(t) +
                      " exceeds the guard");
    best[t].assign(atoms, -std::numeric_limits<double>::infinity());

    // depth-first over the atom forest at level t; at each leaf of the
    // decision recursion, evaluate and fold the per-atom values in
    std::function<void(int, std::size_t, const std::function<void()>&)> assign =
        [&](int level, std::size_t atom, const std::function<void()>& next) {
          // option 1: stop here
          stop[level][atom] = 1;
          next();
          stop[level][atom] = 0;
          if (level == n) return;
          // option 2: continue; assign all child atoms
          std::function<void(int, const std::function<void()>&)> kids_rec =
              [&](int i, const std::function<void()>& after) {
                if (i == kids) {
                  after();
                  return;
                }
                const std::size_t ca = g == Filtration::Trivial
                                           ? 0
                                           : atom * kids + i;
                assign(level + 1, ca,
                       [&kids_rec, i, &after] { kids_rec(i + 1, after); });
              };
          kids_rec(0, next);
        };

    std::function<void(std::size_t, const std::function<void()>&)> forest =
        [&](std::size_t a, const std::function<void()>& after) {
          if (a == atoms) {
            after();
            return;
          }
          assign(t, a, [&forest, a, &after] { forest(a + 1, after); });
        };

    forest(0, [&] {
      const std::vector<double> vals = eval_from(t);
      for (std::size_t a = 0; a < atoms; ++a)
        best[t][a] = std::max(best[t][a], vals[a]);
    });
  }
  return best;
}

ControlSearchResult brute_force_controls(const LinearBrrProblem& p,
                                         const ScenarioTree& tree,
                                         const ControlGrid& grid,
                                         std::size_t guard) {
  validate_grid(grid);
  std::size_t slots = 0;
  for (int l = 0; l < tree.num_steps(); ++l)
    slots += tree.atom_count(l, Filtration::Partial);
  const double total =
      std::pow(static_cast<double>(grid.points.size()), double(slots));
  if (!(total <= static_cast<double>(guard)))
    throw Error(ErrorCode::Guard, "GUARD_ENUMERATION",
                "control enumeration exceeds the guard");

  std::vector<std::size_t> idx(slots, 0);
  AtomControl ctrl(tree.num_steps());
  ControlSearchResult res;
  res.value = -std::numeric_limits<double>::infinity();
  while (true) {
    std::size_t k = 0;
    for (int l = 0; l < tree.num_steps(); ++l) {
      ctrl[l].resize(tree.atom_count(l, Filtration::Partial));
      for (std::size_t a = 0; a < ctrl[l].size(); ++a)
        ctrl[l][a] = grid.points[idx[k++]];
    }
    const WeakInstance w = make_weak_instance(p, tree, ctrl);
    const OracleSolution sol = direct_fixed_point(w.problem, tree, w.measure);
    if (sol.y[0][0] > res.value) {
      res.value = sol.y[0][0];
      res.best_control = ctrl;
    }
    std::size_t q = slots;
    while (q > 0 && ++idx[q - 1] == grid.points.size()) idx[--q] = 0;
    if (q == 0) break;
  }
  return res;
}

}  // namespace crbsde::oracle
