#include "crbsde/stopping.hpp"

#include <climits>
#include <cmath>

namespace crbsde {

namespace {

int atom_children(Filtration g) {
  switch (g) {
    case Filtration::Full: return 4;
    case Filtration::Partial: return 2;
    case Filtration::Trivial: return 1;
  }
  return 1;
}

std::size_t atom_child(Filtration g, std::size_t atom, int i) {
  switch (g) {
    case Filtration::Full: return 4 * atom + i;
    case Filtration::Partial: return 2 * atom + i;
    case Filtration::Trivial: return 0;
  }
  return 0;
}

std::size_t sat_mul(std::size_t a, std::size_t b, std::size_t cap) {
  if (a == 0 || b == 0) return 0;
  if (a > cap / b) return cap + 1;
  return a * b;
}

std::size_t sat_pow(std::size_t a, std::size_t e, std::size_t cap) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    r = sat_mul(r, a, cap);
    if (r > cap) return r;
  }
  return r;
}

// per-level count of subtree stopping rules: c(N) = 1,
// c(l) = 1 + c(l+1)^children
std::vector<std::size_t> level_counts(const ScenarioTree& tree, Filtration g,
                                      std::size_t cap) {
  const int n = tree.num_steps();
  std::vector<std::size_t> c(n + 1);
  c[n] = 1;
  for (int l = n - 1; l >= 0; --l) {
    const std::size_t p = sat_pow(c[l + 1], atom_children(g), cap);
    c[l] = p > cap ? p : p + 1;
  }
  return c;
}

struct Lab {
  bool stop = true;
  std::vector<int> kids;  // indices into the next level's labeling list
};

}  // namespace

int GStoppingTime::stop_level(const ScenarioTree& tree, std::size_t leaf) const {
  const int n = tree.num_steps();
  for (int l = from; l <= n; ++l) {
    const std::size_t atom = tree.atom_of(l, tree.ancestor(n, leaf, l), g);
    if (stop[l][atom]) return l;
  }
  return n;
}

std::size_t count_g_stopping_times(const ScenarioTree& tree, Filtration g,
                                   int from, std::size_t guard) {
  const auto c = level_counts(tree, g, guard);
  return sat_pow(c[from], tree.atom_count(from, g), guard);
}

std::vector<GStoppingTime> enumerate_g_stopping_times(const ScenarioTree& tree,
                                                      Filtration g, int from,
                                                      std::size_t guard) {
  const int n = tree.num_steps();
  if (from < 0 || from > n)
    throw Error(ErrorCode::Validation, "VALIDATION_LEVELS",
                "enumeration start level out of range");
  const std::size_t total = count_g_stopping_times(tree, g, from, guard);
  if (total > guard)
    throw Error(ErrorCode::Guard, "GUARD_ENUMERATION",
                "stopping-rule count exceeds the enumeration guard of " +
                    std::to_string(guard));

  // labelings of one atom subtree per level, shared across atoms
  std::vector<std::vector<Lab>> labs(n + 1);
  labs[n] = {Lab{}};
  const int kids = atom_children(g);
  for (int l = n - 1; l >= from; --l) {
    labs[l].push_back(Lab{});  // stop here
    std::vector<int> idx(kids, 0);
    const int m = static_cast<int>(labs[l + 1].size());
    while (true) {
      Lab cont;
      cont.stop = false;
      cont.kids = idx;
      labs[l].push_back(std::move(cont));
      int p = kids - 1;
      while (p >= 0 && ++idx[p] == m) idx[p--] = 0;
      if (p < 0) break;
    }
  }

  std::function<void(GStoppingTime&, int, std::size_t, int)> fill =
      [&](GStoppingTime& st, int level, std::size_t atom, int lab) {
        const Lab& L = labs[level][lab];
        st.stop[level][atom] = L.stop ? 1 : 0;
        if (!L.stop)
          for (int i = 0; i < kids; ++i)
            fill(st, level + 1, atom_child(g, atom, i), L.kids[i]);
      };

  const std::size_t roots = tree.atom_count(from, g);
  std::vector<int> pick(roots, 0);
  const int m0 = static_cast<int>(labs[from].size());
  std::vector<GStoppingTime> out;
  out.reserve(total);
  while (true) {
    GStoppingTime st;
    st.g = g;
    st.from = from;
    st.stop.resize(n + 1);
    for (int l = 0; l <= n; ++l) st.stop[l].assign(tree.atom_count(l, g), 0);
    for (std::size_t a = 0; a < roots; ++a) fill(st, from, a, pick[a]);
    out.push_back(std::move(st));
    std::size_t p = roots;
    while (p > 0 && ++pick[p - 1] == m0) pick[--p] = 0;
    if (p == 0) break;
  }
  return out;
}

LevelSlice stopped_value(const ReflectedProblem& problem,
                         const GStoppingTime& tau, int t,
                         const ScenarioTree& tree, const Measure& mu) {
  const int n = tree.num_steps();
  const double dt = tree.dt();
  if (problem.driver.mu * dt >= 1.0)
    throw Error(ErrorCode::Guard, "GUARD_IMPLICIT",
                "mu * dt >= 1 in stopped evaluation");

  // first stopping level >= t per node, INT_MAX while not stopped
  std::vector<std::vector<int>> fs(n + 1);
  for (int l = t; l <= n; ++l) {
    fs[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < fs[l].size(); ++node) {
      const int prev = l == t ? INT_MAX : fs[l - 1][tree.parent(node)];
      if (prev != INT_MAX)
        fs[l][node] = prev;
      else
        fs[l][node] = tau.stop[l][tree.atom_of(l, node, tau.g)] ? l : INT_MAX;
    }
  }

  std::vector<std::vector<double>> v(n + 1);
  v[n].resize(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < v[n].size(); ++leaf) {
    const int s = fs[n][leaf];
    v[n][leaf] = s >= n ? problem.terminal(tree, leaf)
                        : problem.barrier(tree, s, tree.ancestor(n, leaf, s));
  }
  for (int l = n - 1; l >= t; --l) {
    v[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < v[l].size(); ++node) {
      if (fs[l][node] <= l) {
        v[l][node] = problem.barrier(tree, fs[l][node],
                                     tree.ancestor(l, node, fs[l][node]));
        continue;
      }
      double ch[4];
      for (int c = 0; c < 4; ++c) ch[c] = v[l + 1][4 * node + c];
      const StepCoeffs sc =
          martingale_coefficients(tree, ch, mu.m1(l, node), mu.m2(l, node));
      double y = sc.mean;
      for (int it = 0;; ++it) {
        const double ny =
            sc.mean + problem.driver.eval(tree, l, node, y, sc.z1, sc.z2) * dt;
        if (std::fabs(ny - y) <= 1e-13 * (1.0 + std::fabs(ny))) {
          y = ny;
          break;
        }
        if (it >= 200)
          throw Error(ErrorCode::Numerical, "NUMERICAL_IMPLICIT",
                      "implicit step failed in stopped evaluation");
        y = ny;
      }
      v[l][node] = y;
    }
  }
  return cond_expect(tree, v[t], t, problem.filtration, t, mu);
}

std::vector<LevelSlice> snell_value(const ReflectedProblem& problem,
                                    const ScenarioTree& tree, bool allow_general,
                                    const Measure& mu) {
  if (problem.driver.kind == DriverKind::General && !allow_general)
    throw Error(ErrorCode::Validation, "VALIDATION_SNELL",
                "optimal-stopping identity is only proved for generators that "
                "are constant or affine in (y, z); pass allow_general to "
                "evaluate it anyway");
  // the adjoint used by the identity must stay measurable on the chosen
  // filtration; without any observed component that forces a z-free generator
  if (problem.driver.kind == DriverKind::Affine &&
      problem.filtration == Filtration::Trivial && !allow_general &&
      problem.driver.beta1) {
    for (int l = 0; l < tree.num_steps(); ++l)
      for (std::size_t node = 0; node < tree.node_count(l); ++node)
        if (problem.driver.beta1(tree, l, node) != 0.0)
          throw Error(ErrorCode::Validation, "VALIDATION_SNELL",
                      "under the trivial filtration the stopping identity "
                      "needs a z-free generator; pass allow_general to "
                      "evaluate it anyway");
  }
  const SolutionTriple sol = solve_backward(problem, tree, Scheme::ImplicitY, mu);
  std::vector<LevelSlice> out;
  for (int l = 0; l <= tree.num_steps(); ++l)
    out.push_back(cond_expect(tree, sol.y, l, problem.filtration, l, mu));
  return out;
}

GStoppingTime optimal_stopping_time(const SolutionTriple& sol,
                                    const ReflectedProblem& problem,
                                    const ScenarioTree& tree, double tol,
                                    const Measure& mu) {
  const int n = tree.num_steps();
  GStoppingTime st;
  st.g = problem.filtration;
  st.from = 0;
  st.stop.resize(n + 1);
  std::vector<std::vector<char>> done(n + 1);
  for (int l = 0; l <= n; ++l) {
    st.stop[l].assign(tree.atom_count(l, st.g), 0);
    done[l].assign(tree.atom_count(l, st.g), 0);
    std::vector<double> gap(tree.node_count(l));
    for (std::size_t node = 0; node < gap.size(); ++node)
      gap[node] = sol.y.at(l, node) - problem.barrier(tree, l, node);
    const LevelSlice slice = cond_expect(tree, gap, l, st.g, l, mu);
    for (std::size_t a = 0; a < slice.v.size(); ++a) {
      const bool ancestor_done =
          l > 0 && done[l - 1][a / static_cast<std::size_t>(atom_children(st.g))];
      if (ancestor_done) {
        done[l][a] = 1;
        continue;
      }
      if (slice.v[a] <= tol || l == n) {
        st.stop[l][a] = 1;
        done[l][a] = 1;
      }
    }
  }
  return st;
}

AdaptedProcess adjoint_gamma(const ScenarioTree& tree, Filtration g,
                             const AdaptedProcess& a, const AdaptedProcess& b,
                             int from) {
  const int n = tree.num_steps();
  if (a.measurability() != g || b.measurability() != g)
    throw Error(ErrorCode::Validation, "VALIDATION_GAMMA",
                "adjoint coefficients must live on the chosen filtration");
  AdaptedProcess gamma(tree, g, n);
  for (std::size_t at = 0; at < tree.atom_count(from, g); ++at)
    gamma.at(from, at) = 1.0;
  for (int l = from; l < n; ++l)
    for (std::size_t at = 0; at < tree.atom_count(l, g); ++at) {
      const double av = a.at(l, at), bv = b.at(l, at);
      if (g == Filtration::Trivial && bv != 0.0)
        throw Error(ErrorCode::Validation, "VALIDATION_GAMMA",
                    "volatility coefficient must vanish under the trivial "
                    "filtration");
      const int kids = atom_children(g);
      for (int i = 0; i < kids; ++i) {
        // child index i carries eps1 = +1 for the low bit pattern
        int e1 = 1;
        if (g == Filtration::Partial) e1 = i == 0 ? 1 : -1;
        if (g == Filtration::Full) e1 = ScenarioTree::eps1(i);
        const double factor = 1.0 + av * tree.dt() + bv * e1 * tree.sqrt_dt();
        if (factor <= 0.0)
          throw Error(ErrorCode::Guard, "GUARD_GAMMA",
                      "adjoint factor lost positivity; refine the time grid");
        gamma.at(l + 1, atom_child(g, at, i)) = gamma.at(l, at) * factor;
      }
    }
  return gamma;
}

}  // namespace crbsde
