#include "crbsde/crbsde.hpp"

#include <cmath>
#include <memory>

namespace crbsde {

namespace {

std::size_t atom_parent(Filtration g, std::size_t atom) {
  switch (g) {
    case Filtration::Full: return atom >> 2;
    case Filtration::Partial: return atom >> 1;
    case Filtration::Trivial: return 0;
  }
  return 0;
}

double implicit_step(const ReflectedProblem& problem, const ScenarioTree& tree,
                     int level, std::size_t node, const StepCoeffs& sc,
                     Scheme scheme) {
  const double dt = tree.dt();
  if (scheme == Scheme::Explicit)
    return sc.mean +
           problem.driver.eval(tree, level, node, sc.mean, sc.z1, sc.z2) * dt;
  double y = sc.mean;
  for (int it = 0; it < 200; ++it) {
    const double ny =
        sc.mean + problem.driver.eval(tree, level, node, y, sc.z1, sc.z2) * dt;
    if (std::fabs(ny - y) <= 1e-13 * (1.0 + std::fabs(ny))) return ny;
    y = ny;
  }
  throw Error(ErrorCode::Numerical, "NUMERICAL_IMPLICIT",
              "implicit step failed to converge at level " +
                  std::to_string(level) + " node " + std::to_string(node));
}

}  // namespace

SolutionTriple solve_backward(const ReflectedProblem& problem,
                              const ScenarioTree& tree, Scheme scheme,
                              const Measure& mu) {
  validate_problem(problem, tree);
  const int n = tree.num_steps();
  const double dt = tree.dt();
  if (scheme == Scheme::ImplicitY && problem.driver.mu * dt >= 1.0)
    throw Error(ErrorCode::Guard, "GUARD_IMPLICIT",
                "mu * dt >= 1: the implicit step is not a contraction; "
                "refine the time grid");

  SolutionTriple sol;
  sol.y = AdaptedProcess(tree, Filtration::Full, n);
  sol.z1 = AdaptedProcess(tree, Filtration::Full, n - 1);
  sol.z2 = AdaptedProcess(tree, Filtration::Full, n - 1);
  sol.zr = AdaptedProcess(tree, Filtration::Full, n - 1);
  sol.k = AdaptedProcess(tree, problem.filtration, n);
  sol.dk.resize(n);

  for (std::size_t leaf = 0; leaf < tree.node_count(n); ++leaf)
    sol.y.at(n, leaf) = problem.terminal(tree, leaf);

  for (int i = n - 1; i >= 0; --i) {
    const std::size_t cnt = tree.node_count(i);
    std::vector<double> ytil(cnt), gap(cnt);
    parallel_for(cnt, default_threads(), [&](std::size_t b, std::size_t e) {
      for (std::size_t node = b; node < e; ++node) {
        double ch[4];
        for (int c = 0; c < 4; ++c) ch[c] = sol.y.at(i + 1, 4 * node + c);
        const StepCoeffs sc = martingale_coefficients(
            tree, ch, mu.m1(i, node), mu.m2(i, node));
        sol.z1.at(i, node) = sc.z1;
        sol.z2.at(i, node) = sc.z2;
        sol.zr.at(i, node) = sc.residual;
        ytil[node] = implicit_step(problem, tree, i, node, sc, scheme);
        gap[node] = ytil[node] - problem.barrier(tree, i, node);
      }
    });
    const LevelSlice slice = cond_expect(tree, gap, i, problem.filtration, i, mu);
    sol.dk[i].assign(slice.v.size(), 0.0);
    for (std::size_t a = 0; a < slice.v.size(); ++a)
      sol.dk[i][a] = slice.v[a] < 0.0 ? -slice.v[a] : 0.0;
    for (std::size_t node = 0; node < cnt; ++node)
      sol.y.at(i, node) =
          ytil[node] + sol.dk[i][tree.atom_of(i, node, problem.filtration)];
  }

  // cumulative compensator, left-endpoint increments
  sol.k.at(0, 0) = 0.0;
  for (int i = 0; i < n; ++i)
    for (std::size_t a = 0; a < tree.atom_count(i + 1, problem.filtration); ++a) {
      const std::size_t pa = atom_parent(problem.filtration, a);
      sol.k.at(i + 1, a) = sol.k.at(i, pa) + sol.dk[i][pa];
    }

  sol.diag = residuals(sol, problem, tree, mu);
  return sol;
}

SolutionTriple solve_picard(const ReflectedProblem& problem,
                            const ScenarioTree& tree, double tol, int max_iters,
                            const Measure& mu) {
  validate_problem(problem, tree);
  if (problem.driver.kind == DriverKind::ConstantInYZ) {
    SolutionTriple sol = solve_backward(problem, tree, Scheme::ImplicitY, mu);
    sol.diag.picard_iterations = 1;
    sol.diag.last_picard_ratio = 0.0;
    return sol;
  }

  const int n = tree.num_steps();
  const double dt = tree.dt();
  const double beta = 4.0 * problem.driver.mu * problem.driver.mu + 1.0;
  std::vector<std::vector<double>> node_w(n);
  for (int i = 0; i < n; ++i) node_w[i] = mu.node_weights(tree, i);

  // iterate (U, V) -> solution of the frozen-generator obstacle problem
  auto u = std::make_shared<std::vector<std::vector<double>>>(n + 1);
  auto v1 = std::make_shared<std::vector<std::vector<double>>>(n);
  auto v2 = std::make_shared<std::vector<std::vector<double>>>(n);
  for (int i = 0; i <= n; ++i) (*u)[i].assign(tree.node_count(i), 0.0);
  for (int i = 0; i < n; ++i) {
    (*v1)[i].assign(tree.node_count(i), 0.0);
    (*v2)[i].assign(tree.node_count(i), 0.0);
  }

  ReflectedProblem frozen = problem;
  frozen.driver = make_constant_driver(
      [u, v1, v2, &problem](const ScenarioTree& t, int l, std::size_t node) {
        return problem.driver.eval(t, l, node, (*u)[l][node], (*v1)[l][node],
                                   (*v2)[l][node]);
      });

  double prev_norm = -1.0, ratio = 0.0;
  for (int iter = 1; iter <= max_iters; ++iter) {
    SolutionTriple sol = solve_backward(frozen, tree, Scheme::ImplicitY, mu);
    std::vector<double> terms;
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(beta * tree.time(i)) * dt;
      for (std::size_t node = 0; node < tree.node_count(i); ++node) {
        const double dy = sol.y.at(i, node) - (*u)[i][node];
        const double d1 = sol.z1.at(i, node) - (*v1)[i][node];
        const double d2 = sol.z2.at(i, node) - (*v2)[i][node];
        terms.push_back(w * node_w[i][node] * (dy * dy + d1 * d1 + d2 * d2));
      }
    }
    const double norm = std::sqrt(pairwise_sum(terms));
    for (int i = 0; i <= n; ++i)
      for (std::size_t node = 0; node < tree.node_count(i); ++node) {
        (*u)[i][node] = sol.y.at(i, node);
        if (i < n) {
          (*v1)[i][node] = sol.z1.at(i, node);
          (*v2)[i][node] = sol.z2.at(i, node);
        }
      }
    if (prev_norm > 0.0) ratio = norm / prev_norm;
    prev_norm = norm;
    if (norm <= tol) {
      // final sweep with the true generator for faithful diagnostics
      SolutionTriple out = solve_backward(problem, tree, Scheme::ImplicitY, mu);
      out.diag.picard_iterations = iter;
      out.diag.last_picard_ratio = ratio;
      return out;
    }
  }
  throw Error(ErrorCode::Numerical, "NUMERICAL_PICARD",
              "frozen-generator iteration did not reach tol=" +
                  std::to_string(tol) + " in " + std::to_string(max_iters) +
                  " sweeps (last ratio " + std::to_string(ratio) + ")");
}

Diagnostics residuals(const SolutionTriple& sol, const ReflectedProblem& problem,
                      const ScenarioTree& tree, const Measure& mu) {
  Diagnostics d = sol.diag;
  d.worst_constraint_gap = 1e300;
  d.flatness_defect = 0.0;
  d.max_step_residual = 0.0;
  const int n = tree.num_steps();
  const double dt = tree.dt(), sdt = tree.sqrt_dt();
  for (int i = 0; i <= n; ++i) {
    std::vector<double> gap(tree.node_count(i));
    for (std::size_t node = 0; node < gap.size(); ++node)
      gap[node] = sol.y.at(i, node) - problem.barrier(tree, i, node);
    const LevelSlice slice = cond_expect(tree, gap, i, problem.filtration, i, mu);
    for (std::size_t a = 0; a < slice.v.size(); ++a) {
      d.worst_constraint_gap = std::min(d.worst_constraint_gap, slice.v[a]);
      if (i < n) d.flatness_defect += slice.v[a] * sol.dk[i][a];
    }
  }
  for (int i = 0; i < n; ++i)
    for (std::size_t node = 0; node < tree.node_count(i); ++node) {
      const double m1 = mu.m1(i, node), m2 = mu.m2(i, node);
      const std::size_t atom = tree.atom_of(i, node, problem.filtration);
      const double ystar = sol.y.at(i, node) - sol.dk[i][atom];
      const double f = problem.driver.eval(tree, i, node, ystar,
                                           sol.z1.at(i, node),
                                           sol.z2.at(i, node));
      double mean = 0.0;
      for (int c = 0; c < 4; ++c) {
        const double c1 = ScenarioTree::eps1(c) - m1;
        const double c2 = ScenarioTree::eps2(c) - m2;
        const double recon = (ystar - f * dt) + sol.z1.at(i, node) * sdt * c1 +
                             sol.z2.at(i, node) * sdt * c2 +
                             sol.zr.at(i, node) * dt * c1 * c2;
        d.max_step_residual = std::max(
            d.max_step_residual, std::fabs(recon - sol.y.at(i + 1, 4 * node + c)));
        mean += mu.branch_prob(i, node, c) * sol.y.at(i + 1, 4 * node + c);
      }
      d.max_step_residual =
          std::max(d.max_step_residual, std::fabs(ystar - f * dt - mean));
    }
  return d;
}

double k_representation_check(const SolutionTriple& sol,
                              const ReflectedProblem& problem,
                              const ScenarioTree& tree, const Measure& mu) {
  const int n = tree.num_steps();
  const double dt = tree.dt(), sdt = tree.sqrt_dt();
  const Filtration g = problem.filtration;

  // cumulative generator and martingale components along each path
  std::vector<std::vector<double>> cum_f(n + 1), cum_m(n + 1);
  cum_f[0] = {0.0};
  cum_m[0] = {0.0};
  for (int i = 0; i < n; ++i) {
    cum_f[i + 1].resize(tree.node_count(i + 1));
    cum_m[i + 1].resize(tree.node_count(i + 1));
    for (std::size_t node = 0; node < tree.node_count(i); ++node) {
      const double f = problem.driver.eval(tree, i, node, sol.y.at(i, node),
                                           sol.z1.at(i, node),
                                           sol.z2.at(i, node));
      const double m1 = mu.m1(i, node), m2 = mu.m2(i, node);
      for (int c = 0; c < 4; ++c) {
        const double c1 = ScenarioTree::eps1(c) - m1;
        const double c2 = ScenarioTree::eps2(c) - m2;
        cum_f[i + 1][4 * node + c] = cum_f[i][node] + f * dt;
        cum_m[i + 1][4 * node + c] =
            cum_m[i][node] + sol.z1.at(i, node) * sdt * c1 +
            sol.z2.at(i, node) * sdt * c2 + sol.zr.at(i, node) * dt * c1 * c2;
      }
    }
  }

  std::vector<LevelSlice> ef(n + 1), em(n + 1), es(n + 1);
  for (int s = 0; s <= n; ++s) {
    ef[s] = cond_expect(tree, cum_f[s], s, g, s, mu);
    em[s] = cond_expect(tree, cum_m[s], s, g, s, mu);
    std::vector<double> bs(tree.node_count(s));
    for (std::size_t node = 0; node < bs.size(); ++node)
      bs[node] = problem.barrier(tree, s, node);
    es[s] = cond_expect(tree, bs, s, g, s, mu);
  }
  std::vector<double> xi(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < xi.size(); ++leaf)
    xi[leaf] = problem.terminal(tree, leaf);
  const LevelSlice exi = cond_expect(tree, xi, n, g, n, mu);

  double disc = 0.0;
  for (std::size_t leaf = 0; leaf < tree.node_count(n); ++leaf) {
    const std::size_t an = tree.atom_of(n, leaf, g);
    const double tail = exi.v[an] + ef[n].v[an] - em[n].v[an];
    double envelope = 0.0;  // running sup of negative parts, from s = n down
    for (int s = n; s >= 0; --s) {
      const std::size_t node_s = tree.ancestor(n, leaf, s);
      const std::size_t as = tree.atom_of(s, node_s, g);
      const double x = tail - ef[s].v[as] + em[s].v[as] - es[s].v[as];
      envelope = std::max(envelope, x < 0.0 ? -x : 0.0);
      const double krange = sol.k.at(n, an) - sol.k.at(s, as);
      disc = std::max(disc, std::fabs(krange - envelope));
    }
  }
  return disc;
}

}  // namespace crbsde
