#include "crbsde/control.hpp"

#include <cmath>
#include <limits>

#include "crbsde/stopping.hpp"

namespace crbsde {

namespace {

// Reflected recursion on the partial-filtration atom tree under the base
// measure. Atom a at level l has children 2a (eps1 = +1) and 2a+1.
FilteredTriple solve_atom_tree(
    const ScenarioTree& tree, const std::vector<double>& terminal,
    const std::vector<std::vector<double>>& barrier,
    const std::function<double(int level, std::size_t atom, double y,
                               double q)>& driver,
    double mu) {
  const int n = tree.num_steps();
  const double dt = tree.dt(), sdt = tree.sqrt_dt();
  if (mu * dt >= 1.0)
    throw Error(ErrorCode::Guard, "GUARD_IMPLICIT",
                "mu * dt >= 1 in the atom-tree recursion");
  FilteredTriple out;
  out.p.resize(n + 1);
  out.q.resize(n);
  out.dk.resize(n);
  out.barrier = barrier;
  out.p[n] = terminal;
  for (std::size_t a = 0; a < out.p[n].size(); ++a)
    if (out.p[n][a] < barrier[n][a] - 1e-12)
      throw Error(ErrorCode::Validation, "VALIDATION_TERMINAL",
                  "projected terminal value below the projected barrier");
  for (int l = n - 1; l >= 0; --l) {
    const std::size_t cnt = tree.atom_count(l, Filtration::Partial);
    out.p[l].resize(cnt);
    out.q[l].resize(cnt);
    out.dk[l].resize(cnt);
    for (std::size_t a = 0; a < cnt; ++a) {
      const double up = out.p[l + 1][2 * a], dn = out.p[l + 1][2 * a + 1];
      const double mean = 0.5 * (up + dn);
      const double q = (up - dn) / (2.0 * sdt);
      double y = mean;
      for (int it = 0;; ++it) {
        const double ny = mean + driver(l, a, y, q) * dt;
        if (std::fabs(ny - y) <= 1e-13 * (1.0 + std::fabs(ny))) {
          y = ny;
          break;
        }
        if (it >= 200)
          throw Error(ErrorCode::Numerical, "NUMERICAL_IMPLICIT",
                      "implicit atom-tree step failed to converge");
        y = ny;
      }
      out.q[l][a] = q;
      const double push = barrier[l][a] - y;
      out.dk[l][a] = push > 0.0 ? push : 0.0;
      out.p[l][a] = y + out.dk[l][a];
    }
  }
  return out;
}

struct FilteredData {
  std::shared_ptr<StatePaths> paths;
  std::vector<std::vector<Vec2>> xhat;
  std::vector<std::vector<double>> hbar;  // projected barrier per (level, atom)
  std::vector<double> phibar;             // projected terminal per atom at N
};

FilteredData filtered_data(const StateModel& state, const ScenarioTree& tree,
                           const std::function<double(double, const Vec2&)>& h,
                           const std::function<double(const Vec2&)>& phi) {
  FilteredData fd;
  StateModel m = state;
  m.drift = nullptr;
  fd.paths = std::make_shared<StatePaths>(rollout_state(m, tree));
  fd.xhat = filter_state(tree, *fd.paths);
  const int n = tree.num_steps();
  fd.hbar.resize(n + 1);
  for (int l = 0; l <= n; ++l) {
    std::vector<double> raw(tree.node_count(l));
    for (std::size_t node = 0; node < raw.size(); ++node)
      raw[node] = h(tree.time(l), fd.paths->x[l][node]);
    fd.hbar[l] = cond_expect(tree, raw, l, Filtration::Partial, l).v;
  }
  std::vector<double> rawt(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < rawt.size(); ++leaf)
    rawt[leaf] = phi(fd.paths->x[n][leaf]);
  fd.phibar = cond_expect(tree, rawt, n, Filtration::Partial, n).v;
  return fd;
}

std::size_t atom_slot_count(const ScenarioTree& tree) {
  std::size_t s = 0;
  for (int l = 0; l < tree.num_steps(); ++l)
    s += tree.atom_count(l, Filtration::Partial);
  return s;
}

std::size_t node_slot_count(const ScenarioTree& tree) {
  std::size_t s = 0;
  for (int l = 0; l < tree.num_steps(); ++l) s += tree.node_count(l);
  return s;
}

std::size_t sat_pow(std::size_t a, std::size_t e, std::size_t cap) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (a != 0 && r > cap / a) return cap + 1;
    r *= a;
  }
  return r;
}

// Runs fn for every grid assignment over the given per-level slot counts.
template <typename Fn>
void for_each_assignment(const ControlGrid& grid,
                         const std::vector<std::size_t>& level_sizes, Fn&& fn) {
  std::size_t slots = 0;
  for (std::size_t s : level_sizes) slots += s;
  std::vector<std::size_t> idx(slots, 0);
  std::vector<std::vector<double>> ctrl(level_sizes.size());
  while (true) {
    std::size_t k = 0;
    for (std::size_t l = 0; l < level_sizes.size(); ++l) {
      ctrl[l].resize(level_sizes[l]);
      for (std::size_t a = 0; a < level_sizes[l]; ++a)
        ctrl[l][a] = grid.points[idx[k++]];
    }
    fn(ctrl);
    std::size_t p = slots;
    while (p > 0 && ++idx[p - 1] == grid.points.size()) idx[--p] = 0;
    if (p == 0) break;
  }
}

}  // namespace

LinearBrrResult solve_linear_brr(const LinearBrrProblem& p,
                                 const ScenarioTree& tree,
                                 const ControlGrid& grid) {
  validate_grid(grid);
  FilteredData fd = filtered_data(p.state, tree, p.h, p.phi);
  const auto& xh = fd.xhat;

  auto hamiltonian = [&](int l, std::size_t a, double q, double* argmax) {
    double best = -std::numeric_limits<double>::infinity();
    double bestv = grid.points[0];
    const double t = tree.time(l);
    for (double v : grid.points) {
      const double bv = p.b ? p.b(t, xh[l][a], v) : 0.0;
      const double cand = q * bv + p.g(t, xh[l][a], v);
      if (cand > best) {
        best = cand;
        bestv = v;
      }
    }
    if (argmax) *argmax = bestv;
    return best;
  };
  auto driver = [&](int l, std::size_t a, double y, double q) {
    const double av = p.alpha ? p.alpha(l, a) : 0.0;
    const double bv = p.beta ? p.beta(l, a) : 0.0;
    return av * y + bv * q + hamiltonian(l, a, q, nullptr);
  };

  LinearBrrResult res;
  res.sol = solve_atom_tree(tree, fd.phibar, fd.hbar, driver, p.mu);
  res.value = res.sol.p[0][0];

  const int n = tree.num_steps();
  res.feedback.resize(n);
  for (int l = 0; l < n; ++l) {
    res.feedback[l].resize(tree.atom_count(l, Filtration::Partial));
    for (std::size_t a = 0; a < res.feedback[l].size(); ++a)
      hamiltonian(l, a, res.sol.q[l][a], &res.feedback[l][a]);
  }
  res.feedback_rule = [&p, grid, dtv = tree.dt()](int l, double z1,
                                                  const Vec2& xhat) {
    const double t = dtv * l;
    double best = -std::numeric_limits<double>::infinity();
    double bestv = grid.points[0];
    for (double v : grid.points) {
      const double bv = p.b ? p.b(t, xhat, v) : 0.0;
      const double cand = z1 * bv + p.g(t, xhat, v);
      if (cand > best) {
        best = cand;
        bestv = v;
      }
    }
    return bestv;
  };

  // first time the projected gap closes
  res.tau_star.g = Filtration::Partial;
  res.tau_star.from = 0;
  res.tau_star.stop.resize(n + 1);
  std::vector<std::vector<char>> done(n + 1);
  for (int l = 0; l <= n; ++l) {
    const std::size_t cnt = tree.atom_count(l, Filtration::Partial);
    res.tau_star.stop[l].assign(cnt, 0);
    done[l].assign(cnt, 0);
    for (std::size_t a = 0; a < cnt; ++a) {
      if (l > 0 && done[l - 1][a / 2]) {
        done[l][a] = 1;
        continue;
      }
      if (res.sol.p[l][a] - fd.hbar[l][a] <= 1e-10 || l == n) {
        res.tau_star.stop[l][a] = 1;
        done[l][a] = 1;
      }
    }
  }
  return res;
}

double weak_value_for_control(const LinearBrrProblem& p, const ScenarioTree& tree,
                              const AtomControl& control) {
  const WeakInstance w = make_weak_instance(p, tree, control);
  return solve_backward(w.problem, tree, Scheme::ImplicitY, w.measure)
      .y.at(0, 0);
}

double weak_value_for_control(const ConvexBrrProblem& p, const ScenarioTree& tree,
                              const AtomControl& control) {
  const WeakInstance w = make_weak_instance(p, tree, control);
  return solve_backward(w.problem, tree, Scheme::ImplicitY, w.measure)
      .y.at(0, 0);
}

double weak_value_for_control(const StrongBrrProblem& p, const ScenarioTree& tree,
                              const NodeControl& control) {
  const WeakInstance w = make_weak_instance(p, tree, control);
  return solve_backward(w.problem, tree, Scheme::ImplicitY, w.measure)
      .y.at(0, 0);
}

double weak_value_for_control(const ZeroSumProblem& p, const ScenarioTree& tree,
                              const NodeControl& u, const NodeControl& v) {
  const WeakInstance w = make_weak_instance(p, tree, u, v);
  return solve_backward(w.problem, tree, Scheme::ImplicitY, w.measure)
      .y.at(0, 0);
}

double mixed_value_oracle(const LinearBrrProblem& p, const ScenarioTree& tree,
                          const ControlGrid& grid, std::size_t guard) {
  validate_grid(grid);
  const std::size_t nctrl =
      sat_pow(grid.points.size(), atom_slot_count(tree), guard);
  const std::size_t ntau =
      count_g_stopping_times(tree, Filtration::Partial, 0, guard);
  if (nctrl > guard || ntau > guard || nctrl > guard / ntau)
    throw Error(ErrorCode::Guard, "GUARD_ENUMERATION",
                "stopping-rule x control enumeration exceeds the guard");
  const auto taus = enumerate_g_stopping_times(tree, Filtration::Partial, 0);

  std::vector<std::size_t> sizes(tree.num_steps());
  for (int l = 0; l < tree.num_steps(); ++l)
    sizes[l] = tree.atom_count(l, Filtration::Partial);

  double best = -std::numeric_limits<double>::infinity();
  for_each_assignment(grid, sizes, [&](const AtomControl& ctrl) {
    const WeakInstance w = make_weak_instance(p, tree, ctrl);
    for (const auto& tau : taus) {
      const LevelSlice s = stopped_value(w.problem, tau, 0, tree, w.measure);
      best = std::max(best, s.v[0]);
    }
  });
  return best;
}

double DualFamily::reconstruct(double t, const Vec2& xhat, double y,
                               double z1) const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : entries)
    best = std::max(best, e.alpha * y + e.beta * z1 + e.cbar(t, xhat));
  return best;
}

DualFamily fenchel_dual(const std::vector<ConvexBrrProblem::Piece>& pieces,
                        const ControlGrid& grid) {
  validate_grid(grid);
  if (pieces.empty())
    throw Error(ErrorCode::Validation, "VALIDATION_DRIVER",
                "dualization needs at least one affine piece");
  DualFamily fam;
  for (const auto& piece : pieces) {
    auto cbar = [c = piece.c, pts = grid.points](double t, const Vec2& x) {
      double best = -std::numeric_limits<double>::infinity();
      for (double v : pts) best = std::max(best, c ? c(t, x, v) : 0.0);
      return best;
    };
    bool merged = false;
    for (auto& e : fam.entries)
      if (e.alpha == piece.alpha && e.beta == piece.beta) {
        auto old = e.cbar;
        e.cbar = [old, cbar](double t, const Vec2& x) {
          return std::max(old(t, x), cbar(t, x));
        };
        merged = true;
        break;
      }
    if (!merged)
      fam.entries.push_back({piece.alpha, piece.beta, std::move(cbar)});
  }
  return fam;
}

ConvexBrrResult solve_convex_brr(const ConvexBrrProblem& p,
                                 const ScenarioTree& tree,
                                 const ControlGrid& grid) {
  validate_grid(grid);
  if (p.pieces.empty())
    throw Error(ErrorCode::Validation, "VALIDATION_DRIVER",
                "max-affine generator has no pieces");
  FilteredData fd = filtered_data(p.state, tree, p.h, p.phi);
  const auto& xh = fd.xhat;

  double mu = p.mu;
  for (const auto& piece : p.pieces)
    mu = std::max(mu, std::fabs(piece.alpha) + std::fabs(piece.beta));

  auto driver = [&](int l, std::size_t a, double y, double q) {
    const double t = tree.time(l);
    double best = -std::numeric_limits<double>::infinity();
    for (double v : grid.points) {
      const double bv = p.b ? p.b(t, xh[l][a], v) : 0.0;
      for (const auto& piece : p.pieces) {
        const double cv = piece.c ? piece.c(t, xh[l][a], v) : 0.0;
        best = std::max(best, piece.alpha * y + (piece.beta + bv) * q + cv);
      }
    }
    return best;
  };

  ConvexBrrResult res;
  res.sol = solve_atom_tree(tree, fd.phibar, fd.hbar, driver, mu);
  res.value = res.sol.p[0][0];
  res.dual = fenchel_dual(p.pieces, grid);
  return res;
}

StrongBrrResult solve_strong_brrf(const StrongBrrProblem& p,
                                  const ScenarioTree& tree,
                                  const ControlGrid& grid) {
  validate_grid(grid);
  const int n = tree.num_steps();
  StateModel m = p.state;
  m.drift = nullptr;
  auto paths = std::make_shared<StatePaths>(rollout_state(m, tree));

  // sigma^{-1} per (level, node), and an effective Lipschitz bound in z
  auto sinv = std::make_shared<std::vector<std::vector<Mat2>>>(n);
  double tilt_bound = 0.0;
  for (int l = 0; l < n; ++l) {
    (*sinv)[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      const PathView pv(tree, *paths, l, node);
      (*sinv)[l][node] =
          mat_inverse(p.state.diffusion(tree.time(l), pv), p.state.condition_cap);
      for (double v : grid.points) {
        const Vec2 th = mat_vec((*sinv)[l][node], p.b(tree.time(l), pv, v));
        tilt_bound = std::max(tilt_bound, std::hypot(th[0], th[1]));
      }
    }
  }

  auto argmax_at = [&, paths, sinv](int l, std::size_t node, double y,
                                    const Vec2& z_orig, double* out_best) {
    const PathView pv(tree, *paths, l, node);
    const double t = tree.time(l);
    double best = -std::numeric_limits<double>::infinity();
    double bestv = grid.points[0];
    for (double v : grid.points) {
      const Vec2 th = mat_vec((*sinv)[l][node], p.b(t, pv, v));
      const double cand =
          p.f(t, pv, y, z_orig, v) + z_orig[0] * th[0] + z_orig[1] * th[1];
      if (cand > best) {
        best = cand;
        bestv = v;
      }
    }
    if (out_best) *out_best = best;
    return bestv;
  };

  ReflectedProblem rp;
  rp.filtration = Filtration::Full;
  rp.barrier = [&p, paths](const ScenarioTree& t, int l, std::size_t node) {
    return p.h(t.time(l), PathView(t, *paths, l, node));
  };
  rp.terminal = [&p, paths](const ScenarioTree& t, std::size_t leaf) {
    return p.phi(PathView(t, *paths, t.num_steps(), leaf));
  };
  rp.driver.kind = DriverKind::General;
  rp.driver.mu = p.mu + tilt_bound;
  rp.driver.general = [&, paths](const ScenarioTree& t, int l, std::size_t node,
                                 double y, double z1, double z2,
                                 std::optional<double>) {
    const Vec2 z_orig = mat_vec(mat_transpose(t.rotation().m), Vec2{z1, z2});
    double best;
    argmax_at(l, node, y, z_orig, &best);
    return best;
  };

  StrongBrrResult res;
  res.sol = solve_backward(rp, tree, Scheme::ImplicitY);
  res.value = res.sol.y.at(0, 0);
  res.feedback.resize(n);
  for (int l = 0; l < n; ++l) {
    res.feedback[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      const double ystar =
          res.sol.y.at(l, node) - res.sol.dk[l][node];  // pre-reflection value
      const Vec2 z_orig =
          mat_vec(mat_transpose(tree.rotation().m),
                  Vec2{res.sol.z1.at(l, node), res.sol.z2.at(l, node)});
      res.feedback[l][node] = argmax_at(l, node, ystar, z_orig, nullptr);
    }
  }
  return res;
}

ZeroSumResult solve_zero_sum(const ZeroSumProblem& p, const ScenarioTree& tree,
                             const ControlGrid& grid_u,
                             const ControlGrid& grid_v, double isaacs_tol) {
  validate_grid(grid_u);
  validate_grid(grid_v);
  const int n = tree.num_steps();
  StateModel m = p.state;
  m.drift = nullptr;
  auto paths = std::make_shared<StatePaths>(rollout_state(m, tree));
  auto sinv = std::make_shared<std::vector<std::vector<Mat2>>>(n);
  double tilt_bound = 0.0;
  for (int l = 0; l < n; ++l) {
    (*sinv)[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      const PathView pv(tree, *paths, l, node);
      (*sinv)[l][node] =
          mat_inverse(p.state.diffusion(tree.time(l), pv), p.state.condition_cap);
      for (double u : grid_u.points)
        for (double v : grid_v.points) {
          const Vec2 th =
              mat_vec((*sinv)[l][node], p.b(tree.time(l), pv, u, v));
          tilt_bound = std::max(tilt_bound, std::hypot(th[0], th[1]));
        }
    }
  }

  auto hamil = [&, paths, sinv](int l, std::size_t node, double y,
                                const Vec2& z_orig, double u, double v) {
    const PathView pv(tree, *paths, l, node);
    const double t = tree.time(l);
    const Vec2 th = mat_vec((*sinv)[l][node], p.b(t, pv, u, v));
    return p.f(t, pv, y, z_orig, u, v) + z_orig[0] * th[0] + z_orig[1] * th[1];
  };

  auto worst_gap = std::make_shared<double>(0.0);
  auto envelopes = [&, worst_gap](int l, std::size_t node, double y,
                                  const Vec2& z_orig, double* ustar,
                                  double* vstar) {
    double minmax = std::numeric_limits<double>::infinity();
    double bu = grid_u.points[0];
    for (double u : grid_u.points) {
      double inner = -std::numeric_limits<double>::infinity();
      for (double v : grid_v.points)
        inner = std::max(inner, hamil(l, node, y, z_orig, u, v));
      if (inner < minmax) {
        minmax = inner;
        bu = u;
      }
    }
    double maxmin = -std::numeric_limits<double>::infinity();
    double bv = grid_v.points[0];
    for (double v : grid_v.points) {
      double inner = std::numeric_limits<double>::infinity();
      for (double u : grid_u.points)
        inner = std::min(inner, hamil(l, node, y, z_orig, u, v));
      if (inner > maxmin) {
        maxmin = inner;
        bv = v;
      }
    }
    const double gap = std::fabs(minmax - maxmin);
    *worst_gap = std::max(*worst_gap, gap);
    if (gap > isaacs_tol)
      throw Error(ErrorCode::Guard, "GUARD_ISAACS",
                  "upper and lower Hamiltonians differ by " +
                      std::to_string(gap) + " at level " + std::to_string(l) +
                      " node " + std::to_string(node));
    if (ustar) *ustar = bu;
    if (vstar) *vstar = bv;
    return minmax;
  };

  ReflectedProblem rp;
  rp.filtration = Filtration::Full;
  rp.barrier = [&p, paths](const ScenarioTree& t, int l, std::size_t node) {
    return p.h(t.time(l), PathView(t, *paths, l, node));
  };
  rp.terminal = [&p, paths](const ScenarioTree& t, std::size_t leaf) {
    return p.phi(PathView(t, *paths, t.num_steps(), leaf));
  };
  rp.driver.kind = DriverKind::General;
  rp.driver.mu = p.mu + tilt_bound;
  rp.driver.general = [&](const ScenarioTree& t, int l, std::size_t node,
                          double y, double z1, double z2,
                          std::optional<double>) {
    const Vec2 z_orig = mat_vec(mat_transpose(t.rotation().m), Vec2{z1, z2});
    return envelopes(l, node, y, z_orig, nullptr, nullptr);
  };

  ZeroSumResult res;
  res.sol = solve_backward(rp, tree, Scheme::ImplicitY);
  res.value = res.sol.y.at(0, 0);
  res.feedback_u.resize(n);
  res.feedback_v.resize(n);
  for (int l = 0; l < n; ++l) {
    res.feedback_u[l].resize(tree.node_count(l));
    res.feedback_v[l].resize(tree.node_count(l));
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      const double ystar = res.sol.y.at(l, node) - res.sol.dk[l][node];
      const Vec2 z_orig =
          mat_vec(mat_transpose(tree.rotation().m),
                  Vec2{res.sol.z1.at(l, node), res.sol.z2.at(l, node)});
      envelopes(l, node, ystar, z_orig, &res.feedback_u[l][node],
                &res.feedback_v[l][node]);
    }
  }
  res.worst_isaacs_gap = *worst_gap;
  return res;
}

double game_minmax_oracle(const ZeroSumProblem& p, const ScenarioTree& tree,
                          const ControlGrid& grid_u, const ControlGrid& grid_v,
                          std::size_t guard) {
  validate_grid(grid_u);
  validate_grid(grid_v);
  const std::size_t slots = node_slot_count(tree);
  const std::size_t cu = sat_pow(grid_u.points.size(), slots, guard);
  const std::size_t cv = sat_pow(grid_v.points.size(), slots, guard);
  if (cu > guard || cv > guard || cu > guard / cv)
    throw Error(ErrorCode::Guard, "GUARD_ENUMERATION",
                "game enumeration exceeds the guard");
  std::vector<std::size_t> sizes(tree.num_steps());
  for (int l = 0; l < tree.num_steps(); ++l) sizes[l] = tree.node_count(l);

  double outer = std::numeric_limits<double>::infinity();
  for_each_assignment(grid_u, sizes, [&](const NodeControl& u) {
    double inner = -std::numeric_limits<double>::infinity();
    for_each_assignment(grid_v, sizes, [&](const NodeControl& v) {
      inner = std::max(inner, weak_value_for_control(p, tree, u, v));
    });
    outer = std::min(outer, inner);
  });
  return outer;
}

}  // namespace crbsde
