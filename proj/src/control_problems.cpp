#include "crbsde/control_problems.hpp"

#include <cmath>

namespace crbsde {

std::vector<std::vector<Vec2>> filter_state(const ScenarioTree& tree,
                                            const StatePaths& paths) {
  const int n = tree.num_steps();
  std::vector<std::vector<Vec2>> xhat(n + 1);
  for (int l = 0; l <= n; ++l) {
    std::vector<double> comp(tree.node_count(l));
    xhat[l].resize(tree.atom_count(l, Filtration::Partial));
    for (int k = 0; k < 2; ++k) {
      for (std::size_t node = 0; node < comp.size(); ++node)
        comp[node] = paths.x[l][node][k];
      const LevelSlice s = cond_expect(tree, comp, l, Filtration::Partial, l);
      for (std::size_t a = 0; a < s.v.size(); ++a) xhat[l][a][k] = s.v[a];
    }
  }
  return xhat;
}

namespace {

std::shared_ptr<StatePaths> driftless_paths(const StateModel& state,
                                            const ScenarioTree& tree) {
  StateModel m = state;
  m.drift = nullptr;
  return std::make_shared<StatePaths>(rollout_state(m, tree));
}

// Tilt with theta1 given per partial-filtration atom, theta2 = 0.
Measure partial_tilt(const ScenarioTree& tree,
                     const std::function<double(int, std::size_t)>& theta1) {
  AdaptedProcess th(tree, Filtration::Partial, tree.num_steps() - 1);
  for (int l = 0; l < tree.num_steps(); ++l)
    for (std::size_t a = 0; a < tree.atom_count(l, Filtration::Partial); ++a)
      th.at(l, a) = theta1(l, a);
  return tilt_measure(tree, th);
}

// Full-information tilt theta = U sigma^{-1} b, per node.
Measure full_tilt(const StateModel& state, const ScenarioTree& tree,
                  const StatePaths& paths,
                  const std::function<Vec2(int, std::size_t, const PathView&)>&
                      drift) {
  AdaptedProcess th1(tree, Filtration::Full, tree.num_steps() - 1);
  AdaptedProcess th2(tree, Filtration::Full, tree.num_steps() - 1);
  for (int l = 0; l < tree.num_steps(); ++l)
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      const PathView pv(tree, paths, l, node);
      const Mat2 si =
          mat_inverse(state.diffusion(tree.time(l), pv), state.condition_cap);
      const Vec2 theta_orig = mat_vec(si, drift(l, node, pv));
      const Vec2 theta_rot = mat_vec(tree.rotation().m, theta_orig);
      th1.at(l, node) = theta_rot[0];
      th2.at(l, node) = theta_rot[1];
    }
  return tilt_measure(tree, th1, &th2);
}

void attach_state_payoffs(
    WeakInstance& w,
    const std::function<double(double t, const Vec2& x)>& h,
    const std::function<double(const Vec2& xT)>& phi) {
  auto paths = w.paths;
  w.problem.barrier = [h, paths](const ScenarioTree& t, int l,
                                 std::size_t node) {
    return h(t.time(l), paths->x[l][node]);
  };
  w.problem.terminal = [phi, paths](const ScenarioTree& t, std::size_t leaf) {
    return phi(paths->x[t.num_steps()][leaf]);
  };
}

void attach_path_payoffs(
    WeakInstance& w,
    const std::function<double(double t, const PathView&)>& h,
    const std::function<double(const PathView&)>& phi) {
  auto paths = w.paths;
  w.problem.barrier = [h, paths](const ScenarioTree& t, int l,
                                 std::size_t node) {
    return h(t.time(l), PathView(t, *paths, l, node));
  };
  w.problem.terminal = [phi, paths](const ScenarioTree& t, std::size_t leaf) {
    return phi(PathView(t, *paths, t.num_steps(), leaf));
  };
}

}  // namespace

WeakInstance make_weak_instance(const LinearBrrProblem& p,
                                const ScenarioTree& tree,
                                const AtomControl& control) {
  WeakInstance w;
  w.paths = driftless_paths(p.state, tree);
  w.xhat = std::make_shared<std::vector<std::vector<Vec2>>>(
      filter_state(tree, *w.paths));
  auto xh = w.xhat;
  w.measure = partial_tilt(tree, [&](int l, std::size_t a) {
    return p.b ? p.b(tree.time(l), (*xh)[l][a], control[l][a]) : 0.0;
  });
  Driver d;
  d.kind = DriverKind::Affine;
  d.mu = p.mu;
  d.a = [alpha = p.alpha](const ScenarioTree& t, int l, std::size_t node) {
    return alpha ? alpha(l, t.atom_of(l, node, Filtration::Partial)) : 0.0;
  };
  d.beta1 = [beta = p.beta](const ScenarioTree& t, int l, std::size_t node) {
    return beta ? beta(l, t.atom_of(l, node, Filtration::Partial)) : 0.0;
  };
  d.c = [g = p.g, xh, control](const ScenarioTree& t, int l, std::size_t node) {
    const std::size_t a = t.atom_of(l, node, Filtration::Partial);
    return g(t.time(l), (*xh)[l][a], control[l][a]);
  };
  w.problem.driver = std::move(d);
  w.problem.filtration = Filtration::Partial;
  attach_state_payoffs(w, p.h, p.phi);
  return w;
}

WeakInstance make_weak_instance(const ConvexBrrProblem& p,
                                const ScenarioTree& tree,
                                const AtomControl& control) {
  WeakInstance w;
  w.paths = driftless_paths(p.state, tree);
  w.xhat = std::make_shared<std::vector<std::vector<Vec2>>>(
      filter_state(tree, *w.paths));
  auto xh = w.xhat;
  w.measure = partial_tilt(tree, [&](int l, std::size_t a) {
    return p.b ? p.b(tree.time(l), (*xh)[l][a], control[l][a]) : 0.0;
  });
  Driver d;
  d.kind = DriverKind::MaxAffine;
  d.mu = p.mu;
  for (const auto& piece : p.pieces) {
    Driver::Piece q;
    q.alpha = piece.alpha;
    q.beta1 = piece.beta;
    q.c = [c = piece.c, xh, control](const ScenarioTree& t, int l,
                                     std::size_t node, std::optional<double>) {
      const std::size_t a = t.atom_of(l, node, Filtration::Partial);
      return c ? c(t.time(l), (*xh)[l][a], control[l][a]) : 0.0;
    };
    d.pieces.push_back(std::move(q));
  }
  w.problem.driver = std::move(d);
  w.problem.filtration = Filtration::Partial;
  attach_state_payoffs(w, p.h, p.phi);
  return w;
}

WeakInstance make_weak_instance(const StrongBrrProblem& p,
                                const ScenarioTree& tree,
                                const NodeControl& control) {
  WeakInstance w;
  w.paths = driftless_paths(p.state, tree);
  w.measure = full_tilt(p.state, tree, *w.paths,
                        [&](int l, std::size_t node, const PathView& pv) {
                          return p.b(tree.time(l), pv, control[l][node]);
                        });
  auto paths = w.paths;
  Driver d;
  d.kind = DriverKind::General;
  d.mu = p.mu;
  d.general = [f = p.f, paths, control](const ScenarioTree& t, int l,
                                        std::size_t node, double y, double z1,
                                        double z2, std::optional<double>) {
    const PathView pv(t, *paths, l, node);
    const Vec2 z_orig = mat_vec(mat_transpose(t.rotation().m), Vec2{z1, z2});
    return f(t.time(l), pv, y, z_orig, control[l][node]);
  };
  w.problem.driver = std::move(d);
  w.problem.filtration = Filtration::Full;
  attach_path_payoffs(w, p.h, p.phi);
  return w;
}

WeakInstance make_weak_instance(const ZeroSumProblem& p, const ScenarioTree& tree,
                                const NodeControl& u, const NodeControl& v) {
  WeakInstance w;
  w.paths = driftless_paths(p.state, tree);
  w.measure = full_tilt(p.state, tree, *w.paths,
                        [&](int l, std::size_t node, const PathView& pv) {
                          return p.b(tree.time(l), pv, u[l][node], v[l][node]);
                        });
  auto paths = w.paths;
  Driver d;
  d.kind = DriverKind::General;
  d.mu = p.mu;
  d.general = [f = p.f, paths, u, v](const ScenarioTree& t, int l,
                                     std::size_t node, double y, double z1,
                                     double z2, std::optional<double>) {
    const PathView pv(t, *paths, l, node);
    const Vec2 z_orig = mat_vec(mat_transpose(t.rotation().m), Vec2{z1, z2});
    return f(t.time(l), pv, y, z_orig, u[l][node], v[l][node]);
  };
  w.problem.driver = std::move(d);
  w.problem.filtration = Filtration::Full;
  attach_path_payoffs(w, p.h, p.phi);
  return w;
}

}  // namespace crbsde
