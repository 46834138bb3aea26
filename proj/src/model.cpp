#include "crbsde/model.hpp"

#include <cmath>
#include <limits>

namespace crbsde {

StatePaths rollout_state(
    const StateModel& model, const ScenarioTree& tree,
    const std::function<double(int level, std::size_t node)>& control) {
  const int n = tree.num_steps();
  StatePaths out;
  out.x.resize(n + 1);
  out.x[0] = {model.x0};
  for (int l = 0; l < n; ++l) {
    out.x[l + 1].resize(tree.node_count(l + 1));
    const double t = tree.time(l);
    for (std::size_t node = 0; node < out.x[l].size(); ++node) {
      const PathView pv(tree, out, l, node);
      Vec2 b{0.0, 0.0};
      if (model.drift) {
        std::optional<double> v;
        if (control) v = control(l, node);
        b = model.drift(t, pv, v);
        if (std::fabs(b[0]) > model.drift_bound ||
            std::fabs(b[1]) > model.drift_bound)
          throw Error(ErrorCode::Validation, "VALIDATION_STATE",
                      "drift exceeds its declared bound at t=" + std::to_string(t));
      }
      const Mat2 sg = model.diffusion(t, pv);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          if (!(std::fabs(sg[i][j]) <= model.diffusion_bound))
            throw Error(ErrorCode::Validation, "VALIDATION_STATE",
                        "diffusion exceeds its declared bound");
      for (int c = 0; c < 4; ++c) {
        const Vec2 dw = tree.inc_orig(c);
        const Vec2 sdw = mat_vec(sg, dw);
        const Vec2& xc = out.x[l][node];
        out.x[l + 1][4 * node + c] = {xc[0] + b[0] * tree.dt() + sdw[0],
                                      xc[1] + b[1] * tree.dt() + sdw[1]};
      }
    }
  }
  return out;
}

double Driver::eval(const ScenarioTree& tree, int level, std::size_t node,
                    double y, double z1, double z2,
                    std::optional<double> control) const {
  (void)z2;  // affine classes act through the first rotated component only
  switch (kind) {
    case DriverKind::ConstantInYZ:
      return c ? c(tree, level, node) : 0.0;
    case DriverKind::Affine: {
      const double av = a ? a(tree, level, node) : 0.0;
      const double bv = beta1 ? beta1(tree, level, node) : 0.0;
      const double cv = c ? c(tree, level, node) : 0.0;
      return av * y + bv * z1 + cv;
    }
    case DriverKind::MaxAffine: {
      if (pieces.empty())
        throw Error(ErrorCode::Validation, "VALIDATION_DRIVER",
                    "max-affine driver has no pieces");
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& p : pieces) {
        const double cv = p.c ? p.c(tree, level, node, control) : 0.0;
        const double v = p.alpha * y + p.beta1 * z1 + cv;
        if (v > best) best = v;
      }
      return best;
    }
    case DriverKind::General:
      if (!general)
        throw Error(ErrorCode::Validation, "VALIDATION_DRIVER",
                    "general driver has no callable");
      return general(tree, level, node, y, z1, z2, control);
  }
  return 0.0;
}

Driver make_zero_driver() { return Driver{}; }

Driver make_constant_driver(
    std::function<double(const ScenarioTree&, int, std::size_t)> c) {
  Driver d;
  d.kind = DriverKind::ConstantInYZ;
  d.c = std::move(c);
  return d;
}

Driver make_affine_driver(
    std::function<double(const ScenarioTree&, int, std::size_t)> a,
    std::function<double(const ScenarioTree&, int, std::size_t)> beta1,
    std::function<double(const ScenarioTree&, int, std::size_t)> c) {
  Driver d;
  d.kind = DriverKind::Affine;
  d.a = std::move(a);
  d.beta1 = std::move(beta1);
  d.c = std::move(c);
  d.mu = 1.0;
  return d;
}

Driver make_max_affine_driver(std::vector<Driver::Piece> pieces) {
  Driver d;
  d.kind = DriverKind::MaxAffine;
  d.pieces = std::move(pieces);
  for (const auto& p : d.pieces)
    d.mu = std::max(d.mu, std::fabs(p.alpha) + std::fabs(p.beta1));
  return d;
}

namespace {

void require(bool cond, const char* tag, const std::string& what,
             ValidationReport& rep, bool report_only) {
  if (cond) return;
  rep.ok = false;
  if (rep.detail.empty()) rep.detail = what;
  if (!report_only) throw Error(ErrorCode::Validation, tag, what);
}

}  // namespace

ValidationReport validate_problem(const ReflectedProblem& problem,
                                  const ScenarioTree& tree, bool report_only) {
  ValidationReport rep;
  const int n = tree.num_steps();
  require(static_cast<bool>(problem.terminal), "VALIDATION_TERMINAL",
          "terminal payoff is missing", rep, report_only);
  require(static_cast<bool>(problem.barrier), "VALIDATION_BARRIER",
          "barrier is missing", rep, report_only);
  if (!rep.ok) return rep;

  // finite data scan
  for (int l = 0; l <= n; ++l)
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      require(std::isfinite(problem.barrier(tree, l, node)),
              "VALIDATION_BARRIER", "barrier is not finite", rep, report_only);
      if (!rep.ok) return rep;
    }
  std::vector<double> xi(tree.node_count(n));
  for (std::size_t leaf = 0; leaf < xi.size(); ++leaf) {
    xi[leaf] = problem.terminal(tree, leaf);
    require(std::isfinite(xi[leaf]), "VALIDATION_TERMINAL",
            "terminal payoff is not finite", rep, report_only);
    if (!rep.ok) return rep;
  }

  // affine coefficients must live on the constraint filtration's atoms
  if (problem.driver.kind == DriverKind::Affine &&
      problem.filtration != Filtration::Full) {
    for (int l = 0; l < n; ++l) {
      std::vector<double> seen_a(tree.atom_count(l, problem.filtration));
      std::vector<double> seen_b(seen_a.size());
      std::vector<char> init(seen_a.size(), 0);
      for (std::size_t node = 0; node < tree.node_count(l); ++node) {
        const double av =
            problem.driver.a ? problem.driver.a(tree, l, node) : 0.0;
        const double bv =
            problem.driver.beta1 ? problem.driver.beta1(tree, l, node) : 0.0;
        const std::size_t atom = tree.atom_of(l, node, problem.filtration);
        if (!init[atom]) {
          init[atom] = 1;
          seen_a[atom] = av;
          seen_b[atom] = bv;
        } else {
          require(seen_a[atom] == av && seen_b[atom] == bv,
                  "VALIDATION_DRIVER",
                  "affine coefficients vary inside an atom at level " +
                      std::to_string(l) + " node " + std::to_string(node),
                  rep, report_only);
          if (!rep.ok) return rep;
        }
      }
    }
  }

  // driver Lipschitz bound, sampled on a coarse (y, z) probe grid
  {
    const double probes[] = {-1.0, -0.25, 0.0, 0.5, 1.0};
    const int lmax = std::min(n - 1, 2);
    for (int l = 0; l <= lmax; ++l)
      for (std::size_t node = 0; node < tree.node_count(l); ++node)
        for (double y1 : probes)
          for (double y2 : probes) {
            if (y1 == y2) continue;
            const double f1 = problem.driver.eval(tree, l, node, y1, 0.3, -0.2);
            const double f2 = problem.driver.eval(tree, l, node, y2, 0.3, -0.2);
            require(std::fabs(f1 - f2) <=
                        problem.driver.mu * std::fabs(y1 - y2) + 1e-9,
                    "VALIDATION_LIPSCHITZ",
                    "driver violates its declared Lipschitz bound in y", rep,
                    report_only);
            const double g1 = problem.driver.eval(tree, l, node, 0.1, y1, y2);
            const double g2 = problem.driver.eval(tree, l, node, 0.1, y2, y2);
            require(std::fabs(g1 - g2) <=
                        problem.driver.mu * std::fabs(y1 - y2) + 1e-9,
                    "VALIDATION_LIPSCHITZ",
                    "driver violates its declared Lipschitz bound in z", rep,
                    report_only);
            if (!rep.ok) return rep;
          }
  }

  // projected terminal dominance: E[xi - S_T | atom] >= 0 for every atom
  std::vector<double> gap(xi.size());
  for (std::size_t leaf = 0; leaf < gap.size(); ++leaf)
    gap[leaf] = xi[leaf] - problem.barrier(tree, n, leaf);
  const LevelSlice slice = cond_expect(tree, gap, n, problem.filtration, n);
  rep.terminal_margins = slice.v;
  rep.terminal_margin = slice.v.empty() ? 0.0 : slice.v[0];
  std::size_t worst = 0;
  for (std::size_t a = 0; a < slice.v.size(); ++a)
    if (slice.v[a] < rep.terminal_margin) {
      rep.terminal_margin = slice.v[a];
      worst = a;
    }
  require(rep.terminal_margin >= -1e-12, "VALIDATION_TERMINAL",
          "projected terminal payoff sits below the barrier on atom " +
              std::to_string(worst) + " (margin " +
              std::to_string(rep.terminal_margin) + ")",
          rep, report_only);
  return rep;
}

void validate_grid(const ControlGrid& grid) {
  if (grid.points.empty())
    throw Error(ErrorCode::Validation, "VALIDATION_GRID", "control grid is empty");
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    if (!std::isfinite(grid.points[i]))
      throw Error(ErrorCode::Validation, "VALIDATION_GRID",
                  "control grid has a non-finite point");
    for (std::size_t j = i + 1; j < grid.points.size(); ++j)
      if (grid.points[i] == grid.points[j])
        throw Error(ErrorCode::Validation, "VALIDATION_GRID",
                    "control grid has duplicate points");
  }
}

}  // namespace crbsde
