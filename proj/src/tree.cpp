#include "crbsde/tree.hpp"

#include <cmath>

namespace crbsde {

Rotation Rotation::angle(double radians) {
  Rotation r;
  const double c = std::cos(radians), s = std::sin(radians);
  r.m = {Vec2{c, s}, Vec2{-s, c}};
  return r;
}

double Rotation::orthogonality_defect() const {
  const Mat2 p = mat_mul(m, mat_transpose(m));
  double d = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      d = std::max(d, std::fabs(p[i][j] - (i == j ? 1.0 : 0.0)));
  return d;
}

ScenarioTree ScenarioTree::build(int num_steps, double horizon, Rotation rot) {
  if (num_steps < 1 || num_steps > 15)
    throw Error(ErrorCode::Validation, "VALIDATION_TREE",
                "num_steps must be in [1, 15], got " + std::to_string(num_steps));
  if (!(horizon > 0.0))
    throw Error(ErrorCode::Validation, "VALIDATION_TREE", "horizon must be > 0");
  if (rot.orthogonality_defect() > 1e-12)
    throw Error(ErrorCode::Validation, "VALIDATION_ROTATION",
                "rotation matrix is not orthogonal (defect=" +
                    std::to_string(rot.orthogonality_defect()) + ")");
  ScenarioTree t;
  t.num_steps_ = num_steps;
  t.horizon_ = horizon;
  t.dt_ = horizon / num_steps;
  t.sqrt_dt_ = std::sqrt(t.dt_);
  t.rot_ = rot;
  return t;
}

std::size_t ScenarioTree::atom_count(int level, Filtration g) const {
  switch (g) {
    case Filtration::Full: return node_count(level);
    case Filtration::Partial: return std::size_t{1} << level;
    case Filtration::Trivial: return 1;
  }
  return 1;
}

std::size_t ScenarioTree::atom_of(int level, std::size_t node, Filtration g) const {
  switch (g) {
    case Filtration::Full: return node;
    case Filtration::Partial: {
      // keep the eps1 bit (code>>1) of every step, MSB first
      std::size_t a = 0;
      for (int s = 0; s < level; ++s)
        a = (a << 1) | ((node >> (2 * (level - 1 - s) + 1)) & 1u);
      return a;
    }
    case Filtration::Trivial: return 0;
  }
  return 0;
}

Vec2 ScenarioTree::inc_orig(int code) const {
  // W = U^T W~, so the original increments are U^T times the rotated pair.
  const Vec2 wt{inc_rot(0, code), inc_rot(1, code)};
  return mat_vec(mat_transpose(rot_.m), wt);
}

double ScenarioTree::w1(int level, std::size_t node) const {
  double s = 0.0;
  for (int i = 0; i < level; ++i) s += inc_rot(0, step_code(level, node, i));
  return s;
}

double ScenarioTree::w2(int level, std::size_t node) const {
  double s = 0.0;
  for (int i = 0; i < level; ++i) s += inc_rot(1, step_code(level, node, i));
  return s;
}

double ScenarioTree::base_node_weight(int level) const {
  return std::ldexp(1.0, -2 * level);
}

AdaptedProcess::AdaptedProcess(const ScenarioTree& tree, Filtration meas,
                               int last_level)
    : meas_(meas) {
  v_.resize(last_level + 1);
  for (int l = 0; l <= last_level; ++l) v_[l].assign(tree.atom_count(l, meas), 0.0);
}

std::vector<double> Measure::node_weights(const ScenarioTree& tree,
                                          int level) const {
  std::vector<double> w{1.0};
  for (int l = 0; l < level; ++l) {
    std::vector<double> nw(tree.node_count(l + 1));
    for (std::size_t n = 0; n < w.size(); ++n)
      for (int c = 0; c < 4; ++c) nw[4 * n + c] = w[n] * branch_prob(l, n, c);
    w.swap(nw);
  }
  return w;
}

Measure tilt_measure(const ScenarioTree& tree, const AdaptedProcess& theta1,
                     const AdaptedProcess* theta2) {
  Measure mu;
  const int n = tree.num_steps();
  mu.m1_.resize(n);
  mu.m2_.resize(n);
  mu.g_tilt_ = theta2 == nullptr && theta1.measurability() != Filtration::Full;
  for (int l = 0; l < n; ++l) {
    const std::size_t cnt = tree.node_count(l);
    mu.m1_[l].resize(cnt);
    mu.m2_[l].resize(cnt);
    for (std::size_t node = 0; node < cnt; ++node) {
      const double t1 = theta1.value(tree, l, node);
      const double t2 = theta2 ? theta2->value(tree, l, node) : 0.0;
      const double m1 = t1 * tree.sqrt_dt(), m2 = t2 * tree.sqrt_dt();
      if (std::fabs(m1) >= 1.0 || std::fabs(m2) >= 1.0)
        throw Error(ErrorCode::Guard, "GUARD_TILT",
                    "|theta| sqrt(dt) >= 1 at level " + std::to_string(l) +
                        " node " + std::to_string(node) +
                        "; refine the time grid or shrink the drift");
      mu.m1_[l][node] = m1;
      mu.m2_[l][node] = m2;
    }
  }
  return mu;
}

LevelSlice cond_expect(const ScenarioTree& tree, const std::vector<double>& xj,
                       int j, Filtration g, int i, const Measure& mu) {
  if (i < 0 || j > tree.num_steps() || i > j)
    throw Error(ErrorCode::Validation, "VALIDATION_LEVELS",
                "cond_expect needs 0 <= i <= j <= num_steps");
  std::vector<double> vals = xj;  // E[x | F_l] as l decreases
  for (int l = j - 1; l >= i; --l) {
    std::vector<double> nv(tree.node_count(l));
    parallel_for(nv.size(), default_threads(), [&](std::size_t b, std::size_t e) {
      for (std::size_t n = b; n < e; ++n) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c)
          s += mu.branch_prob(l, n, c) * vals[4 * n + c];
        nv[n] = s;
      }
    });
    vals.swap(nv);
  }
  LevelSlice out;
  out.level = i;
  out.meas = g;
  const std::size_t atoms = tree.atom_count(i, g);
  out.v.assign(atoms, 0.0);
  if (g == Filtration::Full) {
    out.v = vals;
    return out;
  }
  const std::vector<double> w = mu.node_weights(tree, i);
  std::vector<std::vector<double>> num(atoms), den(atoms);
  for (std::size_t n = 0; n < vals.size(); ++n) {
    const std::size_t a = tree.atom_of(i, n, g);
    num[a].push_back(w[n] * vals[n]);
    den[a].push_back(w[n]);
  }
  for (std::size_t a = 0; a < atoms; ++a) {
    const double d = pairwise_sum(den[a]);
    if (d <= 0.0)
      throw Error(ErrorCode::Numerical, "NUMERICAL_WEIGHT",
                  "atom has nonpositive probability");
    out.v[a] = pairwise_sum(num[a]) / d;
  }
  return out;
}

LevelSlice cond_expect(const ScenarioTree& tree, const AdaptedProcess& x, int j,
                       Filtration g, int i, const Measure& mu) {
  std::vector<double> xj(tree.node_count(j));
  for (std::size_t n = 0; n < xj.size(); ++n) xj[n] = x.value(tree, j, n);
  return cond_expect(tree, xj, j, g, i, mu);
}

StepCoeffs martingale_coefficients(const ScenarioTree& tree,
                                   const double children[4], double m1,
                                   double m2) {
  StepCoeffs sc;
  const double v1 = 1.0 - m1 * m1, v2 = 1.0 - m2 * m2;
  double ez1 = 0.0, ez2 = 0.0, er = 0.0;
  for (int c = 0; c < 4; ++c) {
    const double p = 0.25 * (1.0 + ScenarioTree::eps1(c) * m1) *
                     (1.0 + ScenarioTree::eps2(c) * m2);
    const double c1 = ScenarioTree::eps1(c) - m1;
    const double c2 = ScenarioTree::eps2(c) - m2;
    sc.mean += p * children[c];
    ez1 += p * children[c] * c1;
    ez2 += p * children[c] * c2;
    er += p * children[c] * c1 * c2;
  }
  sc.z1 = ez1 / (tree.sqrt_dt() * v1);
  sc.z2 = ez2 / (tree.sqrt_dt() * v2);
  sc.residual = er / (tree.dt() * v1 * v2);
  return sc;
}

}  // namespace crbsde
