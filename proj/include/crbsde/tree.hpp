#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "crbsde/common.hpp"

namespace crbsde {

// Which sub-filtration conditional expectations project onto.
//   Full:    every node is its own atom (full information).
//   Partial: atoms are classes of equal first-component sign paths.
//   Trivial: one atom per level (deterministic projections).
enum class Filtration { Full, Partial, Trivial };

// 2x2 orthogonal rotation applied to the driving noise. The partially
// observed component is the first coordinate of the rotated pair.
struct Rotation {
  Mat2 m{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};

  static Rotation identity() { return Rotation{}; }
  static Rotation angle(double radians);
  // max |U U^T - I| entrywise
  double orthogonality_defect() const;
};

// Non-recombining 4-ary tree over two +/-1 Bernoulli noise components per
// step. Level i has 4^i nodes; a node id is the base-4 word of its step
// codes, most significant digit first. Step code c in {0,1,2,3} encodes
// (eps1, eps2) in the order (++, +-, -+, --).
class ScenarioTree {
 public:
  static ScenarioTree build(int num_steps, double horizon,
                            Rotation rot = Rotation::identity());

  int num_steps() const { return num_steps_; }
  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  double sqrt_dt() const { return sqrt_dt_; }
  double time(int level) const { return dt_ * level; }
  const Rotation& rotation() const { return rot_; }

  std::size_t node_count(int level) const { return std::size_t{1} << (2 * level); }
  std::size_t atom_count(int level, Filtration g) const;
  // Atom index of a node at `level` under `g`.
  std::size_t atom_of(int level, std::size_t node, Filtration g) const;
  // Ancestor of a level-`level` node at `at_level` <= level.
  std::size_t ancestor(int level, std::size_t node, int at_level) const {
    return node >> (2 * (level - at_level));
  }
  std::size_t child(std::size_t node, int code) const { return 4 * node + code; }
  std::size_t parent(std::size_t node) const { return node >> 2; }
  // Step code taken between `step` and `step`+1 on the path to `node` at `level`.
  int step_code(int level, std::size_t node, int step) const {
    return static_cast<int>((node >> (2 * (level - 1 - step))) & 3u);
  }

  static int eps1(int code) { return code < 2 ? 1 : -1; }
  static int eps2(int code) { return (code & 1) == 0 ? 1 : -1; }

  // Rotated-frame increment of component k in {0,1} for a step code.
  double inc_rot(int k, int code) const {
    return (k == 0 ? eps1(code) : eps2(code)) * sqrt_dt_;
  }
  // Original-frame increment pair: U^T applied to the rotated increments.
  Vec2 inc_orig(int code) const;

  // Rotated first-component path sum up to `level` (a discrete Brownian value).
  double w1(int level, std::size_t node) const;
  double w2(int level, std::size_t node) const;

  double base_node_weight(int level) const;

 private:
  int num_steps_ = 0;
  double horizon_ = 0.0, dt_ = 0.0, sqrt_dt_ = 0.0;
  Rotation rot_;
};

// Scalar process adapted to the tree; values stored per (level, atom) for a
// declared measurability, so coarser processes are constant on atoms by
// construction.
class AdaptedProcess {
 public:
  AdaptedProcess() = default;
  AdaptedProcess(const ScenarioTree& tree, Filtration meas, int last_level);

  Filtration measurability() const { return meas_; }
  int last_level() const { return static_cast<int>(v_.size()) - 1; }

  double& at(int level, std::size_t atom) { return v_[level][atom]; }
  double at(int level, std::size_t atom) const { return v_[level][atom]; }
  std::vector<double>& level(int l) { return v_[l]; }
  const std::vector<double>& level(int l) const { return v_[l]; }

  // Value seen from a full-resolution node.
  double value(const ScenarioTree& tree, int level, std::size_t node) const {
    return v_[level][tree.atom_of(level, node, meas_)];
  }

 private:
  Filtration meas_ = Filtration::Full;
  std::vector<std::vector<double>> v_;
};

// One level of a projected process: one value per atom of `meas` at `level`.
struct LevelSlice {
  int level = 0;
  Filtration meas = Filtration::Full;
  std::vector<double> v;

  double value(const ScenarioTree& tree, std::size_t node) const {
    return v[tree.atom_of(level, node, meas)];
  }
};

// Branching measure on the tree. The base measure gives each of the four
// children probability 1/4; a tilted measure has per-node conditional
// component means m_k = theta_k * sqrt(dt), |m_k| < 1.
class Measure {
 public:
  static Measure base() { return Measure{}; }

  bool is_base() const { return m1_.empty(); }
  bool is_g_tilt() const { return g_tilt_; }
  double m1(int level, std::size_t node) const {
    return is_base() ? 0.0 : m1_[level][node];
  }
  double m2(int level, std::size_t node) const {
    return is_base() ? 0.0 : m2_[level][node];
  }
  double branch_prob(int level, std::size_t node, int code) const {
    return 0.25 * (1.0 + ScenarioTree::eps1(code) * m1(level, node)) *
           (1.0 + ScenarioTree::eps2(code) * m2(level, node));
  }
  // Node weights at `level` (products of branch probabilities from the root).
  std::vector<double> node_weights(const ScenarioTree& tree, int level) const;
  // Weight of every leaf at the last level.
  std::vector<double> leaf_weights(const ScenarioTree& tree) const {
    return node_weights(tree, tree.num_steps());
  }

 private:
  friend Measure tilt_measure(const ScenarioTree&, const AdaptedProcess&,
                              const AdaptedProcess*);
  std::vector<std::vector<double>> m1_, m2_;
  bool g_tilt_ = false;  // theta1 Partial/Trivial-measurable and theta2 == 0
};

// Exponential-tilt analogue: branch probabilities (1 + eps_k theta_k sqrt(dt))/2
// per component. Guard: |theta_k| sqrt(dt) < 1 at every node.
// theta2 == nullptr means no tilt in the second component.
Measure tilt_measure(const ScenarioTree& tree, const AdaptedProcess& theta1,
                     const AdaptedProcess* theta2 = nullptr);

// Conditional expectation of a level-j quantity onto the atoms of `g` at
// level i <= j, under `mu`. `x` supplies values at level j.
LevelSlice cond_expect(const ScenarioTree& tree, const AdaptedProcess& x, int j,
                       Filtration g, int i, const Measure& mu = Measure::base());
// Same, with raw per-node values at level j.
LevelSlice cond_expect(const ScenarioTree& tree, const std::vector<double>& xj,
                       int j, Filtration g, int i,
                       const Measure& mu = Measure::base());

// One-step orthogonal decomposition of four child values:
//   x_c = mean + z1 sqrt(dt) c1 + z2 sqrt(dt) c2 + residual dt c1 c2,
// where c_k = eps_k - m_k are the centered component signs. The residual
// channel is never fed to drivers.
struct StepCoeffs {
  double mean = 0.0, z1 = 0.0, z2 = 0.0, residual = 0.0;
};
StepCoeffs martingale_coefficients(const ScenarioTree& tree,
                                   const double children[4], double m1 = 0.0,
                                   double m2 = 0.0);

}  // namespace crbsde
