#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "crbsde/tree.hpp"

namespace crbsde {

struct StatePaths {
  // x[level][node], level 0..N
  std::vector<std::vector<Vec2>> x;
};

// Read-only view of one state path up to (level, node).
class PathView {
 public:
  PathView(const ScenarioTree& tree, const StatePaths& paths, int level,
           std::size_t node)
      : tree_(&tree), paths_(&paths), level_(level), node_(node) {}

  int level() const { return level_; }
  double time() const { return tree_->time(level_); }
  const Vec2& back() const { return paths_->x[level_][node_]; }
  const Vec2& at(int l) const {
    return paths_->x[l][tree_->ancestor(level_, node_, l)];
  }
  // Running maximum of the first state component, a path functional.
  double running_max1() const {
    double m = at(0)[0];
    for (int l = 1; l <= level_; ++l) m = m > at(l)[0] ? m : at(l)[0];
    return m;
  }

 private:
  const ScenarioTree* tree_;
  const StatePaths* paths_;
  int level_;
  std::size_t node_;
};

// Controlled SDE data: dX = b dt + sigma dW (original-frame increments).
struct StateModel {
  Vec2 x0{0.0, 0.0};
  // Null drift means 0. Drift may depend on the whole path so far.
  std::function<Vec2(double t, const PathView&, std::optional<double> control)>
      drift;
  std::function<Mat2(double t, const PathView&)> diffusion;
  double drift_bound = 1e6;
  double diffusion_bound = 1e6;
  double condition_cap = 1e12;  // for sigma^{-1}
};

// Euler rollout on the tree. `control` (optional) supplies the control fed to
// the drift at each (level, node).
StatePaths rollout_state(
    const StateModel& model, const ScenarioTree& tree,
    const std::function<double(int level, std::size_t node)>& control = nullptr);

enum class DriverKind { ConstantInYZ, Affine, MaxAffine, General };

// Generator f(t, omega, y, z, v). z enters through the rotated frame; affine
// classes act on the first rotated component only.
struct Driver {
  DriverKind kind = DriverKind::ConstantInYZ;
  double mu = 0.0;  // declared Lipschitz constant in (y, z)

  // ConstantInYZ / Affine intercept, any measurability. Null means 0.
  std::function<double(const ScenarioTree&, int level, std::size_t node)> c;
  // Affine coefficients; must be constant on the atoms of the problem
  // filtration (checked by validate_problem). Null means 0.
  std::function<double(const ScenarioTree&, int level, std::size_t node)> a;
  std::function<double(const ScenarioTree&, int level, std::size_t node)> beta1;

  struct Piece {
    double alpha = 0.0;
    double beta1 = 0.0;
    std::function<double(const ScenarioTree&, int level, std::size_t node,
                         std::optional<double> control)>
        c;  // null means 0
  };
  std::vector<Piece> pieces;  // MaxAffine

  std::function<double(const ScenarioTree&, int level, std::size_t node,
                       double y, double z1, double z2,
                       std::optional<double> control)>
      general;

  bool controlled = false;

  double eval(const ScenarioTree& tree, int level, std::size_t node, double y,
              double z1, double z2,
              std::optional<double> control = std::nullopt) const;
};

// Convenience constructors.
Driver make_zero_driver();
Driver make_constant_driver(
    std::function<double(const ScenarioTree&, int, std::size_t)> c);
Driver make_affine_driver(
    std::function<double(const ScenarioTree&, int, std::size_t)> a,
    std::function<double(const ScenarioTree&, int, std::size_t)> beta1,
    std::function<double(const ScenarioTree&, int, std::size_t)> c);
Driver make_max_affine_driver(std::vector<Driver::Piece> pieces);

// Obstacle problem data: terminal payoff xi per leaf, generator f, lower
// barrier S per (level, node), and the filtration the constraint is
// projected onto.
struct ReflectedProblem {
  std::function<double(const ScenarioTree&, std::size_t leaf)> terminal;
  Driver driver;
  std::function<double(const ScenarioTree&, int level, std::size_t node)> barrier;
  Filtration filtration = Filtration::Full;
};

struct ValidationReport {
  bool ok = true;
  // min over terminal atoms of E[xi - S_T | atom]
  double terminal_margin = 0.0;
  std::vector<double> terminal_margins;  // per atom at the last level
  std::string detail;
};

// Checks the standing assumptions: finite data, Lipschitz generator bound
// consistent with its declared class, affine coefficients constant on atoms,
// and the terminal-vs-barrier projected margin being nonnegative. Throws
// Error(Validation) on failure unless report_only.
ValidationReport validate_problem(const ReflectedProblem& problem,
                                  const ScenarioTree& tree,
                                  bool report_only = false);

// Finite control set; points are scanned in index order and argmax ties are
// broken toward the lowest index.
struct ControlGrid {
  std::vector<double> points;
};
void validate_grid(const ControlGrid& grid);

}  // namespace crbsde
