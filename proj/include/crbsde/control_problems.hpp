#pragma once

#include <memory>

#include "crbsde/model.hpp"

namespace crbsde {

// Partial-information problem with a linear-in-(y, z1) generator:
//   driver  alpha y + beta z1 + g(t, xhat, v),
//   drift tilt through the first rotated component: b(t, xhat, v),
// where xhat is the projected state E[X_t | atom] of the driftless rollout.
// Barrier h(t, X_t) and terminal phi(X_T) act on the unprojected state.
struct LinearBrrProblem {
  StateModel state;  // driftless: state.drift is ignored here
  std::function<double(int level, std::size_t atom)> alpha;  // null -> 0
  std::function<double(int level, std::size_t atom)> beta;   // null -> 0
  std::function<double(double t, const Vec2& xhat, double v)> g;
  std::function<double(double t, const Vec2& xhat, double v)> b;
  std::function<double(double t, const Vec2& x)> h;
  std::function<double(const Vec2& xT)> phi;
  double mu = 1.0;
};

// Same information pattern with a max-affine generator
//   f(t, xhat, y, z1, v) = max_i { alpha_i y + beta_i z1 + c_i(t, xhat, v) }.
struct ConvexBrrProblem {
  StateModel state;
  struct Piece {
    double alpha = 0.0;
    double beta = 0.0;
    std::function<double(double t, const Vec2& xhat, double v)> c;
  };
  std::vector<Piece> pieces;
  std::function<double(double t, const Vec2& xhat, double v)> b;  // null -> 0
  std::function<double(double t, const Vec2& x)> h;
  std::function<double(const Vec2& xT)> phi;
  double mu = 1.0;
};

// Full-information problem; drift b and generator f may be path dependent,
// z is taken in the original (unrotated) frame.
struct StrongBrrProblem {
  StateModel state;  // diffusion must be invertible (condition_cap)
  std::function<Vec2(double t, const PathView&, double v)> b;
  std::function<double(double t, const PathView&, double y, const Vec2& z,
                       double v)>
      f;
  std::function<double(double t, const PathView&)> h;
  std::function<double(const PathView&)> phi;
  double mu = 1.0;
};

// Two-player version; u minimizes, v maximizes.
struct ZeroSumProblem {
  StateModel state;
  std::function<Vec2(double t, const PathView&, double u, double v)> b;
  std::function<double(double t, const PathView&, double y, const Vec2& z,
                       double u, double v)>
      f;
  std::function<double(double t, const PathView&)> h;
  std::function<double(const PathView&)> phi;
  double mu = 1.0;
};

// Per-atom control process on the partial filtration: control[level][atom].
using AtomControl = std::vector<std::vector<double>>;
// Per-node control process on the full filtration.
using NodeControl = std::vector<std::vector<double>>;

struct WeakInstance {
  ReflectedProblem problem;
  Measure measure;
  std::shared_ptr<const StatePaths> paths;
  // E[X_t | atom] components per (level, atom) of the partial filtration
  std::shared_ptr<const std::vector<std::vector<Vec2>>> xhat;
};

// Projected state of a driftless rollout on the partial filtration.
std::vector<std::vector<Vec2>> filter_state(const ScenarioTree& tree,
                                            const StatePaths& paths);

// Builds the tilted obstacle instance a fixed control induces.
WeakInstance make_weak_instance(const LinearBrrProblem& p,
                                const ScenarioTree& tree,
                                const AtomControl& control);
WeakInstance make_weak_instance(const ConvexBrrProblem& p,
                                const ScenarioTree& tree,
                                const AtomControl& control);
WeakInstance make_weak_instance(const StrongBrrProblem& p,
                                const ScenarioTree& tree,
                                const NodeControl& control);
WeakInstance make_weak_instance(const ZeroSumProblem& p, const ScenarioTree& tree,
                                const NodeControl& u, const NodeControl& v);

}  // namespace crbsde
