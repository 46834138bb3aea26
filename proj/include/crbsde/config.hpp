#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crbsde/tree.hpp"

namespace crbsde {

// Line-oriented key = value configuration with [section] headers and
// bracketed numeric lists. Unknown sections or keys are rejected.
//
//   [tree]
//   num_steps = 2
//   horizon = 1.0
//   rotation_angle = 0.0        # radians
//
//   [filtration]
//   kind = partial              # full | partial | trivial
//
//   [problem]
//   terminal = w1 0.5           # constant c | w1 c | w1w2 c | call k | put k
//   barrier = constant 0.0      # constant c | ramp a b | w1 c | put k
//   driver = affine 0.2 0.1 0.0 # zero | constant c | affine a b c |
//                               # maxaffine a1 b1 c1 a2 b2 c2
//
//   [state]                     # optional; needed by call/put payoffs
//   x0 = [1.0, 1.0]
//   sigma = diag 0.2 0.3        # diag s1 s2 | gbm s1 s2
//
//   [control]                   # optional; partial-information linear flavor
//   alpha = 0.1
//   beta = 0.05
//   g = vx1                     # vx1 (v * xhat1 - v^2/2) | negsq (-v^2)
//   b = v                      # v | zero
//   grid = [-1.0, 0.0, 1.0]
//
//   [run]
//   methods = [backward, picard]
//   scheme = implicit           # implicit | explicit
//   tol = 1e-12
//   seed = 42
//   sweep_n = [2, 4, 8]
struct RunConfig {
  int num_steps = 1;
  double horizon = 1.0;
  double rotation_angle = 0.0;
  Filtration filtration = Filtration::Partial;

  struct Spec {
    std::string kind;
    std::vector<double> params;
  };
  Spec terminal{"constant", {0.0}};
  Spec barrier{"constant", {-1e9}};
  Spec driver{"zero", {}};

  bool has_state = false;
  Vec2 x0{1.0, 1.0};
  Spec sigma{"diag", {0.2, 0.3}};

  bool has_control = false;
  double ctrl_alpha = 0.0, ctrl_beta = 0.0;
  std::string ctrl_g = "vx1", ctrl_b = "v";
  std::vector<double> ctrl_grid;

  std::vector<std::string> methods{"backward"};
  std::string scheme = "implicit";
  double tol = 1e-12;
  std::uint64_t seed = 0;
  std::vector<int> sweep_n{2, 4, 8};
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

}  // namespace crbsde
