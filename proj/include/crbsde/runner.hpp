#pragma once

#include <memory>

#include "crbsde/config.hpp"
#include "crbsde/crbsde.hpp"

namespace crbsde {

struct RunOutcome {
  double value0 = 0.0;
  Diagnostics diag;
};

// Executes one CLI command ("solve", "oracle", "compare", "sweep") against a
// parsed configuration, writing CSV reports and a summary into out_dir.
// Throws Error on any failure; the caller maps codes to exit status.
RunOutcome run_command(const RunConfig& cfg, const std::string& command,
                       const std::string& out_dir);

// Assembled problem instance for a configuration (exposed for tests).
struct BuiltInstance {
  ScenarioTree tree;
  ReflectedProblem problem;
  std::shared_ptr<const StatePaths> paths;  // null without [state]
};
BuiltInstance build_instance(const RunConfig& cfg, int num_steps_override = -1);

// Fixed-format float used by every CSV writer: shortest 17-significant-digit
// representation, locale independent.
std::string csv_double(double v);

}  // namespace crbsde
