// Command-line front end. Talks to the solver library exclusively through
// the C interface, so it doubles as a smoke test of that boundary.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "crbsde.h"

namespace {

int fail_from(crb_session* s, int status) {
  std::fprintf(stderr, "error[%s]: %s\n", crb_last_error_tag(s),
               crb_last_error(s));
  crb_session_destroy(s);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree solver for reflected backward equations with "
               "conditional constraints"};
  app.set_version_flag("--version", crb_version());

  std::string config, out = "out";
  int threads = 1;
  unsigned long long seed = 0;
  bool seed_set = false;
  app.add_option("--config", config, "configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory for reports");
  app.add_option("--threads", threads, "worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "override the seed from the config")
      ->each([&seed_set](const std::string&) { seed_set = true; });

  std::string command;
  for (const char* name : {"solve", "oracle", "compare", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&command, name] { command = name; });
  }
  app.require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  crb_session* s = crb_session_create();
  if (!s) {
    std::fprintf(stderr, "error[API_MISUSE]: out of memory\n");
    return 1;
  }

  int rc = crb_set_threads(s, threads);
  if (rc == 0) rc = crb_load_config_file(s, config.c_str());
  if (rc == 0 && seed_set) rc = crb_set_seed(s, seed);
  if (rc == 0) rc = crb_run(s, command.c_str(), out.c_str());
  if (rc != 0) return fail_from(s, rc);

  double v0 = 0.0;
  crb_value0(s, &v0);
  std::printf("value0 %.17g\n", v0);
  for (const char* key : {"worst_constraint_gap", "flatness_defect",
                          "max_step_residual"}) {
    double d = 0.0;
    if (crb_diagnostic(s, key, &d) == 0) std::printf("%s %.17g\n", key, d);
  }
  crb_session_destroy(s);
  return 0;
}
