#include "crbsde.h"

#include <cstring>
#include <optional>
#include <string>

#include "crbsde/runner.hpp"

struct crb_session {
  std::optional<crbsde::RunConfig> cfg;
  bool have_result = false;
  crbsde::RunOutcome result;
  std::string err, tag;
};

namespace {

// Every entry point funnels through here so exceptions never cross the ABI.
template <class Fn>
int guarded(crb_session* s, Fn&& fn) {
  if (!s) return 1;
  s->err.clear();
  s->tag.clear();
  try {
    return fn();
  } catch (const crbsde::Error& e) {
    s->err = e.what();
    s->tag = e.tag();
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    s->err = e.what();
    s->tag = "NUMERICAL_INTERNAL";
    return 4;
  }
}

int misuse(crb_session* s, const char* msg) {
  s->err = msg;
  s->tag = "API_MISUSE";
  return 1;
}

}  // namespace

extern "C" {

const char* crb_version(void) { return "1.0.0"; }

crb_session* crb_session_create(void) { return new (std::nothrow) crb_session; }

void crb_session_destroy(crb_session* s) { delete s; }

int crb_load_config_file(crb_session* s, const char* path) {
  return guarded(s, [&] {
    if (!path) return misuse(s, "null path");
    s->cfg = crbsde::parse_config_file(path);
    s->have_result = false;
    return 0;
  });
}

int crb_load_config_text(crb_session* s, const char* text) {
  return guarded(s, [&] {
    if (!text) return misuse(s, "null config text");
    s->cfg = crbsde::parse_config(text);
    s->have_result = false;
    return 0;
  });
}

int crb_set_threads(crb_session* s, int threads) {
  return guarded(s, [&] {
    if (threads < 1) return misuse(s, "threads must be >= 1");
    crbsde::set_default_threads(threads);
    return 0;
  });
}

int crb_set_seed(crb_session* s, unsigned long long seed) {
  return guarded(s, [&] {
    if (!s->cfg) return misuse(s, "no config loaded");
    s->cfg->seed = seed;
    return 0;
  });
}

int crb_run(crb_session* s, const char* command, const char* out_dir) {
  return guarded(s, [&] {
    if (!command || !out_dir) return misuse(s, "null command or out_dir");
    if (!s->cfg) return misuse(s, "no config loaded");
    s->result = crbsde::run_command(*s->cfg, command, out_dir);
    s->have_result = true;
    return 0;
  });
}

int crb_value0(const crb_session* s, double* out) {
  if (!s || !out) return 1;
  if (!s->have_result) return 1;
  *out = s->result.value0;
  return 0;
}

int crb_diagnostic(const crb_session* s, const char* key, double* out) {
  if (!s || !key || !out || !s->have_result) return 1;
  const crbsde::Diagnostics& d = s->result.diag;
  if (!std::strcmp(key, "worst_constraint_gap"))
    *out = d.worst_constraint_gap;
  else if (!std::strcmp(key, "flatness_defect"))
    *out = d.flatness_defect;
  else if (!std::strcmp(key, "max_step_residual"))
    *out = d.max_step_residual;
  else if (!std::strcmp(key, "picard_iterations"))
    *out = static_cast<double>(d.picard_iterations);
  else if (!std::strcmp(key, "last_picard_ratio"))
    *out = d.last_picard_ratio;
  else
    return 1;
  return 0;
}

const char* crb_last_error(const crb_session* s) {
  return s ? s->err.c_str() : "";
}

const char* crb_last_error_tag(const crb_session* s) {
  return s ? s->tag.c_str() : "";
}

}  // extern "C"
