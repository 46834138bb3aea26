#include "crbsde/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace crbsde {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw Error(ErrorCode::Validation, "VALIDATION_CONFIG",
              "config line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

double to_num(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) fail(line, "trailing characters in number '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    fail(line, "expected a number, got '" + s + "'");
  }
}

std::vector<double> to_list(const std::string& s, int line) {
  const std::string t = trim(s);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    fail(line, "expected a bracketed list, got '" + s + "'");
  std::vector<double> out;
  std::string item;
  std::istringstream is(t.substr(1, t.size() - 2));
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_num(item, line));
  }
  return out;
}

std::vector<std::string> to_name_list(const std::string& s, int line) {
  const std::string t = trim(s);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    fail(line, "expected a bracketed list, got '" + s + "'");
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(t.substr(1, t.size() - 2));
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RunConfig::Spec to_spec(const std::string& s, int line) {
  const auto w = split_ws(s);
  if (w.empty()) fail(line, "empty specification");
  RunConfig::Spec sp;
  sp.kind = w[0];
  for (std::size_t i = 1; i < w.size(); ++i)
    sp.params.push_back(to_num(w[i], line));
  return sp;
}

void check_spec(const RunConfig::Spec& sp, const char* what,
                std::initializer_list<std::pair<const char*, int>> allowed,
                int line) {
  for (const auto& [kind, nparams] : allowed)
    if (sp.kind == kind) {
      if (static_cast<int>(sp.params.size()) != nparams)
        fail(line, std::string(what) + " '" + sp.kind + "' expects " +
                       std::to_string(nparams) + " parameter(s)");
      return;
    }
  fail(line, std::string("unknown ") + what + " kind '" + sp.kind + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line = 0;
  bool saw_tree = false, saw_problem = false;
  while (std::getline(is, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = s.substr(1, s.size() - 2);
      if (section != "tree" && section != "filtration" && section != "problem" &&
          section != "state" && section != "control" && section != "run")
        fail(line, "unknown section [" + section + "]");
      if (section == "tree") saw_tree = true;
      if (section == "problem") saw_problem = true;
      if (section == "state") cfg.has_state = true;
      if (section == "control") cfg.has_control = true;
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (section.empty()) fail(line, "key outside any section");

    if (section == "tree") {
      if (key == "num_steps")
        cfg.num_steps = static_cast<int>(to_num(val, line));
      else if (key == "horizon")
        cfg.horizon = to_num(val, line);
      else if (key == "rotation_angle")
        cfg.rotation_angle = to_num(val, line);
      else
        fail(line, "unknown key '" + key + "' in [tree]");
    } else if (section == "filtration") {
      if (key != "kind") fail(line, "unknown key '" + key + "' in [filtration]");
      if (val == "full")
        cfg.filtration = Filtration::Full;
      else if (val == "partial")
        cfg.filtration = Filtration::Partial;
      else if (val == "trivial")
        cfg.filtration = Filtration::Trivial;
      else
        fail(line, "filtration kind must be full, partial, or trivial");
    } else if (section == "problem") {
      if (key == "terminal") {
        cfg.terminal = to_spec(val, line);
        check_spec(cfg.terminal, "terminal",
                   {{"constant", 1}, {"w1", 1}, {"w1w2", 1}, {"call", 1},
                    {"put", 1}},
                   line);
      } else if (key == "barrier") {
        cfg.barrier = to_spec(val, line);
        check_spec(cfg.barrier, "barrier",
                   {{"constant", 1}, {"ramp", 2}, {"w1", 1}, {"put", 1}}, line);
      } else if (key == "driver") {
        cfg.driver = to_spec(val, line);
        check_spec(cfg.driver, "driver",
                   {{"zero", 0}, {"constant", 1}, {"affine", 3},
                    {"maxaffine", 6}},
                   line);
      } else {
        fail(line, "unknown key '" + key + "' in [problem]");
      }
    } else if (section == "state") {
      if (key == "x0") {
        const auto v = to_list(val, line);
        if (v.size() != 2) fail(line, "x0 needs exactly two components");
        cfg.x0 = {v[0], v[1]};
      } else if (key == "sigma") {
        cfg.sigma = to_spec(val, line);
        check_spec(cfg.sigma, "sigma", {{"diag", 2}, {"gbm", 2}}, line);
      } else {
        fail(line, "unknown key '" + key + "' in [state]");
      }
    } else if (section == "control") {
      if (key == "alpha")
        cfg.ctrl_alpha = to_num(val, line);
      else if (key == "beta")
        cfg.ctrl_beta = to_num(val, line);
      else if (key == "g") {
        if (val != "vx1" && val != "negsq")
          fail(line, "control g must be vx1 or negsq");
        cfg.ctrl_g = val;
      } else if (key == "b") {
        if (val != "v" && val != "zero")
          fail(line, "control b must be v or zero");
        cfg.ctrl_b = val;
      } else if (key == "grid")
        cfg.ctrl_grid = to_list(val, line);
      else
        fail(line, "unknown key '" + key + "' in [control]");
    } else if (section == "run") {
      if (key == "methods") {
        cfg.methods = to_name_list(val, line);
        for (const auto& m : cfg.methods)
          if (m != "backward" && m != "picard")
            fail(line, "unknown method '" + m + "'");
        if (cfg.methods.empty()) fail(line, "methods list is empty");
      } else if (key == "scheme") {
        if (val != "implicit" && val != "explicit")
          fail(line, "scheme must be implicit or explicit");
        cfg.scheme = val;
      } else if (key == "tol")
        cfg.tol = to_num(val, line);
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(to_num(val, line));
      else if (key == "sweep_n") {
        cfg.sweep_n.clear();
        for (double v : to_list(val, line))
          cfg.sweep_n.push_back(static_cast<int>(v));
        if (cfg.sweep_n.empty()) fail(line, "sweep_n list is empty");
      } else
        fail(line, "unknown key '" + key + "' in [run]");
    }
  }
  if (!saw_tree)
    throw Error(ErrorCode::Validation, "VALIDATION_CONFIG",
                "config is missing the [tree] section");
  if (!saw_problem)
    throw Error(ErrorCode::Validation, "VALIDATION_CONFIG",
                "config is missing the [problem] section");
  const bool needs_state =
      cfg.terminal.kind == "call" || cfg.terminal.kind == "put" ||
      cfg.barrier.kind == "put" || cfg.has_control;
  if (needs_state && !cfg.has_state)
    throw Error(ErrorCode::Validation, "VALIDATION_CONFIG",
                "a state-dependent payoff or control section needs [state]");
  if (cfg.has_control && cfg.ctrl_grid.empty())
    throw Error(ErrorCode::Validation, "VALIDATION_CONFIG",
                "[control] needs a nonempty grid");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw Error(ErrorCode::Validation, "VALIDATION_CONFIG",
                "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace crbsde
