#include "crbsde/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "crbsde/control.hpp"
#include "crbsde/oracle.hpp"
#include "crbsde/stopping.hpp"

namespace crbsde {

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream f(fs::path(dir) / name, std::ios::binary);
  if (!f)
    throw Error(ErrorCode::Validation, "VALIDATION_OUTPUT",
                "cannot write to '" + dir + "/" + name + "'");
  return f;
}

Driver build_driver(const RunConfig& cfg) {
  const auto& sp = cfg.driver;
  if (sp.kind == "zero") return make_zero_driver();
  if (sp.kind == "constant") {
    const double c = sp.params[0];
    return make_constant_driver(
        [c](const ScenarioTree&, int, std::size_t) { return c; });
  }
  if (sp.kind == "affine") {
    const double a = sp.params[0], b = sp.params[1], c = sp.params[2];
    Driver d = make_affine_driver(
        [a](const ScenarioTree&, int, std::size_t) { return a; },
        [b](const ScenarioTree&, int, std::size_t) { return b; },
        [c](const ScenarioTree&, int, std::size_t) { return c; });
    d.mu = std::fabs(a) + std::fabs(b);
    return d;
  }
  // maxaffine a1 b1 c1 a2 b2 c2
  std::vector<Driver::Piece> pieces;
  for (int i = 0; i < 2; ++i) {
    Driver::Piece p;
    p.alpha = sp.params[3 * i];
    p.beta1 = sp.params[3 * i + 1];
    const double c = sp.params[3 * i + 2];
    p.c = [c](const ScenarioTree&, int, std::size_t, std::optional<double>) {
      return c;
    };
    pieces.push_back(std::move(p));
  }
  return make_max_affine_driver(std::move(pieces));
}

}  // namespace

BuiltInstance build_instance(const RunConfig& cfg, int num_steps_override) {
  const int n = num_steps_override > 0 ? num_steps_override : cfg.num_steps;
  BuiltInstance bi{ScenarioTree::build(n, cfg.horizon,
                                       Rotation::angle(cfg.rotation_angle)),
                   {}, nullptr};

  std::shared_ptr<const StatePaths> paths;
  if (cfg.has_state) {
    StateModel m;
    m.x0 = cfg.x0;
    const double s1 = cfg.sigma.params[0], s2 = cfg.sigma.params[1];
    if (cfg.sigma.kind == "diag") {
      m.diffusion = [s1, s2](double, const PathView&) {
        return Mat2{Vec2{s1, 0.0}, Vec2{0.0, s2}};
      };
    } else {  // gbm
      m.diffusion = [s1, s2](double, const PathView& pv) {
        return Mat2{Vec2{s1 * pv.back()[0], 0.0}, Vec2{0.0, s2 * pv.back()[1]}};
      };
    }
    paths = std::make_shared<StatePaths>(rollout_state(m, bi.tree));
    bi.paths = paths;
  }

  const auto& tm = cfg.terminal;
  if (tm.kind == "constant") {
    const double c = tm.params[0];
    bi.problem.terminal = [c](const ScenarioTree&, std::size_t) { return c; };
  } else if (tm.kind == "w1") {
    const double c = tm.params[0];
    bi.problem.terminal = [c](const ScenarioTree& t, std::size_t leaf) {
      return c + t.w1(t.num_steps(), leaf);
    };
  } else if (tm.kind == "w1w2") {
    const double c = tm.params[0];
    bi.problem.terminal = [c](const ScenarioTree& t, std::size_t leaf) {
      return c + t.w1(t.num_steps(), leaf) * t.w2(t.num_steps(), leaf);
    };
  } else if (tm.kind == "call") {
    const double k = tm.params[0];
    bi.problem.terminal = [k, paths](const ScenarioTree& t, std::size_t leaf) {
      return std::max(paths->x[t.num_steps()][leaf][0] - k, 0.0);
    };
  } else {  // put
    const double k = tm.params[0];
    bi.problem.terminal = [k, paths](const ScenarioTree& t, std::size_t leaf) {
      return std::max(k - paths->x[t.num_steps()][leaf][0], 0.0);
    };
  }

  const auto& br = cfg.barrier;
  if (br.kind == "constant") {
    const double c = br.params[0];
    bi.problem.barrier = [c](const ScenarioTree&, int, std::size_t) {
      return c;
    };
  } else if (br.kind == "ramp") {
    const double a = br.params[0], b = br.params[1];
    bi.problem.barrier = [a, b](const ScenarioTree& t, int l, std::size_t) {
      return a + b * t.time(l);
    };
  } else if (br.kind == "w1") {
    const double c = br.params[0];
    bi.problem.barrier = [c](const ScenarioTree& t, int l, std::size_t node) {
      return c + t.w1(l, node);
    };
  } else {  // put
    const double k = br.params[0];
    bi.problem.barrier = [k, paths](const ScenarioTree&, int l,
                                    std::size_t node) {
      return std::max(k - paths->x[l][node][0], 0.0);
    };
  }

  bi.problem.driver = build_driver(cfg);
  bi.problem.filtration = cfg.filtration;
  return bi;
}

namespace {

void write_solution_csv(std::ofstream f, const ScenarioTree& tree,
                        const ReflectedProblem& problem,
                        const SolutionTriple& sol) {
  f << "time_index,node_id,g_atom_id,Y,Z1,Z2,K,constraint_gap\n";
  const int n = tree.num_steps();
  for (int l = 0; l <= n; ++l) {
    std::vector<double> gap(tree.node_count(l));
    for (std::size_t node = 0; node < gap.size(); ++node)
      gap[node] = sol.y.at(l, node) - problem.barrier(tree, l, node);
    const LevelSlice slice = cond_expect(tree, gap, l, problem.filtration, l);
    for (std::size_t node = 0; node < tree.node_count(l); ++node) {
      const std::size_t atom = tree.atom_of(l, node, problem.filtration);
      f << l << ',' << node << ',' << atom << ','
        << csv_double(sol.y.at(l, node)) << ','
        << csv_double(l < n ? sol.z1.at(l, node) : 0.0) << ','
        << csv_double(l < n ? sol.z2.at(l, node) : 0.0) << ','
        << csv_double(sol.k.at(l, atom)) << ',' << csv_double(slice.v[atom])
        << '\n';
    }
  }
}

void write_diag_csv(std::ofstream f, const Diagnostics& d, double krep) {
  f << "key,value\n";
  f << "worst_constraint_gap," << csv_double(d.worst_constraint_gap) << '\n';
  f << "flatness_defect," << csv_double(d.flatness_defect) << '\n';
  f << "max_step_residual," << csv_double(d.max_step_residual) << '\n';
  f << "picard_iterations," << d.picard_iterations << '\n';
  f << "last_picard_ratio," << csv_double(d.last_picard_ratio) << '\n';
  f << "k_representation," << csv_double(krep) << '\n';
}

void run_control_section(const RunConfig& cfg, const BuiltInstance& bi,
                         const std::string& out_dir) {
  LinearBrrProblem p;
  p.state.x0 = cfg.x0;
  const double s1 = cfg.sigma.params[0], s2 = cfg.sigma.params[1];
  if (cfg.sigma.kind == "diag")
    p.state.diffusion = [s1, s2](double, const PathView&) {
      return Mat2{Vec2{s1, 0.0}, Vec2{0.0, s2}};
    };
  else
    p.state.diffusion = [s1, s2](double, const PathView& pv) {
      return Mat2{Vec2{s1 * pv.back()[0], 0.0}, Vec2{0.0, s2 * pv.back()[1]}};
    };
  const double al = cfg.ctrl_alpha, be = cfg.ctrl_beta;
  p.alpha = [al](int, std::size_t) { return al; };
  p.beta = [be](int, std::size_t) { return be; };
  if (cfg.ctrl_g == "vx1")
    p.g = [](double, const Vec2& x, double v) { return v * x[0] - 0.5 * v * v; };
  else
    p.g = [](double, const Vec2&, double v) { return -v * v; };
  if (cfg.ctrl_b == "v")
    p.b = [](double, const Vec2&, double v) { return v; };
  else
    p.b = [](double, const Vec2&, double) { return 0.0; };
  const auto& tree = bi.tree;
  // reuse the configured problem's payoffs as h and phi on the state
  p.h = [&cfg](double t, const Vec2& x) {
    if (cfg.barrier.kind == "put")
      return std::max(cfg.barrier.params[0] - x[0], 0.0);
    if (cfg.barrier.kind == "ramp")
      return cfg.barrier.params[0] + cfg.barrier.params[1] * t;
    return cfg.barrier.params[0];
  };
  p.phi = [&cfg](const Vec2& x) {
    if (cfg.terminal.kind == "call")
      return std::max(x[0] - cfg.terminal.params[0], 0.0);
    if (cfg.terminal.kind == "put")
      return std::max(cfg.terminal.params[0] - x[0], 0.0);
    return cfg.terminal.params[0];
  };
  p.mu = std::fabs(al) + std::fabs(be) + 1.0;
  ControlGrid grid{cfg.ctrl_grid};

  const LinearBrrResult res = solve_linear_brr(p, tree, grid);
  std::ofstream f = open_out(out_dir, "control_values.csv");
  f << "method,num_steps,grid_size,value,oracle_value,abs_gap\n";
  double oracle_val = std::nan("");
  std::string oracle_str = "nan", gap_str = "nan";
  const std::size_t budget = 200000;
  try {
    const auto bf = oracle::brute_force_controls(p, tree, grid, budget);
    oracle_val = bf.value;
    oracle_str = csv_double(oracle_val);
    gap_str = csv_double(std::fabs(res.value - oracle_val));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Guard) throw;
  }
  f << "linear_filtered," << tree.num_steps() << ',' << grid.points.size()
    << ',' << csv_double(res.value) << ',' << oracle_str << ',' << gap_str
    << '\n';

  std::ofstream ff = open_out(out_dir, "feedback.csv");
  ff << "time_index,g_atom_id,control\n";
  for (int l = 0; l < tree.num_steps(); ++l)
    for (std::size_t a = 0; a < res.feedback[l].size(); ++a)
      ff << l << ',' << a << ',' << csv_double(res.feedback[l][a]) << '\n';
}

}  // namespace

RunOutcome run_command(const RunConfig& cfg, const std::string& command,
                       const std::string& out_dir) {
  if (command != "solve" && command != "oracle" && command != "compare" &&
      command != "sweep")
    throw Error(ErrorCode::Validation, "VALIDATION_COMMAND",
                "unknown command '" + command + "'");

  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome out;

  if (command == "sweep") {
    std::ofstream f = open_out(out_dir, "sweep.csv");
    f << "num_steps,dt,value0,k_representation,max_step_residual\n";
    for (int n : cfg.sweep_n) {
      const BuiltInstance bi = build_instance(cfg, n);
      const SolutionTriple sol = solve_backward(
          bi.problem, bi.tree,
          cfg.scheme == "explicit" ? Scheme::Explicit : Scheme::ImplicitY);
      const double krep = k_representation_check(sol, bi.problem, bi.tree);
      f << n << ',' << csv_double(bi.tree.dt()) << ','
        << csv_double(sol.y.at(0, 0)) << ',' << csv_double(krep) << ','
        << csv_double(sol.diag.max_step_residual) << '\n';
      out.value0 = sol.y.at(0, 0);
      out.diag = sol.diag;
    }
  } else {
    const BuiltInstance bi = build_instance(cfg);
    const Scheme scheme =
        cfg.scheme == "explicit" ? Scheme::Explicit : Scheme::ImplicitY;

    SolutionTriple sol;
    bool have_sol = false;
    if (command == "solve" || command == "compare") {
      for (const auto& m : cfg.methods) {
        if (m == "backward")
          sol = solve_backward(bi.problem, bi.tree, scheme);
        else
          sol = solve_picard(bi.problem, bi.tree, cfg.tol);
        have_sol = true;
      }
    }
    if (!have_sol) sol = solve_backward(bi.problem, bi.tree, scheme);
    out.value0 = sol.y.at(0, 0);
    out.diag = sol.diag;
    const double krep = k_representation_check(sol, bi.problem, bi.tree);

    if (command == "solve" || command == "compare") {
      write_solution_csv(open_out(out_dir, "solution.csv"), bi.tree, bi.problem,
                         sol);
      write_diag_csv(open_out(out_dir, "diagnostics.csv"), sol.diag, krep);
      if (cfg.has_control) run_control_section(cfg, bi, out_dir);
    }
    if (command == "oracle" || command == "compare") {
      std::ofstream f = open_out(out_dir, "compare.csv");
      f << "method,value0,reference,abs_gap\n";
      const auto ref = oracle::direct_fixed_point(bi.problem, bi.tree);
      f << "backward," << csv_double(out.value0) << ','
        << csv_double(ref.y[0][0]) << ','
        << csv_double(std::fabs(out.value0 - ref.y[0][0])) << '\n';
      if (bi.problem.filtration == Filtration::Full) {
        const double cls =
            oracle::classical_pointwise_values(bi.problem, bi.tree)[0][0];
        f << "classical_pointwise," << csv_double(out.value0) << ','
          << csv_double(cls) << ',' << csv_double(std::fabs(out.value0 - cls))
          << '\n';
      }
      if (bi.problem.driver.kind != DriverKind::General) {
        try {
          const auto bf = oracle::brute_force_stopping(bi.problem, bi.tree, 20000);
          const auto snell =
              snell_value(bi.problem, bi.tree, /*allow_general=*/false);
          f << "snell_vs_enumeration," << csv_double(snell[0].v[0]) << ','
            << csv_double(bf[0][0]) << ','
            << csv_double(std::fabs(snell[0].v[0] - bf[0][0])) << '\n';
        } catch (const Error& e) {
          // skip the row when enumeration is too large or the identity
          // does not apply to this generator/filtration pair
          if (e.code() != ErrorCode::Guard && e.code() != ErrorCode::Validation)
            throw;
        }
      }
    }
  }

  const auto t1 = std::chrono::steady_clock::now();
  std::ofstream s = open_out(out_dir, "summary.txt");
  s << "command: " << command << '\n';
  s << "value0: " << csv_double(out.value0) << '\n';
  s << "worst_constraint_gap: " << csv_double(out.diag.worst_constraint_gap)
    << '\n';
  s << "flatness_defect: " << csv_double(out.diag.flatness_defect) << '\n';
  s << "max_step_residual: " << csv_double(out.diag.max_step_residual) << '\n';
  s << "seed: " << cfg.seed << '\n';
  s << "threads: " << default_threads() << '\n';
  s << "wall_ms: "
    << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
    << '\n';
  return out;
}

}  // namespace crbsde
