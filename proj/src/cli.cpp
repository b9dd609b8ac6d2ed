#include "tdelay/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "tdelay/error.hpp"
#include "tdelay/format.hpp"
#include "tdelay/oracle.hpp"
#include "tdelay/problem_file.hpp"
#include "tdelay/report.hpp"

namespace tdelay::cli {
namespace {

using report::Json;

struct Flags {
  std::string file;
  std::optional<std::string> mesh;
  std::optional<double> penalty_start;
  std::optional<double> penalty_growth;
  std::optional<int> stages;
  std::optional<double> inner_tol;
  std::optional<double> outer_tol;
  std::optional<std::uint64_t> seed;
  std::string report_path;
  std::string trajectory_path;
  std::string input_path;
  std::string residual_csv_path;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("file", f.file, "problem file (JSON)")->required();
  cmd->add_option("--mesh", f.mesh, "target step h (number or rational such as 1/40)");
  cmd->add_option("--penalty-start", f.penalty_start, "first penalty weight c_0");
  cmd->add_option("--penalty-growth", f.penalty_growth, "growth factor of c_n");
  cmd->add_option("--stages", f.stages, "number of penalty stages");
  cmd->add_option("--inner-tol", f.inner_tol, "gradient tolerance of the inner solves");
  cmd->add_option("--outer-tol", f.outer_tol, "dynamics residual tolerance of the outer loop");
  cmd->add_option("--report", f.report_path, "write the JSON report here");
  cmd->add_option("--trajectory", f.trajectory_path, "write the trajectory CSV here");
  cmd->add_option("--seed", f.seed, "seed for randomized checks");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ProblemFile load(const Flags& f) {
  ProblemFile pf = parse_problem_file(f.file);
  if (f.mesh) {
    try {
      pf.h_target = Rational::parse(*f.mesh);
    } catch (const Error&) {
      throw validation_error("--mesh", "must be an exact rational (e.g. 1/40 or 0.025)");
    }
  }
  if (f.penalty_start) pf.penalty.c_start = *f.penalty_start;
  if (f.penalty_growth) pf.penalty.growth = *f.penalty_growth;
  if (f.stages) pf.penalty.stages = *f.stages;
  if (f.outer_tol) pf.penalty.dyn_residual_tol = *f.outer_tol;
  if (f.inner_tol) {
    pf.penalty.inner.grad_tol = *f.inner_tol;
    pf.inner.grad_tol = *f.inner_tol;
  }
  if (f.seed) pf.seed = *f.seed;
  pf.grid();
  if (pf.kind == ProblemKind::control) pf.penalty.validate();
  pf.inner.validate();
  return pf;
}

Json header(const char* command, const ProblemFile& pf) {
  Json j;
  j["tool"] = "tdelay";
  j["command"] = command;
  j["kind"] = to_string(pf.kind);
  j["timestamp"] = utc_timestamp();
  j["seed"] = pf.seed;
  j["grid"] = report::grid_json(pf.grid());
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "IoError: cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "IoError: write to '" + path + "' failed");
}

void emit(const Flags& f, const Json& doc) {
  if (!f.report_path.empty()) write_file(f.report_path, report::dump(doc));
}

Json pins_json(const PinCheck& p) {
  Json j;
  j["history_exact"] = p.history;
  j["terminal_exact"] = p.terminal;
  j["control_origin_zero"] = p.control_origin;
  return j;
}

int solve_control(const Flags& f, const ProblemFile& pf, std::ostream& out) {
  const ControlProblem prob = pf.control();
  Json doc = header("solve", pf);
  PenaltyReport rep = [&] {
    try {
      return solve_control_problem(prob, pf.penalty);
    } catch (const InnerSolveFailure& e) {
      doc["error"] = e.what();
      doc["penalty"] = report::to_json(e.partial());
      emit(f, doc);
      throw Error(ErrorCode::InnerSolveFailure, std::string("InnerSolveFailure: ") + e.what());
    }
  }();
  const PinCheck pins = check_pins(rep.final_trajectory, prob.history, prob.alpha, &rep.final_control);
  doc["penalty"] = report::to_json(rep);
  doc["pins"] = pins_json(pins);
  emit(f, doc);
  if (!f.trajectory_path.empty()) {
    std::ostringstream csv;
    write_trajectory_csv(csv, rep.final_trajectory, &rep.final_control);
    write_file(f.trajectory_path, csv.str());
  }
  const StageDiagnostics& last = rep.stages.back();
  out << "solve control: " << (rep.converged ? "converged" : "not converged") << " stages=" << rep.stages.size()
      << " cost=" << fmt17(last.cost_value) << " dyn_residual=" << fmt17(last.dyn_residual_norm) << "\n";
  return rep.converged ? ok : not_converged;
}

int solve_variational(const Flags& f, const ProblemFile& pf, std::ostream& out) {
  const VariationalProblem prob = pf.variational();
  Trajectory traj = prob.initial(InitMode::linear);
  const Objective obj = variational_objective(prob, traj);
  const MinimizeResult res = minimize(obj, traj.free_values(), pf.inner);
  traj.set_free_values(res.x);
  const ELResidual el = el_residual(prob, traj);
  const PinCheck pins = check_pins(traj, prob.history, prob.alpha);

  Json doc = header("solve", pf);
  doc["functional"] = functional_value(prob, traj);
  doc["inner"] = report::to_json(res.report);
  doc["el_residual"] = report::to_json(el, prob.grid);
  doc["pins"] = pins_json(pins);
  emit(f, doc);
  if (!f.trajectory_path.empty()) {
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_file(f.trajectory_path, csv.str());
  }
  out << "solve variational: " << (res.report.converged ? "converged" : "not converged")
      << " iterations=" << res.report.iterations << " J=" << fmt17(res.report.final_value)
      << " grad_norm=" << fmt17(res.report.final_grad_norm) << "\n";
  return res.report.converged ? ok : not_converged;
}

// Gradient vs central differences at a seeded random point, plus directional
// derivatives along random directions.
struct GradCheck {
  double max_rel_error = 0.0;
  double max_directional_error = 0.0;
  int coordinates = 0;
};

GradCheck check_objective(const Objective& obj, const Eigen::VectorXd& base, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z = base;
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) += 0.1 * normal(rng);
  Eigen::VectorXd g;
  obj.value_and_gradient(z, g);
  const Eigen::VectorXd fd = oracle::fd_gradient(obj.value, z, 1e-6);
  GradCheck out;
  out.coordinates = static_cast<int>(z.size());
  out.max_rel_error = oracle::relative_gradient_error(g, fd);
  for (int d = 0; d < 20; ++d) {
    Eigen::VectorXd v(z.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = normal(rng);
    const double eps = 1e-6;
    const double num = (obj.value(z + eps * v) - obj.value(z - eps * v)) / (2.0 * eps);
    const double ana = g.dot(v);
    out.max_directional_error =
        std::max(out.max_directional_error, std::abs(num - ana) / std::max(std::abs(num), 1e-3 * g.norm() * v.norm()));
  }
  return out;
}

int check(const Flags& f, const ProblemFile& pf, std::ostream& out) {
  Json doc = header("check", pf);
  doc["valid"] = true;
  GradCheck gc;
  if (pf.kind == ProblemKind::variational) {
    const VariationalProblem prob = pf.variational();
    const Trajectory traj = prob.initial(InitMode::linear);
    gc = check_objective(variational_objective(prob, traj), traj.free_values(), pf.seed);
    doc["fd_partials"] = prob.lagrangian.uses_fd_partials();
  } else {
    const ControlProblem prob = pf.control();
    const Trajectory traj = Trajectory::init(prob.grid, prob.history, prob.alpha, InitMode::linear);
    const ControlPath u = ControlPath::zero(prob.grid, prob.control_dim());
    gc = check_objective(penalized_objective(prob, pf.penalty.c_start, traj), pack_decision(traj, u), pf.seed);
    doc["c_n"] = pf.penalty.c_start;
  }
  const bool pass = gc.max_rel_error <= 1e-5 && gc.max_directional_error <= 1e-5;
  doc["gradient_check"] = {{"coordinates", gc.coordinates},
                           {"max_relative_error", gc.max_rel_error},
                           {"max_directional_error", gc.max_directional_error},
                           {"tolerance", 1e-5},
                           {"pass", pass}};
  emit(f, doc);
  out << "check: " << (pass ? "ok" : "gradient mismatch") << " max_relative_error=" << fmt17(gc.max_rel_error)
      << " max_directional_error=" << fmt17(gc.max_directional_error) << "\n";
  return pass ? ok : not_converged;
}

int run_oracle(const Flags& f, const ProblemFile& pf, std::ostream& out) {
  Json doc = header("oracle", pf);
  if (pf.kind == ProblemKind::control) {
    const ControlProblem prob = pf.control();
    const oracle::KKTSolution sol = oracle::lq_direct_solve(prob);
    ControlPath u = ControlPath::zero(prob.grid, prob.control_dim());
    for (int i = 1; i < prob.grid.n_main(); ++i) u.set_value(i, sol.u.col(i));
    const Eigen::MatrixXd mos = oracle::integrate_mos(prob.A, prob.B, u, prob.history, prob.grid);
    doc["kkt"] = report::to_json(sol);
    doc["mos_terminal_gap"] = (mos.col(prob.grid.n_nodes() - 1) - prob.alpha).norm();
    emit(f, doc);
    if (!f.trajectory_path.empty()) {
      const Trajectory traj = Trajectory::init(prob.grid, prob.history, prob.alpha, InitMode::custom, &sol.x);
      std::ostringstream csv;
      write_trajectory_csv(csv, traj, &u);
      write_file(f.trajectory_path, csv.str());
    }
    out << "oracle control: objective=" << fmt17(sol.objective) << " kkt_residual=" << fmt17(sol.residual) << "\n";
    return ok;
  }
  const LagrangianChoice& lc = pf.lagrangian;
  const int n = pf.state_dim;
  QuadraticLagrangianWeights w;
  if (lc.name == "quadratic") {
    w = lc.quadratic;
  } else if (lc.name == "kinetic") {
    w.a = w.a_delay = w.b_delay = Eigen::MatrixXd::Zero(n, n);
    w.b = lc.kinetic_weight * Eigen::MatrixXd::Identity(n, n);
    w = w.normalized();
  } else {
    throw Error(ErrorCode::InvalidArgument, "the variational oracle needs a quadratic or kinetic Lagrangian");
  }
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  W.block(0, 0, n, n) = 2.0 * w.a;
  W.block(n, n, n, n) = 2.0 * w.a_delay;
  W.block(2 * n, 2 * n, n, n) = 2.0 * w.b;
  W.block(3 * n, 3 * n, n, n) = 2.0 * w.b_delay;
  Eigen::VectorXd lin(4 * n);
  lin << w.lin_a, w.lin_a_delay, w.lin_b, w.lin_b_delay;
  const DelayGrid grid = pf.grid();
  const auto sol = oracle::quadratic_variational_solve(grid, W, lin, pf.history, pf.alpha);
  doc["objective"] = sol.objective;
  emit(f, doc);
  if (!f.trajectory_path.empty()) {
    const Trajectory traj = Trajectory::init(grid, pf.history, pf.alpha, InitMode::custom, &sol.x);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_file(f.trajectory_path, csv.str());
  }
  out << "oracle variational: objective=" << fmt17(sol.objective) << "\n";
  return ok;
}

int residual(const Flags& f, const ProblemFile& pf, std::ostream& out) {
  if (pf.kind != ProblemKind::variational) {
    throw Error(ErrorCode::InvalidArgument, "residual applies to variational problems");
  }
  const VariationalProblem prob = pf.variational();
  std::ifstream in(f.input_path);
  if (!in) throw Error(ErrorCode::IoError, "IoError: cannot open trajectory '" + f.input_path + "'");
  const Trajectory traj = read_trajectory_csv(in, prob.grid, prob.history, prob.alpha);
  const ELResidual el = el_residual(prob, traj);
  Json doc = header("residual", pf);
  doc["functional"] = functional_value(prob, traj);
  doc["el_residual"] = report::to_json(el, prob.grid);
  emit(f, doc);
  if (!f.residual_csv_path.empty()) {
    std::ostringstream csv;
    write_el_residual_csv(csv, el);
    write_file(f.residual_csv_path, csv.str());
  }
  out << "residual: regime norms " << fmt17(el.regimes[0].norm) << " " << fmt17(el.regimes[1].norm) << " "
      << fmt17(el.regimes[2].norm) << "\n";
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Solver for variational and optimal-control problems with a state delay and a derivative delay"};
  app.name("tdelay");
  app.require_subcommand(1);
  Flags f;
  CLI::App* solve = app.add_subcommand("solve", "penalty or variational solve, per the file kind");
  CLI::App* chk = app.add_subcommand("check", "validate the file and check gradients against finite differences");
  CLI::App* orc = app.add_subcommand("oracle", "direct KKT / method-of-steps reference solution");
  CLI::App* res = app.add_subcommand("residual", "Euler-Lagrange residual of a trajectory CSV");
  for (CLI::App* cmd : {solve, chk, orc, res}) add_common(cmd, f);
  res->add_option("--input", f.input_path, "trajectory CSV to evaluate")->required();
  res->add_option("--residual-csv", f.residual_csv_path, "write per-node residuals here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : error;
  }
  try {
    const ProblemFile pf = load(f);
    if (solve->parsed()) {
      return pf.kind == ProblemKind::control ? solve_control(f, pf, out) : solve_variational(f, pf, out);
    }
    if (chk->parsed()) return check(f, pf, out);
    if (orc->parsed()) return run_oracle(f, pf, out);
    return residual(f, pf, out);
  } catch (const Error& e) {
    err << "tdelay: " << to_string(e.code()) << ": " << e.what() << "\n";
    return error;
  } catch (const std::exception& e) {
    err << "tdelay: " << e.what() << "\n";
    return error;
  }
}

}  // namespace tdelay::cli
