// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../helpers.hpp"
#include "tdelay/cli.hpp"
#include "tdelay/format.hpp"
#include "tdelay/oracle.hpp"
#include "tdelay/problem_file.hpp"
#include "tdelay/report.hpp"

using namespace tdelay;
using test::vec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::vector<PinCheck> pin_log;  // every solve's pins, checked by criterion 7

void report_line(int id, const char* title, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

HistorySpec random_affine_history(std::mt19937_64& rng, int n, const DelayGrid& grid) {
  return HistorySpec::affine(test::random_matrix(rng, n, 1), test::random_matrix(rng, n, 1, 0.5),
                             grid.tau1().to_double(), grid.tau2().to_double());
}

Trajectory minimize_variational(const VariationalProblem& prob, const InnerOptions& opts, InitMode init,
                                InnerReport* rep = nullptr) {
  Trajectory traj = prob.initial(init);
  const MinimizeResult res = minimize(variational_objective(prob, traj), traj.free_values(), opts);
  traj.set_free_values(res.x);
  if (rep) *rep = res.report;
  pin_log.push_back(check_pins(traj, prob.history, prob.alpha));
  return traj;
}

// 1. Analytic gradient vs central differences on random delayed quadratics.
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const int n = 1 + k % 3;
    const DelayGrid grid = DelayGrid::build(Rational(1), Rational(1, 2), Rational(1, 4), Rational(1, 100));
    const auto q = test::random_quadratic(rng, n);
    const VariationalProblem prob{grid, quadratic_lagrangian(q.W, q.w), random_affine_history(rng, n, grid),
                                  test::random_matrix(rng, n, 1)};
    Trajectory traj = prob.initial(InitMode::linear);
    traj.set_free_values(traj.free_values() + test::random_matrix(rng, traj.n_free(), 1, 0.3));
    const Eigen::VectorXd g =
        gradient(prob, traj).values.middleCols(grid.n_history() + 1, grid.n_main() - 2).reshaped();
    const Eigen::VectorXd fd = oracle::fd_gradient(variational_objective(prob, traj).value, traj.free_values(), 1e-6);
    worst = std::max(worst, oracle::relative_gradient_error(g, fd));
  }
  const double secs = elapsed_since(t0);
  return {worst <= 1e-5 && secs < 10.0,
          "max relative error " + sci(worst) + " (tol 1e-5), 10 problems, N<=3, 101 main nodes, " + sci(secs) +
              " s (limit 10 s)"};
}

// 2. L = x'^2 between x(0) = 0 and x(1) = 1 gives the straight line.
Outcome classical_reduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const DelayGrid grid = DelayGrid::build(Rational(1), Rational(1, 2), Rational(1, 4), Rational(1, 20));
  QuadraticLagrangianWeights w;
  w.a = w.a_delay = w.b_delay = Eigen::MatrixXd::Zero(1, 1);
  w.b = Eigen::MatrixXd::Identity(1, 1);
  const VariationalProblem prob{grid, quadratic_lagrangian(w), HistorySpec::constant(vec({0.0}), 0.5, 0.25),
                                vec({1.0})};
  InnerOptions opts;
  opts.grad_tol = 1e-12;
  opts.bb_warm_start = true;
  InnerReport rep;
  const Trajectory traj = minimize_variational(prob, opts, InitMode::zero, &rep);
  double node_err = 0.0;
  for (int i = 0; i < grid.n_main(); ++i) {
    node_err = std::max(node_err, std::abs(traj.values()(0, grid.global_index(i)) - grid.main_time(i)));
  }
  const ELResidual el = el_residual(prob, traj);
  double el_max = 0.0;
  for (const auto& r : el.regimes) el_max = std::max(el_max, r.norm);
  const double secs = elapsed_since(t0);
  return {rep.converged && node_err <= 1e-6 && el_max <= 1e-8 && secs < 1.0,
          "max node error " + sci(node_err) + " (tol 1e-6), max regime EL norm " + sci(el_max) + " (tol 1e-8), " +
              std::to_string(rep.iterations) + " iterations, " + sci(secs) + " s (limit 1 s)"};
}

// 3. EL residual norms shrink under refinement; regimes split at T - tau1, T - tau2.
Outcome theorem1_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  QuadraticLagrangianWeights w;
  w.a = w.a_delay = w.b = w.b_delay = Eigen::MatrixXd::Identity(1, 1);
  InnerOptions opts;
  opts.direction = Direction::lbfgs;
  opts.grad_tol = 1e-12;
  opts.max_iters = 200000;
  std::array<double, 3> norms[2];
  bool split_ok = true;
  bool converged = true;
  const Rational hs[2] = {Rational(1, 32), Rational(1, 64)};
  for (int k = 0; k < 2; ++k) {
    const DelayGrid grid = DelayGrid::build(Rational(1), Rational(1, 2), Rational(1, 4), hs[k]);
    const VariationalProblem prob{grid, quadratic_lagrangian(w), HistorySpec::constant(vec({1.0}), 0.5, 0.25),
                                  vec({0.0})};
    InnerReport rep;
    const Trajectory traj = minimize_variational(prob, opts, InitMode::linear, &rep);
    converged = converged && rep.converged;
    const ELResidual el = el_residual(prob, traj);
    for (int r = 0; r < 3; ++r) norms[k][r] = el.regimes[r].norm;
    auto time_of = [&](int main) { return grid.exact_time(grid.global_index(main)); };
    split_ok = split_ok && time_of(el.regimes[0].last) == grid.horizon() - grid.tau1() &&
               time_of(el.regimes[1].last) == grid.horizon() - grid.tau2() &&
               el.regimes[1].first == el.regimes[0].last + 1 && el.regimes[2].first == el.regimes[1].last + 1 &&
               el.regimes[0].first == 0 && el.regimes[2].last == grid.last_main();
  }
  bool ratios_ok = true;
  std::string detail = "ratios";
  for (int r = 0; r < 3; ++r) {
    const double ratio = norms[1][r] / norms[0][r];
    ratios_ok = ratios_ok && ratio <= 0.75;
    detail += " " + sci(ratio);
  }
  const double secs = elapsed_since(t0);
  detail += " (tol 0.75, h=1/32 -> 1/64), regime split exact: " + std::string(split_ok ? "yes" : "no") +
            ", inner converged: " + (converged ? "yes" : "no") + ", " + sci(secs) + " s (limit 30 s)";
  return {ratios_ok && split_ok && converged && secs < 30.0, detail};
}

struct PenaltyRun {
  PenaltyReport report;
  oracle::KKTSolution kkt;
  double seconds = 0.0;
};

const PenaltyRun& lq_penalty_run() {
  static const PenaltyRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const DelayGrid grid = DelayGrid::build(Rational(2), Rational(1, 2), Rational(1, 4), Rational(1, 20));
    const ControlProblem prob = test::lq_instance(grid);
    PenaltyConfig cfg;
    cfg.c_start = 10.0;
    cfg.growth = 10.0;
    cfg.stages = 4;
    cfg.early_stop = false;
    PenaltyRun r{solve_control_problem(prob, cfg), oracle::lq_direct_solve(prob), 0.0};
    r.seconds = elapsed_since(t0);
    pin_log.push_back(check_pins(r.report.final_trajectory, prob.history, prob.alpha, &r.report.final_control));
    return r;
  }();
  return run;
}

// 4. Dynamics residual falls stage by stage and the cost approaches the KKT value.
Outcome penalty_convergence() {
  const PenaltyRun& run = lq_penalty_run();
  const auto& st = run.report.stages;
  bool decreasing = st.size() == 4;
  std::string dyn = "dyn residuals";
  for (std::size_t k = 0; k < st.size(); ++k) {
    dyn += " " + sci(st[k].dyn_residual_norm);
    if (k > 0) decreasing = decreasing && st[k].dyn_residual_norm < st[k - 1].dyn_residual_norm;
  }
  const double final_dyn = st.back().dyn_residual_norm;
  const double rel = std::abs(st.back().cost_value - run.kkt.objective) / std::abs(run.kkt.objective);
  return {decreasing && final_dyn <= 1e-3 && rel <= 0.01 && run.seconds < 60.0,
          dyn + " (strictly decreasing: " + (decreasing ? "yes" : "no") + ", final tol 1e-3), cost " +
              fmt17(st.back().cost_value) + " vs KKT " + fmt17(run.kkt.objective) + ", rel diff " + sci(rel) +
              " (tol 1%), " + sci(run.seconds) + " s (limit 60 s)"};
}

// 5. Stationarity gap and the uniform bound on phi at every stage.
Outcome proposition3_diagnostics() {
  const auto& st = lq_penalty_run().report.stages;
  bool ok = !st.empty();
  std::string gaps = "gaps";
  for (const auto& s : st) {
    ok = ok && s.inner.converged && s.stationarity_gap <= 1e-4;
    gaps += " " + sci(s.stationarity_gap) + (s.inner.converged ? "" : "(inner not converged)");
  }
  const double growth = st.back().phi_sup_norm / st.front().phi_sup_norm;
  ok = ok && growth < 10.0;
  return {ok, gaps + " (tol 1e-4), phi sup norm " + sci(st.front().phi_sup_norm) + " -> " +
                  sci(st.back().phi_sup_norm) + ", growth " + sci(growth) + " (limit 10)"};
}

double mos_error(double h_den, double upto) {
  const double a = -0.8;
  const DelayGrid grid = DelayGrid::build(Rational(3, 2), Rational(1, 2), Rational(1, 4), Rational(1, static_cast<long>(h_den)));
  const HistorySpec hist = HistorySpec::constant(vec({1.0}), 0.5, 0.25);
  const Eigen::MatrixXd x = oracle::integrate_mos(Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Ones(1, 1),
                                                  ControlPath::zero(grid, 1), hist, grid);
  const double tau = 0.5;
  auto exact = [&](double t) {
    if (t <= tau) return 1.0 + a * t;
    const double x1 = 1.0 + a * tau;
    if (t <= 2 * tau) return x1 + a * (t - tau) + a * a * (t - tau) * (t - tau) / 2.0;
    const double x2 = x1 + a * tau + a * a * tau * tau / 2.0;
    const double s = t - 2 * tau;
    return x2 + a * (1.0 + a * tau) * s + a * a * s * s / 2.0 + a * a * a * s * s * s / 6.0;
  };
  double err = 0.0;
  for (int i = 0; i < grid.n_main(); ++i) {
    const double t = grid.main_time(i);
    if (t <= upto + 1e-12) err = std::max(err, std::abs(x(0, grid.global_index(i)) - exact(t)));
  }
  return err;
}

// 6. Integrator order and KKT residual of the direct solve.
Outcome oracle_self_consistency() {
  // On [0, 2 tau1] the delayed term is at most linear, so the trapezoid rule
  // reproduces the symbolic solution up to roundoff; the bound err <= h^2 is
  // checked there, and the order study runs over [0, 3 tau1] where the
  // integrand becomes quadratic and the error is measurable.
  const double dens[3] = {20, 40, 80};
  bool bound_ok = true;
  std::string bound = "err on [0,2tau1]";
  for (double d : dens) {
    const double e = mos_error(d, 1.0);
    bound_ok = bound_ok && e <= 1.0 / (d * d);
    bound += " " + sci(e);
  }
  bool order_ok = true;
  std::string order = "order study on [0,3tau1]: factors";
  for (int k = 0; k + 1 < 3; ++k) {
    const double f = mos_error(dens[k], 1.5) / mos_error(dens[k + 1], 1.5);
    order_ok = order_ok && f >= 3.0;
    order += " " + sci(f);
  }

  std::mt19937_64 rng(77);
  double worst = 0.0;
  const long dens_kkt[4] = {20, 25, 40, 50};
  for (int k = 0; k < 20; ++k) {
    const int n = 1 + k % 3;
    const int m = 1 + (k / 3) % 2;
    const DelayGrid grid = DelayGrid::build(Rational(2), Rational(1, 2), Rational(1, 4), Rational(1, dens_kkt[k % 4]));
    QuadraticCostSpec spec;
    const Eigen::MatrixXd gq = test::random_matrix(rng, n, n);
    const Eigen::MatrixXd gs = test::random_matrix(rng, n, n);
    spec.Q = gq * gq.transpose();
    spec.S = gs * gs.transpose();
    spec.R = test::random_spd(rng, m, 0.5);
    spec.q = test::random_matrix(rng, n, 1);
    spec.s = test::random_matrix(rng, n, 1);
    spec.r = test::random_matrix(rng, m, 1);
    spec = spec.normalized();
    const ControlProblem prob{grid,
                              test::random_matrix(rng, n, n, 0.5),
                              test::random_matrix(rng, n, m),
                              spec.to_running_cost(),
                              random_affine_history(rng, n, grid),
                              test::random_matrix(rng, n, 1),
                              spec};
    worst = std::max(worst, oracle::lq_direct_solve(prob).residual);
  }
  const bool kkt_ok = worst <= 1e-8;
  return {bound_ok && order_ok && kkt_ok, bound + " (bound h^2), " + order + " (min 3), max KKT residual " +
                                              sci(worst) + " over 20 instances (tol 1e-8)"};
}

// 7. Pins after every solve run above, plus a CLI solve, compared bitwise.
Outcome feasibility_pins() {
  lq_penalty_run();
  bool ok = !pin_log.empty();
  for (const auto& p : pin_log) ok = ok && p.all();
  return {ok, std::to_string(pin_log.size()) + " solves: history, x(T) = alpha and u(0) = 0 " +
                  (ok ? "bitwise exact" : "VIOLATED")};
}

std::string json_rational(std::mt19937_64& rng, const Rational& r) {
  // Mix the accepted spellings: rational string, decimal string, number.
  switch (rng() % 3) {
    case 0:
      return "\"" + r.to_string() + "\"";
    case 1:
      return fmt17(r.to_double());
    default:
      return "\"" + fmt17(r.to_double()) + "\"";
  }
}

std::string json_matrix(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    s += r ? ", [" : "[";
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += (c ? ", " : "") + fmt17(m(r, c));
    s += "]";
  }
  return s + "]";
}

std::string json_vector(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt17(v(k));
  return s + "]";
}

// A random, valid problem file in the looser input spellings.
std::string generate_problem(std::mt19937_64& rng) {
  const bool control = rng() % 2 == 0;
  const int n = 1 + static_cast<int>(rng() % 3);
  const int m = 1 + static_cast<int>(rng() % 2);
  const long q = 1 + static_cast<long>(rng() % 4);  // tau2 = q/8, tau1 = (q + 1 + r)/8, T > tau1
  const long tau1_num = q + 1 + static_cast<long>(rng() % 3);
  const Rational tau2(q, 8), tau1(tau1_num, 8), horizon(tau1_num + 1 + static_cast<long>(rng() % 8), 8);
  std::ostringstream s;
  s << "{\n  \"kind\": \"" << (control ? "control" : "variational") << "\",\n";
  s << "  \"state_dim\": " << n << ",\n";
  if (control) s << "  \"control_dim\": " << m << ",\n";
  s << "  \"horizon\": " << json_rational(rng, horizon) << ",\n";
  s << "  \"tau1\": " << json_rational(rng, tau1) << ",\n";
  s << "  \"tau2\": " << json_rational(rng, tau2) << ",\n";
  if (rng() % 2) s << "  \"mesh\": {\"h_target\": " << json_rational(rng, Rational(1, 10 + static_cast<long>(rng() % 30))) << "},\n";
  if (rng() % 2) {
    s << "  \"history\": {\"constant\": " << json_vector(test::random_matrix(rng, n, 1)) << "},\n";
  } else {
    // theta1 split into two pieces at its midpoint, theta2 a single quadratic.
    const double a = -tau1.to_double(), b = -tau2.to_double(), mid = 0.5 * (a + b);
    s << "  \"history\": {\"theta1\": [{\"interval\": [" << fmt17(a) << ", " << fmt17(mid)
      << "], \"coefficients\": " << json_matrix(test::random_matrix(rng, n, 2)) << "}, {\"interval\": ["
      << fmt17(mid) << ", " << fmt17(b) << "], \"coefficients\": " << json_matrix(test::random_matrix(rng, n, 1))
      << "}], \"theta2\": [{\"interval\": [" << fmt17(b) << ", 0], \"coefficients\": "
      << json_matrix(test::random_matrix(rng, n, 3)) << "}]},\n";
  }
  s << "  \"alpha\": " << json_vector(test::random_matrix(rng, n, 1)) << ",\n";
  if (control) {
    s << "  \"dynamics\": {\"A\": " << json_matrix(test::random_matrix(rng, n, n)) << ", \"B\": "
      << json_matrix(test::random_matrix(rng, n, m)) << "},\n";
    const Eigen::MatrixXd g = test::random_matrix(rng, n, n);
    s << "  \"cost\": {\"Q\": " << json_matrix(g * g.transpose()) << ", \"R\": "
      << json_matrix(test::random_spd(rng, m, 1.0)) << (rng() % 2 ? ", \"rho\": 0.5" : "") << "},\n";
    if (rng() % 2) s << "  \"penalty\": {\"c_start\": 5, \"stages\": " << 1 + rng() % 6 << ", \"early_stop\": false},\n";
  } else {
    const char* names[] = {"quadratic", "zero", "constant", "kinetic", "anharmonic"};
    const std::string name = names[rng() % 5];
    s << "  \"lagrangian\": {\"name\": \"" << name << "\"";
    if (name == "quadratic") {
      s << ", \"params\": {\"a\": " << json_matrix(test::random_spd(rng, n, 0.1)) << ", \"b\": "
        << json_matrix(test::random_spd(rng, n, 1.0)) << ", \"lin_a\": " << json_vector(test::random_matrix(rng, n, 1))
        << "}";
    } else if (name == "constant") {
      s << ", \"params\": {\"value\": " << fmt17(test::random_matrix(rng, 1, 1)(0, 0)) << "}";
    } else if (name == "anharmonic") {
      s << ", \"params\": {\"quartic\": 0.5, \"forcing\": 0.25}";
    }
    s << "},\n";
  }
  if (rng() % 2) s << "  \"inner\": {\"grad_tol\": 1e-9, \"direction\": \"" << (rng() % 2 ? "lbfgs" : "steepest") << "\"},\n";
  s << "  \"seed\": " << rng() % 1000 << "\n}\n";
  return s.str();
}

std::string strip_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 8. Round trip on generated files; byte-identical CLI reports for equal inputs.
Outcome cli_determinism() {
  std::mt19937_64 rng(8);
  int fixpoints = 0;
  std::string first_failure;
  for (int k = 0; k < 100; ++k) {
    const std::string text = generate_problem(rng);
    try {
      const ProblemFile p1 = parse_problem_text(text);
      const std::string s1 = serialize_problem(p1);
      const ProblemFile p2 = parse_problem_text(s1);
      if (p1 == p2 && serialize_problem(p2) == s1) {
        ++fixpoints;
      } else if (first_failure.empty()) {
        first_failure = "file " + std::to_string(k) + " not a fixpoint";
      }
    } catch (const std::exception& e) {
      if (first_failure.empty()) first_failure = "file " + std::to_string(k) + ": " + e.what();
    }
  }

  const auto dir = std::filesystem::temp_directory_path() / "tdelay_acceptance";
  std::filesystem::create_directories(dir);
  const auto problem = dir / "lq.json";
  {
    std::ofstream f(problem);
    f << R"({"kind": "control", "state_dim": 1, "control_dim": 1, "horizon": 2, "tau1": "1/2", "tau2": "1/4",
  "mesh": {"h_target": "1/20"}, "history": {"constant": [1]}, "alpha": [0],
  "dynamics": {"A": [[-1]], "B": [[1]]}, "cost": {"Q": [[1]], "S": [[1]], "R": [[1]]},
  "penalty": {"stages": 4, "early_stop": false}, "seed": 3})";
  }
  bool identical = true;
  int exit_codes[2] = {-1, -1};
  for (const char* cmd : {"solve", "check"}) {
    std::string reports[2];
    for (int run = 0; run < 2; ++run) {
      const auto rep = dir / (std::string(cmd) + std::to_string(run) + ".json");
      const auto csv = dir / (std::string(cmd) + std::to_string(run) + ".csv");
      std::ostringstream out, err;
      const int code = cli::run({cmd, problem.string(), "--seed", "11", "--report", rep.string(), "--trajectory",
                                 csv.string()},
                                out, err);
      exit_codes[run] = code;
      reports[run] = strip_timestamp(slurp(rep)) + (std::string(cmd) == "solve" ? slurp(csv) : "");
    }
    identical = identical && !reports[0].empty() && reports[0] == reports[1] && exit_codes[0] == 0 &&
                exit_codes[0] == exit_codes[1];
  }
  std::filesystem::remove_all(dir);
  return {fixpoints == 100 && identical,
          std::to_string(fixpoints) + "/100 parse-serialize-parse fixpoints" +
              (first_failure.empty() ? "" : " (" + first_failure + ")") +
              ", solve/check reports byte-identical excluding timestamp: " + (identical ? "yes" : "no")};
}

}  // namespace

int main() {
  report_line(1, "gradient correctness", gradient_correctness);
  report_line(2, "classical reduction", classical_reduction);
  report_line(3, "EL consistency under refinement", theorem1_consistency);
  report_line(4, "penalty convergence", penalty_convergence);
  report_line(5, "stationarity diagnostics", proposition3_diagnostics);
  report_line(6, "oracle self-consistency", oracle_self_consistency);
  report_line(7, "feasibility pins", feasibility_pins);
  report_line(8, "CLI determinism and round trip", cli_determinism);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
