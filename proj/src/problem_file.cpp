#include "tdelay/problem_file.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tdelay/error.hpp"

namespace tdelay {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw validation_error(where.empty() ? key : where + "." + key, "unknown key");
  }
}

const json& require(const json& obj, const char* key, const std::string& field) {
  if (!obj.contains(key)) throw validation_error(field, "is required");
  return obj.at(key);
}

const json& require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw validation_error(field, "must be an object");
  return j;
}

Rational read_rational(const json& j, const std::string& field) {
  try {
    if (j.is_string()) return Rational::parse(j.get<std::string>());
    if (j.is_number()) return Rational::from_double(j.get<double>());
  } catch (const Error&) {
    throw validation_error(field, "must be an exact rational (e.g. \"1/4\" or 0.25)");
  }
  throw validation_error(field, "must be a number or a rational string");
}

double read_double(const json& j, const std::string& field) {
  if (!j.is_number()) throw validation_error(field, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw validation_error(field, "must be finite");
  return v;
}

double read_time(const json& j, const std::string& field) {
  if (j.is_string()) return read_rational(j, field).to_double();
  return read_double(j, field);
}

long long read_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw validation_error(field, "must be an integer");
  return j.get<long long>();
}

bool read_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) throw validation_error(field, "must be true or false");
  return j.get<bool>();
}

Eigen::VectorXd read_vector(const json& j, const std::string& field, Eigen::Index size) {
  if (!j.is_array()) throw validation_error(field, "must be an array of numbers");
  if (size >= 0 && static_cast<Eigen::Index>(j.size()) != size) {
    throw validation_error(field, "must have " + std::to_string(size) + " entries");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = read_double(j[k], field);
  return v;
}

// Row-major nested arrays. A bare number is accepted for a 1 x 1 matrix.
Eigen::MatrixXd read_matrix(const json& j, const std::string& field, Eigen::Index rows, Eigen::Index cols) {
  if (j.is_number() && rows == 1 && cols == 1) return Eigen::MatrixXd::Constant(1, 1, read_double(j, field));
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw validation_error(field, "must be " + std::to_string(rows) + " x " + std::to_string(cols) + " (row-major)");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw validation_error(field, "must be " + std::to_string(rows) + " x " + std::to_string(cols) + " (row-major)");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_double(row[static_cast<std::size_t>(c)], field);
  }
  return m;
}

ojson write_matrix(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ojson write_vector(const Eigen::VectorXd& v) {
  ojson out = ojson::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

std::vector<PolynomialPiece> read_pieces(const json& j, const std::string& field, int n) {
  if (!j.is_array()) throw validation_error(field, "must be an array of pieces");
  std::vector<PolynomialPiece> pieces;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string where = field + "[" + std::to_string(k) + "]";
    const json& p = require_object(j[k], where);
    check_keys(p, where, {"interval", "coefficients"});
    const json& iv = require(p, "interval", where + ".interval");
    if (!iv.is_array() || iv.size() != 2) throw validation_error(where + ".interval", "must be [t_begin, t_end]");
    const json& coeffs = require(p, "coefficients", where + ".coefficients");
    if (!coeffs.is_array() || static_cast<int>(coeffs.size()) != n || coeffs.empty() || !coeffs[0].is_array()) {
      throw validation_error(where + ".coefficients", "must have state_dim rows of coefficients");
    }
    PolynomialPiece piece;
    piece.t_begin = read_time(iv[0], where + ".interval");
    piece.t_end = read_time(iv[1], where + ".interval");
    piece.coefficients = read_matrix(coeffs, where + ".coefficients", n, static_cast<Eigen::Index>(coeffs[0].size()));
    pieces.push_back(std::move(piece));
  }
  return pieces;
}

ojson write_pieces(const std::vector<PolynomialPiece>& pieces) {
  ojson out = ojson::array();
  for (const auto& p : pieces) {
    ojson piece;
    piece["interval"] = {p.t_begin, p.t_end};
    piece["coefficients"] = write_matrix(p.coefficients);
    out.push_back(std::move(piece));
  }
  return out;
}

HistorySpec read_history(const json& j, int n, const Rational& tau1, const Rational& tau2) {
  require_object(j, "history");
  if (j.contains("constant")) {
    check_keys(j, "history", {"constant"});
    return HistorySpec::constant(read_vector(j.at("constant"), "history.constant", n), tau1.to_double(),
                                 tau2.to_double());
  }
  check_keys(j, "history", {"theta1", "theta2"});
  HistorySpec h;
  h.state_dim = n;
  h.theta1 = read_pieces(require(j, "theta1", "history.theta1"), "history.theta1", n);
  h.theta2 = read_pieces(require(j, "theta2", "history.theta2"), "history.theta2", n);
  h.validate(tau1.to_double(), tau2.to_double());
  return h;
}

InnerOptions read_inner(const json& j, InnerOptions o) {
  require_object(j, "inner");
  check_keys(j, "inner",
             {"grad_tol", "max_iters", "armijo_c", "backtrack_factor", "initial_step", "direction", "bb_warm_start",
              "lbfgs_memory"});
  if (j.contains("grad_tol")) o.grad_tol = read_double(j.at("grad_tol"), "inner.grad_tol");
  if (j.contains("max_iters")) o.max_iters = static_cast<int>(read_int(j.at("max_iters"), "inner.max_iters"));
  if (j.contains("armijo_c")) o.armijo_c = read_double(j.at("armijo_c"), "inner.armijo_c");
  if (j.contains("backtrack_factor")) o.backtrack_factor = read_double(j.at("backtrack_factor"), "inner.backtrack_factor");
  if (j.contains("initial_step")) o.initial_step = read_double(j.at("initial_step"), "inner.initial_step");
  if (j.contains("direction")) {
    const json& d = j.at("direction");
    if (d == "steepest") {
      o.direction = Direction::steepest;
    } else if (d == "lbfgs") {
      o.direction = Direction::lbfgs;
    } else {
      throw validation_error("inner.direction", "must be \"steepest\" or \"lbfgs\"");
    }
  }
  if (j.contains("bb_warm_start")) o.bb_warm_start = read_bool(j.at("bb_warm_start"), "inner.bb_warm_start");
  if (j.contains("lbfgs_memory")) o.lbfgs_memory = static_cast<int>(read_int(j.at("lbfgs_memory"), "inner.lbfgs_memory"));
  o.validate();
  return o;
}

ojson write_inner(const InnerOptions& o) {
  ojson j;
  j["grad_tol"] = o.grad_tol;
  j["max_iters"] = o.max_iters;
  j["armijo_c"] = o.armijo_c;
  j["backtrack_factor"] = o.backtrack_factor;
  j["initial_step"] = o.initial_step;
  j["direction"] = o.direction == Direction::lbfgs ? "lbfgs" : "steepest";
  j["bb_warm_start"] = o.bb_warm_start;
  j["lbfgs_memory"] = o.lbfgs_memory;
  return j;
}

PenaltyConfig read_penalty(const json& j, PenaltyConfig c) {
  require_object(j, "penalty");
  check_keys(j, "penalty", {"c_start", "growth", "stages", "dyn_residual_tol", "early_stop"});
  if (j.contains("c_start")) c.c_start = read_double(j.at("c_start"), "penalty.c_start");
  if (j.contains("growth")) c.growth = read_double(j.at("growth"), "penalty.growth");
  if (j.contains("stages")) c.stages = static_cast<int>(read_int(j.at("stages"), "penalty.stages"));
  if (j.contains("dyn_residual_tol")) c.dyn_residual_tol = read_double(j.at("dyn_residual_tol"), "penalty.dyn_residual_tol");
  if (j.contains("early_stop")) c.early_stop = read_bool(j.at("early_stop"), "penalty.early_stop");
  return c;
}

LagrangianChoice read_lagrangian(const json& j, int n) {
  require_object(j, "lagrangian");
  check_keys(j, "lagrangian", {"name", "params"});
  const json& name = require(j, "name", "lagrangian.name");
  if (!name.is_string()) throw validation_error("lagrangian.name", "must be a string");
  LagrangianChoice out;
  out.name = name.get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  require_object(params, "lagrangian.params");
  auto num = [&](const char* key, double fallback) {
    return params.contains(key) ? read_double(params.at(key), std::string("lagrangian.params.") + key) : fallback;
  };
  if (out.name == "quadratic") {
    check_keys(params, "lagrangian.params",
               {"a", "a_delay", "b", "b_delay", "lin_a", "lin_a_delay", "lin_b", "lin_b_delay"});
    auto mat = [&](const char* key) -> Eigen::MatrixXd {
      if (!params.contains(key)) return Eigen::MatrixXd::Zero(n, n);
      return read_matrix(params.at(key), std::string("lagrangian.params.") + key, n, n);
    };
    auto vec = [&](const char* key) -> Eigen::VectorXd {
      if (!params.contains(key)) return Eigen::VectorXd::Zero(n);
      return read_vector(params.at(key), std::string("lagrangian.params.") + key, n);
    };
    QuadraticLagrangianWeights w{mat("a"), mat("a_delay"), mat("b"), mat("b_delay"),
                                 vec("lin_a"), vec("lin_a_delay"), vec("lin_b"), vec("lin_b_delay")};
    out.quadratic = w.normalized();
  } else if (out.name == "zero") {
    check_keys(params, "lagrangian.params", {});
  } else if (out.name == "constant") {
    check_keys(params, "lagrangian.params", {"value"});
    out.constant = num("value", 0.0);
  } else if (out.name == "kinetic") {
    check_keys(params, "lagrangian.params", {"weight"});
    out.kinetic_weight = num("weight", 1.0);
  } else if (out.name == "anharmonic") {
    check_keys(params, "lagrangian.params", {"delay_kinetic", "stiffness", "quartic", "coupling", "forcing"});
    AnharmonicParams d;
    out.anharmonic = {num("delay_kinetic", d.delay_kinetic), num("stiffness", d.stiffness), num("quartic", d.quartic),
                      num("coupling", d.coupling), num("forcing", d.forcing)};
  } else {
    throw validation_error("lagrangian.name", "must be one of quadratic, zero, constant, kinetic, anharmonic");
  }
  return out;
}

ojson write_lagrangian(const LagrangianChoice& c) {
  ojson j;
  j["name"] = c.name;
  ojson p = ojson::object();
  if (c.name == "quadratic") {
    const auto& w = c.quadratic;
    p["a"] = write_matrix(w.a);
    p["a_delay"] = write_matrix(w.a_delay);
    p["b"] = write_matrix(w.b);
    p["b_delay"] = write_matrix(w.b_delay);
    p["lin_a"] = write_vector(w.lin_a);
    p["lin_a_delay"] = write_vector(w.lin_a_delay);
    p["lin_b"] = write_vector(w.lin_b);
    p["lin_b_delay"] = write_vector(w.lin_b_delay);
  } else if (c.name == "constant") {
    p["value"] = c.constant;
  } else if (c.name == "kinetic") {
    p["weight"] = c.kinetic_weight;
  } else if (c.name == "anharmonic") {
    p["delay_kinetic"] = c.anharmonic.delay_kinetic;
    p["stiffness"] = c.anharmonic.stiffness;
    p["quartic"] = c.anharmonic.quartic;
    p["coupling"] = c.anharmonic.coupling;
    p["forcing"] = c.anharmonic.forcing;
  }
  j["params"] = std::move(p);
  return j;
}

// Turns grid construction errors into field-level validation errors.
DelayGrid checked_grid(const Rational& horizon, const Rational& tau1, const Rational& tau2, const Rational& h_target) {
  const Rational zero(0);
  if (horizon <= zero) throw validation_error("horizon", "must be > 0");
  if (tau1 <= zero) throw validation_error("tau1", "must be > 0");
  if (tau2 <= zero) throw validation_error("tau2", "must be > 0");
  if (h_target <= zero) throw validation_error("mesh.h_target", "must be > 0");
  if (tau2 >= tau1) throw validation_error("tau2", "must be < tau1");
  if (tau1 >= horizon) throw validation_error("tau1", "must be < horizon");
  try {
    return DelayGrid::build(horizon, tau1, tau2, h_target);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProblemTooLarge) throw validation_error("mesh.h_target", "gives too many grid nodes");
    throw validation_error("tau1", "must be commensurate with horizon and tau2");
  }
}

std::size_t line_of(std::string_view text, std::size_t byte, std::size_t& column) {
  std::size_t line = 1;
  column = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return line;
}

}  // namespace

const char* to_string(ProblemKind kind) { return kind == ProblemKind::variational ? "variational" : "control"; }

DelayedLagrangian LagrangianChoice::build(int n) const {
  if (name == "quadratic") return quadratic_lagrangian(quadratic);
  if (name == "zero") return zero_lagrangian(n);
  if (name == "constant") return constant_lagrangian(n, constant);
  if (name == "kinetic") {
    QuadraticLagrangianWeights w;
    w.a = w.a_delay = w.b_delay = Eigen::MatrixXd::Zero(n, n);
    w.b = kinetic_weight * Eigen::MatrixXd::Identity(n, n);
    return quadratic_lagrangian(w);
  }
  if (name == "anharmonic") return anharmonic_lagrangian(n, anharmonic);
  throw validation_error("lagrangian.name", "must be one of quadratic, zero, constant, kinetic, anharmonic");
}

bool LagrangianChoice::operator==(const LagrangianChoice& o) const {
  return name == o.name && quadratic == o.quadratic && constant == o.constant && kinetic_weight == o.kinetic_weight &&
         anharmonic == o.anharmonic;
}

DelayGrid ProblemFile::grid() const { return checked_grid(horizon, tau1, tau2, h_target); }

VariationalProblem ProblemFile::variational() const {
  if (kind != ProblemKind::variational) throw Error(ErrorCode::InvalidArgument, "problem is not variational");
  VariationalProblem p{grid(), lagrangian.build(state_dim), history, alpha};
  p.validate();
  return p;
}

ControlProblem ProblemFile::control() const {
  if (kind != ProblemKind::control) throw Error(ErrorCode::InvalidArgument, "problem is not a control problem");
  ControlProblem p{grid(), A, B, cost.to_running_cost(), history, alpha, cost};
  p.validate();
  return p;
}

bool ProblemFile::operator==(const ProblemFile& o) const {
  return kind == o.kind && state_dim == o.state_dim && control_dim == o.control_dim && horizon == o.horizon &&
         tau1 == o.tau1 && tau2 == o.tau2 && h_target == o.h_target && history == o.history && same(alpha, o.alpha) &&
         same(A, o.A) && same(B, o.B) && cost == o.cost && penalty == o.penalty && lagrangian == o.lagrangian &&
         inner == o.inner && seed == o.seed;
}

ProblemFile parse_problem_text(std::string_view text) {
  json top;
  try {
    top = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t col = 0;
    const std::size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1, col);
    throw Error(ErrorCode::ParseError,
                "ParseError at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  if (!top.is_object()) throw Error(ErrorCode::ParseError, "ParseError: top level must be a JSON object");
  check_keys(top, "",
             {"kind", "state_dim", "control_dim", "horizon", "tau1", "tau2", "mesh", "history", "alpha", "dynamics",
              "cost", "penalty", "lagrangian", "inner", "seed"});

  ProblemFile pf;
  const json& kind = require(top, "kind", "kind");
  if (kind == "variational") {
    pf.kind = ProblemKind::variational;
  } else if (kind == "control") {
    pf.kind = ProblemKind::control;
  } else {
    throw validation_error("kind", "must be \"variational\" or \"control\"");
  }
  const long long n = read_int(require(top, "state_dim", "state_dim"), "state_dim");
  if (n < 1 || n > 64) throw validation_error("state_dim", "must be in [1, 64]");
  pf.state_dim = static_cast<int>(n);

  pf.horizon = read_rational(require(top, "horizon", "horizon"), "horizon");
  pf.tau1 = read_rational(require(top, "tau1", "tau1"), "tau1");
  pf.tau2 = read_rational(require(top, "tau2", "tau2"), "tau2");
  if (top.contains("mesh")) {
    const json& mesh = require_object(top.at("mesh"), "mesh");
    check_keys(mesh, "mesh", {"h_target"});
    if (mesh.contains("h_target")) pf.h_target = read_rational(mesh.at("h_target"), "mesh.h_target");
  }
  checked_grid(pf.horizon, pf.tau1, pf.tau2, pf.h_target);

  pf.alpha = read_vector(require(top, "alpha", "alpha"), "alpha", n);
  pf.history = read_history(require(top, "history", "history"), pf.state_dim, pf.tau1, pf.tau2);

  if (top.contains("seed")) {
    const json& s = top.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw validation_error("seed", "must be a non-negative integer");
    }
    pf.seed = s.get<std::uint64_t>();
  }

  if (pf.kind == ProblemKind::control) {
    if (top.contains("lagrangian")) throw validation_error("lagrangian", "only allowed for variational problems");
    const long long m = read_int(require(top, "control_dim", "control_dim"), "control_dim");
    if (m < 1 || m > 64) throw validation_error("control_dim", "must be in [1, 64]");
    pf.control_dim = static_cast<int>(m);
    const json& dyn = require_object(require(top, "dynamics", "dynamics"), "dynamics");
    check_keys(dyn, "dynamics", {"A", "B"});
    pf.A = read_matrix(require(dyn, "A", "dynamics.A"), "dynamics.A", n, n);
    pf.B = read_matrix(require(dyn, "B", "dynamics.B"), "dynamics.B", n, m);
    const json& cost = require_object(require(top, "cost", "cost"), "cost");
    check_keys(cost, "cost", {"Q", "S", "R", "q", "s", "r", "rho"});
    QuadraticCostSpec spec;
    spec.Q = cost.contains("Q") ? read_matrix(cost.at("Q"), "cost.Q", n, n) : Eigen::MatrixXd::Zero(n, n);
    spec.S = cost.contains("S") ? read_matrix(cost.at("S"), "cost.S", n, n) : Eigen::MatrixXd::Zero(n, n);
    spec.R = read_matrix(require(cost, "R", "cost.R"), "cost.R", m, m);
    if (cost.contains("q")) spec.q = read_vector(cost.at("q"), "cost.q", n);
    if (cost.contains("s")) spec.s = read_vector(cost.at("s"), "cost.s", n);
    if (cost.contains("r")) spec.r = read_vector(cost.at("r"), "cost.r", m);
    if (cost.contains("rho")) spec.rho = read_double(cost.at("rho"), "cost.rho");
    pf.cost = spec.normalized();
    if (top.contains("penalty")) pf.penalty = read_penalty(top.at("penalty"), pf.penalty);
    if (top.contains("inner")) pf.penalty.inner = read_inner(top.at("inner"), pf.penalty.inner);
    pf.penalty.validate();
  } else {
    for (const char* key : {"dynamics", "cost", "penalty"}) {
      if (top.contains(key)) throw validation_error(key, "only allowed for control problems");
    }
    if (top.contains("control_dim") && read_int(top.at("control_dim"), "control_dim") != 0) {
      throw validation_error("control_dim", "must be 0 for variational problems");
    }
    pf.lagrangian = read_lagrangian(require(top, "lagrangian", "lagrangian"), pf.state_dim);
    if (top.contains("inner")) pf.inner = read_inner(top.at("inner"), pf.inner);
  }
  return pf;
}

ProblemFile parse_problem_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "IoError: cannot open problem file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "IoError: cannot read problem file '" + path + "'");
  return parse_problem_text(buf.str());
}

std::string serialize_problem(const ProblemFile& pf) {
  ojson j;
  j["kind"] = to_string(pf.kind);
  j["state_dim"] = pf.state_dim;
  if (pf.kind == ProblemKind::control) j["control_dim"] = pf.control_dim;
  j["horizon"] = pf.horizon.to_string();
  j["tau1"] = pf.tau1.to_string();
  j["tau2"] = pf.tau2.to_string();
  j["mesh"] = {{"h_target", pf.h_target.to_string()}};
  j["history"] = {{"theta1", write_pieces(pf.history.theta1)}, {"theta2", write_pieces(pf.history.theta2)}};
  j["alpha"] = write_vector(pf.alpha);
  if (pf.kind == ProblemKind::control) {
    j["dynamics"] = {{"A", write_matrix(pf.A)}, {"B", write_matrix(pf.B)}};
    ojson cost;
    cost["Q"] = write_matrix(pf.cost.Q);
    cost["S"] = write_matrix(pf.cost.S);
    cost["R"] = write_matrix(pf.cost.R);
    cost["q"] = write_vector(pf.cost.q);
    cost["s"] = write_vector(pf.cost.s);
    cost["r"] = write_vector(pf.cost.r);
    cost["rho"] = pf.cost.rho;
    j["cost"] = std::move(cost);
    ojson pen;
    pen["c_start"] = pf.penalty.c_start;
    pen["growth"] = pf.penalty.growth;
    pen["stages"] = pf.penalty.stages;
    pen["dyn_residual_tol"] = pf.penalty.dyn_residual_tol;
    pen["early_stop"] = pf.penalty.early_stop;
    j["penalty"] = std::move(pen);
    j["inner"] = write_inner(pf.penalty.inner);
  } else {
    j["lagrangian"] = write_lagrangian(pf.lagrangian);
    j["inner"] = write_inner(pf.inner);
  }
  j["seed"] = pf.seed;
  return j.dump(2) + "\n";
}

}  // namespace tdelay
