#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>

#include "tdelay/penalty.hpp"
#include "tdelay/variational.hpp"

namespace tdelay {

enum class ProblemKind { variational, control };

/// Built-in Lagrangians selectable from a problem file.
struct LagrangianChoice {
  std::string name = "quadratic";  // quadratic | zero | constant | kinetic | anharmonic
  QuadraticLagrangianWeights quadratic;  // "quadratic"
  double constant = 0.0;                 // "constant"
  double kinetic_weight = 1.0;           // "kinetic": L = w |b|^2
  AnharmonicParams anharmonic;           // "anharmonic"

  DelayedLagrangian build(int state_dim) const;
  bool operator==(const LagrangianChoice& other) const;
};

/// Validated content of a JSON problem file. Defaults are filled at load, so
/// serialize(parse(text)) is a fixpoint of parse.
struct ProblemFile {
  ProblemKind kind = ProblemKind::control;
  int state_dim = 0;
  int control_dim = 0;
  Rational horizon, tau1, tau2;
  Rational h_target{1, 20};
  HistorySpec history;
  Eigen::VectorXd alpha;
  // control kind
  Eigen::MatrixXd A, B;
  QuadraticCostSpec cost;
  PenaltyConfig penalty;
  // variational kind
  LagrangianChoice lagrangian;
  InnerOptions inner;
  std::uint64_t seed = 0;

  DelayGrid grid() const;
  VariationalProblem variational() const;
  ControlProblem control() const;
  bool operator==(const ProblemFile& other) const;
};

/// Throws ParseError (malformed JSON, with line and column) or
/// ValidationError(field, rule).
ProblemFile parse_problem_text(std::string_view text);
/// As above; IoError when the file cannot be read.
ProblemFile parse_problem_file(const std::string& path);
std::string serialize_problem(const ProblemFile& pf);

const char* to_string(ProblemKind kind);

}  // namespace tdelay
