#include "tdelay/trajectory.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tdelay/error.hpp"
#include "tdelay/format.hpp"

namespace tdelay {
namespace {

void check_node(const DelayGrid& grid, int global) {
  if (global < 0 || global >= grid.n_nodes()) {
    throw Error(ErrorCode::IndexOutOfRange, "node index " + std::to_string(global) + " off grid");
  }
}

bool pinned_node(const DelayGrid& grid, int global) {
  return global <= grid.n_history() || global == grid.n_nodes() - 1;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::pair<int, int> derivative_stencil(const DelayGrid& grid, int global) {
  check_node(grid, global);
  if (global == grid.n_nodes() - 1) return {global - 1, global};
  return {global, global + 1};
}

Trajectory Trajectory::init(const DelayGrid& grid, const HistorySpec& hist, const Eigen::VectorXd& alpha,
                            InitMode mode, const Eigen::MatrixXd* custom) {
  const int n = hist.state_dim;
  if (n < 1 || alpha.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "alpha has " + std::to_string(alpha.size()) +
                                                  " components, history has " + std::to_string(n));
  }
  const double tau2 = grid.tau2().to_double();
  const int last = grid.n_nodes() - 1;
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, grid.n_nodes());
  for (int g = 0; g <= grid.n_history(); ++g) {
    Eigen::VectorXd sample = hist.eval(grid.time(g), tau2);
    if (sample.size() != n) throw Error(ErrorCode::DimensionMismatch, "history sample dimension");
    values.col(g) = sample;
  }
  values.col(last) = alpha;

  const int first_main = grid.n_history();
  switch (mode) {
    case InitMode::zero:
      break;
    case InitMode::linear: {
      const Eigen::VectorXd start = values.col(first_main);
      const int span = last - first_main;
      for (int g = first_main + 1; g < last; ++g) {
        const double s = static_cast<double>(g - first_main) / static_cast<double>(span);
        values.col(g) = (1.0 - s) * start + s * alpha;
      }
      break;
    }
    case InitMode::custom: {
      if (custom == nullptr) throw Error(ErrorCode::InvalidArgument, "custom init requires an array");
      if (custom->rows() != n || custom->cols() != grid.n_nodes()) {
        throw Error(ErrorCode::DimensionMismatch, "custom array must be " + std::to_string(n) + " x " +
                                                      std::to_string(grid.n_nodes()));
      }
      for (int g = 0; g < grid.n_nodes(); ++g) {
        if (pinned_node(grid, g)) {
          const double scale = std::max(1.0, values.col(g).cwiseAbs().maxCoeff());
          if ((custom->col(g) - values.col(g)).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw Error(ErrorCode::CustomArrayViolatesPins,
                        "custom value at t=" + fmt17(grid.time(g)) + " differs from the pinned value");
          }
        } else {
          values.col(g) = custom->col(g);
        }
      }
      break;
    }
  }
  return Trajectory(grid, std::move(values));
}

Eigen::VectorXd Trajectory::value(int global) const {
  check_node(grid_, global);
  return values_.col(global);
}

bool Trajectory::is_pinned(int global) const noexcept { return pinned_node(grid_, global); }

void Trajectory::set_value(int global, const Eigen::VectorXd& v) {
  check_node(grid_, global);
  if (is_pinned(global)) {
    throw Error(ErrorCode::PinnedNodeWrite, "node at t=" + fmt17(grid_.time(global)) + " is pinned");
  }
  if (v.size() != values_.rows()) throw Error(ErrorCode::DimensionMismatch, "state vector size");
  values_.col(global) = v;
}

Eigen::VectorXd Trajectory::derivative_at(int global) const {
  auto [lo, hi] = derivative_stencil(grid_, global);
  return (values_.col(hi) - values_.col(lo)) / grid_.h();
}

DelayedTuple Trajectory::delayed_tuple(int main_index) const {
  const int g = grid_.global_index(main_index);
  DelayedTuple tuple;
  tuple.t = grid_.time(g);
  tuple.a = values_.col(g);
  tuple.a_delay = values_.col(grid_.shifted_index(main_index, Delay::state));
  tuple.b = derivative_at(g);
  tuple.b_delay = derivative_at(grid_.shifted_index(main_index, Delay::derivative));
  return tuple;
}

int Trajectory::n_free() const noexcept { return state_dim() * (grid_.n_main() - 2); }

Eigen::VectorXd Trajectory::free_values() const {
  const int first = grid_.n_history() + 1;
  const int count = grid_.n_main() - 2;
  return values_.middleCols(first, count).reshaped();
}

void Trajectory::set_free_values(const Eigen::VectorXd& z) {
  if (z.size() != n_free()) throw Error(ErrorCode::DimensionMismatch, "free vector size");
  const int first = grid_.n_history() + 1;
  const int count = grid_.n_main() - 2;
  values_.middleCols(first, count) = z.reshaped(state_dim(), count);
}

ControlPath ControlPath::zero(const DelayGrid& grid, int control_dim) {
  if (control_dim < 1) throw Error(ErrorCode::DimensionMismatch, "control_dim must be >= 1");
  return ControlPath(grid, Eigen::MatrixXd::Zero(control_dim, grid.n_main()));
}

Eigen::VectorXd ControlPath::value(int main_index) const {
  grid_.global_index(main_index);
  return values_.col(main_index);
}

void ControlPath::set_value(int main_index, const Eigen::VectorXd& v) {
  grid_.global_index(main_index);
  if (main_index == 0) throw Error(ErrorCode::PinnedNodeWrite, "u(0) = 0 is pinned");
  if (v.size() != values_.rows()) throw Error(ErrorCode::DimensionMismatch, "control vector size");
  values_.col(main_index) = v;
}

TangentVector project_tangent(const DelayGrid& grid, const Eigen::MatrixXd& raw) {
  if (raw.cols() != grid.n_nodes() || raw.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "raw vector must have one column per grid node");
  }
  TangentVector v{grid, raw};
  v.values.leftCols(grid.n_history() + 1).setZero();
  v.values.col(grid.n_nodes() - 1).setZero();
  return v;
}

PinCheck check_pins(const Trajectory& traj, const HistorySpec& hist, const Eigen::VectorXd& alpha,
                    const ControlPath* control) {
  const DelayGrid& grid = traj.grid();
  const double tau2 = grid.tau2().to_double();
  PinCheck out;
  out.history = true;
  for (int g = 0; g <= grid.n_history(); ++g) {
    out.history = out.history && (traj.values().col(g).array() == hist.eval(grid.time(g), tau2).array()).all();
  }
  out.terminal = (traj.values().col(grid.n_nodes() - 1).array() == alpha.array()).all();
  if (control != nullptr) out.control_origin = (control->values().col(0).array() == 0.0).all();
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const ControlPath* control) {
  const DelayGrid& grid = traj.grid();
  const int n = traj.state_dim();
  const int m = control ? control->control_dim() : 0;
  out << "t";
  for (int k = 0; k < n; ++k) out << ",x" << (k + 1);
  for (int k = 0; k < m; ++k) out << ",u" << (k + 1);
  out << "\n";
  for (int g = 0; g < grid.n_nodes(); ++g) {
    out << fmt17(grid.time(g));
    for (int k = 0; k < n; ++k) out << "," << fmt17(traj.values()(k, g));
    const int i = g - grid.n_history();
    for (int k = 0; k < m; ++k) {
      out << ",";
      if (i >= 0) out << fmt17(control->values()(k, i));
    }
    out << "\n";
  }
}

Trajectory read_trajectory_csv(std::istream& in, const DelayGrid& grid, const HistorySpec& hist,
                               const Eigen::VectorXd& alpha) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty trajectory CSV");
  const auto header = split_csv(line);
  std::vector<int> state_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!header[c].empty() && header[c][0] == 'x') state_cols.push_back(static_cast<int>(c));
  }
  if (header.empty() || header[0] != "t") throw Error(ErrorCode::ParseError, "trajectory CSV must start with column t");
  if (static_cast<int>(state_cols.size()) != hist.state_dim) {
    throw Error(ErrorCode::DimensionMismatch, "trajectory CSV has " + std::to_string(state_cols.size()) +
                                                  " state columns, expected " + std::to_string(hist.state_dim));
  }
  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(hist.state_dim, grid.n_nodes(), std::nan(""));
  std::vector<bool> seen(static_cast<std::size_t>(grid.n_nodes()), false);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    try {
      const double t = std::stod(cells.at(0));
      const long g = std::lround(t / grid.h()) + grid.n_history();
      if (g < 0 || g >= grid.n_nodes() || std::abs(grid.time(static_cast<int>(g)) - t) > 1e-9 * std::max(1.0, std::abs(t))) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": t=" + cells.at(0) +
                                               " is not a node of the grid");
      }
      for (int k = 0; k < hist.state_dim; ++k) {
        values(k, static_cast<int>(g)) = std::stod(cells.at(static_cast<std::size_t>(state_cols[static_cast<std::size_t>(k)])));
      }
      seen[static_cast<std::size_t>(g)] = true;
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": malformed row");
    }
  }
  for (int g = 0; g < grid.n_nodes(); ++g) {
    if (!seen[static_cast<std::size_t>(g)]) {
      throw Error(ErrorCode::DimensionMismatch, "trajectory CSV is missing node t=" + fmt17(grid.time(g)));
    }
  }
  return Trajectory::init(grid, hist, alpha, InitMode::custom, &values);
}

}  // namespace tdelay
