#include "tdelay/oracle.hpp"

#include <cmath>
#include <vector>

#include "tdelay/error.hpp"

namespace tdelay::oracle {
namespace {

constexpr int kMaxUnknowns = 2000;
constexpr int kMaxSystem = 4000;

// const + sum_k coef_k * z[offset_k .. offset_k + dim).
struct Affine {
  Eigen::VectorXd constant;
  std::vector<std::pair<int, double>> terms;
};

Affine scaled_sum(const Affine& p, double cp, const Affine& q, double cq) {
  Affine out{cp * p.constant + cq * q.constant, {}};
  for (auto [o, c] : p.terms) out.terms.emplace_back(o, cp * c);
  for (auto [o, c] : q.terms) out.terms.emplace_back(o, cq * c);
  return out;
}

// Node values as affine expressions in the free interior main nodes.
class StateMap {
 public:
  StateMap(const DelayGrid& grid, const HistorySpec& hist, const Eigen::VectorXd& alpha)
      : grid_(grid), n_(hist.state_dim), pinned_(hist.state_dim, grid.n_nodes()) {
    const double tau2 = grid.tau2().to_double();
    pinned_.setZero();
    for (int g = 0; g <= grid.n_history(); ++g) pinned_.col(g) = hist.eval(grid.time(g), tau2);
    pinned_.col(grid.n_nodes() - 1) = alpha;
  }
  int unknowns() const { return n_ * (grid_.n_main() - 2); }
  Affine node(int g) const {
    if (g <= grid_.n_history() || g == grid_.n_nodes() - 1) return {pinned_.col(g), {}};
    return {Eigen::VectorXd::Zero(n_), {{n_ * (g - grid_.n_history() - 1), 1.0}}};
  }
  Affine slope(int g) const {
    const auto [lo, hi] = derivative_stencil(grid_, g);
    return scaled_sum(node(hi), 1.0 / grid_.h(), node(lo), -1.0 / grid_.h());
  }
  Eigen::VectorXd evaluate(const Affine& e, const Eigen::VectorXd& z) const {
    Eigen::VectorXd v = e.constant;
    for (auto [o, c] : e.terms) v += c * z.segment(o, n_);
    return v;
  }
  Eigen::MatrixXd all_nodes(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd x(n_, grid_.n_nodes());
    for (int g = 0; g < grid_.n_nodes(); ++g) x.col(g) = evaluate(node(g), z);
    return x;
  }

 private:
  const DelayGrid& grid_;
  int n_;
  Eigen::MatrixXd pinned_;
};

// Adds weight * p^T M q (p, q affine in z) to f = 1/2 z^T H z + g^T z + const.
void add_bilinear(const Affine& p, const Affine& q, const Eigen::MatrixXd& M, double weight, Eigen::MatrixXd& H,
                  Eigen::VectorXd& g, double& constant) {
  const auto dp = M.rows();
  const auto dq = M.cols();
  for (auto [op, cp] : p.terms) {
    for (auto [oq, cq] : q.terms) {
      H.block(op, oq, dp, dq) += weight * cp * cq * M;
      H.block(oq, op, dq, dp) += weight * cp * cq * M.transpose();
    }
    g.segment(op, dp) += weight * cp * (M * q.constant);
  }
  for (auto [oq, cq] : q.terms) g.segment(oq, dq) += weight * cq * (M.transpose() * p.constant);
  constant += weight * p.constant.dot(M * q.constant);
}

void add_linear(const Affine& p, const Eigen::VectorXd& v, double weight, Eigen::VectorXd& g, double& constant) {
  for (auto [o, c] : p.terms) g.segment(o, v.size()) += weight * c * v;
  constant += weight * v.dot(p.constant);
}

Eigen::VectorXd solve_refined(const Eigen::MatrixXd& K, const Eigen::VectorXd& rhs, double& residual) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    throw Error(ErrorCode::SingularKKT, "KKT matrix is singular (rcond " + std::to_string(rcond) +
                                            "): constraints redundant or target unreachable");
  }
  Eigen::VectorXd sol = lu.solve(rhs);
  for (int pass = 0; pass < 3; ++pass) {
    const Eigen::VectorXd r = rhs - K * sol;
    residual = r.cwiseAbs().maxCoeff();
    if (residual <= 1e-13 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) break;
    sol += lu.solve(r);
  }
  residual = (rhs - K * sol).cwiseAbs().maxCoeff();
  if (!sol.allFinite()) throw Error(ErrorCode::SingularKKT, "KKT solve produced non-finite values");
  return sol;
}

}  // namespace

Eigen::MatrixXd integrate_mos(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const ControlPath& u,
                              const HistorySpec& hist, const DelayGrid& grid) {
  const int n = hist.state_dim;
  if (A.rows() != n || A.cols() != n || B.rows() != n || B.cols() != u.control_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "A, B, u and history dimensions disagree");
  }
  if (!(u.grid() == grid)) throw Error(ErrorCode::DimensionMismatch, "control lives on another grid");
  const double h = grid.h();
  const double tau2 = grid.tau2().to_double();
  const int k1 = grid.k1();
  Eigen::MatrixXd x(n, grid.n_nodes());
  for (int g = 0; g <= grid.n_history(); ++g) x.col(g) = hist.eval(grid.time(g), tau2);
  auto rate = [&](int g) -> Eigen::VectorXd {
    return A * x.col(g - k1) + B * u.values().col(g - grid.n_history());
  };
  // x(g + 1 - k1) is at or before g, so every step only reads known values.
  for (int g = grid.n_history(); g + 1 < grid.n_nodes(); ++g) {
    x.col(g + 1) = x.col(g) + 0.5 * h * (rate(g) + rate(g + 1));
  }
  return x;
}

double lq_cost(const ControlProblem& prob, const Eigen::MatrixXd& x, const Eigen::MatrixXd& u) {
  if (!prob.quadratic) throw Error(ErrorCode::InvalidArgument, "lq_cost needs a quadratic cost");
  const QuadraticCostSpec c = prob.quadratic->normalized();
  const DelayGrid& grid = prob.grid;
  const double h = grid.h();
  double total = 0.0;
  for (int i = 0; i < grid.last_main(); ++i) {
    const int g = grid.global_index(i);
    const Eigen::VectorXd a = x.col(g);
    const int d = g - grid.k2();
    const Eigen::VectorXd bd = (x.col(d + 1) - x.col(d)) / h;
    const Eigen::VectorXd ui = u.col(i);
    total += h * (a.dot(c.Q * a) + bd.dot(c.S * bd) + ui.dot(c.R * ui) + c.q.dot(a) + c.s.dot(bd) + c.r.dot(ui));
  }
  return total;
}

KKTSolution lq_direct_solve(const ControlProblem& prob) {
  prob.validate();
  if (!prob.quadratic) throw Error(ErrorCode::InvalidArgument, "the KKT oracle needs a quadratic cost");
  const QuadraticCostSpec cost = prob.quadratic->normalized();
  const DelayGrid& grid = prob.grid;
  const int n = prob.state_dim();
  const int m = prob.control_dim();
  const int last = grid.last_main();
  const double h = grid.h();

  const StateMap xs(grid, prob.history, prob.alpha);
  const int nx = xs.unknowns();
  const int nz = nx + m * (last - 1);
  const int rows = n * last;
  if (nz > kMaxUnknowns || nz + rows > kMaxSystem) {
    throw Error(ErrorCode::ProblemTooLarge, "KKT oracle is capped at " + std::to_string(kMaxUnknowns) +
                                                " unknowns; got " + std::to_string(nz));
  }
  auto control = [&](int i) -> Affine {
    if (i == 0) return {Eigen::VectorXd::Zero(m), {}};
    return {Eigen::VectorXd::Zero(m), {{nx + m * (std::min(i, last - 1) - 1), 1.0}}};
  };

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::VectorXd gvec = Eigen::VectorXd::Zero(nz);
  double constant = 0.0;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(rows, nz);
  Eigen::VectorXd d(rows);
  for (int i = 0; i < last; ++i) {
    const int g = grid.global_index(i);
    const Affine a = xs.node(g);
    const Affine bd = xs.slope(grid.shifted_index(i, Delay::derivative));
    const Affine c = control(i);
    add_bilinear(a, a, cost.Q, h, H, gvec, constant);
    add_bilinear(bd, bd, cost.S, h, H, gvec, constant);
    add_bilinear(c, c, cost.R, h, H, gvec, constant);
    add_linear(a, cost.q, h, gvec, constant);
    add_linear(bd, cost.s, h, gvec, constant);
    add_linear(c, cost.r, h, gvec, constant);

    const Affine slope = xs.slope(g);
    const Affine delayed = xs.node(grid.shifted_index(i, Delay::state));
    const int row = n * i;
    for (auto [o, coef] : slope.terms) C.block(row, o, n, n) += coef * Eigen::MatrixXd::Identity(n, n);
    for (auto [o, coef] : delayed.terms) C.block(row, o, n, n) -= coef * prob.A;
    for (auto [o, coef] : c.terms) C.block(row, o, n, m) -= coef * prob.B;
    d.segment(row, n) = -(slope.constant - prob.A * delayed.constant - prob.B * c.constant);
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nz + rows, nz + rows);
  K.topLeftCorner(nz, nz) = H;
  K.topRightCorner(nz, rows) = C.transpose();
  K.bottomLeftCorner(rows, nz) = C;
  Eigen::VectorXd rhs(nz + rows);
  rhs << -gvec, d;

  KKTSolution out;
  const Eigen::VectorXd sol = solve_refined(K, rhs, out.residual);
  const Eigen::VectorXd z = sol.head(nz);
  out.x = xs.all_nodes(z);
  out.u = Eigen::MatrixXd::Zero(m, grid.n_main());
  for (int i = 1; i <= last; ++i) out.u.col(i) = z.segment(control(i).terms.front().first, m);
  out.multipliers = sol.tail(rows).reshaped(n, last);
  out.objective = lq_cost(prob, out.x, out.u);
  return out;
}

QuadraticVariationalSolution quadratic_variational_solve(const DelayGrid& grid, const Eigen::MatrixXd& W,
                                                         const Eigen::VectorXd& w, const HistorySpec& hist,
                                                         const Eigen::VectorXd& alpha) {
  const int n = hist.state_dim;
  if (W.rows() != 4 * n || W.cols() != 4 * n || w.size() != 4 * n || alpha.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "W must be 4N x 4N and w 4N");
  }
  const StateMap xs(grid, hist, alpha);
  const int nz = xs.unknowns();
  if (nz > kMaxUnknowns) throw Error(ErrorCode::ProblemTooLarge, "direct solve capped at 2000 unknowns");
  const double h = grid.h();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::VectorXd gvec = Eigen::VectorXd::Zero(nz);
  double constant = 0.0;
  for (int i = 0; i < grid.last_main(); ++i) {
    const int g = grid.global_index(i);
    const Affine parts[4] = {xs.node(g), xs.node(grid.shifted_index(i, Delay::state)), xs.slope(g),
                             xs.slope(grid.shifted_index(i, Delay::derivative))};
    // 1/2 z^T W z = sum over blocks (p, q) of 1/2 z_p^T W_pq z_q.
    for (int p = 0; p < 4; ++p) {
      for (int q = 0; q < 4; ++q) {
        add_bilinear(parts[p], parts[q], W.block(n * p, n * q, n, n), 0.5 * h, H, gvec, constant);
      }
      add_linear(parts[p], w.segment(n * p, n), h, gvec, constant);
    }
  }
  QuadraticVariationalSolution out;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(H);
  if (nz > 0 && !(lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularKKT, "quadratic functional is not strictly convex");
  const Eigen::VectorXd z = nz > 0 ? Eigen::VectorXd(lu.solve(-gvec)) : Eigen::VectorXd();
  out.x = xs.all_nodes(z);
  out.objective = 0.5 * z.dot(H * z) + gvec.dot(z) + constant;
  return out;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double epsilon, kernels::Exec exec) {
  return kernels::fd_gradient(f, x, epsilon, exec);
}

double relative_gradient_error(const Eigen::VectorXd& a, const Eigen::VectorXd& ref) {
  if (a.size() != ref.size()) throw Error(ErrorCode::DimensionMismatch, "gradient sizes differ");
  if (ref.size() == 0) return 0.0;
  const double floor = std::max(1e-3 * ref.cwiseAbs().maxCoeff(), 1e-300);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    worst = std::max(worst, std::abs(a(k) - ref(k)) / std::max(std::abs(ref(k)), floor));
  }
  return worst;
}

}  // namespace tdelay::oracle
