#include "tdelay/report.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "tdelay/format.hpp"

namespace tdelay::report {
namespace {

void write_string(std::ostream& out, const std::string& s) {
  // Reuse the library's escaping for strings; only numbers need custom output.
  out << Json(s).dump();
}

void write_value(std::ostream& out, const Json& v, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << pad;
        write_string(out, it.key());
        out << ": ";
        write_value(out, it.value(), depth + 1);
      }
      out << "\n" << close_pad << "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : v) flat = flat && !e.is_structured();
      out << (flat ? "[" : "[\n");
      bool first = true;
      for (const auto& e : v) {
        if (!first) out << (flat ? ", " : ",\n");
        first = false;
        if (!flat) out << pad;
        write_value(out, e, depth + 1);
      }
      if (!flat) out << "\n" << close_pad;
      out << "]";
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (std::isfinite(d)) {
        out << fmt17(d);
      } else {
        out << "null";
      }
      return;
    }
    default:
      out << v.dump();
  }
}

Json matrix_rows(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool nonincreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[k - 1]) return false;
  }
  return true;
}

}  // namespace

void write_json(std::ostream& out, const Json& doc) {
  write_value(out, doc, 0);
  out << "\n";
}

std::string dump(const Json& doc) {
  std::ostringstream s;
  write_json(s, doc);
  return s.str();
}

Json grid_json(const DelayGrid& grid) {
  Json j;
  j["h"] = grid.step().to_string();
  j["k1"] = grid.k1();
  j["k2"] = grid.k2();
  j["n_history"] = grid.n_history();
  j["n_main"] = grid.n_main();
  return j;
}

Json to_json(const InnerReport& rep) {
  Json j;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["stop_reason"] = rep.stop_reason;
  j["initial_value"] = rep.value_history.empty() ? 0.0 : rep.value_history.front();
  j["final_value"] = rep.final_value;
  j["final_grad_norm"] = rep.final_grad_norm;
  j["monotone"] = nonincreasing(rep.value_history);
  return j;
}

Json to_json(const StageDiagnostics& st) {
  Json j;
  j["c_n"] = st.c_n;
  j["objective"] = st.objective;
  j["cost_value"] = st.cost_value;
  j["penalty_value"] = st.penalty_value;
  j["dyn_residual_norm"] = st.dyn_residual_norm;
  j["phi_sup_norm"] = st.phi_sup_norm;
  j["stationarity_gap"] = st.stationarity_gap;
  j["bound_flag"] = st.bound_flag;
  j["phi_ode_residual_minus"] = st.phi_ode_residual_minus;
  j["phi_ode_residual_plus"] = st.phi_ode_residual_plus;
  j["inner"] = to_json(st.inner);
  return j;
}

Json to_json(const PenaltyReport& rep) {
  Json j;
  j["converged"] = rep.converged;
  j["bound_flag"] = rep.bound_flag;
  j["objective_estimate"] = rep.objective_estimate;
  j["final_cost"] = rep.stages.empty() ? 0.0 : rep.stages.back().cost_value;
  j["final_dyn_residual_norm"] = rep.stages.empty() ? 0.0 : rep.stages.back().dyn_residual_norm;
  Json stages = Json::array();
  for (const auto& st : rep.stages) stages.push_back(to_json(st));
  j["stages"] = std::move(stages);
  return j;
}

Json to_json(const ELResidual& res, const DelayGrid& grid) {
  Json j;
  Json regimes = Json::array();
  for (int r = 0; r < 3; ++r) {
    const ELRegime& reg = res.regimes[r];
    Json e;
    e["regime"] = r + 1;
    e["t_first"] = grid.main_time(reg.first);
    e["t_last"] = grid.main_time(reg.last);
    e["nodes"] = reg.count();
    e["norm"] = reg.norm;
    e["endpoint_max"] = reg.endpoint_max;
    regimes.push_back(std::move(e));
  }
  j["regimes"] = std::move(regimes);
  Json warnings = Json::array();
  for (const auto& w : res.warnings) warnings.push_back(w);
  j["warnings"] = std::move(warnings);
  return j;
}

Json to_json(const oracle::KKTSolution& sol) {
  Json j;
  j["objective"] = sol.objective;
  j["residual"] = sol.residual;
  j["u"] = matrix_rows(sol.u);
  return j;
}

}  // namespace tdelay::report
