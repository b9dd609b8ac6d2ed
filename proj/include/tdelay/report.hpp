#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "tdelay/oracle.hpp"
#include "tdelay/penalty.hpp"
#include "tdelay/variational.hpp"

namespace tdelay::report {

using Json = nlohmann::ordered_json;

/// Pretty-prints with every floating-point value at %.17g, so the output is
/// lossless and byte-stable. Non-finite doubles become null.
void write_json(std::ostream& out, const Json& doc);
std::string dump(const Json& doc);

Json to_json(const InnerReport& rep);
Json to_json(const StageDiagnostics& st);
Json to_json(const PenaltyReport& rep);
/// Regime bounds, norms and endpoint residuals (no per-node arrays).
Json to_json(const ELResidual& res, const DelayGrid& grid);
Json to_json(const oracle::KKTSolution& sol);
Json grid_json(const DelayGrid& grid);

}  // namespace tdelay::report
