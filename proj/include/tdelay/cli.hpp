#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tdelay::cli {

/// Exit codes: 0 converged / ok, 2 ran but did not converge, 1 error.
enum Exit : int { ok = 0, error = 1, not_converged = 2 };

/// Entry point of the `tdelay` tool. `args` excludes the program name.
/// One-line summaries go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tdelay::cli
