#pragma once

#include <string>

#include "vsb/config.hpp"

namespace vsb {

inline constexpr const char* kVersion = "0.1.0";

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 numerical stage failure, 2 config error
  std::string message;
};

/// Executes the requested stages (dependencies run implicitly, outputs are
/// written only for requested stages) and writes the artifact files into the
/// output directory: malkin_profile.csv/.dat, zeros.json, scaling_branch.csv,
/// scaling_summary.json, convergence_report.csv/.json, ladder.dat and
/// run_manifest.json.
RunResult run(const RunConfig& config);

}  // namespace vsb
