#pragma once

#include <filesystem>
#include <iosfwd>

#include "anisoflow/config.hpp"
#include "anisoflow/error.hpp"
#include "anisoflow/verification.hpp"

namespace anisoflow {

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int verify_failed = 1;
inline constexpr int config = 2;
inline constexpr int nonconvergence = 3;
inline constexpr int io = 4;
}  // namespace exit_code

/// Exit status for a library error.
int exit_status(ErrorKind kind);

/// Runs one flow and writes snapshot_<step>.csv, diagnostics.csv and run.json
/// into `out`. On a solver failure the completed steps are still written and
/// the error is rethrown.
void cmd_run(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// Runs the convergence study and writes convergence.csv and study.json.
ConvergenceStudy cmd_convergence(const RunConfig& config, const std::filesystem::path& out, int threads,
                                 std::ostream& log);

/// Runs the derivative property suite and prints the report. Returns true when every property passes.
bool cmd_verify(const VerifyOptions& options, std::ostream& log);

}  // namespace anisoflow
