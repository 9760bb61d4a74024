#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "varpro/schedule.hpp"

namespace varpro::cli {

enum ExitCode : int {
  kOk = 0,
  /// Bad command line, bad configuration, or unwritable output directory.
  kConfigError = 1,
  /// A solver run stopped with a failure status.
  kSolverFailure = 2,
  /// A check (derivative or bound) failed.
  kCheckFailure = 3,
};

/// Command-line overrides applied on top of the configuration file.
struct CommandOptions {
  /// Empty means built-in defaults.
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<ScheduleKind>> schedules;
  /// Scale every model derivative by 1.5 (testing aid for gradcheck).
  bool corrupt_derivative = false;
};

/// Exact and inexact solvers from every starting point; traces, gap series, plot script, manifest.
int run_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Measured inner-solve errors against their bounds along inexact traces.
int run_bounds(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Analytic reduced Jacobian and gradient against central differences.
int run_gradcheck(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Relative error, iterate and exact gradient norm per iteration, exact vs halving schedule.
int run_table(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace varpro::cli
