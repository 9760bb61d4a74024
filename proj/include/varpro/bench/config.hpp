#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "varpro/bench/deconv.hpp"
#include "varpro/lsqr.hpp"
#include "varpro/schedule.hpp"

namespace varpro::bench {

struct SolverSettings {
  int max_outer_iterations = 50;
  /// 0 runs every solver for exactly max_outer_iterations steps.
  double step_tolerance = 0.0;
  double gradient_tolerance = 0.0;
  int lsqr_max_iterations = 10000;
  NormEstimate norm_estimate = NormEstimate::InternalBidiagonal;
  /// "reference", "auto", or one value per starting point.
  std::string epsilon0_mode = "reference";
  std::vector<double> epsilon0;
  /// Used by "auto": eps0 = safety / kappa(y0).
  double safety = 0.1;
  double epsilon_floor = std::numeric_limits<double>::epsilon();
};

struct CheckSettings {
  int gradcheck_points = 5;
  double gradcheck_y_min = 2.0;
  double gradcheck_y_max = 4.0;
  double gradcheck_tolerance = 1e-4;
  /// Central-difference steps, relative to max(1, |y|).
  double jacobian_fd_step = 1e-4;
  double gradient_fd_step = 1e-6;
  int table_iterations = 7;
  /// Bound violations at eps below this are reported, not fatal.
  double bound_report_threshold = 1e3 * std::numeric_limits<double>::epsilon();
};

struct RunConfig {
  BenchConfig problem;
  SolverSettings solver;
  std::vector<ScheduleKind> schedules{ScheduleKind::Constant, ScheduleKind::Linear, ScheduleKind::Exponential,
                                      ScheduleKind::FixedSmall};
  CheckSettings checks;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Built-in eps0 for the benchmark at its two standard starting points (2 and 4).
double reference_epsilon0(double y0);

/// eps0 for starting point y0 under the configured mode.
double resolve_epsilon0(const RunConfig& cfg, const ProblemInstance& p, std::size_t y0_index);

/// INI format; unknown sections or keys are errors. An empty document yields the defaults.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// key = value lines that parse back to the same configuration.
std::string to_ini(const RunConfig& cfg);

}  // namespace varpro::bench
