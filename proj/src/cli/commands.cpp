#include "varpro/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "varpro/bench/config.hpp"
#include "varpro/bench/deconv.hpp"
#include "varpro/bounds.hpp"
#include "varpro/cli/csv.hpp"
#include "varpro/derivative_check.hpp"
#include "varpro/genvarpro.hpp"

#ifndef VARPRO_VERSION
#define VARPRO_VERSION "0.0.0"
#endif

namespace varpro::cli {

namespace fs = std::filesystem;
using bench::ProblemInstance;
using bench::RunConfig;
using Eigen::VectorXd;
using json = nlohmann::json;
using Trace = SolverTrace<double>;

namespace {

using Clock = std::chrono::steady_clock;

struct Context {
  RunConfig cfg;
  ProblemInstance problem;
  fs::path out_dir;
  std::vector<double> epsilon0;
  std::vector<std::string> outputs;
  json runs = json::array();
  Clock::time_point started = Clock::now();
};

Context prepare(const CommandOptions& opts) {
  Context ctx;
  ctx.cfg = opts.config_path.empty() ? RunConfig{} : bench::load_config(opts.config_path);
  if (opts.out_dir) ctx.cfg.output_dir = *opts.out_dir;
  if (opts.seed) ctx.cfg.problem.seed = *opts.seed;
  if (opts.schedules) ctx.cfg.schedules = *opts.schedules;
  ctx.cfg.validate();
  ctx.problem = bench::build_problem(ctx.cfg.problem);
  if (opts.corrupt_derivative) ctx.problem.model = bench::scaled_derivative_model(ctx.problem.model, 1.5);
  for (std::size_t i = 0; i < ctx.cfg.problem.y0.size(); ++i)
    ctx.epsilon0.push_back(bench::resolve_epsilon0(ctx.cfg, ctx.problem, i));
  ctx.out_dir = ctx.cfg.output_dir;
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec || !fs::is_directory(ctx.out_dir))
    throw ConfigError("output.dir", "cannot create '" + ctx.out_dir.string() + "': " + ec.message());
  return ctx;
}

std::string number_tag(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string y0_tag(double y0) { return "y0_" + number_tag(y0); }

void save(Context& ctx, const std::string& name, const CsvTable& table) {
  write_csv((ctx.out_dir / name).string(), table);
  ctx.outputs.push_back(name);
}

void save_text(Context& ctx, const std::string& name, const std::string& text) {
  std::ofstream f(ctx.out_dir / name);
  if (!f) throw std::runtime_error("cannot write '" + (ctx.out_dir / name).string() + "'");
  f << text;
  ctx.outputs.push_back(name);
}

OuterOptions<double> outer_options(const RunConfig& cfg, ScheduleKind kind, double eps0) {
  OuterOptions<double> o;
  o.max_outer_iterations = cfg.solver.max_outer_iterations;
  o.step_tolerance = cfg.solver.step_tolerance;
  o.gradient_tolerance = cfg.solver.gradient_tolerance;
  o.lsqr_max_iterations = cfg.solver.lsqr_max_iterations;
  o.norm_estimate = cfg.solver.norm_estimate;
  o.schedule.kind = kind;
  o.schedule.epsilon0 = eps0;
  o.schedule.floor = cfg.solver.epsilon_floor;
  return o;
}

std::vector<std::string> y_columns(Index r) {
  if (r == 1) return {"y"};
  std::vector<std::string> out;
  for (Index j = 0; j < r; ++j) out.push_back("y" + std::to_string(j + 1));
  return out;
}

CsvTable trace_table(const Trace& trace, Index r) {
  CsvTable t;
  t.header = {"k"};
  for (auto& c : y_columns(r)) t.header.push_back(c);
  for (const char* c : {"F", "grad_norm", "epsilon", "inner_iterations", "inner_criterion", "inner_converged"})
    t.header.emplace_back(c);
  for (const auto& rec : trace.records) {
    std::vector<double> row{static_cast<double>(rec.k)};
    for (Index j = 0; j < r; ++j) row.push_back(rec.y(j));
    row.insert(row.end(), {rec.objective, rec.gradient.norm(), rec.tolerance, static_cast<double>(rec.inner_iterations),
                           rec.inner_criterion, rec.inner_converged ? 1.0 : 0.0});
    t.rows.push_back(std::move(row));
  }
  return t;
}

json run_entry(double y0, const std::string& method, const Trace& trace, double seconds) {
  json w = json::array();
  for (const auto& s : trace.warnings) w.push_back(s);
  json final_y = json::array();
  if (!trace.records.empty())
    for (Index j = 0; j < trace.final_y().size(); ++j) final_y.push_back(trace.final_y()(j));
  return {{"y0", y0},
          {"method", method},
          {"status", to_string(trace.status)},
          {"message", trace.message},
          {"records", trace.records.size()},
          {"total_inner_iterations", trace.total_inner_iterations()},
          {"final_y", final_y},
          {"warnings", w},
          {"seconds", seconds}};
}

json config_json(const RunConfig& c) {
  json schedules = json::array();
  for (auto k : c.schedules) schedules.push_back(std::string(schedule_label(k)));
  return {{"problem",
           {{"n", c.problem.n},
            {"sigma_true", c.problem.sigma_true},
            {"noise_level", c.problem.noise_level},
            {"lambda", c.problem.lambda},
            {"seed", c.problem.seed},
            {"y0", c.problem.y0},
            {"tau", c.problem.tau},
            {"signal", c.problem.signal},
            {"model", c.problem.model}}},
          {"solver",
           {{"max_outer_iterations", c.solver.max_outer_iterations},
            {"step_tolerance", c.solver.step_tolerance},
            {"gradient_tolerance", c.solver.gradient_tolerance},
            {"lsqr_max_iterations", c.solver.lsqr_max_iterations},
            {"norm_estimate", c.solver.norm_estimate == NormEstimate::ExplicitSvd ? "svd" : "internal"},
            {"epsilon0", c.solver.epsilon0_mode == "values" ? json(c.solver.epsilon0) : json(c.solver.epsilon0_mode)},
            {"safety", c.solver.safety},
            {"epsilon_floor", c.solver.epsilon_floor}}},
          {"schedules", {{"run", schedules}}},
          {"checks",
           {{"gradcheck_points", c.checks.gradcheck_points},
            {"gradcheck_y_min", c.checks.gradcheck_y_min},
            {"gradcheck_y_max", c.checks.gradcheck_y_max},
            {"gradcheck_tolerance", c.checks.gradcheck_tolerance},
            {"jacobian_fd_step", c.checks.jacobian_fd_step},
            {"gradient_fd_step", c.checks.gradient_fd_step},
            {"table_iterations", c.checks.table_iterations},
            {"bound_report_threshold", c.checks.bound_report_threshold}}},
          {"output", {{"dir", c.output_dir}}}};
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

void write_manifest(Context& ctx, const std::string& command, const CommandOptions& opts, int exit_code) {
  json eps = json::array();
  for (std::size_t i = 0; i < ctx.epsilon0.size(); ++i)
    eps.push_back({{"y0", ctx.cfg.problem.y0[i]}, {"epsilon0", ctx.epsilon0[i]}});
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  json manifest = {
      {"tool", "varpro-bench"},
      {"version", VARPRO_VERSION},
      {"command", command},
      {"created_utc", utc_timestamp()},
      {"config_file", opts.config_path},
      {"config", config_json(ctx.cfg)},
      {"corrupt_derivative", opts.corrupt_derivative},
      {"epsilon0", eps},
      {"problem", {{"noise_ratio", ctx.problem.noise_ratio}, {"x_true_norm", ctx.problem.x_true.norm()}}},
      {"libraries",
       {{"eigen", eigen.str()},
        {"cli11", CLI11_VERSION},
        {"nlohmann_json",
         std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"runs", ctx.runs},
      {"outputs", ctx.outputs},
      {"exit_code", exit_code},
      {"total_seconds", std::chrono::duration<double>(Clock::now() - ctx.started).count()},
  };
  std::ofstream f(ctx.out_dir / "manifest.json");
  if (!f) throw std::runtime_error("cannot write manifest in '" + ctx.out_dir.string() + "'");
  f << manifest.dump(2) << "\n";
}

template <typename Body>
int guarded(const char* command, const CommandOptions& opts, std::ostream& err, Body&& body) {
  std::optional<Context> ctx;
  try {
    ctx.emplace(prepare(opts));
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "setup failed: " << e.what() << "\n";
    return kConfigError;
  }
  int code = kOk;
  try {
    code = body(*ctx);
  } catch (const std::exception& e) {
    err << command << " failed: " << e.what() << "\n";
    code = kSolverFailure;
  }
  try {
    write_manifest(*ctx, command, opts, code);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    if (code == kOk) code = kConfigError;
  }
  return code;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string gnuplot_script(const Context& ctx) {
  std::ostringstream o;
  o << "# usage: gnuplot compare.gp\n"
    << "set terminal pngcairo size 900,600\n"
    << "set logscale y\n"
    << "set format y '10^{%L}'\n"
    << "set xlabel 'k'\n"
    << "set ylabel '|y_k - y_k^{exact}|'\n"
    << "set key outside right\n"
    << "set datafile separator ','\n";
  for (double y0 : ctx.cfg.problem.y0) {
    const std::string tag = y0_tag(y0);
    o << "\nset output 'gap_" << tag << ".png'\n"
      << "set title 'y_0 = " << number_tag(y0) << "'\n"
      << "plot ";
    for (std::size_t i = 0; i < ctx.cfg.schedules.size(); ++i) {
      const std::string label(schedule_label(ctx.cfg.schedules[i]));
      o << (i ? ", \\\n     " : "") << "'gap_" << tag << "_" << label << ".csv' using 1:($4 > 0 ? $4 : 1/0) "
        << "with linespoints title 'LSQR-" << label << "'";
    }
    o << "\n";
  }
  return o.str();
}

}  // namespace

int run_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded("compare", opts, err, [&](Context& ctx) {
    const auto& p = ctx.problem;
    const Index r = p.model.r;
    bool failed = false;
    for (std::size_t i = 0; i < ctx.cfg.problem.y0.size(); ++i) {
      const double y0v = ctx.cfg.problem.y0[i];
      const VectorXd y0 = VectorXd::Constant(r, y0v);
      const std::string tag = y0_tag(y0v);
      out << "y0 = " << y0v << ", eps0 = " << ctx.epsilon0[i] << "\n";

      auto t0 = Clock::now();
      const Trace gp = genvarpro(p.model, p.b, p.L, p.lambda, y0,
                                 outer_options(ctx.cfg, ScheduleKind::Constant, ctx.epsilon0[i]));
      ctx.runs.push_back(run_entry(y0v, "gp", gp, seconds_since(t0)));
      save(ctx, "trace_" + tag + "_gp.csv", trace_table(gp, r));
      out << "  gp     status=" << to_string(gp.status) << " records=" << gp.records.size();
      if (!gp.records.empty()) out << " y=" << std::setprecision(10) << gp.final_y()(0);
      out << "\n";
      if (gp.failed()) {
        err << "exact run from y0 = " << y0v << " failed: " << gp.message << "\n";
        failed = true;
      }

      for (ScheduleKind kind : ctx.cfg.schedules) {
        const std::string label(schedule_label(kind));
        t0 = Clock::now();
        const Trace tr = inexact_genvarpro(p.model, p.b, p.L, p.lambda, y0, outer_options(ctx.cfg, kind, ctx.epsilon0[i]));
        ctx.runs.push_back(run_entry(y0v, label, tr, seconds_since(t0)));
        save(ctx, "trace_" + tag + "_" + label + ".csv", trace_table(tr, r));
        for (const auto& w : tr.warnings) err << "warning (y0 = " << y0v << ", " << label << "): " << w << "\n";

        CsvTable gap;
        gap.header = {"k", "y_inexact", "y_exact", "gap"};
        if (!gp.records.empty()) {
          for (const auto& rec : tr.records) {
            // the exact run may stop earlier; hold its last iterate
            const auto& ge = gp.records[std::min<std::size_t>(rec.k, gp.records.size() - 1)];
            gap.rows.push_back({static_cast<double>(rec.k), rec.y(0), ge.y(0), (rec.y - ge.y).norm()});
          }
        }
        save(ctx, "gap_" + tag + "_" + label + ".csv", gap);

        out << "  " << std::left << std::setw(6) << label << std::right << " status=" << to_string(tr.status)
            << " records=" << tr.records.size() << " inner=" << tr.total_inner_iterations();
        if (!tr.records.empty()) out << " y=" << std::setprecision(10) << tr.final_y()(0);
        out << "\n";
        if (tr.failed()) {
          err << "LSQR-" << label << " from y0 = " << y0v << " failed: " << tr.message << "\n";
          failed = true;
        }
      }
    }
    save_text(ctx, "compare.gp", gnuplot_script(ctx));
    return failed ? kSolverFailure : kOk;
  });
}

int run_bounds(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded("bounds", opts, err, [&](Context& ctx) {
    const auto& p = ctx.problem;
    const double threshold = ctx.cfg.checks.bound_report_threshold;
    bool failed = false;
    long fatal = 0, reported = 0, checked = 0;
    for (std::size_t i = 0; i < ctx.cfg.problem.y0.size(); ++i) {
      const double y0v = ctx.cfg.problem.y0[i];
      const VectorXd y0 = VectorXd::Constant(p.model.r, y0v);
      for (ScheduleKind kind : ctx.cfg.schedules) {
        const std::string label(schedule_label(kind));
        OuterOptions<double> oo = outer_options(ctx.cfg, kind, ctx.epsilon0[i]);
        oo.norm_estimate = NormEstimate::ExplicitSvd;
        const auto t0 = Clock::now();
        const Trace tr = inexact_genvarpro(p.model, p.b, p.L, p.lambda, y0, oo);
        ctx.runs.push_back(run_entry(y0v, label, tr, seconds_since(t0)));
        if (tr.failed()) {
          err << "LSQR-" << label << " from y0 = " << y0v << " failed: " << tr.message << "\n";
          failed = true;
        }
        CsvTable t;
        t.header = {"k",       "epsilon", "kappa",    "eps_kappa", "x_error", "x_bound",
                    "r_error", "r_bound", "J_error",  "J_bound",   "valid",   "violated"};
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& rec : tr.records) {
          const auto chk = verify_inner_solve(p.model, rec.y, p.b, p.L, p.lambda, rec.x, rec.tolerance);
          const auto& rep = chk.report;
          const bool violated = chk.any_violated();
          t.rows.push_back({static_cast<double>(rec.k), rep.epsilon, rep.kappa, rep.epsilon * rep.kappa,
                            chk.solution_error, rep.solution_bound.value_or(nan), chk.residual_error,
                            rep.residual_bound.value_or(nan), chk.jacobian_error, rep.jacobian_bound.value_or(nan),
                            rep.valid ? 1.0 : 0.0, violated ? 1.0 : 0.0});
          ++checked;
          if (!rep.valid) {
            out << "  note: y0 = " << y0v << " LSQR-" << label << " k = " << rec.k
                << ": eps * kappa >= 1, bounds not applicable\n";
          }
          if (violated) {
            const bool is_fatal = rep.epsilon > threshold;
            (is_fatal ? fatal : reported) += 1;
            (is_fatal ? err : out) << "  " << (is_fatal ? "VIOLATION" : "below-threshold violation") << ": y0 = " << y0v
                                   << " LSQR-" << label << " k = " << rec.k << " eps = " << rep.epsilon
                                   << " eps*kappa = " << rep.epsilon * rep.kappa << " x " << chk.solution_error << "/"
                                   << rep.solution_bound.value_or(nan) << " r " << chk.residual_error << "/"
                                   << rep.residual_bound.value_or(nan) << " J " << chk.jacobian_error << "/"
                                   << rep.jacobian_bound.value_or(nan) << "\n";
          }
        }
        save(ctx, "bounds_" + y0_tag(y0v) + "_" + label + ".csv", t);
      }
    }
    out << "checked " << checked << " inner solves: " << fatal << " violations above eps = " << threshold << ", "
        << reported << " below\n";
    if (failed) return static_cast<int>(kSolverFailure);
    return fatal > 0 ? static_cast<int>(kCheckFailure) : static_cast<int>(kOk);
  });
}

int run_gradcheck(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded("gradcheck", opts, err, [&](Context& ctx) {
    const auto& p = ctx.problem;
    const auto& c = ctx.cfg.checks;
    std::mt19937_64 rng(ctx.cfg.problem.seed);
    std::uniform_real_distribution<double> uniform(c.gradcheck_y_min, c.gradcheck_y_max);
    CsvTable t;
    t.header = {"y", "jacobian_error", "gradient_error", "gradient", "gradient_fd"};
    double worst = 0.0, worst_y = 0.0;
    for (int i = 0; i < c.gradcheck_points; ++i) {
      const VectorXd y = VectorXd::Constant(p.model.r, uniform(rng));
      const auto chk = check_derivatives(p.model, y, p.b, p.L, p.lambda, c.jacobian_fd_step, c.gradient_fd_step);
      t.rows.push_back({y(0), chk.jacobian_error, chk.gradient_error, chk.gradient(0), chk.gradient_fd(0)});
      out << "  y = " << std::setprecision(8) << y(0) << "  jacobian rel. error = " << std::setprecision(3)
          << chk.jacobian_error << "  gradient rel. error = " << chk.gradient_error << "\n";
      const double e = std::max(chk.jacobian_error, chk.gradient_error);
      if (!(e <= worst)) {
        worst = e;
        worst_y = y(0);
      }
    }
    save(ctx, "gradcheck.csv", t);
    if (!(worst <= c.gradcheck_tolerance)) {
      err << "derivative check failed: relative error " << worst << " at y = " << worst_y << " exceeds "
          << c.gradcheck_tolerance << "\n";
      return static_cast<int>(kCheckFailure);
    }
    out << "derivative check passed: max relative error " << worst << " <= " << c.gradcheck_tolerance << "\n";
    return static_cast<int>(kOk);
  });
}

int run_table(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded("table", opts, err, [&](Context& ctx) {
    const auto& p = ctx.problem;
    bool failed = false;
    for (std::size_t i = 0; i < ctx.cfg.problem.y0.size(); ++i) {
      const double y0v = ctx.cfg.problem.y0[i];
      const VectorXd y0 = VectorXd::Constant(p.model.r, y0v);
      OuterOptions<double> oo = outer_options(ctx.cfg, ScheduleKind::Exponential, ctx.epsilon0[i]);
      oo.max_outer_iterations = ctx.cfg.checks.table_iterations;
      oo.step_tolerance = 0.0;
      oo.gradient_tolerance = 0.0;
      oo.diagnostics = true;
      auto t0 = Clock::now();
      const Trace gp = genvarpro(p.model, p.b, p.L, p.lambda, y0, oo);
      ctx.runs.push_back(run_entry(y0v, "gp", gp, seconds_since(t0)));
      t0 = Clock::now();
      const Trace ab = inexact_genvarpro(p.model, p.b, p.L, p.lambda, y0, oo);
      ctx.runs.push_back(run_entry(y0v, "ab", ab, seconds_since(t0)));
      for (const Trace* tr : {&gp, &ab}) {
        if (tr->failed()) {
          err << "run from y0 = " << y0v << " failed: " << tr->message << "\n";
          failed = true;
        }
      }
      CsvTable t;
      t.header = {"k", "rre_gp", "rre_ab", "y_gp", "y_ab", "grad_gp", "grad_ab"};
      const std::size_t rows = std::min(gp.records.size(), ab.records.size());
      for (std::size_t k = 0; k < rows; ++k) {
        const auto& g = gp.records[k];
        const auto& a = ab.records[k];
        t.rows.push_back({static_cast<double>(k), bench::relative_error(g.x, p.x_true),
                          bench::relative_error(a.x, p.x_true), g.y(0), a.y(0), g.gradient_exact->norm(),
                          a.gradient_exact->norm()});
      }
      const std::string name = "table_" + y0_tag(y0v);
      save(ctx, name + ".csv", t);
      const std::string text = format_aligned(t);
      save_text(ctx, name + ".txt", text);
      out << "y0 = " << y0v << " (eps0 = " << ctx.epsilon0[i] << ")\n" << text;
    }
    return failed ? kSolverFailure : kOk;
  });
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact and inexact variable projection on a blind deconvolution benchmark", "varpro-bench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VARPRO_VERSION);

  CommandOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string schedules;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "INI configuration file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_dir, "Output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "Noise seed (overrides problem.seed)");
    sub->add_option("--schedules", schedules, "Comma-separated schedules: b, lb, ab, s");
    sub->add_flag("--corrupt-derivative", opts.corrupt_derivative)->group("");
  };
  CLI::App* compare = app.add_subcommand("compare", "Run the exact and inexact solvers and write traces");
  CLI::App* bounds = app.add_subcommand("bounds", "Check inner-solve errors against their bounds");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Check the reduced Jacobian and gradient by finite differences");
  CLI::App* table = app.add_subcommand("table", "Per-iteration table for the exact and halving-schedule runs");
  for (CLI::App* sub : {compare, bounds, gradcheck, table}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kConfigError);
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) opts.out_dir = out_dir;
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--schedules")) {
    std::vector<ScheduleKind> kinds;
    std::istringstream in(schedules);
    std::string item;
    while (std::getline(in, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (item.empty()) continue;
      const auto kind = parse_schedule_label(item);
      if (!kind) {
        err << "configuration error: --schedules: unknown schedule '" << item << "'\n";
        return kConfigError;
      }
      kinds.push_back(*kind);
    }
    opts.schedules = kinds;
  }

  if (sub == compare) return run_compare(opts, out, err);
  if (sub == bounds) return run_bounds(opts, out, err);
  if (sub == gradcheck) return run_gradcheck(opts, out, err);
  return run_table(opts, out, err);
}

}  // namespace varpro::cli
