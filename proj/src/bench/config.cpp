#include "varpro/bench/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "varpro/bounds.hpp"
#include "varpro/direct.hpp"

namespace varpro::bench {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(field, "cannot parse '" + text + "' as a number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(field, "must be finite");
  }
  return value;
}

std::vector<double> parse_doubles(const std::string& field, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<double>(field, item));
  return out;
}

NormEstimate parse_norm(const std::string& field, const std::string& text) {
  const std::string s = trim(text);
  if (s == "internal") return NormEstimate::InternalBidiagonal;
  if (s == "svd") return NormEstimate::ExplicitSvd;
  throw ConfigError(field, "expected 'internal' or 'svd', got '" + s + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& field, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"problem",
       {
           {"n", [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.n = parse_number<long>(f, v); }},
           {"sigma_true",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.sigma_true = parse_number<double>(f, v); }},
           {"noise_level",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.noise_level = parse_number<double>(f, v); }},
           {"lambda",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.lambda = parse_number<double>(f, v); }},
           {"seed",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.seed = parse_number<std::uint64_t>(f, v); }},
           {"y0", [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.y0 = parse_doubles(f, v); }},
           {"tau", [](RunConfig& c, const std::string& f, const std::string& v) { c.problem.tau = parse_number<double>(f, v); }},
           {"signal", [](RunConfig& c, const std::string&, const std::string& v) { c.problem.signal = trim(v); }},
           {"model", [](RunConfig& c, const std::string&, const std::string& v) { c.problem.model = trim(v); }},
       }},
      {"solver",
       {
           {"max_outer_iterations",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.max_outer_iterations = parse_number<int>(f, v); }},
           {"step_tolerance",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.step_tolerance = parse_number<double>(f, v); }},
           {"gradient_tolerance",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.gradient_tolerance = parse_number<double>(f, v); }},
           {"lsqr_max_iterations",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.lsqr_max_iterations = parse_number<int>(f, v); }},
           {"norm_estimate",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.norm_estimate = parse_norm(f, v); }},
           {"epsilon0",
            [](RunConfig& c, const std::string& f, const std::string& v) {
              const std::string s = trim(v);
              if (s == "reference" || s == "auto") {
                c.solver.epsilon0_mode = s;
                c.solver.epsilon0.clear();
              } else {
                c.solver.epsilon0_mode = "values";
                c.solver.epsilon0 = parse_doubles(f, s);
              }
            }},
           {"safety", [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.safety = parse_number<double>(f, v); }},
           {"epsilon_floor",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.solver.epsilon_floor = parse_number<double>(f, v); }},
       }},
      {"schedules",
       {
           {"run",
            [](RunConfig& c, const std::string& f, const std::string& v) {
              c.schedules.clear();
              for (const auto& item : split_list(v)) {
                const auto kind = parse_schedule_label(item);
                if (!kind) throw ConfigError(f, "unknown schedule '" + item + "'");
                c.schedules.push_back(*kind);
              }
            }},
       }},
      {"checks",
       {
           {"gradcheck_points",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.gradcheck_points = parse_number<int>(f, v); }},
           {"gradcheck_y_min",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.gradcheck_y_min = parse_number<double>(f, v); }},
           {"gradcheck_y_max",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.gradcheck_y_max = parse_number<double>(f, v); }},
           {"gradcheck_tolerance",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.gradcheck_tolerance = parse_number<double>(f, v); }},
           {"jacobian_fd_step",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.jacobian_fd_step = parse_number<double>(f, v); }},
           {"gradient_fd_step",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.gradient_fd_step = parse_number<double>(f, v); }},
           {"table_iterations",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.table_iterations = parse_number<int>(f, v); }},
           {"bound_report_threshold",
            [](RunConfig& c, const std::string& f, const std::string& v) { c.checks.bound_report_threshold = parse_number<double>(f, v); }},
       }},
      {"output",
       {
           {"dir", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); }},
       }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  problem.validate();
  if (solver.max_outer_iterations < 0) throw ConfigError("solver.max_outer_iterations", "must be >= 0");
  if (!(solver.step_tolerance >= 0.0)) throw ConfigError("solver.step_tolerance", "must be >= 0");
  if (!(solver.gradient_tolerance >= 0.0)) throw ConfigError("solver.gradient_tolerance", "must be >= 0");
  if (solver.lsqr_max_iterations < 1) throw ConfigError("solver.lsqr_max_iterations", "must be >= 1");
  if (!(solver.safety > 0.0)) throw ConfigError("solver.safety", "must be positive");
  if (!(solver.epsilon_floor > 0.0)) throw ConfigError("solver.epsilon_floor", "must be positive");
  if (solver.epsilon0_mode == "values") {
    if (solver.epsilon0.size() != 1 && solver.epsilon0.size() != problem.y0.size())
      throw ConfigError("solver.epsilon0", "give one value, or one per starting point");
    for (double e : solver.epsilon0)
      if (!(e > 0.0)) throw ConfigError("solver.epsilon0", "values must be positive");
  } else if (solver.epsilon0_mode == "reference") {
    for (double y : problem.y0) reference_epsilon0(y);
  } else if (solver.epsilon0_mode != "auto") {
    throw ConfigError("solver.epsilon0", "unknown mode '" + solver.epsilon0_mode + "'");
  }
  if (schedules.empty()) throw ConfigError("schedules.run", "needs at least one schedule");
  if (checks.gradcheck_points < 1) throw ConfigError("checks.gradcheck_points", "must be >= 1");
  if (!(checks.gradcheck_y_min > 0.0) || !(checks.gradcheck_y_max >= checks.gradcheck_y_min))
    throw ConfigError("checks.gradcheck_y_min", "need 0 < gradcheck_y_min <= gradcheck_y_max");
  if (!(checks.gradcheck_tolerance > 0.0)) throw ConfigError("checks.gradcheck_tolerance", "must be positive");
  if (!(checks.jacobian_fd_step > 0.0)) throw ConfigError("checks.jacobian_fd_step", "must be positive");
  if (!(checks.gradient_fd_step > 0.0)) throw ConfigError("checks.gradient_fd_step", "must be positive");
  if (checks.table_iterations < 0) throw ConfigError("checks.table_iterations", "must be >= 0");
  if (!(checks.bound_report_threshold >= 0.0)) throw ConfigError("checks.bound_report_threshold", "must be >= 0");
  if (output_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

double reference_epsilon0(double y0) {
  if (y0 == 2.0) return 1.8718e-4;
  if (y0 == 4.0) return 1.1239e-4;
  throw ConfigError("solver.epsilon0", "reference values exist only for y0 = 2 and y0 = 4; use 'auto' or explicit values");
}

double resolve_epsilon0(const RunConfig& cfg, const ProblemInstance& p, std::size_t y0_index) {
  if (y0_index >= cfg.problem.y0.size()) throw InvalidArgument("resolve_epsilon0: index out of range");
  const double y0 = cfg.problem.y0[y0_index];
  if (cfg.solver.epsilon0_mode == "reference") return reference_epsilon0(y0);
  if (cfg.solver.epsilon0_mode == "values")
    return cfg.solver.epsilon0.size() == 1 ? cfg.solver.epsilon0[0] : cfg.solver.epsilon0[y0_index];
  const VectorXd y = VectorXd::Constant(1, y0);
  return initial_tolerance(condition_number(stack(p.model.A(y), p.L, p.lambda)), cfg.solver.safety);
}

RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string("malformed INI: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    const auto sec = table.find(section);
    if (sec == table.end()) {
      if (body.empty()) throw ConfigError(section, "keys must be inside a section");
      throw ConfigError(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError(field, "unknown key");
      setter->second(cfg, field, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream o;
  o << "[problem]\n"
    << "n = " << c.problem.n << "\n"
    << "sigma_true = " << format_double(c.problem.sigma_true) << "\n"
    << "noise_level = " << format_double(c.problem.noise_level) << "\n"
    << "lambda = " << format_double(c.problem.lambda) << "\n"
    << "seed = " << c.problem.seed << "\n"
    << "y0 = " << join_doubles(c.problem.y0) << "\n"
    << "tau = " << format_double(c.problem.tau) << "\n"
    << "signal = " << c.problem.signal << "\n"
    << "model = " << c.problem.model << "\n\n";
  o << "[solver]\n"
    << "max_outer_iterations = " << c.solver.max_outer_iterations << "\n"
    << "step_tolerance = " << format_double(c.solver.step_tolerance) << "\n"
    << "gradient_tolerance = " << format_double(c.solver.gradient_tolerance) << "\n"
    << "lsqr_max_iterations = " << c.solver.lsqr_max_iterations << "\n"
    << "norm_estimate = " << (c.solver.norm_estimate == NormEstimate::ExplicitSvd ? "svd" : "internal") << "\n"
    << "epsilon0 = " << (c.solver.epsilon0_mode == "values" ? join_doubles(c.solver.epsilon0) : c.solver.epsilon0_mode)
    << "\n"
    << "safety = " << format_double(c.solver.safety) << "\n"
    << "epsilon_floor = " << format_double(c.solver.epsilon_floor) << "\n\n";
  o << "[schedules]\nrun = ";
  for (std::size_t i = 0; i < c.schedules.size(); ++i) o << (i ? ", " : "") << schedule_label(c.schedules[i]);
  o << "\n\n[checks]\n"
    << "gradcheck_points = " << c.checks.gradcheck_points << "\n"
    << "gradcheck_y_min = " << format_double(c.checks.gradcheck_y_min) << "\n"
    << "gradcheck_y_max = " << format_double(c.checks.gradcheck_y_max) << "\n"
    << "gradcheck_tolerance = " << format_double(c.checks.gradcheck_tolerance) << "\n"
    << "jacobian_fd_step = " << format_double(c.checks.jacobian_fd_step) << "\n"
    << "gradient_fd_step = " << format_double(c.checks.gradient_fd_step) << "\n"
    << "table_iterations = " << c.checks.table_iterations << "\n"
    << "bound_report_threshold = " << format_double(c.checks.bound_report_threshold) << "\n\n";
  o << "[output]\ndir = " << c.output_dir << "\n";
  return o.str();
}

}  // namespace varpro::bench
