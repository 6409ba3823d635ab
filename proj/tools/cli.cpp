// Copyright 2026 The lqgcm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqgcm/lqgcm.hpp"

namespace lqgcm::cli {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kOutputDirEnv = "LQGCM_OUTPUT_DIR";

struct CommonOptions {
  std::string problem_path;
  std::optional<double> O;
  std::string propagation;
  std::string out_path;
  std::string format;
  bool error_json = false;
};

/// Failure carrying its exit code and an optional machine-readable payload.
struct CommandError {
  int code;
  std::string kind;
  std::string message;
  json details = json::object();
};

json period_json(Period p) { return p ? json(*p) : json("inf"); }

std::string period_text(Period p) { return p ? std::to_string(*p) : std::string("inf"); }

std::string resolve_output(const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) p = std::filesystem::path(dir) / p;
  }
  return p.string();
}

/// Writes `body` to --out (or `out` when absent).
void emit(const CommonOptions& opts, std::ostream& out, const std::string& body) {
  if (opts.out_path.empty()) {
    out << body;
    return;
  }
  const std::string path = resolve_output(opts.out_path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CommandError{kValidation, "io", "cannot write output file: " + path};
  f << body;
}

struct Loaded {
  ProblemFile file;
  PolicyOptions policy;
};

Loaded load(const CommonOptions& opts) {
  Loaded l;
  try {
    l.file = load_problem(opts.problem_path);
  } catch (const ConfigError& e) {
    throw CommandError{kValidation, "config", e.what()};
  }
  if (opts.O) l.file.problem.cost.O = *opts.O;
  if (!opts.propagation.empty()) {
    const auto p = parse_propagation(opts.propagation);
    if (!p) throw CommandError{kValidation, "config", "unknown propagation: " + opts.propagation};
    l.file.propagation = *p;
  }
  const auto violations = validate(l.file.problem);
  if (!violations.empty()) {
    CommandError e{kValidation, "validation", "problem violates standing assumptions"};
    e.details["violations"] = json::array();
    for (const auto& v : violations)
      e.details["violations"].push_back({{"code", std::string(to_string(v.code))}, {"message", v.message}});
    throw e;
  }
  l.policy.propagation = l.file.propagation;
  return l;
}

json solve_report(const ProblemFile& file, const PolicySolution& ps) {
  const auto& sys = file.problem.sys;
  const auto v = value_at(ps, file.problem.x0);
  json j;
  if (!file.name.empty()) j["name"] = file.name;
  j["propagation"] = std::string(to_string(ps.inputs.propagation));
  j["O"] = ps.O();
  j["beta"] = ps.beta();
  j["P"] = to_json(ps.are().P);
  j["K"] = to_json(ps.are().K);
  j["phi"] = to_json(ps.are().phi);
  j["are_iterations"] = ps.are().iterations;
  j["are_residual"] = ps.are().residual;
  j["warnings"] = ps.are().warnings;
  j["case"] = std::string(to_string(ps.case_id));
  j["T_star"] = period_json(ps.T_star);
  j["r"] = ps.r;
  j["V_x0"] = v.V;
  j["V_s_x0"] = v.V_s;
  j["V_c_x0"] = v.V_c;
  j["V_e_x0"] = v.V_e;
  j["V_e_without_noise_x0"] = v.V_e_without_noise;
  j["measurement_saving"] = v.measurement_saving;
  const Vector mags = eigenvalue_magnitudes(sys.A);
  j["eigenvalue_magnitudes"] = to_json(mags);
  j["schur_stable"] = mags(0) < 1.0 - kStabilityMargin;
  if (j["schur_stable"].get<bool>()) {
    j["W_inf"] = to_json(lyapunov_solve(sys, ps.inputs.propagation));
    j["never_measure_threshold"] = *ps.never_measure_threshold;
  }
  return j;
}

std::string as_key_value_csv(const json& j) {
  std::ostringstream os;
  os << "field,value\n";
  for (const auto& [key, val] : j.items()) {
    if (val.is_array() && !val.empty() && val[0].is_array()) {
      for (std::size_t r = 0; r < val.size(); ++r)
        for (std::size_t c = 0; c < val[r].size(); ++c)
          os << key << '_' << r + 1 << c + 1 << ',' << format_double(val[r][c].get<double>()) << '\n';
    } else if (val.is_array()) {
      for (std::size_t i = 0; i < val.size(); ++i)
        os << key << '_' << i + 1 << ',' << (val[i].is_number() ? format_double(val[i].get<double>()) : val[i].dump()) << '\n';
    } else if (val.is_number_float()) {
      os << key << ',' << format_double(val.get<double>()) << '\n';
    } else if (val.is_string()) {
      os << key << ',' << val.get<std::string>() << '\n';
    } else {
      os << key << ',' << val.dump() << '\n';
    }
  }
  return os.str();
}

template <typename Fn>
PolicySolution guarded_solve(Fn&& fn) {
  try {
    return fn();
  } catch (const NonConvergence& e) {
    CommandError err{kConvergence, "convergence", e.what()};
    err.details["last_residual"] = e.last_residual();
    throw err;
  } catch (const PeriodSearchExhausted& e) {
    throw CommandError{kConvergence, "convergence", e.what()};
  }
}

int cmd_solve(const CommonOptions& opts, const std::string& write_problem, std::ostream& out) {
  const auto l = load(opts);
  if (!write_problem.empty()) {
    const std::string path = resolve_output(write_problem);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CommandError{kValidation, "io", "cannot write problem file: " + path};
    f << problem_to_json(l.file).dump(2) << '\n';
  }
  const auto ps = guarded_solve([&] {
    return optimal_period(l.file.problem.sys, l.file.problem.cost, l.policy);
  });
  const json report = solve_report(l.file, ps);
  emit(opts, out, opts.format == "csv" ? as_key_value_csv(report) : report.dump(2) + "\n");
  return kOk;
}

struct SweepOptions {
  std::optional<double> O_min, O_max, O_step;
  int O_log = 0;
  std::vector<double> O_values;
};

std::vector<double> sweep_grid(const SweepOptions& s) {
  if (!s.O_values.empty()) {
    for (double o : s.O_values)
      if (!(o >= 0.0)) throw CommandError{kValidation, "arguments", "O values must be >= 0"};
    return s.O_values;
  }
  if (!s.O_min || !s.O_max)
    throw CommandError{kValidation, "arguments", "sweep needs --O-values or --O-min/--O-max"};
  const double lo = *s.O_min, hi = *s.O_max;
  if (!(lo >= 0.0) || !(hi >= lo))
    throw CommandError{kValidation, "arguments", "O range must satisfy 0 <= O-min <= O-max"};
  std::vector<double> grid;
  if (s.O_log > 0) {
    if (s.O_log < 2 || !(lo > 0.0))
      throw CommandError{kValidation, "arguments", "--O-log needs n >= 2 and O-min > 0"};
    const double a = std::log10(lo), b = std::log10(hi);
    for (int k = 0; k < s.O_log; ++k) grid.push_back(std::pow(10.0, a + (b - a) * k / (s.O_log - 1)));
    return grid;
  }
  if (!s.O_step || !(*s.O_step > 0.0))
    throw CommandError{kValidation, "arguments", "O range needs a positive --O-step"};
  const auto n = static_cast<long>(std::floor((hi - lo) / *s.O_step + 1e-9));
  for (long k = 0; k <= n; ++k) grid.push_back(lo + k * *s.O_step);
  return grid;
}

int cmd_sweep(const CommonOptions& opts, const SweepOptions& sweep, std::ostream& out) {
  const auto l = load(opts);
  const auto grid = sweep_grid(sweep);
  const auto& x0 = l.file.problem.x0;
  const auto base = guarded_solve([&] {
    CostModel c = l.file.problem.cost;
    c.O = grid.front();
    return optimal_period(l.file.problem.sys, c, l.policy);
  });
  json rows = json::array();
  std::ostringstream csv;
  csv << "O,T_star,case,r,V_x0,V_s_x0,V_e_x0,saving\n";
  for (double O : grid) {
    const auto ps = guarded_solve([&] { return with_measurement_cost(base, O, l.policy.max_period); });
    const auto v = value_at(ps, x0);
    rows.push_back({{"O", O},
                    {"T_star", period_json(ps.T_star)},
                    {"case", std::string(to_string(ps.case_id))},
                    {"r", ps.r},
                    {"V_x0", v.V},
                    {"V_s_x0", v.V_s},
                    {"V_e_x0", v.V_e},
                    {"saving", v.measurement_saving}});
    csv << format_double(O) << ',' << period_text(ps.T_star) << ',' << to_string(ps.case_id) << ','
        << format_double(ps.r) << ',' << format_double(v.V) << ',' << format_double(v.V_s) << ','
        << format_double(v.V_e) << ',' << format_double(v.measurement_saving) << '\n';
  }
  emit(opts, out, opts.format == "json" ? rows.dump(2) + "\n" : csv.str());
  return kOk;
}

struct SimulateOptions {
  int horizon = 70;
  std::uint64_t seed = 1;
  int runs = 1;
  std::string strategy = "optimal";
};

int cmd_simulate(const CommonOptions& opts, const SimulateOptions& so, std::ostream& out,
                 std::ostream& err) {
  const auto l = load(opts);
  if (so.horizon < 1) throw CommandError{kValidation, "arguments", "--horizon must be >= 1"};
  if (so.runs < 1) throw CommandError{kValidation, "arguments", "--runs must be >= 1"};
  const auto strategy = parse_strategy(so.strategy);
  if (!strategy) throw CommandError{kValidation, "arguments", "unknown strategy: " + so.strategy};
  const auto ps = guarded_solve([&] {
    return optimal_period(l.file.problem.sys, l.file.problem.cost, l.policy);
  });
  SimConfig cfg;
  cfg.horizon = so.horizon;
  cfg.seed = so.seed;
  cfg.n_runs = so.runs;
  cfg.strategy = *strategy;
  const auto rec = simulate(l.file.problem, ps, cfg);

  std::string body;
  if (opts.format == "json") {
    json rows = json::array();
    for (const auto& s : rec.steps)
      rows.push_back({{"t", s.t},
                      {"x", to_json(s.x)},
                      {"xbar", to_json(s.x_bar)},
                      {"err", to_json(s.err)},
                      {"u", to_json(s.u)},
                      {"i", s.measured ? 1 : 0},
                      {"stage_cost", s.stage_cost},
                      {"cum_cost", s.cum_cost}});
    body = rows.dump(2) + "\n";
  } else {
    std::ostringstream os;
    write_trajectory_csv(os, rec);
    body = os.str();
  }
  emit(opts, out, body);

  std::ostream& summary = opts.out_path.empty() ? err : out;
  summary << "strategy " << strategy->name() << ", T* = " << period_text(ps.T_star)
          << ", realized discounted cost " << format_double(rec.total_cost()) << ", measurements "
          << rec.measurements << '\n';
  if (so.runs > 1) {
    const auto mc = monte_carlo_value(l.file.problem, ps, cfg);
    summary << "monte carlo over " << mc.runs << " runs (horizon " << mc.horizon
            << "): mean " << format_double(mc.mean) << ", std error " << format_double(mc.std_error)
            << '\n';
  }
  return kOk;
}

json oracle_json(const OracleReport& o) {
  json curve = json::array();
  for (const auto& [T, f] : o.f_curve) curve.push_back({T, f});
  json j{{"r_oracle", o.r_oracle},
         {"T_oracle", period_json(o.T_oracle)},
         {"argmin", o.argmin},
         {"grid_capped", o.grid_capped},
         {"strictly_decreasing", o.strictly_decreasing},
         {"convergence_iters", o.convergence_iters},
         {"max_contraction_ratio", o.max_contraction_ratio},
         {"T_max", o.T_max},
         {"note", o.note},
         {"f_curve", std::move(curve)}};
  if (o.inner_dp_gap) j["inner_dp_gap"] = *o.inner_dp_gap;
  return j;
}

int cmd_verify(const CommonOptions& opts, double corrupt_r, std::ostream& out, std::ostream& err) {
  const auto l = load(opts);
  auto ps = guarded_solve([&] {
    return optimal_period(l.file.problem.sys, l.file.problem.cost, l.policy);
  });
  ps.r += corrupt_r;
  const auto rep = verify_policy(l.file.problem, ps);
  json checks = json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  json j{{"passed", rep.passed()},
         {"T_star", period_json(ps.T_star)},
         {"r", ps.r},
         {"checks", std::move(checks)},
         {"oracle", oracle_json(rep.oracle)}};
  emit(opts, out, j.dump(2) + "\n");
  if (!rep.passed()) {
    for (const auto& c : rep.checks)
      if (!c.passed) err << "verification failed: " << c.name << " (" << c.detail << ")\n";
    return kVerification;
  }
  if (!rep.oracle.note.empty()) err << rep.oracle.note << '\n';
  return kOk;
}

void add_common(CLI::App* sub, CommonOptions& o, const std::string& default_format) {
  sub->add_option("--problem", o.problem_path, "Problem file (JSON)")->required();
  sub->add_option("--propagation", o.propagation,
                  "Error propagation form: observability (default) or covariance");
  sub->add_option("--out", o.out_path,
                  std::string("Output file; relative paths resolve against $") + kOutputDirEnv);
  o.format = default_format;
  sub->add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sub->add_flag("--error-json", o.error_json, "Print failures as JSON on stdout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal control and measurement co-design for discounted LQG with costly measurements"};
  app.footer(
      "Exit codes: 0 ok, 2 validation or argument failure, 3 solver non-convergence, "
      "4 verification failure.");
  app.require_subcommand(1);

  CommonOptions solve_o, sweep_o, sim_o, verify_o;
  double solve_O = 0.0, sim_O = 0.0, verify_O = 0.0;

  auto* solve = app.add_subcommand("solve", "Riccati solution, optimal period, offset and values");
  add_common(solve, solve_o, "json");
  auto* solve_O_opt = solve->add_option("--O", solve_O, "Measurement cost (overrides the file)");
  std::string write_problem;
  solve->add_option("--write-problem", write_problem,
                    "Also write the effective problem (after overrides) to this file");

  SweepOptions sweep_s;
  double omin = 0, omax = 0, ostep = 0;
  auto* sweep = app.add_subcommand("sweep", "Optimal period and values over a range of O");
  add_common(sweep, sweep_o, "csv");
  auto* omin_opt = sweep->add_option("--O-min", omin, "Smallest O");
  auto* omax_opt = sweep->add_option("--O-max", omax, "Largest O");
  auto* ostep_opt = sweep->add_option("--O-step", ostep, "Linear step");
  sweep->add_option("--O-log", sweep_s.O_log, "Number of log-spaced points between O-min and O-max");
  sweep->add_option("--O-values", sweep_s.O_values, "Explicit comma-separated O values")
      ->delimiter(',');

  SimulateOptions sim_s;
  auto* simulate_cmd = app.add_subcommand("simulate", "Closed-loop trajectory export");
  add_common(simulate_cmd, sim_o, "csv");
  auto* sim_O_opt = simulate_cmd->add_option("--O", sim_O, "Measurement cost (overrides the file)");
  simulate_cmd->add_option("--horizon", sim_s.horizon, "Number of steps")->capture_default_str();
  simulate_cmd->add_option("--seed", sim_s.seed, "RNG seed")->capture_default_str();
  simulate_cmd->add_option("--runs", sim_s.runs, "Runs; > 1 adds a Monte Carlo summary")
      ->capture_default_str();
  simulate_cmd->add_option("--strategy", sim_s.strategy, "optimal | always | never | fixed:<T>")
      ->capture_default_str();

  double corrupt_r = 0.0;
  auto* verify = app.add_subcommand("verify", "Check the analytic solution against the DP oracle");
  add_common(verify, verify_o, "json");
  auto* verify_O_opt = verify->add_option("--O", verify_O, "Measurement cost (overrides the file)");
  verify->add_option("--perturb-r", corrupt_r, "Add a constant to r before checking (negative control)")
      ->group("");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kValidation;
  }

  const CommonOptions* active = nullptr;
  std::function<int()> action;
  if (solve->parsed()) {
    if (*solve_O_opt) solve_o.O = solve_O;
    active = &solve_o;
    action = [&] { return cmd_solve(solve_o, write_problem, out); };
  } else if (sweep->parsed()) {
    if (*omin_opt) sweep_s.O_min = omin;
    if (*omax_opt) sweep_s.O_max = omax;
    if (*ostep_opt) sweep_s.O_step = ostep;
    active = &sweep_o;
    action = [&] { return cmd_sweep(sweep_o, sweep_s, out); };
  } else if (simulate_cmd->parsed()) {
    if (*sim_O_opt) sim_o.O = sim_O;
    active = &sim_o;
    action = [&] { return cmd_simulate(sim_o, sim_s, out, err); };
  } else {
    if (*verify_O_opt) verify_o.O = verify_O;
    active = &verify_o;
    action = [&] { return cmd_verify(verify_o, corrupt_r, out, err); };
  }

  try {
    return action();
  } catch (const CommandError& e) {
    if (active->error_json) {
      json j{{"error", e.kind}, {"exit_code", e.code}, {"message", e.message}};
      j.update(e.details);
      out << j.dump(2) << '\n';
    } else {
      err << "error: " << e.message << '\n';
      if (e.details.contains("violations"))
        for (const auto& v : e.details["violations"])
          err << "  " << v["code"].get<std::string>() << ": " << v["message"].get<std::string>() << '\n';
    }
    return e.code;
  }
}

}  // namespace lqgcm::cli
