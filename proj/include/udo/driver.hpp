#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "udo/bandit.hpp"
#include "udo/env.hpp"
#include "udo/evaluator.hpp"
#include "udo/mcts.hpp"
#include "udo/planner.hpp"
#include "udo/space.hpp"

namespace udo {

enum class EnvKind { Sim, Script };

struct SimBinding {
  std::uint64_t seed = 0;
  double noise_fraction = 0.05;      // of the table range; ignored when noise_sigma is set
  std::optional<double> noise_sigma;
  double heavy_switch_time = 1.0;
  double eval_time = 1.0;
  std::optional<SimTables> tables;   // required for custom spaces
};

struct RunSpec {
  std::vector<ParameterSpec> params;  // empty: the simulator's default space
  EnvKind env = EnvKind::Sim;
  SimBinding sim;
  ScriptOptions script;

  SelectionPolicy heavy_policy = SelectionPolicy::Ucbv;
  SelectionPolicy light_policy = SelectionPolicy::Ucbv;
  BanditParams heavy_params{};
  BanditParams light_params{};  // tau_max forced to 0
  std::size_t heavy_horizon = kDefaultHeavyHorizon;
  std::size_t light_horizon = kDefaultLightHorizon;
  std::size_t one_level_horizon = kDefaultOneLevelHorizon;
  std::size_t light_budget = kDefaultLightBudget;
  std::size_t light_cache_cap = 0;

  PickerKind picker = PickerKind::Secretary;
  std::optional<std::size_t> rho;  // unset: min(20, tau)
  PlannerKind planner = PlannerKind::Auto;

  std::size_t iterations = 400;
  std::optional<double> time_budget;  // clock units of the environment
  std::optional<std::size_t> patience;  // stop after this many iterations without improvement

  std::uint64_t seed = 0;
  std::string output;

  std::size_t tau() const { return heavy_params.tau_max; }
  std::size_t effective_rho() const { return rho ? *rho : std::min<std::size_t>(kDefaultPickThreshold, tau()); }
  void validate() const;
};

/// Parses a JSON run spec; throws SpecError with a readable message on any problem.
RunSpec parse_spec(const std::string& json_text);
RunSpec load_spec(const std::string& path);

std::unique_ptr<Environment> make_environment(const RunSpec& spec);

struct TraceRow {
  std::uint64_t iter = 0;
  double time = 0.0;
  Configuration config;
  double raw = 0.0;
  double reward = 0.0;
  Configuration best_config;
  double best_raw = 0.0;
  double cum_reconf_cost = 0.0;
  SampleKind kind = SampleKind::Light;
};

struct RunResult {
  Configuration best;
  double best_raw = 0.0;
  std::vector<TraceRow> trace;
  std::uint64_t iterations = 0;
  std::uint64_t heavy_evaluations = 0;
  std::uint64_t failures = 0;
  std::vector<std::string> errors;
  std::string stop_reason;
};

/// Two-level tuning loop: select heavy, submit with deadline t + tau, receive, update.
RunResult run_udo(const RunSpec& spec, Environment& env);
RunResult run_udo(const RunSpec& spec);

/// Single MDP over all parameters, zero delay, every configuration benchmarked immediately.
RunResult run_one_level(const RunSpec& spec, Environment& env);
RunResult run_one_level(const RunSpec& spec);

struct Optimum {
  Configuration config;
  double value = 0.0;
};

/// Exhaustive argmax of the expected metric. Uses the environment's noise-free
/// value when available, else the mean of `samples` benchmark runs per configuration.
Optimum brute_force_optimum(const ConfigurationSpace& space, Environment& env, std::size_t samples = 1);

using ExpectedFn = std::function<double(const Configuration&)>;

/// series[i] = sum over rows j <= i of (f_star - E[f(config_j)]).
std::vector<double> cumulative_regret(const std::vector<TraceRow>& trace, double f_star, const ExpectedFn& expected);

struct SublinearityReport {
  std::vector<std::size_t> checkpoints;
  std::vector<double> ratios;  // regret(T) / T
  bool pass = false;           // strictly decreasing
};

SublinearityReport sublinearity_report(const std::vector<double>& series, const std::vector<std::size_t>& checkpoints);

inline constexpr const char* kTraceVersionLine = "# udo-trace v1";
inline constexpr const char* kTraceHeader = "iter,time,config,raw,reward,best_config,best_raw,cum_reconf_cost";

void emit_trace(std::ostream& out, const std::vector<TraceRow>& trace);
std::string render_trace(const std::vector<TraceRow>& trace);

/// Shortest round-trip decimal rendering.
std::string format_number(double value);

}  // namespace udo
