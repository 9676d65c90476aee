#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "udo/planner.hpp"
#include "udo/space.hpp"

namespace udo {

/// Base for failures of the system under test.
class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The benchmark command ran but exited with a nonzero status.
class BenchmarkFailure : public EnvironmentError {
 public:
  BenchmarkFailure(const std::string& what, int exit_code) : EnvironmentError(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

/// The benchmark command's last output line is not a finite number.
class MetricParseError : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

class BenchmarkTimeout : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

/// A system whose configuration can be changed and benchmarked. Metrics follow
/// the higher-is-better convention.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const ConfigurationSpace& space() const = 0;
  /// Benchmarks `config`. Its heavy part must match the current system state.
  virtual double evaluate(const Configuration& config) = 0;
  /// Moves the system to the heavy part of `target`, charging reconfiguration time.
  virtual void reconfigure(const Configuration& target) = 0;
  /// Heavy projection of the configuration the system is currently in.
  virtual const Configuration& current() const = 0;
  /// Elapsed (simulated or wall) time, evaluation plus reconfiguration.
  virtual double clock() const = 0;
  virtual double reconfiguration_time() const = 0;
  /// Noise-free expected metric, when the environment knows it.
  virtual std::optional<double> expected(const Configuration&) const { return std::nullopt; }
  /// Called at the start of every main-loop iteration.
  virtual void on_iteration(std::uint64_t /*iteration*/) {}
};

// ---------------------------------------------------------------------------

struct Interaction {
  std::size_t heavy_id = 0;
  std::size_t light_id = 0;
  std::vector<std::vector<double>> table;  // [heavy value][light value]
};

struct SimTables {
  double base = 0.0;
  std::vector<std::vector<double>> main;  // [param][value]
  std::vector<Interaction> interactions;
};

struct SimOptions {
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  double heavy_switch_time = 1.0;  // clock units per unit of switch cost
  double eval_time = 1.0;
};

/// Synthetic benchmark: main effects plus heavy x light interactions plus
/// Gaussian noise, with a simulated clock.
class SimEnv : public Environment {
 public:
  SimEnv(ConfigurationSpace space, SimTables tables, SimOptions options);

  /// Desk-scale default: three index parameters (creation cost 50, 80, 120)
  /// and three four-valued runtime knobs, noise = `noise_fraction` of the range.
  static SimEnv make_default(std::uint64_t seed, double noise_fraction = 0.05);
  static ConfigurationSpace default_space();
  static SimTables default_tables();

  const ConfigurationSpace& space() const override { return space_; }
  const CostModel& cost_model() const { return cost_model_; }
  const SimTables& tables() const { return tables_; }
  const SimOptions& options() const { return options_; }

  double table_value(const Configuration& config) const;
  std::optional<double> expected(const Configuration& config) const override { return table_value(config); }

  double evaluate(const Configuration& config) override;
  void apply_heavy(const Configuration& from, const Configuration& to, const CostModel& model);
  void reconfigure(const Configuration& target) override { apply_heavy(current_, target, cost_model_); }

  const Configuration& current() const override { return current_; }
  double clock() const override { return clock_; }
  double reconfiguration_time() const override { return reconf_time_; }
  double evaluation_time() const { return eval_time_total_; }
  std::uint64_t evaluations() const { return evaluations_; }

  /// max - min of the table value over the whole space (brute force).
  double table_range() const;

 private:
  ConfigurationSpace space_;
  SimTables tables_;
  SimOptions options_;
  CostModel cost_model_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};

  Configuration current_;
  double clock_ = 0.0;
  double reconf_time_ = 0.0;
  double eval_time_total_ = 0.0;
  std::uint64_t evaluations_ = 0;
};

double sim_evaluate(SimEnv& env, const Configuration& config);
void sim_apply_heavy(SimEnv& env, const Configuration& from, const Configuration& to, const CostModel& model);

// ---------------------------------------------------------------------------

struct ScriptOptions {
  std::string evaluate_command;
  std::string reconfigure_command;  // optional
  double timeout_s = 600.0;
  std::string reload_command;       // optional, e.g. restore a database snapshot
  std::size_t reload_every = 0;     // iterations between reloads; 0 disables
  std::string work_dir;             // temp files; defaults to the system temp directory
};

/// Black-box benchmark driven by shell commands.
///
/// The evaluate command receives the path of a `name=value` file (one pair per
/// line, LF-terminated) and must print the metric on its last output line. The
/// reconfigure command receives the old and the new configuration file paths.
class ScriptEnv : public Environment {
 public:
  ScriptEnv(ConfigurationSpace space, ScriptOptions options);
  ~ScriptEnv() override;

  const ConfigurationSpace& space() const override { return space_; }
  double evaluate(const Configuration& config) override;
  void reconfigure(const Configuration& target) override;
  void on_iteration(std::uint64_t iteration) override;
  const Configuration& current() const override { return current_; }
  double clock() const override { return clock_; }
  double reconfiguration_time() const override { return reconf_time_; }

  /// `name=value` rendering handed to the scripts.
  std::string render(const Configuration& config) const;

 private:
  std::string write_config(const Configuration& config, const std::string& tag) const;

  ConfigurationSpace space_;
  ScriptOptions options_;
  CostModel cost_model_;
  std::string dir_;
  bool owns_dir_ = false;
  Configuration current_;
  double clock_ = 0.0;
  double reconf_time_ = 0.0;
};

double script_evaluate(ScriptEnv& env, const Configuration& config);

struct CommandOutput {
  int exit_code = 0;
  std::string stdout_text;
  bool timed_out = false;
};

/// Runs `/bin/sh -c command`, capturing stdout, killing it after `timeout_s`.
CommandOutput run_command(const std::string& command, double timeout_s);

/// Parses the last non-empty line of `output` as a finite number.
double parse_metric(const std::string& output);

/// Higher-is-better composite of elapsed time and disk usage: -disk - weight * time.
double composite_metric(double time_s, double disk_mb, double sigma_weight);

}  // namespace udo
