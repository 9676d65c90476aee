#include "udo/env.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace udo {

namespace {

ParameterSpec make_param(std::size_t id, std::string name, ParamKind kind, std::vector<std::string> domain,
                         std::size_t def, double cost) {
  ParameterSpec p;
  p.id = id;
  p.name = std::move(name);
  p.kind = kind;
  p.domain = std::move(domain);
  p.default_index = def;
  p.cost_hint = cost;
  return p;
}

}  // namespace

ConfigurationSpace SimEnv::default_space() {
  std::vector<ParameterSpec> params;
  params.push_back(make_param(0, "idx_orders", ParamKind::Index, {"off", "on"}, 0, 50));
  params.push_back(make_param(1, "idx_lineitem", ParamKind::Index, {"off", "on"}, 0, 80));
  params.push_back(make_param(2, "idx_customer", ParamKind::Index, {"off", "on"}, 0, 120));
  params.push_back(make_param(3, "work_mem", ParamKind::Runtime, {"4MB", "16MB", "64MB", "256MB"}, 1, 0));
  params.push_back(make_param(4, "join_strategy", ParamKind::Runtime, {"auto", "hash", "merge", "nestloop"}, 0, 0));
  params.push_back(make_param(5, "parallel_workers", ParamKind::Runtime, {"0", "2", "4", "8"}, 1, 0));
  return ConfigurationSpace(std::move(params));
}

SimTables SimEnv::default_tables() {
  SimTables t;
  t.base = 100.0;
  t.main = {
      {0, 18},            // idx_orders
      {0, 30},            // idx_lineitem
      {0, 8},             // idx_customer
      {-6, 0, 7, 4},      // work_mem
      {0, 5, 2, -12},     // join_strategy
      {-5, 0, 6, 3},      // parallel_workers
  };
  // Nested loops only pay off with the right indexes; so do extra workers on customer scans.
  t.interactions = {
      {0, 4, {{0, 0, 0, 0}, {0, -3, 4, 22}}},
      {1, 4, {{0, 0, 0, 0}, {0, 0, 6, 14}}},
      {1, 3, {{0, 0, 0, 0}, {4, 2, -3, -6}}},
      {2, 5, {{0, 0, 0, 0}, {0, 2, 5, 12}}},
  };
  return t;
}

SimEnv::SimEnv(ConfigurationSpace space, SimTables tables, SimOptions options)
    : space_(std::move(space)),
      tables_(std::move(tables)),
      options_(options),
      cost_model_(space_),
      rng_(options.seed),
      current_(space_.heavy_projection(space_.defaults())) {
  if (tables_.main.size() != space_.size()) throw SpecError("main-effect table does not match the space");
  for (std::size_t i = 0; i < space_.size(); ++i) {
    if (tables_.main[i].size() != space_.param(i).domain.size())
      throw SpecError("main-effect row for '" + space_.param(i).name + "' has the wrong length");
  }
  for (const auto& x : tables_.interactions) {
    if (x.heavy_id >= space_.size() || x.light_id >= space_.size()) throw SpecError("interaction references unknown parameter");
    if (x.table.size() != space_.param(x.heavy_id).domain.size()) throw SpecError("interaction table has the wrong shape");
    for (const auto& row : x.table) {
      if (row.size() != space_.param(x.light_id).domain.size()) throw SpecError("interaction table has the wrong shape");
    }
  }
  if (!(options_.noise_sigma >= 0.0)) throw SpecError("noise_sigma must be nonnegative");
  if (!(options_.eval_time >= 0.0) || !(options_.heavy_switch_time >= 0.0)) throw SpecError("time scales must be nonnegative");
}

SimEnv SimEnv::make_default(std::uint64_t seed, double noise_fraction) {
  SimEnv probe(default_space(), default_tables(), SimOptions{seed, 0.0, 1.0, 1.0});
  const double sigma = noise_fraction * probe.table_range();
  return SimEnv(default_space(), default_tables(), SimOptions{seed, sigma, 1.0, 1.0});
}

double SimEnv::table_value(const Configuration& config) const {
  space_.validate(config);
  double v = tables_.base;
  for (std::size_t i = 0; i < config.size(); ++i) v += tables_.main[i][config[i]];
  for (const auto& x : tables_.interactions) v += x.table[config[x.heavy_id]][config[x.light_id]];
  return v;
}

double SimEnv::table_range() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  Configuration c = space_.defaults();
  for (auto& v : c.values) v = 0;
  while (true) {
    const double v = table_value(c);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    std::size_t i = 0;
    for (; i < c.size(); ++i) {
      if (++c[i] < space_.param(i).domain.size()) break;
      c[i] = 0;
    }
    if (i == c.size()) break;
  }
  return hi - lo;
}

double SimEnv::evaluate(const Configuration& config) {
  if (space_.heavy_projection(config) != current_)
    throw ContractViolation("evaluate: heavy part of " + to_string(config) + " differs from the current state " +
                            to_string(current_));
  double v = table_value(config);
  if (options_.noise_sigma > 0.0) v += options_.noise_sigma * noise_(rng_);
  clock_ += options_.eval_time;
  eval_time_total_ += options_.eval_time;
  ++evaluations_;
  return v;
}

void SimEnv::apply_heavy(const Configuration& from, const Configuration& to, const CostModel& model) {
  const double dt = model.switch_cost(from, to) * options_.heavy_switch_time;
  clock_ += dt;
  reconf_time_ += dt;
  current_ = space_.heavy_projection(to);
}

double sim_evaluate(SimEnv& env, const Configuration& config) { return env.evaluate(config); }

void sim_apply_heavy(SimEnv& env, const Configuration& from, const Configuration& to, const CostModel& model) {
  env.apply_heavy(from, to, model);
}

// ---------------------------------------------------------------------------

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

CommandOutput run_command(const std::string& command, double timeout_s) {
  int fds[2];
  if (pipe(fds) != 0) throw EnvironmentError(std::string("pipe failed: ") + std::strerror(errno));
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);

  CommandOutput out;
  const auto start = std::chrono::steady_clock::now();
  char buf[4096];
  bool open = true;
  while (open) {
    const double left = timeout_s - seconds_since(start);
    if (left <= 0.0) {
      out.timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int ms = static_cast<int>(std::min(left * 1000.0, 1000.0)) + 1;
    const int rc = poll(&pfd, 1, ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    const ssize_t n = read(fds[0], buf, sizeof buf);
    if (n > 0)
      out.stdout_text.append(buf, static_cast<std::size_t>(n));
    else if (n == 0 || errno != EINTR)
      open = false;
  }
  close(fds[0]);

  if (out.timed_out) {
    kill(-pid, SIGKILL);
    kill(pid, SIGKILL);
  }
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status))
    out.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status))
    out.exit_code = 128 + WTERMSIG(status);
  return out;
}

double parse_metric(const std::string& output) {
  std::istringstream in(output);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t");
    last = line.substr(b, e - b + 1);
  }
  if (last.empty()) throw MetricParseError("benchmark produced no output");
  double v = 0.0;
  const char* first = last.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, last.data() + last.size(), v);
  if (res.ec != std::errc() || res.ptr != last.data() + last.size() || !std::isfinite(v))
    throw MetricParseError("benchmark output '" + last + "' is not a finite number");
  return v;
}

ScriptEnv::ScriptEnv(ConfigurationSpace space, ScriptOptions options)
    : space_(std::move(space)), options_(std::move(options)), cost_model_(space_),
      current_(space_.heavy_projection(space_.defaults())) {
  if (options_.evaluate_command.empty()) throw SpecError("script environment needs an evaluate command");
  if (!(options_.timeout_s > 0.0)) throw SpecError("script timeout must be positive");
  if (options_.work_dir.empty()) {
    std::string tmpl = (std::filesystem::temp_directory_path() / "udo-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw EnvironmentError("cannot create a temporary directory");
    dir_ = tmpl;
    owns_dir_ = true;
  } else {
    dir_ = options_.work_dir;
    std::filesystem::create_directories(dir_);
  }
}

ScriptEnv::~ScriptEnv() {
  if (owns_dir_) {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
}

std::string ScriptEnv::render(const Configuration& config) const {
  space_.validate(config);
  std::string out;
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto& p = space_.param(i);
    out += p.name + "=" + p.domain[config[i]] + "\n";
  }
  return out;
}

std::string ScriptEnv::write_config(const Configuration& config, const std::string& tag) const {
  const std::string path = (std::filesystem::path(dir_) / (tag + ".conf")).string();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw EnvironmentError("cannot write " + path);
  f << render(config);
  if (!f) throw EnvironmentError("cannot write " + path);
  return path;
}

double ScriptEnv::evaluate(const Configuration& config) {
  if (space_.heavy_projection(config) != current_)
    throw ContractViolation("evaluate: heavy part of " + to_string(config) + " differs from the current state");
  const std::string path = write_config(config, "evaluate");
  const auto start = std::chrono::steady_clock::now();
  const CommandOutput out = run_command(options_.evaluate_command + " " + shell_quote(path), options_.timeout_s);
  clock_ += seconds_since(start);
  if (out.timed_out)
    throw BenchmarkTimeout("benchmark exceeded " + std::to_string(options_.timeout_s) + " s");
  if (out.exit_code != 0)
    throw BenchmarkFailure("benchmark exited with status " + std::to_string(out.exit_code), out.exit_code);
  return parse_metric(out.stdout_text);
}

void ScriptEnv::reconfigure(const Configuration& target) {
  const Configuration next = space_.heavy_projection(target);
  if (next == current_) return;
  if (!options_.reconfigure_command.empty()) {
    const std::string old_path = write_config(current_, "old");
    const std::string new_path = write_config(next, "new");
    const auto start = std::chrono::steady_clock::now();
    const CommandOutput out = run_command(
        options_.reconfigure_command + " " + shell_quote(old_path) + " " + shell_quote(new_path), options_.timeout_s);
    const double dt = seconds_since(start);
    clock_ += dt;
    reconf_time_ += dt;
    if (out.timed_out) throw BenchmarkTimeout("reconfiguration exceeded " + std::to_string(options_.timeout_s) + " s");
    if (out.exit_code != 0)
      throw BenchmarkFailure("reconfiguration exited with status " + std::to_string(out.exit_code), out.exit_code);
  }
  current_ = next;
}

void ScriptEnv::on_iteration(std::uint64_t iteration) {
  if (options_.reload_command.empty() || options_.reload_every == 0 || iteration == 0) return;
  if (iteration % options_.reload_every != 0) return;
  const auto start = std::chrono::steady_clock::now();
  const CommandOutput out = run_command(options_.reload_command, options_.timeout_s);
  clock_ += seconds_since(start);
  if (out.timed_out) throw BenchmarkTimeout("reload exceeded " + std::to_string(options_.timeout_s) + " s");
  if (out.exit_code != 0) throw BenchmarkFailure("reload exited with status " + std::to_string(out.exit_code), out.exit_code);
}

double script_evaluate(ScriptEnv& env, const Configuration& config) { return env.evaluate(config); }

double composite_metric(double time_s, double disk_mb, double sigma_weight) { return -disk_mb - sigma_weight * time_s; }

}  // namespace udo
