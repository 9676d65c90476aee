#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "udo/driver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitSpec = 2;
constexpr int kExitEnvironment = 3;

struct Overrides {
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::size_t> tau;
  std::optional<double> b;
  std::optional<std::size_t> rho;
  std::optional<std::size_t> iterations;
  std::optional<double> time_budget;
  std::string planner;
  std::string picker;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--spec", o.spec_path, "JSON run spec (default: simulator with default settings)");
  cmd->add_option("--seed", o.seed, "Seed for the search and the simulator");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--tau", o.tau, "Maximal feedback delay of the heavy search");
  cmd->add_option("-b", o.b, "UCB-V range constant for both levels");
  cmd->add_option("--rho", o.rho, "Pick threshold of the threshold picker");
  cmd->add_option("--iterations", o.iterations, "Main-loop iteration budget");
  cmd->add_option("--time-budget", o.time_budget, "Budget in environment clock units");
  cmd->add_option("--planner", o.planner, "greedy | exact | auto");
  cmd->add_option("--picker", o.picker, "threshold | secretary");
}

udo::RunSpec resolve(const Overrides& o) {
  udo::RunSpec spec = o.spec_path.empty() ? udo::RunSpec{} : udo::load_spec(o.spec_path);
  if (o.seed) {
    spec.seed = *o.seed;
    spec.sim.seed = *o.seed;
  }
  if (o.tau) spec.heavy_params.tau_max = *o.tau;
  if (o.b) {
    spec.heavy_params.b = *o.b;
    spec.light_params.b = *o.b;
  }
  if (o.rho) spec.rho = *o.rho;
  if (o.iterations) spec.iterations = *o.iterations;
  if (o.time_budget) spec.time_budget = *o.time_budget;
  if (!o.planner.empty()) spec.planner = udo::planner_kind_from_string(o.planner);
  if (!o.picker.empty()) spec.picker = udo::picker_kind_from_string(o.picker);
  spec.validate();
  return spec;
}

std::filesystem::path output_path(const Overrides& o, const udo::RunSpec& spec, const std::string& fallback) {
  std::filesystem::path name = spec.output.empty() ? fallback : spec.output;
  if (o.out_dir.empty()) return name;
  std::filesystem::create_directories(o.out_dir);
  return std::filesystem::path(o.out_dir) / name.filename();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void summarize(const udo::RunResult& r, const udo::Environment& env, const std::filesystem::path& trace) {
  std::cout << "best " << udo::to_string(r.best) << " raw " << udo::format_number(r.best_raw) << '\n'
            << "iterations " << r.iterations << " (stopped: " << r.stop_reason << ")\n"
            << "heavy evaluations " << r.heavy_evaluations << ", failures " << r.failures << '\n'
            << "clock " << udo::format_number(env.clock()) << ", reconfiguration "
            << udo::format_number(env.reconfiguration_time()) << '\n'
            << "trace " << trace.string() << '\n';
  for (const auto& e : r.errors) std::cerr << e << '\n';
}

int cmd_run(const Overrides& o, bool baseline) {
  const udo::RunSpec spec = resolve(o);
  auto env = udo::make_environment(spec);
  const udo::RunResult r = baseline ? udo::run_one_level(spec, *env) : udo::run_udo(spec, *env);
  const auto path = output_path(o, spec, baseline ? "baseline.csv" : "trace.csv");
  write_file(path, udo::render_trace(r.trace));
  summarize(r, *env, path);
  return kExitOk;
}

int cmd_regret(const Overrides& o, bool baseline, const std::vector<std::size_t>& checkpoints) {
  const udo::RunSpec spec = resolve(o);
  auto env = udo::make_environment(spec);
  if (!env->expected(env->space().defaults()))
    throw udo::SpecError("regret analysis needs an environment with a noise-free model");
  const udo::RunResult r = baseline ? udo::run_one_level(spec, *env) : udo::run_udo(spec, *env);
  const udo::Optimum opt = udo::brute_force_optimum(env->space(), *env);
  const auto series =
      udo::cumulative_regret(r.trace, opt.value, [&](const udo::Configuration& c) { return *env->expected(c); });

  std::vector<std::size_t> cps;
  for (std::size_t c : checkpoints)
    if (c >= 1 && c <= series.size()) cps.push_back(c);
  if (cps.empty()) cps.push_back(series.size());
  const auto rep = udo::sublinearity_report(series, cps);

  std::ostringstream csv;
  csv << "step,regret\n";
  for (std::size_t i = 0; i < series.size(); ++i) csv << i + 1 << ',' << udo::format_number(series[i]) << '\n';
  const auto path = output_path(o, spec, "regret.csv");
  write_file(path, csv.str());

  std::cout << "optimum " << udo::to_string(opt.config) << " expected " << udo::format_number(opt.value) << '\n';
  for (std::size_t i = 0; i < cps.size(); ++i)
    std::cout << "regret(" << cps[i] << ")/" << cps[i] << " = " << udo::format_number(rep.ratios[i]) << '\n';
  std::cout << "sublinear " << (rep.pass ? "PASS" : "FAIL") << '\n' << "series " << path.string() << '\n';
  return kExitOk;
}

int cmd_ilp(const Overrides& o, const std::vector<std::string>& requests, const std::string& current_text) {
  const udo::RunSpec spec = resolve(o);
  const udo::ConfigurationSpace space =
      spec.params.empty() ? udo::SimEnv::default_space() : udo::ConfigurationSpace(spec.params);
  if (requests.empty()) throw udo::SpecError("ilp-export needs at least one --request");
  std::vector<udo::Configuration> reqs;
  const auto parse = [&](const std::string& text) {
    try {
      auto c = udo::configuration_from_string(text);
      space.validate(c);
      return c;
    } catch (const std::exception& e) {
      throw udo::SpecError("bad configuration '" + text + "': " + e.what());
    }
  };
  for (const auto& r : requests) reqs.push_back(space.heavy_projection(parse(r)));
  udo::Configuration current = space.heavy_projection(space.defaults());
  if (!current_text.empty()) current = parse(current_text);
  const udo::CostModel model(space);
  const auto problem = udo::OrderingProblem::from_configurations(reqs, current, model);
  const auto path = output_path(o, spec, "plan.lp");
  write_file(path, udo::render_lp(udo::build_ilp(problem)));
  const udo::Plan p = udo::plan(spec.planner, reqs, current, model);
  std::cout << "model " << path.string() << '\n' << "plan total " << udo::format_number(p.total) << " (internal "
            << udo::format_number(p.internal) << ")\n";
  for (const auto& s : p.steps) std::cout << "  " << udo::to_string(s) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level configuration tuner"};
  app.require_subcommand(1);

  Overrides o;
  auto* run = app.add_subcommand("run", "Two-level tuning run; writes a trace CSV");
  add_common(run, o);
  auto* base = app.add_subcommand("baseline", "Single-level, no-delay baseline run");
  add_common(base, o);

  auto* regret = app.add_subcommand("regret", "Cumulative regret against the exhaustive optimum");
  add_common(regret, o);
  bool regret_baseline = false;
  std::vector<std::size_t> checkpoints;
  regret->add_flag("--baseline", regret_baseline, "Analyse the single-level baseline instead");
  regret->add_option("--checkpoints", checkpoints, "Steps at which regret(T)/T is reported")->delimiter(',');

  auto* ilp = app.add_subcommand("ilp-export", "Write the ordering integer program in LP format");
  add_common(ilp, o);
  std::vector<std::string> requests;
  std::string current;
  ilp->add_option("--request", requests, "Heavy configuration as colon-separated value indices")->required();
  ilp->add_option("--current", current, "Current configuration (default: defaults)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSpec;
  }

  try {
    if (*run) return cmd_run(o, false);
    if (*base) return cmd_run(o, true);
    if (*regret) return cmd_regret(o, regret_baseline, checkpoints);
    if (*ilp) return cmd_ilp(o, requests, current);
  } catch (const udo::SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return kExitSpec;
  } catch (const udo::EnvironmentError& e) {
    std::cerr << "environment error: " << e.what() << '\n';
    return kExitEnvironment;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
