#include "udo/driver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace udo {

using nlohmann::json;

void RunSpec::validate() const {
  heavy_params.validate();
  light_params.validate();
  if (heavy_horizon == 0 || light_horizon == 0 || one_level_horizon == 0) throw SpecError("horizons must be at least 1");
  if (light_budget == 0) throw SpecError("light budget must be at least 1");
  if (iterations == 0) throw SpecError("iteration budget must be at least 1");
  if (time_budget && !(*time_budget > 0.0)) throw SpecError("time budget must be positive");
  if (patience && *patience == 0) throw SpecError("patience must be at least 1");
  if (picker == PickerKind::Threshold) {
    if (effective_rho() == 0) throw SpecError("pick threshold must be at least 1");
    if (effective_rho() > tau()) throw SpecError("pick threshold exceeds the maximal delay");
  }
  if (planner == PlannerKind::Exact && tau() + 1 > kExactPlannerLimit)
    throw SpecError("the exact planner supports at most " + std::to_string(kExactPlannerLimit - 1) + " as maximal delay");
  if (env == EnvKind::Sim && !params.empty() && !sim.tables)
    throw SpecError("a custom space needs simulator tables");
  if (env == EnvKind::Script) {
    if (params.empty()) throw SpecError("a script environment needs an explicit space");
    if (script.evaluate_command.empty()) throw SpecError("a script environment needs an evaluate command");
    if (!(script.timeout_s > 0.0)) throw SpecError("script timeout must be positive");
  }
  if (sim.noise_sigma && !(*sim.noise_sigma >= 0.0)) throw SpecError("noise sigma must be nonnegative");
  if (!(sim.noise_fraction >= 0.0)) throw SpecError("noise fraction must be nonnegative");
  if (!(sim.eval_time >= 0.0) || !(sim.heavy_switch_time >= 0.0)) throw SpecError("simulated times must be nonnegative");
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw SpecError(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw SpecError("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw SpecError("bad value for '" + std::string(key) + "' in " + where);
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw SpecError("'" + std::string(key) + "' in " + where + " must be a nonnegative integer");
  return v.get<std::size_t>();
}

BanditParams parse_bandit(const json& obj, const std::string& where, BanditParams p) {
  p.b = get<double>(obj, "b", where, p.b);
  p.tau_max = get_count(obj, "tau", where, p.tau_max);
  p.hoo_nu = get<double>(obj, "hoo_nu", where, p.hoo_nu);
  p.hoo_rho = get<double>(obj, "hoo_rho", where, p.hoo_rho);
  if (obj.contains("exp3_eta")) p.exp3_eta = get<double>(obj, "exp3_eta", where, 0.0);
  p.exp3_horizon = get_count(obj, "exp3_horizon", where, p.exp3_horizon);
  p.rave_enabled = get<bool>(obj, "rave", where, p.rave_enabled);
  return p;
}

std::vector<std::vector<double>> parse_matrix(const json& v, const std::string& where) {
  try {
    return v.get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    throw SpecError(where + " must be a list of number lists");
  }
}

SimTables parse_tables(const json& obj) {
  check_keys(obj, "environment.tables", {"base", "main", "interactions"});
  SimTables t;
  t.base = get<double>(obj, "base", "environment.tables", 0.0);
  if (!obj.contains("main")) throw SpecError("environment.tables needs 'main'");
  t.main = parse_matrix(obj.at("main"), "environment.tables.main");
  if (obj.contains("interactions")) {
    if (!obj.at("interactions").is_array()) throw SpecError("environment.tables.interactions must be a list");
    for (const auto& it : obj.at("interactions")) {
      const std::string where = "environment.tables.interactions[]";
      check_keys(it, where, {"heavy", "light", "table"});
      Interaction x;
      x.heavy_id = get_count(it, "heavy", where, 0);
      x.light_id = get_count(it, "light", where, 0);
      if (!it.contains("table")) throw SpecError(where + " needs 'table'");
      x.table = parse_matrix(it.at("table"), where + ".table");
      t.interactions.push_back(std::move(x));
    }
  }
  return t;
}

std::vector<ParameterSpec> parse_space(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw SpecError("'space' must be a nonempty list of parameters");
  std::vector<ParameterSpec> params;
  for (const auto& p : arr) {
    const std::string where = "space[" + std::to_string(params.size()) + "]";
    check_keys(p, where, {"name", "kind", "domain", "default", "cost"});
    ParameterSpec spec;
    spec.id = params.size();
    spec.name = get<std::string>(p, "name", where, "");
    if (spec.name.empty()) throw SpecError(where + " needs a name");
    spec.kind = param_kind_from_string(get<std::string>(p, "kind", where, ""));
    spec.domain = get<std::vector<std::string>>(p, "domain", where, {});
    spec.default_index = get_count(p, "default", where, 0);
    spec.cost_hint = get<double>(p, "cost", where, 0.0);
    params.push_back(std::move(spec));
  }
  ConfigurationSpace check(params);  // field invariants
  return params;
}

}  // namespace

RunSpec parse_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("run spec is not valid JSON: ") + e.what());
  }
  check_keys(doc, "run spec",
             {"seed", "output", "space", "environment", "heavy", "light", "one_level", "picker", "planner", "budget"});

  RunSpec spec;
  spec.seed = get<std::uint64_t>(doc, "seed", "run spec", 0);
  spec.sim.seed = spec.seed;
  spec.output = get<std::string>(doc, "output", "run spec", "");
  if (doc.contains("space")) spec.params = parse_space(doc.at("space"));

  if (doc.contains("environment")) {
    const auto& e = doc.at("environment");
    const std::string where = "environment";
    const std::string type = get<std::string>(e, "type", where, "sim");
    if (type == "sim") {
      check_keys(e, where, {"type", "seed", "noise_fraction", "noise_sigma", "heavy_switch_time", "eval_time", "tables"});
      spec.env = EnvKind::Sim;
      spec.sim.seed = get<std::uint64_t>(e, "seed", where, spec.seed);
      spec.sim.noise_fraction = get<double>(e, "noise_fraction", where, spec.sim.noise_fraction);
      if (e.contains("noise_sigma")) spec.sim.noise_sigma = get<double>(e, "noise_sigma", where, 0.0);
      spec.sim.heavy_switch_time = get<double>(e, "heavy_switch_time", where, spec.sim.heavy_switch_time);
      spec.sim.eval_time = get<double>(e, "eval_time", where, spec.sim.eval_time);
      if (e.contains("tables")) spec.sim.tables = parse_tables(e.at("tables"));
    } else if (type == "script") {
      check_keys(e, where, {"type", "evaluate", "reconfigure", "timeout_s", "reload", "reload_every", "work_dir"});
      spec.env = EnvKind::Script;
      spec.script.evaluate_command = get<std::string>(e, "evaluate", where, "");
      spec.script.reconfigure_command = get<std::string>(e, "reconfigure", where, "");
      spec.script.timeout_s = get<double>(e, "timeout_s", where, spec.script.timeout_s);
      spec.script.reload_command = get<std::string>(e, "reload", where, "");
      spec.script.reload_every = get_count(e, "reload_every", where, 0);
      spec.script.work_dir = get<std::string>(e, "work_dir", where, "");
    } else {
      throw SpecError("unknown environment type '" + type + "'");
    }
  }

  if (doc.contains("heavy")) {
    const auto& h = doc.at("heavy");
    check_keys(h, "heavy", {"policy", "horizon", "b", "tau", "hoo_nu", "hoo_rho", "exp3_eta", "exp3_horizon", "rave"});
    spec.heavy_policy = selection_policy_from_string(get<std::string>(h, "policy", "heavy", "ucbv"));
    spec.heavy_horizon = get_count(h, "horizon", "heavy", spec.heavy_horizon);
    spec.heavy_params = parse_bandit(h, "heavy", spec.heavy_params);
  }
  if (doc.contains("light")) {
    const auto& l = doc.at("light");
    check_keys(l, "light",
               {"policy", "horizon", "budget", "cache_cap", "b", "hoo_nu", "hoo_rho", "exp3_eta", "exp3_horizon", "rave"});
    spec.light_policy = selection_policy_from_string(get<std::string>(l, "policy", "light", "ucbv"));
    spec.light_horizon = get_count(l, "horizon", "light", spec.light_horizon);
    spec.light_budget = get_count(l, "budget", "light", spec.light_budget);
    spec.light_cache_cap = get_count(l, "cache_cap", "light", spec.light_cache_cap);
    spec.light_params = parse_bandit(l, "light", spec.light_params);
  }
  spec.light_params.tau_max = 0;
  if (doc.contains("one_level")) {
    const auto& o = doc.at("one_level");
    check_keys(o, "one_level", {"horizon"});
    spec.one_level_horizon = get_count(o, "horizon", "one_level", spec.one_level_horizon);
  }
  if (doc.contains("picker")) {
    const auto& p = doc.at("picker");
    if (p.is_string()) {
      spec.picker = picker_kind_from_string(p.get<std::string>());
    } else {
      check_keys(p, "picker", {"kind", "rho"});
      spec.picker = picker_kind_from_string(get<std::string>(p, "kind", "picker", "secretary"));
      if (p.contains("rho")) spec.rho = get_count(p, "rho", "picker", 0);
    }
  }
  if (doc.contains("planner")) spec.planner = planner_kind_from_string(get<std::string>(doc, "planner", "run spec", ""));
  if (doc.contains("budget")) {
    const auto& b = doc.at("budget");
    check_keys(b, "budget", {"iterations", "time", "patience"});
    spec.iterations = get_count(b, "iterations", "budget", spec.iterations);
    if (b.contains("time")) spec.time_budget = get<double>(b, "time", "budget", 0.0);
    if (b.contains("patience")) spec.patience = get_count(b, "patience", "budget", 0);
  }
  spec.validate();
  return spec;
}

RunSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot read run spec '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_spec(text.str());
}

std::unique_ptr<Environment> make_environment(const RunSpec& spec) {
  if (spec.env == EnvKind::Script) return std::make_unique<ScriptEnv>(ConfigurationSpace(spec.params), spec.script);

  ConfigurationSpace space = spec.params.empty() ? SimEnv::default_space() : ConfigurationSpace(spec.params);
  SimTables tables = spec.sim.tables ? *spec.sim.tables : SimEnv::default_tables();
  SimOptions opts;
  opts.seed = spec.sim.seed;
  opts.heavy_switch_time = spec.sim.heavy_switch_time;
  opts.eval_time = spec.sim.eval_time;
  auto env = std::make_unique<SimEnv>(std::move(space), std::move(tables), opts);
  if (spec.sim.noise_sigma) {
    opts.noise_sigma = *spec.sim.noise_sigma;
  } else {
    opts.noise_sigma = spec.sim.noise_fraction * env->table_range();
  }
  if (opts.noise_sigma == 0.0) return env;
  return std::make_unique<SimEnv>(env->space(), env->tables(), opts);
}

// ---------------------------------------------------------------------------
// Main loops

namespace {

class Recorder {
 public:
  Recorder(RunResult& out, const Environment& env) : out_(&out), env_(&env) {}

  void record(std::uint64_t iter, const Configuration& config, double raw, double reward, SampleKind kind) {
    if (!has_best_ || raw > out_->best_raw) {
      has_best_ = true;
      out_->best = config;
      out_->best_raw = raw;
      last_improvement_ = iter;
    }
    TraceRow row;
    row.iter = iter;
    row.time = env_->clock();
    row.config = config;
    row.raw = raw;
    row.reward = reward;
    row.best_config = out_->best;
    row.best_raw = out_->best_raw;
    row.cum_reconf_cost = env_->reconfiguration_time();
    row.kind = kind;
    out_->trace.push_back(std::move(row));
  }

  std::uint64_t last_improvement() const { return last_improvement_; }

 private:
  RunResult* out_;
  const Environment* env_;
  bool has_best_ = false;
  std::uint64_t last_improvement_ = 0;
};

bool should_stop(const RunSpec& spec, const Environment& env, const Recorder& rec, std::uint64_t t, RunResult& out) {
  if (spec.time_budget && env.clock() >= *spec.time_budget) {
    out.stop_reason = "time";
    return true;
  }
  if (spec.patience && t - rec.last_improvement() > *spec.patience) {
    out.stop_reason = "patience";
    return true;
  }
  return false;
}

double measure_default(const ConfigurationSpace& space, Environment& env, Recorder& rec) {
  env.on_iteration(0);
  const Configuration def = space.defaults();
  env.reconfigure(def);
  const double raw = env.evaluate(def);
  rec.record(0, def, raw, scaled_reward(raw, raw), SampleKind::Default);
  return raw;
}

}  // namespace

RunResult run_udo(const RunSpec& spec, Environment& env) {
  spec.validate();
  const ConfigurationSpace& space = env.space();
  RunResult out;
  Recorder rec(out, env);
  const double default_raw = measure_default(space, env, rec);

  const MdpSpec heavy_mdp = MdpSpec::heavy(space, spec.heavy_horizon);
  std::optional<SearchTree> heavy;
  if (!legal_actions(space, heavy_mdp, heavy_mdp.start, 0).empty())
    heavy.emplace(space, heavy_mdp, spec.heavy_params, spec.heavy_policy, spec.seed);

  EvaluatorConfig ec;
  ec.picker = spec.picker;
  ec.rho = spec.effective_rho();
  ec.tau_max = spec.tau();
  ec.planner = spec.planner;
  ec.light_budget = spec.light_budget;
  ec.light_horizon = spec.light_horizon;
  ec.light_policy = spec.light_policy;
  ec.light_params = spec.light_params;
  ec.light_params.tau_max = 0;
  ec.light_cache_cap = spec.light_cache_cap;
  ec.seed = spec.seed;
  Evaluator evaluator(space, ec, default_raw);

  std::uint64_t t = 0;
  const SampleSink sink = [&](const Configuration& c, double raw, double reward, SampleKind kind) {
    rec.record(t, c, raw, reward, kind);
  };

  out.stop_reason = "iterations";
  for (t = 1; t <= spec.iterations; ++t) {
    if (should_stop(spec, env, rec, t, out)) break;
    env.on_iteration(t);
    const Configuration heavy_conf = heavy ? heavy->step(t).state : space.heavy_projection(space.defaults());
    evaluator.submit(heavy_conf, t, t + spec.tau());
    const auto results = evaluator.receive(env, t, sink);

    std::vector<Resolution> resolutions;
    std::set<Configuration> evaluated;
    for (const auto& r : results) {
      evaluated.insert(r.heavy_conf);
      if (r.failed) {
        if (heavy) heavy->cancel(r.issued_at);
        ++out.failures;
        out.errors.push_back("iteration " + std::to_string(t) + ": " + r.error);
        continue;
      }
      resolutions.push_back({r.issued_at, r.reward});
      if (heavy) heavy->record_observation(r.heavy_conf, {r.raw, r.reward});
    }
    out.heavy_evaluations += evaluated.size();
    if (heavy) heavy->update(resolutions, t);
    out.iterations = t;
  }
  return out;
}

RunResult run_udo(const RunSpec& spec) {
  auto env = make_environment(spec);
  return run_udo(spec, *env);
}

RunResult run_one_level(const RunSpec& spec, Environment& env) {
  spec.validate();
  const ConfigurationSpace& space = env.space();
  RunResult out;
  Recorder rec(out, env);
  const double default_raw = measure_default(space, env, rec);

  BanditParams params = spec.heavy_params;
  params.tau_max = 0;
  const MdpSpec mdp = MdpSpec::one_level(space, spec.one_level_horizon);
  if (legal_actions(space, mdp, mdp.start, 0).empty()) {
    out.stop_reason = "single configuration";
    return out;
  }
  SearchTree tree(space, mdp, params, spec.heavy_policy, spec.seed);

  out.stop_reason = "iterations";
  for (std::uint64_t t = 1; t <= spec.iterations; ++t) {
    if (should_stop(spec, env, rec, t, out)) break;
    env.on_iteration(t);
    const EpisodeStep step = tree.step(t);
    double raw = 0.0;
    try {
      env.reconfigure(step.state);
      raw = env.evaluate(step.state);
    } catch (const EnvironmentError& e) {
      tree.cancel(t);
      ++out.failures;
      out.errors.push_back("iteration " + std::to_string(t) + ": " + e.what());
      out.iterations = t;
      continue;
    }
    const double reward = scaled_reward(raw, default_raw);
    rec.record(t, step.state, raw, reward, SampleKind::OneLevel);
    tree.record_observation(step.state, {raw, reward});
    const Resolution res{t, reward};
    tree.update(std::span<const Resolution>(&res, 1), t);
    ++out.heavy_evaluations;
    out.iterations = t;
  }
  return out;
}

RunResult run_one_level(const RunSpec& spec) {
  auto env = make_environment(spec);
  return run_one_level(spec, *env);
}

// ---------------------------------------------------------------------------
// Analysis

namespace {

// Odometer step, last parameter fastest.
bool advance(Configuration& c, const ConfigurationSpace& space) {
  for (std::size_t i = space.size(); i-- > 0;) {
    if (++c.values[i] < space.param(i).domain.size()) return true;
    c.values[i] = 0;
  }
  return false;
}

}  // namespace

Optimum brute_force_optimum(const ConfigurationSpace& space, Environment& env, std::size_t samples) {
  if (space.cardinality() > 1'000'000) throw std::invalid_argument("space too large for exhaustive search");
  if (samples == 0) throw std::invalid_argument("need at least one sample per configuration");
  Optimum best;
  bool found = false;
  Configuration c;
  c.values.assign(space.size(), 0);
  do {
    if (space.admits(c)) {
      double value = 0.0;
      if (auto e = env.expected(c)) {
        value = *e;
      } else {
        env.reconfigure(c);
        for (std::size_t s = 0; s < samples; ++s) value += env.evaluate(c);
        value /= static_cast<double>(samples);
      }
      if (!found || value > best.value) {
        best = {c, value};
        found = true;
      }
    }
  } while (advance(c, space));
  if (!found) throw SpecError("no configuration satisfies the constraints");
  return best;
}

std::vector<double> cumulative_regret(const std::vector<TraceRow>& trace, double f_star, const ExpectedFn& expected) {
  std::vector<double> series;
  series.reserve(trace.size());
  double acc = 0.0;
  for (const auto& row : trace) {
    acc += f_star - expected(row.config);
    series.push_back(acc);
  }
  return series;
}

SublinearityReport sublinearity_report(const std::vector<double>& series, const std::vector<std::size_t>& checkpoints) {
  SublinearityReport rep;
  rep.checkpoints = checkpoints;
  for (std::size_t T : checkpoints) {
    if (T == 0 || T > series.size()) throw std::out_of_range("checkpoint outside the regret series");
    rep.ratios.push_back(series[T - 1] / static_cast<double>(T));
  }
  rep.pass = !rep.ratios.empty();
  for (std::size_t i = 1; i < rep.ratios.size(); ++i) rep.pass = rep.pass && rep.ratios[i] < rep.ratios[i - 1];
  return rep;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void emit_trace(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << kTraceVersionLine << '\n' << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.iter << ',' << format_number(r.time) << ',' << to_string(r.config) << ',' << format_number(r.raw) << ','
        << format_number(r.reward) << ',' << to_string(r.best_config) << ',' << format_number(r.best_raw) << ','
        << format_number(r.cum_reconf_cost) << '\n';
  }
}

std::string render_trace(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  emit_trace(out, trace);
  return out.str();
}

}  // namespace udo
