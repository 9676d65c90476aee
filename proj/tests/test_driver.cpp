#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "udo/driver.hpp"

using namespace udo;

namespace {

Configuration cfg(std::vector<std::size_t> v) { return Configuration{std::move(v)}; }

RunSpec small_run(std::uint64_t seed = 1, std::size_t iterations = 30) {
  RunSpec s;
  s.seed = seed;
  s.sim.seed = seed;
  s.iterations = iterations;
  s.light_budget = 8;
  return s;
}

// Light-only space for the degenerate two-path comparison.
std::string light_only_spec(std::size_t iterations) {
  return R"({
    "seed": 4,
    "space": [
      {"name": "a", "kind": "runtime", "domain": ["0", "1", "2"]},
      {"name": "b", "kind": "runtime", "domain": ["0", "1", "2", "3"], "default": 1},
      {"name": "c", "kind": "query_order", "domain": ["x", "y"]}
    ],
    "environment": {"type": "sim", "noise_sigma": 0,
      "tables": {"base": 10, "main": [[0, 2, 1], [0, -1, 3, 2], [0, 1.5]]}},
    "heavy": {"tau": 1, "b": 2},
    "light": {"horizon": 4, "budget": 8, "b": 2},
    "one_level": {"horizon": 4},
    "picker": {"kind": "threshold", "rho": 1},
    "budget": {"iterations": )" +
         std::to_string(iterations) + "}}";
}

}  // namespace

TEST(ParseSpec, Defaults) {
  const auto s = parse_spec("{}");
  EXPECT_EQ(s.tau(), 10u);
  EXPECT_EQ(s.heavy_params.b, 3.0);
  EXPECT_EQ(s.effective_rho(), 10u);
  EXPECT_EQ(s.heavy_horizon, 4u);
  EXPECT_EQ(s.light_horizon, 8u);
  EXPECT_EQ(s.one_level_horizon, 12u);
  EXPECT_EQ(s.light_params.tau_max, 0u);
  EXPECT_EQ(s.picker, PickerKind::Secretary);
  EXPECT_EQ(s.planner, PlannerKind::Auto);
  EXPECT_EQ(s.light_budget, kDefaultLightBudget);
}

TEST(ParseSpec, FullDocument) {
  const auto s = parse_spec(R"({
    "seed": 9, "output": "out.csv",
    "environment": {"type": "sim", "noise_fraction": 0.1, "heavy_switch_time": 2},
    "heavy": {"policy": "exp3", "horizon": 3, "tau": 5, "exp3_eta": 0.2, "rave": false},
    "light": {"policy": "hoo", "budget": 12, "cache_cap": 4, "hoo_rho": 0.7},
    "picker": {"kind": "threshold", "rho": 4},
    "planner": "greedy",
    "budget": {"iterations": 50, "time": 900.5, "patience": 20}
  })");
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.sim.seed, 9u);
  EXPECT_EQ(s.output, "out.csv");
  EXPECT_EQ(s.sim.noise_fraction, 0.1);
  EXPECT_EQ(s.sim.heavy_switch_time, 2.0);
  EXPECT_EQ(s.heavy_policy, SelectionPolicy::Exp3);
  EXPECT_EQ(s.heavy_horizon, 3u);
  EXPECT_EQ(s.tau(), 5u);
  EXPECT_EQ(s.heavy_params.exp3_eta, 0.2);
  EXPECT_FALSE(s.heavy_params.rave_enabled);
  EXPECT_EQ(s.light_policy, SelectionPolicy::Hoo);
  EXPECT_EQ(s.light_budget, 12u);
  EXPECT_EQ(s.light_cache_cap, 4u);
  EXPECT_EQ(s.light_params.hoo_rho, 0.7);
  EXPECT_EQ(s.picker, PickerKind::Threshold);
  EXPECT_EQ(s.effective_rho(), 4u);
  EXPECT_EQ(s.planner, PlannerKind::Greedy);
  EXPECT_EQ(s.iterations, 50u);
  EXPECT_EQ(s.time_budget, 900.5);
  EXPECT_EQ(s.patience, 20u);
}

TEST(ParseSpec, Rejections) {
  EXPECT_THROW(parse_spec("{"), SpecError);
  EXPECT_THROW(parse_spec(R"({"colour": 1})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"heavy": {"tau": -1}})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"heavy": {"tau": 5}, "picker": {"kind": "threshold", "rho": 6}})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"heavy": {"tau": 15}, "planner": "exact"})"), SpecError);
  EXPECT_NO_THROW(parse_spec(R"({"heavy": {"tau": 14}, "planner": "exact"})"));
  EXPECT_THROW(parse_spec(R"({"heavy": {"b": 0}})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"heavy": {"policy": "thompson"}})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"environment": {"type": "docker"}})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"environment": {"type": "script", "evaluate": "true"}})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"space": [{"name": "x", "kind": "runtime", "domain": ["a"]}]})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"space": [{"name": "x", "kind": "index", "domain": ["a", "b", "c"]}]})"), SpecError);
  EXPECT_THROW(parse_spec(R"({"budget": {"iterations": 0}})"), SpecError);
  EXPECT_THROW(load_spec("/nonexistent/spec.json"), SpecError);
}

TEST(ParseSpec, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "udo-driver-spec.json";
  std::ofstream(path) << R"({"seed": 3, "picker": "threshold"})";
  const auto s = load_spec(path.string());
  EXPECT_EQ(s.seed, 3u);
  EXPECT_EQ(s.picker, PickerKind::Threshold);
}

TEST(MakeEnvironment, NoiseFromFraction) {
  RunSpec s;
  s.sim.noise_fraction = 0.05;
  auto env = make_environment(s);
  auto* sim = dynamic_cast<SimEnv*>(env.get());
  ASSERT_NE(sim, nullptr);
  EXPECT_DOUBLE_EQ(sim->options().noise_sigma, 0.05 * sim->table_range());
  s.sim.noise_sigma = 0.0;
  auto quiet = make_environment(s);
  EXPECT_EQ(dynamic_cast<SimEnv*>(quiet.get())->options().noise_sigma, 0.0);
}

TEST(RunUdo, MinimalRunEvaluatesOneHeavyConfiguration) {
  RunSpec s = small_run(2, 1);
  s.heavy_params.tau_max = 1;
  s.picker = PickerKind::Threshold;
  s.rho = 1;
  auto env = make_environment(s);
  const auto r = run_udo(s, *env);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.heavy_evaluations, 1u);
  std::size_t finals = 0;
  for (const auto& row : r.trace) finals += row.kind == SampleKind::Final;
  EXPECT_EQ(finals, 1u);
  EXPECT_EQ(r.trace.size(), 1u + s.light_budget + 1u);
  EXPECT_EQ(r.trace.front().kind, SampleKind::Default);
}

TEST(RunUdo, ThresholdBatchesResolveWithinDeadline) {
  RunSpec s = small_run(3, 40);
  s.picker = PickerKind::Threshold;
  s.rho = 10;
  auto env = make_environment(s);
  const auto r = run_udo(s, *env);
  // submissions at t = 1..10 fill the buffer at t = 10, the first deadline is 1 + 10 = 11
  for (const auto& row : r.trace)
    if (row.kind == SampleKind::Final || row.kind == SampleKind::Light) EXPECT_EQ(row.iter % 10, 0u);
  EXPECT_EQ(r.iterations, 40u);
}

TEST(RunUdo, SubmissionDeadlineIsIssuePlusTau) {
  const auto space = SimEnv::default_space();
  EvaluatorConfig c;
  c.tau_max = 10;
  Evaluator ev(space, c, 100);
  ev.submit(space.defaults(), 7, 7 + 10);
  EXPECT_EQ(ev.pending().back().deadline, 17u);
  EXPECT_THROW(ev.submit(space.defaults(), 7, 18), ContractViolation);
}

TEST(RunUdo, BestSoFarIsMonotoneAndMatchesRows) {
  auto s = small_run(5, 60);
  const auto r = run_udo(s);
  ASSERT_FALSE(r.trace.empty());
  double best = -1e300;
  for (const auto& row : r.trace) {
    best = std::max(best, row.raw);
    EXPECT_EQ(row.best_raw, best);
  }
  EXPECT_EQ(r.best_raw, best);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    EXPECT_GE(r.trace[i].time, r.trace[i - 1].time);
    EXPECT_GE(r.trace[i].cum_reconf_cost, r.trace[i - 1].cum_reconf_cost);
    EXPECT_GE(r.trace[i].iter, r.trace[i - 1].iter);
  }
}

TEST(RunUdo, TraceIsByteDeterministic) {
  auto s = small_run(6, 50);
  const auto a = render_trace(run_udo(s).trace);
  const auto b = render_trace(run_udo(s).trace);
  EXPECT_EQ(a, b);
  s.seed = s.sim.seed = 7;
  EXPECT_NE(a, render_trace(run_udo(s).trace));
}

TEST(RunUdo, TimeBudgetStops) {
  auto s = small_run(1, 100000);
  s.time_budget = 800;
  auto env = make_environment(s);
  const auto r = run_udo(s, *env);
  EXPECT_EQ(r.stop_reason, "time");
  EXPECT_LT(r.iterations, 100000u);
  // the budget is checked before each iteration, so it is exceeded by at most one iteration's work
  EXPECT_GE(env->clock(), 800.0);
}

TEST(RunUdo, PatienceStops) {
  auto s = small_run(1, 100000);
  s.patience = 15;
  const auto r = run_udo(s);
  EXPECT_EQ(r.stop_reason, "patience");
}

TEST(RunUdo, EnvironmentFailuresAreRecordedAndSkipped) {
  struct Flaky : SimEnv {
    using SimEnv::SimEnv;
    double evaluate(const Configuration& c) override {
      if (c[2] == 1) throw EnvironmentError("out of disk");
      return SimEnv::evaluate(c);
    }
  };
  Flaky env(SimEnv::default_space(), SimEnv::default_tables(), SimOptions{1, 0.0, 1.0, 1.0});
  auto s = small_run(1, 80);
  const auto r = run_udo(s, env);
  EXPECT_EQ(r.iterations, 80u);
  EXPECT_GT(r.failures, 0u);
  EXPECT_EQ(r.errors.size(), r.failures);
  EXPECT_NE(r.errors.front().find("out of disk"), std::string::npos);
  for (const auto& row : r.trace) EXPECT_EQ(row.config[2], 0u);
}

TEST(RunOneLevel, EvaluatesEveryStep) {
  auto s = small_run(2, 40);
  auto env = make_environment(s);
  const auto r = run_one_level(s, *env);
  EXPECT_EQ(r.trace.size(), 41u);
  EXPECT_EQ(r.heavy_evaluations, 40u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    EXPECT_EQ(r.trace[i].kind, SampleKind::OneLevel);
    EXPECT_EQ(r.trace[i].iter, i);
  }
}

TEST(RunOneLevel, MatchesLightPhaseWithoutHeavyParameters) {
  const auto udo_spec = parse_spec(light_only_spec(6));
  auto one_spec = udo_spec;
  one_spec.iterations = 6 * udo_spec.light_budget;
  one_spec.heavy_params = udo_spec.light_params;
  one_spec.heavy_params.tau_max = udo_spec.tau();

  const auto udo_run = run_udo(udo_spec);
  const auto one_run = run_one_level(one_spec);
  std::vector<std::pair<Configuration, double>> light_rows, one_rows;
  for (const auto& row : udo_run.trace)
    if (row.kind == SampleKind::Light) light_rows.emplace_back(row.config, row.raw);
  for (const auto& row : one_run.trace)
    if (row.kind == SampleKind::OneLevel) one_rows.emplace_back(row.config, row.raw);
  ASSERT_EQ(light_rows.size(), 48u);
  EXPECT_EQ(light_rows, one_rows);
}

TEST(BruteForce, AgreesWithIndependentEnumeration) {
  SimEnv env(SimEnv::default_space(), SimEnv::default_tables(), SimOptions{});
  const auto opt = brute_force_optimum(env.space(), env);
  // second path: nested loops, first parameter outermost reversed
  double best = -1e300;
  Configuration arg;
  for (std::size_t a = 2; a-- > 0;)
    for (std::size_t b = 2; b-- > 0;)
      for (std::size_t c = 2; c-- > 0;)
        for (std::size_t d = 4; d-- > 0;)
          for (std::size_t e = 4; e-- > 0;)
            for (std::size_t f = 4; f-- > 0;) {
              const auto x = cfg({a, b, c, d, e, f});
              if (env.table_value(x) > best) {
                best = env.table_value(x);
                arg = x;
              }
            }
  EXPECT_EQ(opt.value, best);
  EXPECT_EQ(env.table_value(opt.config), best);
  EXPECT_EQ(opt.config, arg);
}

TEST(BruteForce, SeparableEnvironment) {
  auto t = SimEnv::default_tables();
  t.interactions.clear();
  SimEnv env(SimEnv::default_space(), t, SimOptions{});
  const auto opt = brute_force_optimum(env.space(), env);
  Configuration argmax;
  for (const auto& row : t.main)
    argmax.values.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  EXPECT_EQ(opt.config, argmax);
}

TEST(BruteForce, SingleConfiguration) {
  ParameterSpec p;
  p.name = "only";
  p.domain = {"x"};
  ConfigurationSpace space({p});
  SimTables t;
  t.base = 3;
  t.main = {{1}};
  SimEnv env(space, t, SimOptions{});
  const auto opt = brute_force_optimum(space, env);
  EXPECT_EQ(opt.config, cfg({0}));
  EXPECT_EQ(opt.value, 4.0);
}

TEST(BruteForce, SampleMeanWithoutNoiseFreeModel) {
  struct Opaque : SimEnv {
    using SimEnv::SimEnv;
    std::optional<double> expected(const Configuration&) const override { return std::nullopt; }
  };
  Opaque env(SimEnv::default_space(), SimEnv::default_tables(), SimOptions{2, 0.5, 1.0, 1.0});
  const auto opt = brute_force_optimum(env.space(), env, 8);
  SimEnv exact(SimEnv::default_space(), SimEnv::default_tables(), SimOptions{});
  EXPECT_EQ(opt.config, brute_force_optimum(exact.space(), exact).config);
  EXPECT_EQ(env.evaluations(), 512u * 8u);
}

TEST(Regret, OptimalPlayHasZeroRatios) {
  SimEnv env(SimEnv::default_space(), SimEnv::default_tables(), SimOptions{});
  const auto opt = brute_force_optimum(env.space(), env);
  std::vector<TraceRow> trace(100);
  for (auto& row : trace) row.config = opt.config;
  const auto series = cumulative_regret(trace, opt.value, [&](const Configuration& c) { return env.table_value(c); });
  const auto rep = sublinearity_report(series, {10, 50, 100});
  for (double r : rep.ratios) EXPECT_EQ(r, 0.0);
  EXPECT_FALSE(rep.pass);
}

TEST(Regret, RandomPolicyIsNotSublinear) {
  SimEnv env(SimEnv::default_space(), SimEnv::default_tables(), SimOptions{});
  const auto opt = brute_force_optimum(env.space(), env);
  std::mt19937_64 rng(8);
  std::vector<TraceRow> trace(20000);
  double gap_sum = 0.0;
  for (auto& row : trace) {
    row.config = cfg({rng() % 2, rng() % 2, rng() % 2, rng() % 4, rng() % 4, rng() % 4});
    gap_sum += opt.value - env.table_value(row.config);
  }
  const auto series = cumulative_regret(trace, opt.value, [&](const Configuration& c) { return env.table_value(c); });
  std::vector<std::size_t> cps;
  for (std::size_t T = 2000; T <= 20000; T += 2000) cps.push_back(T);
  const auto rep = sublinearity_report(series, cps);
  EXPECT_FALSE(rep.pass);
  const double mean_gap = gap_sum / 20000.0;
  for (double r : rep.ratios) EXPECT_NEAR(r, mean_gap, 0.1 * mean_gap);
}

TEST(Regret, SeriesAndCheckpoints) {
  std::vector<TraceRow> trace(3);
  trace[0].config = cfg({0});
  trace[1].config = cfg({1});
  trace[2].config = cfg({2});
  const auto s = cumulative_regret(trace, 5.0, [](const Configuration& c) { return static_cast<double>(c[0]); });
  EXPECT_EQ(s, (std::vector<double>{5, 9, 12}));
  const auto rep = sublinearity_report(s, {1, 2, 3});
  EXPECT_EQ(rep.ratios, (std::vector<double>{5, 4.5, 4}));
  EXPECT_TRUE(rep.pass);
  EXPECT_THROW(sublinearity_report(s, {4}), std::out_of_range);
  EXPECT_THROW(sublinearity_report(s, {0}), std::out_of_range);
}

TEST(Trace, FormatNumber) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(184), "184");
  EXPECT_EQ(format_number(-2.5), "-2.5");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Trace, CsvLayout) {
  TraceRow row;
  row.iter = 3;
  row.time = 12.5;
  row.config = cfg({1, 0, 2});
  row.raw = 101;
  row.reward = 0.01;
  row.best_config = cfg({1, 0, 2});
  row.best_raw = 101;
  row.cum_reconf_cost = 50;
  EXPECT_EQ(render_trace({row}),
            "# udo-trace v1\n"
            "iter,time,config,raw,reward,best_config,best_raw,cum_reconf_cost\n"
            "3,12.5,1:0:2,101,0.01,1:0:2,101,50\n");
}

TEST(SampleSpecs, Parse) {
  const std::filesystem::path dir = std::filesystem::path(UDO_SOURCE_DIR) / "specs";
  const auto sim = load_spec((dir / "sim.json").string());
  EXPECT_EQ(sim.time_budget, 5000.0);
  const auto script = load_spec((dir / "script.json").string());
  EXPECT_EQ(script.params.size(), 3u);
  EXPECT_EQ(script.env, EnvKind::Script);
}
