#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <set>

#include "udo/space.hpp"

using namespace udo;

namespace {

ParameterSpec param(std::size_t id, ParamKind kind, std::size_t values, std::size_t def = 0, double cost = 0) {
  ParameterSpec p;
  p.id = id;
  p.name = "p" + std::to_string(id);
  p.kind = kind;
  for (std::size_t v = 0; v < values; ++v) p.domain.push_back("v" + std::to_string(v));
  p.default_index = def;
  p.cost_hint = cost;
  return p;
}

// Two binary indexes and one three-valued runtime knob.
ConfigurationSpace small_space() {
  return ConfigurationSpace({param(0, ParamKind::Index, 2, 0, 20), param(1, ParamKind::Index, 2, 0, 20),
                             param(2, ParamKind::Runtime, 3, 0)});
}

Configuration cfg(std::vector<std::size_t> v) { return Configuration{std::move(v)}; }

}  // namespace

TEST(Split, IndexIsHeavy) {
  auto s = split_parameters({param(0, ParamKind::Index, 2)});
  EXPECT_EQ(s.heavy_ids, std::vector<std::size_t>{0});
  EXPECT_TRUE(s.light_ids.empty());
}

TEST(Split, RestartRequiredIsHeavy) {
  auto s = split_parameters({param(0, ParamKind::RestartRequired, 3)});
  EXPECT_EQ(s.heavy_ids, std::vector<std::size_t>{0});
}

TEST(Split, RuntimeAndQueryOrderAreLight) {
  auto s = split_parameters({param(0, ParamKind::Runtime, 3), param(1, ParamKind::QueryOrder, 2)});
  EXPECT_TRUE(s.heavy_ids.empty());
  EXPECT_EQ(s.light_ids, (std::vector<std::size_t>{0, 1}));
}

TEST(Split, PartitionPropertyOnRandomSpaces) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<ParameterSpec> ps;
    for (std::size_t i = 0; i < n; ++i) {
      const auto kind = static_cast<ParamKind>(rng() % 4);
      ps.push_back(param(i, kind, kind == ParamKind::Index ? 2 : 1 + rng() % 5));
    }
    auto s = split_parameters(ps);
    std::set<std::size_t> seen;
    for (auto id : s.heavy_ids) {
      EXPECT_TRUE(ps[id].is_heavy());
      EXPECT_TRUE(seen.insert(id).second);
    }
    for (auto id : s.light_ids) {
      EXPECT_FALSE(ps[id].is_heavy());
      EXPECT_TRUE(seen.insert(id).second);
    }
    EXPECT_EQ(seen.size(), n);
  }
}

TEST(SpaceValidation, RejectsBadParameters) {
  EXPECT_THROW(ConfigurationSpace({param(0, ParamKind::Runtime, 0)}), SpecError);
  EXPECT_THROW(ConfigurationSpace({param(0, ParamKind::Runtime, 2, 2)}), SpecError);
  EXPECT_THROW(ConfigurationSpace({param(0, ParamKind::Index, 3)}), SpecError);
  EXPECT_THROW(ConfigurationSpace({param(0, ParamKind::Index, 2, 0, -1)}), SpecError);
  EXPECT_THROW(ConfigurationSpace({param(1, ParamKind::Runtime, 2)}), SpecError);
}

TEST(SpaceValidation, ConfigurationBounds) {
  auto s = small_space();
  EXPECT_NO_THROW(s.validate(cfg({1, 1, 2})));
  EXPECT_THROW(s.validate(cfg({1, 1, 3})), std::out_of_range);
  EXPECT_THROW(s.validate(cfg({1, 1})), std::out_of_range);
  EXPECT_EQ(s.cardinality(), 12u);
}

TEST(SpaceProjection, HeavyProjectionResetsLight) {
  auto s = small_space();
  EXPECT_EQ(s.heavy_projection(cfg({1, 0, 2})), cfg({1, 0, 0}));
  EXPECT_EQ(s.combine(cfg({1, 1, 0}), cfg({0, 0, 2})), cfg({1, 1, 2}));
}

TEST(ConfigurationText, RoundTrip) {
  EXPECT_EQ(to_string(cfg({1, 0, 3})), "1:0:3");
  EXPECT_EQ(configuration_from_string("1:0:3"), cfg({1, 0, 3}));
  EXPECT_THROW(configuration_from_string("1:x"), SpecError);
}

TEST(ApplyAction, ChangesExactlyOneParameter) {
  auto s = small_space();
  EXPECT_EQ(apply_action(s, cfg({0, 0, 2}), {0, 1}), cfg({1, 0, 2}));
}

TEST(ApplyAction, RevertRestoresOriginal) {
  auto s = small_space();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    Configuration c = cfg({rng() % 2, rng() % 2, rng() % 3});
    const std::size_t p = rng() % 3;
    const std::size_t domain = s.param(p).domain.size();
    const std::size_t v = (c[p] + 1 + rng() % (domain - 1)) % domain;
    auto changed = apply_action(s, c, {p, v});
    ASSERT_EQ(changed.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(changed[i] != c[i], i == p);
    EXPECT_EQ(apply_action(s, changed, {p, c[p]}), c);
  }
}

TEST(ApplyAction, Errors) {
  auto s = small_space();
  EXPECT_THROW(apply_action(s, cfg({0, 0, 0}), {2, 3}), std::out_of_range);
  EXPECT_THROW(apply_action(s, cfg({0, 0, 0}), {3, 0}), std::out_of_range);
  EXPECT_THROW(apply_action(s, cfg({0, 0, 0}), {2, 0}), ContractViolation);
}

TEST(LegalActions, HeavyTwoIndexesAtStart) {
  auto s = small_space();
  auto mdp = MdpSpec::heavy(s);
  auto acts = legal_actions(s, mdp, mdp.start, 0);
  ASSERT_EQ(acts.size(), 2u);
  EXPECT_EQ(acts[0], (Action{0, 1}));
  EXPECT_EQ(acts[1], (Action{1, 1}));
}

TEST(LegalActions, EmptyAtHorizon) {
  auto s = small_space();
  auto mdp = MdpSpec::heavy(s, 4);
  EXPECT_TRUE(legal_actions(s, mdp, mdp.start, 4).empty());
  EXPECT_THROW(legal_actions(s, mdp, mdp.start, 5), ContractViolation);
}

TEST(LegalActions, OneLevelThreeByFour) {
  ConfigurationSpace s({param(0, ParamKind::Runtime, 4), param(1, ParamKind::Runtime, 4),
                        param(2, ParamKind::Runtime, 4)});
  auto mdp = MdpSpec::one_level(s);
  auto acts = legal_actions(s, mdp, mdp.start, 0);
  // oracle: every (param, value != current) pair
  std::set<Action> expected;
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t v = 0; v < 4; ++v)
      if (v != mdp.start[p]) expected.insert({p, v});
  EXPECT_EQ(acts.size(), 9u);
  EXPECT_EQ(std::set<Action>(acts.begin(), acts.end()), expected);
}

TEST(LegalActions, LightNeverTouchesHeavy) {
  auto s = small_space();
  for (const Configuration& h : {cfg({0, 0, 0}), cfg({1, 0, 0}), cfg({1, 1, 0})}) {
    auto mdp = MdpSpec::light(s, h);
    EXPECT_EQ(mdp.start, h);
    for (std::size_t steps = 0; steps < mdp.horizon; ++steps)
      for (const auto& a : legal_actions(s, mdp, mdp.start, steps)) EXPECT_FALSE(s.is_heavy(a.param_id));
  }
}

TEST(LegalActions, ConstraintPredicateFilters) {
  ConfigurationSpace s({param(0, ParamKind::Index, 2, 0, 1), param(1, ParamKind::Index, 2, 0, 1)},
                       [](const Configuration& c) { return c[0] + c[1] < 2; });
  auto mdp = MdpSpec::heavy(s);
  auto acts = legal_actions(s, mdp, cfg({1, 0}), 1);
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(acts[0], (Action{0, 0}));
}

TEST(LegalActions, HeavyReachableStatesStayWithinHorizonDistance) {
  ConfigurationSpace s({param(0, ParamKind::Index, 2, 0, 1), param(1, ParamKind::Index, 2, 0, 1),
                        param(2, ParamKind::RestartRequired, 3, 1, 5), param(3, ParamKind::Runtime, 2)});
  for (std::size_t h = 1; h <= 4; ++h) {
    auto mdp = MdpSpec::heavy(s, h);
    std::deque<std::pair<Configuration, std::size_t>> queue{{mdp.start, 0}};
    std::set<std::pair<Configuration, std::size_t>> seen;
    while (!queue.empty()) {
      auto [state, depth] = queue.front();
      queue.pop_front();
      std::size_t differing = 0;
      for (std::size_t i = 0; i < s.size(); ++i) differing += state[i] != mdp.start[i];
      EXPECT_LE(differing, depth);
      EXPECT_LE(depth, h);
      for (const auto& a : legal_actions(s, mdp, state, depth)) {
        auto next = apply_action(s, state, a);
        if (seen.insert({next, depth + 1}).second) queue.push_back({next, depth + 1});
      }
    }
  }
}

TEST(MdpSpecs, DefaultHorizons) {
  auto s = small_space();
  EXPECT_EQ(MdpSpec::heavy(s).horizon, 4u);
  EXPECT_EQ(MdpSpec::light(s, s.defaults()).horizon, 8u);
  EXPECT_EQ(MdpSpec::one_level(s).horizon, 12u);
  EXPECT_THROW(MdpSpec::heavy(s, 0), SpecError);
}

TEST(ScaledReward, SelfIsZero) {
  EXPECT_EQ(scaled_reward(2335, 2335), 0.0);
  EXPECT_EQ(scaled_reward(-7.5, -7.5), 0.0);
}

TEST(ScaledReward, RelativeImprovement) {
  EXPECT_NEAR(scaled_reward(5424, 2335), 1.3229122055674517, 1e-12);
  EXPECT_NEAR(scaled_reward(5424, 2335), (5424.0 - 2335.0) / 2335.0, 1e-15);
}

TEST(ScaledReward, EpsilonGuardsSmallDefaults) {
  EXPECT_DOUBLE_EQ(scaled_reward(0.5, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(scaled_reward(-1.0, -0.25), -0.75);
}

TEST(ScaledReward, NonFiniteRejected) {
  EXPECT_THROW(scaled_reward(std::numeric_limits<double>::quiet_NaN(), 1.0), std::domain_error);
  EXPECT_THROW(scaled_reward(std::numeric_limits<double>::infinity(), 1.0), std::domain_error);
  EXPECT_THROW(scaled_reward(1.0, std::numeric_limits<double>::infinity()), std::domain_error);
}
