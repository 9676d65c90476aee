#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "udo/bandit.hpp"
#include "udo/env.hpp"
#include "udo/mcts.hpp"
#include "udo/planner.hpp"
#include "udo/space.hpp"

namespace udo {

struct EvalRequest {
  Configuration heavy_conf;
  std::uint64_t issued_at = 0;
  std::uint64_t deadline = 0;
  std::uint64_t id = 0;  // unique per evaluator, in submission order
};

struct EvalResult {
  Configuration heavy_conf;
  Configuration config;  // full configuration that was benchmarked
  double raw = 0.0;
  double reward = 0.0;
  std::uint64_t issued_at = 0;
  std::uint64_t resolved_at = 0;
  std::uint64_t deadline = 0;
  bool failed = false;
  std::string error;
};

using RequestBuffer = std::vector<EvalRequest>;

/// Largest cost savings observed so far per pending request id.
class SavingsLedger {
 public:
  double max_savings(std::uint64_t id) const;
  void observe(std::uint64_t id, double savings);
  void erase(std::uint64_t id) { max_.erase(id); }
  std::size_t size() const { return max_.size(); }

 private:
  std::map<std::uint64_t, double> max_;
};

void submit(RequestBuffer& buffer, const Configuration& heavy_conf, std::uint64_t issued_at, std::uint64_t deadline,
            std::uint64_t id);

/// Whole buffer once it holds at least `rho` requests, nothing otherwise.
std::vector<EvalRequest> pick_threshold(RequestBuffer& buffer, std::uint64_t t, std::size_t rho, std::size_t tau_max);

using SavingsFn = std::function<double(const EvalRequest& request, std::span<const EvalRequest> picked)>;

/// Secretary-style picking: requests at their deadline are forced; the others
/// are only observed during the first delta/e iterations of their window, then
/// picked on the first savings exceeding everything observed before.
std::vector<EvalRequest> pick_secretary(RequestBuffer& buffer, SavingsLedger& ledger, std::uint64_t t,
                                        std::size_t delta, const SavingsFn& savings);

/// Reconfiguration cost avoided by evaluating `request` right after one of
/// `picked` instead of from the current state; 0 when nothing is picked.
double cost_savings(const EvalRequest& request, std::span<const EvalRequest> picked, const CostModel& model,
                    const Configuration& current);

enum class PickerKind { Threshold, Secretary };

std::string to_string(PickerKind kind);
PickerKind picker_kind_from_string(const std::string& text);

inline constexpr std::size_t kDefaultLightBudget = 32;
inline constexpr std::size_t kDefaultPickThreshold = 20;

struct EvaluatorConfig {
  PickerKind picker = PickerKind::Secretary;
  std::size_t rho = kDefaultPickThreshold;
  std::size_t tau_max = 10;
  PlannerKind planner = PlannerKind::Auto;
  std::size_t light_budget = kDefaultLightBudget;
  std::size_t light_horizon = kDefaultLightHorizon;
  SelectionPolicy light_policy = SelectionPolicy::Ucbv;
  BanditParams light_params{};
  std::size_t light_cache_cap = 0;  // 0: unbounded
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SampleKind { Default, Light, Final, OneLevel };

/// Receives every benchmark run the evaluator performs.
using SampleSink = std::function<void(const Configuration& config, double raw, double reward, SampleKind kind)>;

/// Evaluation manager: buffers deadline-stamped heavy configurations, picks a
/// batch per iteration, orders it for minimal reconfiguration, tunes the light
/// parameters per heavy configuration and benchmarks the result.
class Evaluator {
 public:
  Evaluator(const ConfigurationSpace& space, EvaluatorConfig config, double default_raw);

  const EvaluatorConfig& config() const { return config_; }
  const RequestBuffer& pending() const { return buffer_; }
  const SavingsLedger& ledger() const { return ledger_; }

  void submit(const Configuration& heavy_conf, std::uint64_t issued_at, std::uint64_t deadline);

  /// Picks, orders and evaluates pending requests at iteration t.
  std::vector<EvalResult> receive(Environment& env, std::uint64_t t, const SampleSink& sink = {});

  /// Tunes light parameters for `heavy_conf` with zero delay, resuming cached statistics.
  OptimizeResult optimize_light(Environment& env, const Configuration& heavy_conf, std::size_t budget,
                                const SampleSink& sink = {});

  bool has_cached_light_tree(const Configuration& heavy_conf) const;
  std::size_t light_cache_size() const { return light_cache_.size(); }
  const std::vector<Plan>& plans() const { return plans_; }

 private:
  std::vector<EvalRequest> pick(Environment& env, std::uint64_t t);
  SearchTree& light_tree(const Configuration& heavy_conf);

  const ConfigurationSpace* space_;
  EvaluatorConfig config_;
  double default_raw_;
  CostModel cost_model_;
  RequestBuffer buffer_;
  SavingsLedger ledger_;
  std::uint64_t next_id_ = 0;

  struct CachedTree {
    std::unique_ptr<SearchTree> tree;
    std::list<Configuration>::iterator lru;
  };
  std::map<Configuration, CachedTree> light_cache_;
  std::list<Configuration> lru_;  // front = most recently used
  std::vector<Plan> plans_;
};

}  // namespace udo
