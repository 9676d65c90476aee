#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "udo/bandit.hpp"
#include "udo/space.hpp"

namespace udo {

enum class SelectionPolicy { Ucbv, Exp3, Hoo };

std::string to_string(SelectionPolicy policy);
SelectionPolicy selection_policy_from_string(const std::string& text);

struct Selection {
  Action action;
  std::size_t action_index = 0;
  Configuration next;
  double probability = 1.0;  // EXP3 only; 1 for the deterministic policies
};

/// One tree-policy step of the running episode, already registered as pending feedback.
struct EpisodeStep {
  std::vector<PathStep> path;
  Configuration state;
  std::uint64_t issued_at = 0;
  bool closes_episode = false;
};

struct Observation {
  double raw = 0.0;
  double reward = 0.0;
};

struct Sample {
  Configuration config;
  double raw = 0.0;
  double reward = 0.0;
};

struct ObservedStats {
  std::uint64_t count = 0;
  double mean_raw = 0.0;
  double mean_reward = 0.0;
};

/// Monte Carlo search tree over one MDP. Nodes are keyed by (depth, state) and
/// created lazily on first selection. The tree keeps an episode cursor: each
/// step() advances one action and the episode restarts at the MDP's start state
/// once no legal action remains.
///
/// The space must outlive the tree.
class SearchTree {
 public:
  SearchTree(const ConfigurationSpace& space, MdpSpec mdp, BanditParams params,
             SelectionPolicy policy = SelectionPolicy::Ucbv, std::uint64_t seed = 0);

  const ConfigurationSpace& space() const { return *space_; }
  const MdpSpec& mdp() const { return mdp_; }
  const BanditParams& params() const { return params_; }
  SelectionPolicy policy() const { return policy_; }

  /// Chooses an action at (state, steps_taken). When `issued_at` is given the
  /// EXP3 probability is recorded for later importance weighting.
  Selection select(const Configuration& state, std::size_t steps_taken,
                   std::optional<std::uint64_t> issued_at = std::nullopt);

  /// Advances the episode cursor by one selection and registers the step as
  /// pending feedback issued at `issued_at`.
  EpisodeStep step(std::uint64_t issued_at);
  void restart_episode();
  bool at_episode_start() const { return steps_taken_ == 0; }

  FeedbackSummary update(std::span<const Resolution> resolutions, std::uint64_t now);
  /// Drops pending feedback for a step whose evaluation failed.
  void cancel(std::uint64_t issued_at);

  void record_observation(const Configuration& config, const Observation& obs);
  /// Highest empirical mean reward; ties go to more visits, then the smaller configuration.
  std::optional<Configuration> best() const;
  const std::map<Configuration, ObservedStats>& observed() const { return observed_; }

  const StatsTree& nodes() const { return nodes_; }
  const NodeStats* find_node(std::size_t depth, const Configuration& state) const;
  const NodeStats* root() const { return find_node(0, mdp_.start); }
  const DelayBuffer& pending() const { return buffer_; }
  std::uint64_t episodes_completed() const { return episodes_completed_; }
  std::uint64_t next_issue() { return issue_counter_++; }

 private:
  NodeStats& ensure_node(std::size_t depth, const Configuration& state);
  double bvalue(const NodeKey& key, std::size_t arm, std::map<std::pair<std::size_t, Configuration>, double>& memo) const;

  const ConfigurationSpace* space_;
  MdpSpec mdp_;
  BanditParams params_;
  SelectionPolicy policy_;
  std::mt19937_64 rng_;

  StatsTree nodes_;
  DelayBuffer buffer_;
  std::map<Configuration, ObservedStats> observed_;

  Configuration cursor_;
  std::size_t steps_taken_ = 0;
  std::vector<PathStep> path_;
  std::uint64_t episodes_completed_ = 0;
  std::uint64_t issue_counter_ = 0;
};

Selection rl_select(SearchTree& tree, const Configuration& state, std::size_t steps_taken);

FeedbackSummary rl_update(SearchTree& tree, std::span<const Resolution> results, std::uint64_t now);

using ObserveFn = std::function<Observation(const Configuration&)>;

struct OptimizeResult {
  std::optional<Configuration> best;
  std::vector<Sample> samples;
  std::optional<std::string> error;  // set when the evaluator failed; samples are partial
};

/// Runs `budget` zero-delay select -> evaluate -> update steps from a fresh episode.
OptimizeResult rl_optimize(SearchTree& tree, const ObserveFn& evaluate, std::size_t budget);

}  // namespace udo
