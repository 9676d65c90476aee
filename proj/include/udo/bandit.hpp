#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "udo/space.hpp"

namespace udo {

/// Visit count with Welford running moments, plus the RAVE aggregates shared
/// across the subtree.
struct ArmStats {
  std::uint64_t visits = 0;
  double mean = 0.0;
  double m2 = 0.0;
  std::uint64_t rave_visits = 0;
  double rave_mean = 0.0;
  double rave_m2 = 0.0;

  void push(double reward);
  void push_rave(double reward);
  double variance() const { return visits ? m2 / static_cast<double>(visits) : 0.0; }
  double rave_variance() const { return rave_visits ? rave_m2 / static_cast<double>(rave_visits) : 0.0; }
};

struct BanditParams {
  double b = 3.0;             // reward range constant of UCB-V
  std::size_t tau_max = 10;   // feedback may arrive at most this many iterations late
  double hoo_nu = 1.0;
  double hoo_rho = 0.5;
  std::optional<double> exp3_eta;  // unset: sqrt(ln K / (K * exp3_horizon)) per node
  std::size_t exp3_horizon = 1000;
  bool rave_enabled = true;

  void validate() const;
};

/// UCB-V bound; +infinity for an unvisited arm. With RAVE enabled the
/// subtree-shared mean, variance and count are substituted.
double ucbv_score(const ArmStats& child, std::uint64_t parent_visits, const BanditParams& params);

/// B = min(score + nu * rho^depth, max child B); a leaf keeps the first term.
double hoo_bvalue(double node_score, std::size_t depth, std::span<const double> child_bvalues,
                  const BanditParams& params);

struct Exp3Stats {
  std::vector<double> cum_weighted;                  // sum of r / P(a) per action
  std::map<std::uint64_t, double> recorded_probs;    // issue step -> P(chosen action) at that time
};

double default_exp3_eta(std::size_t num_actions, std::size_t horizon);

std::vector<double> exp3_distribution(const Exp3Stats& stats, std::size_t num_actions, double eta);

// ---------------------------------------------------------------------------
// Statistics tree and delayed feedback
// ---------------------------------------------------------------------------

struct NodeKey {
  std::size_t depth = 0;
  Configuration state;
  bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& k) const noexcept;
};

struct NodeStats {
  std::vector<Action> actions;
  std::vector<ArmStats> arms;
  Exp3Stats exp3;
  std::uint64_t visits = 0;  // sum of direct arm visits

  std::optional<std::size_t> find(const Action& a) const;
};

using StatsTree = std::unordered_map<NodeKey, NodeStats, NodeKeyHash>;

/// argmax of ucbv_score over the node's arms; the lowest action id wins ties.
std::size_t select_ucbv(const NodeStats& node, const BanditParams& params);

struct PathStep {
  NodeKey node;
  std::size_t action_index = 0;
};

struct DelayEntry {
  std::vector<PathStep> path;
  std::uint64_t issued_at = 0;
  bool closes_episode = false;
};

class DelayBuffer {
 public:
  void record_issue(std::vector<PathStep> path, std::uint64_t issued_at, bool closes_episode = false);

  std::size_t pending() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<DelayEntry>& entries() const { return entries_; }

  /// Removes and returns the oldest entry issued at `issued_at`.
  std::optional<DelayEntry> take(std::uint64_t issued_at);

 private:
  std::deque<DelayEntry> entries_;
};

struct Resolution {
  std::uint64_t issued_at = 0;
  double reward = 0.0;
};

struct FeedbackSummary {
  std::size_t applied = 0;
  std::size_t episodes_closed = 0;
};

/// Applies resolved rewards in issue order. The reward updates the direct
/// statistics of the last (state, action) pair on the stored path; RAVE
/// aggregates are updated at every ancestor for every action of the path at
/// or below it; EXP3 weights use the probability recorded at issue time.
FeedbackSummary apply_feedback(DelayBuffer& buffer, StatsTree& tree, std::span<const Resolution> resolutions,
                               std::uint64_t now, const BanditParams& params);

}  // namespace udo
