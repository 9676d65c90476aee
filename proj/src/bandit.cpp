#include "udo/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace udo {

void ArmStats::push(double reward) {
  ++visits;
  const double delta = reward - mean;
  mean += delta / static_cast<double>(visits);
  m2 += delta * (reward - mean);
}

void ArmStats::push_rave(double reward) {
  ++rave_visits;
  const double delta = reward - rave_mean;
  rave_mean += delta / static_cast<double>(rave_visits);
  rave_m2 += delta * (reward - rave_mean);
}

void BanditParams::validate() const {
  if (!(b > 0.0)) throw SpecError("UCB-V range constant b must be positive");
  if (!(hoo_rho > 0.0 && hoo_rho < 1.0)) throw SpecError("hoo_rho must lie in (0, 1)");
  if (!(hoo_nu >= 0.0)) throw SpecError("hoo_nu must be nonnegative");
  if (exp3_eta && !(*exp3_eta > 0.0)) throw SpecError("exp3_eta must be positive");
  if (exp3_horizon == 0) throw SpecError("exp3_horizon must be at least 1");
}

double ucbv_score(const ArmStats& child, std::uint64_t parent_visits, const BanditParams& params) {
  if (child.visits == 0) return std::numeric_limits<double>::infinity();
  if (parent_visits == 0) throw ContractViolation("visited child under an unvisited parent");
  if (parent_visits < child.visits) throw ContractViolation("child has more visits than its parent");

  double mean = child.mean;
  double var = child.variance();
  double n = static_cast<double>(child.visits);
  if (params.rave_enabled && child.rave_visits > 0) {
    mean = child.rave_mean;
    var = child.rave_variance();
    n = static_cast<double>(child.rave_visits);
  }
  const double log_parent = std::log(static_cast<double>(parent_visits));
  return mean + std::sqrt(2.4 * var * log_parent / n) + 3.0 * params.b * log_parent / n;
}

double hoo_bvalue(double node_score, std::size_t depth, std::span<const double> child_bvalues,
                  const BanditParams& params) {
  const double own = node_score + params.hoo_nu * std::pow(params.hoo_rho, static_cast<double>(depth));
  if (child_bvalues.empty()) return own;
  const double best_child = *std::max_element(child_bvalues.begin(), child_bvalues.end());
  return std::min(own, best_child);
}

double default_exp3_eta(std::size_t num_actions, std::size_t horizon) {
  const double k = static_cast<double>(std::max<std::size_t>(num_actions, 2));
  return std::sqrt(std::log(k) / (k * static_cast<double>(std::max<std::size_t>(horizon, 1))));
}

std::vector<double> exp3_distribution(const Exp3Stats& stats, std::size_t num_actions, double eta) {
  if (num_actions == 0) throw std::invalid_argument("exp3_distribution needs at least one action");
  if (!(eta > 0.0)) throw std::invalid_argument("exp3 learning rate must be positive");
  std::vector<double> logits(num_actions, 0.0);
  for (std::size_t a = 0; a < num_actions && a < stats.cum_weighted.size(); ++a) logits[a] = eta * stats.cum_weighted[a];
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& x : logits) {
    x = std::exp(x - top);
    total += x;
  }
  // Keep every action reachable even when the weights are extremely skewed.
  constexpr double floor = 1e-300;
  for (double& x : logits) x = std::max(x / total, floor);
  return logits;
}

std::size_t NodeKeyHash::operator()(const NodeKey& k) const noexcept {
  return ConfigurationHash{}(k.state) ^ (k.depth * 0x9e3779b97f4a7c15ULL);
}

std::optional<std::size_t> NodeStats::find(const Action& a) const {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] == a) return i;
  }
  return std::nullopt;
}

std::size_t select_ucbv(const NodeStats& node, const BanditParams& params) {
  if (node.arms.empty()) throw ContractViolation("selection at a node without actions");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < node.arms.size(); ++i) {
    const double s = ucbv_score(node.arms[i], node.visits, params);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

void DelayBuffer::record_issue(std::vector<PathStep> path, std::uint64_t issued_at, bool closes_episode) {
  if (!entries_.empty() && issued_at < entries_.back().issued_at)
    throw ContractViolation("issue steps must be nondecreasing");
  if (path.empty()) throw std::invalid_argument("cannot issue an empty path");
  entries_.push_back({std::move(path), issued_at, closes_episode});
}

std::optional<DelayEntry> DelayBuffer::take(std::uint64_t issued_at) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const DelayEntry& e) { return e.issued_at == issued_at; });
  if (it == entries_.end()) return std::nullopt;
  DelayEntry e = std::move(*it);
  entries_.erase(it);
  return e;
}

namespace {

NodeStats& node_at(StatsTree& tree, const NodeKey& key) {
  auto it = tree.find(key);
  if (it == tree.end()) throw ContractViolation("feedback path references a node missing from the tree");
  return it->second;
}

void apply_one(StatsTree& tree, const DelayEntry& entry, double reward, const BanditParams& params) {
  const auto& path = entry.path;
  const PathStep& last = path.back();
  NodeStats& leaf = node_at(tree, last.node);
  if (last.action_index >= leaf.arms.size()) throw ContractViolation("feedback path references an unknown action");
  leaf.arms[last.action_index].push(reward);
  ++leaf.visits;

  auto prob = leaf.exp3.recorded_probs.find(entry.issued_at);
  if (prob != leaf.exp3.recorded_probs.end()) {
    if (!(prob->second > 0.0)) throw ContractViolation("recorded EXP3 probability is not positive");
    if (leaf.exp3.cum_weighted.size() < leaf.arms.size()) leaf.exp3.cum_weighted.resize(leaf.arms.size(), 0.0);
    leaf.exp3.cum_weighted[last.action_index] += reward / prob->second;
    leaf.exp3.recorded_probs.erase(prob);
  }

  if (!params.rave_enabled) return;
  std::vector<Action> below;
  for (std::size_t j = path.size(); j-- > 0;) {
    NodeStats& node = node_at(tree, path[j].node);
    below.push_back(node.actions.at(path[j].action_index));
    // Each action is credited once per ancestor even if it occurs twice below.
    std::vector<bool> credited(node.arms.size(), false);
    for (const Action& a : below) {
      if (auto idx = node.find(a); idx && !credited[*idx]) {
        node.arms[*idx].push_rave(reward);
        credited[*idx] = true;
      }
    }
  }
}

}  // namespace

FeedbackSummary apply_feedback(DelayBuffer& buffer, StatsTree& tree, std::span<const Resolution> resolutions,
                               std::uint64_t now, const BanditParams& params) {
  std::vector<Resolution> ordered(resolutions.begin(), resolutions.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Resolution& a, const Resolution& b) { return a.issued_at < b.issued_at; });

  FeedbackSummary summary;
  for (const auto& res : ordered) {
    if (res.issued_at > now) throw ContractViolation("feedback for step " + std::to_string(res.issued_at) + " arrived before it was issued");
    if (now - res.issued_at > params.tau_max)
      throw ContractViolation("feedback for step " + std::to_string(res.issued_at) + " arrived " +
                              std::to_string(now - res.issued_at) + " iterations late, limit is " +
                              std::to_string(params.tau_max));
    if (!std::isfinite(res.reward)) throw std::domain_error("reward is not finite");
    auto entry = buffer.take(res.issued_at);
    if (!entry) throw ContractViolation("no pending issue at step " + std::to_string(res.issued_at));
    apply_one(tree, *entry, res.reward, params);
    ++summary.applied;
    if (entry->closes_episode) ++summary.episodes_closed;
  }

  for (const auto& e : buffer.entries()) {
    if (now > e.issued_at + params.tau_max)
      throw ContractViolation("issue at step " + std::to_string(e.issued_at) + " is past its feedback deadline");
  }
  return summary;
}

}  // namespace udo
