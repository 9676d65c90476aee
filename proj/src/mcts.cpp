#include "udo/mcts.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace udo {

std::string to_string(SelectionPolicy policy) {
  switch (policy) {
    case SelectionPolicy::Ucbv:
      return "ucbv";
    case SelectionPolicy::Exp3:
      return "exp3";
    case SelectionPolicy::Hoo:
      return "hoo";
  }
  return "ucbv";
}

SelectionPolicy selection_policy_from_string(const std::string& text) {
  if (text == "ucbv") return SelectionPolicy::Ucbv;
  if (text == "exp3") return SelectionPolicy::Exp3;
  if (text == "hoo") return SelectionPolicy::Hoo;
  throw SpecError("unknown selection policy '" + text + "'");
}

SearchTree::SearchTree(const ConfigurationSpace& space, MdpSpec mdp, BanditParams params, SelectionPolicy policy,
                       std::uint64_t seed)
    : space_(&space), mdp_(std::move(mdp)), params_(params), policy_(policy), rng_(seed) {
  params_.validate();
  if (mdp_.horizon == 0) throw SpecError("horizon must be at least 1");
  space.validate(mdp_.start);
  cursor_ = mdp_.start;
}

NodeStats& SearchTree::ensure_node(std::size_t depth, const Configuration& state) {
  NodeKey key{depth, state};
  auto it = nodes_.find(key);
  if (it != nodes_.end()) return it->second;
  NodeStats node;
  node.actions = legal_actions(*space_, mdp_, state, depth);
  node.arms.resize(node.actions.size());
  node.exp3.cum_weighted.assign(node.actions.size(), 0.0);
  return nodes_.emplace(std::move(key), std::move(node)).first->second;
}

const NodeStats* SearchTree::find_node(std::size_t depth, const Configuration& state) const {
  auto it = nodes_.find(NodeKey{depth, state});
  return it == nodes_.end() ? nullptr : &it->second;
}

double SearchTree::bvalue(const NodeKey& key, std::size_t arm,
                          std::map<std::pair<std::size_t, Configuration>, double>& memo) const {
  const NodeStats& node = nodes_.at(key);
  const double score = ucbv_score(node.arms[arm], node.visits, params_);
  const std::size_t child_depth = key.depth + 1;
  Configuration child_state = key.state;
  child_state[node.actions[arm].param_id] = node.actions[arm].new_value;

  std::vector<double> children;
  auto it = nodes_.find(NodeKey{child_depth, child_state});
  if (it != nodes_.end() && !it->second.arms.empty()) {
    auto memo_key = std::make_pair(child_depth, child_state);
    auto cached = memo.find(memo_key);
    if (cached != memo.end()) {
      children.push_back(cached->second);
    } else {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < it->second.arms.size(); ++a) top = std::max(top, bvalue(it->first, a, memo));
      memo.emplace(std::move(memo_key), top);
      children.push_back(top);
    }
  }
  return hoo_bvalue(score, child_depth, children, params_);
}

Selection SearchTree::select(const Configuration& state, std::size_t steps_taken,
                             std::optional<std::uint64_t> issued_at) {
  NodeStats& node = ensure_node(steps_taken, state);
  if (node.actions.empty()) throw ContractViolation("selection requested at a terminal state");

  Selection sel;
  switch (policy_) {
    case SelectionPolicy::Ucbv:
      sel.action_index = select_ucbv(node, params_);
      break;
    case SelectionPolicy::Hoo: {
      std::map<std::pair<std::size_t, Configuration>, double> memo;
      const NodeKey key{steps_taken, state};
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < node.arms.size(); ++a) {
        const double b = bvalue(key, a, memo);
        if (b > best) {
          best = b;
          sel.action_index = a;
        }
      }
      break;
    }
    case SelectionPolicy::Exp3: {
      const double eta = params_.exp3_eta ? *params_.exp3_eta : default_exp3_eta(node.arms.size(), params_.exp3_horizon);
      const auto probs = exp3_distribution(node.exp3, node.arms.size(), eta);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
      double acc = 0.0;
      sel.action_index = probs.size() - 1;
      for (std::size_t a = 0; a < probs.size(); ++a) {
        acc += probs[a];
        if (u < acc) {
          sel.action_index = a;
          break;
        }
      }
      sel.probability = probs[sel.action_index];
      if (issued_at) node.exp3.recorded_probs[*issued_at] = sel.probability;
      break;
    }
  }
  sel.action = node.actions[sel.action_index];
  sel.next = apply_action(*space_, state, sel.action);
  return sel;
}

void SearchTree::restart_episode() {
  cursor_ = mdp_.start;
  steps_taken_ = 0;
  path_.clear();
}

EpisodeStep SearchTree::step(std::uint64_t issued_at) {
  if (legal_actions(*space_, mdp_, cursor_, steps_taken_).empty()) {
    if (steps_taken_ == 0) throw ContractViolation("the MDP has no legal action at its start state");
    restart_episode();
  }
  const Selection sel = select(cursor_, steps_taken_, issued_at);
  path_.push_back({NodeKey{steps_taken_, cursor_}, sel.action_index});
  cursor_ = sel.next;
  ++steps_taken_;
  const bool closes = legal_actions(*space_, mdp_, cursor_, steps_taken_).empty();

  EpisodeStep out{path_, cursor_, issued_at, closes};
  buffer_.record_issue(path_, issued_at, closes);
  if (closes) restart_episode();
  return out;
}

FeedbackSummary SearchTree::update(std::span<const Resolution> resolutions, std::uint64_t now) {
  const auto summary = apply_feedback(buffer_, nodes_, resolutions, now, params_);
  episodes_completed_ += summary.episodes_closed;
  return summary;
}

void SearchTree::cancel(std::uint64_t issued_at) {
  auto entry = buffer_.take(issued_at);
  if (!entry) throw ContractViolation("no pending issue at step " + std::to_string(issued_at));
  if (entry->closes_episode) ++episodes_completed_;
}

void SearchTree::record_observation(const Configuration& config, const Observation& obs) {
  auto& s = observed_[config];
  ++s.count;
  const double n = static_cast<double>(s.count);
  s.mean_raw += (obs.raw - s.mean_raw) / n;
  s.mean_reward += (obs.reward - s.mean_reward) / n;
}

std::optional<Configuration> SearchTree::best() const {
  const Configuration* best = nullptr;
  const ObservedStats* best_stats = nullptr;
  // std::map iterates in configuration order, so the first of equal candidates is the smallest.
  for (const auto& [config, stats] : observed_) {
    if (!best_stats || stats.mean_reward > best_stats->mean_reward ||
        (stats.mean_reward == best_stats->mean_reward && stats.count > best_stats->count)) {
      best = &config;
      best_stats = &stats;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

Selection rl_select(SearchTree& tree, const Configuration& state, std::size_t steps_taken) {
  return tree.select(state, steps_taken);
}

FeedbackSummary rl_update(SearchTree& tree, std::span<const Resolution> results, std::uint64_t now) {
  return tree.update(results, now);
}

OptimizeResult rl_optimize(SearchTree& tree, const ObserveFn& evaluate, std::size_t budget) {
  if (budget == 0) throw std::invalid_argument("rl_optimize budget must be at least 1");
  OptimizeResult result;
  tree.restart_episode();
  for (std::size_t i = 0; i < budget; ++i) {
    const std::uint64_t issue = tree.next_issue();
    const EpisodeStep step = tree.step(issue);
    Observation obs;
    try {
      obs = evaluate(step.state);
    } catch (const std::exception& e) {
      tree.cancel(issue);
      result.error = e.what();
      break;
    }
    tree.record_observation(step.state, obs);
    result.samples.push_back({step.state, obs.raw, obs.reward});
    const Resolution res{issue, obs.reward};
    tree.update(std::span<const Resolution>(&res, 1), issue);
  }
  result.best = tree.best();
  return result;
}

}  // namespace udo
