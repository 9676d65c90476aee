#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "udo/bandit.hpp"

namespace udo::testing {

// Single-node statistics tree with one action per arm.
struct FlatBandit {
  StatsTree tree;
  NodeKey root{0, Configuration{{0}}};
  DelayBuffer buffer;

  explicit FlatBandit(std::size_t arms) {
    NodeStats node;
    for (std::size_t a = 0; a < arms; ++a) node.actions.push_back(Action{0, a + 1});
    node.arms.resize(arms);
    node.exp3.cum_weighted.assign(arms, 0.0);
    tree.emplace(root, std::move(node));
  }

  const NodeStats& node() const { return tree.at(root); }
};

// Delayed UCB-V on a flat bandit: the arm chosen at step t is rewarded at step t + tau.
// reward(arm, pull_index_of_that_arm) supplies the rewards.
template <class RewardFn>
std::vector<std::size_t> run_delayed_ucbv(std::size_t arms, std::size_t steps, const BanditParams& params,
                                          RewardFn reward) {
  FlatBandit bandit(arms);
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> pulls(arms, 0);
  std::vector<double> pending(steps, 0.0);
  chosen.reserve(steps);
  for (std::uint64_t t = 0; t < steps; ++t) {
    const std::size_t arm = select_ucbv(bandit.node(), params);
    chosen.push_back(arm);
    pending[t] = reward(arm, pulls[arm]++);
    bandit.buffer.record_issue({PathStep{bandit.root, arm}}, t);
    if (t >= params.tau_max) {
      const std::uint64_t issued = t - params.tau_max;
      const Resolution res{issued, pending[issued]};
      apply_feedback(bandit.buffer, bandit.tree, std::span<const Resolution>(&res, 1), t, params);
    }
  }
  return chosen;
}

// Textbook UCB-V with immediate feedback, recomputing moments from the raw reward lists.
template <class RewardFn>
std::vector<std::size_t> run_plain_ucbv(std::size_t arms, std::size_t steps, double b, RewardFn reward) {
  std::vector<std::vector<double>> seen(arms);
  std::vector<std::size_t> chosen;
  for (std::size_t t = 0; t < steps; ++t) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < arms; ++a) {
      double score = std::numeric_limits<double>::infinity();
      if (!seen[a].empty()) {
        const double n = static_cast<double>(seen[a].size());
        const double mean = std::accumulate(seen[a].begin(), seen[a].end(), 0.0) / n;
        double var = 0.0;
        for (double r : seen[a]) var += (r - mean) * (r - mean);
        var /= n;
        const double lt = std::log(static_cast<double>(t));
        score = mean + std::sqrt(2.4 * var * lt / n) + 3.0 * b * lt / n;
      }
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    chosen.push_back(best);
    seen[best].push_back(reward(best, seen[best].size()));
  }
  return chosen;
}

// Mean pseudo-regret of delayed UCB-V on a Bernoulli bandit, averaged over seeds, at each checkpoint.
inline std::vector<double> bernoulli_regret(const std::vector<double>& means, std::size_t tau, std::size_t seeds,
                                            const std::vector<std::size_t>& checkpoints) {
  const double top = *std::max_element(means.begin(), means.end());
  const std::size_t steps = checkpoints.back();
  std::vector<double> avg(checkpoints.size(), 0.0);
  BanditParams params;
  params.tau_max = tau;
  params.rave_enabled = false;
  for (std::size_t s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    std::vector<std::bernoulli_distribution> coin;
    for (double m : means) coin.emplace_back(m);
    const auto chosen = run_delayed_ucbv(means.size(), steps, params,
                                         [&](std::size_t arm, std::size_t) { return coin[arm](rng) ? 1.0 : 0.0; });
    double regret = 0.0;
    std::size_t next = 0;
    for (std::size_t t = 0; t < steps; ++t) {
      regret += top - means[chosen[t]];
      if (next < checkpoints.size() && t + 1 == checkpoints[next]) avg[next++] += regret / static_cast<double>(seeds);
    }
  }
  return avg;
}

}  // namespace udo::testing
