#include "udo/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace udo {

double SavingsLedger::max_savings(std::uint64_t id) const {
  auto it = max_.find(id);
  return it == max_.end() ? 0.0 : it->second;
}

void SavingsLedger::observe(std::uint64_t id, double savings) {
  auto [it, inserted] = max_.try_emplace(id, savings);
  if (!inserted) it->second = std::max(it->second, savings);
}

void submit(RequestBuffer& buffer, const Configuration& heavy_conf, std::uint64_t issued_at, std::uint64_t deadline,
            std::uint64_t id) {
  if (deadline < issued_at) throw ContractViolation("request deadline precedes its issue step");
  buffer.push_back({heavy_conf, issued_at, deadline, id});
}

std::vector<EvalRequest> pick_threshold(RequestBuffer& buffer, std::uint64_t /*t*/, std::size_t rho,
                                        std::size_t tau_max) {
  if (rho > tau_max) throw SpecError("pick threshold exceeds the maximal delay");
  if (buffer.empty() || buffer.size() < rho) return {};
  std::vector<EvalRequest> out;
  out.swap(buffer);
  return out;
}

std::vector<EvalRequest> pick_secretary(RequestBuffer& buffer, SavingsLedger& ledger, std::uint64_t t,
                                        std::size_t delta, const SavingsFn& savings) {
  std::vector<EvalRequest> picked;
  RequestBuffer rest;
  for (auto& r : buffer) {
    if (t >= r.deadline) {
      picked.push_back(std::move(r));
    } else {
      rest.push_back(std::move(r));
    }
  }

  const double observe_window = static_cast<double>(delta) / std::numbers::e;
  RequestBuffer keep;
  for (auto& r : rest) {
    const double s = savings(r, picked);
    const double elapsed = static_cast<double>(t) - (static_cast<double>(r.deadline) - static_cast<double>(delta));
    const double best_seen = ledger.max_savings(r.id);
    const bool take = elapsed >= observe_window && s > best_seen;
    ledger.observe(r.id, s);
    if (take) {
      picked.push_back(std::move(r));
    } else {
      keep.push_back(std::move(r));
    }
  }
  for (const auto& r : picked) ledger.erase(r.id);
  buffer = std::move(keep);
  return picked;
}

double cost_savings(const EvalRequest& request, std::span<const EvalRequest> picked, const CostModel& model,
                    const Configuration& current) {
  if (picked.empty()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : picked) best = std::min(best, model.switch_cost(p.heavy_conf, request.heavy_conf));
  return std::max(0.0, model.switch_cost(current, request.heavy_conf) - best);
}

std::string to_string(PickerKind kind) { return kind == PickerKind::Threshold ? "threshold" : "secretary"; }

PickerKind picker_kind_from_string(const std::string& text) {
  if (text == "threshold") return PickerKind::Threshold;
  if (text == "secretary") return PickerKind::Secretary;
  throw SpecError("unknown picker '" + text + "'");
}

void EvaluatorConfig::validate() const {
  if (picker == PickerKind::Threshold && rho > tau_max) throw SpecError("pick threshold exceeds the maximal delay");
  if (picker == PickerKind::Threshold && rho == 0) throw SpecError("pick threshold must be at least 1");
  if (light_budget == 0) throw SpecError("light budget must be at least 1");
  if (light_horizon == 0) throw SpecError("light horizon must be at least 1");
  light_params.validate();
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t config_seed(std::uint64_t seed, const Configuration& c) {
  std::uint64_t h = mix(seed);
  for (auto v : c.values) h = mix(h ^ v);
  return h;
}

}  // namespace

Evaluator::Evaluator(const ConfigurationSpace& space, EvaluatorConfig config, double default_raw)
    : space_(&space), config_(std::move(config)), default_raw_(default_raw), cost_model_(space) {
  config_.validate();
  if (!std::isfinite(default_raw)) throw std::domain_error("default benchmark value is not finite");
}

void Evaluator::submit(const Configuration& heavy_conf, std::uint64_t issued_at, std::uint64_t deadline) {
  space_->validate(heavy_conf);
  if (deadline - issued_at > config_.tau_max || deadline < issued_at)
    throw ContractViolation("request deadline outside the allowed delay");
  udo::submit(buffer_, space_->heavy_projection(heavy_conf), issued_at, deadline, next_id_++);
}

std::vector<EvalRequest> Evaluator::pick(Environment& env, std::uint64_t t) {
  if (config_.picker == PickerKind::Threshold) return pick_threshold(buffer_, t, config_.rho, config_.tau_max);
  const Configuration current = env.current();
  const SavingsFn fn = [&](const EvalRequest& r, std::span<const EvalRequest> picked) {
    return cost_savings(r, picked, cost_model_, current);
  };
  return pick_secretary(buffer_, ledger_, t, config_.tau_max, fn);
}

SearchTree& Evaluator::light_tree(const Configuration& heavy_conf) {
  auto it = light_cache_.find(heavy_conf);
  if (it != light_cache_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.lru);
    return *it->second.tree;
  }
  if (config_.light_cache_cap > 0 && light_cache_.size() >= config_.light_cache_cap) {
    light_cache_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(heavy_conf);
  auto tree = std::make_unique<SearchTree>(*space_, MdpSpec::light(*space_, heavy_conf, config_.light_horizon),
                                           config_.light_params, config_.light_policy,
                                           config_seed(config_.seed, heavy_conf));
  auto& slot = light_cache_[heavy_conf];
  slot.tree = std::move(tree);
  slot.lru = lru_.begin();
  return *slot.tree;
}

bool Evaluator::has_cached_light_tree(const Configuration& heavy_conf) const {
  return light_cache_.contains(heavy_conf);
}

OptimizeResult Evaluator::optimize_light(Environment& env, const Configuration& heavy_conf, std::size_t budget,
                                         const SampleSink& sink) {
  const Configuration heavy = space_->heavy_projection(heavy_conf);
  const MdpSpec mdp = MdpSpec::light(*space_, heavy, config_.light_horizon);
  if (legal_actions(*space_, mdp, mdp.start, 0).empty()) {
    OptimizeResult out;
    out.best = mdp.start;
    return out;
  }
  SearchTree& tree = light_tree(heavy);
  const ObserveFn observe = [&](const Configuration& c) {
    const double raw = env.evaluate(c);
    const double reward = scaled_reward(raw, default_raw_);
    if (sink) sink(c, raw, reward, SampleKind::Light);
    return Observation{raw, reward};
  };
  return rl_optimize(tree, observe, budget);
}

std::vector<EvalResult> Evaluator::receive(Environment& env, std::uint64_t t, const SampleSink& sink) {
  for (const auto& r : buffer_) {
    if (r.deadline < t)
      throw ContractViolation("request issued at " + std::to_string(r.issued_at) + " missed its deadline " +
                              std::to_string(r.deadline));
  }
  std::vector<EvalRequest> picked = pick(env, t);
  if (picked.empty()) return {};

  std::vector<Configuration> unique;
  for (const auto& r : picked) {
    if (std::find(unique.begin(), unique.end(), r.heavy_conf) == unique.end()) unique.push_back(r.heavy_conf);
  }
  Plan order = plan(config_.planner, unique, env.current(), cost_model_);

  std::map<Configuration, EvalResult> outcome;
  for (const auto& heavy : order.steps) {
    EvalResult res;
    res.heavy_conf = heavy;
    res.config = space_->combine(heavy, space_->defaults());
    res.resolved_at = t;
    try {
      env.reconfigure(heavy);
      OptimizeResult light = optimize_light(env, heavy, config_.light_budget, sink);
      if (light.error) throw EnvironmentError(*light.error);
      if (light.best) res.config = *light.best;
      res.raw = env.evaluate(res.config);
      res.reward = scaled_reward(res.raw, default_raw_);
      if (sink) sink(res.config, res.raw, res.reward, SampleKind::Final);
    } catch (const EnvironmentError& e) {
      res.failed = true;
      res.error = e.what();
    } catch (const std::domain_error& e) {
      res.failed = true;
      res.error = e.what();
    }
    outcome.emplace(heavy, std::move(res));
  }
  plans_.push_back(std::move(order));

  std::vector<EvalResult> results;
  results.reserve(picked.size());
  for (const auto& heavy : plans_.back().steps) {
    for (const auto& r : picked) {
      if (r.heavy_conf != heavy) continue;
      EvalResult res = outcome.at(heavy);
      res.issued_at = r.issued_at;
      res.deadline = r.deadline;
      results.push_back(std::move(res));
    }
  }
  return results;
}

}  // namespace udo
