#include "udo/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace udo {

std::string to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::Index:
      return "index";
    case ParamKind::RestartRequired:
      return "restart";
    case ParamKind::Runtime:
      return "runtime";
    case ParamKind::QueryOrder:
      return "query_order";
  }
  return "runtime";
}

ParamKind param_kind_from_string(const std::string& text) {
  if (text == "index") return ParamKind::Index;
  if (text == "restart" || text == "restart_required") return ParamKind::RestartRequired;
  if (text == "runtime") return ParamKind::Runtime;
  if (text == "query_order") return ParamKind::QueryOrder;
  throw SpecError("unknown parameter kind '" + text + "'");
}

std::size_t ConfigurationHash::operator()(const Configuration& c) const noexcept {
  // FNV-1a over the value indices.
  std::size_t h = 1469598103934665603ULL;
  for (std::size_t v : c.values) {
    h ^= v + 0x9e3779b97f4a7c15ULL;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_string(const Configuration& config) {
  std::string out;
  for (std::size_t i = 0; i < config.values.size(); ++i) {
    if (i) out += ':';
    out += std::to_string(config.values[i]);
  }
  return out;
}

Configuration configuration_from_string(const std::string& text) {
  Configuration config;
  if (text.empty()) return config;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ':')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw SpecError("malformed configuration '" + text + "'");
    }
    if (used != item.size()) throw SpecError("malformed configuration '" + text + "'");
    config.values.push_back(static_cast<std::size_t>(v));
  }
  return config;
}

ParameterSplit split_parameters(const std::vector<ParameterSpec>& params) {
  ParameterSplit split;
  for (const auto& p : params) {
    (p.is_heavy() ? split.heavy_ids : split.light_ids).push_back(p.id);
  }
  return split;
}

ConfigurationSpace::ConfigurationSpace(std::vector<ParameterSpec> params, ConstraintPredicate constraint)
    : params_(std::move(params)), constraint_(std::move(constraint)) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (p.id != i) throw SpecError("parameter '" + p.name + "' has id " + std::to_string(p.id) + ", expected " + std::to_string(i));
    if (p.domain.empty()) throw SpecError("parameter '" + p.name + "' has an empty domain");
    if (p.default_index >= p.domain.size()) throw SpecError("parameter '" + p.name + "' default is out of range");
    if (p.kind == ParamKind::Index && p.domain.size() != 2)
      throw SpecError("index parameter '" + p.name + "' must have exactly two values (absent/present)");
    if (!(p.cost_hint >= 0.0) || !std::isfinite(p.cost_hint))
      throw SpecError("parameter '" + p.name + "' has a negative or non-finite cost");
    all_ids_.push_back(i);
  }
  split_ = split_parameters(params_);
}

Configuration ConfigurationSpace::defaults() const {
  Configuration c;
  c.values.reserve(params_.size());
  for (const auto& p : params_) c.values.push_back(p.default_index);
  return c;
}

bool ConfigurationSpace::admits(const Configuration& config) const {
  if (config.size() != params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (config[i] >= params_[i].domain.size()) return false;
  }
  return !constraint_ || constraint_(config);
}

void ConfigurationSpace::validate(const Configuration& config) const {
  if (config.size() != params_.size())
    throw std::out_of_range("configuration has " + std::to_string(config.size()) + " values, space has " +
                            std::to_string(params_.size()) + " parameters");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (config[i] >= params_[i].domain.size())
      throw std::out_of_range("value index " + std::to_string(config[i]) + " out of range for '" + params_[i].name + "'");
  }
}

std::size_t ConfigurationSpace::cardinality() const {
  std::size_t n = 1;
  for (const auto& p : params_) {
    if (n > std::numeric_limits<std::size_t>::max() / p.domain.size()) return std::numeric_limits<std::size_t>::max();
    n *= p.domain.size();
  }
  return n;
}

Configuration ConfigurationSpace::heavy_projection(const Configuration& config) const {
  Configuration out = config;
  for (std::size_t id : split_.light_ids) out[id] = params_[id].default_index;
  return out;
}

Configuration ConfigurationSpace::combine(const Configuration& heavy, const Configuration& light) const {
  Configuration out = heavy;
  for (std::size_t id : split_.light_ids) out[id] = light[id];
  return out;
}

Configuration apply_action(const ConfigurationSpace& space, const Configuration& config, const Action& action) {
  if (action.param_id >= space.size()) throw std::out_of_range("action references unknown parameter " + std::to_string(action.param_id));
  if (config.size() != space.size()) throw std::out_of_range("configuration length does not match the space");
  if (action.new_value >= space.param(action.param_id).domain.size())
    throw std::out_of_range("action value " + std::to_string(action.new_value) + " out of range for '" +
                            space.param(action.param_id).name + "'");
  if (config[action.param_id] == action.new_value)
    throw ContractViolation("action does not change parameter '" + space.param(action.param_id).name + "'");
  Configuration next = config;
  next[action.param_id] = action.new_value;
  return next;
}

const std::vector<std::size_t>& level_ids(const ConfigurationSpace& space, MdpLevel level) {
  switch (level) {
    case MdpLevel::Heavy:
      return space.heavy_ids();
    case MdpLevel::Light:
      return space.light_ids();
    case MdpLevel::OneLevel:
      break;
  }
  return space.all_ids();
}

MdpSpec MdpSpec::heavy(const ConfigurationSpace& space, std::size_t horizon) {
  if (horizon == 0) throw SpecError("horizon must be at least 1");
  return {MdpLevel::Heavy, space.defaults(), horizon};
}

MdpSpec MdpSpec::light(const ConfigurationSpace& space, const Configuration& heavy_context, std::size_t horizon) {
  if (horizon == 0) throw SpecError("horizon must be at least 1");
  space.validate(heavy_context);
  return {MdpLevel::Light, space.heavy_projection(heavy_context), horizon};
}

MdpSpec MdpSpec::one_level(const ConfigurationSpace& space, std::size_t horizon) {
  if (horizon == 0) throw SpecError("horizon must be at least 1");
  return {MdpLevel::OneLevel, space.defaults(), horizon};
}

std::vector<Action> legal_actions(const ConfigurationSpace& space, const MdpSpec& mdp, const Configuration& state,
                                  std::size_t steps_taken) {
  if (steps_taken > mdp.horizon) throw ContractViolation("steps taken exceed the MDP horizon");
  std::vector<Action> actions;
  if (steps_taken == mdp.horizon) return actions;
  for (std::size_t id : level_ids(space, mdp.level)) {
    const std::size_t n = space.param(id).domain.size();
    for (std::size_t v = 0; v < n; ++v) {
      if (v == state[id]) continue;
      Configuration next = state;
      next[id] = v;
      if (space.admits(next)) actions.push_back({id, v});
    }
  }
  return actions;
}

double scaled_reward(double raw, double default_raw, double epsilon) {
  if (!std::isfinite(raw)) throw std::domain_error("benchmark value is not finite");
  if (!std::isfinite(default_raw)) throw std::domain_error("default benchmark value is not finite");
  return (raw - default_raw) / std::max(std::abs(default_raw), epsilon);
}

}  // namespace udo
