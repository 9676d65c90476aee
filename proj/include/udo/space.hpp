#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace udo {

/// Raised for malformed spaces, run specs and other user-supplied descriptions.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller breaks an API precondition (deadline missed, tree inconsistent, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class ParamKind { Index, RestartRequired, Runtime, QueryOrder };

std::string to_string(ParamKind kind);
ParamKind param_kind_from_string(const std::string& text);

struct ParameterSpec {
  std::size_t id = 0;
  std::string name;
  ParamKind kind = ParamKind::Runtime;
  std::vector<std::string> domain;
  std::size_t default_index = 0;
  // Index: cardinality of the indexed table (creation cost). Otherwise a flat switch cost.
  double cost_hint = 0.0;

  bool is_heavy() const { return kind == ParamKind::Index || kind == ParamKind::RestartRequired; }
};

struct Configuration {
  std::vector<std::size_t> values;

  std::size_t size() const { return values.size(); }
  std::size_t operator[](std::size_t i) const { return values[i]; }
  std::size_t& operator[](std::size_t i) { return values[i]; }

  auto operator<=>(const Configuration&) const = default;
  bool operator==(const Configuration&) const = default;
};

struct ConfigurationHash {
  std::size_t operator()(const Configuration& c) const noexcept;
};

/// Compact "1:0:3" rendering of the value indices.
std::string to_string(const Configuration& config);
Configuration configuration_from_string(const std::string& text);

struct Action {
  std::size_t param_id = 0;
  std::size_t new_value = 0;

  auto operator<=>(const Action&) const = default;
};

/// Partition of parameter ids into heavy and light, in ascending id order.
struct ParameterSplit {
  std::vector<std::size_t> heavy_ids;
  std::vector<std::size_t> light_ids;
};

ParameterSplit split_parameters(const std::vector<ParameterSpec>& params);

using ConstraintPredicate = std::function<bool(const Configuration&)>;

class ConfigurationSpace {
 public:
  ConfigurationSpace() = default;
  explicit ConfigurationSpace(std::vector<ParameterSpec> params, ConstraintPredicate constraint = {});

  const std::vector<ParameterSpec>& params() const { return params_; }
  const ParameterSpec& param(std::size_t id) const { return params_.at(id); }
  std::size_t size() const { return params_.size(); }
  const std::vector<std::size_t>& heavy_ids() const { return split_.heavy_ids; }
  const std::vector<std::size_t>& light_ids() const { return split_.light_ids; }
  const std::vector<std::size_t>& all_ids() const { return all_ids_; }
  bool is_heavy(std::size_t id) const { return params_.at(id).is_heavy(); }

  Configuration defaults() const;
  bool admits(const Configuration& config) const;
  void validate(const Configuration& config) const;

  /// Number of full configurations (saturates at SIZE_MAX).
  std::size_t cardinality() const;

  /// Copy of `config` with every light parameter reset to its default.
  Configuration heavy_projection(const Configuration& config) const;
  /// Heavy values from `heavy`, light values from `light`.
  Configuration combine(const Configuration& heavy, const Configuration& light) const;

 private:
  std::vector<ParameterSpec> params_;
  ParameterSplit split_;
  std::vector<std::size_t> all_ids_;
  ConstraintPredicate constraint_;
};

Configuration apply_action(const ConfigurationSpace& space, const Configuration& config, const Action& action);

enum class MdpLevel { Heavy, Light, OneLevel };

/// Parameter ids an MDP of the given level may change.
const std::vector<std::size_t>& level_ids(const ConfigurationSpace& space, MdpLevel level);

inline constexpr std::size_t kDefaultHeavyHorizon = 4;
inline constexpr std::size_t kDefaultLightHorizon = 8;
inline constexpr std::size_t kDefaultOneLevelHorizon = 12;

struct MdpSpec {
  MdpLevel level = MdpLevel::OneLevel;
  Configuration start;
  std::size_t horizon = kDefaultOneLevelHorizon;

  static MdpSpec heavy(const ConfigurationSpace& space, std::size_t horizon = kDefaultHeavyHorizon);
  /// Light MDP rooted at `heavy_context` (light values taken from the defaults).
  static MdpSpec light(const ConfigurationSpace& space, const Configuration& heavy_context,
                       std::size_t horizon = kDefaultLightHorizon);
  static MdpSpec one_level(const ConfigurationSpace& space, std::size_t horizon = kDefaultOneLevelHorizon);
};

std::vector<Action> legal_actions(const ConfigurationSpace& space, const MdpSpec& mdp, const Configuration& state,
                                  std::size_t steps_taken);

inline constexpr double kRewardEpsilon = 1.0;

/// Relative improvement over the default configuration's benchmark value.
double scaled_reward(double raw, double default_raw, double epsilon = kRewardEpsilon);

}  // namespace udo
