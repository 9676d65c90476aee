#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "udo/space.hpp"

namespace udo {

/// Asymmetric reconfiguration costs between heavy configurations.
///
/// Index parameters cost their cardinality hint when created and nothing when
/// dropped; restart-required parameters cost a flat restart whenever their value
/// changes. Light parameters never contribute.
class CostModel {
 public:
  CostModel() = default;
  explicit CostModel(const ConfigurationSpace& space);

  double switch_cost(const Configuration& from, const Configuration& to) const;
  std::size_t size() const { return params_.size(); }

 private:
  struct Rule {
    std::size_t id;
    ParamKind kind;
    double cost;
    std::size_t absent_value;
  };
  std::vector<Rule> params_;
};

double switch_cost(const Configuration& from, const Configuration& to, const CostModel& model);

/// Ordering instance over n abstract requests. `start[j]` is the hop from the
/// current database state to request j, `cost[i][j]` the switch from i to j.
struct OrderingProblem {
  std::vector<double> start;
  std::vector<std::vector<double>> cost;

  std::size_t size() const { return start.size(); }
  static OrderingProblem from_configurations(const std::vector<Configuration>& requests, const Configuration& current,
                                             const CostModel& model);
};

struct Plan {
  std::vector<std::size_t> order;  // permutation of request indices
  std::vector<Configuration> steps;
  std::vector<double> step_costs;  // step_costs[0] is the hop from the current state
  double total = 0.0;              // including the initial hop
  double internal = 0.0;           // switches between requests only
};

inline constexpr std::size_t kExactPlannerLimit = 15;
inline constexpr std::size_t kAutoExactThreshold = 12;

enum class PlannerKind { Greedy, Exact, Auto };

std::string to_string(PlannerKind kind);
PlannerKind planner_kind_from_string(const std::string& text);

/// Cost of visiting the requests in `order`.
Plan evaluate_order(const OrderingProblem& problem, std::vector<std::size_t> order);

Plan plan_greedy(const OrderingProblem& problem);
Plan plan_exact(const OrderingProblem& problem);

Plan plan_greedy(const std::vector<Configuration>& requests, const Configuration& current, const CostModel& model);
Plan plan_exact(const std::vector<Configuration>& requests, const Configuration& current, const CostModel& model);
Plan plan(PlannerKind kind, const std::vector<Configuration>& requests, const Configuration& current,
          const CostModel& model);

// ---------------------------------------------------------------------------
// Integer program for reconfiguration cost minimization.
//
//   e_t_r        request r is evaluated at step t                (n*n binaries)
//   i_t_r1_r2    switch r1 -> r2 happens between t and t+1       ((n-1)*n*n binaries)
//
//   min  sum c(r1,r2) * i_t_r1_r2
//   s.t. sum_r e_t_r = 1, sum_t e_t_r = 1,
//        i_t_r1_r2 - e_t_r1 - e_{t+1}_r2 >= -1
// ---------------------------------------------------------------------------

struct LinearTerm {
  std::string var;
  double coef = 0.0;
  bool operator==(const LinearTerm&) const = default;
};

enum class Sense { LessEqual, Equal, GreaterEqual };

struct LinearConstraint {
  std::string name;
  std::vector<LinearTerm> terms;
  Sense sense = Sense::Equal;
  double rhs = 0.0;
  bool operator==(const LinearConstraint&) const = default;
};

struct IlpModel {
  std::size_t n = 0;
  std::vector<LinearTerm> objective;
  std::vector<LinearConstraint> constraints;
  std::vector<std::string> binaries;
  bool operator==(const IlpModel&) const = default;
};

std::string e_var(std::size_t t, std::size_t r);
std::string i_var(std::size_t t, std::size_t r1, std::size_t r2);

/// Builds the model over 1-based steps and requests.
IlpModel build_ilp(const OrderingProblem& problem);

using VarAssignment = std::map<std::string, double>;

/// e-assignment for a permutation plus the smallest feasible i-values.
VarAssignment encode_order(const IlpModel& model, const std::vector<std::size_t>& order);
double objective_value(const IlpModel& model, const VarAssignment& values);
bool is_feasible(const IlpModel& model, const VarAssignment& values, double tol = 1e-9);

/// CPLEX LP text. Deterministic: objective, constraints, then binaries, all in index order.
std::string render_lp(const IlpModel& model);
void write_lp(std::ostream& out, const IlpModel& model);
/// Parses text produced by render_lp.
IlpModel parse_lp(const std::string& text);

/// Reduction instance from Hamiltonian path: edge -> cost 0, non-edge -> cost 1,
/// zero start hop.
OrderingProblem np_hardness_witness(const std::vector<std::vector<bool>>& adjacency);

}  // namespace udo
