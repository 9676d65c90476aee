#include "udo/planner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace udo {

CostModel::CostModel(const ConfigurationSpace& space) {
  for (std::size_t id : space.heavy_ids()) {
    const auto& p = space.param(id);
    params_.push_back({id, p.kind, p.cost_hint, 0});
  }
}

double CostModel::switch_cost(const Configuration& from, const Configuration& to) const {
  double total = 0.0;
  for (const auto& rule : params_) {
    if (rule.id >= from.size() || rule.id >= to.size()) throw std::out_of_range("configuration shorter than the cost model");
    if (from[rule.id] == to[rule.id]) continue;
    if (rule.kind == ParamKind::Index) {
      if (to[rule.id] != rule.absent_value) total += rule.cost;
    } else {
      total += rule.cost;
    }
  }
  return total;
}

double switch_cost(const Configuration& from, const Configuration& to, const CostModel& model) {
  return model.switch_cost(from, to);
}

OrderingProblem OrderingProblem::from_configurations(const std::vector<Configuration>& requests,
                                                     const Configuration& current, const CostModel& model) {
  OrderingProblem p;
  const std::size_t n = requests.size();
  p.start.resize(n);
  p.cost.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    p.start[j] = model.switch_cost(current, requests[j]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) p.cost[i][j] = model.switch_cost(requests[i], requests[j]);
    }
  }
  return p;
}

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::Greedy:
      return "greedy";
    case PlannerKind::Exact:
      return "exact";
    case PlannerKind::Auto:
      return "auto";
  }
  return "auto";
}

PlannerKind planner_kind_from_string(const std::string& text) {
  if (text == "greedy") return PlannerKind::Greedy;
  if (text == "exact") return PlannerKind::Exact;
  if (text == "auto") return PlannerKind::Auto;
  throw SpecError("unknown planner '" + text + "'");
}

Plan evaluate_order(const OrderingProblem& problem, std::vector<std::size_t> order) {
  Plan plan;
  plan.order = std::move(order);
  for (std::size_t k = 0; k < plan.order.size(); ++k) {
    const std::size_t r = plan.order[k];
    const double c = k == 0 ? problem.start.at(r) : problem.cost.at(plan.order[k - 1]).at(r);
    plan.step_costs.push_back(c);
    plan.total += c;
    if (k > 0) plan.internal += c;
  }
  return plan;
}

Plan plan_greedy(const OrderingProblem& problem) {
  const std::size_t n = problem.size();
  if (n == 0) throw std::invalid_argument("plan_greedy needs at least one request");
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best_pos = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t pos = 0; pos <= order.size(); ++pos) {
      const double into = pos == 0 ? problem.start[r] : problem.cost[order[pos - 1]][r];
      double delta = into;
      if (pos < order.size()) {
        const std::size_t next = order[pos];
        const double old_edge = pos == 0 ? problem.start[next] : problem.cost[order[pos - 1]][next];
        delta += problem.cost[r][next] - old_edge;
      }
      if (delta < best) {
        best = delta;
        best_pos = pos;
      }
    }
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(best_pos), r);
  }
  return evaluate_order(problem, std::move(order));
}

Plan plan_exact(const OrderingProblem& problem) {
  const std::size_t n = problem.size();
  if (n == 0) throw std::invalid_argument("plan_exact needs at least one request");
  if (n > kExactPlannerLimit)
    throw std::invalid_argument("plan_exact supports at most " + std::to_string(kExactPlannerLimit) + " requests, got " +
                                std::to_string(n) + "; use the greedy planner");

  // Held-Karp over (visited set, last request), with the current state as source.
  const std::size_t full = (std::size_t{1} << n) - 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp((full + 1) * n, inf);
  std::vector<std::uint8_t> parent((full + 1) * n, 0xff);
  auto at = [n](std::size_t mask, std::size_t last) { return mask * n + last; };

  for (std::size_t j = 0; j < n; ++j) dp[at(std::size_t{1} << j, j)] = problem.start[j];
  for (std::size_t mask = 1; mask <= full; ++mask) {
    for (std::size_t last = 0; last < n; ++last) {
      if (!(mask & (std::size_t{1} << last))) continue;
      const double here = dp[at(mask, last)];
      if (here == inf) continue;
      for (std::size_t next = 0; next < n; ++next) {
        if (mask & (std::size_t{1} << next)) continue;
        const std::size_t m2 = mask | (std::size_t{1} << next);
        const double cand = here + problem.cost[last][next];
        if (cand < dp[at(m2, next)]) {
          dp[at(m2, next)] = cand;
          parent[at(m2, next)] = static_cast<std::uint8_t>(last);
        }
      }
    }
  }

  std::size_t last = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (dp[at(full, j)] < dp[at(full, last)]) last = j;
  }
  std::vector<std::size_t> order;
  std::size_t mask = full;
  while (true) {
    order.push_back(last);
    const std::uint8_t prev = parent[at(mask, last)];
    mask &= ~(std::size_t{1} << last);
    if (prev == 0xff) break;
    last = prev;
  }
  std::reverse(order.begin(), order.end());
  return evaluate_order(problem, std::move(order));
}

namespace {

Plan attach_steps(Plan plan, const std::vector<Configuration>& requests) {
  plan.steps.reserve(plan.order.size());
  for (std::size_t r : plan.order) plan.steps.push_back(requests[r]);
  return plan;
}

}  // namespace

Plan plan_greedy(const std::vector<Configuration>& requests, const Configuration& current, const CostModel& model) {
  return attach_steps(plan_greedy(OrderingProblem::from_configurations(requests, current, model)), requests);
}

Plan plan_exact(const std::vector<Configuration>& requests, const Configuration& current, const CostModel& model) {
  return attach_steps(plan_exact(OrderingProblem::from_configurations(requests, current, model)), requests);
}

Plan plan(PlannerKind kind, const std::vector<Configuration>& requests, const Configuration& current,
          const CostModel& model) {
  switch (kind) {
    case PlannerKind::Greedy:
      return plan_greedy(requests, current, model);
    case PlannerKind::Exact:
      return plan_exact(requests, current, model);
    case PlannerKind::Auto:
      break;
  }
  return requests.size() <= kAutoExactThreshold ? plan_exact(requests, current, model)
                                                : plan_greedy(requests, current, model);
}

// --- ILP -------------------------------------------------------------------

std::string e_var(std::size_t t, std::size_t r) { return "e_" + std::to_string(t) + "_" + std::to_string(r); }

std::string i_var(std::size_t t, std::size_t r1, std::size_t r2) {
  return "i_" + std::to_string(t) + "_" + std::to_string(r1) + "_" + std::to_string(r2);
}

IlpModel build_ilp(const OrderingProblem& problem) {
  const std::size_t n = problem.size();
  IlpModel m;
  m.n = n;

  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t r1 = 1; r1 <= n; ++r1)
      for (std::size_t r2 = 1; r2 <= n; ++r2) {
        const double c = r1 == r2 ? 0.0 : problem.cost[r1 - 1][r2 - 1];
        m.objective.push_back({i_var(t, r1, r2), c});
      }
  if (m.objective.empty() && n > 0) m.objective.push_back({e_var(1, 1), 0.0});

  for (std::size_t t = 1; t <= n; ++t) {
    LinearConstraint c{"step_" + std::to_string(t), {}, Sense::Equal, 1.0};
    for (std::size_t r = 1; r <= n; ++r) c.terms.push_back({e_var(t, r), 1.0});
    m.constraints.push_back(std::move(c));
  }
  for (std::size_t r = 1; r <= n; ++r) {
    LinearConstraint c{"request_" + std::to_string(r), {}, Sense::Equal, 1.0};
    for (std::size_t t = 1; t <= n; ++t) c.terms.push_back({e_var(t, r), 1.0});
    m.constraints.push_back(std::move(c));
  }
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t r1 = 1; r1 <= n; ++r1)
      for (std::size_t r2 = 1; r2 <= n; ++r2) {
        LinearConstraint c{"link_" + std::to_string(t) + "_" + std::to_string(r1) + "_" + std::to_string(r2),
                           {{i_var(t, r1, r2), 1.0}, {e_var(t, r1), -1.0}, {e_var(t + 1, r2), -1.0}},
                           Sense::GreaterEqual,
                           -1.0};
        m.constraints.push_back(std::move(c));
      }

  for (std::size_t t = 1; t <= n; ++t)
    for (std::size_t r = 1; r <= n; ++r) m.binaries.push_back(e_var(t, r));
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t r1 = 1; r1 <= n; ++r1)
      for (std::size_t r2 = 1; r2 <= n; ++r2) m.binaries.push_back(i_var(t, r1, r2));
  return m;
}

VarAssignment encode_order(const IlpModel& model, const std::vector<std::size_t>& order) {
  const std::size_t n = model.n;
  if (order.size() != n) throw std::invalid_argument("order length does not match the model");
  VarAssignment v;
  for (const auto& name : model.binaries) v[name] = 0.0;
  for (std::size_t t = 1; t <= n; ++t) v[e_var(t, order[t - 1] + 1)] = 1.0;
  for (std::size_t t = 1; t < n; ++t) v[i_var(t, order[t - 1] + 1, order[t] + 1)] = 1.0;
  return v;
}

namespace {

double lookup(const VarAssignment& values, const std::string& name) {
  auto it = values.find(name);
  return it == values.end() ? 0.0 : it->second;
}

}  // namespace

double objective_value(const IlpModel& model, const VarAssignment& values) {
  double sum = 0.0;
  for (const auto& term : model.objective) sum += term.coef * lookup(values, term.var);
  return sum;
}

bool is_feasible(const IlpModel& model, const VarAssignment& values, double tol) {
  for (const auto& name : model.binaries) {
    const double x = lookup(values, name);
    if (std::abs(x) > tol && std::abs(x - 1.0) > tol) return false;
  }
  for (const auto& c : model.constraints) {
    double lhs = 0.0;
    for (const auto& term : c.terms) lhs += term.coef * lookup(values, term.var);
    switch (c.sense) {
      case Sense::Equal:
        if (std::abs(lhs - c.rhs) > tol) return false;
        break;
      case Sense::LessEqual:
        if (lhs > c.rhs + tol) return false;
        break;
      case Sense::GreaterEqual:
        if (lhs < c.rhs - tol) return false;
        break;
    }
  }
  return true;
}

namespace {

std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_terms(std::ostream& out, const std::vector<LinearTerm>& terms) {
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double c = terms[k].coef;
    if (k == 0) {
      out << (std::signbit(c) ? "- " : "") << format_number(std::abs(c));
    } else {
      out << (std::signbit(c) ? " - " : " + ") << format_number(std::abs(c));
    }
    out << ' ' << terms[k].var;
  }
}

const char* sense_token(Sense s) {
  switch (s) {
    case Sense::LessEqual:
      return "<=";
    case Sense::Equal:
      return "=";
    case Sense::GreaterEqual:
      return ">=";
  }
  return "=";
}

}  // namespace

void write_lp(std::ostream& out, const IlpModel& model) {
  out << "\\ reconfiguration cost minimization, n = " << model.n << "\n";
  out << "Minimize\n obj: ";
  write_terms(out, model.objective);
  out << "\nSubject To\n";
  for (const auto& c : model.constraints) {
    out << ' ' << c.name << ": ";
    write_terms(out, c.terms);
    out << ' ' << sense_token(c.sense) << ' ' << format_number(c.rhs) << "\n";
  }
  out << "Binaries\n";
  for (const auto& b : model.binaries) out << ' ' << b << "\n";
  out << "End\n";
}

std::string render_lp(const IlpModel& model) {
  std::ostringstream out;
  write_lp(out, model);
  return out.str();
}

namespace {

double parse_number(const std::string& token) {
  double x = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), x);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size())
    throw std::invalid_argument("LP parse error: bad number '" + token + "'");
  return x;
}

// Parses "[-] c var (+|-) c var ..." from whitespace tokens.
std::vector<LinearTerm> parse_terms(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
  std::vector<LinearTerm> terms;
  std::size_t k = begin;
  while (k < end) {
    double sign = 1.0;
    if (tokens[k] == "+" || tokens[k] == "-") {
      sign = tokens[k] == "-" ? -1.0 : 1.0;
      ++k;
    }
    if (k + 1 >= end) throw std::invalid_argument("LP parse error: dangling term");
    const double c = parse_number(tokens[k]);
    terms.push_back({tokens[k + 1], sign * c});
    k += 2;
  }
  return terms;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

IlpModel parse_lp(const std::string& text) {
  IlpModel m;
  std::istringstream in(text);
  std::string line;
  enum class Section { None, Objective, Constraints, Binaries, Done } section = Section::None;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '\\') {
      const auto pos = line.find("n = ");
      if (pos != std::string::npos) m.n = static_cast<std::size_t>(parse_number(line.substr(pos + 4)));
      continue;
    }
    if (line == "Minimize") {
      section = Section::Objective;
      continue;
    }
    if (line == "Subject To") {
      section = Section::Constraints;
      continue;
    }
    if (line == "Binaries") {
      section = Section::Binaries;
      continue;
    }
    if (line == "End") {
      section = Section::Done;
      continue;
    }
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    switch (section) {
      case Section::Objective:
        if (tokens[0] != "obj:") throw std::invalid_argument("LP parse error: expected objective label");
        m.objective = parse_terms(tokens, 1, tokens.size());
        break;
      case Section::Constraints: {
        if (tokens.size() < 4 || tokens[0].back() != ':') throw std::invalid_argument("LP parse error: bad constraint");
        LinearConstraint c;
        c.name = tokens[0].substr(0, tokens[0].size() - 1);
        const std::string& op = tokens[tokens.size() - 2];
        if (op == "<=")
          c.sense = Sense::LessEqual;
        else if (op == "=")
          c.sense = Sense::Equal;
        else if (op == ">=")
          c.sense = Sense::GreaterEqual;
        else
          throw std::invalid_argument("LP parse error: bad sense '" + op + "'");
        c.rhs = parse_number(tokens.back());
        c.terms = parse_terms(tokens, 1, tokens.size() - 2);
        m.constraints.push_back(std::move(c));
        break;
      }
      case Section::Binaries:
        for (auto& t : tokens) m.binaries.push_back(t);
        break;
      default:
        throw std::invalid_argument("LP parse error: content outside a section");
    }
  }
  if (section != Section::Done) throw std::invalid_argument("LP parse error: missing End");
  return m;
}

OrderingProblem np_hardness_witness(const std::vector<std::vector<bool>>& adjacency) {
  const std::size_t n = adjacency.size();
  OrderingProblem p;
  p.start.assign(n, 0.0);
  p.cost.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i].size() != n) throw std::invalid_argument("adjacency matrix is not square");
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) p.cost[i][j] = (adjacency[i][j] || adjacency[j][i]) ? 0.0 : 1.0;
    }
  }
  return p;
}

}  // namespace udo
