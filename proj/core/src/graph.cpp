#include "contrafair/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <unordered_map>

#include "contrafair/error.hpp"

namespace contrafair {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::kProtected: return "protected";
    case Role::kObservable: return "observable";
    case Role::kOutcome: return "outcome";
  }
  return "observable";
}

Role parse_role(std::string_view text) {
  if (text == "protected") return Role::kProtected;
  if (text == "observable") return Role::kObservable;
  if (text == "outcome") return Role::kOutcome;
  throw Error(ErrorCode::kParseError, "unknown role '" + std::string(text) + "'");
}

std::optional<int> VariableSpec::level_index(std::string_view label) const {
  auto it = std::find(levels.begin(), levels.end(), label);
  if (it == levels.end()) return std::nullopt;
  return static_cast<int>(it - levels.begin());
}

bool VariableSpec::admits(double value) const noexcept {
  if (!std::isfinite(value)) return false;
  if (!categorical()) return true;
  return value >= 0 && value < static_cast<double>(levels.size()) &&
         std::floor(value) == value;
}

std::string VariableSpec::format_value(double value) const {
  if (categorical() && admits(value)) return levels[static_cast<std::size_t>(value)];
  // Shortest text that parses back to the same double.
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  std::string text = buffer;
  for (int precision = 1; precision < 17; ++precision) {
    std::snprintf(buffer, sizeof buffer, "%.*g", precision, value);
    if (std::strtod(buffer, nullptr) == value) {
      text = buffer;
      break;
    }
  }
  return text;
}

CausalGraph::CausalGraph(std::vector<VariableSpec> variables, std::vector<Edge> edges)
    : variables_(std::move(variables)), edges_(std::move(edges)) {}

const VariableSpec* CausalGraph::find(std::string_view name) const noexcept {
  for (const auto& v : variables_) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const VariableSpec& CausalGraph::at(std::string_view name) const {
  const VariableSpec* v = find(name);
  if (v == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "unknown variable '" + std::string(name) + "'");
  }
  return *v;
}

std::vector<std::string> CausalGraph::parents(std::string_view child) const {
  std::vector<std::string> out;
  for (const auto& e : edges_) {
    if (e.child == child) out.push_back(e.parent);
  }
  return out;
}

std::vector<std::string> CausalGraph::children(std::string_view parent) const {
  std::vector<std::string> out;
  for (const auto& e : edges_) {
    if (e.parent == parent) out.push_back(e.child);
  }
  return out;
}

std::vector<const VariableSpec*> CausalGraph::with_role(Role role) const {
  std::vector<const VariableSpec*> out;
  for (const auto& v : variables_) {
    if (v.role == role) out.push_back(&v);
  }
  return out;
}

std::vector<std::string> CausalGraph::topological_order() const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < variables_.size(); ++i) index.emplace(variables_[i].name, i);

  std::vector<std::size_t> in_degree(variables_.size(), 0);
  std::vector<std::vector<std::size_t>> out_edges(variables_.size());
  for (const auto& e : edges_) {
    auto p = index.find(e.parent);
    auto c = index.find(e.child);
    if (p == index.end() || c == index.end()) {
      throw Error(ErrorCode::kDanglingEdge, e.parent + " -> " + e.child);
    }
    out_edges[p->second].push_back(c->second);
    ++in_degree[c->second];
  }

  // The ready set is ordered by declaration index so the order is canonical.
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (in_degree[i] == 0) ready.insert(i);
  }
  std::vector<std::string> order;
  order.reserve(variables_.size());
  while (!ready.empty()) {
    std::size_t next = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(variables_[next].name);
    for (std::size_t child : out_edges[next]) {
      if (--in_degree[child] == 0) ready.insert(child);
    }
  }

  if (order.size() != variables_.size()) {
    // Any edge whose child never became ready lies on or below a cycle; report
    // one whose parent is also unresolved, which must sit on the cycle path.
    for (const auto& e : edges_) {
      if (in_degree[index.at(e.child)] > 0 && in_degree[index.at(e.parent)] > 0) {
        throw Error(ErrorCode::kCycleDetected, e.parent + " -> " + e.child);
      }
    }
    throw Error(ErrorCode::kCycleDetected, "graph is not acyclic");
  }
  return order;
}

void validate_graph(const CausalGraph& graph) {
  std::set<std::string, std::less<>> names;
  bool has_protected = false;
  bool has_outcome = false;
  for (const auto& v : graph.variables()) {
    if (v.name.empty()) throw Error(ErrorCode::kInvalidDomain, "variable with empty name");
    if (v.name == "id" || v.name == "time") {
      throw Error(ErrorCode::kInvalidDomain, "'" + v.name + "' is a reserved column name");
    }
    if (!names.insert(v.name).second) throw Error(ErrorCode::kDuplicateVariable, v.name);
    if (v.categorical()) {
      if (v.levels.size() < 2) {
        throw Error(ErrorCode::kInvalidDomain, v.name + ": categorical domain needs >= 2 levels");
      }
      std::set<std::string> distinct(v.levels.begin(), v.levels.end());
      if (distinct.size() != v.levels.size()) {
        throw Error(ErrorCode::kInvalidDomain, v.name + ": repeated level label");
      }
      if (v.role == Role::kObservable) {
        throw Error(ErrorCode::kInvalidDomain,
                    v.name + ": observable variables must be continuous");
      }
    }
    has_protected |= v.role == Role::kProtected;
    has_outcome |= v.role == Role::kOutcome;
  }

  for (const auto& e : graph.edges()) {
    if (graph.find(e.parent) == nullptr || graph.find(e.child) == nullptr) {
      throw Error(ErrorCode::kDanglingEdge, e.parent + " -> " + e.child);
    }
  }
  // Role violations are reported ahead of cycles: an edge into a protected
  // root closes a cycle whenever that root already has descendants.
  for (const auto& e : graph.edges()) {
    if (graph.at(e.child).role == Role::kProtected) {
      throw Error(ErrorCode::kProtectedHasParent, e.parent + " -> " + e.child);
    }
    if (graph.at(e.parent).role == Role::kOutcome) {
      throw Error(ErrorCode::kOutcomeHasChildren, e.parent + " -> " + e.child);
    }
  }
  for (const auto& e : graph.edges()) {
    if (e.parent == e.child) throw Error(ErrorCode::kCycleDetected, e.parent + " -> " + e.child);
  }
  graph.topological_order();

  if (!has_protected) throw Error(ErrorCode::kEmptyRoles, "no protected variable declared");
  if (!has_outcome) throw Error(ErrorCode::kEmptyRoles, "no outcome variable declared");
}

}  // namespace contrafair
