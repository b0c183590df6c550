#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace contrafair {

enum class Role { kProtected, kObservable, kOutcome };

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view text);

// A node of the causal graph. An empty `levels` list means a continuous
// domain; otherwise the variable is categorical and its values are stored as
// level indices (0 = first declared level, used as the one-hot reference).
struct VariableSpec {
  std::string name;
  Role role = Role::kObservable;
  std::vector<std::string> levels;

  bool categorical() const noexcept { return !levels.empty(); }
  // Index of `label` in `levels`, or nullopt.
  std::optional<int> level_index(std::string_view label) const;
  // True when `value` is admissible (any finite real for continuous, an
  // integral level index for categorical).
  bool admits(double value) const noexcept;
  // Renders a stored value: the level label for categorical variables.
  std::string format_value(double value) const;
};

struct Edge {
  std::string parent;
  std::string child;

  friend bool operator==(const Edge&, const Edge&) = default;
};

class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::vector<VariableSpec> variables, std::vector<Edge> edges);

  const std::vector<VariableSpec>& variables() const noexcept { return variables_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  const VariableSpec* find(std::string_view name) const noexcept;
  const VariableSpec& at(std::string_view name) const;

  // Parents of `child` in edge declaration order.
  std::vector<std::string> parents(std::string_view child) const;
  std::vector<std::string> children(std::string_view parent) const;

  std::vector<const VariableSpec*> with_role(Role role) const;

  // Kahn's algorithm; ties broken by declaration order. Throws CycleDetected.
  std::vector<std::string> topological_order() const;

 private:
  std::vector<VariableSpec> variables_;
  std::vector<Edge> edges_;
};

// Checks every structural invariant of a usable graph: unique names, valid
// domains, declared edge endpoints, acyclicity, parentless protected roots,
// childless outcomes and at least one protected and one outcome variable.
void validate_graph(const CausalGraph& graph);

}  // namespace contrafair
