#ifndef HONEY_GRAPH_HPP
#define HONEY_GRAPH_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "honey/error.hpp"

namespace honey {

using NodeId = std::size_t;

// A resolved, non-channel argument value.
using Scalar = std::variant<double, std::string>;

std::string scalar_text(const Scalar& s);

// Channel selection against the dataset sources ("echo #.*", echo "HR").
struct Selection {
  enum class Kind { regex, exact };
  Kind kind = Kind::regex;
  std::string pattern;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct OperatorNode {
  NodeId id = 0;
  std::string op_name;
  // Resolved arguments keyed by parameter name (positional ones included).
  std::map<std::string, Scalar> args;
  // Positional literals used for output-channel auto naming.
  std::vector<std::string> label_params;
  // Main input read directly from the dataset sources.
  std::optional<Selection> source;
  // Source node whose output depends on the dataset time span (tick, calendar).
  bool needs_span = false;
  // Set on the merge node created for a `recursive` variable.
  std::string junction_for;
  std::vector<std::string> group_path;
  SourceLocation loc;

  const Scalar* arg(const std::string& name) const;
};

struct Pipe {
  NodeId from = 0;
  NodeId to = 0;
  std::string port = "in";
  bool recursive_back_edge = false;

  friend bool operator==(const Pipe&, const Pipe&) = default;
};

struct GroupInfo {
  std::vector<std::string> path;
  SourceLocation loc;
  bool call = false;  // opened by a function call rather than a group block
};

// Static process flow diagram. After compilation nodes[i].id == i and the
// node order is topological over non-back-edge pipes.
struct FlowGraph {
  std::vector<OperatorNode> nodes;
  std::vector<Pipe> pipes;
  std::vector<GroupInfo> groups;
  // Cycles through recursive back edges, filled by finalize().
  std::vector<std::vector<NodeId>> cycles;
  // Compile-time notes (unused bindings...), merged by validate().
  std::vector<Diagnostic> notes;

  bool is_cyclic() const { return !cycles.empty(); }
  std::vector<const Pipe*> inputs_of(NodeId id) const;
  std::vector<const Pipe*> outputs_of(NodeId id) const;
};

// Kahn order over non-back-edge pipes, ties broken by smallest node id.
// Throws Errc::cycle naming the nodes left on a cycle.
std::vector<NodeId> topological_order(const FlowGraph& graph);

// Same, but every pipe counts (the static executor's schedule).
std::vector<NodeId> full_topological_order(const FlowGraph& graph);

// All elementary cycles that traverse at least one recursive back edge, each
// rotated to start at its smallest node id, sorted.
std::vector<std::vector<NodeId>> find_cycles(const FlowGraph& graph);

// Renumbers nodes into topological order and fills `cycles`.
void finalize(FlowGraph& graph);

}  // namespace honey

#endif  // HONEY_GRAPH_HPP
