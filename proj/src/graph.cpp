#include "honey/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <tuple>

#include "honey/record.hpp"

namespace honey {

std::string scalar_text(const Scalar& s) {
  if (const double* d = std::get_if<double>(&s)) return format_number(*d);
  return std::get<std::string>(s);
}

const Scalar* OperatorNode::arg(const std::string& name) const {
  auto it = args.find(name);
  return it == args.end() ? nullptr : &it->second;
}

std::vector<const Pipe*> FlowGraph::inputs_of(NodeId id) const {
  std::vector<const Pipe*> out;
  for (const Pipe& p : pipes)
    if (p.to == id) out.push_back(&p);
  return out;
}

std::vector<const Pipe*> FlowGraph::outputs_of(NodeId id) const {
  std::vector<const Pipe*> out;
  for (const Pipe& p : pipes)
    if (p.from == id) out.push_back(&p);
  return out;
}

namespace {

std::vector<NodeId> kahn(const FlowGraph& graph, bool skip_back_edges) {
  const std::size_t n = graph.nodes.size();
  std::vector<std::vector<NodeId>> next(n);
  std::vector<std::size_t> in_degree(n, 0);
  for (const Pipe& p : graph.pipes) {
    if (p.from >= n || p.to >= n)
      throw Error(Errc::internal, "pipe references a missing node");
    if (skip_back_edges && p.recursive_back_edge) continue;
    next[p.from].push_back(p.to);
    ++in_degree[p.to];
  }

  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId id = 0; id < n; ++id)
    if (in_degree[id] == 0) ready.push(id);

  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId to : next[id])
      if (--in_degree[to] == 0) ready.push(to);
  }

  if (order.size() != n) {
    std::string names;
    for (NodeId id = 0; id < n; ++id) {
      if (in_degree[id] == 0) continue;
      if (!names.empty()) names += ", ";
      names += "#" + std::to_string(id) + " " + graph.nodes[id].op_name;
    }
    throw Error(Errc::cycle, "flow graph contains a cycle through " + names);
  }
  return order;
}

}  // namespace

std::vector<NodeId> topological_order(const FlowGraph& graph) { return kahn(graph, true); }

std::vector<NodeId> full_topological_order(const FlowGraph& graph) {
  return kahn(graph, false);
}

std::vector<std::vector<NodeId>> find_cycles(const FlowGraph& graph) {
  const std::size_t n = graph.nodes.size();
  std::vector<std::set<NodeId>> next(n);
  std::set<std::pair<NodeId, NodeId>> back;
  for (const Pipe& p : graph.pipes) {
    next[p.from].insert(p.to);
    if (p.recursive_back_edge) back.emplace(p.from, p.to);
  }
  if (back.empty()) return {};

  std::vector<std::vector<NodeId>> cycles;
  std::vector<NodeId> path;
  std::vector<char> on_path(n, 0);

  // Elementary cycles rooted at their smallest node: from each start, only
  // walk through larger ids.
  std::function<void(NodeId, NodeId)> walk = [&](NodeId start, NodeId at) {
    for (NodeId to : next[at]) {
      if (to == start) {
        bool uses_back_edge = false;
        for (std::size_t i = 0; i < path.size(); ++i) {
          NodeId from = path[i];
          NodeId dest = i + 1 < path.size() ? path[i + 1] : start;
          if (back.count({from, dest})) {
            uses_back_edge = true;
            break;
          }
        }
        if (uses_back_edge) cycles.push_back(path);
      } else if (to > start && !on_path[to]) {
        on_path[to] = 1;
        path.push_back(to);
        walk(start, to);
        path.pop_back();
        on_path[to] = 0;
      }
    }
  };

  for (NodeId start = 0; start < n; ++start) {
    path = {start};
    on_path[start] = 1;
    walk(start, start);
    on_path[start] = 0;
  }
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

void finalize(FlowGraph& graph) {
  std::vector<NodeId> order = topological_order(graph);
  std::vector<NodeId> new_id(graph.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) new_id[order[i]] = i;

  std::vector<OperatorNode> nodes;
  nodes.reserve(order.size());
  for (NodeId old : order) {
    nodes.push_back(std::move(graph.nodes[old]));
    nodes.back().id = nodes.size() - 1;
  }
  graph.nodes = std::move(nodes);

  for (Pipe& p : graph.pipes) {
    p.from = new_id[p.from];
    p.to = new_id[p.to];
  }
  std::sort(graph.pipes.begin(), graph.pipes.end(), [](const Pipe& a, const Pipe& b) {
    return std::tie(a.to, a.from, a.port) < std::tie(b.to, b.from, b.port);
  });
  graph.pipes.erase(std::unique(graph.pipes.begin(), graph.pipes.end()), graph.pipes.end());
  graph.cycles = find_cycles(graph);
}

}  // namespace honey
