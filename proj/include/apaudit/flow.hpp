#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "apaudit/code_index.hpp"

namespace apaudit {

/// Statement-level control flow of one function. Node i is statement i;
/// node statements.size() is the synthetic exit. Statement 0 (the parameter
/// entry) is the start node.
struct FlowGraph {
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::vector<std::size_t>> pred;

  std::size_t exit() const noexcept { return succ.size() - 1; }
};

/// Built from the guard tree: branches and loops from guard statements,
/// break/continue/goto from jump statements, returns to the exit. A switch
/// guard may enter any of its direct children. A goto to an unknown label
/// leaves the function. Nodes that cannot reach the exit get an edge to it.
FlowGraph build_flow_graph(const FunctionRecord& fn);

/// Immediate postdominator of every node; the exit maps to itself.
std::vector<std::size_t> immediate_postdominators(const FlowGraph& g);

/// For each statement, the branch statements it is directly control dependent on.
std::vector<std::set<std::size_t>> control_dependences(const FlowGraph& g);

}  // namespace apaudit
