#pragma once

// Brute-force reference for the slicer. Every dependency is materialized as an
// explicit edge between (function, statement, variable, context) nodes, and
// crossing depths come from a 0-1 BFS over that graph.

#include <map>
#include <set>
#include <string>
#include <utility>

#include "apaudit/code_index.hpp"
#include "apaudit/retrieval.hpp"

namespace oracle {

using MemberDepths = std::map<std::pair<std::string, std::size_t>, int>;

MemberDepths slice(const apaudit::CodeIndex& index, const apaudit::Seed& seed, int k_max, bool control_deps = true);

std::set<std::size_t> intra(const apaudit::FunctionRecord& fn, const std::string& ident, std::size_t statement,
                            apaudit::Direction direction, bool control_deps = true);

std::size_t last_edge_count();

}  // namespace oracle
