#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "apaudit/code_index.hpp"
#include "apaudit/flow.hpp"
#include "apaudit/retrieval.hpp"

namespace apaudit {

struct SlicerConfig {
  int k_max = 3;
  std::size_t context_char_budget = 24000;
  bool include_control_deps = true;

  /// Throws ConfigError when k_max < 0 or the budget is zero.
  void validate() const;
};

/// Pointer alias classes of one function: union-find over direct copies where
/// either side is a pointer variable.
class AliasClasses {
 public:
  explicit AliasClasses(const FunctionRecord& fn);
  /// v and every variable in its class.
  std::set<std::string> class_of(const std::string& v) const;

 private:
  std::string find(const std::string& v) const;
  mutable std::map<std::string, std::string> parent_;
};

/// Variables a statement makes available: strong defs plus the alias class of each weak def.
std::set<std::string> generated(const StatementNode& st, const AliasClasses& aliases);

/// Statement ids in the def-use slice over the flow graph of fn, from `ident` at `statement`.
/// Throws ContractError when ident is neither defined nor used there.
std::set<std::size_t> intra_slice(const FunctionRecord& fn, const std::string& ident, std::size_t statement,
                                  Direction direction, bool include_control_deps = true);

/// Enclosing guards of a statement, innermost first.
std::vector<std::size_t> guard_chain(const FunctionRecord& fn, std::size_t statement);

/// Adds the transitive control dependences of members, plus the return, break,
/// continue and goto statements directly inside each controlling guard.
void add_control_deps(const FunctionRecord& fn, const FlowGraph& flow, std::set<std::size_t>& members);

enum class CrossingKind { Seed, CallDown, ReturnUp, ParamUp, ReturnDown };
std::string_view to_string(CrossingKind k) noexcept;

struct SliceMember {
  std::string function_id;
  std::size_t statement = 0;
  int depth = 0;

  auto operator<=>(const SliceMember&) const = default;
};

/// One visit of a function while slicing; frames form the crossing tree.
struct SliceFrame {
  std::size_t id = 0;
  std::string function_id;
  CrossingKind via = CrossingKind::Seed;
  std::optional<std::size_t> parent;
  // CallDown/ReturnDown: call statement in the parent frame.
  // ParamUp/ReturnUp: call statement in this frame.
  std::size_t site = 0;
  std::vector<std::size_t> params;  // CallDown: bound parameter; ParamUp: parent's needed parameters
  int depth = 0;
  bool down = false;  // entered from a caller; may not climb back out
  std::set<std::size_t> statements;
  std::set<std::string> initial_vars;
};

struct PrunedCrossing {
  CrossingKind kind = CrossingKind::Seed;
  std::string from_function;
  std::string to_function;
  std::size_t site = 0;
  int depth = 0;
};

struct Slice {
  Seed seed;
  Direction direction = Direction::Forward;
  std::vector<SliceMember> members;  // sorted by (function, statement), minimum depth each
  std::vector<SliceFrame> frames;    // frames[0] is the seed frame
  std::vector<PrunedCrossing> pruned;
  std::vector<std::string> diagnostics;

  int depth_of(const std::string& function_id, std::size_t statement) const;  // -1 when absent
};

Direction direction_for(SeedKind kind) noexcept;

/// Throws LookupError/ContractError when the seed does not fit the index.
Slice interprocedural_slice(const CodeIndex& index, const Seed& seed, const SlicerConfig& cfg);

struct OriginEntry {
  int rendered_line = 0;
  std::string file;
  int line = 0;

  bool operator==(const OriginEntry&) const = default;
};

struct DetectionContext {
  std::string rendered;
  std::vector<OriginEntry> origin_map;
  int seed_marker = 0;  // rendered line of the seed statement
  bool truncated = false;
  bool fallback = false;  // rendered as comments because the inlined body failed to re-parse
  std::vector<std::string> diagnostics;

  bool has_origin(const std::string& file, int line) const;
};

nlohmann::json to_json(const DetectionContext& ctx);

/// Renders the slice as one function `void slice_context(void)`.
/// Throws ContractError for an empty slice.
DetectionContext inline_slices(const CodeIndex& index, const Slice& slice, const SlicerConfig& cfg);

}  // namespace apaudit
