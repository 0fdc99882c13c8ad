#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace apaudit {

enum class Language { C, Cpp };

/// 1-based inclusive line range.
struct LineSpan {
  int start = 0;
  int end = 0;

  bool contains(int line) const noexcept { return line >= start && line <= end; }
  bool contains(const LineSpan& other) const noexcept {
    return other.start >= start && other.end <= end;
  }
  auto operator<=>(const LineSpan&) const = default;
};

struct SourceFile {
  std::string path;  // repo-relative, '/' separated
  std::string content_hash;
  Language language = Language::C;
  std::size_t line_count = 0;

  auto operator<=>(const SourceFile&) const = default;
};

enum class StatementKind { Decl, Assign, Call, Return, BranchGuard, LoopGuard, Other };

/// Syntactic form of a guard statement; drives rendering of the inlined context.
enum class GuardForm { None, If, Switch, While, For, DoWhile };

enum class JumpKind { None, Break, Continue, Goto };

struct CallSite {
  std::string callee;  // identifier, or the full callee expression for indirect calls
  bool indirect = false;
  std::vector<std::string> args;                     // argument source text
  std::vector<std::vector<std::string>> arg_idents;  // variable identifiers per argument
  std::optional<std::string> result_target;          // variable receiving the result

  auto operator<=>(const CallSite&) const = default;
};

struct BinaryOp {
  std::string op;  // compound assignments are recorded with their arithmetic operator
  std::string lhs_text;
  std::string rhs_text;
  std::vector<std::string> lhs_idents;
  std::vector<std::string> rhs_idents;

  auto operator<=>(const BinaryOp&) const = default;
};

struct IndexAccess {
  std::string base_text;
  std::vector<std::string> base_idents;
  std::string index_text;
  std::vector<std::string> index_idents;

  auto operator<=>(const IndexAccess&) const = default;
};

/// Offset/length of a variable identifier inside StatementNode::text.
struct IdentSpan {
  std::uint32_t offset = 0;
  std::uint32_t length = 0;

  auto operator<=>(const IdentSpan&) const = default;
};

struct StatementNode {
  std::size_t id = 0;
  StatementKind kind = StatementKind::Other;
  GuardForm guard_form = GuardForm::None;
  LineSpan span;
  std::set<std::string> defs;
  std::set<std::string> weak_defs;  // subset of defs written through a pointer, field, index or '&'
  std::set<std::string> uses;
  std::set<std::string> callee_names;
  std::vector<CallSite> calls;
  std::vector<BinaryOp> binary_ops;
  std::vector<IndexAccess> index_accesses;
  std::vector<std::string> declared;
  std::optional<std::pair<std::string, std::string>> copy;  // direct `lhs = rhs` identifier copy
  std::optional<std::size_t> guard;  // nearest enclosing branch/loop guard
  bool in_else = false;
  JumpKind jump = JumpKind::None;
  std::string jump_label;           // goto target
  std::vector<std::string> labels;  // labels that name this statement
  bool has_error = false;
  std::string text;  // single line, comments stripped; guards hold only their header
  std::vector<IdentSpan> ident_spans;

  std::set<std::string> strong_defs() const;
  bool is_guard() const noexcept {
    return kind == StatementKind::BranchGuard || kind == StatementKind::LoopGuard;
  }
  bool operator==(const StatementNode&) const = default;
};

struct Param {
  std::string name;
  std::string type;

  auto operator<=>(const Param&) const = default;
};

/// statements[0] is a synthetic parameter-entry statement (kind decl) that
/// defines every parameter; it spans the function's first line.
struct FunctionRecord {
  std::string id;  // "<path>:<name>:<start line>"
  std::string name;
  std::string file;
  std::string return_type;
  std::vector<Param> params;
  LineSpan body_span;
  std::vector<StatementNode> statements;
  std::set<std::string> locals;
  std::set<std::string> pointer_vars;

  const StatementNode& statement(std::size_t sid) const;
  bool operator==(const FunctionRecord&) const = default;
};

struct CallEdge {
  std::string caller;
  std::size_t site = 0;
  std::string callee;

  auto operator<=>(const CallEdge&) const = default;
};

struct UnresolvedCall {
  std::string caller;
  std::size_t site = 0;
  std::string name;

  auto operator<=>(const UnresolvedCall&) const = default;
};

struct CallGraph {
  std::set<std::string> nodes;
  std::set<CallEdge> edges;
  std::set<UnresolvedCall> unresolved;

  bool operator==(const CallGraph&) const = default;
};

struct CalleeEntry {
  std::size_t site = 0;
  std::string callee_id;      // empty when unresolved
  std::string external_name;  // set when unresolved

  bool resolved() const noexcept { return !callee_id.empty(); }
  auto operator<=>(const CalleeEntry&) const = default;
};

struct CallerEntry {
  std::string caller_id;
  std::size_t site = 0;

  auto operator<=>(const CallerEntry&) const = default;
};

struct Diagnostic {
  std::string path;
  std::string message;

  auto operator<=>(const Diagnostic&) const = default;
};

/// Output of parsing one file.
struct ParsedFile {
  SourceFile file;
  std::string content;
  std::vector<FunctionRecord> functions;
  std::vector<Diagnostic> diagnostics;
  bool ok = true;
};

/// Immutable view of one repository snapshot.
class CodeIndex {
 public:
  CodeIndex() = default;

  /// Links parsed files into an index: sorts by path, resolves calls by name.
  static CodeIndex build(std::vector<ParsedFile> parsed, std::vector<Diagnostic> diagnostics = {});

  const std::vector<SourceFile>& files() const noexcept { return files_; }
  const std::vector<FunctionRecord>& functions() const noexcept { return functions_; }
  const CallGraph& call_graph() const noexcept { return graph_; }
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

  const FunctionRecord& function(std::string_view id) const;
  const FunctionRecord* find_function(std::string_view id) const noexcept;
  std::vector<const FunctionRecord*> functions_named(std::string_view name) const;
  const FunctionRecord* function_at(std::string_view path, int line) const noexcept;
  const SourceFile* file(std::string_view path) const noexcept;

  bool has_line(std::string_view path, int line) const noexcept;
  std::string_view line_text(std::string_view path, int line) const;

  /// Resolved and unresolved callees of fn in statement order.
  std::vector<CalleeEntry> callees_of(std::string_view fn) const;
  std::vector<CallerEntry> callers_of(std::string_view fn) const;

  /// Digest over (path, content hash) of every file.
  std::string digest() const;

  nlohmann::json to_json() const;

  bool structurally_equal(const CodeIndex& other) const;

 private:
  std::vector<SourceFile> files_;
  std::map<std::string, std::vector<std::string>, std::less<>> lines_;
  std::vector<FunctionRecord> functions_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::multimap<std::string, std::size_t, std::less<>> by_name_;
  std::map<std::string, std::vector<CallerEntry>, std::less<>> callers_;
  CallGraph graph_;
  std::vector<Diagnostic> diagnostics_;
};

struct IndexOptions {
  std::vector<std::string> include_globs;  // empty -> default C/C++ extensions
  std::vector<std::string> exclude_globs;
  std::size_t max_file_bytes = 8u << 20;
};

std::vector<std::string> default_include_globs();

/// True when the glob matches the repo-relative path or its basename.
/// '|' separates alternatives.
bool glob_match(std::string_view pattern, std::string_view text);

/// Parses every matching file in parallel. Throws ConfigError if root is missing.
CodeIndex index_repository(const std::filesystem::path& root, const IndexOptions& options = {});

/// Single-threaded reference with identical output.
CodeIndex index_repository_serial(const std::filesystem::path& root, const IndexOptions& options = {});

/// Indexes in-memory (path, content) pairs; used by tests and tools.
CodeIndex index_sources(const std::vector<std::pair<std::string, std::string>>& sources);

std::string_view to_string(StatementKind kind) noexcept;
std::string_view to_string(Language lang) noexcept;

}  // namespace apaudit
