#include "apaudit/code_index.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "apaudit/c_parser.hpp"
#include "apaudit/digest.hpp"
#include "apaudit/errors.hpp"

namespace apaudit {

std::set<std::string> StatementNode::strong_defs() const {
  std::set<std::string> out;
  std::set_difference(defs.begin(), defs.end(), weak_defs.begin(), weak_defs.end(),
                      std::inserter(out, out.end()));
  return out;
}

const StatementNode& FunctionRecord::statement(std::size_t sid) const {
  if (sid >= statements.size()) {
    throw LookupError("function " + id + " has no statement " + std::to_string(sid));
  }
  return statements[sid];
}

std::string_view to_string(StatementKind kind) noexcept {
  switch (kind) {
    case StatementKind::Decl: return "decl";
    case StatementKind::Assign: return "assign";
    case StatementKind::Call: return "call";
    case StatementKind::Return: return "return";
    case StatementKind::BranchGuard: return "branch_guard";
    case StatementKind::LoopGuard: return "loop_guard";
    case StatementKind::Other: return "other";
  }
  return "other";
}

std::string_view to_string(Language lang) noexcept { return lang == Language::C ? "C" : "CPP"; }

namespace {

std::vector<std::string> split_lines(const std::string& content) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      lines.push_back(content.substr(pos));
      break;
    }
    std::string line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

CodeIndex CodeIndex::build(std::vector<ParsedFile> parsed, std::vector<Diagnostic> diagnostics) {
  std::sort(parsed.begin(), parsed.end(),
            [](const ParsedFile& a, const ParsedFile& b) { return a.file.path < b.file.path; });
  CodeIndex idx;
  idx.diagnostics_ = std::move(diagnostics);
  std::set<std::string> seen_paths;
  for (auto& pf : parsed) {
    for (auto& d : pf.diagnostics) idx.diagnostics_.push_back(std::move(d));
    if (!pf.ok) continue;
    if (!seen_paths.insert(pf.file.path).second) {
      idx.diagnostics_.push_back({pf.file.path, "duplicate path; later copy ignored"});
      continue;
    }
    idx.lines_.emplace(pf.file.path, split_lines(pf.content));
    idx.files_.push_back(pf.file);
    for (auto& fn : pf.functions) {
      if (idx.by_id_.count(fn.id) != 0) {
        idx.diagnostics_.push_back({pf.file.path, "duplicate function id " + fn.id});
        continue;
      }
      idx.by_id_.emplace(fn.id, idx.functions_.size());
      idx.by_name_.emplace(fn.name, idx.functions_.size());
      idx.functions_.push_back(std::move(fn));
    }
  }
  for (const auto& fn : idx.functions_) idx.graph_.nodes.insert(fn.id);
  for (const auto& fn : idx.functions_) {
    for (const auto& st : fn.statements) {
      for (const auto& call : st.calls) {
        bool resolved = false;
        if (!call.indirect) {
          auto [lo, hi] = idx.by_name_.equal_range(call.callee);
          for (auto it = lo; it != hi; ++it) {
            const std::string& callee = idx.functions_[it->second].id;
            idx.graph_.edges.insert({fn.id, st.id, callee});
            resolved = true;
          }
        }
        if (!resolved) idx.graph_.unresolved.insert({fn.id, st.id, call.callee});
      }
    }
  }
  for (const auto& e : idx.graph_.edges) {
    auto& v = idx.callers_[e.callee];
    const CallerEntry entry{e.caller, e.site};
    if (std::find(v.begin(), v.end(), entry) == v.end()) v.push_back(entry);
  }
  for (auto& [_, v] : idx.callers_) std::sort(v.begin(), v.end());
  std::sort(idx.diagnostics_.begin(), idx.diagnostics_.end());
  return idx;
}

const FunctionRecord& CodeIndex::function(std::string_view id) const {
  const FunctionRecord* fn = find_function(id);
  if (fn == nullptr) throw LookupError("unknown function id: " + std::string(id));
  return *fn;
}

const FunctionRecord* CodeIndex::find_function(std::string_view id) const noexcept {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &functions_[it->second];
}

std::vector<const FunctionRecord*> CodeIndex::functions_named(std::string_view name) const {
  std::vector<const FunctionRecord*> out;
  auto [lo, hi] = by_name_.equal_range(name);
  for (auto it = lo; it != hi; ++it) out.push_back(&functions_[it->second]);
  return out;
}

const FunctionRecord* CodeIndex::function_at(std::string_view path, int line) const noexcept {
  for (const auto& fn : functions_) {
    if (fn.file == path && fn.body_span.contains(line)) return &fn;
  }
  return nullptr;
}

const SourceFile* CodeIndex::file(std::string_view path) const noexcept {
  auto it = std::lower_bound(files_.begin(), files_.end(), path,
                             [](const SourceFile& f, std::string_view p) { return f.path < p; });
  return it != files_.end() && it->path == path ? &*it : nullptr;
}

bool CodeIndex::has_line(std::string_view path, int line) const noexcept {
  const SourceFile* f = file(path);
  return f != nullptr && line >= 1 && static_cast<std::size_t>(line) <= f->line_count;
}

std::string_view CodeIndex::line_text(std::string_view path, int line) const {
  auto it = lines_.find(path);
  if (it == lines_.end() || line < 1 || static_cast<std::size_t>(line) > it->second.size()) {
    throw LookupError("no line " + std::to_string(line) + " in " + std::string(path));
  }
  return it->second[static_cast<std::size_t>(line) - 1];
}

std::vector<CalleeEntry> CodeIndex::callees_of(std::string_view id) const {
  const FunctionRecord& fn = function(id);
  std::vector<CalleeEntry> out;
  for (const auto& st : fn.statements) {
    for (const auto& call : st.calls) {
      bool resolved = false;
      if (!call.indirect) {
        for (const FunctionRecord* callee : functions_named(call.callee)) {
          out.push_back({st.id, callee->id, {}});
          resolved = true;
        }
      }
      if (!resolved) out.push_back({st.id, {}, call.callee});
    }
  }
  return out;
}

std::vector<CallerEntry> CodeIndex::callers_of(std::string_view id) const {
  function(id);  // validates the id
  auto it = callers_.find(id);
  return it == callers_.end() ? std::vector<CallerEntry>{} : it->second;
}

std::string CodeIndex::digest() const {
  std::string buf;
  for (const auto& f : files_) {
    buf += f.path;
    buf.push_back('\0');
    buf += f.content_hash;
    buf.push_back('\n');
  }
  return sha256_hex(buf);
}

nlohmann::json CodeIndex::to_json() const {
  using nlohmann::json;
  json files = json::array();
  for (const auto& f : files_) {
    files.push_back({{"path", f.path},
                     {"content_hash", f.content_hash},
                     {"language", to_string(f.language)},
                     {"line_count", f.line_count}});
  }
  json fns = json::array();
  for (const auto& fn : functions_) {
    json params = json::array();
    for (const auto& p : fn.params) params.push_back({{"name", p.name}, {"type", p.type}});
    json stmts = json::array();
    for (const auto& st : fn.statements) {
      json s = {{"id", st.id},
                {"kind", to_string(st.kind)},
                {"span", {st.span.start, st.span.end}},
                {"defs", st.defs},
                {"uses", st.uses},
                {"callee_names", st.callee_names},
                {"text", st.text}};
      if (!st.weak_defs.empty()) s["weak_defs"] = st.weak_defs;
      if (st.guard) s["guard"] = *st.guard;
      if (st.has_error) s["has_error"] = true;
      if (st.jump != JumpKind::None) {
        static constexpr const char* kJumps[] = {"none", "break", "continue", "goto"};
        s["jump"] = kJumps[static_cast<int>(st.jump)];
        if (!st.jump_label.empty()) s["jump_label"] = st.jump_label;
      }
      if (!st.labels.empty()) s["labels"] = st.labels;
      stmts.push_back(std::move(s));
    }
    fns.push_back({{"id", fn.id},
                   {"name", fn.name},
                   {"file", fn.file},
                   {"return_type", fn.return_type},
                   {"params", params},
                   {"body_span", {fn.body_span.start, fn.body_span.end}},
                   {"statements", stmts}});
  }
  json edges = json::array();
  for (const auto& e : graph_.edges) edges.push_back({{"caller", e.caller}, {"site", e.site}, {"callee", e.callee}});
  json unresolved = json::array();
  for (const auto& u : graph_.unresolved) {
    unresolved.push_back({{"caller", u.caller}, {"site", u.site}, {"name", u.name}});
  }
  json diags = json::array();
  for (const auto& d : diagnostics_) diags.push_back({{"path", d.path}, {"message", d.message}});
  return {{"files", files},
          {"functions", fns},
          {"edges", edges},
          {"unresolved", unresolved},
          {"diagnostics", diags}};
}

bool CodeIndex::structurally_equal(const CodeIndex& other) const {
  return files_ == other.files_ && functions_ == other.functions_ && graph_ == other.graph_ &&
         diagnostics_ == other.diagnostics_;
}

std::vector<std::string> default_include_globs() {
  return {"*.c", "*.h", "*.cc", "*.cpp", "*.cxx", "*.hh", "*.hpp", "*.hxx"};
}

bool glob_match(std::string_view pattern, std::string_view text) {
  const std::string t(text);
  const auto slash = t.rfind('/');
  const std::string base = slash == std::string::npos ? t : t.substr(slash + 1);
  std::size_t pos = 0;
  while (pos <= pattern.size()) {
    std::size_t bar = pattern.find('|', pos);
    if (bar == std::string_view::npos) bar = pattern.size();
    const std::string alt(pattern.substr(pos, bar - pos));
    if (!alt.empty()) {
      if (fnmatch(alt.c_str(), t.c_str(), 0) == 0) return true;
      if (fnmatch(alt.c_str(), base.c_str(), 0) == 0) return true;
    }
    pos = bar + 1;
  }
  return false;
}

namespace {

namespace fs = std::filesystem;

struct Candidate {
  std::string rel;
  fs::path abs;
};

std::vector<Candidate> list_candidates(const fs::path& root, const IndexOptions& opts,
                                       std::vector<Diagnostic>& diags) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw ConfigError("repository root is not a readable directory: " + root.string());
  }
  const auto includes = opts.include_globs.empty() ? default_include_globs() : opts.include_globs;
  std::vector<Candidate> out;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw ConfigError("cannot read repository root " + root.string() + ": " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) {
      diags.push_back({it->path().string(), "directory walk error: " + ec.message()});
      ec.clear();
      continue;
    }
    if (!it->is_regular_file(ec)) continue;
    std::string rel = it->path().lexically_relative(root).generic_string();
    const bool inc = std::any_of(includes.begin(), includes.end(),
                                 [&](const std::string& g) { return glob_match(g, rel); });
    if (!inc) continue;
    const bool exc = std::any_of(opts.exclude_globs.begin(), opts.exclude_globs.end(),
                                 [&](const std::string& g) { return glob_match(g, rel); });
    if (exc) continue;
    out.push_back({std::move(rel), it->path()});
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.rel < b.rel; });
  return out;
}

ParsedFile load_and_parse(const Candidate& c, const IndexOptions& opts) {
  ParsedFile skipped;
  skipped.file.path = c.rel;
  skipped.ok = false;
  std::error_code ec;
  const auto size = fs::file_size(c.abs, ec);
  if (ec) {
    skipped.diagnostics.push_back({c.rel, "unreadable: " + ec.message()});
    return skipped;
  }
  if (size > opts.max_file_bytes) {
    skipped.diagnostics.push_back({c.rel, "file exceeds size limit; skipped"});
    return skipped;
  }
  std::ifstream in(c.abs, std::ios::binary);
  if (!in) {
    skipped.diagnostics.push_back({c.rel, "unreadable"});
    return skipped;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_source(c.rel, buf.str());
}

}  // namespace

CodeIndex index_repository(const fs::path& root, const IndexOptions& options) {
  std::vector<Diagnostic> diags;
  const auto candidates = list_candidates(root, options, diags);
  std::vector<ParsedFile> parsed(candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    parsed[k] = load_and_parse(candidates[k], options);
  }
  return CodeIndex::build(std::move(parsed), std::move(diags));
}

CodeIndex index_repository_serial(const fs::path& root, const IndexOptions& options) {
  std::vector<Diagnostic> diags;
  const auto candidates = list_candidates(root, options, diags);
  std::vector<ParsedFile> parsed;
  parsed.reserve(candidates.size());
  for (const auto& c : candidates) parsed.push_back(load_and_parse(c, options));
  return CodeIndex::build(std::move(parsed), std::move(diags));
}

CodeIndex index_sources(const std::vector<std::pair<std::string, std::string>>& sources) {
  std::vector<ParsedFile> parsed;
  parsed.reserve(sources.size());
  for (const auto& [path, content] : sources) parsed.push_back(parse_source(path, content));
  return CodeIndex::build(std::move(parsed));
}

}  // namespace apaudit
