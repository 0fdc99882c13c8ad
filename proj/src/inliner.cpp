#include <algorithm>
#include <cctype>
#include <map>

#include "apaudit/c_parser.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/slicer.hpp"

namespace apaudit {

bool DetectionContext::has_origin(const std::string& file, int line) const {
  return std::any_of(origin_map.begin(), origin_map.end(),
                     [&](const OriginEntry& e) { return e.file == file && e.line == line; });
}

nlohmann::json to_json(const DetectionContext& ctx) {
  nlohmann::json origins = nlohmann::json::array();
  for (const auto& e : ctx.origin_map) {
    origins.push_back({{"rendered_line", e.rendered_line}, {"file", e.file}, {"line", e.line}});
  }
  return {{"rendered", ctx.rendered},
          {"origin_map", origins},
          {"seed_marker", ctx.seed_marker},
          {"truncated", ctx.truncated},
          {"fallback", ctx.fallback},
          {"diagnostics", ctx.diagnostics}};
}

namespace {

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string escape_comment(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '*' && i + 1 < s.size() && s[i + 1] == '/') {
      out += "* /";
      ++i;
    } else if (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      out += "/ *";
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

/// Prefixes local variables in arbitrary expression text. Skips literals,
/// member names after '.'/'->' and called names.
std::string rename_free_text(std::string_view text, const std::set<std::string>& locals, const std::string& prefix) {
  if (prefix.empty()) return std::string(text);
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '"' || c == '\'') {
      const std::size_t start = i++;
      while (i < text.size() && text[i] != c) i += text[i] == '\\' ? 2 : 1;
      i = std::min(i + 1, text.size());
      out.append(text.substr(start, i - start));
      continue;
    }
    if (is_ident_char(c) && std::isdigit(static_cast<unsigned char>(c)) == 0) {
      const std::size_t start = i;
      while (i < text.size() && is_ident_char(text[i])) ++i;
      const std::string word(text.substr(start, i - start));
      std::size_t before = start;
      while (before > 0 && text[before - 1] == ' ') --before;
      const bool member = (before >= 1 && text[before - 1] == '.') ||
                          (before >= 2 && text[before - 2] == '-' && text[before - 1] == '>');
      std::size_t after = i;
      while (after < text.size() && text[after] == ' ') ++after;
      const bool called = after < text.size() && text[after] == '(';
      if (!member && !called && locals.count(word) != 0) out += prefix;
      out += word;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
      while (i < text.size() && is_ident_char(text[i])) out.push_back(text[i++]);
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

/// Prefixes the recorded variable identifiers of a statement.
std::string rename_statement(const StatementNode& st, const std::set<std::string>& locals, const std::string& prefix) {
  if (prefix.empty()) return st.text;
  std::string out;
  std::size_t pos = 0;
  for (const auto& span : st.ident_spans) {
    if (span.offset < pos || span.offset + span.length > st.text.size()) continue;
    out.append(st.text, pos, span.offset - pos);
    const std::string word = st.text.substr(span.offset, span.length);
    if (locals.count(word) != 0) out += prefix;
    out += word;
    pos = span.offset + span.length;
  }
  out.append(st.text, pos, std::string::npos);
  return out;
}

struct Line {
  std::string text;
  int indent = 0;
  std::optional<std::pair<std::string, int>> origin;
  bool seed = false;
};

struct Selection {
  std::set<std::size_t> frames;                               // included frame ids
  std::optional<std::set<std::size_t>> seed_frame_statements;  // narrowed when truncating inside the seed frame
};

class Renderer {
  struct Open {
    std::size_t guard;
    bool else_branch;
  };

 public:
  Renderer(const CodeIndex& index, const Slice& slice, const Selection& sel)
      : index_(index), slice_(slice), sel_(sel) {
    for (const auto& f : slice.frames) {
      if (sel.frames.count(f.id) == 0 || !f.parent) continue;
      children_[*f.parent].push_back(f.id);
    }
  }

  std::vector<Line> render() {
    lines_.push_back({"void slice_context(void) {", 0, std::nullopt, false});
    render_frame(0, 1);
    lines_.push_back({"}", 0, std::nullopt, false});
    return std::move(lines_);
  }

 private:
  const SliceFrame& frame(std::size_t id) const { return slice_.frames[id]; }

  std::vector<std::size_t> children(std::size_t id, std::initializer_list<CrossingKind> kinds) const {
    std::vector<std::size_t> out;
    auto it = children_.find(id);
    if (it == children_.end()) return out;
    for (std::size_t c : it->second) {
      if (std::find(kinds.begin(), kinds.end(), frame(c).via) != kinds.end()) out.push_back(c);
    }
    return out;
  }

  std::string prefix(std::size_t id) const {
    const SliceFrame& f = frame(id);
    const bool callee = f.via == CrossingKind::CallDown || f.via == CrossingKind::ReturnDown;
    if (!callee && children(id, {CrossingKind::ParamUp, CrossingKind::ReturnUp}).empty()) return {};
    return index_.function(f.function_id).name + "_" + std::to_string(id) + "_";
  }

  std::string location(const FunctionRecord& fn, std::size_t sid) const {
    return fn.file + ":" + std::to_string(fn.statements[sid].span.start);
  }

  void emit(std::string text, int indent, const FunctionRecord* fn = nullptr, std::size_t sid = 0, bool seed = false) {
    Line l{std::move(text), indent, std::nullopt, seed};
    if (fn != nullptr) l.origin = std::make_pair(fn->file, fn->statements[sid].span.start);
    lines_.push_back(std::move(l));
  }

  /// `<callee prefix><param> = <argument>;` for every argument of calls to callee at the site.
  void emit_bindings(const FunctionRecord& caller, const std::string& caller_prefix, std::size_t site,
                     const FunctionRecord& callee, const std::string& callee_prefix,
                     const std::vector<std::size_t>* only, int indent) {
    for (const auto& call : caller.statements[site].calls) {
      if (call.indirect || call.callee != callee.name) continue;
      for (std::size_t k = 0; k < call.args.size() && k < callee.params.size(); ++k) {
        if (only != nullptr && std::find(only->begin(), only->end(), k) == only->end()) continue;
        emit(callee_prefix + callee.params[k].name + " = " +
                 rename_free_text(call.args[k], caller.locals, caller_prefix) + ";",
             indent);
      }
    }
  }

  std::set<std::size_t> statements_of(std::size_t id) const {
    if (id == 0 && sel_.seed_frame_statements) return *sel_.seed_frame_statements;
    return frame(id).statements;
  }

  void render_frame(std::size_t id, int indent) {
    const SliceFrame& f = frame(id);
    const FunctionRecord& fn = index_.function(f.function_id);
    const std::string pre = prefix(id);

    for (std::size_t up : children(id, {CrossingKind::ParamUp})) {
      const SliceFrame& uf = frame(up);
      const FunctionRecord& caller = index_.function(uf.function_id);
      emit("{ /* caller " + caller.name + " at " + location(caller, uf.site) + " */", indent);
      callee_of_[up] = {&fn, pre};
      render_frame(up, indent + 1);
      emit("}", indent);
    }

    const std::set<std::size_t> stmts = statements_of(id);
    std::vector<Open> stack;
    std::optional<std::size_t> last;

    auto close_top = [&](int base) {
      const Open o = stack.back();
      stack.pop_back();
      const StatementNode& g = fn.statements[o.guard];
      const int ind = base + static_cast<int>(stack.size());
      if (g.guard_form == GuardForm::DoWhile) {
        emit("} " + rename_statement(g, fn.locals, pre), ind, &fn, o.guard);
      } else {
        emit("}", ind);
      }
    };

    for (std::size_t sid : stmts) {
      const StatementNode& st = fn.statements[sid];
      // enclosing guards, outermost first, each with the branch its child sits in
      std::vector<Open> chain;
      {
        std::vector<std::size_t> gs = guard_chain(fn, sid);
        std::reverse(gs.begin(), gs.end());
        for (std::size_t i = 0; i < gs.size(); ++i) {
          if (stmts.count(gs[i]) == 0) continue;
          const bool in_else = (i + 1 < gs.size() ? fn.statements[gs[i + 1]].in_else : st.in_else);
          chain.push_back({gs[i], in_else});
        }
      }
      const bool is_do = st.guard_form == GuardForm::DoWhile;
      const bool seed = id == 0 && sid == slice_.seed.statement;
      if (is_do && !stack.empty() && stack.back().guard == sid) {
        close_top(indent);
        lines_.back().seed = seed;
        last = sid;
        continue;
      }
      // close guards that do not enclose this statement
      std::size_t keep = 0;
      while (keep < stack.size() && keep < chain.size() && stack[keep].guard == chain[keep].guard) ++keep;
      while (stack.size() > keep) close_top(indent);
      if (keep > 0 && stack.back().else_branch != chain[keep - 1].else_branch) {
        // same guard, switching from the then-arm to the else-arm
        if (chain[keep - 1].else_branch) emit("} else {", indent + static_cast<int>(keep) - 1);
        stack.back().else_branch = chain[keep - 1].else_branch;
      }
      if (last && sid > *last + 1) emit("/* ... omitted ... */", indent + static_cast<int>(stack.size()));
      for (std::size_t i = keep; i < chain.size(); ++i) open_guard(fn, pre, chain[i], indent, stack);

      const int ind = indent + static_cast<int>(stack.size());
      render_down_children(id, fn, pre, sid, ind);
      if (sid == 0) {
        emit("/* entry: " + escape_comment(st.text) + " */", ind, &fn, sid, seed);
      } else if (st.is_guard()) {
        if (is_do) {
          emit("do {", ind);
          emit("} " + rename_statement(st, fn.locals, pre), ind, &fn, sid, seed);
        } else {
          open_guard(fn, pre, {sid, false}, indent, stack);
          lines_.back().seed = seed;
        }
      } else if (f.via == CrossingKind::ParamUp && sid == f.site) {
        // the call site of the frame below: bind its parameters, then show the call itself as a comment
        const auto& [callee, callee_pre] = callee_of_.at(id);
        emit_bindings(fn, pre, sid, *callee, callee_pre, &f.params, ind);
        emit("/* call: " + escape_comment(statement_text(st, fn, pre)) + " */", ind, &fn, sid, seed);
      } else {
        emit(statement_text(st, fn, pre), ind, &fn, sid, seed);
      }
      last = sid;
    }
    while (!stack.empty()) close_top(indent);

    for (std::size_t up : children(id, {CrossingKind::ReturnUp})) {
      const SliceFrame& uf = frame(up);
      const FunctionRecord& caller = index_.function(uf.function_id);
      emit("{ /* caller " + caller.name + " receives the return value at " + location(caller, uf.site) + " */",
           indent);
      render_frame(up, indent + 1);
      emit("}", indent);
    }
  }

  void open_guard(const FunctionRecord& fn, const std::string& pre, const Open& o, int base,
                  std::vector<Open>& stack) {
    const StatementNode& g = fn.statements[o.guard];
    const int ind = base + static_cast<int>(stack.size());
    if (g.guard_form == GuardForm::DoWhile) {
      emit("do {", ind);
    } else if (g.has_error) {
      emit("{ /* unparsed guard: " + escape_comment(g.text) + " */", ind, &fn, o.guard);
    } else {
      emit(rename_statement(g, fn.locals, pre) + " {", ind, &fn, o.guard);
      if (o.else_branch) emit("} else {", ind);
    }
    stack.push_back(o);
  }

  void render_down_children(std::size_t id, const FunctionRecord& fn, const std::string& pre, std::size_t sid,
                            int indent) {
    for (std::size_t d : children(id, {CrossingKind::CallDown, CrossingKind::ReturnDown})) {
      const SliceFrame& df = frame(d);
      if (df.site != sid) continue;
      const FunctionRecord& callee = index_.function(df.function_id);
      emit("{ /* inlined " + callee.name + " called at " + location(fn, sid) + " */", indent);
      emit_bindings(fn, pre, sid, callee, prefix(d), nullptr, indent + 1);
      render_frame(d, indent + 1);
      emit("}", indent);
    }
  }

  std::string statement_text(const StatementNode& st, const FunctionRecord& fn, const std::string& pre) const {
    if (st.has_error) return "/* unparsed: " + escape_comment(st.text) + " */";
    std::string text = rename_statement(st, fn.locals, pre);
    if (st.kind == StatementKind::Return && !pre.empty() && text.starts_with("return")) {
      std::string expr = text.substr(6);
      while (!expr.empty() && expr.front() == ' ') expr.erase(expr.begin());
      if (expr.empty() || expr == ";") return "/* " + escape_comment(text) + " */";
      return pre + "ret = " + expr;
    }
    return text;
  }

  const CodeIndex& index_;
  const Slice& slice_;
  const Selection& sel_;
  std::map<std::size_t, std::vector<std::size_t>> children_;
  std::map<std::size_t, std::pair<const FunctionRecord*, std::string>> callee_of_;  // ParamUp frame -> frame below
  std::vector<Line> lines_;
};

DetectionContext assemble(const std::vector<Line>& lines) {
  DetectionContext ctx;
  int n = 0;
  for (const auto& l : lines) {
    ++n;
    std::string text(static_cast<std::size_t>(l.indent) * 2, ' ');
    text += l.text;
    if (l.origin) {
      text += " /* origin: " + l.origin->first + ":" + std::to_string(l.origin->second) + " */";
      ctx.origin_map.push_back({n, l.origin->first, l.origin->second});
    }
    if (l.seed) {
      text += " /* seed */";
      ctx.seed_marker = n;
    }
    ctx.rendered += text;
    ctx.rendered += '\n';
  }
  return ctx;
}

/// Every original line as a comment; used when the inlined body does not parse.
std::vector<Line> commented(const std::vector<Line>& lines) {
  std::vector<Line> out;
  out.push_back({"void slice_context(void) {", 0, std::nullopt, false});
  for (const auto& l : lines) {
    if (!l.origin) continue;
    out.push_back({"/* " + escape_comment(l.text) + " */", 1, l.origin, l.seed});
  }
  out.push_back({"}", 0, std::nullopt, false});
  return out;
}

DetectionContext render_selection(const CodeIndex& index, const Slice& slice, const Selection& sel) {
  const std::vector<Line> lines = Renderer(index, slice, sel).render();
  DetectionContext ctx = assemble(lines);
  const ReparseResult check = check_single_function(ctx.rendered);
  if (!check.ok) {
    const std::string why = check.message;
    ctx = assemble(commented(lines));
    ctx.fallback = true;
    ctx.diagnostics.push_back("inlined render did not re-parse (" + why + "); statements rendered as comments");
  }
  return ctx;
}

}  // namespace

DetectionContext inline_slices(const CodeIndex& index, const Slice& slice, const SlicerConfig& cfg) {
  cfg.validate();
  if (slice.frames.empty() || slice.members.empty()) throw ContractError("cannot inline an empty slice");
  Selection sel;
  int max_depth = 0;
  for (const auto& f : slice.frames) {
    sel.frames.insert(f.id);
    max_depth = std::max(max_depth, f.depth);
  }
  DetectionContext ctx = render_selection(index, slice, sel);
  bool truncated = false;
  // deepest frames go first
  while (ctx.rendered.size() > cfg.context_char_budget && max_depth > 0) {
    for (const auto& f : slice.frames) {
      if (f.depth == max_depth) sel.frames.erase(f.id);
    }
    --max_depth;
    truncated = true;
    ctx = render_selection(index, slice, sel);
  }
  if (ctx.rendered.size() > cfg.context_char_budget) {
    // then the statements farthest from the seed inside the seed frame
    const FunctionRecord& fn = index.function(slice.frames[0].function_id);
    const std::size_t seed = slice.seed.statement;
    std::vector<std::size_t> data;
    for (std::size_t s : slice.frames[0].statements) {
      if (s != seed && !fn.statements[s].is_guard()) data.push_back(s);
    }
    std::stable_sort(data.begin(), data.end(), [&](std::size_t a, std::size_t b) {
      const auto da = a > seed ? a - seed : seed - a;
      const auto db = b > seed ? b - seed : seed - b;
      return da > db;
    });
    std::set<std::size_t> kept(data.begin(), data.end());
    kept.insert(seed);
    for (std::size_t victim : data) {
      if (ctx.rendered.size() <= cfg.context_char_budget) break;
      kept.erase(victim);
      std::set<std::size_t> with_guards = kept;
      for (std::size_t s : kept) {
        for (std::size_t g : guard_chain(fn, s)) {
          if (slice.frames[0].statements.count(g) != 0) with_guards.insert(g);
        }
      }
      if (fn.statements[seed].is_guard()) with_guards.insert(seed);
      sel.seed_frame_statements = with_guards;
      truncated = true;
      ctx = render_selection(index, slice, sel);
    }
    if (ctx.rendered.size() > cfg.context_char_budget) {
      ctx.diagnostics.push_back("context exceeds the budget even with only the seed statement");
    }
  }
  ctx.truncated = truncated;
  return ctx;
}

}  // namespace apaudit
