#include "apaudit/c_parser.hpp"

#include <tree_sitter/api.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <optional>

#include "apaudit/digest.hpp"

extern "C" const TSLanguage* tree_sitter_c(void);

namespace apaudit {
namespace {

struct ParserDeleter {
  void operator()(TSParser* p) const noexcept { ts_parser_delete(p); }
};
struct TreeDeleter {
  void operator()(TSTree* t) const noexcept { ts_tree_delete(t); }
};
using ParserPtr = std::unique_ptr<TSParser, ParserDeleter>;
using TreePtr = std::unique_ptr<TSTree, TreeDeleter>;

TreePtr parse_tree(std::string_view text) {
  ParserPtr parser(ts_parser_new());
  ts_parser_set_language(parser.get(), tree_sitter_c());
  return TreePtr(ts_parser_parse_string(parser.get(), nullptr, text.data(),
                                        static_cast<uint32_t>(text.size())));
}

std::string_view type_of(TSNode n) { return ts_node_type(n); }

TSNode field(TSNode n, std::string_view name) {
  return ts_node_child_by_field_name(n, name.data(), static_cast<uint32_t>(name.size()));
}

bool is_null(TSNode n) { return ts_node_is_null(n); }

int first_line(TSNode n) { return static_cast<int>(ts_node_start_point(n).row) + 1; }

int last_line(TSNode n) {
  const TSPoint s = ts_node_start_point(n);
  const TSPoint e = ts_node_end_point(n);
  if (e.column == 0 && e.row > s.row) return static_cast<int>(e.row);
  return static_cast<int>(e.row) + 1;
}

std::vector<TSNode> named_children(TSNode n) {
  std::vector<TSNode> out;
  const uint32_t count = ts_node_named_child_count(n);
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) out.push_back(ts_node_named_child(n, i));
  return out;
}

/// Children carrying the given field name (declarations may have several declarators).
std::vector<TSNode> field_children(TSNode n, std::string_view name) {
  std::vector<TSNode> out;
  const uint32_t count = ts_node_child_count(n);
  for (uint32_t i = 0; i < count; ++i) {
    const char* f = ts_node_field_name_for_child(n, i);
    if (f != nullptr && name == f) out.push_back(ts_node_child(n, i));
  }
  return out;
}

TSNode strip_parens(TSNode n) {
  while (!is_null(n) && (type_of(n) == "parenthesized_expression" || type_of(n) == "cast_expression")) {
    if (type_of(n) == "cast_expression") {
      n = field(n, "value");
    } else if (ts_node_named_child_count(n) == 1) {
      n = ts_node_named_child(n, 0);
    } else {
      break;
    }
  }
  return n;
}

bool is_atomic_leaf(std::string_view t) {
  return t == "string_literal" || t == "char_literal" || t == "system_lib_string" ||
         t == "number_literal" || t == "raw_string_literal";
}

/// Joins a subtree's tokens into one line: comments dropped, whitespace runs
/// collapsed to one space, variable identifiers recorded.
class Flattener {
 public:
  explicit Flattener(std::string_view src) : src_(src) {}

  void add(TSNode n, bool callee_position = false) {
    const std::string_view t = type_of(n);
    if (t == "comment") return;
    if (ts_node_child_count(n) == 0 || is_atomic_leaf(t)) {
      emit(n, t == "identifier" && !callee_position);
      return;
    }
    const bool is_call = t == "call_expression";
    const TSNode fn = is_call ? field(n, "function") : TSNode{};
    const uint32_t count = ts_node_child_count(n);
    for (uint32_t i = 0; i < count; ++i) {
      const TSNode c = ts_node_child(n, i);
      add(c, is_call && ts_node_eq(c, fn) && type_of(c) == "identifier");
    }
  }

  void add_literal(std::string_view s) {
    if (!out_.empty() && out_.back() != ' ' && !s.empty()) out_.push_back(' ');
    out_.append(s);
    has_last_ = false;
  }

  std::string take() { return std::move(out_); }
  std::vector<IdentSpan> take_idents() { return std::move(idents_); }

 private:
  void emit(TSNode n, bool variable) {
    const uint32_t start = ts_node_start_byte(n);
    const uint32_t end = ts_node_end_byte(n);
    if (end <= start) return;  // MISSING nodes have no bytes
    if (!out_.empty() && (!has_last_ || start > last_end_)) {
      if (out_.back() != ' ') out_.push_back(' ');
    }
    if (variable) {
      idents_.push_back({static_cast<uint32_t>(out_.size()), end - start});
    }
    out_.append(src_.substr(start, end - start));
    last_end_ = end;
    has_last_ = true;
  }

  std::string_view src_;
  std::string out_;
  std::vector<IdentSpan> idents_;
  uint32_t last_end_ = 0;
  bool has_last_ = false;
};

std::string flat_text(TSNode n, std::string_view src) {
  Flattener f(src);
  f.add(n);
  return f.take();
}

void collect_idents(TSNode n, std::vector<std::string>& out, std::string_view src) {
  const std::string_view t = type_of(n);
  if (t == "identifier") {
    std::string name(src.substr(ts_node_start_byte(n), ts_node_end_byte(n) - ts_node_start_byte(n)));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
    return;
  }
  if (t == "field_identifier" || t == "type_descriptor" || t == "comment" || is_atomic_leaf(t)) return;
  if (t == "call_expression") {
    const TSNode fn = field(n, "function");
    if (!is_null(fn) && type_of(fn) != "identifier") collect_idents(fn, out, src);
    const TSNode args = field(n, "arguments");
    if (!is_null(args)) collect_idents(args, out, src);
    return;
  }
  if (t == "sizeof_expression") {
    const TSNode v = field(n, "value");
    if (!is_null(v)) collect_idents(v, out, src);
    return;
  }
  for (const TSNode c : named_children(n)) collect_idents(c, out, src);
}

/// Identifier at the root of an lvalue chain: `p` in `p->a[i].b`, `*p`, `(p)`.
std::optional<std::string> base_ident(TSNode n, std::string_view src) {
  while (!is_null(n)) {
    const std::string_view t = type_of(n);
    if (t == "identifier") {
      return std::string(src.substr(ts_node_start_byte(n), ts_node_end_byte(n) - ts_node_start_byte(n)));
    }
    if (t == "field_expression" || t == "subscript_expression" || t == "pointer_expression") {
      n = field(n, "argument");
    } else if (t == "cast_expression") {
      n = field(n, "value");
    } else if (t == "parenthesized_expression" && ts_node_named_child_count(n) == 1) {
      n = ts_node_named_child(n, 0);
    } else {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

struct DeclaratorInfo {
  std::string name;
  int pointer_depth = 0;
  bool array = false;
  bool function = false;
  TSNode array_size{};
};

DeclaratorInfo unwrap_declarator(TSNode n, std::string_view src) {
  DeclaratorInfo info;
  while (!is_null(n)) {
    const std::string_view t = type_of(n);
    if (t == "identifier" || t == "field_identifier" || t == "type_identifier") {
      info.name = std::string(src.substr(ts_node_start_byte(n), ts_node_end_byte(n) - ts_node_start_byte(n)));
      return info;
    }
    if (t == "pointer_declarator" || t == "abstract_pointer_declarator") {
      ++info.pointer_depth;
      n = field(n, "declarator");
    } else if (t == "array_declarator" || t == "abstract_array_declarator") {
      info.array = true;
      if (is_null(info.array_size)) info.array_size = field(n, "size");
      n = field(n, "declarator");
    } else if (t == "function_declarator") {
      info.function = true;
      n = field(n, "declarator");
    } else if (t == "init_declarator") {
      n = field(n, "declarator");
    } else if (t == "parenthesized_declarator" || t == "attributed_declarator") {
      if (ts_node_named_child_count(n) == 0) break;
      n = ts_node_named_child(n, 0);
    } else {
      break;
    }
  }
  return info;
}

std::string type_with_declarator(const std::string& base, const DeclaratorInfo& d) {
  std::string t = base;
  if (d.pointer_depth > 0) {
    t.push_back(' ');
    t.append(static_cast<std::size_t>(d.pointer_depth), '*');
  }
  if (d.array) t += "[]";
  return t;
}

/// Facts gathered from the expressions of one statement.
struct Facts {
  std::set<std::string> defs;
  std::set<std::string> weak;
  std::set<std::string> uses;
  std::set<std::string> callee_names;
  std::vector<CallSite> calls;
  std::vector<BinaryOp> binary_ops;
  std::vector<IndexAccess> index_accesses;
  std::vector<std::string> declared;
  std::set<std::string> pointer_decls;
  std::optional<std::pair<std::string, std::string>> copy;
};

class ExprWalker {
 public:
  ExprWalker(std::string_view src, Facts& facts) : src_(src), f_(facts) {}

  void read(TSNode n) {
    if (is_null(n)) return;
    const std::string_view t = type_of(n);
    if (t == "identifier") {
      f_.uses.insert(text(n));
    } else if (t == "assignment_expression") {
      assignment(n);
    } else if (t == "update_expression") {
      lvalue(field(n, "argument"), true);
    } else if (t == "call_expression") {
      call(n);
    } else if (t == "binary_expression") {
      const TSNode l = field(n, "left");
      const TSNode r = field(n, "right");
      const TSNode op = field(n, "operator");
      if (!is_null(op)) record_binop(text(op), l, r);
      read(l);
      read(r);
    } else if (t == "subscript_expression") {
      record_index(n);
      read(field(n, "argument"));
      read(field(n, "index"));
    } else if (t == "field_expression") {
      read(field(n, "argument"));
    } else if (t == "cast_expression") {
      read(field(n, "value"));
    } else if (t == "sizeof_expression" || t == "alignof_expression") {
      read(field(n, "value"));
    } else if (t == "field_identifier" || t == "type_descriptor" || t == "primitive_type" ||
               t == "type_identifier" || t == "statement_identifier" || t == "comment" ||
               is_atomic_leaf(t) || t == "true" || t == "false" || t == "null") {
      // no variable reads
    } else {
      for (const TSNode c : named_children(n)) read(c);
    }
  }

  void assignment(TSNode n) {
    const TSNode left = field(n, "left");
    const TSNode right = field(n, "right");
    const TSNode opn = field(n, "operator");
    const std::string op = is_null(opn) ? "=" : text(opn);
    const bool compound = op != "=";
    if (compound && op.size() >= 2) record_binop(op.substr(0, op.size() - 1), left, right);
    const std::size_t call_mark = f_.calls.size();
    read(right);
    lvalue(left, compound);
    const TSNode l = strip_parens(left);
    const TSNode r = strip_parens(right);
    if (!compound && !is_null(l) && type_of(l) == "identifier") {
      if (!is_null(r) && type_of(r) == "identifier") f_.copy = std::make_pair(text(l), text(r));
      if (!is_null(r) && type_of(r) == "call_expression" && call_mark < f_.calls.size()) {
        f_.calls[call_mark].result_target = text(l);
      }
    }
  }

  void lvalue(TSNode n, bool also_read) {
    if (is_null(n)) return;
    const std::string_view t = type_of(n);
    if (t == "identifier") {
      const std::string name = text(n);
      f_.defs.insert(name);
      if (also_read) f_.uses.insert(name);
      return;
    }
    if (t == "parenthesized_expression" && ts_node_named_child_count(n) == 1) {
      lvalue(ts_node_named_child(n, 0), also_read);
      return;
    }
    if (t == "subscript_expression" || t == "field_expression" || t == "pointer_expression") {
      if (t == "subscript_expression") record_index(n);
      if (auto base = base_ident(n, src_)) {
        f_.defs.insert(*base);
        f_.weak.insert(*base);
      }
      // the pointer and any index expressions are read to locate the target
      read(field(n, "argument"));
      if (t == "subscript_expression") read(field(n, "index"));
      return;
    }
    read(n);
  }

  void call(TSNode n) {
    const TSNode fn = field(n, "function");
    CallSite site;
    if (!is_null(fn) && type_of(fn) == "identifier") {
      site.callee = text(fn);
    } else {
      site.indirect = true;
      site.callee = is_null(fn) ? std::string{} : flat_text(fn, src_);
      read(fn);
    }
    f_.callee_names.insert(site.callee);
    const TSNode args = field(n, "arguments");
    std::vector<TSNode> arg_nodes;
    if (!is_null(args)) {
      for (const TSNode a : named_children(args)) {
        if (type_of(a) == "comment") continue;
        arg_nodes.push_back(a);
      }
    }
    for (const TSNode a : arg_nodes) {
      site.args.push_back(flat_text(a, src_));
      std::vector<std::string> ids;
      collect_idents(a, ids, src_);
      site.arg_idents.push_back(std::move(ids));
    }
    f_.calls.push_back(std::move(site));
    for (const TSNode a : arg_nodes) {
      read(a);
      const TSNode s = strip_parens(a);
      if (!is_null(s) && type_of(s) == "pointer_expression") {
        const TSNode opn = field(s, "operator");
        if (!is_null(opn) && text(opn) == "&") {
          if (auto base = base_ident(field(s, "argument"), src_)) {
            f_.defs.insert(*base);
            f_.weak.insert(*base);
          }
        }
      }
    }
  }

  void declaration(TSNode n) {
    for (const TSNode d : field_children(n, "declarator")) {
      const DeclaratorInfo info = unwrap_declarator(d, src_);
      if (info.function || info.name.empty()) continue;
      f_.declared.push_back(info.name);
      f_.defs.insert(info.name);
      if (info.pointer_depth > 0 || info.array) f_.pointer_decls.insert(info.name);
      if (!is_null(info.array_size)) read(info.array_size);
      if (type_of(d) == "init_declarator") {
        const TSNode value = field(d, "value");
        const std::size_t call_mark = f_.calls.size();
        read(value);
        const TSNode v = strip_parens(value);
        if (!is_null(v) && type_of(v) == "identifier") f_.copy = std::make_pair(info.name, text(v));
        if (!is_null(v) && type_of(v) == "call_expression" && call_mark < f_.calls.size()) {
          f_.calls[call_mark].result_target = info.name;
        }
      }
    }
  }

 private:
  std::string text(TSNode n) const {
    return std::string(src_.substr(ts_node_start_byte(n), ts_node_end_byte(n) - ts_node_start_byte(n)));
  }

  void record_binop(std::string op, TSNode l, TSNode r) {
    BinaryOp b;
    b.op = std::move(op);
    if (!is_null(l)) {
      b.lhs_text = flat_text(l, src_);
      collect_idents(l, b.lhs_idents, src_);
    }
    if (!is_null(r)) {
      b.rhs_text = flat_text(r, src_);
      collect_idents(r, b.rhs_idents, src_);
    }
    f_.binary_ops.push_back(std::move(b));
  }

  void record_index(TSNode n) {
    IndexAccess ia;
    const TSNode base = field(n, "argument");
    const TSNode idx = field(n, "index");
    if (!is_null(base)) {
      ia.base_text = flat_text(base, src_);
      collect_idents(base, ia.base_idents, src_);
    }
    if (!is_null(idx)) {
      ia.index_text = flat_text(idx, src_);
      collect_idents(idx, ia.index_idents, src_);
    }
    f_.index_accesses.push_back(std::move(ia));
  }

  std::string_view src_;
  Facts& f_;
};

class FunctionBuilder {
 public:
  FunctionBuilder(std::string_view src, FunctionRecord& fn) : src_(src), fn_(fn) {}

  void walk(TSNode n, std::optional<std::size_t> guard, bool in_else) {
    if (is_null(n)) return;
    const std::string_view t = type_of(n);
    if (t == "compound_statement") {
      for (const TSNode c : named_children(n)) walk(c, guard, in_else);
    } else if (t == "declaration") {
      Facts facts;
      ExprWalker(src_, facts).declaration(n);
      emit_simple(n, StatementKind::Decl, facts, guard, in_else);
    } else if (t == "expression_statement") {
      if (ts_node_named_child_count(n) == 0) return;
      TSNode expr = ts_node_named_child(n, 0);
      if (type_of(expr) == "comment") return;
      Facts facts;
      ExprWalker(src_, facts).read(expr);
      emit_simple(n, classify(expr), facts, guard, in_else);
    } else if (t == "return_statement") {
      Facts facts;
      ExprWalker w(src_, facts);
      for (const TSNode c : named_children(n)) w.read(c);
      emit_simple(n, StatementKind::Return, facts, guard, in_else);
    } else if (t == "if_statement") {
      const std::size_t g = emit_guard(n, GuardForm::If, {field(n, "condition")}, guard, in_else);
      walk(field(n, "consequence"), g, false);
      const TSNode alt = field(n, "alternative");
      if (!is_null(alt)) {
        for (const TSNode c : named_children(alt)) walk(c, g, true);
      }
    } else if (t == "switch_statement") {
      const std::size_t g = emit_guard(n, GuardForm::Switch, {field(n, "condition")}, guard, in_else);
      walk(field(n, "body"), g, false);
    } else if (t == "case_statement") {
      const TSNode value = field(n, "value");
      for (const TSNode c : named_children(n)) {
        if (!is_null(value) && ts_node_eq(c, value)) continue;
        walk(c, guard, in_else);
      }
    } else if (t == "while_statement") {
      const std::size_t g = emit_guard(n, GuardForm::While, {field(n, "condition")}, guard, in_else);
      walk(field(n, "body"), g, false);
    } else if (t == "for_statement") {
      const std::size_t g = emit_guard(
          n, GuardForm::For, {field(n, "initializer"), field(n, "condition"), field(n, "update")}, guard,
          in_else);
      walk(field(n, "body"), g, false);
    } else if (t == "do_statement") {
      const std::size_t first = fn_.statements.size();
      walk(field(n, "body"), guard, in_else);
      const std::size_t g = emit_guard(n, GuardForm::DoWhile, {field(n, "condition")}, guard, in_else);
      for (std::size_t i = first; i < g; ++i) {
        if (fn_.statements[i].guard == guard) {
          fn_.statements[i].guard = g;
          fn_.statements[i].in_else = false;
        }
      }
    } else if (t == "labeled_statement" || t == "attributed_statement") {
      for (const TSNode c : named_children(n)) {
        const std::string_view ct = type_of(c);
        if (ct == "statement_identifier") pending_labels_.push_back(std::string(text_of(c)));
        if (ct == "statement_identifier" || ct == "attribute_declaration") continue;
        walk(c, guard, in_else);
      }
    } else if (t == "goto_statement" || t == "break_statement" || t == "continue_statement") {
      Facts facts;
      StatementNode& s = emit_simple(n, StatementKind::Other, facts, guard, in_else);
      if (t == "break_statement") {
        s.jump = JumpKind::Break;
      } else if (t == "continue_statement") {
        s.jump = JumpKind::Continue;
      } else {
        s.jump = JumpKind::Goto;
        for (const TSNode c : named_children(n)) {
          if (type_of(c) == "statement_identifier") s.jump_label = std::string(text_of(c));
        }
      }
    } else if (t.starts_with("preproc_if") || t == "preproc_else" || t == "preproc_elif" ||
               t == "preproc_elifdef") {
      const TSNode cond = field(n, "condition");
      const TSNode name = field(n, "name");
      for (const TSNode c : named_children(n)) {
        if ((!is_null(cond) && ts_node_eq(c, cond)) || (!is_null(name) && ts_node_eq(c, name))) continue;
        walk(c, guard, in_else);
      }
    } else if (t == "comment" || t.starts_with("preproc_") || t == "type_definition" ||
               t == "struct_specifier" || t == "enum_specifier" || t == "union_specifier" ||
               t == "function_definition") {
      // no statement facts
    } else {
      // ERROR nodes and anything unexpected: keep the identifiers as reads
      Facts facts;
      ExprWalker(src_, facts).read(n);
      emit_simple(n, StatementKind::Other, facts, guard, in_else);
    }
  }

 private:
  static StatementKind classify(TSNode expr) {
    TSNode e = strip_parens(expr);
    if (is_null(e)) return StatementKind::Other;
    const std::string_view t = type_of(e);
    if (t == "assignment_expression" || t == "update_expression") return StatementKind::Assign;
    if (t == "call_expression") return StatementKind::Call;
    if (t == "comma_expression") {
      for (const TSNode c : named_children(e)) {
        const StatementKind k = classify(c);
        if (k == StatementKind::Assign) return k;
      }
      return StatementKind::Other;
    }
    return StatementKind::Other;
  }

  StatementNode& push(StatementKind kind, std::optional<std::size_t> guard, bool in_else) {
    StatementNode s;
    s.id = fn_.statements.size();
    s.kind = kind;
    s.guard = guard;
    s.in_else = in_else && guard.has_value();
    s.labels = std::move(pending_labels_);
    pending_labels_.clear();
    fn_.statements.push_back(std::move(s));
    return fn_.statements.back();
  }

  void apply(StatementNode& s, Facts& facts) {
    s.defs = std::move(facts.defs);
    s.weak_defs = std::move(facts.weak);
    s.uses = std::move(facts.uses);
    s.callee_names = std::move(facts.callee_names);
    s.calls = std::move(facts.calls);
    s.binary_ops = std::move(facts.binary_ops);
    s.index_accesses = std::move(facts.index_accesses);
    s.declared = std::move(facts.declared);
    s.copy = std::move(facts.copy);
    // a strong write anywhere in the statement wins over a weak one
    for (const auto& d : s.declared) s.weak_defs.erase(d);
    for (const auto& p : facts.pointer_decls) fn_.pointer_vars.insert(p);
    for (const auto& d : s.declared) fn_.locals.insert(d);
  }

  StatementNode& emit_simple(TSNode n, StatementKind kind, Facts& facts, std::optional<std::size_t> guard,
                             bool in_else) {
    StatementNode& s = push(kind, guard, in_else);
    s.span = {first_line(n), last_line(n)};
    s.has_error = ts_node_has_error(n);
    Flattener fl(src_);
    fl.add(n);
    s.text = fl.take();
    s.ident_spans = fl.take_idents();
    apply(s, facts);
    return s;
  }

  std::size_t emit_guard(TSNode n, GuardForm form, std::initializer_list<TSNode> parts,
                         std::optional<std::size_t> guard, bool in_else) {
    Facts facts;
    ExprWalker w(src_, facts);
    Flattener fl(src_);
    int end = first_line(n);
    bool error = false;
    int start = first_line(n);
    switch (form) {
      case GuardForm::If: fl.add_literal("if"); break;
      case GuardForm::Switch: fl.add_literal("switch"); break;
      case GuardForm::While: fl.add_literal("while"); break;
      case GuardForm::For: fl.add_literal("for ("); break;
      case GuardForm::DoWhile: fl.add_literal("while"); break;
      case GuardForm::None: break;
    }
    bool prev_is_decl = false;
    std::size_t index = 0;
    for (const TSNode p : parts) {
      // a declaration initializer carries its own ';'
      if (form == GuardForm::For && index++ > 0 && !prev_is_decl) fl.add_literal(";");
      prev_is_decl = false;
      if (is_null(p)) continue;
      error = error || ts_node_has_error(p);
      end = std::max(end, last_line(p));
      if (form == GuardForm::DoWhile) start = first_line(p);
      if (type_of(p) == "declaration") {
        w.declaration(p);
        prev_is_decl = true;
      } else {
        w.read(p);
      }
      fl.add(p);
    }
    if (form == GuardForm::For) fl.add_literal(")");
    if (form == GuardForm::DoWhile) fl.add_literal(";");
    std::string header = fl.take();
    const std::size_t id = push(form == GuardForm::If || form == GuardForm::Switch ? StatementKind::BranchGuard
                                                                                   : StatementKind::LoopGuard,
                                guard, in_else)
                               .id;
    StatementNode& s = fn_.statements[id];
    s.guard_form = form;
    s.span = {start, end};
    s.has_error = error;
    s.text = std::move(header);
    s.ident_spans = fl.take_idents();
    apply(s, facts);
    return id;
  }

  std::string_view text_of(TSNode n) const {
    return src_.substr(ts_node_start_byte(n), ts_node_end_byte(n) - ts_node_start_byte(n));
  }

  std::string_view src_;
  FunctionRecord& fn_;
  std::vector<std::string> pending_labels_;
};

TSNode find_function_declarator(TSNode n, int& pointer_depth) {
  while (!is_null(n)) {
    const std::string_view t = type_of(n);
    if (t == "function_declarator") return n;
    if (t == "pointer_declarator") {
      ++pointer_depth;
      n = field(n, "declarator");
    } else if (t == "parenthesized_declarator" || t == "attributed_declarator") {
      if (ts_node_named_child_count(n) == 0) break;
      n = ts_node_named_child(n, 0);
    } else {
      break;
    }
  }
  return TSNode{};
}

std::optional<FunctionRecord> build_function(TSNode def, const std::string& path, std::string_view src,
                                             std::vector<Diagnostic>& diags) {
  const TSNode body = field(def, "body");
  if (is_null(body)) return std::nullopt;
  int ret_ptr = 0;
  const TSNode fdecl = find_function_declarator(field(def, "declarator"), ret_ptr);
  if (is_null(fdecl)) return std::nullopt;
  const TSNode name_node = field(fdecl, "declarator");
  if (is_null(name_node)) return std::nullopt;
  const DeclaratorInfo name_info = unwrap_declarator(name_node, src);
  const std::string name = name_info.name.empty() ? flat_text(name_node, src) : name_info.name;
  if (name.empty()) return std::nullopt;

  FunctionRecord fn;
  fn.name = name;
  fn.file = path;
  fn.body_span = {first_line(def), last_line(def)};
  fn.id = path + ":" + name + ":" + std::to_string(fn.body_span.start);
  const TSNode type = field(def, "type");
  DeclaratorInfo ret;
  ret.pointer_depth = ret_ptr;
  fn.return_type = type_with_declarator(is_null(type) ? std::string("int") : flat_text(type, src), ret);

  StatementNode entry;
  entry.id = 0;
  entry.kind = StatementKind::Decl;
  entry.span = {fn.body_span.start, fn.body_span.start};
  const TSNode params = field(fdecl, "parameters");
  if (!is_null(params)) {
    std::size_t index = 0;
    for (const TSNode p : named_children(params)) {
      if (type_of(p) != "parameter_declaration") continue;
      const TSNode pt = field(p, "type");
      const TSNode pd = field(p, "declarator");
      const std::string base = is_null(pt) ? std::string{} : flat_text(pt, src);
      DeclaratorInfo info;
      if (!is_null(pd)) info = unwrap_declarator(pd, src);
      if (is_null(pd) && base == "void" && named_children(params).size() == 1) break;
      if (info.name.empty()) info.name = "__arg" + std::to_string(index);
      fn.params.push_back({info.name, type_with_declarator(base, info)});
      entry.defs.insert(info.name);
      entry.declared.push_back(info.name);
      fn.locals.insert(info.name);
      if (info.pointer_depth > 0 || info.array) fn.pointer_vars.insert(info.name);
      ++index;
    }
  }
  {
    Flattener fl(src);
    const uint32_t count = ts_node_child_count(def);
    for (uint32_t i = 0; i < count; ++i) {
      const TSNode c = ts_node_child(def, i);
      if (ts_node_eq(c, body)) break;
      fl.add(c);
    }
    entry.text = fl.take();
    entry.ident_spans = fl.take_idents();
  }
  fn.statements.push_back(std::move(entry));

  FunctionBuilder builder(src, fn);
  builder.walk(body, std::nullopt, false);
  if (ts_node_has_error(def)) {
    diags.push_back({path, "function '" + name + "' contains unparsed regions"});
  }
  return fn;
}

void collect_functions(TSNode n, const std::string& path, std::string_view src, std::vector<FunctionRecord>& out,
                       std::vector<Diagnostic>& diags) {
  const std::string_view t = type_of(n);
  if (t == "function_definition") {
    if (auto fn = build_function(n, path, src, diags)) out.push_back(std::move(*fn));
    return;
  }
  if (t == "comment" || t == "string_literal") return;
  for (const TSNode c : named_children(n)) collect_functions(c, path, src, out, diags);
}

std::size_t count_lines(std::string_view content) {
  if (content.empty()) return 0;
  std::size_t n = static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
  if (content.back() != '\n') ++n;
  return n;
}

}  // namespace

Language language_for_path(std::string_view path) noexcept {
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return Language::C;
  const std::string_view ext = path.substr(dot);
  if (ext == ".c" || ext == ".h") return Language::C;
  return Language::Cpp;
}

ParsedFile parse_source(std::string path, std::string content) {
  ParsedFile out;
  out.file.path = path;
  out.file.language = language_for_path(path);
  out.file.content_hash = sha256_hex(content);
  out.file.line_count = count_lines(content);
  if (content.find('\0') != std::string::npos) {
    out.ok = false;
    out.diagnostics.push_back({path, "binary content; skipped"});
    out.content = std::move(content);
    return out;
  }
  TreePtr tree = parse_tree(content);
  if (!tree) {
    out.ok = false;
    out.diagnostics.push_back({path, "parser returned no tree; skipped"});
    out.content = std::move(content);
    return out;
  }
  const TSNode root = ts_tree_root_node(tree.get());
  if (ts_node_has_error(root)) {
    out.diagnostics.push_back({path, "file contains syntax the C grammar could not parse"});
  }
  collect_functions(root, path, content, out.functions, out.diagnostics);
  std::sort(out.functions.begin(), out.functions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.body_span.start, a.name) < std::tie(b.body_span.start, b.name);
  });
  out.content = std::move(content);
  return out;
}

ReparseResult check_single_function(std::string_view text) {
  ReparseResult r;
  TreePtr tree = parse_tree(text);
  if (!tree) {
    r.message = "parser returned no tree";
    return r;
  }
  const TSNode root = ts_tree_root_node(tree.get());
  std::size_t others = 0;
  for (const TSNode c : named_children(root)) {
    const std::string_view t = type_of(c);
    if (t == "function_definition") {
      ++r.function_count;
    } else if (t != "comment") {
      ++others;
    }
  }
  if (ts_node_has_error(root)) {
    r.message = "render contains syntax errors";
  } else if (r.function_count != 1 || others != 0) {
    r.message = "render is not exactly one function definition";
  } else {
    r.ok = true;
  }
  return r;
}

}  // namespace apaudit
