#include "apaudit/slicer.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

#include "apaudit/errors.hpp"

namespace apaudit {

void SlicerConfig::validate() const {
  if (k_max < 0) throw ConfigError("k_max must be non-negative");
  if (context_char_budget == 0) throw ConfigError("context_char_budget must be positive");
}

std::string_view to_string(CrossingKind k) noexcept {
  switch (k) {
    case CrossingKind::Seed: return "seed";
    case CrossingKind::CallDown: return "call_down";
    case CrossingKind::ReturnUp: return "return_up";
    case CrossingKind::ParamUp: return "param_up";
    case CrossingKind::ReturnDown: return "return_down";
  }
  return "seed";
}

Direction direction_for(SeedKind kind) noexcept {
  return kind == SeedKind::FaultyValue ? Direction::Forward : Direction::Backward;
}

AliasClasses::AliasClasses(const FunctionRecord& fn) {
  for (const auto& st : fn.statements) {
    if (!st.copy) continue;
    const auto& [a, b] = *st.copy;
    if (fn.pointer_vars.count(a) == 0 && fn.pointer_vars.count(b) == 0) continue;
    const std::string ra = find(a);
    const std::string rb = find(b);
    if (ra != rb) parent_[std::max(ra, rb)] = std::min(ra, rb);
  }
}

std::string AliasClasses::find(const std::string& v) const {
  auto it = parent_.find(v);
  if (it == parent_.end()) {
    parent_[v] = v;
    return v;
  }
  if (it->second == v) return v;
  std::string root = find(it->second);
  parent_[v] = root;
  return root;
}

std::set<std::string> AliasClasses::class_of(const std::string& v) const {
  std::set<std::string> out{v};
  if (parent_.count(v) == 0) return out;
  const std::string root = find(v);
  std::vector<std::string> keys;
  for (const auto& [k, _] : parent_) keys.push_back(k);
  for (const auto& k : keys) {
    if (find(k) == root) out.insert(k);
  }
  return out;
}

std::set<std::string> generated(const StatementNode& st, const AliasClasses& aliases) {
  std::set<std::string> out = st.strong_defs();
  for (const auto& w : st.weak_defs) {
    auto cls = aliases.class_of(w);
    out.insert(cls.begin(), cls.end());
  }
  return out;
}

std::vector<std::size_t> guard_chain(const FunctionRecord& fn, std::size_t statement) {
  std::vector<std::size_t> out;
  std::optional<std::size_t> g = fn.statement(statement).guard;
  while (g) {
    out.push_back(*g);
    g = fn.statements[*g].guard;
  }
  return out;
}

namespace {

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      return true;
    }
  }
  return false;
}

std::set<std::string> intersection(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

struct ForwardResult {
  std::set<std::size_t> members;
  std::map<std::size_t, std::set<std::string>> active;  // tainted variables read at each member
};

// Per-variable states propagate along the flow graph: (j, v) means v carries
// the seed's value at the entry of statement j.
ForwardResult forward_sweep(const FunctionRecord& fn, const FlowGraph& flow, const AliasClasses& aliases,
                            std::size_t start, const std::set<std::string>& tainted,
                            std::set<std::string> start_active) {
  ForwardResult r;
  r.members.insert(start);
  r.active[start] = std::move(start_active);
  std::set<std::pair<std::size_t, std::string>> seen;
  std::vector<std::pair<std::size_t, std::string>> work;
  auto after = [&](std::size_t s, const std::string& v) {
    for (std::size_t n : flow.succ[s]) {
      if (n != flow.exit() && seen.emplace(n, v).second) work.emplace_back(n, v);
    }
  };
  for (const auto& v : tainted) after(start, v);
  while (!work.empty()) {
    auto [j, v] = std::move(work.back());
    work.pop_back();
    const StatementNode& st = fn.statements[j];
    if (st.uses.count(v) != 0) {
      r.members.insert(j);
      r.active[j].insert(v);
      for (const auto& g : generated(st, aliases)) after(j, g);
    }
    if (st.strong_defs().count(v) == 0) after(j, v);
  }
  return r;
}

struct BackwardResult {
  std::set<std::size_t> members;
  std::set<std::string> needed_params;
};

// (i, v): v is needed at the exit of statement i.
void backward_sweep(const FunctionRecord& fn, const FlowGraph& flow, const AliasClasses& aliases, std::size_t start,
                    const std::set<std::string>& needed, BackwardResult& r) {
  r.members.insert(start);
  std::set<std::pair<std::size_t, std::string>> seen;
  std::vector<std::pair<std::size_t, std::string>> work;
  auto before = [&](std::size_t s, const std::string& v) {
    for (std::size_t p : flow.pred[s]) {
      if (seen.emplace(p, v).second) work.emplace_back(p, v);
    }
  };
  for (const auto& v : needed) before(start, v);
  while (!work.empty()) {
    auto [i, v] = std::move(work.back());
    work.pop_back();
    const StatementNode& st = fn.statements[i];
    if (generated(st, aliases).count(v) != 0) {
      r.members.insert(i);
      if (i == 0) r.needed_params.insert(v);
      for (const auto& u : st.uses) before(i, u);
    }
    if (st.strong_defs().count(v) == 0) before(i, v);
  }
}

}  // namespace

void add_control_deps(const FunctionRecord& fn, const FlowGraph& flow, std::set<std::size_t>& members) {
  const auto cd = control_dependences(flow);
  std::set<std::size_t> guards;
  std::vector<std::size_t> work(members.begin(), members.end());
  while (!work.empty()) {
    const std::size_t m = work.back();
    work.pop_back();
    for (std::size_t g : cd[m]) {
      if (guards.insert(g).second) work.push_back(g);
    }
  }
  members.insert(guards.begin(), guards.end());
  for (const auto& st : fn.statements) {
    const bool exits = st.kind == StatementKind::Return || st.jump != JumpKind::None;
    if (exits && st.guard && guards.count(*st.guard) != 0) members.insert(st.id);
  }
}

namespace {

std::set<std::string> to_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void require_statement(const FunctionRecord& fn, std::size_t statement) {
  if (statement >= fn.statements.size()) {
    throw ContractError("statement " + std::to_string(statement) + " is not in " + fn.id);
  }
}

}  // namespace

std::set<std::size_t> intra_slice(const FunctionRecord& fn, const std::string& ident, std::size_t statement,
                                  Direction direction, bool include_control_deps) {
  require_statement(fn, statement);
  const StatementNode& st = fn.statements[statement];
  const bool used = st.uses.count(ident) != 0;
  if (!used && st.defs.count(ident) == 0) {
    throw ContractError("'" + ident + "' is neither defined nor used at " + fn.id + " statement " +
                        std::to_string(statement));
  }
  const AliasClasses aliases(fn);
  const FlowGraph flow = build_flow_graph(fn);
  std::set<std::size_t> members;
  if (direction == Direction::Forward) {
    std::set<std::string> t0;
    if (used) {
      t0 = generated(st, aliases);
      t0.insert(ident);
    } else {
      t0 = aliases.class_of(ident);
    }
    members = forward_sweep(fn, flow, aliases, statement, t0, {}).members;
  } else {
    BackwardResult r;
    backward_sweep(fn, flow, aliases, statement, used ? std::set<std::string>{ident} : st.uses, r);
    members = std::move(r.members);
  }
  if (include_control_deps) add_control_deps(fn, flow, members);
  return members;
}

int Slice::depth_of(const std::string& function_id, std::size_t statement) const {
  for (const auto& m : members) {
    if (m.function_id == function_id && m.statement == statement) return m.depth;
  }
  return -1;
}

namespace {

struct StartPoint {
  std::size_t statement;
  std::set<std::string> vars;
  bool use_entry;  // the start reads its variables; no return-down from it
};

struct PendingFrame {
  SliceFrame frame;
  std::vector<StartPoint> starts;  // backward
  std::set<std::string> start_active;  // forward
};

using FrameKey = std::tuple<std::string, int, std::size_t, bool, std::vector<std::pair<std::size_t, std::set<std::string>>>>;

class SliceBuilder {
 public:
  SliceBuilder(const CodeIndex& index, const SlicerConfig& cfg, Slice& out) : index_(index), cfg_(cfg), out_(out) {}

  void run(PendingFrame seed) {
    enqueue(std::move(seed));
    while (!queue_.empty()) {
      PendingFrame pf = std::move(queue_.front());
      queue_.pop_front();
      const std::size_t id = out_.frames.size();
      pf.frame.id = id;
      out_.frames.push_back(pf.frame);
      if (out_.direction == Direction::Forward) {
        process_forward(id, pf);
      } else {
        process_backward(id, pf);
      }
    }
    std::map<std::pair<std::string, std::size_t>, int> depth;
    for (const auto& f : out_.frames) {
      for (std::size_t s : f.statements) {
        auto [it, inserted] = depth.emplace(std::make_pair(f.function_id, s), f.depth);
        if (!inserted) it->second = std::min(it->second, f.depth);
      }
    }
    for (const auto& [k, d] : depth) out_.members.push_back({k.first, k.second, d});
  }

  void enqueue(PendingFrame pf) {
    FrameKey key{pf.frame.function_id, static_cast<int>(pf.frame.via), pf.frame.site, pf.frame.down, {}};
    if (out_.direction == Direction::Forward) {
      std::get<4>(key).push_back({pf.frame.site, pf.frame.initial_vars});
    } else {
      for (const auto& s : pf.starts) std::get<4>(key).push_back({s.statement, s.vars});
    }
    if (!seen_.insert(std::move(key)).second) return;
    queue_.push_back(std::move(pf));
  }

 private:
  const AliasClasses& aliases(const FunctionRecord& fn) {
    auto it = aliases_.find(fn.id);
    if (it == aliases_.end()) it = aliases_.emplace(fn.id, AliasClasses(fn)).first;
    return it->second;
  }

  const FlowGraph& flow(const FunctionRecord& fn) {
    auto it = flows_.find(fn.id);
    if (it == flows_.end()) it = flows_.emplace(fn.id, build_flow_graph(fn)).first;
    return it->second;
  }

  bool admit(const SliceFrame& parent, CrossingKind kind, const std::string& to, std::size_t site) {
    const int depth = parent.depth + 1;
    if (depth > cfg_.k_max) {
      out_.pruned.push_back({kind, parent.function_id, to, site, depth});
      return false;
    }
    return true;
  }

  std::string where(const FunctionRecord& fn, std::size_t sid) const {
    return fn.file + ":" + std::to_string(fn.statements[sid].span.start);
  }

  void process_forward(std::size_t id, const PendingFrame& pf) {
    const SliceFrame frame = out_.frames[id];
    const FunctionRecord& fn = index_.function(frame.function_id);
    const std::size_t start = frame.via == CrossingKind::CallDown ? 0 : frame.site;
    const std::size_t seed_start = frame.via == CrossingKind::Seed ? out_.seed.statement : start;
    const ForwardResult r =
        forward_sweep(fn, flow(fn), aliases(fn), seed_start, frame.initial_vars, pf.start_active);
    std::set<std::size_t> members = r.members;
    if (cfg_.include_control_deps) add_control_deps(fn, flow(fn), members);
    out_.frames[id].statements = members;

    for (std::size_t j : r.members) {
      const StatementNode& st = fn.statements[j];
      const auto& active = r.active.at(j);
      if (active.empty()) continue;
      for (const auto& call : st.calls) {
        std::vector<std::size_t> tainted_args;
        for (std::size_t k = 0; k < call.arg_idents.size(); ++k) {
          if (intersects(to_set(call.arg_idents[k]), active)) tainted_args.push_back(k);
        }
        if (tainted_args.empty()) continue;
        const auto callees = call.indirect ? std::vector<const FunctionRecord*>{} : index_.functions_named(call.callee);
        if (callees.empty()) {
          out_.diagnostics.push_back("unresolved callee '" + call.callee + "' at " + where(fn, j) +
                                     "; crossing skipped");
          continue;
        }
        for (const FunctionRecord* callee : callees) {
          for (std::size_t k : tainted_args) {
            if (k >= callee->params.size()) {
              out_.diagnostics.push_back("argument " + std::to_string(k) + " of '" + call.callee + "' at " +
                                         where(fn, j) + " has no parameter");
              continue;
            }
            if (!admit(frame, CrossingKind::CallDown, callee->id, j)) continue;
            PendingFrame child;
            child.frame.function_id = callee->id;
            child.frame.via = CrossingKind::CallDown;
            child.frame.parent = id;
            child.frame.site = j;
            child.frame.params = {k};
            child.frame.depth = frame.depth + 1;
            child.frame.down = true;
            child.frame.initial_vars = aliases(*callee).class_of(callee->params[k].name);
            enqueue(std::move(child));
          }
        }
      }
    }

    if (frame.down) return;
    const bool returns = std::any_of(r.members.begin(), r.members.end(), [&](std::size_t j) {
      return fn.statements[j].kind == StatementKind::Return;
    });
    if (!returns) return;
    const auto callers = index_.callers_of(fn.id);
    if (callers.empty()) {
      out_.diagnostics.push_back("no callers of " + fn.id + "; return crossing skipped");
      return;
    }
    for (const auto& c : callers) {
      if (!admit(frame, CrossingKind::ReturnUp, c.caller_id, c.site)) continue;
      const FunctionRecord& caller = index_.function(c.caller_id);
      PendingFrame child;
      child.frame.function_id = c.caller_id;
      child.frame.via = CrossingKind::ReturnUp;
      child.frame.parent = id;
      child.frame.site = c.site;
      child.frame.depth = frame.depth + 1;
      child.frame.initial_vars = generated(caller.statements[c.site], aliases(caller));
      enqueue(std::move(child));
    }
  }

  void process_backward(std::size_t id, const PendingFrame& pf) {
    const SliceFrame frame = out_.frames[id];
    const FunctionRecord& fn = index_.function(frame.function_id);
    BackwardResult r;
    std::set<std::size_t> use_entries;
    for (const auto& s : pf.starts) {
      backward_sweep(fn, flow(fn), aliases(fn), s.statement, s.vars, r);
      if (s.use_entry) use_entries.insert(s.statement);
      // a parameter seed needs its parameter directly
      if (s.statement == 0) {
        auto p = intersection(s.vars, fn.statements[0].defs);
        r.needed_params.insert(p.begin(), p.end());
      }
    }
    std::set<std::size_t> members = r.members;
    if (cfg_.include_control_deps) add_control_deps(fn, flow(fn), members);
    out_.frames[id].statements = members;

    for (std::size_t i : r.members) {
      if (use_entries.count(i) != 0) continue;
      const StatementNode& st = fn.statements[i];
      for (const auto& call : st.calls) {
        const auto callees = call.indirect ? std::vector<const FunctionRecord*>{} : index_.functions_named(call.callee);
        if (callees.empty()) {
          out_.diagnostics.push_back("unresolved callee '" + call.callee + "' at " + where(fn, i) +
                                     "; crossing skipped");
          continue;
        }
        for (const FunctionRecord* callee : callees) {
          if (!admit(frame, CrossingKind::ReturnDown, callee->id, i)) continue;
          PendingFrame child;
          child.frame.function_id = callee->id;
          child.frame.via = CrossingKind::ReturnDown;
          child.frame.parent = id;
          child.frame.site = i;
          child.frame.depth = frame.depth + 1;
          child.frame.down = true;
          for (const auto& rs : callee->statements) {
            if (rs.kind != StatementKind::Return) continue;
            child.starts.push_back({rs.id, rs.uses, false});
            child.frame.initial_vars.insert(rs.uses.begin(), rs.uses.end());
          }
          if (child.starts.empty()) {
            out_.diagnostics.push_back("callee " + callee->id + " has no return statement");
            continue;
          }
          enqueue(std::move(child));
        }
      }
    }

    if (frame.down || r.needed_params.empty()) return;
    std::vector<std::size_t> param_idx;
    for (std::size_t k = 0; k < fn.params.size(); ++k) {
      if (r.needed_params.count(fn.params[k].name) != 0) param_idx.push_back(k);
    }
    const auto callers = index_.callers_of(fn.id);
    if (callers.empty()) {
      out_.diagnostics.push_back("no callers of " + fn.id + "; parameter crossing skipped");
      return;
    }
    for (const auto& c : callers) {
      if (!admit(frame, CrossingKind::ParamUp, c.caller_id, c.site)) continue;
      const FunctionRecord& caller = index_.function(c.caller_id);
      std::set<std::string> vars;
      for (const auto& call : caller.statements[c.site].calls) {
        if (call.indirect || call.callee != fn.name) continue;
        for (std::size_t k : param_idx) {
          if (k < call.arg_idents.size()) vars.insert(call.arg_idents[k].begin(), call.arg_idents[k].end());
        }
      }
      PendingFrame child;
      child.frame.function_id = c.caller_id;
      child.frame.via = CrossingKind::ParamUp;
      child.frame.parent = id;
      child.frame.site = c.site;
      child.frame.params = param_idx;
      child.frame.depth = frame.depth + 1;
      child.frame.initial_vars = vars;
      child.starts.push_back({c.site, vars, true});
      enqueue(std::move(child));
    }
  }

  const CodeIndex& index_;
  const SlicerConfig& cfg_;
  Slice& out_;
  std::deque<PendingFrame> queue_;
  std::set<FrameKey> seen_;
  std::map<std::string, AliasClasses> aliases_;
  std::map<std::string, FlowGraph> flows_;
};

}  // namespace

Slice interprocedural_slice(const CodeIndex& index, const Seed& seed, const SlicerConfig& cfg) {
  cfg.validate();
  const FunctionRecord& fn = index.function(seed.function_id);
  require_statement(fn, seed.statement);
  const StatementNode& st = fn.statements[seed.statement];
  std::vector<std::string> idents = seed.operand_idents;
  if (idents.empty()) idents.push_back(seed.captured_ident);
  for (const auto& v : idents) {
    if (st.defs.count(v) == 0 && st.uses.count(v) == 0) {
      throw ContractError("seed identifier '" + v + "' does not occur at " + fn.id + " statement " +
                          std::to_string(seed.statement));
    }
  }

  Slice slice;
  slice.seed = seed;
  slice.direction = direction_for(seed.seed_kind);
  const AliasClasses aliases(fn);
  const std::set<std::string> used = intersection(to_set(idents), st.uses);

  PendingFrame root;
  root.frame.function_id = fn.id;
  root.frame.via = CrossingKind::Seed;
  root.frame.site = seed.statement;
  if (slice.direction == Direction::Forward) {
    std::set<std::string> t0;
    for (const auto& v : idents) {
      t0.insert(v);
      if (st.uses.count(v) == 0) {
        auto cls = aliases.class_of(v);
        t0.insert(cls.begin(), cls.end());
      }
    }
    if (!used.empty()) {
      auto g = generated(st, aliases);
      t0.insert(g.begin(), g.end());
    }
    root.frame.initial_vars = t0;
    root.start_active = used;
  } else {
    std::set<std::string> n0;
    if (seed.statement == 0) {
      n0 = to_set(idents);
    } else {
      n0 = used.empty() ? st.uses : used;
    }
    root.frame.initial_vars = n0;
    root.starts.push_back({seed.statement, n0, !used.empty()});
  }
  SliceBuilder(index, cfg, slice).run(std::move(root));
  return slice;
}

}  // namespace apaudit
