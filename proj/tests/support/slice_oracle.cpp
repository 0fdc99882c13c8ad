#include "slice_oracle.hpp"

#include <deque>
#include <tuple>
#include <vector>

#include "apaudit/flow.hpp"

namespace oracle {

using apaudit::CodeIndex;
using apaudit::Direction;
using apaudit::FunctionRecord;
using apaudit::StatementKind;
using apaudit::StatementNode;

namespace {

std::size_t g_edges = 0;

// Connected components of the undirected pointer-copy graph, by plain BFS.
class Aliases {
 public:
  explicit Aliases(const FunctionRecord& fn) {
    for (const auto& st : fn.statements) {
      if (!st.copy) continue;
      const auto& [a, b] = *st.copy;
      if (!fn.pointer_vars.count(a) && !fn.pointer_vars.count(b)) continue;
      adj_[a].insert(b);
      adj_[b].insert(a);
    }
  }

  std::set<std::string> of(const std::string& v) const {
    std::set<std::string> seen{v};
    std::vector<std::string> stack{v};
    while (!stack.empty()) {
      std::string x = stack.back();
      stack.pop_back();
      auto it = adj_.find(x);
      if (it == adj_.end()) continue;
      for (const auto& y : it->second) {
        if (seen.insert(y).second) stack.push_back(y);
      }
    }
    return seen;
  }

 private:
  std::map<std::string, std::set<std::string>> adj_;
};

bool strong(const StatementNode& st, const std::string& v) { return st.defs.count(v) && !st.weak_defs.count(v); }

std::set<std::string> gen(const StatementNode& st, const Aliases& al) {
  std::set<std::string> out;
  for (const auto& d : st.defs) {
    if (!st.weak_defs.count(d)) {
      out.insert(d);
    } else {
      auto c = al.of(d);
      out.insert(c.begin(), c.end());
    }
  }
  return out;
}

enum Kind {
  kSeed,
  kFDef,       // forward: v tainted after statement
  kFUse,       // forward: statement reads tainted v
  kFEntry,     // forward: callee entered with tainted param aux
  kFRetSite,   // forward: caller site receives a tainted return value
  kBNeed,      // backward: v needed at statement
  kBDef,       // backward: statement defines needed v
  kBSite,      // backward: caller site must supply param aux
  kBRetEntry,  // backward: callee's return value needed
  kBRet,       // backward: one return statement of that callee
};

struct Node {
  int kind = kSeed;
  std::string fn;
  std::size_t stmt = 0;
  std::string var;
  std::size_t aux = 0;
  bool down = false;

  auto key() const { return std::tie(kind, fn, stmt, var, aux, down); }
  bool operator<(const Node& o) const { return key() < o.key(); }
  bool is_member() const { return kind != kBRetEntry; }
};

struct Edge {
  Node to;
  int w;
};

class Graph {
 public:
  Graph(const CodeIndex* index, const FunctionRecord* only, Direction dir) : index_(index), only_(only), dir_(dir) {}

  const FunctionRecord& fn(const std::string& id) const { return only_ ? *only_ : index_->function(id); }

  const Aliases& aliases(const FunctionRecord& f) {
    auto it = aliases_.find(f.id);
    if (it == aliases_.end()) it = aliases_.emplace(f.id, Aliases(f)).first;
    return it->second;
  }

  bool crossings() const { return index_ != nullptr; }

  std::vector<const FunctionRecord*> callees(const apaudit::CallSite& c) const {
    std::vector<const FunctionRecord*> out;
    if (c.indirect) return out;
    for (const auto& f : index_->functions()) {
      if (f.name == c.callee) out.push_back(&f);
    }
    return out;
  }

  std::vector<std::pair<const FunctionRecord*, std::size_t>> callers(const FunctionRecord& target) const {
    std::vector<std::pair<const FunctionRecord*, std::size_t>> out;
    for (const auto& f : index_->functions()) {
      for (const auto& st : f.statements) {
        for (const auto& c : st.calls) {
          if (!c.indirect && c.callee == target.name) {
            out.push_back({&f, st.id});
            break;
          }
        }
      }
    }
    return out;
  }

  const apaudit::FlowGraph& flow(const FunctionRecord& f) {
    auto it = flows_.find(f.id);
    if (it == flows_.end()) it = flows_.emplace(f.id, apaudit::build_flow_graph(f)).first;
    return it->second;
  }

  // Every use reachable from the definition along a path free of strong redefinitions.
  void forward_def_edges(const Node& n, std::vector<Edge>& out) {
    const FunctionRecord& f = fn(n.fn);
    const auto& g = flow(f);
    std::set<std::size_t> seen;
    std::deque<std::size_t> q(g.succ[n.stmt].begin(), g.succ[n.stmt].end());
    while (!q.empty()) {
      const std::size_t j = q.front();
      q.pop_front();
      if (j == g.exit() || !seen.insert(j).second) continue;
      const StatementNode& st = f.statements[j];
      if (st.uses.count(n.var)) out.push_back({{kFUse, n.fn, j, n.var, 0, n.down}, 0});
      if (!strong(st, n.var)) q.insert(q.end(), g.succ[j].begin(), g.succ[j].end());
    }
  }

  void forward_gen_edges(const FunctionRecord& f, std::size_t s, const std::set<std::string>& vars, bool down,
                         std::vector<Edge>& out) {
    for (const auto& v : vars) out.push_back({{kFDef, f.id, s, v, 0, down}, 0});
  }

  void call_down_edges(const FunctionRecord& f, std::size_t j, const std::set<std::string>& active,
                       std::vector<Edge>& out) {
    if (!crossings()) return;
    for (const auto& c : f.statements[j].calls) {
      for (const FunctionRecord* g : callees(c)) {
        for (std::size_t k = 0; k < c.arg_idents.size() && k < g->params.size(); ++k) {
          bool hit = false;
          for (const auto& a : c.arg_idents[k]) hit = hit || active.count(a);
          if (hit) out.push_back({{kFEntry, g->id, 0, "", k, true}, 1});
        }
      }
    }
  }

  void return_up_edges(const FunctionRecord& f, std::size_t j, bool down, std::vector<Edge>& out) {
    if (!crossings() || down || f.statements[j].kind != StatementKind::Return) return;
    for (const auto& [caller, site] : callers(f)) out.push_back({{kFRetSite, caller->id, site, "", 0, false}, 1});
  }

  // Every definition that reaches the statement along a path free of strong redefinitions.
  void need_edges(const Node& n, std::vector<Edge>& out) {
    const FunctionRecord& f = fn(n.fn);
    const Aliases& al = aliases(f);
    const auto& g = flow(f);
    std::set<std::size_t> seen;
    std::deque<std::size_t> q(g.pred[n.stmt].begin(), g.pred[n.stmt].end());
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop_front();
      if (!seen.insert(i).second) continue;
      const StatementNode& st = f.statements[i];
      if (gen(st, al).count(n.var)) out.push_back({{kBDef, n.fn, i, n.var, 0, n.down}, 0});
      if (!strong(st, n.var)) q.insert(q.end(), g.pred[i].begin(), g.pred[i].end());
    }
  }

  void need_from_uses(const FunctionRecord& f, std::size_t i, const std::set<std::string>& vars, bool down,
                      std::vector<Edge>& out) {
    for (const auto& u : vars) out.push_back({{kBNeed, f.id, i, u, 0, down}, 0});
  }

  void return_down_edges(const FunctionRecord& f, std::size_t i, std::vector<Edge>& out) {
    if (!crossings()) return;
    for (const auto& c : f.statements[i].calls) {
      for (const FunctionRecord* g : callees(c)) out.push_back({{kBRetEntry, g->id, 0, "", 0, true}, 1});
    }
  }

  void param_up_edges(const FunctionRecord& f, const std::string& param, std::vector<Edge>& out) {
    if (!crossings()) return;
    for (std::size_t k = 0; k < f.params.size(); ++k) {
      if (f.params[k].name != param) continue;
      for (const auto& [caller, site] : callers(f)) {
        Node s{kBSite, caller->id, site, f.name, k, false};
        out.push_back({s, 1});
      }
    }
  }

  std::vector<Edge> edges(const Node& n) {
    std::vector<Edge> out;
    switch (n.kind) {
      case kFDef: forward_def_edges(n, out); break;
      case kFUse: {
        const FunctionRecord& f = fn(n.fn);
        forward_gen_edges(f, n.stmt, gen(f.statements[n.stmt], aliases(f)), n.down, out);
        call_down_edges(f, n.stmt, {n.var}, out);
        return_up_edges(f, n.stmt, n.down, out);
        break;
      }
      case kFEntry: {
        const FunctionRecord& g = fn(n.fn);
        forward_gen_edges(g, 0, aliases(g).of(g.params[n.aux].name), true, out);
        break;
      }
      case kFRetSite: {
        const FunctionRecord& f = fn(n.fn);
        forward_gen_edges(f, n.stmt, gen(f.statements[n.stmt], aliases(f)), false, out);
        return_up_edges(f, n.stmt, false, out);
        break;
      }
      case kBNeed: need_edges(n, out); break;
      case kBDef: {
        const FunctionRecord& f = fn(n.fn);
        need_from_uses(f, n.stmt, f.statements[n.stmt].uses, n.down, out);
        return_down_edges(f, n.stmt, out);
        if (n.stmt == 0 && !n.down) param_up_edges(f, n.var, out);
        break;
      }
      case kBSite: {
        const FunctionRecord& f = fn(n.fn);
        std::set<std::string> vars;
        for (const auto& c : f.statements[n.stmt].calls) {
          if (c.indirect || c.callee != n.var || n.aux >= c.arg_idents.size()) continue;
          vars.insert(c.arg_idents[n.aux].begin(), c.arg_idents[n.aux].end());
        }
        need_from_uses(f, n.stmt, vars, false, out);
        break;
      }
      case kBRetEntry: {
        const FunctionRecord& g = fn(n.fn);
        for (const auto& st : g.statements) {
          if (st.kind == StatementKind::Return) out.push_back({{kBRet, g.id, st.id, "", 0, true}, 0});
        }
        break;
      }
      case kBRet: {
        const FunctionRecord& g = fn(n.fn);
        need_from_uses(g, n.stmt, g.statements[n.stmt].uses, true, out);
        return_down_edges(g, n.stmt, out);
        break;
      }
      default: break;
    }
    return out;
  }

  // Materializes every edge reachable from the seed edges, then runs 0-1 BFS.
  std::map<Node, int> distances(const Node& seed, const std::vector<Edge>& seed_edges) {
    std::map<Node, std::vector<Edge>> adj;
    adj[seed] = seed_edges;
    std::deque<Node> work;
    for (const auto& e : seed_edges) work.push_back(e.to);
    while (!work.empty()) {
      Node n = work.front();
      work.pop_front();
      if (adj.count(n)) continue;
      auto es = edges(n);
      for (const auto& e : es) {
        if (!adj.count(e.to)) work.push_back(e.to);
      }
      adj[n] = std::move(es);
    }
    g_edges = 0;
    for (const auto& [_, es] : adj) g_edges += es.size();

    std::map<Node, int> dist;
    std::deque<Node> dq{seed};
    dist[seed] = 0;
    while (!dq.empty()) {
      Node n = dq.front();
      dq.pop_front();
      const int d = dist[n];
      for (const auto& e : adj[n]) {
        const int nd = d + e.w;
        auto it = dist.find(e.to);
        if (it != dist.end() && it->second <= nd) continue;
        dist[e.to] = nd;
        if (e.w == 0) {
          dq.push_front(e.to);
        } else {
          dq.push_back(e.to);
        }
      }
    }
    return dist;
  }

  std::map<Node, int> run(const FunctionRecord& f, std::size_t s, const std::set<std::string>& idents) {
    const StatementNode& st = f.statements[s];
    const Aliases& al = aliases(f);
    std::set<std::string> used;
    for (const auto& v : idents) {
      if (st.uses.count(v)) used.insert(v);
    }
    Node seed{kSeed, f.id, s, "", 0, false};
    std::vector<Edge> es;
    if (dir_ == Direction::Forward) {
      std::set<std::string> t0;
      for (const auto& v : idents) {
        t0.insert(v);
        if (!st.uses.count(v)) {
          auto c = al.of(v);
          t0.insert(c.begin(), c.end());
        }
      }
      if (!used.empty()) {
        auto g = gen(st, al);
        t0.insert(g.begin(), g.end());
      }
      forward_gen_edges(f, s, t0, false, es);
      call_down_edges(f, s, used, es);
      return_up_edges(f, s, false, es);
    } else if (s == 0) {
      for (const auto& v : idents) {
        if (st.defs.count(v)) es.push_back({{kBDef, f.id, 0, v, 0, false}, 0});
      }
    } else {
      need_from_uses(f, s, used.empty() ? st.uses : used, false, es);
      if (used.empty()) return_down_edges(f, s, es);
    }
    return distances(seed, es);
  }

 private:
  const CodeIndex* index_;
  const FunctionRecord* only_;
  Direction dir_;
  std::map<std::string, Aliases> aliases_;
  std::map<std::string, apaudit::FlowGraph> flows_;
};

// x reaches the exit without passing through j.
bool escapes(const apaudit::FlowGraph& g, std::size_t x, std::size_t j) {
  std::vector<bool> seen(g.succ.size(), false);
  std::vector<std::size_t> stack{x};
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (n == j || seen[n]) continue;
    if (n == g.exit()) return true;
    seen[n] = true;
    stack.insert(stack.end(), g.succ[n].begin(), g.succ[n].end());
  }
  return false;
}

bool postdominates(const apaudit::FlowGraph& g, std::size_t j, std::size_t x) { return j == x || !escapes(g, x, j); }

// j is control dependent on b when some successor of b commits to j but b does not.
std::set<std::size_t> controllers(const apaudit::FlowGraph& g, std::size_t j) {
  std::set<std::size_t> out;
  for (std::size_t b = 0; b < g.exit(); ++b) {
    if (b == j || postdominates(g, j, b)) continue;
    for (std::size_t s : g.succ[b]) {
      if (postdominates(g, j, s)) out.insert(b);
    }
  }
  return out;
}

void add_guards(const CodeIndex* index, const FunctionRecord* only, MemberDepths& m) {
  std::map<std::string, std::map<std::size_t, int>> per_fn;
  for (const auto& [k, d] : m) per_fn[k.first][k.second] = d;
  for (auto& [id, members] : per_fn) {
    const FunctionRecord& f = only ? *only : index->function(id);
    const auto g = apaudit::build_flow_graph(f);
    std::map<std::size_t, int> guards;
    std::deque<std::pair<std::size_t, int>> work(members.begin(), members.end());
    while (!work.empty()) {
      auto [j, d] = work.front();
      work.pop_front();
      for (std::size_t b : controllers(g, j)) {
        auto it = guards.find(b);
        if (it != guards.end() && it->second <= d) continue;
        guards[b] = d;
        work.push_back({b, d});
      }
    }
    std::map<std::size_t, int> extra = guards;
    for (const auto& st : f.statements) {
      const bool exits = st.kind == StatementKind::Return || st.jump != apaudit::JumpKind::None;
      if (!exits || !st.guard || !guards.count(*st.guard)) continue;
      const int d = guards.at(*st.guard);
      auto it = extra.find(st.id);
      if (it == extra.end() || it->second > d) extra[st.id] = d;
    }
    for (const auto& [s, d] : extra) {
      auto key = std::make_pair(id, s);
      auto it = m.find(key);
      if (it == m.end() || it->second > d) m[key] = d;
    }
  }
}

MemberDepths collect(const std::map<Node, int>& dist, int k_max) {
  MemberDepths m;
  for (const auto& [n, d] : dist) {
    if (d > k_max || !n.is_member()) continue;
    auto key = std::make_pair(n.fn, n.stmt);
    auto it = m.find(key);
    if (it == m.end() || it->second > d) m[key] = d;
  }
  return m;
}

}  // namespace

MemberDepths slice(const CodeIndex& index, const apaudit::Seed& seed, int k_max, bool control_deps) {
  const FunctionRecord& f = index.function(seed.function_id);
  std::set<std::string> idents(seed.operand_idents.begin(), seed.operand_idents.end());
  if (idents.empty()) idents.insert(seed.captured_ident);
  const Direction dir =
      seed.seed_kind == apaudit::SeedKind::FaultyValue ? Direction::Forward : Direction::Backward;
  Graph g(&index, nullptr, dir);
  MemberDepths m = collect(g.run(f, seed.statement, idents), k_max);
  if (control_deps) add_guards(&index, nullptr, m);
  return m;
}

std::set<std::size_t> intra(const FunctionRecord& fn, const std::string& ident, std::size_t statement,
                            Direction direction, bool control_deps) {
  Graph g(nullptr, &fn, direction);
  MemberDepths m = collect(g.run(fn, statement, {ident}), 0);
  if (control_deps) add_guards(nullptr, &fn, m);
  std::set<std::size_t> out;
  for (const auto& [k, _] : m) out.insert(k.second);
  return out;
}

std::size_t last_edge_count() { return g_edges; }

}  // namespace oracle
