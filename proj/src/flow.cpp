#include "apaudit/flow.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <string>

namespace apaudit {

namespace {

class FlowBuilder {
 public:
  explicit FlowBuilder(const FunctionRecord& fn) : fn_(fn), exit_(fn.statements.size()) {
    g_.succ.assign(exit_ + 1, {});
    children_.assign(exit_, {});
    for (const auto& st : fn.statements) {
      if (st.guard) {
        children_[*st.guard].push_back(st.id);
      } else {
        top_.push_back(st.id);
      }
    }
    for (const auto& st : fn.statements) {
      for (const auto& l : st.labels) labels_.emplace(l, entry(st.id));
    }
  }

  FlowGraph build() {
    seq(top_, exit_, exit_, exit_);
    connect_dead_ends();
    g_.pred.assign(g_.succ.size(), {});
    for (std::size_t a = 0; a < g_.succ.size(); ++a) {
      for (std::size_t b : g_.succ[a]) g_.pred[b].push_back(a);
    }
    return std::move(g_);
  }

 private:
  // First node executed by a statement; a do-while starts with its body.
  std::size_t entry(std::size_t s) const {
    const StatementNode& st = fn_.statements[s];
    if (st.guard_form == GuardForm::DoWhile && !children_[s].empty()) return entry(children_[s].front());
    return s;
  }

  void add(std::size_t a, std::size_t b) {
    auto& out = g_.succ[a];
    if (std::find(out.begin(), out.end(), b) == out.end()) out.push_back(b);
  }

  std::size_t seq(const std::vector<std::size_t>& list, std::size_t next, std::size_t brk, std::size_t cont) {
    std::size_t follow = next;
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      stmt(*it, follow, brk, cont);
      follow = entry(*it);
    }
    return follow;
  }

  void stmt(std::size_t s, std::size_t next, std::size_t brk, std::size_t cont) {
    const StatementNode& st = fn_.statements[s];
    const auto& body = children_[s];
    if (st.is_guard()) {
      switch (st.guard_form) {
        case GuardForm::Switch:
          seq(body, next, next, cont);
          for (std::size_t c : body) add(s, entry(c));
          add(s, next);
          return;
        case GuardForm::While:
        case GuardForm::For:
        case GuardForm::DoWhile:
          add(s, seq(body, s, next, s));
          add(s, next);
          return;
        default: {
          std::vector<std::size_t> then_part, else_part;
          for (std::size_t c : body) (fn_.statements[c].in_else ? else_part : then_part).push_back(c);
          add(s, seq(then_part, next, brk, cont));
          add(s, seq(else_part, next, brk, cont));
          return;
        }
      }
    }
    if (st.kind == StatementKind::Return) {
      add(s, exit_);
      return;
    }
    switch (st.jump) {
      case JumpKind::Break: add(s, brk); return;
      case JumpKind::Continue: add(s, cont); return;
      case JumpKind::Goto: {
        auto it = labels_.find(st.jump_label);
        add(s, it == labels_.end() ? exit_ : it->second);
        return;
      }
      case JumpKind::None: break;
    }
    add(s, next);
  }

  // Infinite loops have no path to the exit; postdominance needs one.
  void connect_dead_ends() {
    std::vector<std::vector<std::size_t>> rev(g_.succ.size());
    for (std::size_t a = 0; a < g_.succ.size(); ++a) {
      for (std::size_t b : g_.succ[a]) rev[b].push_back(a);
    }
    std::vector<bool> reaches(g_.succ.size(), false);
    std::vector<std::size_t> stack{exit_};
    reaches[exit_] = true;
    while (!stack.empty()) {
      const std::size_t n = stack.back();
      stack.pop_back();
      for (std::size_t p : rev[n]) {
        if (!reaches[p]) {
          reaches[p] = true;
          stack.push_back(p);
        }
      }
    }
    for (std::size_t a = 0; a < exit_; ++a) {
      if (!reaches[a]) add(a, exit_);
    }
  }

  const FunctionRecord& fn_;
  const std::size_t exit_;
  FlowGraph g_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> top_;
  std::map<std::string, std::size_t> labels_;
};

}  // namespace

FlowGraph build_flow_graph(const FunctionRecord& fn) { return FlowBuilder(fn).build(); }

// Cooper, Harvey and Kennedy's iterative dominator algorithm on the reverse graph.
std::vector<std::size_t> immediate_postdominators(const FlowGraph& g) {
  const std::size_t n = g.succ.size();
  const std::size_t exit = g.exit();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::vector<std::size_t> order;  // postorder over predecessor edges from the exit
  std::vector<std::size_t> number(n, kNone);
  std::vector<bool> seen(n, false);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{exit, 0}};
  seen[exit] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < g.pred[node].size()) {
      const std::size_t p = g.pred[node][next++];
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back({p, 0});
      }
    } else {
      number[node] = order.size();
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::vector<std::size_t> ipdom(n, kNone);
  ipdom[exit] = exit;
  auto intersect = [&](std::size_t a, std::size_t b) {
    while (a != b) {
      while (number[a] < number[b]) a = ipdom[a];
      while (number[b] < number[a]) b = ipdom[b];
    }
    return a;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t b = *it;
      if (b == exit) continue;
      std::size_t best = kNone;
      for (std::size_t s : g.succ[b]) {
        if (ipdom[s] == kNone) continue;
        best = best == kNone ? s : intersect(s, best);
      }
      if (best != kNone && ipdom[b] != best) {
        ipdom[b] = best;
        changed = true;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ipdom[i] == kNone) ipdom[i] = exit;
  }
  return ipdom;
}

std::vector<std::set<std::size_t>> control_dependences(const FlowGraph& g) {
  const std::vector<std::size_t> ipdom = immediate_postdominators(g);
  const std::size_t exit = g.exit();
  std::vector<std::set<std::size_t>> cd(exit);
  for (std::size_t a = 0; a < exit; ++a) {
    if (g.succ[a].size() < 2) continue;
    for (std::size_t b : g.succ[a]) {
      for (std::size_t r = b; r != ipdom[a] && r != exit; r = ipdom[r]) {
        if (r != a) cd[r].insert(a);
      }
    }
  }
  return cd;
}

}  // namespace apaudit
