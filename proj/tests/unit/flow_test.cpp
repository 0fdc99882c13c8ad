#include <gtest/gtest.h>

#include <algorithm>

#include "apaudit/c_parser.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/flow.hpp"
#include "apaudit/slicer.hpp"

using namespace apaudit;

namespace {

struct Fn {
  CodeIndex index;
  const FunctionRecord& fn() const { return index.functions().front(); }

  std::size_t at(const std::string& text) const {
    for (const auto& st : fn().statements) {
      if (st.id > 0 && st.text.find(text) != std::string::npos) return st.id;
    }
    throw LookupError(text);
  }
};

Fn parse(const std::string& src) {
  Fn f{index_sources({{"t.c", src}})};
  EXPECT_TRUE(f.index.diagnostics().empty()) << src;
  return f;
}

bool edge(const FlowGraph& g, std::size_t a, std::size_t b) {
  return std::find(g.succ[a].begin(), g.succ[a].end(), b) != g.succ[a].end();
}

}  // namespace

TEST(FlowGraph, IfElseJoinsAfterBothArms) {
  auto f = parse("int f(int a) {\n  int r = 0;\n  if (a) {\n    r = 1;\n  } else {\n    r = 2;\n  }\n  return r;\n}\n");
  const auto g = build_flow_graph(f.fn());
  const auto guard = f.at("if (a)"), t = f.at("r = 1"), e = f.at("r = 2"), ret = f.at("return r");
  EXPECT_TRUE(edge(g, 0, f.at("int r = 0")));
  EXPECT_TRUE(edge(g, guard, t));
  EXPECT_TRUE(edge(g, guard, e));
  EXPECT_FALSE(edge(g, guard, ret));
  EXPECT_TRUE(edge(g, t, ret));
  EXPECT_TRUE(edge(g, e, ret));
  EXPECT_TRUE(edge(g, ret, g.exit()));
}

TEST(FlowGraph, WhileWithBreakAndContinue) {
  auto f = parse(
      "int f(int n) {\n  int i = 0;\n  while (i < n) {\n    i = i + 1;\n    if (i == 3)\n      continue;\n"
      "    if (i == 7)\n      break;\n    n = n - 1;\n  }\n  return i;\n}\n");
  const auto g = build_flow_graph(f.fn());
  const auto loop = f.at("while"), cont = f.at("continue"), brk = f.at("break"), dec = f.at("n = n - 1");
  const auto ret = f.at("return i");
  EXPECT_TRUE(edge(g, loop, f.at("i = i + 1")));
  EXPECT_TRUE(edge(g, loop, ret));
  EXPECT_TRUE(edge(g, cont, loop));
  EXPECT_TRUE(edge(g, brk, ret));
  EXPECT_TRUE(edge(g, dec, loop));
  EXPECT_EQ(g.succ[cont].size(), 1u);
  EXPECT_EQ(g.succ[brk].size(), 1u);
}

TEST(FlowGraph, DoWhileRunsBodyFirst) {
  auto f = parse("int f(int n) {\n  int s = 0;\n  do {\n    s = s + n;\n    n = n - 1;\n  } while (n > 0);\n  return s;\n}\n");
  const auto g = build_flow_graph(f.fn());
  const auto loop = f.at("while (n > 0)"), first = f.at("s = s + n"), last = f.at("n = n - 1");
  EXPECT_TRUE(edge(g, f.at("int s = 0"), first));
  EXPECT_TRUE(edge(g, last, loop));
  EXPECT_TRUE(edge(g, loop, first));
  EXPECT_TRUE(edge(g, loop, f.at("return s")));
}

TEST(FlowGraph, SwitchEntersEveryChild) {
  auto f = parse(
      "int f(int k) {\n  int r = 0;\n  switch (k) {\n  case 1:\n    r = 10;\n    break;\n  default:\n    r = 20;\n  }\n"
      "  return r;\n}\n");
  const auto g = build_flow_graph(f.fn());
  const auto sw = f.at("switch"), a = f.at("r = 10"), b = f.at("r = 20"), ret = f.at("return r");
  EXPECT_TRUE(edge(g, sw, a));
  EXPECT_TRUE(edge(g, sw, b));
  EXPECT_TRUE(edge(g, sw, ret));
  EXPECT_TRUE(edge(g, f.at("break"), ret));
}

TEST(FlowGraph, GotoReachesLabelAndUnknownLabelLeaves) {
  auto f = parse(
      "int f(int a) {\n  int r = 0;\n  if (a < 0)\n    goto out;\n  r = a;\nout:\n  r = r + 1;\n  if (r > 9)\n"
      "    goto nowhere;\n  return r;\n}\n");
  const auto g = build_flow_graph(f.fn());
  EXPECT_TRUE(edge(g, f.at("goto out"), f.at("r = r + 1")));
  EXPECT_TRUE(edge(g, f.at("goto nowhere"), g.exit()));
}

TEST(FlowGraph, InfiniteLoopGetsExitEdge) {
  auto f = parse("void f(int *p) {\n  for (;;) {\n    *p = *p + 1;\n  }\n}\n");
  const auto g = build_flow_graph(f.fn());
  const auto ipdom = immediate_postdominators(g);
  for (std::size_t i = 0; i < g.exit(); ++i) EXPECT_LT(ipdom[i], g.succ.size());
  EXPECT_EQ(ipdom[g.exit()], g.exit());
}

TEST(FlowGraph, PostdominatorsAndControlDependence) {
  auto f = parse("int f(int a) {\n  int r = 0;\n  if (a) {\n    r = 1;\n  }\n  return r;\n}\n");
  const auto g = build_flow_graph(f.fn());
  const auto ipdom = immediate_postdominators(g);
  const auto guard = f.at("if (a)"), t = f.at("r = 1"), ret = f.at("return r");
  EXPECT_EQ(ipdom[guard], ret);
  EXPECT_EQ(ipdom[t], ret);
  EXPECT_EQ(ipdom[ret], g.exit());
  const auto cd = control_dependences(g);
  EXPECT_EQ(cd[t], std::set<std::size_t>{guard});
  EXPECT_TRUE(cd[ret].empty());
  EXPECT_TRUE(cd[guard].empty());
}

TEST(FlowGraph, EarlyReturnMakesTailControlDependent) {
  auto f = parse("int f(int *t, int n, int i) {\n  if (i >= n) return 0;\n  return t[i];\n}\n");
  const auto cd = control_dependences(build_flow_graph(f.fn()));
  EXPECT_EQ(cd[f.at("return t[i]")], std::set<std::size_t>{f.at("if (i >= n)")});
}

TEST(FlowGraph, LoopBodyDependsOnItsGuardAndGuardOnItself) {
  auto f = parse("int f(int n) {\n  int s = 0;\n  while (n > 0) {\n    n = n - 1;\n  }\n  return s;\n}\n");
  const auto cd = control_dependences(build_flow_graph(f.fn()));
  const auto loop = f.at("while");
  EXPECT_EQ(cd[f.at("n = n - 1")], std::set<std::size_t>{loop});
  EXPECT_TRUE(cd[loop].empty());  // self dependence is dropped
}

TEST(FlowSlice, ConditionalDefinitionDoesNotKill) {
  auto f = parse("int scale(int value) {\n  int divisor = 0;\n  if (value > 100) divisor = 10;\n  return value / divisor;\n}\n");
  const auto s = intra_slice(f.fn(), "divisor", f.at("return value / divisor"), Direction::Backward);
  EXPECT_TRUE(s.count(f.at("int divisor = 0")));
  EXPECT_TRUE(s.count(f.at("divisor = 10")));
}

TEST(FlowSlice, StraightRedefinitionKills) {
  auto f = parse("int f(void) {\n  int d = 0;\n  d = 5;\n  return 10 / d;\n}\n");
  const auto s = intra_slice(f.fn(), "d", f.at("return 10 / d"), Direction::Backward);
  EXPECT_TRUE(s.count(f.at("d = 5")));
  EXPECT_FALSE(s.count(f.at("int d = 0")));
}

TEST(FlowSlice, LoopCarriedDependence) {
  auto f = parse(
      "int f(int n) {\n  int a = 0;\n  int b = 0;\n  while (n > 0) {\n    b = a;\n    a = n;\n    n = n - 1;\n  }\n"
      "  return b;\n}\n");
  const auto fwd = intra_slice(f.fn(), "a", f.at("a = n"), Direction::Forward);
  EXPECT_TRUE(fwd.count(f.at("b = a")));  // reached through the back edge
  EXPECT_TRUE(fwd.count(f.at("return b")));
  const auto bwd = intra_slice(f.fn(), "a", f.at("b = a"), Direction::Backward);
  EXPECT_TRUE(bwd.count(f.at("int a = 0")));
  EXPECT_TRUE(bwd.count(f.at("a = n")));
}

TEST(FlowSlice, EarlyReturnGuardAndExitIncluded) {
  auto f = parse("int lookup(const int *table, int n, int key) {\n  int idx = key - 100;\n  if (idx >= n) return 0;\n"
                 "  return table[idx];\n}\n");
  const auto s = intra_slice(f.fn(), "idx", f.at("return table[idx]"), Direction::Backward);
  EXPECT_TRUE(s.count(f.at("int idx = key - 100")));
  EXPECT_TRUE(s.count(f.at("if (idx >= n)")));
  EXPECT_TRUE(s.count(f.at("return 0")));
}

TEST(FlowSlice, WithoutControlDepsOnlyData) {
  auto f = parse("int f(int a) {\n  int r = 0;\n  if (a) {\n    r = a;\n  }\n  return r;\n}\n");
  const auto with = intra_slice(f.fn(), "a", f.at("r = a"), Direction::Backward, true);
  const auto without = intra_slice(f.fn(), "a", f.at("r = a"), Direction::Backward, false);
  EXPECT_TRUE(with.count(f.at("if (a)")));
  EXPECT_FALSE(without.count(f.at("if (a)")));
}
