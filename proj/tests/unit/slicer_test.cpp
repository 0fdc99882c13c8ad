#include <gtest/gtest.h>

#include <algorithm>

#include "apaudit/c_parser.hpp"
#include "apaudit/errors.hpp"
#include "apaudit/slicer.hpp"
#include "program_gen.hpp"
#include "slice_oracle.hpp"

using namespace apaudit;

namespace {

CodeIndex one(const std::string& src) { return index_sources({{"t.c", src}}); }

const FunctionRecord& fn_named(const CodeIndex& idx, const std::string& name) {
  auto v = idx.functions_named(name);
  if (v.empty()) throw LookupError(name);
  return *v.front();
}

std::size_t stmt_containing(const FunctionRecord& fn, const std::string& text) {
  for (const auto& st : fn.statements) {
    if (st.id > 0 && st.text.find(text) != std::string::npos) return st.id;
  }
  throw LookupError(text);
}

Seed seed_at(const FunctionRecord& fn, std::size_t stmt, const std::string& ident, SeedKind kind) {
  Seed s;
  s.function_id = fn.id;
  s.statement = stmt;
  s.captured_ident = ident;
  s.operand_idents = {ident};
  s.seed_kind = kind;
  s.file = fn.file;
  s.line = fn.statements[stmt].span.start;
  return s;
}

oracle::MemberDepths as_map(const Slice& s) {
  oracle::MemberDepths m;
  for (const auto& x : s.members) m[{x.function_id, x.statement}] = x.depth;
  return m;
}

const char* kStraight = "void f(void) {\n  int a = 1;\n  int b = a;\n  int c = b;\n  int d = 2;\n}\n";

const char* kDbz =
    "int g(int d) {\n"
    "  int q = 100 / d;\n"
    "  return q;\n"
    "}\n"
    "\n"
    "int f(int n) {\n"
    "  int x = n - n;\n"
    "  return g(x);\n"
    "}\n";

}  // namespace

TEST(IntraSlice, ForwardChainStopsAtUnrelatedStatement) {
  auto idx = one(kStraight);
  const auto& f = fn_named(idx, "f");
  // statement 0 is the entry, so a=1 is statement 1
  EXPECT_EQ(intra_slice(f, "a", 1, Direction::Forward), (std::set<std::size_t>{1, 2, 3}));
}

TEST(IntraSlice, BackwardFromC) {
  auto idx = one(kStraight);
  const auto& f = fn_named(idx, "f");
  EXPECT_EQ(intra_slice(f, "c", 3, Direction::Backward), (std::set<std::size_t>{1, 2, 3}));
}

TEST(IntraSlice, UnreferencedSeedIsAlone) {
  auto idx = one(kStraight);
  const auto& f = fn_named(idx, "f");
  EXPECT_EQ(intra_slice(f, "d", 4, Direction::Forward), (std::set<std::size_t>{4}));
}

TEST(IntraSlice, AbsentIdentifierIsContractError) {
  auto idx = one(kStraight);
  EXPECT_THROW(intra_slice(fn_named(idx, "f"), "zz", 2, Direction::Forward), ContractError);
  EXPECT_THROW(intra_slice(fn_named(idx, "f"), "a", 99, Direction::Forward), ContractError);
}

TEST(IntraSlice, KillOnReassignment) {
  auto idx = one("void f(int n) {\n  int a = n;\n  a = 5;\n  int b = a;\n}\n");
  const auto& f = fn_named(idx, "f");
  EXPECT_EQ(intra_slice(f, "a", 1, Direction::Forward), (std::set<std::size_t>{1}));
  EXPECT_EQ(intra_slice(f, "a", 3, Direction::Backward), (std::set<std::size_t>{2, 3}));
}

TEST(IntraSlice, ControlDependenceAddsGuards) {
  auto idx = one("void f(int n) {\n  int a = n;\n  if (n > 2) {\n    while (a) {\n      a = a - 1;\n    }\n  }\n}\n");
  const auto& f = fn_named(idx, "f");
  const std::size_t dec = stmt_containing(f, "a = a - 1");
  auto with = intra_slice(f, "a", dec, Direction::Backward, true);
  auto without = intra_slice(f, "a", dec, Direction::Backward, false);
  EXPECT_TRUE(with.count(stmt_containing(f, "if (n > 2)")));
  EXPECT_TRUE(with.count(stmt_containing(f, "while (a)")));
  EXPECT_FALSE(without.count(stmt_containing(f, "if (n > 2)")));
}

TEST(IntraSlice, PointerWriteTaintsAliases) {
  auto idx = one("void f(int n) {\n  int a = 0;\n  int *p = &a;\n  int *q = p;\n  *p = n;\n  int b = *q;\n}\n");
  const auto& f = fn_named(idx, "f");
  auto m = intra_slice(f, "n", stmt_containing(f, "*p = n"), Direction::Forward);
  EXPECT_TRUE(m.count(stmt_containing(f, "int b = *q")));
}

TEST(InterSlice, ZeroBudgetStaysInSeedFunction) {
  auto idx = one(kDbz);
  const auto& g = fn_named(idx, "g");
  SlicerConfig cfg;
  cfg.k_max = 0;
  auto s = interprocedural_slice(idx, seed_at(g, 1, "d", SeedKind::DangerousOperand), cfg);
  for (const auto& m : s.members) EXPECT_EQ(m.function_id, g.id);
  EXPECT_FALSE(s.pruned.empty());
}

TEST(InterSlice, DbzBackwardReachesCallerArgument) {
  auto idx = one(kDbz);
  const auto& g = fn_named(idx, "g");
  const auto& f = fn_named(idx, "f");
  SlicerConfig cfg;
  cfg.k_max = 1;
  auto s = interprocedural_slice(idx, seed_at(g, 1, "d", SeedKind::DangerousOperand), cfg);
  EXPECT_EQ(s.depth_of(g.id, 1), 0);
  EXPECT_EQ(s.depth_of(g.id, 0), 0);
  EXPECT_EQ(s.depth_of(f.id, stmt_containing(f, "int x = n - n")), 1);
  EXPECT_EQ(s.depth_of(f.id, stmt_containing(f, "return g(x)")), 1);
}

TEST(InterSlice, ForwardReturnAndCallCrossings) {
  auto idx = one(
      "int h(int v) {\n  return v * 2;\n}\n\n"
      "int src(void) {\n  int z = 0;\n  return z;\n}\n\n"
      "int top(void) {\n  int t = src();\n  int u = h(t);\n  return u;\n}\n");
  const auto& src = fn_named(idx, "src");
  const auto& top = fn_named(idx, "top");
  const auto& h = fn_named(idx, "h");
  SlicerConfig cfg;
  auto s = interprocedural_slice(idx, seed_at(src, 1, "z", SeedKind::FaultyValue), cfg);
  EXPECT_EQ(s.depth_of(top.id, stmt_containing(top, "int t = src()")), 1);
  EXPECT_EQ(s.depth_of(top.id, stmt_containing(top, "int u = h(t)")), 1);
  EXPECT_EQ(s.depth_of(h.id, 1), 2);
}

TEST(InterSlice, FiveCallChainPrunedAtThree) {
  auto idx = one(progen::call_chain(6));
  const auto& leaf = fn_named(idx, "f5");
  SlicerConfig cfg;
  cfg.k_max = 3;
  auto s = interprocedural_slice(idx, seed_at(leaf, 1, "v", SeedKind::DangerousOperand), cfg);
  int deepest = 0;
  for (const auto& m : s.members) deepest = std::max(deepest, m.depth);
  EXPECT_EQ(deepest, 3);
  EXPECT_EQ(s.depth_of(fn_named(idx, "f2").id, 2), 3);
  EXPECT_EQ(s.depth_of(fn_named(idx, "f1").id, 2), -1);
  EXPECT_EQ(s.depth_of(fn_named(idx, "f0").id, 2), -1);
  ASSERT_FALSE(s.pruned.empty());
  for (const auto& p : s.pruned) EXPECT_EQ(p.depth, 4);
}

TEST(InterSlice, UnresolvedCalleeIsDiagnosedNotFatal) {
  auto idx = one("int f(int n) {\n  int r = ext(n);\n  return 10 / r;\n}\n");
  const auto& f = fn_named(idx, "f");
  auto s = interprocedural_slice(idx, seed_at(f, 2, "r", SeedKind::DangerousOperand), SlicerConfig{});
  EXPECT_TRUE(std::any_of(s.diagnostics.begin(), s.diagnostics.end(),
                          [](const std::string& d) { return d.find("ext") != std::string::npos; }));
  EXPECT_EQ(s.depth_of(f.id, 1), 0);
}

TEST(InterSlice, RecursionTerminates) {
  auto idx = one("int r(int n) {\n  if (n > 0) {\n    return r(n - 1);\n  }\n  return 10 / n;\n}\n");
  const auto& f = fn_named(idx, "r");
  SlicerConfig cfg;
  auto s = interprocedural_slice(idx, seed_at(f, stmt_containing(f, "10 / n"), "n", SeedKind::DangerousOperand), cfg);
  EXPECT_FALSE(s.members.empty());
}

TEST(InterSlice, SeedIdentifierMustOccur) {
  auto idx = one(kDbz);
  const auto& g = fn_named(idx, "g");
  EXPECT_THROW(interprocedural_slice(idx, seed_at(g, 1, "nope", SeedKind::FaultyValue), SlicerConfig{}), ContractError);
  SlicerConfig bad;
  bad.k_max = -1;
  EXPECT_THROW(interprocedural_slice(idx, seed_at(g, 1, "d", SeedKind::FaultyValue), bad), ConfigError);
}

// Every (statement, identifier) of every generated program, both directions, k in 0..3.
TEST(SlicerOracle, RandomProgramsMatch) {
  int programs = 0;
  std::size_t seeds = 0;
  for (std::uint32_t r = 1; r <= 24; ++r) {
    auto prog = progen::generate(r, 30);
    ASSERT_LE(prog.statements, 30u) << prog.source;
    auto idx = one(prog.source);
    ASSERT_TRUE(idx.diagnostics().empty()) << prog.source;
    ++programs;
    for (const auto& fn : idx.functions()) {
      for (const auto& st : fn.statements) {
        std::set<std::string> ids = st.defs;
        ids.insert(st.uses.begin(), st.uses.end());
        for (const auto& v : ids) {
          for (Direction dir : {Direction::Forward, Direction::Backward}) {
            EXPECT_EQ(intra_slice(fn, v, st.id, dir), oracle::intra(fn, v, st.id, dir))
                << prog.source << fn.name << " " << st.id << " " << v;
          }
          for (SeedKind kind : {SeedKind::FaultyValue, SeedKind::DangerousOperand}) {
            for (int k = 0; k <= 3; ++k) {
              SlicerConfig cfg;
              cfg.k_max = k;
              auto s = interprocedural_slice(idx, seed_at(fn, st.id, v, kind), cfg);
              ASSERT_EQ(as_map(s), oracle::slice(idx, seed_at(fn, st.id, v, kind), k))
                  << prog.source << fn.name << " stmt " << st.id << " " << v << " k=" << k
                  << " kind=" << to_string(kind);
              ++seeds;
            }
          }
        }
      }
    }
  }
  EXPECT_GE(programs, 20);
  EXPECT_GT(seeds, 1000u);
}

TEST(SlicerOracle, KMonotone) {
  for (std::uint32_t r = 100; r < 120; ++r) {
    auto idx = one(progen::generate(r, 30).source);
    for (const auto& fn : idx.functions()) {
      for (const auto& st : fn.statements) {
        for (const auto& v : st.uses) {
          for (SeedKind kind : {SeedKind::FaultyValue, SeedKind::DangerousOperand}) {
            std::set<std::pair<std::string, std::size_t>> prev;
            for (int k = 0; k <= 3; ++k) {
              SlicerConfig cfg;
              cfg.k_max = k;
              auto s = interprocedural_slice(idx, seed_at(fn, st.id, v, kind), cfg);
              std::set<std::pair<std::string, std::size_t>> cur;
              for (const auto& m : s.members) {
                EXPECT_LE(m.depth, k);
                cur.insert({m.function_id, m.statement});
              }
              EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
              prev = std::move(cur);
            }
          }
        }
      }
    }
  }
}

TEST(Inliner, SingleFunctionRendersAndReparses) {
  auto idx = one(kStraight);
  const auto& f = fn_named(idx, "f");
  Seed s = seed_at(f, 1, "a", SeedKind::FaultyValue);
  SlicerConfig cfg;
  auto ctx = inline_slices(idx, interprocedural_slice(idx, s, cfg), cfg);
  EXPECT_FALSE(ctx.fallback);
  EXPECT_TRUE(check_single_function(ctx.rendered).ok) << ctx.rendered;
  EXPECT_NE(ctx.rendered.find("int b = a;"), std::string::npos);
  EXPECT_EQ(ctx.rendered.find("int d = 2;"), std::string::npos);
  EXPECT_GT(ctx.seed_marker, 0);
  EXPECT_TRUE(ctx.has_origin("t.c", 2));
  EXPECT_FALSE(ctx.has_origin("t.c", 5));
}

TEST(Inliner, DbzBindingPrecedesDivision) {
  auto idx = one(kDbz);
  const auto& g = fn_named(idx, "g");
  SlicerConfig cfg;
  cfg.k_max = 1;
  auto ctx = inline_slices(idx, interprocedural_slice(idx, seed_at(g, 1, "d", SeedKind::DangerousOperand), cfg), cfg);
  ASSERT_TRUE(check_single_function(ctx.rendered).ok) << ctx.rendered;
  const auto bind = ctx.rendered.find("_d = x;");
  const auto div = ctx.rendered.find("100 / ");
  ASSERT_NE(bind, std::string::npos) << ctx.rendered;
  ASSERT_NE(div, std::string::npos) << ctx.rendered;
  EXPECT_LT(bind, div);
  EXPECT_TRUE(ctx.has_origin("t.c", 2));
  EXPECT_TRUE(ctx.has_origin("t.c", 7));
}

TEST(Inliner, CollidingLocalsAreRenamed) {
  auto idx = one(
      "int g(int v) {\n  int x = v + 1;\n  return 10 / x;\n}\n\n"
      "int f(void) {\n  int x = 0;\n  return g(x);\n}\n");
  const auto& f = fn_named(idx, "f");
  SlicerConfig cfg;
  auto s = interprocedural_slice(idx, seed_at(f, 1, "x", SeedKind::FaultyValue), cfg);
  auto ctx = inline_slices(idx, s, cfg);
  ASSERT_TRUE(check_single_function(ctx.rendered).ok) << ctx.rendered;
  EXPECT_NE(ctx.rendered.find("int x = 0;"), std::string::npos) << ctx.rendered;
  EXPECT_NE(ctx.rendered.find("_x = "), std::string::npos) << ctx.rendered;
  EXPECT_NE(ctx.rendered.find("10 / g_"), std::string::npos) << ctx.rendered;
}

TEST(Inliner, RandomRendersReparseWithTotalOrigins) {
  for (std::uint32_t r = 200; r < 225; ++r) {
    auto prog = progen::generate(r, 30);
    auto idx = one(prog.source);
    for (const auto& fn : idx.functions()) {
      for (const auto& st : fn.statements) {
        for (const auto& v : st.uses) {
          for (SeedKind kind : {SeedKind::FaultyValue, SeedKind::DangerousOperand}) {
            SlicerConfig cfg;
            auto s = interprocedural_slice(idx, seed_at(fn, st.id, v, kind), cfg);
            auto ctx = inline_slices(idx, s, cfg);
            ASSERT_FALSE(ctx.fallback) << prog.source << "\n----\n" << ctx.rendered;
            ASSERT_TRUE(check_single_function(ctx.rendered).ok) << ctx.rendered;
            for (const auto& m : s.members) {
              const auto& mf = idx.function(m.function_id);
              const auto& ms = mf.statements[m.statement];
              EXPECT_TRUE(ctx.has_origin(mf.file, ms.span.start))
                  << ctx.rendered << " missing " << mf.file << ":" << ms.span.start;
            }
          }
        }
      }
    }
  }
}

TEST(Inliner, BudgetTruncatesDeepestFirst) {
  auto idx = one(progen::call_chain(4));
  const auto& leaf = fn_named(idx, "f3");
  SlicerConfig full;
  auto s = interprocedural_slice(idx, seed_at(leaf, 1, "v", SeedKind::DangerousOperand), full);
  auto big = inline_slices(idx, s, full);
  EXPECT_FALSE(big.truncated);
  SlicerConfig small = full;
  small.context_char_budget = big.rendered.size() - 1;
  auto cut = inline_slices(idx, s, small);
  EXPECT_TRUE(cut.truncated);
  EXPECT_LT(cut.rendered.size(), big.rendered.size());
  EXPECT_TRUE(cut.has_origin("t.c", leaf.statements[1].span.start));
  EXPECT_TRUE(check_single_function(cut.rendered).ok) << cut.rendered;
}
