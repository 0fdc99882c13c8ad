#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "apaudit/c_parser.hpp"
#include "apaudit/code_index.hpp"
#include "apaudit/errors.hpp"

namespace fs = std::filesystem;
using namespace apaudit;

namespace {

fs::path make_temp_dir(const std::string& tag) {
  std::random_device rd;
  fs::path p = fs::temp_directory_path() / ("apaudit_" + tag + "_" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

const FunctionRecord& by_name(const CodeIndex& idx, const std::string& name) {
  auto v = idx.functions_named(name);
  EXPECT_EQ(v.size(), 1u) << name;
  return *v.front();
}

}  // namespace

TEST(CodeIndex, EmptyDirectory) {
  const fs::path dir = make_temp_dir("empty");
  const CodeIndex idx = index_repository(dir);
  EXPECT_TRUE(idx.files().empty());
  EXPECT_TRUE(idx.functions().empty());
  EXPECT_TRUE(idx.call_graph().edges.empty());
  fs::remove_all(dir);
}

TEST(CodeIndex, MissingRootIsConfigError) {
  EXPECT_THROW(index_repository("/nonexistent/apaudit/root"), ConfigError);
}

TEST(CodeIndex, TwoFunctionFileResolvesEdge) {
  const CodeIndex idx = index_sources({{"a.c", "int f(){return g();} int g(){return 1;}\n"}});
  ASSERT_EQ(idx.functions().size(), 2u);
  const auto& g = idx.call_graph();
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_TRUE(g.unresolved.empty());
  const auto& e = *g.edges.begin();
  EXPECT_EQ(e.caller, by_name(idx, "f").id);
  EXPECT_EQ(e.callee, by_name(idx, "g").id);

  const auto callees = idx.callees_of(by_name(idx, "f").id);
  ASSERT_EQ(callees.size(), 1u);
  EXPECT_EQ(callees[0].callee_id, by_name(idx, "g").id);
  EXPECT_EQ(callees[0].site, e.site);

  const auto callers = idx.callers_of(by_name(idx, "g").id);
  ASSERT_EQ(callers.size(), 1u);
  EXPECT_EQ(callers[0].caller_id, by_name(idx, "f").id);
  EXPECT_EQ(callers[0].site, e.site);
}

TEST(CodeIndex, ExternalCallIsUnresolved) {
  const CodeIndex idx = index_sources({{"m.c",
                                        "void clear(char *buf, int n) {\n"
                                        "  memset(buf, 0, n);\n"
                                        "}\n"}});
  const auto& g = idx.call_graph();
  EXPECT_TRUE(g.edges.empty());
  ASSERT_EQ(g.unresolved.size(), 1u);
  EXPECT_EQ(g.unresolved.begin()->name, "memset");
  const auto callees = idx.callees_of(by_name(idx, "clear").id);
  ASSERT_EQ(callees.size(), 1u);
  EXPECT_FALSE(callees[0].resolved());
  EXPECT_EQ(callees[0].external_name, "memset");
}

TEST(CodeIndex, LeafAndNeverCalled) {
  const CodeIndex idx = index_sources({{"l.c", "int leaf(int x) { return x + 1; }\n"}});
  EXPECT_TRUE(idx.callees_of(by_name(idx, "leaf").id).empty());
  EXPECT_TRUE(idx.callers_of(by_name(idx, "leaf").id).empty());
}

TEST(CodeIndex, DuplicateCallsHaveDistinctSites) {
  const CodeIndex idx = index_sources({{"d.c",
                                        "int g(int v) { return v; }\n"
                                        "int f(int a) {\n"
                                        "  int x = g(a);\n"
                                        "  int y = g(x);\n"
                                        "  return y;\n"
                                        "}\n"}});
  const auto callees = idx.callees_of(by_name(idx, "f").id);
  ASSERT_EQ(callees.size(), 2u);
  EXPECT_EQ(callees[0].callee_id, callees[1].callee_id);
  EXPECT_NE(callees[0].site, callees[1].site);
}

TEST(CodeIndex, ThreeCallersAcrossTwoFiles) {
  const CodeIndex idx = index_sources({
      {"lib.c", "int target(int v) { return v * 2; }\n"},
      {"a.c", "int a1(void) { return target(1); }\nint a2(void) { int r = target(2); return r; }\n"},
      {"b.c", "int b1(int q) { q = target(q); return q; }\n"},
  });
  const auto callers = idx.callers_of(by_name(idx, "target").id);
  EXPECT_EQ(callers.size(), 3u);
}

TEST(CodeIndex, UnknownIdIsLookupError) {
  const CodeIndex idx = index_sources({{"a.c", "int f(){return 0;}\n"}});
  EXPECT_THROW(idx.callees_of("a.c:nope:1"), LookupError);
  EXPECT_THROW(idx.callers_of("a.c:nope:1"), LookupError);
}

TEST(CodeIndex, OverloadsFanOut) {
  const CodeIndex idx = index_sources({
      {"x.c", "int h(int a) { return a; }\n"},
      {"y.c", "int h(int a) { return a + 1; }\nint caller(void) { return h(3); }\n"},
  });
  EXPECT_EQ(idx.call_graph().edges.size(), 2u);
  EXPECT_TRUE(idx.call_graph().unresolved.empty());
}

TEST(CodeIndex, FunctionPointerCallIsUnresolved) {
  const CodeIndex idx = index_sources({{"p.c",
                                        "struct ops { int (*run)(int); };\n"
                                        "int go(struct ops *o) { return o->run(1); }\n"}});
  ASSERT_EQ(idx.call_graph().unresolved.size(), 1u);
  EXPECT_EQ(idx.call_graph().unresolved.begin()->name, "o->run");
}

TEST(CodeIndex, StatementFacts) {
  const CodeIndex idx = index_sources({{"s.c",
                                        "int f(int *p, int n) {\n"
                                        "  int x = n;\n"
                                        "  x += 1;\n"
                                        "  p[x] = 3;\n"
                                        "  if (x > 2) {\n"
                                        "    return x / n;\n"
                                        "  }\n"
                                        "  return 0;\n"
                                        "}\n"}});
  const auto& f = by_name(idx, "f");
  ASSERT_EQ(f.params.size(), 2u);
  EXPECT_EQ(f.params[0].name, "p");
  EXPECT_EQ(f.params[0].type, "int *");
  ASSERT_EQ(f.statements.size(), 7u);
  EXPECT_EQ(f.statements[0].defs, (std::set<std::string>{"p", "n"}));
  EXPECT_EQ(f.statements[1].kind, StatementKind::Decl);
  EXPECT_EQ(f.statements[1].defs, (std::set<std::string>{"x"}));
  EXPECT_EQ(f.statements[1].uses, (std::set<std::string>{"n"}));
  EXPECT_EQ(f.statements[2].defs, (std::set<std::string>{"x"}));
  EXPECT_EQ(f.statements[2].uses, (std::set<std::string>{"x"}));
  EXPECT_EQ(f.statements[3].weak_defs, (std::set<std::string>{"p"}));
  EXPECT_EQ(f.statements[3].uses, (std::set<std::string>{"p", "x"}));
  EXPECT_EQ(f.statements[4].kind, StatementKind::BranchGuard);
  EXPECT_EQ(f.statements[4].text, "if (x > 2)");
  EXPECT_EQ(f.statements[5].kind, StatementKind::Return);
  EXPECT_EQ(f.statements[5].guard, std::optional<std::size_t>(4));
  ASSERT_EQ(f.statements[5].binary_ops.size(), 1u);
  EXPECT_EQ(f.statements[5].binary_ops[0].op, "/");
  EXPECT_EQ(f.statements[5].binary_ops[0].rhs_idents, (std::vector<std::string>{"n"}));
  EXPECT_FALSE(f.statements[6].guard.has_value());
  for (const auto& st : f.statements) {
    EXPECT_TRUE(f.body_span.contains(st.span)) << st.text;
  }
}

TEST(CodeIndex, DefsAndUsesAppearInStatementSpan) {
  const std::string src =
      "int g(int v);\n"
      "int f(int a, int b) {\n"
      "  int c = a /* note b */ + 1;\n"
      "  for (int i = 0; i < b; i++) {\n"
      "    c = g(c);\n"
      "  }\n"
      "  do { c--; } while (c > 0);\n"
      "  switch (a) { case 1: b = 2; break; default: break; }\n"
      "  return c;\n"
      "}\n";
  const CodeIndex idx = index_sources({{"t.c", src}});
  const auto& f = by_name(idx, "f");
  for (const auto& st : f.statements) {
    if (st.id == 0) continue;
    std::string span_text;
    for (int l = st.span.start; l <= st.span.end; ++l) span_text += std::string(idx.line_text("t.c", l)) + "\n";
    for (const auto& d : st.defs) EXPECT_NE(span_text.find(d), std::string::npos) << st.text;
    for (const auto& u : st.uses) EXPECT_NE(span_text.find(u), std::string::npos) << st.text;
  }
  // comments never contribute identifiers
  EXPECT_EQ(f.statements[1].uses, (std::set<std::string>{"a"}));
}

TEST(CodeIndex, DoWhileGuardFollowsBody) {
  const CodeIndex idx = index_sources({{"w.c",
                                        "void f(int n) {\n"
                                        "  do {\n"
                                        "    n--;\n"
                                        "  } while (n > 0);\n"
                                        "}\n"}});
  const auto& f = by_name(idx, "f");
  ASSERT_EQ(f.statements.size(), 3u);
  EXPECT_EQ(f.statements[2].guard_form, GuardForm::DoWhile);
  EXPECT_EQ(f.statements[1].guard, std::optional<std::size_t>(2));
}

TEST(CodeIndex, LineCountAndParseDiagnostics) {
  const CodeIndex idx = index_sources({
      {"ok.c", "int f(void) { return 0; }\nint g(void) { return 1; }"},
      {"broken.c", "int h( { return ; \n"},
  });
  const SourceFile* ok = idx.file("ok.c");
  ASSERT_NE(ok, nullptr);
  EXPECT_EQ(ok->line_count, 2u);
  EXPECT_FALSE(idx.diagnostics().empty());
}

TEST(CodeIndex, BinaryFileSkipped) {
  const CodeIndex idx = index_sources({{"bin.c", std::string("int f(){}\0\x01", 12)}});
  EXPECT_TRUE(idx.files().empty());
  EXPECT_EQ(idx.diagnostics().size(), 1u);
}

TEST(CodeIndex, Globs) {
  EXPECT_TRUE(glob_match("*.c", "src/a.c"));
  EXPECT_TRUE(glob_match("*.h|*.c", "a.h"));
  EXPECT_FALSE(glob_match("*.c", "a.cpp"));
  EXPECT_TRUE(glob_match("third_party/*", "third_party/x/y.c"));
}

TEST(CodeIndex, ExcludeGlobsAndHeaders) {
  const fs::path dir = make_temp_dir("globs");
  write_file(dir / "src/a.c", "int a(void) { return b(); }\n");
  write_file(dir / "src/b.h", "static int b(void) { return 2; }\n");
  write_file(dir / "vendor/v.c", "int v(void) { return 0; }\n");
  write_file(dir / "README.md", "not code\n");
  IndexOptions opts;
  opts.exclude_globs = {"vendor/*"};
  const CodeIndex idx = index_repository(dir, opts);
  ASSERT_EQ(idx.files().size(), 2u);
  EXPECT_EQ(idx.files()[0].path, "src/a.c");
  EXPECT_EQ(idx.files()[1].path, "src/b.h");
  EXPECT_EQ(idx.call_graph().edges.size(), 1u);
  fs::remove_all(dir);
}

TEST(CodeIndexProperty, DeterministicAndParallelMatchesSerial) {
  const fs::path dir = make_temp_dir("det");
  for (int i = 0; i < 12; ++i) {
    std::string src;
    for (int j = 0; j < 5; ++j) {
      src += "int fn_" + std::to_string(i) + "_" + std::to_string(j) + "(int a) {\n";
      src += "  int b = a * 2;\n";
      if (i > 0) src += "  b += fn_" + std::to_string(i - 1) + "_" + std::to_string(j) + "(b);\n";
      src += "  return helper_ext(b);\n}\n";
    }
    write_file(dir / ("f" + std::to_string(i) + ".c"), src);
  }
  const CodeIndex a = index_repository(dir);
  const CodeIndex b = index_repository(dir);
  const CodeIndex s = index_repository_serial(dir);
  EXPECT_TRUE(a.structurally_equal(b));
  EXPECT_TRUE(a.structurally_equal(s));
  EXPECT_EQ(a.to_json().dump(), s.to_json().dump());
  EXPECT_EQ(a.digest(), s.digest());
  fs::remove_all(dir);
}

TEST(CodeIndexProperty, CallerCalleeDuality) {
  const CodeIndex idx = index_sources({
      {"a.c", "int g(int);\nint f(int x) { int y = g(x); return h(y) + g(y); }\n"},
      {"b.c", "int g(int z) { return z ? g(z - 1) : 0; }\nint h(int q) { return g(q); }\n"},
  });
  for (const auto& e : idx.call_graph().edges) {
    const auto callees = idx.callees_of(e.caller);
    EXPECT_TRUE(std::any_of(callees.begin(), callees.end(), [&](const CalleeEntry& c) {
      return c.site == e.site && c.callee_id == e.callee;
    }));
    const auto callers = idx.callers_of(e.callee);
    EXPECT_TRUE(std::any_of(callers.begin(), callers.end(), [&](const CallerEntry& c) {
      return c.site == e.site && c.caller_id == e.caller;
    }));
    EXPECT_TRUE(idx.call_graph().nodes.count(e.caller));
    EXPECT_TRUE(idx.call_graph().nodes.count(e.callee));
    EXPECT_LT(e.site, idx.function(e.caller).statements.size());
  }
  for (const auto& fn : idx.functions()) {
    for (const auto& c : idx.callees_of(fn.id)) {
      if (!c.resolved()) continue;
      EXPECT_TRUE(idx.call_graph().edges.count({fn.id, c.site, c.callee_id}));
    }
    for (const auto& c : idx.callers_of(fn.id)) {
      EXPECT_TRUE(idx.call_graph().edges.count({c.caller_id, c.site, fn.id}));
    }
  }
}

TEST(CParser, SingleFunctionCheck) {
  EXPECT_TRUE(check_single_function("void f(void) { int a = 1; }").ok);
  EXPECT_FALSE(check_single_function("void f(void) { int a = 1; } void g(void) {}").ok);
  EXPECT_FALSE(check_single_function("void f(void) { int a = ; }").ok);
}
