#include "program_gen.hpp"

#include <random>
#include <sstream>
#include <vector>

namespace progen {

namespace {

const std::vector<std::string> kInts = {"a", "b", "x", "y"};
const std::vector<std::string> kPtrs = {"p", "q"};

class Gen {
 public:
  Gen(std::uint32_t seed, std::size_t budget) : rng_(seed), budget_(budget) {}

  Program run() {
    Program prog;
    const int nfn = 2 + pick(2);
    std::ostringstream out;
    // callees are defined first so every call resolves
    for (int f = nfn - 1; f >= 0; --f) {
      fn_ = f;
      nfn_ = nfn;
      out << "int f" << f << "(int x, int y) {\n";
      // keep room for the fixed lines of this and the remaining functions
      stop_at_ = 5 * static_cast<std::size_t>(f) + 1;
      const std::size_t body = (budget_ - 5 * static_cast<std::size_t>(f + 1)) / static_cast<std::size_t>(f + 1);
      line(out, 1, "int a = x;");
      line(out, 1, "int b = y;");
      line(out, 1, std::string("int *p = &") + (pick(2) ? "a" : "b") + ";");
      line(out, 1, "int *q = p;");
      block(out, 1, body, 0);
      line(out, 1, "return " + any_int() + ";");
      out << "}\n\n";
    }
    prog.source = out.str();
    prog.statements = used_;
    prog.functions = nfn;
    return prog;
  }

 private:
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  std::string any_int() { return kInts[pick(static_cast<int>(kInts.size()))]; }
  std::string any_ptr() { return kPtrs[pick(2)]; }

  void line(std::ostringstream& out, int indent, const std::string& text) {
    out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << text << "\n";
    ++used_;
    if (budget_ > 0) --budget_;
  }

  std::string call_expr() {
    const int callee = fn_ + 1 + pick(nfn_ - fn_ - 1);
    return "f" + std::to_string(callee) + "(" + any_int() + ", " + any_int() + ")";
  }

  void block(std::ostringstream& out, int indent, std::size_t n, int nesting) {
    for (std::size_t i = 0; i < n && budget_ > stop_at_ + owed_ + 1; ++i) {
      const bool can_call = fn_ + 1 < nfn_;
      int kind = pick(14);
      if (kind >= 12) kind = 5 + (kind - 12);  // favour calls
      if (nesting >= 2 && kind >= 8) kind = pick(8);
      switch (kind) {
        case 0: line(out, indent, any_int() + " = " + any_int() + " + " + any_int() + ";"); break;
        case 1: line(out, indent, any_int() + " = " + any_int() + ";"); break;
        case 2: line(out, indent, any_ptr() + " = " + (pick(2) ? any_ptr() : "&" + any_int()) + ";"); break;
        case 3: line(out, indent, "*" + any_ptr() + " = " + any_int() + ";"); break;
        case 4: line(out, indent, any_int() + " = *" + any_ptr() + ";"); break;
        case 5:
          if (can_call) {
            line(out, indent, any_int() + " = " + call_expr() + ";");
          } else {
            line(out, indent, any_int() + " = " + any_int() + " / " + any_int() + ";");
          }
          break;
        case 6:
          if (can_call) {
            line(out, indent, call_expr() + ";");
          } else {
            line(out, indent, any_int() + " += " + any_int() + ";");
          }
          break;
        case 7:
          if (nesting >= 1 && budget_ > stop_at_ + owed_ + 2 && pick(2)) {
            early_exit(out, indent);
          } else {
            line(out, indent, any_int() + " = " + any_int() + " * 2;");
          }
          break;
        case 8: {
          line(out, indent, "if (" + any_int() + " > " + any_int() + ") {");
          block(out, indent + 1, 1 + static_cast<std::size_t>(pick(2)), nesting + 1);
          if (pick(2)) {
            out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "} else {\n";
            block(out, indent + 1, 1, nesting + 1);
          }
          out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "}\n";
          break;
        }
        case 9: {
          line(out, indent, "while (" + any_int() + " < " + any_int() + ") {");
          ++loops_;
          block(out, indent + 1, 1 + static_cast<std::size_t>(pick(2)), nesting + 1);
          --loops_;
          out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "}\n";
          break;
        }
        case 10: {
          const std::string v = any_int();
          line(out, indent, "for (" + v + " = 0; " + v + " < " + any_int() + "; " + v + "++) {");
          ++loops_;
          block(out, indent + 1, 1, nesting + 1);
          --loops_;
          out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "}\n";
          break;
        }
        default: {
          out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "do {\n";
          ++owed_;
          ++loops_;
          block(out, indent + 1, 1, nesting + 1);
          --loops_;
          --owed_;
          line(out, indent, "} while (" + any_int() + " != " + any_int() + ");");
          break;
        }
      }
    }
  }

  // A guarded return, or break/continue inside a loop.
  void early_exit(std::ostringstream& out, int indent) {
    line(out, indent, "if (" + any_int() + " == " + any_int() + ") {");
    const int k = loops_ > 0 ? pick(3) : 0;
    line(out, indent + 1, k == 0 ? "return " + any_int() + ";" : k == 1 ? "break;" : "continue;");
    out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "}\n";
  }

  int loops_ = 0;
  std::mt19937 rng_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::size_t stop_at_ = 0;
  std::size_t owed_ = 0;  // closing lines of open do-while loops
  int fn_ = 0;
  int nfn_ = 0;
};

}  // namespace

Program generate(std::uint32_t seed, std::size_t max_statements) { return Gen(seed, max_statements).run(); }

std::string call_chain(int n) {
  std::ostringstream out;
  out << "int f" << n - 1 << "(int v) {\n  int r = 100 / v;\n  return r;\n}\n\n";
  for (int i = n - 2; i >= 0; --i) {
    out << "int f" << i << "(int v) {\n  int w = v + 1;\n  return f" << i + 1 << "(w);\n}\n\n";
  }
  return out.str();
}

}  // namespace progen
