#pragma once

// Random small C programs for checking the slicer against the oracle: a chain
// of functions with assignments, pointer copies, branches, loops and calls.

#include <cstdint>
#include <string>

namespace progen {

struct Program {
  std::string source;
  std::size_t statements = 0;  // generated statements, entries excluded
  int functions = 0;
};

/// max_statements bounds the total across all functions.
Program generate(std::uint32_t seed, std::size_t max_statements = 30);

/// A straight chain f0 -> f1 -> ... -> f(n-1); the leaf divides by its parameter.
std::string call_chain(int n);

}  // namespace progen
