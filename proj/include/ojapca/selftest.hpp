#pragma once

// Fast built-in oracle checks, run by `ojapca selftest`.

#include <ostream>
#include <string>
#include <vector>

namespace ojapca {

struct SelftestCase {
  std::string name;
  bool passed{false};
  std::string detail;
  double seconds{0};
};

std::vector<SelftestCase> run_selftest();

/// Prints one line per case; returns true when all passed.
bool report_selftest(const std::vector<SelftestCase>& cases, std::ostream& out);

}  // namespace ojapca
