#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace awm {

// Full derivative verification: every dynamics primitive VJP against
// central finite differences at seeded random points away from branch
// boundaries, plus directional checks of each episode loss gradient.
struct CheckItem {
  std::string name;
  bool pass = false;
  double max_rel_err = 0.0;
  int points = 0;
};

struct CheckSuiteResult {
  bool pass = true;
  std::vector<CheckItem> items;
};

CheckSuiteResult run_gradcheck_suite(std::uint64_t seed, double primitive_tol,
                                     double episode_tol, int points);

}  // namespace awm
