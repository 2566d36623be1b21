#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ilpc {

struct GradCheckEntry {
  std::string component;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  std::uint64_t seed = 1;
  std::size_t trials = 10;
  double tolerance = 1e-4;
  double step = 1e-5;
  // Test hook: biases one analytic gradient so the check must fail.
  bool corrupt = false;
};

// Central finite-difference verification of every layer type plus the two
// losses. One entry per component, worst relative error over all trials and
// parameter elements.
std::vector<GradCheckEntry> run_gradient_checks(const GradCheckOptions& opt);

}  // namespace ilpc
