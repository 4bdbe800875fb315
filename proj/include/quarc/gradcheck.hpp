#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "quarc/autodiff.hpp"

namespace quarc {

struct BlockError {
  std::string name;
  std::size_t scalars = 0;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;

  double max_rel_err() const;
  bool passed(double tol) const { return max_rel_err() < tol; }
};

// Builds a scalar loss on a fresh tape over the parameter set.
using LossFn = std::function<NodeId(Tape&)>;

// Relative error |a − n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct FdOptions {
  double step = 1e-5;
  // Per parameter, check at most this many scalars (a seeded subset); 0
  // checks all of them.
  std::size_t max_scalars = 0;
  std::uint64_t seed = 0;
};

// Compares the analytic gradient of every trainable parameter scalar with
// the central difference (L(θ+h) − L(θ−h)) / 2h, h = step·max(1, |θ|).
// Parameters are restored afterwards. One report entry per parameter.
GradCheckReport finite_diff_check(ParameterSet& params, const LossFn& loss, const FdOptions& opts = {});

}  // namespace quarc
