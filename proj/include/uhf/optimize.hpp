#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace uhf {

using Objective = std::function<double(const std::vector<double>&)>;

struct NelderMeadOptions {
  double initial_step = 0.5;
  double tolerance = 1e-8;  // simplex diameter (max-norm distance to the best vertex)
  std::size_t max_evaluations = 20000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  double diameter = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Minimizes `f` with the classic simplex method
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options = {});

}  // namespace uhf
