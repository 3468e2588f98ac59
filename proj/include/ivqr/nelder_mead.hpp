#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace ivqr {

struct NelderMeadOptions {
  int max_evaluations = 2000;
  double x_tolerance = 1e-7;  // simplex diameter, relative to the initial step scale
  double f_tolerance = 0.0;   // spread of vertex values
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double start_value = 0.0;
  int evaluations = 0;
  bool improved = false;  // strictly below the start value
  std::vector<double> best_trace;  // best vertex value after each iteration
};

// Box-constrained Nelder-Mead. Trial points are projected onto the box
// [lower, upper]. The best vertex value never increases. When no vertex beats
// the start strictly, the start itself is returned.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& start, const Eigen::VectorXd& steps,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const NelderMeadOptions& options);

}  // namespace ivqr
