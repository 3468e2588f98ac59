#include "ivqr/nelder_mead.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ivqr {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& start, const Eigen::VectorXd& steps,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const NelderMeadOptions& options) {
  const Eigen::Index dim = start.size();
  if (steps.size() != dim || lower.size() != dim || upper.size() != dim)
    throw std::invalid_argument("nelder_mead: dimension mismatch");

  NelderMeadResult result;
  auto project = [&](Eigen::VectorXd x) { return x.cwiseMax(lower).cwiseMin(upper).eval(); };
  auto eval = [&](const Eigen::VectorXd& x) {
    ++result.evaluations;
    return objective(x);
  };

  const Eigen::VectorXd x0 = project(start);
  result.start_value = eval(x0);
  result.x = x0;
  result.value = result.start_value;
  if (dim == 0) return result;

  std::vector<Eigen::VectorXd> vertex(dim + 1);
  std::vector<double> value(dim + 1);
  vertex[0] = x0;
  value[0] = result.start_value;
  for (Eigen::Index j = 0; j < dim; ++j) {
    Eigen::VectorXd v = x0;
    v[j] += steps[j];
    v = project(v);
    if (v[j] == x0[j]) {  // pinned against the box; step the other way
      v[j] = x0[j] - steps[j];
      v = project(v);
    }
    vertex[j + 1] = v;
    value[j + 1] = eval(v);
  }

  const double step_scale = std::max(steps.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<int> order(dim + 1);

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  while (result.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
    const int best = order.front(), worst = order.back(), second = order[dim - 1];
    result.best_trace.push_back(value[best]);

    double diameter = 0.0;
    for (Eigen::Index j = 0; j <= dim; ++j)
      diameter = std::max(diameter, (vertex[j] - vertex[best]).cwiseAbs().maxCoeff());
    if (diameter <= options.x_tolerance * step_scale && value[worst] - value[best] <= options.f_tolerance) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index j = 0; j <= dim; ++j)
      if (j != worst) centroid += vertex[j];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = project(centroid + kReflect * (centroid - vertex[worst]));
    const double fr = eval(xr);
    if (fr < value[best]) {
      const Eigen::VectorXd xe = project(centroid + kExpand * (centroid - vertex[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        vertex[worst] = xe;
        value[worst] = fe;
      } else {
        vertex[worst] = xr;
        value[worst] = fr;
      }
      continue;
    }
    if (fr < value[second]) {
      vertex[worst] = xr;
      value[worst] = fr;
      continue;
    }
    const bool outside = fr < value[worst];
    const Eigen::VectorXd xc = outside ? project(centroid + kContract * (xr - centroid))
                                       : project(centroid + kContract * (vertex[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : value[worst])) {
      vertex[worst] = xc;
      value[worst] = fc;
      continue;
    }
    for (Eigen::Index j = 0; j <= dim; ++j) {
      if (j == best) continue;
      vertex[j] = project(vertex[best] + kShrink * (vertex[j] - vertex[best]));
      value[j] = eval(vertex[j]);
    }
  }

  int best = 0;
  for (Eigen::Index j = 1; j <= dim; ++j)
    if (value[j] < value[best]) best = static_cast<int>(j);
  result.best_trace.push_back(std::min(value[best], result.start_value));
  if (value[best] < result.start_value) {
    result.x = vertex[best];
    result.value = value[best];
    result.improved = true;
  }
  return result;
}

}  // namespace ivqr
