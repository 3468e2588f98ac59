#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ivqr/estimation.hpp"
#include "ivqr/statistics.hpp"

namespace ivqr {

enum class TestKind { specification, specification_at, exogeneity };

struct SelectionCell {
  int k_n = 0;
  int m_n = 0;
  double statistic = 0.0;  // standardized
};

struct SelectionResult {
  int chosen_k = 0;
  int chosen_l = 0;
  int chosen_m = 0;
  double statistic_at_choice = 0.0;
  std::vector<SelectionCell> table;
  TestResult decision;
};

// Largest k with k < n^{1/4} and largest m with m < n^{1/2}.
int max_admissible_k(Eigen::Index n);
int max_admissible_m(Eigen::Index n);

// Cells (k, m) from the candidates with k < n^{1/4} and k^2 <= m < n^{1/2}.
// Throws naming the first constraint that leaves nothing admissible.
std::vector<SelectionCell> admissible_lattice(Eigen::Index n, std::span<const int> ks, std::span<const int> ms);

// min over k of max over m. Ties go to the smaller k, then the smaller m.
SelectionResult reduce_minmax(std::vector<SelectionCell> table);

SelectionResult minmax_select(const Sample& sample, TestKind kind, std::span<const int> ks, std::span<const int> ms,
                              double alpha, const SieveConfig& base, double q = 0.5);

struct IllPosednessDiagnostic {
  Eigen::VectorXd singular_values;  // ascending, length k_n
  bool degenerate = false;          // no density mass picked up by the finite differences
};

// Singular values of the finite-difference derivative of the empirical moment
// map at the fit, expressed in orthonormalized Z and W bases. W uses a basis of
// dimension w_dimension (k_n when 0).
IllPosednessDiagnostic illposedness_diag(const Sample& sample, const SieveFit& fit, int k_n,
                                         int w_dimension = 0);

}  // namespace ivqr
