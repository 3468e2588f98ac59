#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ivqr {

// Quadrature over the quantile index q. Points lie in (0,1) and are strictly
// increasing; weights define the integrating measure (Lebesgue approximation,
// a general measure, or a single Dirac mass).
struct QuantileGrid {
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  double total_mass() const;
  void validate() const;
};

// Points i/N for i = 1..N-1, each with weight 1/N.
QuantileGrid make_uniform_grid(int n_cells);
QuantileGrid make_point_grid(double q, double weight = 1.0);
// `count` sorted Uniform(0,1) draws, each with weight 1/count.
QuantileGrid make_random_grid(int count, std::uint64_t seed);
QuantileGrid make_grid(std::vector<double> points, std::vector<double> weights);

double grid_integral(const QuantileGrid& grid, const std::function<double(double)>& f);

// Clamped B-spline basis on [lower, upper]. dimension = degree + 1 + #interior knots.
// Points outside the domain are clamped to the boundary.
class BSplineBasis {
 public:
  // Equally spaced interior knots.
  BSplineBasis(int degree, int interior_knots, double lower, double upper);
  BSplineBasis(int degree, std::vector<double> interior_knots, double lower, double upper);

  // Quadratic basis of the requested dimension; dimensions 1 and 2 fall back
  // to the constant and linear bases.
  static BSplineBasis with_dimension(int dimension, double lower, double upper);

  int degree() const { return degree_; }
  int dimension() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::vector<double>& knots() const { return knots_; }

  Eigen::VectorXd eval(double x) const;

  // Writes the degree+1 possibly nonzero values into `out` and returns the
  // index of the first of them.
  int eval_nonzero(double x, std::span<double> out) const;

 private:
  int find_span(double x) const;

  int degree_;
  double lower_;
  double upper_;
  std::vector<double> knots_;  // full clamped knot vector
};

Eigen::MatrixXd design_matrix(const BSplineBasis& basis, std::span<const double> points);

// Tensor product of marginal B-spline bases, one per column of the argument
// matrix. With a single marginal this is the marginal basis itself.
class TensorBasis {
 public:
  explicit TensorBasis(std::vector<BSplineBasis> marginals);

  // One marginal of dimension `marginal_dimension` per column, on the
  // empirical range of that column.
  static TensorBasis fit_to(const Eigen::MatrixXd& x, int marginal_dimension);

  int dimension() const;
  std::size_t arity() const { return marginals_.size(); }
  const std::vector<BSplineBasis>& marginals() const { return marginals_; }

  Eigen::VectorXd eval(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::MatrixXd design(const Eigen::MatrixXd& x) const;

 private:
  std::vector<BSplineBasis> marginals_;
};

// Moore-Penrose inverse of a symmetric PSD matrix through its eigen
// decomposition. Eigenvalues at or below tol * (largest eigenvalue) are
// treated as zero.
class SymmetricPseudoInverse {
 public:
  SymmetricPseudoInverse(Eigen::MatrixXd source, double relative_tolerance);

  const Eigen::MatrixXd& source() const { return source_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  double tolerance() const { return tolerance_; }
  int rank() const { return rank_; }
  Eigen::Index dimension() const { return inverse_.rows(); }

 private:
  Eigen::MatrixXd source_;
  Eigen::MatrixXd inverse_;
  double tolerance_;
  int rank_ = 0;
};

inline constexpr double kDefaultPinvTolerance = 1e-10;

SymmetricPseudoInverse pinv_gram(const Eigen::MatrixXd& gram, double tol = kDefaultPinvTolerance);

// v' A^- v.
double quad_form(const Eigen::VectorXd& v, const SymmetricPseudoInverse& pinv);

}  // namespace ivqr
