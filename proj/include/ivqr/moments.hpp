#pragma once

#include <Eigen/Dense>

#include "ivqr/numerics.hpp"

namespace ivqr {

// Observed data. `d` holds optional exogenous linear covariates (zero columns
// when absent).
struct Sample {
  Eigen::VectorXd y;
  Eigen::MatrixXd z;
  Eigen::MatrixXd w;
  Eigen::MatrixXd d;

  Eigen::Index size() const { return y.size(); }
  bool has_d() const { return d.cols() > 0; }
  void validate() const;
  Sample subset(const std::vector<Eigen::Index>& rows) const;
};

void check_quantile(double q);

// Entry i is 1{y_i <= phi_i} - q.
Eigen::VectorXd indicator_residuals(const Eigen::VectorXd& y, const Eigen::VectorXd& phi, double q);
Eigen::VectorXd indicator_residuals(const Sample& sample, const Eigen::VectorXd& phi, double q);

// Raw (unnormalized) sum of residual-weighted instrument basis rows.
struct MomentVector {
  Eigen::VectorXd entries;
  double q = 0.0;
};

MomentVector moment_vector(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& design, double q = 0.0);

// Instrument basis evaluated on the sample together with the pseudo-inverse
// of its Gram matrix. The Gram matrix is scaled by 1/n before inversion;
// quad() undoes the scaling so it returns v'(W'W)^- v exactly.
class InstrumentSpace {
 public:
  // `linear` columns (may be empty) are appended to the basis design.
  InstrumentSpace(TensorBasis basis, const Eigen::MatrixXd& w, const Eigen::MatrixXd& linear = Eigen::MatrixXd(),
                  double tol = kDefaultPinvTolerance);
  static InstrumentSpace fit_to(const Eigen::MatrixXd& w, int marginal_dimension,
                                double tol = kDefaultPinvTolerance);

  const TensorBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& design() const { return design_; }
  const SymmetricPseudoInverse& scaled_pinv() const { return pinv_; }
  int dimension() const { return static_cast<int>(design_.cols()); }
  Eigen::Index rows() const { return design_.rows(); }

  double quad(const Eigen::VectorXd& moment) const;
  // (W'W)^- W' r: coefficients of the series regression of r on the basis.
  Eigen::VectorXd series_coefficients(const Eigen::VectorXd& residuals) const;

 private:
  TensorBasis basis_;
  Eigen::MatrixXd design_;
  SymmetricPseudoInverse pinv_;
};

// Minimum-distance criterion r' W (W'W)^- W' r with r the indicator residuals.
double criterion(const Sample& sample, const Eigen::VectorXd& phi, double q, const InstrumentSpace& space);
double criterion(const Sample& sample, const Eigen::VectorXd& phi, double q, const Eigen::MatrixXd& design,
                 const SymmetricPseudoInverse& gram_pinv);

// Series least-squares estimate of w -> E[1{Y <= phi(Z)} - q | W = w], as
// coefficients on the instrument basis.
Eigen::VectorXd series_That(const Sample& sample, const Eigen::VectorXd& phi, double q,
                            const InstrumentSpace& space);
Eigen::VectorXd series_That(const Sample& sample, const Eigen::VectorXd& phi, double q,
                            const BSplineBasis& basis);

}  // namespace ivqr
