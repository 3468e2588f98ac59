#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ivqr/moments.hpp"
#include "ivqr/numerics.hpp"

namespace ivqr {

struct OptimizerSettings {
  int restarts = 5;                 // random starts on top of the check-function start
  int max_evaluations = 2000;       // per start
  int polish_evaluations = 400;     // per polishing round
  int max_polish_rounds = 20;
  double tolerance = 1e-7;          // simplex diameter relative to the initial step
  double step_fraction = 0.25;      // initial simplex step, in units of sd(Y)
  double bound_scale = 10.0;        // |coef| <= bound_scale * range(Y)
  std::uint64_t seed = 20170419;

  void validate() const;
};

// Dimensions are per coordinate: a d-variate block uses the tensor product of
// d marginal bases. For scalar Z and W they are the basis dimensions.
struct SieveConfig {
  int k_n = 4;
  int l_n = 8;
  int m_n = 20;
  QuantileGrid grid = make_uniform_grid(20);
  OptimizerSettings optimizer;
  std::vector<std::vector<int>> additive_groups;  // empty: unrestricted
  bool include_d_linear = true;

  void validate() const;
  static SieveConfig with_dims(int k_n, int m_n);  // l_n = 2 k_n
};

struct SieveFit {
  double q = 0.5;
  Eigen::VectorXd coefficients;
  double criterion_value = 0.0;
  double start_criterion = 0.0;  // at the check-function start (IVQR) / unused (CQR)
  int evaluations = 0;
  int restarts_used = 0;
  bool improved = false;       // optimizer beat its best start
  bool rank_deficient = false;
};

// Regressor design for the structural function: a basis in Z (unrestricted
// tensor product, or a sum of per-group bases sharing one intercept) with
// optional linear covariate columns appended.
class StructuralSpace {
 public:
  static StructuralSpace unrestricted(const Sample& sample, int k_n, bool include_d);
  static StructuralSpace additive(const Sample& sample, int k_n, const std::vector<std::vector<int>>& groups,
                                  bool include_d);

  const Eigen::MatrixXd& design() const { return design_; }
  int dimension() const { return static_cast<int>(design_.cols()); }
  int basis_dimension() const { return dimension() - d_columns_; }
  int d_columns() const { return d_columns_; }
  const std::vector<std::vector<int>>& groups() const { return groups_; }

  // Rows of the design for new points; d may be empty when no covariates are used.
  Eigen::MatrixXd rows_for(const Eigen::MatrixXd& z, const Eigen::MatrixXd& d) const;
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& z, const Eigen::MatrixXd& d,
                           const Eigen::VectorXd& coefficients) const;

 private:
  StructuralSpace() = default;
  std::vector<std::vector<int>> groups_;
  std::vector<TensorBasis> bases_;
  int d_columns_ = 0;
  Eigen::MatrixXd design_;
};

// Instrument space; covariates, when used, are appended as linear columns.
InstrumentSpace make_instrument_space(const Sample& sample, int marginal_dimension, bool include_d);

// The minimum-distance problem for one sample: criterion evaluation with
// optional multiplier weights on the indicator residuals.
class IvqrProblem {
 public:
  IvqrProblem(const Sample& sample, StructuralSpace structural, InstrumentSpace instruments);
  IvqrProblem(const Sample& sample, const SieveConfig& config);

  double criterion(const Eigen::VectorXd& coefficients, double q, const Eigen::VectorXd* weights = nullptr) const;
  Eigen::VectorXd phi(const Eigen::VectorXd& coefficients) const { return structural_.design() * coefficients; }

  const StructuralSpace& structural() const { return structural_; }
  const InstrumentSpace& instruments() const { return instruments_; }
  const Eigen::VectorXd& y() const { return y_; }
  Eigen::Index size() const { return y_.size(); }

  Eigen::VectorXd steps(const OptimizerSettings& opt) const;
  Eigen::VectorXd bound(const OptimizerSettings& opt) const;

 private:
  Eigen::VectorXd y_;
  StructuralSpace structural_;
  InstrumentSpace instruments_;
  Eigen::VectorXd column_sd_;
  Eigen::VectorXd column_range_;
  double y_sd_ = 1.0;
  double y_range_ = 1.0;
};

// Sum of u (q - 1{u < 0}) over residuals.
double check_loss(const Eigen::VectorXd& residuals, double q);

// Linear check-function (quantile) regression of y on x: IRLS start followed
// by an exact vertex-exchange simplex descent.
SieveFit fit_cqr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double q);
SieveFit fit_cqr(const Sample& sample, double q, int k_n, bool include_d = true);

SieveFit fit_ivqr(const IvqrProblem& problem, double q, const OptimizerSettings& opt,
                  std::span<const Eigen::VectorXd> extra_starts = {}, const Eigen::VectorXd* weights = nullptr);
SieveFit fit_ivqr(const Sample& sample, double q, const SieveConfig& config);
SieveFit fit_ivqr_additive(const Sample& sample, double q, const SieveConfig& config);

// Polishing rounds only, starting from `start`; used for multiplier refits.
SieveFit refit_from(const IvqrProblem& problem, double q, const Eigen::VectorXd& start,
                    const OptimizerSettings& opt, const Eigen::VectorXd* weights);

// One fit per grid point, each warm-started from the previous solution.
std::vector<SieveFit> fit_ivqr_path(const IvqrProblem& problem, const QuantileGrid& grid,
                                    const OptimizerSettings& opt);
std::vector<SieveFit> fit_ivqr_path(const Sample& sample, const SieveConfig& config);

void validate_groups(const std::vector<std::vector<int>>& groups, Eigen::Index z_columns);

}  // namespace ivqr
