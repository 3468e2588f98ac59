#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ivqr/estimation.hpp"
#include "ivqr/moments.hpp"
#include "ivqr/numerics.hpp"

namespace ivqr {

enum class CriticalSource { asymptotic_normal, bootstrap };

std::string to_string(CriticalSource source);

struct TestResult {
  std::string name;
  double raw = 0.0;
  double standardized = 0.0;
  double alpha = 0.05;
  double critical_value = 0.0;
  bool reject = false;
  CriticalSource critical_source = CriticalSource::asymptotic_normal;
  int k_n = 0;
  int l_n = 0;
  int m_n = 0;  // instrument dimension used for the standardization
  QuantileGrid grid;
};

// (1 - alpha) quantile of the standard normal; -inf for alpha >= 1.
double normal_critical_value(double alpha);

TestResult decide(std::string name, double raw, double standardized, double alpha, double critical_value,
                  CriticalSource source);

// Quadratic form of the instrument moments at one quantile.
double statistic_Sn_at(const Eigen::VectorXd& y, const Eigen::VectorXd& phi, double q,
                       const InstrumentSpace& instruments);
double statistic_Sn_at(const Sample& sample, const IvqrProblem& problem, const SieveFit& fit,
                       const InstrumentSpace& instruments);

// Weighted sum of statistic_Sn_at over the grid; phis[g] holds the fitted
// structural values at grid point g.
double statistic_Sn(const Sample& sample, std::span<const Eigen::VectorXd> phis, const QuantileGrid& grid,
                    const InstrumentSpace& instruments);
double statistic_Sn(const Sample& sample, const IvqrProblem& problem, std::span<const SieveFit> fits,
                    const QuantileGrid& grid, const InstrumentSpace& instruments);

// 3 sqrt(5/m) (S - m/6).
double standardize_Sn(double raw, int m_n);
double unstandardize_Sn(double standardized, int m_n);
// (2m)^{-1/2} (S/(q(1-q)) - m).
double standardize_Sn_at(double raw, double q, int m_n);
double unstandardize_Sn_at(double standardized, double q, int m_n);

// Centering and scaling integrals of a quantile measure:
// mean = sum_g mu_g q_g (1 - q_g), cov = sum_{g,h} mu_g mu_h (min(q_g,q_h) - q_g q_h)^2.
struct MeasureConstants {
  double mean = 0.0;
  double covariance = 0.0;
};
MeasureConstants measure_constants(const QuantileGrid& measure);
double standardize_measure(double raw, const QuantileGrid& measure, int m_n);

TestResult statistic_Sn_measure(const Sample& sample, std::span<const Eigen::VectorXd> phis,
                                const QuantileGrid& measure, const InstrumentSpace& instruments, double alpha);

// Full pipelines.
TestResult spec_test(const Sample& sample, const SieveConfig& config, double alpha);
TestResult spec_test_at(const Sample& sample, double q, const SieveConfig& config, double alpha);
TestResult exog_test(const Sample& sample, double q, int k_n, int m_n, double alpha, bool include_d = true);
TestResult addit_test(const Sample& sample, double q, const SieveConfig& config, double alpha);

// Series estimate of w -> P(Y <= phi(Z) | W = w) - q on a grid of instrument
// values, and its minimum over that grid.
Eigen::VectorXd series_curve(const Eigen::VectorXd& residuals, const InstrumentSpace& instruments,
                             const Eigen::MatrixXd& w_grid);
double deviation_diagnostic(const Sample& sample, const Eigen::VectorXd& phi, double q,
                            const InstrumentSpace& instruments, const Eigen::MatrixXd& w_grid);
double deviation_diagnostic(const Sample& sample, const IvqrProblem& problem, const SieveFit& fit,
                            const InstrumentSpace& instruments, const Eigen::MatrixXd& w_grid);
// `points` equally spaced values over the empirical range of a scalar W.
Eigen::MatrixXd default_w_grid(const Sample& sample, int points = 101);

}  // namespace ivqr
