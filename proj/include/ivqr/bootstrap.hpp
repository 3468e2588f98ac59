#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ivqr/estimation.hpp"
#include "ivqr/statistics.hpp"

namespace ivqr {

// Multiplier weights are Normal(1, sigma_eps^2).
struct BootstrapConfig {
  int replications = 200;
  double sigma_eps = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

// Deterministic in (seed, replicate). sigma_eps = 0 gives all ones.
Eigen::VectorXd draw_weights(Eigen::Index n, const BootstrapConfig& config, int replicate);

// Multiplier statistic: each grid fit is re-polished against the weighted
// criterion, and the weighted residual moments enter the quadratic form.
double statistic_Sn_star(const IvqrProblem& problem, const InstrumentSpace& instruments,
                         std::span<const SieveFit> fits, const QuantileGrid& grid, const Eigen::VectorXd& weights,
                         const OptimizerSettings& opt);
double statistic_Sn_star(const Sample& sample, const Eigen::VectorXd& weights, const SieveConfig& config);

// 3 sqrt(5/(m(s^2+1))) (S* - m(s^2+1)/6).
double standardize_star(double raw, int m_n, double sigma_eps);

struct BootstrapDistribution {
  std::vector<double> standardized;  // one per replicate, in replicate order
  double critical_value = 0.0;
  bool few_draws = false;  // B * alpha < 1: maximum order statistic used
};

// Type-1 empirical quantile: order statistic ceil(B (1 - alpha)).
double empirical_upper_quantile(std::vector<double> draws, double alpha, bool* few_draws = nullptr);

BootstrapDistribution bootstrap_critical_value(const IvqrProblem& problem, const InstrumentSpace& instruments,
                                               std::span<const SieveFit> fits, const SieveConfig& config,
                                               const BootstrapConfig& boot, double alpha);
BootstrapDistribution bootstrap_critical_value(const Sample& sample, const SieveConfig& config,
                                               const BootstrapConfig& boot, double alpha);

struct BootstrapOutcome {
  TestResult result;
  BootstrapDistribution distribution;
};

// Rejects when 3 sqrt(5/m)(S_n - m/6) exceeds the bootstrap critical value.
BootstrapOutcome bootstrap_test(const Sample& sample, const SieveConfig& config, const BootstrapConfig& boot,
                                double alpha);

}  // namespace ivqr
