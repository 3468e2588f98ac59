#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ivqr/bootstrap.hpp"
#include "ivqr/estimation.hpp"
#include "ivqr/moments.hpp"
#include "ivqr/statistics.hpp"

namespace ivqr {

enum class Design {
  null_41,
  alt_rho,
  nonmono_null,
  nonmono_alt1,
  nonmono_alt2,
  exog_42,
  additive_null,
  additive_interaction,
  invalid_instrument,
};

struct DgpSpec {
  Design design = Design::null_41;
  int j = 1;           // alternative index for alt_rho (1..4) and nonmono alternatives (1..2)
  double zeta = 0.7;   // instrument strength
  double theta = 0.7;  // correlation of V with the first-stage error
  Eigen::Index n = 500;
  std::uint64_t seed = 1;

  void validate() const;
  std::string name() const;

  // theta takes the design's default (0.7, 0.8 for monotonicity designs, 0 for exog_42).
  static DgpSpec make(Design design, int j, Eigen::Index n, std::uint64_t seed = 1);
  // Names such as "null", "alt_rho4", "nonmono_alt1_2", "exog", "additive_null".
  static DgpSpec parse(const std::string& name, Eigen::Index n, std::uint64_t seed = 1);
};

// 100-term truncations of sum j^-4 cos(j pi z) and sum (-1)^{j+1} j^-2 sin(j pi z).
double phi_series(double z);
double phie_series(double z);
double rho_shift(int j, double z);

Sample gen_sample(const DgpSpec& spec);

// phi(z, q) solving P(Y <= phi(Z, q) | W) = q. z has one entry, two for the additive designs.
double true_structural(const DgpSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& z, double q);
double true_structural(const DgpSpec& spec, double z, double q);
Eigen::VectorXd true_structural_values(const DgpSpec& spec, const Eigen::MatrixXd& z, double q);

struct TestPlan {
  // true_phi and true_phi_at evaluate the statistic at the known structural function.
  enum class Kind { specification, specification_at, exogeneity, additivity, bootstrap, true_phi, true_phi_at };
  Kind kind = Kind::specification;
  SieveConfig config;
  double q = 0.5;
  BootstrapConfig bootstrap;
};

std::string to_string(TestPlan::Kind kind);
TestPlan::Kind parse_plan_kind(const std::string& name);

struct MonteCarloReport {
  DgpSpec spec;
  TestPlan plan;
  int replications = 0;
  double alpha = 0.05;
  int rejections = 0;
  double frequency = 0.0;
  double standard_error = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> standardized;  // per replication
  std::vector<char> rejected;        // per replication
};

// Runs the plan on one sample; used by the Monte Carlo driver.
TestResult run_plan(const Sample& sample, const DgpSpec& spec, const TestPlan& plan, double alpha,
                    std::uint64_t replicate);

// Replication r uses the sample seed mix_seed(spec.seed, r).
MonteCarloReport run_monte_carlo(const DgpSpec& spec, const TestPlan& plan, int replications, double alpha);

}  // namespace ivqr
