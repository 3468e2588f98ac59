#include "ivqr/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ivqr/parallel.hpp"
#include "ivqr/random.hpp"

namespace ivqr {

void BootstrapConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("bootstrap: need at least one replication");
  if (!(sigma_eps > 0.0) || !std::isfinite(sigma_eps))
    throw std::invalid_argument("bootstrap: sigma_eps must be finite and positive");
}

Eigen::VectorXd draw_weights(Eigen::Index n, const BootstrapConfig& config, int replicate) {
  if (n < 1) throw std::invalid_argument("draw_weights: n must be >= 1");
  auto engine = make_engine(config.seed, 0xB007ULL + static_cast<std::uint64_t>(replicate));
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = 1.0 + config.sigma_eps * standard_normal(engine);
  return w;
}

double statistic_Sn_star(const IvqrProblem& problem, const InstrumentSpace& instruments,
                         std::span<const SieveFit> fits, const QuantileGrid& grid, const Eigen::VectorXd& weights,
                         const OptimizerSettings& opt) {
  grid.validate();
  if (fits.size() != grid.size()) throw std::invalid_argument("statistic_Sn_star: one fit per grid point required");
  if (weights.size() != problem.size()) throw std::invalid_argument("statistic_Sn_star: weight length");
  const auto& y = problem.y();
  double total = 0.0;
  Eigen::VectorXd r(y.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double q = grid.points[g];
    const auto refit = refit_from(problem, q, fits[g].coefficients, opt, &weights);
    const Eigen::VectorXd phi = problem.phi(refit.coefficients);
    for (Eigen::Index i = 0; i < y.size(); ++i) r[i] = weights[i] * ((y[i] <= phi[i] ? 1.0 : 0.0) - q);
    total += grid.weights[g] * instruments.quad(instruments.design().transpose() * r);
  }
  return total;
}

double statistic_Sn_star(const Sample& sample, const Eigen::VectorXd& weights, const SieveConfig& config) {
  config.validate();
  const IvqrProblem problem(sample, config);
  const auto fits = fit_ivqr_path(problem, config.grid, config.optimizer);
  const auto instruments = make_instrument_space(sample, config.m_n, config.include_d_linear);
  return statistic_Sn_star(problem, instruments, fits, config.grid, weights, config.optimizer);
}

double standardize_star(double raw, int m_n, double sigma_eps) {
  if (m_n < 1) throw std::invalid_argument("standardize_star: m_n must be >= 1");
  const double inflate = sigma_eps * sigma_eps + 1.0;
  return 3.0 * std::sqrt(5.0 / (m_n * inflate)) * (raw - m_n * inflate / 6.0);
}

double empirical_upper_quantile(std::vector<double> draws, double alpha, bool* few_draws) {
  if (draws.empty()) throw std::invalid_argument("empirical quantile of an empty set");
  std::sort(draws.begin(), draws.end());
  const double b = static_cast<double>(draws.size());
  const bool few = b * alpha < 1.0;
  if (few_draws) *few_draws = few;
  if (few) return draws.back();
  const auto rank = static_cast<std::size_t>(std::ceil(b * (1.0 - alpha) - 1e-9));
  return draws[std::clamp<std::size_t>(rank, 1, draws.size()) - 1];
}

BootstrapDistribution bootstrap_critical_value(const IvqrProblem& problem, const InstrumentSpace& instruments,
                                               std::span<const SieveFit> fits, const SieveConfig& config,
                                               const BootstrapConfig& boot, double alpha) {
  boot.validate();
  BootstrapDistribution dist;
  dist.standardized.assign(static_cast<std::size_t>(boot.replications), 0.0);
  const int m = instruments.dimension();
  parallel_for(dist.standardized.size(), [&](std::size_t b) {
    const auto w = draw_weights(problem.size(), boot, static_cast<int>(b));
    const double raw = statistic_Sn_star(problem, instruments, fits, config.grid, w, config.optimizer);
    dist.standardized[b] = standardize_star(raw, m, boot.sigma_eps);
  });
  dist.critical_value = empirical_upper_quantile(dist.standardized, alpha, &dist.few_draws);
  return dist;
}

BootstrapDistribution bootstrap_critical_value(const Sample& sample, const SieveConfig& config,
                                               const BootstrapConfig& boot, double alpha) {
  config.validate();
  const IvqrProblem problem(sample, config);
  const auto fits = fit_ivqr_path(problem, config.grid, config.optimizer);
  const auto instruments = make_instrument_space(sample, config.m_n, config.include_d_linear);
  return bootstrap_critical_value(problem, instruments, fits, config, boot, alpha);
}

BootstrapOutcome bootstrap_test(const Sample& sample, const SieveConfig& config, const BootstrapConfig& boot,
                                double alpha) {
  config.validate();
  const IvqrProblem problem(sample, config);
  const auto fits = fit_ivqr_path(problem, config.grid, config.optimizer);
  const auto instruments = make_instrument_space(sample, config.m_n, config.include_d_linear);
  const double raw = statistic_Sn(sample, problem, fits, config.grid, instruments);
  const int m = instruments.dimension();
  BootstrapOutcome out;
  out.distribution = bootstrap_critical_value(problem, instruments, fits, config, boot, alpha);
  out.result = decide("specification-bootstrap", raw, standardize_Sn(raw, m), alpha,
                      out.distribution.critical_value, CriticalSource::bootstrap);
  out.result.k_n = config.k_n;
  out.result.l_n = config.l_n;
  out.result.m_n = m;
  out.result.grid = config.grid;
  return out;
}

}  // namespace ivqr
