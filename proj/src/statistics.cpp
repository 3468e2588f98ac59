#include "ivqr/statistics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace ivqr {

std::string to_string(CriticalSource source) {
  return source == CriticalSource::bootstrap ? "bootstrap" : "asymptotic-normal";
}

double normal_critical_value(double alpha) {
  if (alpha >= 1.0) return -std::numeric_limits<double>::infinity();
  if (alpha <= 0.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha);
}

TestResult decide(std::string name, double raw, double standardized, double alpha, double critical_value,
                  CriticalSource source) {
  TestResult r;
  r.name = std::move(name);
  r.raw = raw;
  r.standardized = standardized;
  r.alpha = alpha;
  r.critical_value = critical_value;
  r.reject = standardized > critical_value;
  r.critical_source = source;
  return r;
}

double statistic_Sn_at(const Eigen::VectorXd& y, const Eigen::VectorXd& phi, double q,
                       const InstrumentSpace& instruments) {
  const Eigen::VectorXd r = indicator_residuals(y, phi, q);
  return instruments.quad(moment_vector(r, instruments.design(), q).entries);
}

double statistic_Sn_at(const Sample& sample, const IvqrProblem& problem, const SieveFit& fit,
                       const InstrumentSpace& instruments) {
  return statistic_Sn_at(sample.y, problem.phi(fit.coefficients), fit.q, instruments);
}

double statistic_Sn(const Sample& sample, std::span<const Eigen::VectorXd> phis, const QuantileGrid& grid,
                    const InstrumentSpace& instruments) {
  grid.validate();
  if (phis.size() != grid.size()) throw std::invalid_argument("statistic_Sn: one fit per grid point required");
  double total = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g)
    total += grid.weights[g] * statistic_Sn_at(sample.y, phis[g], grid.points[g], instruments);
  return total;
}

double statistic_Sn(const Sample& sample, const IvqrProblem& problem, std::span<const SieveFit> fits,
                    const QuantileGrid& grid, const InstrumentSpace& instruments) {
  std::vector<Eigen::VectorXd> phis;
  phis.reserve(fits.size());
  for (const auto& f : fits) phis.push_back(problem.phi(f.coefficients));
  return statistic_Sn(sample, phis, grid, instruments);
}

double standardize_Sn(double raw, int m_n) {
  if (m_n < 1) throw std::invalid_argument("standardize_Sn: m_n must be >= 1");
  return 3.0 * std::sqrt(5.0 / m_n) * (raw - m_n / 6.0);
}

double unstandardize_Sn(double standardized, int m_n) {
  if (m_n < 1) throw std::invalid_argument("unstandardize_Sn: m_n must be >= 1");
  return standardized / (3.0 * std::sqrt(5.0 / m_n)) + m_n / 6.0;
}

double standardize_Sn_at(double raw, double q, int m_n) {
  check_quantile(q);
  if (m_n < 1) throw std::invalid_argument("standardize_Sn_at: m_n must be >= 1");
  return (raw / (q * (1.0 - q)) - m_n) / std::sqrt(2.0 * m_n);
}

double unstandardize_Sn_at(double standardized, double q, int m_n) {
  check_quantile(q);
  return (standardized * std::sqrt(2.0 * m_n) + m_n) * q * (1.0 - q);
}

MeasureConstants measure_constants(const QuantileGrid& measure) {
  measure.validate();
  if (!(measure.total_mass() > 0.0)) throw std::invalid_argument("quantile measure has zero total mass");
  MeasureConstants c;
  const auto& q = measure.points;
  const auto& mu = measure.weights;
  for (std::size_t a = 0; a < q.size(); ++a) {
    c.mean += mu[a] * q[a] * (1.0 - q[a]);
    for (std::size_t b = 0; b < q.size(); ++b) {
      const double k = std::min(q[a], q[b]) - q[a] * q[b];
      c.covariance += mu[a] * mu[b] * k * k;
    }
  }
  return c;
}

double standardize_measure(double raw, const QuantileGrid& measure, int m_n) {
  const auto c = measure_constants(measure);
  return (raw - m_n * c.mean) / std::sqrt(2.0 * m_n * c.covariance);
}

TestResult statistic_Sn_measure(const Sample& sample, std::span<const Eigen::VectorXd> phis,
                                const QuantileGrid& measure, const InstrumentSpace& instruments, double alpha) {
  const double raw = statistic_Sn(sample, phis, measure, instruments);
  const int m = instruments.dimension();
  auto r = decide("measure-weighted", raw, standardize_measure(raw, measure, m), alpha,
                  normal_critical_value(alpha), CriticalSource::asymptotic_normal);
  r.m_n = m;
  r.grid = measure;
  return r;
}

// ---------------------------------------------------------------------------

TestResult spec_test(const Sample& sample, const SieveConfig& config, double alpha) {
  config.validate();
  const IvqrProblem problem(sample, config);
  const auto fits = fit_ivqr_path(problem, config.grid, config.optimizer);
  const auto instruments = make_instrument_space(sample, config.m_n, config.include_d_linear);
  const double raw = statistic_Sn(sample, problem, fits, config.grid, instruments);
  const int m = instruments.dimension();
  auto r = decide("specification", raw, standardize_Sn(raw, m), alpha, normal_critical_value(alpha),
                  CriticalSource::asymptotic_normal);
  r.k_n = config.k_n;
  r.l_n = config.l_n;
  r.m_n = m;
  r.grid = config.grid;
  return r;
}

TestResult spec_test_at(const Sample& sample, double q, const SieveConfig& config, double alpha) {
  check_quantile(q);
  config.validate();
  const IvqrProblem problem(sample, config);
  const auto fit = fit_ivqr(problem, q, config.optimizer);
  const auto instruments = make_instrument_space(sample, config.m_n, config.include_d_linear);
  const double raw = statistic_Sn_at(sample, problem, fit, instruments);
  const int m = instruments.dimension();
  auto r = decide(config.additive_groups.empty() ? "specification-q" : "additivity", raw,
                  standardize_Sn_at(raw, q, m), alpha, normal_critical_value(alpha),
                  CriticalSource::asymptotic_normal);
  r.k_n = config.k_n;
  r.l_n = config.l_n;
  r.m_n = m;
  r.grid = make_point_grid(q);
  return r;
}

TestResult exog_test(const Sample& sample, double q, int k_n, int m_n, double alpha, bool include_d) {
  check_quantile(q);
  if (!(1 <= k_n && k_n <= m_n)) throw std::invalid_argument("exog_test: need 1 <= k_n <= m_n");
  const auto structural = StructuralSpace::unrestricted(sample, k_n, include_d);
  const auto fit = fit_cqr(structural.design(), sample.y, q);
  const auto instruments = make_instrument_space(sample, m_n, include_d);
  const double raw = statistic_Sn_at(sample.y, structural.design() * fit.coefficients, q, instruments);
  const int m = instruments.dimension();
  auto r = decide("exogeneity", raw, standardize_Sn_at(raw, q, m), alpha, normal_critical_value(alpha),
                  CriticalSource::asymptotic_normal);
  r.k_n = k_n;
  r.m_n = m;
  r.grid = make_point_grid(q);
  return r;
}

TestResult addit_test(const Sample& sample, double q, const SieveConfig& config, double alpha) {
  if (sample.z.cols() < 2) throw std::invalid_argument("additivity test needs at least two Z columns");
  validate_groups(config.additive_groups, sample.z.cols());
  auto r = spec_test_at(sample, q, config, alpha);
  r.name = "additivity";
  return r;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd series_curve(const Eigen::VectorXd& residuals, const InstrumentSpace& instruments,
                             const Eigen::MatrixXd& w_grid) {
  if (w_grid.rows() == 0) throw std::invalid_argument("deviation diagnostic: empty w grid");
  if (instruments.basis().dimension() != instruments.dimension())
    throw std::invalid_argument("deviation diagnostic: instrument space must not carry linear columns");
  const Eigen::VectorXd coef = instruments.series_coefficients(residuals);
  return instruments.basis().design(w_grid) * coef;
}

double deviation_diagnostic(const Sample& sample, const Eigen::VectorXd& phi, double q,
                            const InstrumentSpace& instruments, const Eigen::MatrixXd& w_grid) {
  return series_curve(indicator_residuals(sample, phi, q), instruments, w_grid).minCoeff();
}

double deviation_diagnostic(const Sample& sample, const IvqrProblem& problem, const SieveFit& fit,
                            const InstrumentSpace& instruments, const Eigen::MatrixXd& w_grid) {
  return deviation_diagnostic(sample, problem.phi(fit.coefficients), fit.q, instruments, w_grid);
}

Eigen::MatrixXd default_w_grid(const Sample& sample, int points) {
  if (sample.w.cols() != 1) throw std::invalid_argument("default w grid assumes scalar W");
  if (points < 2) throw std::invalid_argument("w grid needs at least two points");
  const double lo = sample.w.col(0).minCoeff(), hi = sample.w.col(0).maxCoeff();
  Eigen::MatrixXd grid(points, 1);
  for (int i = 0; i < points; ++i) grid(i, 0) = lo + (hi - lo) * i / (points - 1.0);
  return grid;
}

}  // namespace ivqr
