#include "ivqr/simulation.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "ivqr/parallel.hpp"
#include "ivqr/random.hpp"

namespace ivqr {

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

bool has_j(Design d) { return d == Design::alt_rho || d == Design::nonmono_alt1 || d == Design::nonmono_alt2; }

bool is_monotonicity(Design d) {
  return d == Design::nonmono_null || d == Design::nonmono_alt1 || d == Design::nonmono_alt2;
}

bool is_additive(Design d) { return d == Design::additive_null || d == Design::additive_interaction; }

}  // namespace

void DgpSpec::validate() const {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw std::invalid_argument("zeta must lie in [0,1]");
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0,1]");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (design == Design::alt_rho && (j < 1 || j > 4)) throw std::invalid_argument("alt_rho index must be 1..4");
  if ((design == Design::nonmono_alt1 || design == Design::nonmono_alt2) && (j < 1 || j > 2))
    throw std::invalid_argument("monotonicity alternative index must be 1 or 2");
}

std::string DgpSpec::name() const {
  switch (design) {
    case Design::null_41: return "null";
    case Design::alt_rho: return "alt_rho" + std::to_string(j);
    case Design::nonmono_null: return "nonmono_null";
    case Design::nonmono_alt1: return "nonmono_alt1_" + std::to_string(j);
    case Design::nonmono_alt2: return "nonmono_alt2_" + std::to_string(j);
    case Design::exog_42: return "exog";
    case Design::additive_null: return "additive_null";
    case Design::additive_interaction: return "additive_interaction";
    case Design::invalid_instrument: return "invalid_instrument";
  }
  return "unknown";
}

DgpSpec DgpSpec::make(Design design, int j, Eigen::Index n, std::uint64_t seed) {
  DgpSpec s;
  s.design = design;
  s.j = has_j(design) ? j : 1;
  s.n = n;
  s.seed = seed;
  s.theta = is_monotonicity(design) ? 0.8 : design == Design::exog_42 ? 0.0 : 0.7;
  s.validate();
  return s;
}

DgpSpec DgpSpec::parse(const std::string& raw, Eigen::Index n, std::uint64_t seed) {
  const auto starts = [&](const char* p) { return raw.rfind(p, 0) == 0; };
  const auto tail_int = [&](std::size_t from) -> int {
    if (from >= raw.size()) throw std::invalid_argument("design '" + raw + "' needs an index");
    std::size_t used = 0;
    const int v = std::stoi(raw.substr(from), &used);
    if (from + used != raw.size()) throw std::invalid_argument("bad design index in '" + raw + "'");
    return v;
  };
  if (raw == "null" || raw == "null_41") return make(Design::null_41, 1, n, seed);
  if (raw == "nonmono_null") return make(Design::nonmono_null, 1, n, seed);
  if (raw == "exog" || raw == "exog_42") return make(Design::exog_42, 1, n, seed);
  if (raw == "additive_null") return make(Design::additive_null, 1, n, seed);
  if (raw == "additive_interaction") return make(Design::additive_interaction, 1, n, seed);
  if (raw == "invalid_instrument") return make(Design::invalid_instrument, 1, n, seed);
  if (starts("alt_rho")) return make(Design::alt_rho, tail_int(7 + (raw.size() > 7 && raw[7] == '_')), n, seed);
  if (starts("nonmono_alt1_")) return make(Design::nonmono_alt1, tail_int(13), n, seed);
  if (starts("nonmono_alt2_")) return make(Design::nonmono_alt2, tail_int(13), n, seed);
  throw std::invalid_argument("unknown design '" + raw + "'");
}

double phi_series(double z) {
  double s = 0.0;
  for (int j = 100; j >= 1; --j) {
    const double jj = static_cast<double>(j);
    s += std::cos(jj * std::numbers::pi * z) / (jj * jj * jj * jj);
  }
  return s;
}

double phie_series(double z) {
  double s = 0.0;
  for (int j = 100; j >= 1; --j) {
    const double jj = static_cast<double>(j);
    s += (j % 2 == 1 ? 1.0 : -1.0) * std::sin(jj * std::numbers::pi * z) / (jj * jj);
  }
  return s;
}

double rho_shift(int j, double z) {
  if (j == 1 || j == 2) return 10.0 * j * (z <= 0.25 ? z : z - 1.0);
  if (j == 3 || j == 4) {
    const double c = j == 3 ? 0.1 : 0.05;
    return (0.5 - c <= z && z < 0.5 + c) ? z / (2.0 * c) : 0.0;
  }
  throw std::invalid_argument("rho_shift: j must be 1..4");
}

Sample gen_sample(const DgpSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.n;
  const bool additive = is_additive(spec.design);
  const int dz = additive ? 2 : 1;
  Engine rng = make_engine(spec.seed, 0x5A3B1E);
  Sample s;
  s.y.resize(n);
  s.z.resize(n, dz);
  s.w.resize(n, dz);
  s.d.resize(n, 0);
  const double zeta = spec.zeta, th = spec.theta;
  const double rz = std::sqrt(1.0 - zeta * zeta), rt = std::sqrt(1.0 - th * th);
  for (Eigen::Index i = 0; i < n; ++i) {
    double eps_sum = 0.0;
    for (int c = 0; c < dz; ++c) {
      const double omega = standard_normal(rng);
      const double eps = standard_normal(rng);
      s.z(i, c) = norm_cdf(zeta * omega + rz * eps);
      s.w(i, c) = norm_cdf(omega);
      eps_sum += eps;
    }
    const double eps = additive ? eps_sum / std::numbers::sqrt2 : eps_sum;
    const double u = th * eps + rt * standard_normal(rng);
    const double z = s.z(i, 0);
    double y = 0.0;
    switch (spec.design) {
      case Design::null_41: y = phi_series(z) * (1.0 + u / 6.0) + u / 2.0; break;
      case Design::alt_rho: {
        const double f = phi_series(z) + rho_shift(spec.j, z);
        y = f * (1.0 + u / 6.0) + u / 2.0;
        break;
      }
      case Design::nonmono_null: {
        const double v = norm_cdf(u / 4.0);
        y = norm_cdf(z + v) * v * v;
        break;
      }
      case Design::nonmono_alt1: {
        const double v = norm_cdf(u / 4.0);
        y = norm_cdf(z + v) * std::pow(v - 0.5, 2 * spec.j);
        break;
      }
      case Design::nonmono_alt2: {
        const double v = norm_cdf(u / 4.0);
        y = norm_cdf(z + v) * std::pow(norm_quantile(v), 2 * spec.j);
        break;
      }
      case Design::exog_42: y = phie_series(z) + u / 2.0; break;
      case Design::additive_null:
      case Design::additive_interaction: {
        const double z2 = s.z(i, 1);
        double f = phi_series(z) + phi_series(z2);
        if (spec.design == Design::additive_interaction) f += 2.0 * z * z2;
        y = f * (1.0 + u / 15.0) + u / 5.0;
        break;
      }
      case Design::invalid_instrument: {
        const double v = u - 0.6 * s.w(i, 0) - 0.3;
        y = phi_series(z) * (1.0 + v / 6.0) + v / 2.0;
        break;
      }
    }
    s.y[i] = y;
  }
  return s;
}

double true_structural(const DgpSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& z, double q) {
  check_quantile(q);
  const double t = norm_quantile(q);
  const auto need = [&](Eigen::Index cols) {
    if (z.size() < cols) throw std::invalid_argument("true_structural: z has too few entries");
  };
  switch (spec.design) {
    case Design::null_41:
    case Design::invalid_instrument:
      need(1);
      return phi_series(z[0]) * (1.0 + t / 6.0) + t / 2.0;
    case Design::alt_rho:
      need(1);
      return (phi_series(z[0]) + rho_shift(spec.j, z[0])) * (1.0 + t / 6.0) + t / 2.0;
    case Design::exog_42:
      need(1);
      return phie_series(z[0]) + t / 2.0;
    case Design::nonmono_null: {
      need(1);
      const double v = norm_cdf(t / 4.0);
      return norm_cdf(z[0] + v) * v * v;
    }
    case Design::additive_null:
      need(2);
      return (phi_series(z[0]) + phi_series(z[1])) * (1.0 + t / 15.0) + t / 5.0;
    default:
      throw std::invalid_argument("true_structural: no structural function for design " + spec.name());
  }
}

double true_structural(const DgpSpec& spec, double z, double q) {
  Eigen::RowVectorXd row(1);
  row[0] = z;
  return true_structural(spec, Eigen::Ref<const Eigen::RowVectorXd>(row), q);
}

Eigen::VectorXd true_structural_values(const DgpSpec& spec, const Eigen::MatrixXd& z, double q) {
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out[i] = true_structural(spec, Eigen::Ref<const Eigen::RowVectorXd>(z.row(i)), q);
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(TestPlan::Kind kind) {
  switch (kind) {
    case TestPlan::Kind::specification: return "specification";
    case TestPlan::Kind::specification_at: return "specification-q";
    case TestPlan::Kind::exogeneity: return "exogeneity";
    case TestPlan::Kind::additivity: return "additivity";
    case TestPlan::Kind::bootstrap: return "specification-bootstrap";
    case TestPlan::Kind::true_phi: return "true-phi";
    case TestPlan::Kind::true_phi_at: return "true-phi-q";
  }
  return "unknown";
}

TestPlan::Kind parse_plan_kind(const std::string& name) {
  for (auto k : {TestPlan::Kind::specification, TestPlan::Kind::specification_at, TestPlan::Kind::exogeneity,
                 TestPlan::Kind::additivity, TestPlan::Kind::bootstrap, TestPlan::Kind::true_phi,
                 TestPlan::Kind::true_phi_at})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown test kind '" + name + "'");
}

TestResult run_plan(const Sample& sample, const DgpSpec& spec, const TestPlan& plan, double alpha,
                    std::uint64_t replicate) {
  const auto& cfg = plan.config;
  switch (plan.kind) {
    case TestPlan::Kind::specification: return spec_test(sample, cfg, alpha);
    case TestPlan::Kind::specification_at: return spec_test_at(sample, plan.q, cfg, alpha);
    case TestPlan::Kind::exogeneity: return exog_test(sample, plan.q, cfg.k_n, cfg.m_n, alpha, cfg.include_d_linear);
    case TestPlan::Kind::additivity: {
      SieveConfig c = cfg;
      if (c.additive_groups.empty())
        for (Eigen::Index g = 0; g < sample.z.cols(); ++g) c.additive_groups.push_back({static_cast<int>(g)});
      return addit_test(sample, plan.q, c, alpha);
    }
    case TestPlan::Kind::bootstrap: {
      BootstrapConfig boot = plan.bootstrap;
      boot.seed = mix_seed(plan.bootstrap.seed, replicate);
      return bootstrap_test(sample, cfg, boot, alpha).result;
    }
    case TestPlan::Kind::true_phi: {
      const auto instruments = make_instrument_space(sample, cfg.m_n, cfg.include_d_linear);
      std::vector<Eigen::VectorXd> phis;
      for (double q : cfg.grid.points) phis.push_back(true_structural_values(spec, sample.z, q));
      const double raw = statistic_Sn(sample, phis, cfg.grid, instruments);
      auto r = decide("true-phi", raw, standardize_Sn(raw, instruments.dimension()), alpha,
                      normal_critical_value(alpha), CriticalSource::asymptotic_normal);
      r.m_n = instruments.dimension();
      r.grid = cfg.grid;
      return r;
    }
    case TestPlan::Kind::true_phi_at: {
      const auto instruments = make_instrument_space(sample, cfg.m_n, cfg.include_d_linear);
      const Eigen::VectorXd phi = true_structural_values(spec, sample.z, plan.q);
      const double raw = statistic_Sn_at(sample.y, phi, plan.q, instruments);
      auto r = decide("true-phi-q", raw, standardize_Sn_at(raw, plan.q, instruments.dimension()), alpha,
                      normal_critical_value(alpha), CriticalSource::asymptotic_normal);
      r.m_n = instruments.dimension();
      r.grid = make_point_grid(plan.q);
      return r;
    }
  }
  throw std::logic_error("run_plan: unhandled kind");
}

MonteCarloReport run_monte_carlo(const DgpSpec& spec, const TestPlan& plan, int replications, double alpha) {
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  spec.validate();
  plan.config.validate();
  const auto start = std::chrono::steady_clock::now();
  MonteCarloReport rep;
  rep.spec = spec;
  rep.plan = plan;
  rep.replications = replications;
  rep.alpha = alpha;
  rep.standardized.assign(replications, 0.0);
  rep.rejected.assign(replications, 0);
  parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
    DgpSpec s = spec;
    s.seed = mix_seed(spec.seed, r);
    const Sample sample = gen_sample(s);
    const TestResult t = run_plan(sample, spec, plan, alpha, r);
    rep.standardized[r] = t.standardized;
    rep.rejected[r] = t.reject ? 1 : 0;
  });
  for (char c : rep.rejected) rep.rejections += c;
  rep.frequency = static_cast<double>(rep.rejections) / replications;
  rep.standard_error = std::sqrt(rep.frequency * (1.0 - rep.frequency) / replications);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace ivqr
