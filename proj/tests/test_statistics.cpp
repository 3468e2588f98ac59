#include <doctest.h>

#include <cmath>
#include <limits>

#include "ivqr/simulation.hpp"
#include "ivqr/statistics.hpp"

using namespace ivqr;

TEST_CASE("standardization examples") {
  CHECK(standardize_Sn(20.0 / 6.0, 20) == doctest::Approx(0.0));
  CHECK(standardize_Sn(20.0 / 6.0 + std::sqrt(20.0) / (3 * std::sqrt(5.0)), 20) == doctest::Approx(1.0));
  CHECK(standardize_Sn(5.0, 20) == doctest::Approx(2.5));
  CHECK(standardize_Sn_at(0.25 * 20, 0.5, 20) == doctest::Approx(0.0));
  CHECK(standardize_Sn_at(6.0, 0.5, 20) == doctest::Approx(0.632455532).epsilon(1e-8));
  CHECK_THROWS(standardize_Sn(1.0, 0));
  CHECK_THROWS(standardize_Sn_at(1.0, 0.0, 20));
  CHECK_THROWS(standardize_Sn_at(1.0, 1.0, 20));
  for (double raw : {0.0, 1.3, 17.0}) {
    CHECK(std::abs(unstandardize_Sn(standardize_Sn(raw, 23), 23) - raw) < 1e-12);
    CHECK(std::abs(unstandardize_Sn_at(standardize_Sn_at(raw, 0.3, 23), 0.3, 23) - raw) < 1e-12);
  }
}

TEST_CASE("normal critical values and the decision rule") {
  CHECK(normal_critical_value(0.05) == doctest::Approx(1.6448536269514722));
  CHECK(normal_critical_value(1.0) == -std::numeric_limits<double>::infinity());
  const auto r = decide("x", 1, 1.7, 0.05, normal_critical_value(0.05), CriticalSource::asymptotic_normal);
  CHECK(r.reject);
  CHECK_FALSE(decide("x", 1, 1.6, 0.05, 1.6448536269514722, CriticalSource::asymptotic_normal).reject);
  CHECK(to_string(CriticalSource::bootstrap) == "bootstrap");
}

TEST_CASE("measure constants") {
  const auto dirac = measure_constants(make_point_grid(0.3));
  CHECK(dirac.mean == doctest::Approx(0.21));
  CHECK(dirac.covariance == doctest::Approx(0.21 * 0.21));
  for (double raw : {0.5, 4.2, 9.0})
    CHECK(standardize_measure(raw, make_point_grid(0.3), 20) == doctest::Approx(standardize_Sn_at(raw, 0.3, 20)));

  const auto two = measure_constants(make_grid({0.25, 0.75}, {0.5, 0.5}));
  CHECK(two.mean == doctest::Approx(0.1875));
  CHECK(two.covariance == doctest::Approx(0.01953125).epsilon(1e-14));

  const auto leb = measure_constants(make_uniform_grid(200));
  CHECK(leb.mean == doctest::Approx(1.0 / 6.0).epsilon(1e-2));
  CHECK(leb.covariance == doctest::Approx(1.0 / 90.0).epsilon(1e-2));
  for (double raw : {2.0, 3.5, 6.0})
    CHECK(std::abs(standardize_measure(raw, make_uniform_grid(200), 20) - standardize_Sn(raw, 20)) < 1e-1);
  CHECK_THROWS(measure_constants(make_grid({0.5}, {0.0})));
}

TEST_CASE("integrated statistic identities") {
  const auto spec = DgpSpec::make(Design::null_41, 1, 300, 17);
  const Sample s = gen_sample(spec);
  const auto inst = InstrumentSpace::fit_to(s.w, 10);
  const auto grid = make_uniform_grid(10);
  std::vector<Eigen::VectorXd> phis;
  double manual = 0.0;
  for (double q : grid.points) {
    phis.push_back(true_structural_values(spec, s.z, q));
    manual += grid.weights[phis.size() - 1] * statistic_Sn_at(s.y, phis.back(), q, inst);
  }
  const double total = statistic_Sn(s, phis, grid, inst);
  CHECK(std::abs(total - manual) < 1e-10);
  CHECK(total >= 0.0);
  // adding a grid point never lowers the statistic
  auto bigger = grid;
  bigger.points.insert(bigger.points.begin() + 3, 0.33);
  bigger.weights.insert(bigger.weights.begin() + 3, 0.05);
  auto bigger_phis = phis;
  bigger_phis.insert(bigger_phis.begin() + 3, true_structural_values(spec, s.z, 0.33));
  CHECK(statistic_Sn(s, bigger_phis, bigger, inst) >= total);

  const auto point = make_point_grid(0.4, 0.7);
  const std::vector<Eigen::VectorXd> one{true_structural_values(spec, s.z, 0.4)};
  CHECK(statistic_Sn(s, one, point, inst) == doctest::Approx(0.7 * statistic_Sn_at(s.y, one[0], 0.4, inst)));
  CHECK_THROWS(statistic_Sn(s, one, grid, inst));
}

TEST_CASE("balanced residuals give no signal") {
  // Four instrument cells, each holding two observations on either side of phi.
  Sample s;
  const int n = 16;
  s.y.resize(n);
  s.z.resize(n, 1);
  s.w.resize(n, 1);
  s.d.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    s.w(i, 0) = (i / 4) * 0.25 + 0.1;
    s.z(i, 0) = 0.0;
    s.y[i] = (i % 2 == 0) ? -1.0 : 1.0;
  }
  const Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  const auto inst = InstrumentSpace::fit_to(s.w, 3);
  CHECK(statistic_Sn_at(s.y, phi, 0.5, inst) < 1e-20);
  const auto res = decide("exogeneity", 0.0, standardize_Sn_at(0.0, 0.5, 3), 0.05, normal_critical_value(0.05),
                          CriticalSource::asymptotic_normal);
  CHECK_FALSE(res.reject);
}

TEST_CASE("pipelines return consistent results") {
  const auto spec = DgpSpec::make(Design::null_41, 1, 300, 23);
  const Sample s = gen_sample(spec);
  SieveConfig cfg;
  cfg.grid = make_uniform_grid(5);
  const auto r = spec_test(s, cfg, 0.05);
  CHECK(r.name == "specification");
  CHECK(r.raw >= 0.0);
  CHECK(r.reject == (r.standardized > r.critical_value));
  CHECK(r.standardized == doctest::Approx(standardize_Sn(r.raw, 20)));
  CHECK(r.k_n == 4);
  CHECK(r.l_n == 8);
  CHECK(r.m_n == 20);
  const auto rq = spec_test_at(s, 0.5, cfg, 0.05);
  CHECK(rq.name == "specification-q");
  CHECK(rq.standardized == doctest::Approx(standardize_Sn_at(rq.raw, 0.5, 20)));
  CHECK(std::isfinite(rq.standardized));
  const auto re = exog_test(s, 0.5, 4, 20, 0.05);
  CHECK(re.name == "exogeneity");
  CHECK(re.reject == (re.standardized > re.critical_value));
  CHECK(spec_test_at(s, 0.5, cfg, 1.0).reject);
  CHECK_THROWS(exog_test(s, 0.5, 5, 4, 0.05));
  CHECK_THROWS(addit_test(s, 0.5, cfg, 0.05));
}

TEST_CASE("additivity test") {
  const Sample s = gen_sample(DgpSpec::make(Design::additive_null, 1, 500, 8));
  SieveConfig cfg;
  cfg.k_n = 3;
  cfg.l_n = 4;
  cfg.m_n = 5;
  auto single = cfg;
  single.additive_groups = {{0, 1}};
  const auto a = addit_test(s, 0.5, single, 0.05);
  const auto b = spec_test_at(s, 0.5, cfg, 0.05);
  CHECK(a.name == "additivity");
  CHECK(a.raw == b.raw);
  auto groups = cfg;
  groups.additive_groups = {{0}, {0, 1}};
  CHECK_THROWS(addit_test(s, 0.5, groups, 0.05));
}

TEST_CASE("deviation diagnostic") {
  const auto spec = DgpSpec::make(Design::null_41, 1, 2000, 31);
  const Sample s = gen_sample(spec);
  const auto inst = InstrumentSpace::fit_to(s.w, 4);
  const Eigen::MatrixXd wg = default_w_grid(s);
  CHECK(wg.rows() == 101);
  CHECK(series_curve(Eigen::VectorXd::Zero(s.size()), inst, wg).isZero());
  const double dev = deviation_diagnostic(s, true_structural_values(spec, s.z, 0.5), 0.5, inst, wg);
  CHECK(std::abs(dev) < 0.08);
  CHECK_THROWS(series_curve(Eigen::VectorXd::Zero(s.size()), inst, Eigen::MatrixXd(0, 1)));

  auto bad = spec;
  bad.design = Design::invalid_instrument;
  const Sample si = gen_sample(bad);
  const auto inst_i = InstrumentSpace::fit_to(si.w, 4);
  for (double q : {0.3, 0.5, 0.7}) {
    const double d = deviation_diagnostic(si, true_structural_values(bad, si.z, q), q, inst_i, default_w_grid(si));
    MESSAGE("invalid instrument deviation at q=" << q << ": " << d);
    CHECK(d > 0.05);
  }
}
