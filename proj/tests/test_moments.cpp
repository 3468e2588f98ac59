#include <doctest.h>

#include <random>

#include "ivqr/moments.hpp"
#include "ivqr/simulation.hpp"
#include "oracles.hpp"

using namespace ivqr;

namespace {

Sample toy(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  Sample s;
  s.y.resize(n);
  s.z.resize(n, 1);
  s.w.resize(n, 1);
  s.d.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    s.w(i, 0) = u(rng);
    s.z(i, 0) = 0.5 * s.w(i, 0) + 0.5 * u(rng);
    s.y[i] = s.z(i, 0) + u(rng) - 0.5;
  }
  return s;
}

}  // namespace

TEST_CASE("indicator residuals") {
  Eigen::VectorXd y(3), phi(3);
  y << 1, 2, 3;
  phi << 2, 2, 2;
  const auto r = indicator_residuals(y, phi, 0.5);
  CHECK(r[0] == 0.5);
  CHECK(r[1] == 0.5);
  CHECK(r[2] == -0.5);
  CHECK(indicator_residuals(y, Eigen::VectorXd::Constant(3, 0.0), 0.5).isConstant(-0.5));
  CHECK(indicator_residuals(y, Eigen::VectorXd::Constant(3, 9.0), 0.25).isConstant(0.75));
  CHECK_THROWS(indicator_residuals(y, phi, 0.0));
  CHECK_THROWS(indicator_residuals(y, phi, 1.0));
  CHECK_THROWS(indicator_residuals(y, Eigen::VectorXd::Zero(2), 0.5));
}

TEST_CASE("moment vector") {
  Eigen::MatrixXd w(3, 2);
  w << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd r(3);
  r << 0.5, -0.5, 0.25;
  const auto m = moment_vector(r, w, 0.5);
  CHECK(m.entries[0] == doctest::Approx(0.5 - 1.5 + 1.25));
  CHECK(m.entries[1] == doctest::Approx(1.0 - 2.0 + 1.5));
  CHECK(moment_vector(Eigen::VectorXd::Zero(3), w).entries.isZero());
  const auto c = moment_vector(r, Eigen::MatrixXd::Ones(3, 1));
  CHECK(c.entries.size() == 1);
  CHECK(c.entries[0] == doctest::Approx(0.25));
}

TEST_CASE("criterion matches explicit formula") {
  const Sample s = toy(80, 3);
  const auto space = InstrumentSpace::fit_to(s.w, 6);
  const Eigen::VectorXd phi = s.z.col(0);
  const Eigen::VectorXd r = indicator_residuals(s, phi, 0.4);
  const Eigen::MatrixXd& w = space.design();
  const Eigen::MatrixXd g = w.transpose() * w;
  const double expected = r.dot(w * oracle::svd_pinv(g) * w.transpose() * r);
  CHECK(criterion(s, phi, 0.4, space) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(criterion(s, phi, 0.4, w, pinv_gram(g)) == doctest::Approx(expected).epsilon(1e-10));
  // a nonsingular reparametrization of the instrument basis leaves the criterion unchanged
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(w.cols(), w.cols());
  a(0, 1) = 0.7;
  a(3, 2) = -2.0;
  const Eigen::MatrixXd w2 = w * a;
  CHECK(criterion(s, phi, 0.4, w2, pinv_gram(w2.transpose() * w2)) == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("criterion special cases") {
  Sample s;
  s.y.resize(4);
  s.y << 1, 2, 3, 4;
  s.z = Eigen::MatrixXd::Zero(4, 1);
  s.w = Eigen::MatrixXd::Zero(4, 1);
  s.w.col(0) << 0.1, 0.4, 0.6, 0.9;
  s.d.resize(4, 0);
  const auto constant = InstrumentSpace::fit_to(s.w, 1);
  CHECK(criterion(s, Eigen::VectorXd::Constant(4, 2.5), 0.5, constant) == doctest::Approx(0.0));
  CHECK(constant.quad(Eigen::VectorXd::Zero(1)) == 0.0);
}

TEST_CASE("criterion brute force over thresholds with constant bases") {
  Sample s = toy(5, 8);
  const auto constant = InstrumentSpace::fit_to(s.w, 1);
  std::vector<double> ys(s.y.data(), s.y.data() + 5);
  std::sort(ys.begin(), ys.end());
  for (double q : {0.2, 0.5, 0.7}) {
    double best = INFINITY;
    std::vector<double> cands{ys.front() - 1};
    for (int i = 0; i < 5; ++i) cands.push_back(ys[i]);
    for (int i = 0; i + 1 < 5; ++i) cands.push_back(0.5 * (ys[i] + ys[i + 1]));
    cands.push_back(ys.back() + 1);
    for (double c : cands) best = std::min(best, criterion(s, Eigen::VectorXd::Constant(5, c), q, constant));
    CHECK(best == doctest::Approx(oracle::constant_threshold_min(s.y, q)).epsilon(1e-12));
  }
}

TEST_CASE("series regression") {
  const Sample s = toy(60, 4);
  const auto space = InstrumentSpace::fit_to(s.w, 5);
  const auto one = InstrumentSpace::fit_to(s.w, 1);
  const Eigen::VectorXd phi = s.z.col(0);
  const Eigen::VectorXd r = indicator_residuals(s, phi, 0.3);
  CHECK(series_That(s, phi, 0.3, one)[0] == doctest::Approx(r.mean()));
  const Eigen::VectorXd ls = space.design().colPivHouseholderQr().solve(r);
  CHECK((series_That(s, phi, 0.3, space) - ls).norm() < 1e-9);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(60);
  CHECK(space.series_coefficients(zero).isZero());
  const auto b = BSplineBasis::with_dimension(5, s.w.col(0).minCoeff(), s.w.col(0).maxCoeff());
  CHECK((series_That(s, phi, 0.3, b) - ls).norm() < 1e-9);
}

TEST_CASE("series estimate at the true structural function") {
  const auto spec = DgpSpec::make(Design::null_41, 1, 2000, 77);
  const Sample s = gen_sample(spec);
  const Eigen::VectorXd phi = true_structural_values(spec, s.z, 0.5);
  const auto space = InstrumentSpace::fit_to(s.w, 4);
  const Eigen::VectorXd coef = series_That(s, phi, 0.5, space);
  double worst = 0.0;
  for (int i = 0; i <= 50; ++i) {
    Eigen::RowVectorXd w(1);
    w[0] = 0.02 + 0.96 * i / 50.0;
    worst = std::max(worst, std::abs(space.basis().eval(w).dot(coef)));
  }
  CHECK(worst < 0.08);
}

TEST_CASE("sample validation and subset") {
  Sample s = toy(10, 1);
  CHECK_NOTHROW(s.validate());
  const auto sub = s.subset({0, 3, 9});
  CHECK(sub.size() == 3);
  CHECK(sub.y[1] == s.y[3]);
  s.w.resize(9, 1);
  CHECK_THROWS(s.validate());
}
