#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "ivqr/numerics.hpp"
#include "oracles.hpp"

using namespace ivqr;

namespace {

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int dim, int rank) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd f(dim, rank);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < rank; ++j) f(i, j) = nd(rng);
  return f * f.transpose();
}

}  // namespace

TEST_CASE("uniform grid") {
  const auto g = make_uniform_grid(20);
  REQUIRE(g.size() == 19);
  CHECK(g.points.front() == doctest::Approx(0.05));
  CHECK(g.points.back() == doctest::Approx(0.95));
  for (double w : g.weights) CHECK(w == doctest::Approx(0.05));
  CHECK(grid_integral(g, [](double q) { return q * (1 - q); }) == doctest::Approx(0.16625).epsilon(1e-14));

  const auto two = make_uniform_grid(2);
  REQUIRE(two.size() == 1);
  CHECK(two.points[0] == 0.5);
  CHECK(two.weights[0] == 0.5);
  CHECK_THROWS_AS(make_uniform_grid(1), std::invalid_argument);
}

TEST_CASE("grid validation") {
  CHECK_THROWS(make_grid({0.5, 0.4}, {1, 1}));
  CHECK_THROWS(make_grid({0.0}, {1}));
  CHECK_THROWS(make_grid({0.5}, {-1}));
  CHECK_THROWS(make_grid({0.2, 0.4}, {1}));
  const auto r = make_random_grid(50, 3);
  CHECK(r.size() == 50);
  CHECK(r.total_mass() == doctest::Approx(1.0));
  for (std::size_t i = 1; i < r.size(); ++i) CHECK(r.points[i] > r.points[i - 1]);
  CHECK(make_random_grid(50, 3).points == r.points);
}

TEST_CASE("bspline dimensions and constant basis") {
  BSplineBasis c(0, 0, 0.0, 1.0);
  CHECK(c.dimension() == 1);
  CHECK(c.eval(0.3)[0] == 1.0);
  CHECK(c.eval(1.0)[0] == 1.0);
  CHECK(BSplineBasis(2, 17, 0.0, 1.0).dimension() == 20);
  CHECK(BSplineBasis::with_dimension(4, 0, 1).dimension() == 4);
  CHECK(BSplineBasis::with_dimension(8, 0, 1).dimension() == 8);
  CHECK(BSplineBasis::with_dimension(1, 0, 1).degree() == 0);
  CHECK(BSplineBasis::with_dimension(2, 0, 1).degree() == 1);
  const std::vector<double> pts{0.1, 0.5, 0.9};
  const auto m = design_matrix(c, pts);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 1);
  CHECK(m.isOnes());
}

TEST_CASE("bspline matches recursive definition") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int deg = 0; deg <= 3; ++deg) {
    for (int interior : {0, 1, 4, 9}) {
      BSplineBasis b(deg, interior, -0.5, 2.0);
      for (int t = 0; t < 60; ++t) {
        const double x = t == 0 ? -0.5 : t == 1 ? 2.0 : -0.5 + 2.5 * u(rng);
        const Eigen::VectorXd v = b.eval(x);
        REQUIRE(v.size() == b.dimension());
        for (int i = 0; i < b.dimension(); ++i)
          CHECK(v[i] == doctest::Approx(oracle::bspline(b.knots(), i, deg, x)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("bspline partition of unity and clamping") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const BSplineBasis b(2, 17, 0.0, 1.0);
  std::vector<double> pts(500);
  for (auto& p : pts) p = u(rng);
  const auto d = design_matrix(b, pts);
  CHECK(d.rows() == 500);
  CHECK(d.cols() == 20);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    CHECK(std::abs(d.row(i).sum() - 1.0) < 1e-12);
    CHECK(d.row(i).minCoeff() >= 0.0);
  }
  CHECK((b.eval(-3.0) - b.eval(0.0)).norm() == 0.0);
  CHECK((b.eval(7.0) - b.eval(1.0)).norm() == 0.0);
  CHECK_THROWS(design_matrix(b, std::vector<double>{}));
}

TEST_CASE("bspline with explicit knots") {
  BSplineBasis b(2, std::vector<double>{0.2, 0.7}, 0.0, 1.0);
  CHECK(b.dimension() == 5);
  CHECK(b.eval(0.45).sum() == doctest::Approx(1.0));
  CHECK_THROWS(BSplineBasis(2, std::vector<double>{0.7, 0.2}, 0.0, 1.0));
  CHECK_THROWS(BSplineBasis(2, 3, 1.0, 1.0));
}

TEST_CASE("tensor basis") {
  Eigen::MatrixXd x(4, 2);
  x << 0.1, 0.2, 0.5, 0.9, 0.3, 0.4, 0.8, 0.6;
  const auto t = TensorBasis::fit_to(x, 3);
  CHECK(t.arity() == 2);
  CHECK(t.dimension() == 9);
  const auto d = t.design(x);
  CHECK(d.rows() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(d.row(i).sum() == doctest::Approx(1.0));
    const Eigen::VectorXd a = t.marginals()[0].eval(x(i, 0)), b = t.marginals()[1].eval(x(i, 1));
    for (int p = 0; p < 3; ++p)
      for (int r = 0; r < 3; ++r) CHECK(d(i, p * 3 + r) == doctest::Approx(a[p] * b[r]));
  }
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 1, 2.0);
  CHECK(TensorBasis::fit_to(flat, 4).design(flat).rows() == 5);
}

TEST_CASE("pseudo-inverse examples") {
  const auto id = pinv_gram(Eigen::MatrixXd::Identity(3, 3));
  CHECK((id.inverse() - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-14);
  CHECK(id.rank() == 3);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 2.0;
  const auto pd = pinv_gram(d);
  CHECK(pd.inverse()(0, 0) == doctest::Approx(0.5));
  CHECK(pd.inverse()(1, 1) == 0.0);
  CHECK(pd.rank() == 1);

  Eigen::MatrixXd x(6, 3);
  x << 1, 2, 1, 3, 1, 3, 0, 5, 0, 2, 2, 2, 1, 1, 1, 4, 0, 4;  // third column duplicates the first
  const Eigen::MatrixXd g = x.transpose() * x;
  const auto pg = pinv_gram(g);
  CHECK(pg.rank() == 2);
  CHECK((g * pg.inverse() * g - g).norm() < 1e-8);

  Eigen::MatrixXd asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(pinv_gram(asym), std::invalid_argument);
}

TEST_CASE("pseudo-inverse identities on random PSD matrices") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> dims(1, 50);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = dims(rng);
    const int rank = std::uniform_int_distribution<int>(1, dim)(rng);
    const Eigen::MatrixXd a = random_psd(rng, dim, rank);
    const auto p = pinv_gram(a);
    const Eigen::MatrixXd& g = p.inverse();
    const double scale = std::max(1.0, a.norm());
    CHECK((a * g * a - a).norm() / scale < 1e-8);
    CHECK((g * a * g - g).norm() / std::max(1.0, g.norm()) < 1e-8);
    const double product = a.norm() * g.norm();
    CHECK(((a * g) - (a * g).transpose()).norm() / product < 1e-8);
    CHECK(((g * a) - (g * a).transpose()).norm() / product < 1e-8);
    CHECK(p.rank() == rank);
    CHECK((g - oracle::svd_pinv(a)).norm() / std::max(1.0, g.norm()) < 1e-6);
  }
}

TEST_CASE("quadratic form") {
  const auto id = pinv_gram(Eigen::MatrixXd::Identity(2, 2));
  CHECK(quad_form(Eigen::VectorXd::Zero(2), id) == 0.0);
  Eigen::VectorXd e(2);
  e << 1, 0;
  CHECK(quad_form(e, id) == 1.0);
  CHECK_THROWS(quad_form(Eigen::VectorXd::Ones(3), id));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd a = random_psd(rng, 6, 1 + t % 6);
    const auto p = pinv_gram(a);
    Eigen::VectorXd v(6);
    for (auto& c : v) c = nd(rng);
    const double qf = quad_form(v, p);
    CHECK(qf >= 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.inverse());
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * v;
    double expansion = 0.0;
    for (int i = 0; i < 6; ++i) expansion += std::max(0.0, es.eigenvalues()[i]) * proj[i] * proj[i];
    CHECK(qf == doctest::Approx(expansion).epsilon(1e-9));
  }
}
