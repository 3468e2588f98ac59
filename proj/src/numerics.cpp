#include "ivqr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ivqr/random.hpp"

namespace ivqr {

double QuantileGrid::total_mass() const {
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

void QuantileGrid::validate() const {
  if (points.empty()) throw std::invalid_argument("quantile grid: no points");
  if (points.size() != weights.size())
    throw std::invalid_argument("quantile grid: points and weights differ in length");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i] > 0.0 && points[i] < 1.0))
      throw std::invalid_argument("quantile grid: point outside (0,1)");
    if (i > 0 && !(points[i] > points[i - 1]))
      throw std::invalid_argument("quantile grid: points not strictly increasing");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw std::invalid_argument("quantile grid: negative or non-finite weight");
  }
}

QuantileGrid make_uniform_grid(int n_cells) {
  if (n_cells < 2) throw std::invalid_argument("uniform grid needs N >= 2");
  QuantileGrid grid;
  const double n = n_cells;
  for (int i = 1; i < n_cells; ++i) {
    grid.points.push_back(i / n);
    grid.weights.push_back(1.0 / n);
  }
  return grid;
}

QuantileGrid make_point_grid(double q, double weight) {
  return make_grid({q}, {weight});
}

QuantileGrid make_random_grid(int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("random grid needs at least one draw");
  auto engine = make_engine(seed, 0x51ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> draws;
  while (static_cast<int>(draws.size()) < count) {
    double u = unif(engine);
    if (u > 0.0 && u < 1.0) draws.push_back(u);
  }
  std::sort(draws.begin(), draws.end());
  draws.erase(std::unique(draws.begin(), draws.end()), draws.end());
  std::vector<double> weights(draws.size(), 1.0 / static_cast<double>(draws.size()));
  return make_grid(std::move(draws), std::move(weights));
}

QuantileGrid make_grid(std::vector<double> points, std::vector<double> weights) {
  QuantileGrid grid{std::move(points), std::move(weights)};
  grid.validate();
  return grid;
}

double grid_integral(const QuantileGrid& grid, const std::function<double(double)>& f) {
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) total += grid.weights[i] * f(grid.points[i]);
  return total;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> equally_spaced(int count, double lower, double upper) {
  std::vector<double> out;
  out.reserve(count);
  for (int i = 1; i <= count; ++i) out.push_back(lower + (upper - lower) * i / (count + 1.0));
  return out;
}

}  // namespace

BSplineBasis::BSplineBasis(int degree, int interior_knots, double lower, double upper)
    : BSplineBasis(degree, equally_spaced(std::max(interior_knots, 0), lower, upper), lower, upper) {
  if (interior_knots < 0) throw std::invalid_argument("negative interior knot count");
}

BSplineBasis::BSplineBasis(int degree, std::vector<double> interior, double lower, double upper)
    : degree_(degree), lower_(lower), upper_(upper) {
  if (degree < 0) throw std::invalid_argument("B-spline degree must be nonnegative");
  if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper))
    throw std::invalid_argument("B-spline domain must be a nondegenerate finite interval");
  for (std::size_t i = 0; i < interior.size(); ++i) {
    if (!(interior[i] > lower && interior[i] < upper))
      throw std::invalid_argument("interior knot outside the open domain");
    if (i > 0 && interior[i] < interior[i - 1])
      throw std::invalid_argument("interior knots must be nondecreasing");
  }
  knots_.assign(degree + 1, lower);
  knots_.insert(knots_.end(), interior.begin(), interior.end());
  knots_.insert(knots_.end(), degree + 1, upper);
}

BSplineBasis BSplineBasis::with_dimension(int dimension, double lower, double upper) {
  if (dimension < 1) throw std::invalid_argument("basis dimension must be >= 1");
  const int degree = std::min(2, dimension - 1);
  return BSplineBasis(degree, dimension - degree - 1, lower, upper);
}

int BSplineBasis::find_span(double x) const {
  const int n = dimension();
  if (x >= knots_[n]) {
    // last nonempty span
    int s = n - 1;
    while (s > degree_ && knots_[s] == knots_[s + 1]) --s;
    return s;
  }
  auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, x);
  int s = static_cast<int>(it - knots_.begin()) - 1;
  return std::clamp(s, degree_, n - 1);
}

int BSplineBasis::eval_nonzero(double x, std::span<double> out) const {
  const int p = degree_;
  x = std::clamp(x, lower_, upper_);
  const int s = find_span(x);
  double left[8], right[8];
  double* N = out.data();
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[s + 1 - j];
    right[j] = knots_[s + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  return s - p;
}

Eigen::VectorXd BSplineBasis::eval(double x) const {
  if (degree_ > 7) throw std::invalid_argument("B-spline degree above 7 not supported");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension());
  double values[8];
  const int first = eval_nonzero(x, std::span<double>(values, degree_ + 1));
  for (int r = 0; r <= degree_; ++r) out[first + r] = values[r];
  return out;
}

Eigen::MatrixXd design_matrix(const BSplineBasis& basis, std::span<const double> points) {
  if (points.empty()) throw std::invalid_argument("design matrix needs at least one point");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), basis.dimension());
  double values[8];
  std::span<double> buf(values, basis.degree() + 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int first = basis.eval_nonzero(points[i], buf);
    for (int r = 0; r <= basis.degree(); ++r) out(static_cast<Eigen::Index>(i), first + r) = values[r];
  }
  return out;
}

// ---------------------------------------------------------------------------

TensorBasis::TensorBasis(std::vector<BSplineBasis> marginals) : marginals_(std::move(marginals)) {
  if (marginals_.empty()) throw std::invalid_argument("tensor basis needs at least one marginal");
}

TensorBasis TensorBasis::fit_to(const Eigen::MatrixXd& x, int marginal_dimension) {
  if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("cannot fit a basis to an empty matrix");
  std::vector<BSplineBasis> marginals;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double lo = x.col(c).minCoeff();
    double hi = x.col(c).maxCoeff();
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    marginals.push_back(BSplineBasis::with_dimension(marginal_dimension, lo, hi));
  }
  return TensorBasis(std::move(marginals));
}

int TensorBasis::dimension() const {
  int dim = 1;
  for (const auto& m : marginals_) dim *= m.dimension();
  return dim;
}

Eigen::VectorXd TensorBasis::eval(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != marginals_.size())
    throw std::invalid_argument("tensor basis: argument arity mismatch");
  Eigen::VectorXd out = marginals_[0].eval(x[0]);
  for (std::size_t c = 1; c < marginals_.size(); ++c) {
    const Eigen::VectorXd next = marginals_[c].eval(x[static_cast<Eigen::Index>(c)]);
    Eigen::VectorXd prod(out.size() * next.size());
    for (Eigen::Index a = 0; a < out.size(); ++a)
      prod.segment(a * next.size(), next.size()) = out[a] * next;
    out = std::move(prod);
  }
  return out;
}

Eigen::MatrixXd TensorBasis::design(const Eigen::MatrixXd& x) const {
  if (x.rows() == 0) throw std::invalid_argument("design matrix needs at least one point");
  if (static_cast<std::size_t>(x.cols()) != marginals_.size())
    throw std::invalid_argument("tensor basis: column count mismatch");
  if (marginals_.size() == 1) {
    std::vector<double> pts(x.col(0).data(), x.col(0).data() + x.rows());
    return design_matrix(marginals_[0], pts);
  }
  Eigen::MatrixXd out(x.rows(), dimension());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = eval(x.row(i)).transpose();
  return out;
}

// ---------------------------------------------------------------------------

SymmetricPseudoInverse::SymmetricPseudoInverse(Eigen::MatrixXd source, double relative_tolerance)
    : source_(std::move(source)), tolerance_(relative_tolerance) {
  if (source_.rows() != source_.cols()) throw std::invalid_argument("pseudo-inverse: matrix not square");
  const double scale = std::max(1.0, source_.cwiseAbs().maxCoeff());
  if ((source_ - source_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("pseudo-inverse: matrix not symmetric");
  const Eigen::MatrixXd sym = 0.5 * (source_ + source_.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pseudo-inverse: eigen decomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double largest = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = relative_tolerance * largest;
  Eigen::VectorXd inv_lambda = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > cutoff && lambda[i] > 0.0) {
      inv_lambda[i] = 1.0 / lambda[i];
      ++rank_;
    }
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  inverse_ = v * inv_lambda.asDiagonal() * v.transpose();
  inverse_ = 0.5 * (inverse_ + inverse_.transpose());
}

SymmetricPseudoInverse pinv_gram(const Eigen::MatrixXd& gram, double tol) {
  return SymmetricPseudoInverse(gram, tol);
}

double quad_form(const Eigen::VectorXd& v, const SymmetricPseudoInverse& pinv) {
  if (v.size() != pinv.dimension())
    throw std::invalid_argument("quad_form: dimension mismatch (" + std::to_string(v.size()) + " vs " +
                                std::to_string(pinv.dimension()) + ")");
  return std::max(0.0, v.dot(pinv.inverse() * v));
}

}  // namespace ivqr
