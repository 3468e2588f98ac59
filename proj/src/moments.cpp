#include "ivqr/moments.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ivqr {

void Sample::validate() const {
  const Eigen::Index n = y.size();
  if (n < 1) throw std::invalid_argument("sample is empty");
  if (z.rows() != n || w.rows() != n) throw std::invalid_argument("sample blocks differ in row count");
  if (d.cols() > 0 && d.rows() != n) throw std::invalid_argument("sample covariate block differs in row count");
  if (z.cols() < 1 || w.cols() < 1) throw std::invalid_argument("sample needs at least one Z and one W column");
  if (!y.allFinite() || !z.allFinite() || !w.allFinite() || (d.size() > 0 && !d.allFinite()))
    throw std::invalid_argument("sample contains non-finite entries");
}

Sample Sample::subset(const std::vector<Eigen::Index>& rows) const {
  Sample out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.y.resize(m);
  out.z.resize(m, z.cols());
  out.w.resize(m, w.cols());
  out.d.resize(has_d() ? m : 0, d.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    out.y[i] = y[rows[i]];
    out.z.row(i) = z.row(rows[i]);
    out.w.row(i) = w.row(rows[i]);
    if (has_d()) out.d.row(i) = d.row(rows[i]);
  }
  return out;
}

void check_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile must lie in (0,1), got " + std::to_string(q));
}

Eigen::VectorXd indicator_residuals(const Eigen::VectorXd& y, const Eigen::VectorXd& phi, double q) {
  check_quantile(q);
  if (phi.size() != y.size()) throw std::invalid_argument("indicator_residuals: length mismatch");
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) r[i] = (y[i] <= phi[i] ? 1.0 : 0.0) - q;
  return r;
}

Eigen::VectorXd indicator_residuals(const Sample& sample, const Eigen::VectorXd& phi, double q) {
  return indicator_residuals(sample.y, phi, q);
}

MomentVector moment_vector(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& design, double q) {
  if (residuals.size() != design.rows()) throw std::invalid_argument("moment_vector: length mismatch");
  return MomentVector{design.transpose() * residuals, q};
}

namespace {

Eigen::MatrixXd append_columns(Eigen::MatrixXd left, const Eigen::MatrixXd& right) {
  if (right.cols() == 0) return left;
  if (right.rows() != left.rows()) throw std::invalid_argument("instrument space: row count mismatch");
  Eigen::MatrixXd out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

}  // namespace

InstrumentSpace::InstrumentSpace(TensorBasis basis, const Eigen::MatrixXd& w, const Eigen::MatrixXd& linear,
                                 double tol)
    : basis_(std::move(basis)),
      design_(append_columns(basis_.design(w), linear)),
      pinv_(pinv_gram(design_.transpose() * design_ / static_cast<double>(design_.rows()), tol)) {}

InstrumentSpace InstrumentSpace::fit_to(const Eigen::MatrixXd& w, int marginal_dimension, double tol) {
  return InstrumentSpace(TensorBasis::fit_to(w, marginal_dimension), w, Eigen::MatrixXd(), tol);
}

double InstrumentSpace::quad(const Eigen::VectorXd& moment) const {
  return quad_form(moment, pinv_) / static_cast<double>(rows());
}

Eigen::VectorXd InstrumentSpace::series_coefficients(const Eigen::VectorXd& residuals) const {
  if (residuals.size() != rows()) throw std::invalid_argument("series_coefficients: length mismatch");
  return pinv_.inverse() * (design_.transpose() * residuals) / static_cast<double>(rows());
}

double criterion(const Sample& sample, const Eigen::VectorXd& phi, double q, const InstrumentSpace& space) {
  return space.quad(moment_vector(indicator_residuals(sample, phi, q), space.design(), q).entries);
}

double criterion(const Sample& sample, const Eigen::VectorXd& phi, double q, const Eigen::MatrixXd& design,
                 const SymmetricPseudoInverse& gram_pinv) {
  return quad_form(moment_vector(indicator_residuals(sample, phi, q), design, q).entries, gram_pinv);
}

Eigen::VectorXd series_That(const Sample& sample, const Eigen::VectorXd& phi, double q,
                            const InstrumentSpace& space) {
  return space.series_coefficients(indicator_residuals(sample, phi, q));
}

Eigen::VectorXd series_That(const Sample& sample, const Eigen::VectorXd& phi, double q,
                            const BSplineBasis& basis) {
  if (sample.w.cols() != 1) throw std::invalid_argument("series_That with a scalar basis needs scalar W");
  return series_That(sample, phi, q, InstrumentSpace(TensorBasis({basis}), sample.w));
}

}  // namespace ivqr
