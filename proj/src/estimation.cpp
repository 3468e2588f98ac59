#include "ivqr/estimation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "ivqr/nelder_mead.hpp"
#include "ivqr/random.hpp"

namespace ivqr {

void OptimizerSettings::validate() const {
  if (restarts < 0) throw std::invalid_argument("optimizer: negative restart count");
  if (max_evaluations < 1 || polish_evaluations < 1 || max_polish_rounds < 0)
    throw std::invalid_argument("optimizer: evaluation budgets must be positive");
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) throw std::invalid_argument("optimizer: bad tolerance");
  if (!(step_fraction > 0.0) || !std::isfinite(step_fraction)) throw std::invalid_argument("optimizer: bad step");
  if (!(bound_scale > 0.0) || !std::isfinite(bound_scale)) throw std::invalid_argument("optimizer: bad bound");
}

void SieveConfig::validate() const {
  if (!(1 <= k_n && k_n <= l_n && l_n <= m_n))
    throw std::invalid_argument("sieve dimensions must satisfy 1 <= k_n <= l_n <= m_n (got " + std::to_string(k_n) +
                                ", " + std::to_string(l_n) + ", " + std::to_string(m_n) + ")");
  grid.validate();
  optimizer.validate();
}

SieveConfig SieveConfig::with_dims(int k_n, int m_n) {
  SieveConfig c;
  c.k_n = k_n;
  c.l_n = 2 * k_n;
  c.m_n = m_n;
  return c;
}

void validate_groups(const std::vector<std::vector<int>>& groups, Eigen::Index z_columns) {
  if (groups.empty()) throw std::invalid_argument("additive fit needs at least one group");
  std::set<int> seen;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("additive group is empty");
    for (int c : g) {
      if (c < 0 || c >= z_columns) throw std::invalid_argument("additive group names a missing Z column");
      if (!seen.insert(c).second) throw std::invalid_argument("additive groups overlap");
    }
  }
  if (static_cast<Eigen::Index>(seen.size()) != z_columns)
    throw std::invalid_argument("additive groups do not cover every Z column");
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& x, const std::vector<int>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return out;
}

double sd_of(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

StructuralSpace StructuralSpace::unrestricted(const Sample& sample, int k_n, bool include_d) {
  std::vector<int> all(static_cast<std::size_t>(sample.z.cols()));
  std::iota(all.begin(), all.end(), 0);
  return additive(sample, k_n, {all}, include_d);
}

StructuralSpace StructuralSpace::additive(const Sample& sample, int k_n, const std::vector<std::vector<int>>& groups,
                                          bool include_d) {
  sample.validate();
  validate_groups(groups, sample.z.cols());
  StructuralSpace s;
  s.groups_ = groups;
  for (const auto& g : groups) s.bases_.push_back(TensorBasis::fit_to(columns_of(sample.z, g), k_n));
  s.d_columns_ = include_d ? static_cast<int>(sample.d.cols()) : 0;
  s.design_ = s.rows_for(sample.z, sample.d);
  return s;
}

Eigen::MatrixXd StructuralSpace::rows_for(const Eigen::MatrixXd& z, const Eigen::MatrixXd& d) const {
  // Group 0 keeps its full basis; later groups drop their first column so the
  // partition of unity yields a single shared intercept.
  int cols = d_columns_;
  for (std::size_t g = 0; g < bases_.size(); ++g) cols += bases_[g].dimension() - (g > 0 ? 1 : 0);
  Eigen::MatrixXd out(z.rows(), cols);
  Eigen::Index at = 0;
  for (std::size_t g = 0; g < bases_.size(); ++g) {
    const Eigen::MatrixXd block = bases_[g].design(columns_of(z, groups_[g]));
    const Eigen::Index skip = g > 0 ? 1 : 0;
    out.middleCols(at, block.cols() - skip) = block.rightCols(block.cols() - skip);
    at += block.cols() - skip;
  }
  if (d_columns_ > 0) {
    if (d.cols() != d_columns_ || d.rows() != z.rows())
      throw std::invalid_argument("structural space: covariate block has the wrong shape");
    out.rightCols(d_columns_) = d;
  }
  return out;
}

Eigen::VectorXd StructuralSpace::evaluate(const Eigen::MatrixXd& z, const Eigen::MatrixXd& d,
                                          const Eigen::VectorXd& coefficients) const {
  if (coefficients.size() != dimension()) throw std::invalid_argument("structural space: coefficient length");
  return rows_for(z, d) * coefficients;
}

InstrumentSpace make_instrument_space(const Sample& sample, int marginal_dimension, bool include_d) {
  return InstrumentSpace(TensorBasis::fit_to(sample.w, marginal_dimension), sample.w,
                         include_d ? sample.d : Eigen::MatrixXd());
}

// ---------------------------------------------------------------------------

IvqrProblem::IvqrProblem(const Sample& sample, StructuralSpace structural, InstrumentSpace instruments)
    : y_(sample.y), structural_(std::move(structural)), instruments_(std::move(instruments)) {
  if (structural_.design().rows() != y_.size() || instruments_.rows() != y_.size())
    throw std::invalid_argument("problem: design row counts differ from the sample");
  y_sd_ = sd_of(y_);
  y_range_ = y_.size() ? y_.maxCoeff() - y_.minCoeff() : 0.0;
  if (!(y_sd_ > 0.0)) y_sd_ = std::max(1.0, std::abs(y_.size() ? y_[0] : 0.0));
  if (!(y_range_ > 0.0)) y_range_ = y_sd_;
  const auto& x = structural_.design();
  column_sd_.resize(x.cols());
  column_range_.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    column_sd_[j] = sd_of(x.col(j));
    column_range_[j] = x.col(j).maxCoeff() - x.col(j).minCoeff();
  }
}

namespace {

StructuralSpace structural_for(const Sample& sample, const SieveConfig& config) {
  return config.additive_groups.empty()
             ? StructuralSpace::unrestricted(sample, config.k_n, config.include_d_linear)
             : StructuralSpace::additive(sample, config.k_n, config.additive_groups, config.include_d_linear);
}

}  // namespace

IvqrProblem::IvqrProblem(const Sample& sample, const SieveConfig& config)
    : IvqrProblem(sample, structural_for(sample, config),
                  make_instrument_space(sample, config.l_n, config.include_d_linear)) {
  config.validate();
}

double IvqrProblem::criterion(const Eigen::VectorXd& coefficients, double q, const Eigen::VectorXd* weights) const {
  const Eigen::VectorXd phi = structural_.design() * coefficients;
  Eigen::VectorXd r(y_.size());
  if (weights) {
    for (Eigen::Index i = 0; i < y_.size(); ++i) r[i] = (*weights)[i] * ((y_[i] <= phi[i] ? 1.0 : 0.0) - q);
  } else {
    for (Eigen::Index i = 0; i < y_.size(); ++i) r[i] = (y_[i] <= phi[i] ? 1.0 : 0.0) - q;
  }
  return instruments_.quad(instruments_.design().transpose() * r);
}

Eigen::VectorXd IvqrProblem::steps(const OptimizerSettings& opt) const {
  Eigen::VectorXd s(structural_.dimension());
  const int basis = structural_.basis_dimension();
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double col = j < basis ? 1.0 : (column_sd_[j] > 0.0 ? column_sd_[j] : 1.0);
    s[j] = opt.step_fraction * y_sd_ / col;
  }
  return s;
}

Eigen::VectorXd IvqrProblem::bound(const OptimizerSettings& opt) const {
  // Covariate coefficients are bounded on the scale of their column range.
  Eigen::VectorXd b(structural_.dimension());
  const int basis = structural_.basis_dimension();
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const double col = j < basis ? 1.0 : (column_range_[j] > 0.0 ? column_range_[j] : 1.0);
    b[j] = opt.bound_scale * y_range_ / col;
  }
  return b;
}

// ---------------------------------------------------------------------------

double check_loss(const Eigen::VectorXd& residuals, double q) {
  double total = 0.0;
  for (double u : residuals) total += u * (q - (u < 0.0 ? 1.0 : 0.0));
  return total;
}

namespace {

// Exact minimizer of the check loss for a full-column-rank design.
Eigen::VectorXd quantile_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double q) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const double scale = std::max({sd_of(y), y.cwiseAbs().maxCoeff() * 1e-3, 1e-300});

  // IRLS on a smoothed check loss.
  Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  Eigen::VectorXd u(n);
  double eps = 0.1 * scale;
  for (int it = 0; it < 40; ++it) {
    const Eigen::VectorXd r = y - x * beta;
    for (Eigen::Index i = 0; i < n; ++i) u[i] = (r[i] > 0.0 ? q : 1.0 - q) / std::max(std::abs(r[i]), eps);
    const Eigen::MatrixXd xtux = x.transpose() * u.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtux);
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::VectorXd next = ldlt.solve(x.transpose() * u.asDiagonal() * y);
    if (!next.allFinite()) break;
    beta = next;
    eps = std::max(1e-6 * scale, eps * 0.6);
  }

  // Initial vertex: p observations with the smallest residuals whose rows are
  // linearly independent.
  Eigen::VectorXd r = y - x * beta;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(r[a]) < std::abs(r[b]); });
  std::vector<Eigen::Index> basis;
  Eigen::MatrixXd chosen(0, p);
  for (Eigen::Index idx : order) {
    Eigen::MatrixXd trial(chosen.rows() + 1, p);
    trial << chosen, x.row(idx);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.rows()) {
      chosen = trial;
      basis.push_back(idx);
      if (static_cast<Eigen::Index>(basis.size()) == p) break;
    }
  }
  if (static_cast<Eigen::Index>(basis.size()) < p) return beta;  // cannot happen for full column rank

  const double zero_tol = 1e-12 * scale;
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (auto b : basis) in_basis[static_cast<std::size_t>(b)] = 1;

  double objective = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, Eigen::Index>> breaks;
  for (int iter = 0; iter < 100 * static_cast<int>(p) + 1000; ++iter) {
    Eigen::MatrixXd xh(p, p);
    Eigen::VectorXd yh(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      xh.row(j) = x.row(basis[static_cast<std::size_t>(j)]);
      yh[j] = y[basis[static_cast<std::size_t>(j)]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(xh);
    const Eigen::VectorXd vertex = lu.solve(yh);
    r = y - x * vertex;
    for (auto b : basis) r[b] = 0.0;
    const double obj = check_loss(r, q);
    if (!(obj < objective - 1e-14 * std::max(1.0, std::abs(objective))) && iter > 0) break;
    objective = obj;
    beta = vertex;

    const Eigen::MatrixXd g = x * lu.inverse();  // column j: x_i' Xh^{-1} e_j

    // Directional derivative of the loss along +/- Xh^{-1} e_j.
    double best_slope = 0.0;
    Eigen::Index best_j = -1;
    double best_sign = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (double s : {1.0, -1.0}) {
        double slope = s < 0.0 ? q : 1.0 - q;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (in_basis[static_cast<std::size_t>(i)]) continue;
          const double dr = -s * g(i, j);
          if (r[i] > zero_tol || (r[i] >= -zero_tol && dr > 0.0))
            slope += q * dr;
          else
            slope += (q - 1.0) * dr;
        }
        if (slope < best_slope - 1e-12) {
          best_slope = slope;
          best_j = j;
          best_sign = s;
        }
      }
    }
    if (best_j < 0) break;

    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)] || std::abs(r[i]) <= zero_tol) continue;
      const double gi = best_sign * g(i, best_j);
      if (gi == 0.0) continue;
      const double t = r[i] / gi;
      if (t > 0.0) breaks.emplace_back(t, i);
    }
    std::sort(breaks.begin(), breaks.end());
    double slope = best_slope;
    Eigen::Index enter = -1;
    for (const auto& [t, i] : breaks) {
      slope += std::abs(g(i, best_j));
      if (slope >= 0.0) {
        enter = i;
        break;
      }
    }
    if (enter < 0) break;
    in_basis[static_cast<std::size_t>(basis[static_cast<std::size_t>(best_j)])] = 0;
    basis[static_cast<std::size_t>(best_j)] = enter;
    in_basis[static_cast<std::size_t>(enter)] = 1;
  }
  return beta;
}

}  // namespace

SieveFit fit_cqr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double q) {
  check_quantile(q);
  if (x.rows() != y.size()) throw std::invalid_argument("fit_cqr: row count mismatch");
  if (x.cols() < 1) throw std::invalid_argument("fit_cqr: empty design");
  if (x.cols() > x.rows()) throw std::invalid_argument("fit_cqr: more basis functions than observations");

  SieveFit fit;
  fit.q = q;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank < x.cols()) {
    fit.rank_deficient = true;
    std::vector<int> keep;
    for (Eigen::Index j = 0; j < rank; ++j) keep.push_back(static_cast<int>(qr.colsPermutation().indices()[j]));
    std::sort(keep.begin(), keep.end());
    const Eigen::MatrixXd sub = columns_of(x, keep);
    const Eigen::VectorXd fitted = sub * quantile_regression(sub, y, q);
    fit.coefficients = x.completeOrthogonalDecomposition().solve(fitted);
  } else {
    fit.coefficients = quantile_regression(x, y, q);
  }
  fit.criterion_value = check_loss(y - x * fit.coefficients, q);
  fit.start_criterion = fit.criterion_value;
  fit.evaluations = 1;
  return fit;
}

SieveFit fit_cqr(const Sample& sample, double q, int k_n, bool include_d) {
  const auto space = StructuralSpace::unrestricted(sample, k_n, include_d);
  return fit_cqr(space.design(), sample.y, q);
}

// ---------------------------------------------------------------------------

namespace {

struct PolishOutcome {
  Eigen::VectorXd x;
  double value;
  int evaluations = 0;
  bool improved = false;
};

PolishOutcome polish(const IvqrProblem& problem, double q, Eigen::VectorXd x, double value,
                     const OptimizerSettings& opt, const Eigen::VectorXd* weights) {
  const Eigen::VectorXd steps = problem.steps(opt);
  const Eigen::VectorXd hi = problem.bound(opt);
  const Eigen::VectorXd lo = -hi;
  auto f = [&](const Eigen::VectorXd& c) { return problem.criterion(c, q, weights); };
  NelderMeadOptions nm{opt.polish_evaluations, opt.tolerance, 0.0};
  PolishOutcome out{std::move(x), value};
  for (int round = 0; round < opt.max_polish_rounds; ++round) {
    auto res = nelder_mead(f, out.x, steps, lo, hi, nm);
    out.evaluations += res.evaluations;
    if (!res.improved) break;
    out.x = std::move(res.x);
    out.value = res.value;
    out.improved = true;
  }
  return out;
}

}  // namespace

SieveFit fit_ivqr(const IvqrProblem& problem, double q, const OptimizerSettings& opt,
                  std::span<const Eigen::VectorXd> extra_starts, const Eigen::VectorXd* weights) {
  check_quantile(q);
  opt.validate();
  if (problem.size() <= problem.instruments().dimension())
    throw std::invalid_argument("fit_ivqr: need more observations than instrument functions");
  if (weights && weights->size() != problem.size()) throw std::invalid_argument("fit_ivqr: weight length");

  const Eigen::VectorXd steps = problem.steps(opt);
  const Eigen::VectorXd hi = problem.bound(opt);
  const Eigen::VectorXd lo = -hi;
  auto clamp = [&](const Eigen::VectorXd& c) { return c.cwiseMax(lo).cwiseMin(hi).eval(); };

  SieveFit fit;
  fit.q = q;
  const SieveFit cqr = fit_cqr(problem.structural().design(), problem.y(), q);
  fit.rank_deficient = cqr.rank_deficient;

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(clamp(cqr.coefficients));
  for (const auto& s : extra_starts) {
    if (s.size() != problem.structural().dimension()) throw std::invalid_argument("fit_ivqr: start length");
    starts.push_back(clamp(s));
  }
  auto engine = make_engine(opt.seed, std::bit_cast<std::uint64_t>(q));
  for (int r = 0; r < opt.restarts; ++r) {
    Eigen::VectorXd s = starts.front();
    for (Eigen::Index j = 0; j < s.size(); ++j)
      s[j] += 0.5 * (std::abs(s[j]) + steps[j]) * standard_normal(engine);
    starts.push_back(clamp(s));
  }

  auto f = [&](const Eigen::VectorXd& c) { return problem.criterion(c, q, weights); };
  NelderMeadOptions nm{opt.max_evaluations, opt.tolerance, 0.0};
  double best_start_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    auto res = nelder_mead(f, starts[s], steps, lo, hi, nm);
    fit.evaluations += res.evaluations;
    if (s == 0) fit.start_criterion = res.start_value;
    best_start_value = std::min(best_start_value, res.start_value);
    if (res.value < best_value) {
      best_value = res.value;
      best = res.x;
    }
  }
  fit.restarts_used = opt.restarts;

  auto polished = polish(problem, q, std::move(best), best_value, opt, weights);
  fit.evaluations += polished.evaluations;
  fit.coefficients = std::move(polished.x);
  fit.criterion_value = polished.value;
  fit.improved = fit.criterion_value < best_start_value;
  return fit;
}

SieveFit fit_ivqr(const Sample& sample, double q, const SieveConfig& config) {
  const IvqrProblem problem(sample, config);
  return fit_ivqr(problem, q, config.optimizer);
}

SieveFit fit_ivqr_additive(const Sample& sample, double q, const SieveConfig& config) {
  validate_groups(config.additive_groups, sample.z.cols());
  return fit_ivqr(sample, q, config);
}

SieveFit refit_from(const IvqrProblem& problem, double q, const Eigen::VectorXd& start,
                    const OptimizerSettings& opt, const Eigen::VectorXd* weights) {
  check_quantile(q);
  SieveFit fit;
  fit.q = q;
  const double start_value = problem.criterion(start, q, weights);
  auto polished = polish(problem, q, start, start_value, opt, weights);
  fit.coefficients = std::move(polished.x);
  fit.criterion_value = polished.value;
  fit.start_criterion = start_value;
  fit.evaluations = polished.evaluations + 1;
  fit.improved = polished.improved;
  return fit;
}

std::vector<SieveFit> fit_ivqr_path(const IvqrProblem& problem, const QuantileGrid& grid,
                                    const OptimizerSettings& opt) {
  grid.validate();
  std::vector<SieveFit> fits;
  fits.reserve(grid.size());
  for (double q : grid.points) {
    if (fits.empty()) {
      fits.push_back(fit_ivqr(problem, q, opt));
    } else {
      const Eigen::VectorXd warm = fits.back().coefficients;
      fits.push_back(fit_ivqr(problem, q, opt, std::span<const Eigen::VectorXd>(&warm, 1)));
    }
  }
  return fits;
}

std::vector<SieveFit> fit_ivqr_path(const Sample& sample, const SieveConfig& config) {
  const IvqrProblem problem(sample, config);
  return fit_ivqr_path(problem, config.grid, config.optimizer);
}

}  // namespace ivqr
