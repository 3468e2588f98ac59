#include "ivqr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace ivqr {

int max_admissible_k(Eigen::Index n) {
  int k = 0;
  while (std::pow(static_cast<double>(k + 1), 4) < static_cast<double>(n)) ++k;
  return k;
}

int max_admissible_m(Eigen::Index n) {
  int m = 0;
  while (static_cast<double>(m + 1) * (m + 1) < static_cast<double>(n)) ++m;
  return m;
}

std::vector<SelectionCell> admissible_lattice(Eigen::Index n, std::span<const int> ks, std::span<const int> ms) {
  if (ks.empty() || ms.empty()) throw std::invalid_argument("dimension selection: empty candidate set");
  const int kmax = max_admissible_k(n), mmax = max_admissible_m(n);
  std::vector<int> k_ok, m_ok;
  for (int k : ks)
    if (k >= 1 && k <= kmax) k_ok.push_back(k);
  for (int m : ms)
    if (m >= 1 && m <= mmax) m_ok.push_back(m);
  if (k_ok.empty())
    throw std::invalid_argument("dimension selection: no candidate k satisfies k < n^(1/4) (max " +
                                std::to_string(kmax) + ")");
  if (m_ok.empty())
    throw std::invalid_argument("dimension selection: no candidate m satisfies m < n^(1/2) (max " +
                                std::to_string(mmax) + ")");
  std::sort(k_ok.begin(), k_ok.end());
  k_ok.erase(std::unique(k_ok.begin(), k_ok.end()), k_ok.end());
  std::sort(m_ok.begin(), m_ok.end());
  m_ok.erase(std::unique(m_ok.begin(), m_ok.end()), m_ok.end());
  std::vector<SelectionCell> cells;
  for (int k : k_ok)
    for (int m : m_ok)
      if (k * k <= m) cells.push_back({k, m, std::numeric_limits<double>::quiet_NaN()});
  if (cells.empty()) throw std::invalid_argument("dimension selection: no candidate pair satisfies k^2 <= m");
  return cells;
}

SelectionResult reduce_minmax(std::vector<SelectionCell> table) {
  if (table.empty()) throw std::invalid_argument("dimension selection: empty table");
  std::stable_sort(table.begin(), table.end(), [](const SelectionCell& a, const SelectionCell& b) {
    return a.k_n != b.k_n ? a.k_n < b.k_n : a.m_n < b.m_n;
  });
  SelectionResult out;
  bool have = false;
  for (std::size_t i = 0; i < table.size();) {
    std::size_t j = i;
    const SelectionCell* row_max = &table[i];
    for (; j < table.size() && table[j].k_n == table[i].k_n; ++j)
      if (table[j].statistic > row_max->statistic) row_max = &table[j];
    if (!have || row_max->statistic < out.statistic_at_choice) {
      out.chosen_k = row_max->k_n;
      out.chosen_m = row_max->m_n;
      out.statistic_at_choice = row_max->statistic;
      have = true;
    }
    i = j;
  }
  out.chosen_l = 2 * out.chosen_k;
  out.table = std::move(table);
  return out;
}

SelectionResult minmax_select(const Sample& sample, TestKind kind, std::span<const int> ks, std::span<const int> ms,
                              double alpha, const SieveConfig& base, double q) {
  sample.validate();
  auto cells = admissible_lattice(sample.size(), ks, ms);
  std::map<int, std::vector<Eigen::VectorXd>> phis_by_k;  // fitted values per grid point (or at q)
  QuantileGrid grid = kind == TestKind::specification ? base.grid : make_point_grid(q);
  for (const auto& c : cells) {
    if (phis_by_k.count(c.k_n)) continue;
    SieveConfig cfg = base;
    cfg.k_n = c.k_n;
    cfg.l_n = 2 * c.k_n;
    cfg.m_n = std::max(cfg.m_n, cfg.l_n);
    std::vector<Eigen::VectorXd> phis;
    if (kind == TestKind::exogeneity) {
      const auto s = StructuralSpace::unrestricted(sample, c.k_n, cfg.include_d_linear);
      phis.push_back(s.design() * fit_cqr(s.design(), sample.y, q).coefficients);
    } else {
      const IvqrProblem problem(sample, cfg);
      if (kind == TestKind::specification) {
        for (const auto& f : fit_ivqr_path(problem, grid, cfg.optimizer)) phis.push_back(problem.phi(f.coefficients));
      } else {
        phis.push_back(problem.phi(fit_ivqr(problem, q, cfg.optimizer).coefficients));
      }
    }
    phis_by_k[c.k_n] = std::move(phis);
  }
  for (auto& c : cells) {
    const auto instruments = make_instrument_space(sample, c.m_n, base.include_d_linear);
    const int m = instruments.dimension();
    const auto& phis = phis_by_k.at(c.k_n);
    if (kind == TestKind::specification) {
      c.statistic = standardize_Sn(statistic_Sn(sample, phis, grid, instruments), m);
    } else {
      c.statistic = standardize_Sn_at(statistic_Sn_at(sample.y, phis.front(), q, instruments), q, m);
    }
  }
  auto out = reduce_minmax(std::move(cells));
  const char* name = kind == TestKind::specification    ? "specification"
                     : kind == TestKind::specification_at ? "specification-q"
                                                          : "exogeneity";
  out.decision = decide(name, std::numeric_limits<double>::quiet_NaN(), out.statistic_at_choice, alpha,
                        normal_critical_value(alpha), CriticalSource::asymptotic_normal);
  out.decision.k_n = out.chosen_k;
  out.decision.l_n = kind == TestKind::exogeneity ? 0 : out.chosen_l;
  out.decision.m_n = out.chosen_m;
  out.decision.grid = grid;
  // Raw value at the chosen cell.
  const auto instruments = make_instrument_space(sample, out.chosen_m, base.include_d_linear);
  const int m = instruments.dimension();
  out.decision.raw = kind == TestKind::specification ? unstandardize_Sn(out.statistic_at_choice, m)
                                                     : unstandardize_Sn_at(out.statistic_at_choice, q, m);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// A^{-1/2} for symmetric PSD A, pseudo-inverting null directions.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  Eigen::VectorXd lam = eig.eigenvalues();
  const double cutoff = kDefaultPinvTolerance * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < lam.size(); ++i) lam[i] = lam[i] > cutoff ? 1.0 / std::sqrt(lam[i]) : 0.0;
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

IllPosednessDiagnostic illposedness_diag(const Sample& sample, const SieveFit& fit, int k_n, int w_dimension) {
  check_quantile(fit.q);
  const auto structural = StructuralSpace::unrestricted(sample, k_n, false);
  if (fit.coefficients.size() != structural.dimension())
    throw std::invalid_argument("illposedness_diag: fit does not match a k_n-dimensional Z basis");
  const int wd = w_dimension > 0 ? w_dimension : k_n;
  const Eigen::MatrixXd wmat = TensorBasis::fit_to(sample.w, wd).design(sample.w);
  const Eigen::MatrixXd& x = structural.design();
  const auto n = static_cast<double>(sample.size());
  const double h = std::pow(n, -0.2) * std::max(sample_sd(sample.y), 1e-12);
  const int k = structural.dimension();

  auto moment = [&](const Eigen::VectorXd& coef) {
    const Eigen::VectorXd phi = x * coef;
    Eigen::VectorXd r(sample.size());
    for (Eigen::Index i = 0; i < sample.size(); ++i) r[i] = (sample.y[i] <= phi[i] ? 1.0 : 0.0) - fit.q;
    return Eigen::VectorXd(wmat.transpose() * r / n);
  };

  Eigen::MatrixXd deriv(wmat.cols(), k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd up = fit.coefficients, down = fit.coefficients;
    up[j] += h;
    down[j] -= h;
    deriv.col(j) = (moment(up) - moment(down)) / (2.0 * h);
  }

  IllPosednessDiagnostic out;
  out.singular_values = Eigen::VectorXd::Zero(k);
  if (deriv.cwiseAbs().maxCoeff() == 0.0) {
    out.degenerate = true;
    return out;
  }
  const Eigen::MatrixXd gz = x.transpose() * x / n;
  const Eigen::MatrixXd gw = wmat.transpose() * wmat / n;
  const Eigen::MatrixXd normalized = inverse_sqrt(gw) * deriv * inverse_sqrt(gz);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normalized);
  const Eigen::VectorXd sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size() && i < k; ++i) out.singular_values[i] = sv[i];
  std::sort(out.singular_values.data(), out.singular_values.data() + k);
  return out;
}

}  // namespace ivqr
