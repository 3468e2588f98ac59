#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivqr/bootstrap.hpp"
#include "ivqr/estimation.hpp"
#include "ivqr/io.hpp"
#include "ivqr/selection.hpp"
#include "ivqr/simulation.hpp"
#include "ivqr/statistics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Options {
  std::string input;
  ivqr::ColumnMapping columns;
  double q = 0.5;
  int grid_n = 20;
  int random_grid = 0;  // > 0: that many seeded Uniform(0,1) quantiles
  int kn = 4;
  int ln = 0;  // 0: 2 kn
  int mn = 20;
  bool auto_dims = false;
  double alpha = 0.05;
  int bootstrap_b = 0;
  double sigma_eps = 0.5;
  std::uint64_t seed = 1;
  std::string out;
  int restarts = -1;

  // simulate / generate
  std::string design = "null";
  long n = 500;
  int reps = 100;
  std::optional<double> zeta;
  std::optional<double> theta;
  std::string test = "specification";
  std::string csv_out;
};

void add_data_options(CLI::App* app, Options& o) {
  app->add_option("--input", o.input, "CSV file with a header row")->required();
  app->add_option("--y", o.columns.y, "outcome column")->required();
  app->add_option("--z", o.columns.z, "endogenous regressor column (repeatable)")->required();
  app->add_option("--w", o.columns.w, "instrument column (repeatable)")->required();
  app->add_option("--d", o.columns.d, "exogenous covariate column (repeatable)");
}

void add_model_options(CLI::App* app, Options& o, bool with_q, bool with_grid) {
  if (with_q) app->add_option("--q", o.q, "quantile level")->check(CLI::Range(0.0, 1.0));
  if (with_grid) app->add_option("--grid-n", o.grid_n, "quantile grid: points i/N, i=1..N-1")->check(CLI::PositiveNumber);
  if (with_grid)
    app->add_option("--random-grid", o.random_grid, "use this many seeded uniform quantile draws instead of i/N")
        ->check(CLI::PositiveNumber);
  app->add_option("--kn", o.kn, "structural sieve dimension")->check(CLI::PositiveNumber);
  app->add_option("--ln", o.ln, "estimation instrument dimension (default 2 kn)");
  app->add_option("--mn", o.mn, "test instrument dimension")->check(CLI::PositiveNumber);
  app->add_option("--alpha", o.alpha, "nominal level")->check(CLI::Range(0.0, 1.0));
  app->add_option("--seed", o.seed, "seed for optimizer restarts, bootstrap and simulation");
  app->add_option("--restarts", o.restarts, "random optimizer restarts per quantile");
  app->add_option("--out", o.out, "output directory (report.json and CSV files); stdout when omitted");
}

ivqr::SieveConfig make_config(const Options& o) {
  ivqr::SieveConfig c;
  c.k_n = o.kn;
  c.l_n = o.ln > 0 ? o.ln : 2 * o.kn;
  c.m_n = o.mn;
  c.grid = o.random_grid > 0 ? ivqr::make_random_grid(o.random_grid, o.seed) : ivqr::make_uniform_grid(o.grid_n);
  c.optimizer.seed = o.seed;
  if (o.restarts >= 0) c.optimizer.restarts = o.restarts;
  c.validate();
  return c;
}

ivqr::BootstrapConfig make_boot(const Options& o) {
  ivqr::BootstrapConfig b;
  b.replications = o.bootstrap_b;
  b.sigma_eps = o.sigma_eps;
  b.seed = o.seed;
  b.validate();
  return b;
}

json versions() {
  return {{"ivqr", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}};
}

ivqr::IngestResult load(const Options& o) {
  auto data = ivqr::ingest_csv(o.input, o.columns);
  if (data.dropped > 0) std::cerr << "dropped " << data.dropped << " row(s) with missing or non-numeric cells\n";
  return data;
}

bool scalar_z(const ivqr::Sample& s) { return s.z.cols() == 1; }

Eigen::MatrixXd z_grid(const ivqr::Sample& s, int points = 101) {
  const double lo = s.z.col(0).minCoeff(), hi = s.z.col(0).maxCoeff();
  Eigen::MatrixXd g(points, 1);
  for (int i = 0; i < points; ++i) g(i, 0) = lo + (hi - lo) * i / (points - 1.0);
  return g;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Writer {
  std::string dir;
  std::vector<std::string> files;

  void csv(const std::string& name, const std::vector<std::string>& header, const std::vector<Eigen::VectorXd>& cols) {
    if (dir.empty()) return;
    const auto path = (fs::path(dir) / name).string();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t c = 0; c < header.size(); ++c) f << (c ? "," : "") << header[c];
    f << '\n';
    const Eigen::Index rows = cols.empty() ? 0 : cols.front().size();
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (std::size_t c = 0; c < cols.size(); ++c) f << (c ? "," : "") << fmt(cols[c][i]);
      f << '\n';
    }
    files.push_back(name);
  }

  void report(json doc) {
    if (!files.empty()) doc["files"] = files;
    doc["versions"] = versions();
    if (dir.empty()) {
      std::cout << doc.dump(2) << '\n';
      return;
    }
    const auto path = (fs::path(dir) / "report.json").string();
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << doc.dump(2) << '\n';
    std::cerr << "wrote " << path << '\n';
  }
};

Writer make_writer(const Options& o) {
  Writer w{o.out, {}};
  if (!o.out.empty()) fs::create_directories(o.out);
  return w;
}

// Fitted curves on a z grid: one column per quantile.
void write_curves(Writer& w, const ivqr::IvqrProblem& problem, const ivqr::Sample& s,
                  const std::vector<ivqr::SieveFit>& fits) {
  if (!scalar_z(s) || s.has_d()) return;
  const Eigen::MatrixXd g = z_grid(s);
  std::vector<std::string> header{"z"};
  std::vector<Eigen::VectorXd> cols{g.col(0)};
  for (const auto& f : fits) {
    header.push_back("phi_q" + fmt(f.q));
    cols.push_back(problem.structural().evaluate(g, Eigen::MatrixXd(), f.coefficients));
  }
  w.csv("curves.csv", header, cols);
}

json selection_block(const Options& o, const ivqr::Sample& s, ivqr::TestKind kind, ivqr::SieveConfig& cfg) {
  std::vector<int> ks, ms;
  for (int k = 1; k <= ivqr::max_admissible_k(s.size()); ++k) ks.push_back(k);
  for (int m = 1; m <= ivqr::max_admissible_m(s.size()); ++m) ms.push_back(m);
  const auto sel = ivqr::minmax_select(s, kind, ks, ms, o.alpha, cfg, o.q);
  cfg.k_n = sel.chosen_k;
  cfg.l_n = sel.chosen_l;
  cfg.m_n = std::max(sel.chosen_m, sel.chosen_l);
  return ivqr::to_json(sel);
}

json base_doc(const char* command, const Options& o) {
  return {{"command", command}, {"seed", o.seed}, {"input", o.input}};
}

int run_spec_test(const Options& o) {
  const auto data = load(o);
  const auto& s = data.sample;
  auto cfg = make_config(o);
  auto doc = base_doc("spec-test", o);
  doc["dropped_rows"] = data.dropped;
  if (o.auto_dims) doc["selection"] = selection_block(o, s, ivqr::TestKind::specification, cfg);
  auto w = make_writer(o);
  const ivqr::IvqrProblem problem(s, cfg);
  if (o.bootstrap_b > 0) {
    const auto out = ivqr::bootstrap_test(s, cfg, make_boot(o), o.alpha);
    doc["result"] = ivqr::to_json(out.result);
    doc["bootstrap"] = {{"replications", o.bootstrap_b},
                        {"sigma_eps", o.sigma_eps},
                        {"few_draws", out.distribution.few_draws}};
    Eigen::VectorXd idx(out.distribution.standardized.size()), val(idx.size());
    for (Eigen::Index b = 0; b < idx.size(); ++b) {
      idx[b] = static_cast<double>(b);
      val[b] = out.distribution.standardized[static_cast<std::size_t>(b)];
    }
    w.csv("bootstrap_draws.csv", {"replicate", "standardized"}, {idx, val});
    write_curves(w, problem, s, ivqr::fit_ivqr_path(problem, cfg.grid, cfg.optimizer));
  } else {
    const auto fits = ivqr::fit_ivqr_path(problem, cfg.grid, cfg.optimizer);
    const auto instruments = ivqr::make_instrument_space(s, cfg.m_n, cfg.include_d_linear);
    const double raw = ivqr::statistic_Sn(s, problem, fits, cfg.grid, instruments);
    const int m = instruments.dimension();
    auto r = ivqr::decide("specification", raw, ivqr::standardize_Sn(raw, m), o.alpha,
                          ivqr::normal_critical_value(o.alpha), ivqr::CriticalSource::asymptotic_normal);
    r.k_n = cfg.k_n;
    r.l_n = cfg.l_n;
    r.m_n = m;
    r.grid = cfg.grid;
    doc["result"] = ivqr::to_json(r);
    write_curves(w, problem, s, fits);
  }
  w.report(doc);
  return 0;
}

int run_spec_test_q(const Options& o, bool additive) {
  const auto data = load(o);
  const auto& s = data.sample;
  auto cfg = make_config(o);
  if (additive) {
    if (s.z.cols() < 2) throw std::invalid_argument("add-test needs at least two --z columns");
    for (Eigen::Index g = 0; g < s.z.cols(); ++g) cfg.additive_groups.push_back({static_cast<int>(g)});
  }
  auto doc = base_doc(additive ? "add-test" : "spec-test-q", o);
  doc["dropped_rows"] = data.dropped;
  if (o.auto_dims && !additive) doc["selection"] = selection_block(o, s, ivqr::TestKind::specification_at, cfg);
  auto w = make_writer(o);
  const ivqr::IvqrProblem problem(s, cfg);
  const auto fit = ivqr::fit_ivqr(problem, o.q, cfg.optimizer);
  const auto instruments = ivqr::make_instrument_space(s, cfg.m_n, cfg.include_d_linear);
  const double raw = ivqr::statistic_Sn_at(s, problem, fit, instruments);
  const int m = instruments.dimension();
  auto r = ivqr::decide(additive ? "additivity" : "specification-q", raw, ivqr::standardize_Sn_at(raw, o.q, m),
                        o.alpha, ivqr::normal_critical_value(o.alpha), ivqr::CriticalSource::asymptotic_normal);
  r.k_n = cfg.k_n;
  r.l_n = cfg.l_n;
  r.m_n = m;
  r.grid = ivqr::make_point_grid(o.q);
  doc["result"] = ivqr::to_json(r);
  doc["optimizer"] = {{"criterion", fit.criterion_value},
                      {"evaluations", fit.evaluations},
                      {"rank_deficient", fit.rank_deficient}};
  write_curves(w, problem, s, {fit});
  if (s.w.cols() == 1 && !s.has_d()) {
    const auto space = ivqr::InstrumentSpace::fit_to(s.w, cfg.m_n);
    const Eigen::MatrixXd wg = ivqr::default_w_grid(s);
    const Eigen::VectorXd curve =
        ivqr::series_curve(ivqr::indicator_residuals(s, problem.phi(fit.coefficients), o.q), space, wg);
    doc["deviation_min"] = curve.minCoeff();
    w.csv("deviation_curve.csv", {"w", "deviation"}, {wg.col(0), curve});
  }
  w.report(doc);
  return 0;
}

int run_exog_test(const Options& o) {
  const auto data = load(o);
  const auto& s = data.sample;
  auto cfg = make_config(o);
  auto doc = base_doc("exog-test", o);
  doc["dropped_rows"] = data.dropped;
  if (o.auto_dims) doc["selection"] = selection_block(o, s, ivqr::TestKind::exogeneity, cfg);
  auto w = make_writer(o);
  const auto r = ivqr::exog_test(s, o.q, cfg.k_n, cfg.m_n, o.alpha, cfg.include_d_linear);
  doc["result"] = ivqr::to_json(r);
  if (scalar_z(s) && !s.has_d()) {
    const auto structural = ivqr::StructuralSpace::unrestricted(s, cfg.k_n, false);
    const auto fit = ivqr::fit_cqr(structural.design(), s.y, o.q);
    const Eigen::MatrixXd g = z_grid(s);
    w.csv("curves.csv", {"z", "phi_q" + fmt(o.q)},
          {g.col(0), structural.evaluate(g, Eigen::MatrixXd(), fit.coefficients)});
  }
  w.report(doc);
  return 0;
}

int run_select(const Options& o) {
  const auto data = load(o);
  const auto& s = data.sample;
  auto cfg = make_config(o);
  ivqr::TestKind kind = ivqr::TestKind::specification_at;
  if (o.test == "specification") kind = ivqr::TestKind::specification;
  else if (o.test == "exogeneity") kind = ivqr::TestKind::exogeneity;
  else if (o.test != "specification-q") throw std::invalid_argument("unknown --test '" + o.test + "'");
  auto doc = base_doc("select-dims", o);
  doc["dropped_rows"] = data.dropped;
  doc["lattice_bounds"] = {{"k_max", ivqr::max_admissible_k(s.size())}, {"m_max", ivqr::max_admissible_m(s.size())}};
  doc["selection"] = selection_block(o, s, kind, cfg);
  make_writer(o).report(doc);
  return 0;
}

ivqr::DgpSpec make_spec(const Options& o) {
  auto spec = ivqr::DgpSpec::parse(o.design, o.n, o.seed);
  if (o.zeta) spec.zeta = *o.zeta;
  if (o.theta) spec.theta = *o.theta;
  spec.validate();
  return spec;
}

int run_simulate(const Options& o) {
  const auto spec = make_spec(o);
  ivqr::TestPlan plan;
  plan.kind = ivqr::parse_plan_kind(o.test);
  plan.config = make_config(o);
  plan.q = o.q;
  if (plan.kind == ivqr::TestPlan::Kind::bootstrap) plan.bootstrap = make_boot(o);
  const auto report = ivqr::run_monte_carlo(spec, plan, o.reps, o.alpha);
  auto w = make_writer(o);
  Eigen::VectorXd idx(o.reps), val(o.reps), rej(o.reps);
  for (int r = 0; r < o.reps; ++r) {
    idx[r] = r;
    val[r] = report.standardized[static_cast<std::size_t>(r)];
    rej[r] = report.rejected[static_cast<std::size_t>(r)];
  }
  w.csv("replications.csv", {"replication", "standardized", "reject"}, {idx, val, rej});
  auto doc = base_doc("simulate", o);
  doc.erase("input");
  doc["report"] = ivqr::to_json(report);
  w.report(doc);
  return 0;
}

int run_generate(const Options& o) {
  const auto spec = make_spec(o);
  const auto sample = ivqr::gen_sample(spec);
  if (o.csv_out.empty()) {
    ivqr::write_csv(std::cout, sample, ivqr::default_mapping(sample));
  } else {
    ivqr::write_csv(o.csv_out, sample, ivqr::default_mapping(sample));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Specification, exogeneity and additivity tests for instrumental quantile regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;

  auto* spec = app.add_subcommand("spec-test", "quantile-integrated specification test");
  add_data_options(spec, o);
  add_model_options(spec, o, false, true);
  spec->add_flag("--auto-dims", o.auto_dims, "choose (k_n, m_n) by the min-max rule");
  spec->add_option("--bootstrap-b", o.bootstrap_b, "multiplier bootstrap replications (0: normal critical value)");
  spec->add_option("--sigma-eps", o.sigma_eps, "multiplier weight standard deviation");

  auto* specq = app.add_subcommand("spec-test-q", "specification test at one quantile");
  add_data_options(specq, o);
  add_model_options(specq, o, true, false);
  specq->add_flag("--auto-dims", o.auto_dims, "choose (k_n, m_n) by the min-max rule");

  auto* exog = app.add_subcommand("exog-test", "exogeneity test at one quantile");
  add_data_options(exog, o);
  add_model_options(exog, o, true, false);
  exog->add_flag("--auto-dims", o.auto_dims, "choose (k_n, m_n) by the min-max rule");

  auto* add = app.add_subcommand("add-test", "additivity test at one quantile (one group per z column)");
  add_data_options(add, o);
  add_model_options(add, o, true, false);

  auto* select = app.add_subcommand("select-dims", "min-max dimension selection");
  add_data_options(select, o);
  add_model_options(select, o, true, true);
  select->add_option("--test", o.test, "specification | specification-q | exogeneity")
      ->default_str("specification-q");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection frequencies");
  add_model_options(sim, o, true, true);
  sim->add_option("--design", o.design, "null, alt_rho1..4, nonmono_null, nonmono_alt1_j, nonmono_alt2_j, exog, ...");
  sim->add_option("--n", o.n, "sample size")->check(CLI::PositiveNumber);
  sim->add_option("--reps", o.reps, "replications")->check(CLI::PositiveNumber);
  sim->add_option("--zeta", o.zeta, "instrument strength")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--theta", o.theta, "endogeneity")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--test", o.test,
                  "specification | specification-q | exogeneity | additivity | specification-bootstrap | true-phi | true-phi-q");
  sim->add_option("--bootstrap-b", o.bootstrap_b, "bootstrap replications for specification-bootstrap");
  sim->add_option("--sigma-eps", o.sigma_eps, "multiplier weight standard deviation");

  auto* gen = app.add_subcommand("generate", "write a simulated sample as CSV");
  gen->add_option("--design", o.design, "design name");
  gen->add_option("--n", o.n, "sample size")->check(CLI::PositiveNumber);
  gen->add_option("--seed", o.seed, "seed");
  gen->add_option("--zeta", o.zeta, "instrument strength")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--theta", o.theta, "endogeneity")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", o.csv_out, "CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (spec->parsed()) return run_spec_test(o);
    if (specq->parsed()) return run_spec_test_q(o, false);
    if (exog->parsed()) return run_exog_test(o);
    if (add->parsed()) return run_spec_test_q(o, true);
    if (select->parsed()) return run_select(o);
    if (sim->parsed()) {
      if (o.test == "specification-bootstrap" && o.bootstrap_b <= 0)
        throw std::invalid_argument("specification-bootstrap needs --bootstrap-b > 0");
      return run_simulate(o);
    }
    if (gen->parsed()) return run_generate(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
