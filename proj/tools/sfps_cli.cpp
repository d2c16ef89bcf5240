// sfps: balancing weights and effect curves for functional treatments.
#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfps/balance.hpp"
#include "sfps/csv.hpp"
#include "sfps/errors.hpp"
#include "sfps/fpca.hpp"
#include "sfps/metrics.hpp"
#include "sfps/pipeline.hpp"
#include "sfps/simgen.hpp"

namespace fs = std::filesystem;
using namespace sfps;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

struct Options {
  std::string config;
  std::string curves, data, weights, design;
  std::vector<std::string> weight_files;
  std::string estimates, truth;
  std::string outcome = "y", group;
  std::vector<double> pve_l{0.95, 0.99};
  std::vector<double> pve_lstar{0.95, 0.99};
  std::vector<std::string> methods;
  double rho = 0.0;
  bool hvec_literal = false;
  bool printed_outer_sign = false;
  bool strict_mom = false;
  int bootstrap = 0;
  double level = 0.99;
  bool frozen_weights = false;
  double avi_share = 0.0;
  std::uint64_t seed = 1;
  std::string out = "sfps-out";
  std::vector<int> settings{1};
  int runs = 200, n = 200, grid_size = 128;
  bool sd_parameterization = false;
  bool write_datasets = false;
};

std::vector<std::string> split_values(const std::string& raw) {
  std::string s = raw;
  for (char& c : s) {
    if (c == ',' || c == '[' || c == ']' || c == '{' || c == '}' || c == '"') c = ' ';
  }
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flat key=value file; options given on the command line keep their values.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ConversionError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw CLI::ConversionError(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                 "'");
    }
    if (opt->count() > 0) continue;
    const auto values = split_values(line.substr(eq + 1));
    if (opt->get_expected_max() == 0) {
      if (values.empty() || values[0] == "true" || values[0] == "1") {
        opt->add_result("true");
        opt->run_callback();
      }
      continue;
    }
    opt->clear();
    for (const auto& v : values) opt->add_result(v);
    opt->run_callback();
  }
}

std::string manifest_value(const CLI::Option* opt) {
  if (opt->get_expected_max() == 0) return opt->count() > 0 ? "true" : "false";
  std::vector<std::string> vals;
  if (opt->count() > 0) {
    vals = opt->results();
  } else {
    vals = split_values(opt->get_default_str());
  }
  std::string joined;
  for (const auto& v : vals) joined += (joined.empty() ? "" : " ") + v;
  return joined;
}

void write_manifest(const CLI::App* sub, const fs::path& dir,
                    const std::vector<fs::path>& outputs) {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  out << "# sfps " << kVersion << "\n";
  out << "# rerun: sfps " << sub->get_name() << " --config manifest.txt\n";
  out << "# eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
      << EIGEN_MINOR_VERSION << ", boost " << BOOST_VERSION / 100000 << "."
      << BOOST_VERSION / 100 % 1000 << "." << BOOST_VERSION % 100 << "\n";
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const std::string value = manifest_value(opt);
    if (value.empty() && opt->get_expected_max() != 0) continue;
    out << name << "=" << value << "\n";
  }
  std::vector<std::string> rel;
  for (const auto& p : outputs) rel.push_back(fs::relative(p, dir).generic_string());
  std::sort(rel.begin(), rel.end());
  rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
  for (const auto& r : rel) out << "# output: " << r << "\n";
}

std::vector<BalanceMethod> parse_methods(const std::vector<std::string>& names,
                                         std::vector<BalanceMethod> fallback) {
  if (names.empty()) return fallback;
  std::vector<BalanceMethod> out;
  for (const auto& raw : names) {
    for (const auto& n : split_values(raw)) {
      const BalanceMethod m = parse_balance_method(n);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
  }
  return out;
}

ExperimentConfig experiment(const Options& o, std::vector<BalanceMethod> default_methods) {
  ExperimentConfig c;
  c.curves = o.curves;
  c.data = o.data;
  c.weights = o.weights;
  c.columns.outcome = o.outcome;
  c.columns.group = o.group;
  c.pve_l = o.pve_l;
  c.pve_lstar = o.pve_lstar;
  c.methods = parse_methods(o.methods, std::move(default_methods));
  c.rho = o.rho;
  c.hvec_literal = o.hvec_literal;
  c.printed_outer_sign = o.printed_outer_sign;
  c.strict_mom = o.strict_mom;
  c.bootstrap = o.bootstrap;
  c.level = o.level;
  c.frozen_weights = o.frozen_weights;
  c.avi_share = o.avi_share;
  c.out = o.out;
  c.seed = o.seed;
  validate(c);
  return c;
}

const std::vector<BalanceMethod> kAllMethods{BalanceMethod::kUnweighted, BalanceMethod::kParametric,
                                             BalanceMethod::kNonparametric};
const std::vector<BalanceMethod> kWeightedMethods{BalanceMethod::kParametric,
                                                  BalanceMethod::kNonparametric};

// ---------------------------------------------------------------- commands

int cmd_validate(const Options& o) {
  std::optional<fs::path> data;
  if (!o.data.empty()) data = o.data;
  DataColumns cols;
  cols.outcome = o.outcome;
  cols.group = o.group;
  const SchemaReport report = validate_inputs(o.curves, data, cols);
  for (const auto& v : report.violations) std::cout << v.to_string() << "\n";
  if (report.ok()) {
    std::cout << "ok\n";
    return kOk;
  }
  return kData;
}

int cmd_fpca(const Options& o, std::vector<fs::path>& files) {
  const FunctionalSample sample = read_curves(o.curves);
  const FpcaModel model = decompose(sample);
  const fs::path dir = o.out;
  const Vector& t = sample.grid().points();
  {
    files.push_back(dir / "eigenvalues.csv");
    CsvWriter w(files.back());
    w.cells("component", "eigenvalue", "pve", "cumulative_pve");
    const double total = model.eigenvalues.sum();
    for (Index k = 0; k < model.components(); ++k)
      w.cells(static_cast<int>(k + 1), model.eigenvalues[k], model.eigenvalues[k] / total,
              model.pve[k]);
  }
  {
    files.push_back(dir / "ranks.csv");
    CsvWriter w(files.back());
    w.cells("pve", "rank");
    for (double p : o.pve_l) w.cells(p, static_cast<int>(select_rank(model, p)));
  }
  {
    files.push_back(dir / "eigenfunctions.csv");
    CsvWriter w(files.back());
    std::vector<std::string> head{"t", "mean"};
    for (Index k = 0; k < model.components(); ++k) head.push_back("phi" + std::to_string(k + 1));
    w.row(head);
    for (Index j = 0; j < t.size(); ++j) {
      std::vector<std::string> row{format_double(t[j]), format_double(model.mean[j])};
      for (Index k = 0; k < model.components(); ++k)
        row.push_back(format_double(model.eigenfunctions(k, j)));
      w.row(row);
    }
  }
  {
    files.push_back(dir / "scores.csv");
    CsvWriter w(files.back());
    std::vector<std::string> head{"subject"};
    for (Index k = 0; k < model.components(); ++k) head.push_back("a" + std::to_string(k + 1));
    w.row(head);
    for (Index i = 0; i < model.scores.rows(); ++i) {
      std::vector<std::string> row{std::to_string(i + 1)};
      for (Index k = 0; k < model.components(); ++k)
        row.push_back(format_double(model.scores(i, k)));
      w.row(row);
    }
  }
  std::cout << "components: " << model.components() << "\n";
  return kOk;
}

void write_weight_files(const BalanceWeights& bw, const fs::path& dir, const std::string& name,
                        std::vector<fs::path>& files) {
  files.push_back(dir / ("weights_" + name + ".csv"));
  {
    CsvWriter w(files.back());
    w.cells("subject", "weight");
    for (Index i = 0; i < bw.weights.size(); ++i) w.cells(static_cast<int>(i + 1), bw.weights[i]);
  }
  files.push_back(dir / ("weight_diagnostics_" + name + ".csv"));
  CsvWriter d(files.back());
  d.cells("key", "value");
  d.cells("sum_residual", bw.residuals.sum_residual);
  for (Index k = 0; k < bw.residuals.score_sum.size(); ++k)
    d.cells("score_sum_" + std::to_string(k + 1), bw.residuals.score_sum[k]);
  for (Index j = 0; j < bw.residuals.covariate_sum.size(); ++j)
    d.cells("covariate_sum_" + std::to_string(j + 1), bw.residuals.covariate_sum[j]);
  d.cells("cross_moment_norm", bw.residuals.cross_moment.norm());
  d.cells("min_weight", bw.weights.minCoeff());
  d.cells("max_weight", bw.weights.maxCoeff());
  if (bw.param) {
    d.cells("moment_residual_rms", bw.param->moment_residual_norm);
    d.cells("iterations", bw.param->iterations);
    d.cells("pd_projected", bw.param->pd_projected ? 1 : 0);
    d.cells("exact_root", bw.param->exact_root ? 1 : 0);
  }
  if (bw.nonparam) {
    d.cells("theta_hat", bw.nonparam->theta_hat);
    d.cells("inner_objective", bw.nonparam->inner_objective);
    d.cells("profile_objective", bw.nonparam->profile_objective);
    d.cells("rescaled", bw.nonparam->rescaled ? 1 : 0);
    d.cells("infeasible_grid_points", static_cast<int>(bw.nonparam->infeasible_thetas.size()));
    for (double th : bw.nonparam->infeasible_thetas) d.cells("infeasible_theta", th);
  }
}

int cmd_balance(const Options& o, std::vector<fs::path>& files) {
  ExperimentConfig cfg = experiment(o, kWeightedMethods);
  const fs::path dir = o.out;
  std::vector<std::pair<std::string, StandardizedDesign>> designs;
  if (!o.design.empty()) {
    std::vector<std::string> names;
    const Matrix table = read_numeric_table(o.design, &names);
    std::vector<Index> a_cols, c_cols;
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& nm = names[j];
      const bool score = nm.size() > 1 && nm[0] == 'a' &&
                         std::all_of(nm.begin() + 1, nm.end(), [](char c) { return std::isdigit(c); });
      (score ? a_cols : c_cols).push_back(static_cast<Index>(j));
    }
    if (a_cols.empty() || c_cols.empty()) {
      throw SchemaError(o.design + ": needs score columns a1, a2, ... and covariate columns");
    }
    designs.emplace_back("design", make_design(table(Eigen::all, a_cols), table(Eigen::all, c_cols)));
  } else {
    const FunctionalSample sample = read_curves(o.curves);
    const SubjectData data = read_subject_data(o.data, cfg.columns);
    const FpcaModel model = decompose(sample);
    for (double pl : cfg.pve_l) {
      designs.emplace_back("L" + pve_tag(pl),
                           standardize(model, select_rank(model, pl), data.covariates));
    }
  }
  int status = kOk;
  for (const auto& [tag, design] : designs) {
    for (auto m : cfg.methods) {
      const std::string name = to_string(m) + "_" + tag;
      try {
        write_weight_files(estimate_weights(m, design, cfg), dir, name, files);
        std::cout << name << ": ok\n";
      } catch (const SolverError& e) {
        std::cout << name << ": FAILED " << e.what() << "\n";
        status = kSolver;
      }
    }
  }
  return status;
}

int cmd_fit(const Options& o, std::vector<fs::path>& files) {
  ExperimentConfig cfg = experiment(o, kAllMethods);
  const PipelineReport report = run_pipeline(cfg);
  files.insert(files.end(), report.outputs.begin(), report.outputs.end());
  std::cout << report.summary;
  return report.failures.empty() ? kOk : kSolver;
}

int cmd_diagnostics(const Options& o, std::vector<fs::path>& files) {
  const fs::path dir = o.out;
  bool did = false;
  if (!o.curves.empty() && !o.data.empty()) {
    DataColumns cols;
    cols.outcome = o.outcome;
    cols.group = o.group;
    const FunctionalSample sample = read_curves(o.curves);
    const SubjectData data = read_subject_data(o.data, cols);
    const FpcaModel model = decompose(sample);
    std::map<std::string, Vector> weightings{{"unweighted", Vector()}};
    for (const auto& wf : o.weight_files) {
      Vector w = read_weights(wf);
      if (w.size() != sample.size()) throw SchemaError(wf + ": wrong number of weights");
      weightings.emplace(fs::path(wf).stem().string(), std::move(w));
    }
    for (double pl : o.pve_l) {
      const Index L = select_rank(model, pl);
      const StandardizedDesign design = standardize(model, L, data.covariates);
      const BalanceReport rep = balance_report(design.a_star, data.covariates, weightings);
      files.push_back(dir / ("balance_L" + pve_tag(pl) + ".csv"));
      CsvWriter fw(files.back());
      fw.cells("fpc", "method", "f_statistic", "infinite");
      for (const auto& [label, fs_] : rep.f_statistics)
        for (std::size_t k = 0; k < fs_.size(); ++k)
          fw.cells(static_cast<int>(k + 1), label, fs_[k].value, fs_[k].infinite ? 1 : 0);
      files.push_back(dir / ("correlations_L" + pve_tag(pl) + ".csv"));
      CsvWriter cw(files.back());
      cw.cells("fpc", "covariate", "method", "abs_correlation");
      for (const auto& [label, m] : rep.correlations)
        for (Index k = 0; k < m.rows(); ++k)
          for (Index j = 0; j < m.cols(); ++j)
            cw.cells(static_cast<int>(k + 1), data.covariate_names[static_cast<std::size_t>(j)],
                     label, m(k, j));
    }
    did = true;
  }
  if (!o.estimates.empty() && !o.truth.empty()) {
    const FunctionalSample est = read_curves(o.estimates);
    const FunctionalSample truth = read_curves(o.truth);
    if (!(est.grid() == truth.grid()) || truth.size() != 1) {
      throw SchemaError(o.truth + ": needs one curve on the estimates grid");
    }
    const Vector mu = truth.values().row(0).transpose();
    const AccuracyReport rep = summarize_runs(est.values(), mu, est.grid());
    files.push_back(dir / "accuracy.csv");
    {
      CsvWriter w(files.back());
      w.cells("runs", "mise", "aise", "isb");
      w.cells(static_cast<int>(rep.runs), rep.mise, rep.aise, rep.isb);
    }
    files.push_back(dir / "ise.csv");
    CsvWriter w(files.back());
    w.cells("run", "ise");
    for (Index r = 0; r < rep.ise.size(); ++r) w.cells(static_cast<int>(r + 1), rep.ise[r]);
    did = true;
  }
  if (!did) {
    throw CLI::ValidationError("diagnostics",
                               "needs --curves and --data, or --estimates and --truth");
  }
  return kOk;
}

int cmd_simulate(const Options& o, std::vector<fs::path>& files) {
  ExperimentConfig cfg = experiment(o, kAllMethods);
  std::vector<SimulationResult> results;
  for (int s : o.settings) {
    SimConfig sim;
    sim.setting = s;
    sim.n = o.n;
    sim.grid_size = o.grid_size;
    sim.seed = o.seed;
    sim.runs = o.runs;
    sim.sd_parameterization = o.sd_parameterization;
    results.push_back(run_simulation(sim, cfg));
    std::cout << format_summary_table(results.back()) << "\n";
  }
  const auto written = write_simulation(results, o.out, o.write_datasets, cfg);
  files.insert(files.end(), written.begin(), written.end());
  for (const auto& r : results)
    if (!r.failures.empty()) std::cout << "solver failures: see summary.txt\n";
  return kOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key=value file; command-line flags take precedence");
  sub->add_option("--out", o.out, "output directory");
}

void add_data(CLI::App* sub, Options& o) {
  sub->add_option("--curves", o.curves, "curves CSV (first row: grid)");
  sub->add_option("--data", o.data, "subject CSV with outcome and covariates");
  sub->add_option("--outcome", o.outcome, "outcome column");
  sub->add_option("--group", o.group, "binary group column");
}

void add_balance(CLI::App* sub, Options& o) {
  sub->add_option("--pve-l", o.pve_l, "PVE thresholds for the balancing rank");
  sub->add_option("--method", o.methods, "unweighted, parametric, nonparametric");
  sub->add_option("--rho", o.rho, "EL penalty (0: 0.1/n)");
  sub->add_flag("--hvec-literal", o.hvec_literal, "scale the target by n inside each moment");
  sub->add_flag("--printed-outer-sign", o.printed_outer_sign,
                "outer loop maximizes inner objective minus penalty");
  sub->add_flag("--strict-mom", o.strict_mom,
                "fail instead of keeping the least-squares parametric solution");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-balancing weights and effect estimates for functional treatments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto* fpca = app.add_subcommand("fpca", "eigenvalues, PVE, eigenfunctions and scores");
  add_common(fpca, o);
  fpca->add_option("--curves", o.curves, "curves CSV")->required();
  fpca->add_option("--pve-l", o.pve_l, "PVE thresholds to report ranks for");

  auto* balance = app.add_subcommand("balance", "balancing weights");
  add_common(balance, o);
  add_data(balance, o);
  add_balance(balance, o);
  balance->add_option("--design", o.design, "design CSV: score columns a1..aL, then covariates");

  auto* fit = app.add_subcommand("fit", "weighted effect curves, bands and coefficient tables");
  add_common(fit, o);
  add_data(fit, o);
  add_balance(fit, o);
  fit->add_option("--weights", o.weights, "precomputed weights CSV");
  fit->add_option("--pve-lstar", o.pve_lstar, "PVE thresholds for the outcome model rank");
  fit->add_option("--avi-share", o.avi_share, "select components by AVI share (0: off)");
  fit->add_option("--bootstrap", o.bootstrap, "bootstrap replicates (0: off)");
  fit->add_option("--level", o.level, "band level");
  fit->add_flag("--frozen-weights", o.frozen_weights, "resample weights instead of refitting");
  fit->add_option("--seed", o.seed, "bootstrap seed");

  auto* diag = app.add_subcommand("diagnostics", "balance and accuracy reports");
  add_common(diag, o);
  add_data(diag, o);
  diag->add_option("--pve-l", o.pve_l, "PVE thresholds for the balancing rank");
  diag->add_option("--weights", o.weight_files, "weights CSVs to compare");
  diag->add_option("--estimates", o.estimates, "estimated curves, one run per row");
  diag->add_option("--truth", o.truth, "true effect curve");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(sim, o);
  add_balance(sim, o);
  sim->add_option("--setting", o.settings, "settings 1-4");
  sim->add_option("--pve-lstar", o.pve_lstar, "PVE thresholds for the outcome model rank");
  sim->add_option("--runs", o.runs, "runs per setting");
  sim->add_option("--n", o.n, "subjects per run");
  sim->add_option("--grid-size", o.grid_size, "grid points");
  sim->add_option("--seed", o.seed, "master seed");
  sim->add_flag("--sd-parameterization", o.sd_parameterization,
                "read N(0, v) as standard deviation v");
  sim->add_flag("--write-datasets", o.write_datasets, "write every generated dataset");

  auto* val = app.add_subcommand("validate", "check input files");
  val->add_option("--curves", o.curves, "curves CSV")->required();
  val->add_option("--data", o.data, "subject CSV");
  val->add_option("--outcome", o.outcome, "outcome column");
  val->add_option("--group", o.group, "binary group column");

  CLI::App* sub = nullptr;
  try {
    app.parse(argc, argv);
    sub = app.get_subcommands().front();
    if (!o.config.empty()) apply_config(sub, o.config);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  std::vector<fs::path> files;
  int status = kOk;
  try {
    if (sub == val) return cmd_validate(o);
    if (sub == fpca) status = cmd_fpca(o, files);
    if (sub == balance) status = cmd_balance(o, files);
    if (sub == fit) status = cmd_fit(o, files);
    if (sub == diag) status = cmd_diagnostics(o, files);
    if (sub == sim) status = cmd_simulate(o, files);
    write_manifest(sub, o.out, files);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kData;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kData;
  }
  return status;
}
