#include "sfps/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "sfps/balance_np.hpp"
#include "sfps/balance_param.hpp"
#include "sfps/errors.hpp"
#include "sfps/fpca.hpp"

namespace sfps {

namespace fs = std::filesystem;

void validate(const ExperimentConfig& config) {
  auto check = [](const std::vector<double>& v, const char* what) {
    if (v.empty()) throw DataError(std::string(what) + ": at least one threshold is required");
    for (double t : v) {
      if (!(t > 0.0 && t <= 1.0)) {
        throw DataError(std::string(what) + ": thresholds must lie in (0, 1]");
      }
    }
  };
  check(config.pve_l, "pve-l");
  check(config.pve_lstar, "pve-lstar");
  if (config.methods.empty()) throw DataError("at least one method is required");
  if (config.bootstrap != 0 && config.bootstrap < 100) {
    throw DataError("bootstrap needs at least 100 replicates");
  }
  if (!(config.level > 0.0 && config.level < 1.0)) throw DataError("level must lie in (0, 1)");
  if (config.avi_share < 0.0 || config.avi_share > 1.0) {
    throw DataError("avi-share must lie in (0, 1]");
  }
}

BalanceWeights estimate_weights(BalanceMethod method, const StandardizedDesign& design,
                                const ExperimentConfig& config) {
  switch (method) {
    case BalanceMethod::kParametric: {
      MomOptions opts;
      opts.least_squares_fallback = !config.strict_mom;
      return estimate_weights_param(design, opts);
    }
    case BalanceMethod::kNonparametric: {
      ElOptions opts;
      opts.rho = config.rho;
      opts.hvec_literal = config.hvec_literal;
      opts.printed_outer_sign = config.printed_outer_sign;
      return estimate_weights_np(design, opts);
    }
    case BalanceMethod::kUnweighted:
      break;
  }
  BalanceWeights bw;
  bw.weights = Vector::Ones(design.n());
  bw.method = BalanceMethod::kUnweighted;
  bw.residuals = constraint_residuals(design, bw.weights);
  return bw;
}

std::string method_label(BalanceMethod method) {
  switch (method) {
    case BalanceMethod::kUnweighted:
      return "Unweighted";
    case BalanceMethod::kParametric:
      return "Para";
    case BalanceMethod::kNonparametric:
      return "Np";
  }
  return "?";
}

std::string pve_tag(double pve) {
  std::ostringstream os;
  os << pve;
  return os.str();
}

namespace {

std::vector<BalanceMethod> weighted_methods(const ExperimentConfig& config) {
  std::vector<BalanceMethod> out;
  for (auto m : config.methods) {
    if (m != BalanceMethod::kUnweighted) out.push_back(m);
  }
  return out;
}

bool has_unweighted(const ExperimentConfig& config) {
  return std::find(config.methods.begin(), config.methods.end(), BalanceMethod::kUnweighted) !=
         config.methods.end();
}

std::vector<CellKey> simulation_cells(const ExperimentConfig& config) {
  std::vector<CellKey> cells;
  for (double ls : config.pve_lstar) {
    if (has_unweighted(config)) cells.push_back({BalanceMethod::kUnweighted, 0.0, ls});
    for (double l : config.pve_l)
      for (auto m : weighted_methods(config)) cells.push_back({m, l, ls});
  }
  return cells;
}

struct RunOutcome {
  std::vector<std::optional<Vector>> curves;
  std::vector<BalanceRecord> balance;
  std::vector<std::string> failures;
};

RunOutcome simulate_run(const SimConfig& sim, const ExperimentConfig& config,
                        const std::vector<CellKey>& cells, int run) {
  RunOutcome out;
  out.curves.resize(cells.size());
  auto fail = [&](const std::string& what, const std::string& msg) {
    out.failures.push_back("setting " + std::to_string(sim.setting) + " run " +
                           std::to_string(run) + ": " + what + ": " + msg);
  };
  try {
    const SimDataset data = generate(sim, run);
    const FpcaModel model = decompose(data.sample);

    std::map<std::pair<BalanceMethod, double>, Vector> weights;
    for (double pl : config.pve_l) {
      const Index L = select_rank(model, pl);
      const StandardizedDesign design = standardize(model, L, data.covariates);
      for (Index k = 0; k < L; ++k) {
        out.balance.push_back({run, pl, BalanceMethod::kUnweighted, k,
                               weighted_f_statistic(design.a_star.col(k), design.c_star, {})});
      }
      for (auto m : weighted_methods(config)) {
        try {
          BalanceWeights bw = estimate_weights(m, design, config);
          for (Index k = 0; k < L; ++k) {
            out.balance.push_back(
                {run, pl, m, k, weighted_f_statistic(design.a_star.col(k), design.c_star,
                                                     bw.weights)});
          }
          weights.emplace(std::make_pair(m, pl), std::move(bw.weights));
        } catch (const Error& e) {
          fail(method_label(m) + " PVE_L=" + pve_tag(pl), e.what());
        }
      }
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
      const CellKey& key = cells[c];
      const Index ls = select_rank(model, key.pve_lstar);
      const std::vector<Index> ids = leading_basis(ls);
      Vector w;
      if (key.method != BalanceMethod::kUnweighted) {
        auto it = weights.find({key.method, key.pve_l});
        if (it == weights.end()) continue;
        w = it->second;
      }
      try {
        out.curves[c] = fit_truncated(data.outcome, basis_scores(model, ids), w, model, ids).curve;
      } catch (const Error& e) {
        fail("fit " + method_label(key.method) + " PVE_L*=" + pve_tag(key.pve_lstar), e.what());
      }
    }
  } catch (const Error& e) {
    fail("data", e.what());
  }
  return out;
}

bool same(double a, double b) { return std::abs(a - b) < 1e-12; }

}  // namespace

SimulationResult run_simulation(const SimConfig& sim, const ExperimentConfig& config) {
  sfps::validate(sim);
  validate(config);
  const std::vector<CellKey> cells = simulation_cells(config);
  std::vector<RunOutcome> runs(static_cast<std::size_t>(sim.runs));

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < sim.runs; ++r) {
    runs[static_cast<std::size_t>(r)] = simulate_run(sim, config, cells, r);
  }

  const Grid grid = Grid::uniform(sim.grid_size);
  SimulationResult res{sim, grid, true_effect(grid), {}, {}, {}};
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult cell;
    cell.key = cells[c];
    std::vector<const Vector*> rows;
    for (int r = 0; r < sim.runs; ++r) {
      const auto& cv = runs[static_cast<std::size_t>(r)].curves[c];
      if (cv) {
        cell.ok_runs.push_back(r);
        rows.push_back(&*cv);
      } else {
        cell.failed_runs.push_back(r);
      }
    }
    cell.curves.resize(static_cast<Index>(rows.size()), grid.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      cell.curves.row(static_cast<Index>(k)) = rows[k]->transpose();
    }
    if (!rows.empty()) cell.report = summarize_runs(cell.curves, res.truth, grid);
    res.cells.push_back(std::move(cell));
  }
  for (auto& r : runs) {
    res.balance.insert(res.balance.end(), r.balance.begin(), r.balance.end());
    res.failures.insert(res.failures.end(), r.failures.begin(), r.failures.end());
  }
  return res;
}

const CellResult& find_cell(const SimulationResult& result, BalanceMethod method, double pve_l,
                            double pve_lstar) {
  for (const auto& c : result.cells) {
    if (c.key.method != method || !same(c.key.pve_lstar, pve_lstar)) continue;
    if (method == BalanceMethod::kUnweighted || same(c.key.pve_l, pve_l)) return c;
  }
  throw DataError("no simulation cell for " + to_string(method) + " PVE_L=" + pve_tag(pve_l) +
                  " PVE_L*=" + pve_tag(pve_lstar));
}

double median_f(const SimulationResult& result, BalanceMethod method, double pve_l, Index fpc) {
  std::vector<double> v;
  for (const auto& b : result.balance) {
    if (b.method == method && same(b.pve_l, pve_l) && b.fpc == fpc) v.push_back(b.f.value);
  }
  return median(std::move(v));
}

std::string format_summary_table(const SimulationResult& result) {
  std::vector<double> lstars;
  for (const auto& c : result.cells) {
    if (std::none_of(lstars.begin(), lstars.end(), [&](double x) { return same(x, c.key.pve_lstar); }))
      lstars.push_back(c.key.pve_lstar);
  }
  std::ostringstream os;
  os << "Setting " << result.sim.setting << ": " << result.sim.runs << " runs, n = "
     << result.sim.n << "\n";
  os << std::left << std::setw(26) << "";
  for (double ls : lstars) {
    std::ostringstream h;
    h << "PVE_L* = " << ls;
    os << std::setw(30) << h.str();
  }
  os << "\n" << std::setw(26) << "";
  for (std::size_t k = 0; k < lstars.size(); ++k) {
    os << std::setw(10) << "MISE" << std::setw(10) << "AISE" << std::setw(10) << "ISB";
  }
  os << "\n";

  // Row order: unweighted, then per PVE_L the weighted methods.
  std::vector<std::pair<BalanceMethod, double>> rows;
  for (const auto& c : result.cells) {
    std::pair<BalanceMethod, double> key{c.key.method,
                                         c.key.method == BalanceMethod::kUnweighted ? 0.0
                                                                                    : c.key.pve_l};
    if (std::none_of(rows.begin(), rows.end(), [&](const auto& r) {
          return r.first == key.first && same(r.second, key.second);
        }))
      rows.push_back(key);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    const bool ua = a.first == BalanceMethod::kUnweighted, ub = b.first == BalanceMethod::kUnweighted;
    if (ua != ub) return ua;
    return a.second < b.second;
  });
  double last_pl = -1.0;
  std::vector<std::string> notes;
  for (const auto& [method, pl] : rows) {
    std::string label;
    if (method == BalanceMethod::kUnweighted) {
      label = "Unweighted";
    } else {
      std::ostringstream l;
      if (!same(pl, last_pl)) l << "PVE_L = " << pl;
      last_pl = pl;
      label = l.str();
      label.resize(15, ' ');
      label += method_label(method);
    }
    os << std::setw(26) << label;
    for (double ls : lstars) {
      const CellResult& c = find_cell(result, method, pl, ls);
      if (!c.report) {
        os << std::setw(30) << "failed";
        continue;
      }
      os << std::fixed << std::setprecision(4) << std::setw(10) << c.report->mise << std::setw(10)
         << c.report->aise << std::setw(10) << c.report->isb;
      if (!c.failed_runs.empty()) {
        std::ostringstream n;
        n << method_label(method);
        if (method != BalanceMethod::kUnweighted) n << " (PVE_L = " << pl << ")";
        n << ", PVE_L* = " << ls << ": based on " << c.ok_runs.size() << " of "
          << result.sim.runs << " runs";
        notes.push_back(n.str());
      }
    }
    os << "\n";
  }
  for (const auto& n : notes) os << "  note: " << n << "\n";
  return os.str();
}

std::vector<fs::path> write_simulation(const std::vector<SimulationResult>& results,
                                       const fs::path& dir, bool write_datasets,
                                       const ExperimentConfig& config) {
  std::vector<fs::path> files;
  fs::create_directories(dir);
  auto lbl = [](const CellKey& k) { return to_string(k.method); };
  auto pl_cell = [](const CellKey& k) {
    return k.method == BalanceMethod::kUnweighted ? std::string("") : pve_tag(k.pve_l);
  };

  {
    const fs::path p = dir / "accuracy.csv";
    CsvWriter w(p);
    w.cells("setting", "estimator", "pve_l", "pve_lstar", "runs", "failed", "mise", "aise", "isb");
    for (const auto& res : results)
      for (const auto& c : res.cells) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        w.cells(res.sim.setting, lbl(c.key), pl_cell(c.key), pve_tag(c.key.pve_lstar),
                static_cast<int>(c.ok_runs.size()), static_cast<int>(c.failed_runs.size()),
                c.report ? c.report->mise : nan, c.report ? c.report->aise : nan,
                c.report ? c.report->isb : nan);
      }
    files.push_back(p);
  }
  {
    const fs::path p = dir / "ise.csv";
    CsvWriter w(p);
    w.cells("setting", "run", "estimator", "pve_l", "pve_lstar", "ise");
    for (const auto& res : results)
      for (const auto& c : res.cells) {
        if (!c.report) continue;
        for (std::size_t k = 0; k < c.ok_runs.size(); ++k) {
          w.cells(res.sim.setting, c.ok_runs[k], lbl(c.key), pl_cell(c.key),
                  pve_tag(c.key.pve_lstar), c.report->ise[k]);
        }
      }
    files.push_back(p);
  }
  {
    const fs::path p = dir / "balance.csv";
    CsvWriter w(p);
    w.cells("setting", "run", "pve_l", "method", "fpc", "f_statistic");
    for (const auto& res : results)
      for (const auto& b : res.balance) {
        w.cells(res.sim.setting, b.run, pve_tag(b.pve_l), to_string(b.method),
                static_cast<int>(b.fpc + 1), b.f.value);
      }
    files.push_back(p);
  }
  {
    const fs::path p = dir / "balance_summary.csv";
    CsvWriter w(p);
    w.cells("setting", "pve_l", "method", "fpc", "runs", "median_f");
    for (const auto& res : results) {
      std::map<std::tuple<double, int, Index>, std::vector<double>> groups;
      for (const auto& b : res.balance) {
        groups[{b.pve_l, static_cast<int>(b.method), b.fpc}].push_back(b.f.value);
      }
      for (auto& [key, vals] : groups) {
        const auto& [pl, m, fpc] = key;
        const int count = static_cast<int>(vals.size());
        w.cells(res.sim.setting, pve_tag(pl), to_string(static_cast<BalanceMethod>(m)),
                static_cast<int>(fpc + 1), count, median(std::move(vals)));
      }
    }
    files.push_back(p);
  }
  {
    const fs::path p = dir / "summary.txt";
    std::ofstream out(p, std::ios::binary);
    for (const auto& res : results) out << format_summary_table(res) << "\n";
    std::size_t failures = 0;
    for (const auto& res : results) failures += res.failures.size();
    out << "solver failures: " << failures << "\n";
    for (const auto& res : results)
      for (const auto& f : res.failures) out << "  " << f << "\n";
    files.push_back(p);
  }
  if (write_datasets) {
    for (const auto& res : results)
      for (int r = 0; r < res.sim.runs; ++r) {
        const SimDataset d = generate(res.sim, r);
        std::ostringstream stem;
        stem << "setting" << res.sim.setting << "_run" << std::setw(4) << std::setfill('0') << r;
        const fs::path cp = dir / "datasets" / (stem.str() + "_curves.csv");
        const fs::path dp = dir / "datasets" / (stem.str() + "_data.csv");
        write_curves(d.sample, cp);
        write_subject_data(d.outcome, d.covariates, std::nullopt, dp);
        files.push_back(cp);
        files.push_back(dp);
      }
  }
  (void)config;
  return files;
}

void write_curves(const FunctionalSample& sample, const fs::path& path) {
  CsvWriter w(path);
  auto row = [](const auto& v) {
    std::vector<std::string> cells;
    cells.reserve(static_cast<std::size_t>(v.size()));
    for (Index j = 0; j < v.size(); ++j) cells.push_back(format_double(v[j]));
    return cells;
  };
  w.row(row(sample.grid().points()));
  for (Index i = 0; i < sample.size(); ++i) w.row(row(sample.values().row(i)));
}

void write_subject_data(const Vector& outcome, const Matrix& covariates,
                        const std::optional<Vector>& group, const fs::path& path) {
  CsvWriter w(path);
  std::vector<std::string> header{"y"};
  for (Index j = 0; j < covariates.cols(); ++j) header.push_back("c" + std::to_string(j + 1));
  if (group) header.push_back("group");
  w.row(header);
  for (Index i = 0; i < outcome.size(); ++i) {
    std::vector<std::string> cells{format_double(outcome[i])};
    for (Index j = 0; j < covariates.cols(); ++j) cells.push_back(format_double(covariates(i, j)));
    if (group) cells.push_back(format_double((*group)[i]));
    w.row(cells);
  }
}

// ---------------------------------------------------------------- data mode

namespace {

struct Weighting {
  std::string name;
  BalanceMethod method = BalanceMethod::kUnweighted;
  Index rank = 0;
  bool supplied = false;
  Vector weights;  // empty for unweighted
};

std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ull;
  return h;
}

Vector take(const Vector& v, std::span<const Index> idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = v[idx[k]];
  return out;
}

Matrix take_rows(const Matrix& m, std::span<const Index> idx) {
  Matrix out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = m.row(idx[k]);
  return out;
}

void write_balance(const fs::path& dir, const std::string& tag, const Matrix& scores,
                   const Matrix& covariates, const std::vector<std::string>& cov_names,
                   const std::map<std::string, Vector>& weightings,
                   std::vector<fs::path>& files) {
  const BalanceReport rep = balance_report(scores, covariates, weightings);
  const fs::path fp = dir / ("balance_" + tag + ".csv");
  CsvWriter fw(fp);
  fw.cells("fpc", "method", "f_statistic", "infinite");
  for (const auto& [label, fs_] : rep.f_statistics)
    for (std::size_t k = 0; k < fs_.size(); ++k)
      fw.cells(static_cast<int>(k + 1), label, fs_[k].value, fs_[k].infinite ? 1 : 0);
  files.push_back(fp);
  const fs::path cp = dir / ("correlations_" + tag + ".csv");
  CsvWriter cw(cp);
  cw.cells("fpc", "covariate", "method", "abs_correlation");
  for (const auto& [label, m] : rep.correlations)
    for (Index k = 0; k < m.rows(); ++k)
      for (Index j = 0; j < m.cols(); ++j)
        cw.cells(static_cast<int>(k + 1), cov_names[static_cast<std::size_t>(j)], label, m(k, j));
  files.push_back(cp);
}

}  // namespace

PipelineReport run_pipeline(const ExperimentConfig& config) {
  validate(config);
  PipelineReport report;
  const FunctionalSample sample = read_curves(config.curves);
  const SubjectData data = read_subject_data(config.data, config.columns);
  if (data.outcome.size() != sample.size()) {
    throw SchemaError(config.data.string() + ": has " + std::to_string(data.outcome.size()) +
                      " subjects, curves file has " + std::to_string(sample.size()));
  }
  const fs::path& dir = config.out;
  fs::create_directories(dir);
  const FpcaModel model = decompose(sample);
  const Index n = sample.size();
  const Vector& t = sample.grid().points();

  {
    const fs::path p = dir / "eigenvalues.csv";
    CsvWriter w(p);
    w.cells("component", "eigenvalue", "pve", "cumulative_pve");
    const double total = model.eigenvalues.sum();
    for (Index k = 0; k < model.components(); ++k)
      w.cells(static_cast<int>(k + 1), model.eigenvalues[k], model.eigenvalues[k] / total,
              model.pve[k]);
    report.outputs.push_back(p);
  }

  std::ostringstream summary;
  summary << "subjects: " << n << ", grid points: " << sample.grid().size()
          << ", components: " << model.components() << "\n";

  std::vector<Weighting> weightings;
  if (has_unweighted(config)) weightings.push_back({"unweighted", BalanceMethod::kUnweighted, 0, false, {}});
  if (!config.weights.empty()) {
    Vector w = read_weights(config.weights);
    if (w.size() != n) throw SchemaError(config.weights.string() + ": wrong number of weights");
    weightings.push_back({"supplied", BalanceMethod::kUnweighted, 0, true, std::move(w)});
  }
  for (double pl : config.pve_l) {
    const Index L = select_rank(model, pl);
    const std::string tag = "L" + pve_tag(pl);
    summary << "PVE_L = " << pl << ": L = " << L << "\n";
    const StandardizedDesign design = standardize(model, L, data.covariates);
    std::map<std::string, Vector> for_balance{{"unweighted", Vector()}};
    for (auto m : weighted_methods(config)) {
      const std::string name = to_string(m) + "_" + tag;
      try {
        BalanceWeights bw = estimate_weights(m, design, config);
        const fs::path wp = dir / ("weights_" + name + ".csv");
        CsvWriter w(wp);
        w.cells("subject", "weight");
        for (Index i = 0; i < n; ++i) w.cells(static_cast<int>(i + 1), bw.weights[i]);
        report.outputs.push_back(wp);
        const fs::path dp = dir / ("weight_diagnostics_" + name + ".csv");
        CsvWriter d(dp);
        d.cells("key", "value");
        d.cells("sum_residual", bw.residuals.sum_residual);
        d.cells("score_sum_norm", bw.residuals.score_sum.norm());
        d.cells("covariate_sum_norm", bw.residuals.covariate_sum.norm());
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
          d.cells("profile_objective", bw.nonparam->profile_objective);
          d.cells("infeasible_grid_points", static_cast<int>(bw.nonparam->infeasible_thetas.size()));
          d.cells("rescaled", bw.nonparam->rescaled ? 1 : 0);
        }
        report.outputs.push_back(dp);
        for_balance.emplace(to_string(m), bw.weights);
        weightings.push_back({name, m, L, false, std::move(bw.weights)});
      } catch (const SolverError& e) {
        report.failures.push_back("weights " + name + ": " + e.what());
      }
    }
    for (const auto& wt : weightings) {
      if (wt.supplied) for_balance.emplace("supplied", wt.weights);
    }
    write_balance(dir, tag, design.a_star, data.covariates, data.covariate_names, for_balance,
                  report.outputs);
  }

  const bool grouped = data.group.has_value();
  for (double pls : config.pve_lstar) {
    std::vector<Index> ids;
    const std::string lstag = "Lstar" + pve_tag(pls);
    if (config.avi_share > 0.0) {
      const AviSelection sel = avi_select(data.outcome, model, pls, config.avi_share);
      ids = sel.basis_ids;
      const fs::path p = dir / ("avi_" + lstag + ".csv");
      CsvWriter w(p);
      w.cells("component", "lambda", "beta", "avi", "rank", "cumulative_share", "selected");
      for (std::size_t r = 0; r < sel.ranking.order.size(); ++r) {
        const Index pos = sel.ranking.order[r];
        const Index comp = sel.ranking.components[static_cast<std::size_t>(pos)];
        const bool chosen = std::find(ids.begin(), ids.end(), comp) != ids.end();
        w.cells(static_cast<int>(comp + 1), sel.ranking.lambda[pos], sel.ranking.beta[pos],
                sel.ranking.avi[pos], static_cast<int>(r + 1),
                sel.ranking.cumulative_share[static_cast<Index>(r)], chosen ? 1 : 0);
      }
      report.outputs.push_back(p);
    } else {
      ids = leading_basis(select_rank(model, pls));
    }
    summary << "PVE_L* = " << pls << ": basis {";
    for (std::size_t k = 0; k < ids.size(); ++k) summary << (k ? "," : "") << ids[k] + 1;
    summary << "}\n";

    for (const auto& wt : weightings) {
      const std::string cell = wt.name + "_" + lstag;
      try {
        auto estimator = [&](std::span<const Index> idx) -> Vector {
          const FunctionalSample s(sample.grid(), take_rows(sample.values(), idx));
          const FpcaModel mb = decompose(s);
          const Vector y = take(data.outcome, idx);
          Vector w;
          if (wt.supplied || (config.frozen_weights && wt.weights.size() > 0)) {
            w = take(wt.weights, idx);
          } else if (wt.method != BalanceMethod::kUnweighted) {
            const StandardizedDesign d =
                standardize(mb, wt.rank, take_rows(data.covariates, idx));
            w = estimate_weights(wt.method, d, config).weights;
          }
          if (grouped) {
            const InteractionFit f = fit_interaction(y, mb, ids, take(*data.group, idx), w);
            Vector all(3 * s.grid().size());
            all << f.base.curve, f.group1.curve, f.difference.curve;
            return all;
          }
          return fit_truncated(y, basis_scores(mb, ids), w, mb, ids).curve;
        };

        std::optional<Bands> bands;
        if (config.bootstrap > 0) {
          bands = bootstrap_bands(estimator, n, config.bootstrap, config.level,
                                  config.seed ^ stable_hash(cell));
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const fs::path ep = dir / ("effect_" + cell + ".csv");
        CsvWriter ew(ep);
        if (grouped) {
          const InteractionFit f = fit_interaction(data.outcome, model, ids, *data.group, wt.weights);
          const fs::path cp = dir / ("coefficients_" + cell + ".csv");
          CsvWriter cw(cp);
          cw.cells("term", "estimate", "std_error", "t_value", "p_value");
          for (const auto& r : f.table) cw.cells(r.name, r.estimate, r.std_error, r.t_value, r.p_value);
          cw.cells("F-statistic", f.f_statistic, "", "", f.f_p_value);
          report.outputs.push_back(cp);
          ew.cells("t", "group0", "group0_lower", "group0_upper", "group1", "group1_lower",
                   "group1_upper", "difference", "difference_lower", "difference_upper");
          const Index m = t.size();
          for (Index j = 0; j < m; ++j) {
            auto lo = [&](Index off) { return bands ? bands->lower[off + j] : nan; };
            auto hi = [&](Index off) { return bands ? bands->upper[off + j] : nan; };
            ew.cells(t[j], f.base.curve[j], lo(0), hi(0), f.group1.curve[j], lo(m), hi(m),
                     f.difference.curve[j], lo(2 * m), hi(2 * m));
          }
          summary << cell << ": F = " << f.f_statistic << " (naive p = " << f.f_p_value << ")";
        } else {
          const EffectEstimate e =
              fit_truncated(data.outcome, basis_scores(model, ids), wt.weights, model, ids);
          ew.cells("t", "estimate", "lower", "upper");
          for (Index j = 0; j < t.size(); ++j) {
            ew.cells(t[j], e.curve[j], bands ? bands->lower[j] : nan,
                     bands ? bands->upper[j] : nan);
          }
          summary << cell << ": intercept = " << e.intercept;
        }
        if (bands) {
          summary << ", bootstrap " << bands->replicates << " ok / " << bands->failures
                  << " failed";
        }
        summary << "\n";
        report.outputs.push_back(ep);
      } catch (const SolverError& e) {
        report.failures.push_back("fit " + cell + ": " + e.what());
      }
    }
  }
  if (grouped) {
    summary << "p-values are naive: they ignore the uncertainty from estimating the weights "
               "and selecting components.\n";
  }
  for (const auto& f : report.failures) summary << "FAILED " << f << "\n";
  report.summary = summary.str();
  const fs::path sp = dir / "summary.txt";
  std::ofstream(sp, std::ios::binary) << report.summary;
  report.outputs.push_back(sp);
  return report;
}

}  // namespace sfps
