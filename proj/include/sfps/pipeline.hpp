#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sfps/balance.hpp"
#include "sfps/csv.hpp"
#include "sfps/metrics.hpp"
#include "sfps/outcome.hpp"
#include "sfps/simgen.hpp"

namespace sfps {

inline constexpr const char* kVersion = "1.0.0";

/// Knobs shared by the data pipeline and the simulation harness.
struct ExperimentConfig {
  std::filesystem::path curves;
  std::filesystem::path data;
  std::filesystem::path weights;  // optional precomputed weights (method "supplied")
  DataColumns columns;
  std::vector<double> pve_l{0.95, 0.99};
  std::vector<double> pve_lstar{0.95, 0.99};
  std::vector<BalanceMethod> methods{BalanceMethod::kUnweighted, BalanceMethod::kParametric,
                                     BalanceMethod::kNonparametric};
  double rho = 0.0;  // <= 0: 0.1 / n
  bool hvec_literal = false;
  bool printed_outer_sign = false;
  bool strict_mom = false;  // no least-squares fallback for the parametric solve
  int bootstrap = 0;
  double level = 0.99;
  bool frozen_weights = false;
  double avi_share = 0.0;  // > 0 enables AVI basis selection
  std::filesystem::path out = "sfps-out";
  std::uint64_t seed = 1;
};

void validate(const ExperimentConfig& config);

/// Dispatches to the parametric or nonparametric estimator; unit weights for
/// kUnweighted.
BalanceWeights estimate_weights(BalanceMethod method, const StandardizedDesign& design,
                                const ExperimentConfig& config);

std::string method_label(BalanceMethod method);  // Unweighted / Para / Np

// ---------------------------------------------------------------- simulation

struct CellKey {
  BalanceMethod method = BalanceMethod::kUnweighted;
  double pve_l = 0.0;  // unused for the unweighted estimator
  double pve_lstar = 0.0;
};

struct CellResult {
  CellKey key;
  std::vector<int> ok_runs;
  std::vector<int> failed_runs;
  Matrix curves;  // one row per successful run, in run order
  std::optional<AccuracyReport> report;
};

struct BalanceRecord {
  int run = 0;
  double pve_l = 0.0;
  BalanceMethod method = BalanceMethod::kUnweighted;
  Index fpc = 0;  // 0-based
  FStatistic f;
};

struct SimulationResult {
  SimConfig sim;
  Grid grid;
  Vector truth;
  std::vector<CellResult> cells;
  std::vector<BalanceRecord> balance;
  std::vector<std::string> failures;  // "run r: method pve_l: message"
};

/// Runs every simulation replicate and aggregates per estimator/PVE cell.
SimulationResult run_simulation(const SimConfig& sim, const ExperimentConfig& config);

const CellResult& find_cell(const SimulationResult& result, BalanceMethod method, double pve_l,
                            double pve_lstar);

/// Median F statistic of one FPC across runs (infinite values sort last).
double median_f(const SimulationResult& result, BalanceMethod method, double pve_l, Index fpc);

/// Text table with one row per estimator and MISE/AISE/ISB per PVE_L*.
std::string format_summary_table(const SimulationResult& result);

/// Writes the simulation CSVs into `dir`; returns the files written.
std::vector<std::filesystem::path> write_simulation(const std::vector<SimulationResult>& results,
                                                    const std::filesystem::path& dir,
                                                    bool write_datasets,
                                                    const ExperimentConfig& config);

// ---------------------------------------------------------------- data mode

struct PipelineReport {
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> failures;
  std::string summary;
};

/// Fits every (method, PVE_L, PVE_L*) cell on user data and writes weights,
/// effect curves (with bootstrap bands when requested), coefficient tables,
/// balance reports and a summary into config.out. Failed cells are reported
/// in the result and do not stop other cells.
PipelineReport run_pipeline(const ExperimentConfig& config);

/// Writes a sample and subject table in the CLI's CSV formats.
void write_curves(const FunctionalSample& sample, const std::filesystem::path& path);
void write_subject_data(const Vector& outcome, const Matrix& covariates,
                        const std::optional<Vector>& group, const std::filesystem::path& path);

std::string pve_tag(double pve);

}  // namespace sfps
