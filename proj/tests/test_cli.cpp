#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sfps/csv.hpp"
#include "sfps/errors.hpp"
#include "sfps/pipeline.hpp"
#include "sfps/simgen.hpp"

using namespace sfps;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfps_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SFPS_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("input validation") {
  const fs::path dir = scratch("validate");
  const SimDataset d = noiseless_fixture(20, 16, 1);
  write_curves(d.sample, dir / "curves.csv");
  write_subject_data(d.outcome, d.covariates, std::nullopt, dir / "data.csv");
  CHECK(validate_inputs(dir / "curves.csv", dir / "data.csv").ok());

  // Non-monotone grid.
  {
    std::ifstream in(dir / "curves.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    const auto first = text.find(',');
    const auto second = text.find(',', first + 1);
    text.replace(first + 1, second - first - 1, "0.9");
    write_text(dir / "bad_grid.csv", text);
    const SchemaReport rep = validate_inputs(dir / "bad_grid.csv", std::nullopt);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.violations[0].row == 1);
    CHECK(rep.violations[0].column >= 2);
    CHECK(rep.violations[0].column <= 3);
  }

  // NaN in curve 5, which sits on line 6 below the grid row.
  {
    std::ifstream in(dir / "curves.csv");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    std::string& l = lines[5];
    const auto c = l.find(',');
    l = "NaN" + l.substr(c);
    std::ofstream out(dir / "nan.csv");
    for (const auto& s : lines) out << s << "\n";
    out.close();
    const SchemaReport rep = validate_inputs(dir / "nan.csv", std::nullopt);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].row == 6);
    CHECK(rep.violations[0].column == 1);
    CHECK(rep.violations[0].to_string().find("nan.csv") != std::string::npos);
  }

  // Subject file with the wrong number of rows and a missing outcome.
  write_text(dir / "short.csv", "y,c1\n1,2\n");
  const SchemaReport rows = validate_inputs(dir / "curves.csv", dir / "short.csv");
  CHECK_FALSE(rows.ok());
  DataColumns cols;
  cols.outcome = "response";
  const SchemaReport missing = validate_inputs(dir / "curves.csv", dir / "data.csv", cols);
  REQUIRE_FALSE(missing.ok());
  CHECK(missing.violations[0].message.find("response") != std::string::npos);

  write_text(dir / "empty.csv", "");
  try {
    read_curves(dir / "empty.csv");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("empty.csv") != std::string::npos);
  }
}

TEST_CASE("curve and subject files round-trip") {
  const fs::path dir = scratch("roundtrip");
  SimConfig cfg;
  cfg.n = 30;
  cfg.grid_size = 20;
  const SimDataset d = generate(cfg, 0);
  Vector group = Vector::Zero(30);
  group.head(10).setOnes();
  write_curves(d.sample, dir / "curves.csv");
  write_subject_data(d.outcome, d.covariates, group, dir / "data.csv");
  const FunctionalSample back = read_curves(dir / "curves.csv");
  CHECK(back.grid() == d.sample.grid());
  CHECK((back.values().array() == d.sample.values().array()).all());
  DataColumns cols;
  cols.group = "group";
  const SubjectData s = read_subject_data(dir / "data.csv", cols);
  CHECK((s.outcome.array() == d.outcome.array()).all());
  CHECK((s.covariates.array() == d.covariates.array()).all());
  REQUIRE(s.group);
  CHECK((s.group->array() == group.array()).all());
  CHECK(s.covariate_names.size() == 3);
}

TEST_CASE("pipeline recovers the effect on noiseless data") {
  const fs::path dir = scratch("pipeline");
  const SimDataset d = noiseless_fixture(100, 64, 2);
  write_curves(d.sample, dir / "curves.csv");
  write_subject_data(d.outcome, d.covariates, std::nullopt, dir / "data.csv");
  ExperimentConfig c;
  c.curves = dir / "curves.csv";
  c.data = dir / "data.csv";
  c.methods = {BalanceMethod::kNonparametric};
  c.pve_l = {0.95};
  c.pve_lstar = {0.95};
  c.out = dir / "out";
  const PipelineReport rep = run_pipeline(c);
  CHECK(rep.failures.empty());
  const CsvFile effect = read_csv(dir / "out" / "effect_nonparametric_L0.95_Lstar0.95.csv");
  REQUIRE(effect.rows.size() == 65);
  CHECK(effect.rows[0][0] == "t");
  CHECK(effect.rows[0][1] == "estimate");
  double worst = 0.0;
  for (Index j = 0; j < 64; ++j)
    worst = std::max(worst, std::abs(std::stod(effect.rows[static_cast<std::size_t>(j + 1)][1]) - d.truth[j]));
  CHECK(worst < 1e-6);
  CHECK(fs::exists(dir / "out" / "weights_nonparametric_L0.95.csv"));
  CHECK(fs::exists(dir / "out" / "summary.txt"));
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  write_text(dir / "empty.csv", "");
  const SimDataset d = noiseless_fixture(40, 16, 3);
  write_curves(d.sample, dir / "curves.csv");
  write_subject_data(d.outcome, d.covariates, std::nullopt, dir / "data.csv");
  const std::string out = " --out " + (dir / "out").string();

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("fit --no-such-option") == 1);
  CHECK(run_cli("fit --curves " + (dir / "empty.csv").string() + " --data " +
                (dir / "data.csv").string() + out) == 2);
  CHECK(run_cli("validate --curves " + (dir / "curves.csv").string() + " --data " +
                (dir / "data.csv").string()) == 0);
  CHECK(run_cli("fpca --curves " + (dir / "curves.csv").string() + out) == 0);
  CHECK(fs::exists(dir / "out" / "eigenvalues.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.txt"));
  CHECK(run_cli("simulate --setting 9 --runs 1" + out) == 2);
}
