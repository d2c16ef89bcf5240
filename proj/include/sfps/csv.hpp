#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sfps/fdata.hpp"

namespace sfps {

using CsvRows = std::vector<std::vector<std::string>>;

/// Splits a comma-separated file into trimmed cells; blank lines are skipped.
/// Row numbers reported elsewhere are 1-based line numbers of this file.
struct CsvFile {
  std::vector<std::size_t> line_numbers;
  CsvRows rows;
};

CsvFile read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

struct Violation {
  std::string file;
  std::size_t row = 0;     // 1-based line number, 0 for file-level problems
  std::size_t column = 0;  // 1-based column, 0 for row-level problems
  std::string message;

  std::string to_string() const;
};

struct SchemaReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

struct DataColumns {
  std::string outcome = "y";
  std::string group;  // optional binary column
  std::string weight; // optional column excluded from covariates
};

/// Checks the curve file (grid row, row lengths, finite values) and, when
/// `data_path` is given, the subject file (header, required columns, finite
/// numeric values, row count matching the curves).
SchemaReport validate_inputs(const std::filesystem::path& curves_path,
                             const std::optional<std::filesystem::path>& data_path,
                             const DataColumns& columns = {});

/// Reads the curve file; throws SchemaError listing violations.
FunctionalSample read_curves(const std::filesystem::path& path);

struct SubjectData {
  Vector outcome;
  Matrix covariates;
  std::vector<std::string> covariate_names;
  std::optional<Vector> group;
};

/// Header row of column names; every column other than the outcome, group
/// and weight columns is a covariate.
SubjectData read_subject_data(const std::filesystem::path& path, const DataColumns& columns);

/// Reads the `weight` column of a weights file (as written by the CLI).
Vector read_weights(const std::filesystem::path& path);

/// Reads an n x k numeric table with a header row; returns values and names.
Matrix read_numeric_table(const std::filesystem::path& path, std::vector<std::string>* names);

/// Writes rows as CSV, creating parent directories.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& cells);
  template <typename... Ts>
  void cells(const Ts&... values) {
    row({cell(values)...});
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(unsigned long v) { return std::to_string(v); }
  std::ofstream out_;
};

}  // namespace sfps
