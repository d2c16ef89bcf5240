#include "sfps/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "sfps/errors.hpp"

namespace sfps {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    // from_chars rejects "nan"/"inf" spellings with signs in some forms
    if (s == "nan" || s == "NaN" || s == "NA") return std::numeric_limits<double>::quiet_NaN();
    return std::nullopt;
  }
  return v;
}

std::string name(const std::filesystem::path& p) { return p.string(); }

}  // namespace

std::string Violation::to_string() const {
  std::ostringstream os;
  os << file;
  if (row > 0) os << ": row " << row;
  if (column > 0) os << ", column " << column;
  os << ": " << message;
  return os.str();
}

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(name(path) + ": cannot open file");
  CsvFile file;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    file.rows.push_back(std::move(cells));
    file.line_numbers.push_back(lineno);
  }
  return file;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

void check_curves(const std::filesystem::path& path, const CsvFile& f, SchemaReport& rep,
                  std::size_t* subjects) {
  const std::string fn = name(path);
  *subjects = 0;
  if (f.rows.empty()) {
    rep.violations.push_back({fn, 0, 0, "empty curves file"});
    return;
  }
  const auto& grid = f.rows.front();
  const std::size_t m = grid.size();
  std::optional<double> prev;
  for (std::size_t j = 0; j < m; ++j) {
    auto v = parse_double(grid[j]);
    if (!v || !std::isfinite(*v)) {
      rep.violations.push_back({fn, f.line_numbers[0], j + 1, "grid point is not a finite number"});
      prev.reset();
      continue;
    }
    if (*v < 0.0 || *v > 1.0) {
      rep.violations.push_back({fn, f.line_numbers[0], j + 1, "grid point outside [0, 1]"});
    }
    if (prev && !(*v > *prev)) {
      rep.violations.push_back(
          {fn, f.line_numbers[0], j + 1, "grid is not strictly increasing"});
    }
    prev = v;
  }
  if (m < 2) rep.violations.push_back({fn, f.line_numbers[0], 0, "grid needs at least two points"});
  if (f.rows.size() < 2) {
    rep.violations.push_back({fn, 0, 0, "no curve rows after the grid row"});
  }
  for (std::size_t r = 1; r < f.rows.size(); ++r) {
    const auto& row = f.rows[r];
    if (row.size() != m) {
      rep.violations.push_back({fn, f.line_numbers[r], 0,
                                "row has " + std::to_string(row.size()) + " values, grid has " +
                                    std::to_string(m)});
      continue;
    }
    for (std::size_t j = 0; j < m; ++j) {
      auto v = parse_double(row[j]);
      if (!v || !std::isfinite(*v)) {
        rep.violations.push_back({fn, f.line_numbers[r], j + 1, "value is not a finite number"});
      }
    }
  }
  *subjects = f.rows.size() - 1;
}

void check_data(const std::filesystem::path& path, const CsvFile& f, const DataColumns& cols,
                std::optional<std::size_t> subjects, SchemaReport& rep) {
  const std::string fn = name(path);
  if (f.rows.empty()) {
    rep.violations.push_back({fn, 0, 0, "empty data file"});
    return;
  }
  const auto& header = f.rows.front();
  auto find = [&](const std::string& c) {
    return std::find(header.begin(), header.end(), c) - header.begin();
  };
  const auto hdr_line = f.line_numbers[0];
  if (static_cast<std::size_t>(find(cols.outcome)) == header.size()) {
    rep.violations.push_back({fn, hdr_line, 0, "missing outcome column '" + cols.outcome + "'"});
  }
  std::size_t group_idx = header.size();
  if (!cols.group.empty()) {
    group_idx = static_cast<std::size_t>(find(cols.group));
    if (group_idx == header.size()) {
      rep.violations.push_back({fn, hdr_line, 0, "missing group column '" + cols.group + "'"});
    }
  }
  std::size_t covariates = 0;
  for (const auto& h : header) {
    if (h != cols.outcome && h != cols.group && h != cols.weight && !h.empty()) ++covariates;
  }
  if (covariates == 0) rep.violations.push_back({fn, hdr_line, 0, "no covariate columns"});
  for (std::size_t r = 1; r < f.rows.size(); ++r) {
    const auto& row = f.rows[r];
    if (row.size() != header.size()) {
      rep.violations.push_back({fn, f.line_numbers[r], 0,
                                "row has " + std::to_string(row.size()) + " values, header has " +
                                    std::to_string(header.size())});
      continue;
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      auto v = parse_double(row[j]);
      if (!v || !std::isfinite(*v)) {
        rep.violations.push_back({fn, f.line_numbers[r], j + 1, "value is not a finite number"});
      } else if (j == group_idx && *v != 0.0 && *v != 1.0) {
        rep.violations.push_back({fn, f.line_numbers[r], j + 1, "group value must be 0 or 1"});
      }
    }
  }
  if (subjects && f.rows.size() - 1 != *subjects) {
    rep.violations.push_back({fn, 0, 0,
                              "has " + std::to_string(f.rows.size() - 1) +
                                  " subject rows, curves file has " + std::to_string(*subjects)});
  }
}

[[noreturn]] void throw_report(const SchemaReport& rep) {
  std::string msg = "schema violation";
  const std::size_t shown = std::min<std::size_t>(rep.violations.size(), 5);
  for (std::size_t k = 0; k < shown; ++k) msg += "\n  " + rep.violations[k].to_string();
  if (rep.violations.size() > shown) {
    msg += "\n  ... " + std::to_string(rep.violations.size() - shown) + " more";
  }
  throw SchemaError(msg);
}

}  // namespace

SchemaReport validate_inputs(const std::filesystem::path& curves_path,
                             const std::optional<std::filesystem::path>& data_path,
                             const DataColumns& columns) {
  SchemaReport rep;
  std::optional<std::size_t> subjects;
  try {
    std::size_t n = 0;
    check_curves(curves_path, read_csv(curves_path), rep, &n);
    subjects = n;
  } catch (const SchemaError& e) {
    rep.violations.push_back({name(curves_path), 0, 0, e.what()});
  }
  if (data_path) {
    try {
      check_data(*data_path, read_csv(*data_path), columns, subjects, rep);
    } catch (const SchemaError& e) {
      rep.violations.push_back({name(*data_path), 0, 0, e.what()});
    }
  }
  return rep;
}

FunctionalSample read_curves(const std::filesystem::path& path) {
  const CsvFile f = read_csv(path);
  SchemaReport rep;
  std::size_t n = 0;
  check_curves(path, f, rep, &n);
  if (!rep.ok()) throw_report(rep);
  const std::size_t m = f.rows.front().size();
  Vector grid(static_cast<Index>(m));
  for (std::size_t j = 0; j < m; ++j) grid[static_cast<Index>(j)] = *parse_double(f.rows[0][j]);
  Matrix values(static_cast<Index>(n), static_cast<Index>(m));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < m; ++j)
      values(static_cast<Index>(r), static_cast<Index>(j)) = *parse_double(f.rows[r + 1][j]);
  return FunctionalSample(Grid(std::move(grid)), std::move(values));
}

SubjectData read_subject_data(const std::filesystem::path& path, const DataColumns& columns) {
  const CsvFile f = read_csv(path);
  SchemaReport rep;
  check_data(path, f, columns, std::nullopt, rep);
  if (!rep.ok()) throw_report(rep);
  const auto& header = f.rows.front();
  const auto n = static_cast<Index>(f.rows.size() - 1);
  SubjectData d;
  d.outcome.resize(n);
  std::vector<std::size_t> cov_idx;
  std::optional<std::size_t> group_idx;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == columns.outcome) continue;
    if (!columns.group.empty() && header[j] == columns.group) {
      group_idx = j;
      continue;
    }
    if (!columns.weight.empty() && header[j] == columns.weight) continue;
    if (header[j].empty()) continue;
    cov_idx.push_back(j);
    d.covariate_names.push_back(header[j]);
  }
  const auto y_idx = static_cast<std::size_t>(
      std::find(header.begin(), header.end(), columns.outcome) - header.begin());
  d.covariates.resize(n, static_cast<Index>(cov_idx.size()));
  if (group_idx) d.group = Vector(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = f.rows[static_cast<std::size_t>(i) + 1];
    d.outcome[i] = *parse_double(row[y_idx]);
    for (std::size_t k = 0; k < cov_idx.size(); ++k) {
      d.covariates(i, static_cast<Index>(k)) = *parse_double(row[cov_idx[k]]);
    }
    if (group_idx) (*d.group)[i] = *parse_double(row[*group_idx]);
  }
  return d;
}

Matrix read_numeric_table(const std::filesystem::path& path, std::vector<std::string>* names) {
  const CsvFile f = read_csv(path);
  if (f.rows.size() < 2) throw SchemaError(name(path) + ": needs a header and at least one row");
  const auto& header = f.rows.front();
  Matrix m(static_cast<Index>(f.rows.size() - 1), static_cast<Index>(header.size()));
  for (std::size_t r = 1; r < f.rows.size(); ++r) {
    if (f.rows[r].size() != header.size()) {
      throw SchemaError(name(path) + ": row " + std::to_string(f.line_numbers[r]) +
                        " has the wrong number of values");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
      auto v = parse_double(f.rows[r][j]);
      if (!v || !std::isfinite(*v)) {
        throw SchemaError(name(path) + ": row " + std::to_string(f.line_numbers[r]) +
                          ", column " + std::to_string(j + 1) + ": value is not a finite number");
      }
      m(static_cast<Index>(r - 1), static_cast<Index>(j)) = *v;
    }
  }
  if (names) *names = header;
  return m;
}

Vector read_weights(const std::filesystem::path& path) {
  std::vector<std::string> names;
  const Matrix m = read_numeric_table(path, &names);
  const auto it = std::find(names.begin(), names.end(), "weight");
  if (it == names.end()) throw SchemaError(name(path) + ": missing 'weight' column");
  const Vector w = m.col(it - names.begin());
  if ((w.array() <= 0.0).any()) throw SchemaError(name(path) + ": weights must be positive");
  return w;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out_) throw Error("cannot write " + path.string());
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out_ << ',';
    out_ << cells[k];
  }
  out_ << '\n';
}

}  // namespace sfps
