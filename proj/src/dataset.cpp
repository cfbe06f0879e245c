#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qpaths/cli_io.hpp"
#include "qpaths/error.hpp"
#include "qpaths/rng.hpp"

namespace qpaths {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

// Locale-independent; accepts a leading '+'.
bool parse_number(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

}  // namespace

LogisticModel model_from_rows(const std::vector<std::vector<double>>& rows, double prior_sd) {
  LogisticModel m;
  m.prior_sd = prior_sd;
  const std::size_t n = rows.size();
  const std::size_t width = n == 0 ? 1 : rows.front().size();
  if (width < 1) throw DomainError("rows need a label column");
  const std::size_t p = width - 1;
  m.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
  m.labels.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != width) throw DomainError("rows differ in width");
    m.labels(i) = rows[i][0];
    m.features(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) m.features(i, j + 1) = rows[i][j + 1];
  }
  for (std::size_t j = 1; j <= p; ++j) {
    auto col = m.features.col(static_cast<Eigen::Index>(j));
    if (n == 0) break;
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) col /= sd;
  }
  m.validate();
  return m;
}

LoadedDataset parse_binary_regression_csv(const std::string& text) {
  LoadedDataset out;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_of_row;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_cells(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t j = 0; j < cells.size(); ++j)
      if (!parse_number(cells[j], values[j])) {
        numeric = false;
        bad = j;
        break;
      }
    if (first_content) {
      first_content = false;
      if (!numeric) {
        out.had_header = true;
        width = cells.size();
        continue;
      }
    }
    if (!numeric) throw ParseError("non-numeric cell in column " + std::to_string(bad + 1), line_no);
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ParseError("expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()), line_no);
    rows.push_back(std::move(values));
    line_of_row.push_back(line_no);
  }
  if (rows.empty()) throw ParseError("no data rows", line_no);
  if (width < 2) throw ParseError("need a label column and at least one feature", line_of_row.front());

  bool zero_one = true, plus_minus = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = rows[i][0];
    zero_one = zero_one && (y == 0.0 || y == 1.0);
    plus_minus = plus_minus && (y == -1.0 || y == 1.0);
    if (!zero_one && !plus_minus) throw ParseError("label must be 0/1 (or -1/+1)", line_of_row[i]);
  }
  if (!zero_one) {
    for (auto& r : rows) r[0] = r[0] > 0.0 ? 1.0 : 0.0;
    out.warnings.push_back("labels in {-1,+1} remapped to {0,1}");
  }
  for (std::size_t j = 1; j < width; ++j) {
    bool constant = true;
    for (const auto& r : rows) constant = constant && r[j] == rows.front()[j];
    if (constant) out.warnings.push_back("feature column " + std::to_string(j) + " is constant; left at zero");
  }
  out.model = model_from_rows(rows);
  return out;
}

LoadedDataset load_binary_regression_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open '" + path + "'", 0);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_binary_regression_csv(ss.str());
}

std::vector<std::vector<double>> synthetic_logistic_rows(std::size_t rows, const std::vector<double>& weights,
                                                         std::uint64_t seed) {
  if (weights.empty()) throw DomainError("need at least an intercept weight");
  std::vector<std::vector<double>> out(rows, std::vector<double>(weights.size()));
  Rng rng(seed);
  for (auto& r : out) {
    double t = weights[0];
    for (std::size_t j = 1; j < weights.size(); ++j) {
      r[j] = rng.normal();
      t += weights[j] * r[j];
    }
    r[0] = rng.uniform() < 1.0 / (1.0 + std::exp(-t)) ? 1.0 : 0.0;
  }
  return out;
}

std::string rows_to_csv(const std::vector<std::vector<double>>& rows) {
  std::string s;
  char buf[64];
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, r[j]);
      if (j) s += ',';
      s.append(buf, res.ptr);
    }
    s += '\n';
  }
  return s;
}

}  // namespace qpaths
