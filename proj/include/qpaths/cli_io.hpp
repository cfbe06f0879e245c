#pragma once

// Dataset ingestion, run configuration, experiment drivers and JSON/CSV reports.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpaths/densities.hpp"

namespace qpaths {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct LoadedDataset {
  LogisticModel model;
  std::vector<std::string> warnings;
  bool had_header = false;
};

/// First column is the label ({0,1}, or {-1,+1} remapped with a warning),
/// remaining columns numeric features. Features are standardized to zero
/// mean and unit population variance; an intercept column is prepended and
/// prior_sd is set to 5. Throws ParseError naming the offending row.
LoadedDataset load_binary_regression_csv(const std::string& path);
LoadedDataset parse_binary_regression_csv(const std::string& text);

/// Rows of (label, features...) drawn from a logistic model with the given
/// weights (intercept first) and standard normal features.
std::vector<std::vector<double>> synthetic_logistic_rows(std::size_t rows, const std::vector<double>& weights,
                                                         std::uint64_t seed);
std::string rows_to_csv(const std::vector<std::vector<double>>& rows);

/// Same standardization and intercept handling as the CSV loader.
LogisticModel model_from_rows(const std::vector<std::vector<double>>& rows, double prior_sd = 5.0);

struct RunConfig {
  std::string command = "anneal-toy";  // anneal-toy | smc | ais | bdmc | heuristic-q | grid-q
  std::string path_kind = "geometric";  // geometric | qpath | moment | escort
  std::optional<double> q;
  std::size_t particles = 1000;
  std::size_t K = 10;
  std::string schedule = "linear";  // linear | adaptive
  int moves = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> dataset;
  std::string output = "report.json";
  std::optional<std::string> trace_csv;

  // Toy endpoints: family(mu0, var0) -> exp(log_scale) * family(mu1, var1).
  std::string toy = "gaussian";  // gaussian | student
  double mu0 = -4.0, var0 = 3.0, mu1 = 4.0, var1 = 1.0;
  double nu = 1.0;
  double log_scale = 0.0;

  double step_size = 0.5;
  int n_leapfrog = 10;
  double ess_fraction = 0.5;
  std::size_t restarts = 100;
  std::size_t grid_count = 20;
  double delta_min = 1e-5, delta_max = 1e-1;
  bool ground_truth = false;
  unsigned threads = 0;

  /// Every violated field, empty when valid.
  std::vector<std::string> violations() const;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunReport {
  std::string status = "ok";  // ok | failed
  std::string error;
  double log_Z = 0.0;
  double stderr_estimate = NAN;
  std::vector<double> ess_trace;
  std::vector<double> beta_trace;
  std::vector<double> acceptance_trace;
  double wallclock_s = 0.0;
  RunConfig config_echo;
  std::string library_version = kLibraryVersion;
  std::map<std::string, double> extras;

  std::string to_json() const;
  static RunReport from_json(const std::string& text);
  /// Field-wise equality; NaN equals NaN.
  bool operator==(const RunReport& other) const;
};

/// step, beta, ess, acceptance columns (blank where a trace is shorter).
std::string traces_to_csv(const RunReport& report);

/// Writes to path via a temporary file in the same directory and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);

/// Validates, runs the configured driver and writes the report(s). Throws
/// ConfigError on invalid configuration; sampler failures are returned as a
/// report with status "failed".
RunReport run(const RunConfig& config);

}  // namespace qpaths
