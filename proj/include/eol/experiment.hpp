#pragma once

#include "eol/rates.hpp"
#include "eol/transport.hpp"

#include <json.hpp>

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eol {

inline constexpr const char* kVersion = "1.0.0";

/// A failed pipeline stage; `replica` is -1 outside the replica loop.
class ExperimentError : public Error {
 public:
  ExperimentError(const std::string& stage, std::int64_t replica, const std::string& what)
      : Error(stage + (replica >= 0 ? " (replica " + std::to_string(replica) + ")" : "") + ": " +
              what),
        stage_(stage),
        replica_(replica) {}
  const std::string& stage() const { return stage_; }
  std::int64_t replica() const { return replica_; }

 private:
  std::string stage_;
  std::int64_t replica_;
};

struct DistanceConfig {
  std::string method = "auto";  // auto | sample
  Eigen::Index m = 2048;
  Eigen::Index n = 0;
  int resamples = 1;
  bool control = true;
  std::string solver = "auto";  // auto | lp | sinkhorn
  Eigen::Index compress = 1024; // quantile atoms for the 1-D truncated cost
};

struct Prediction {
  double exponent = 0.0;
  bool log_factor = false;
};

/// Parsed experiment description. `canonical` keeps the validated JSON
/// (key-sorted) from which the hash is computed.
struct ExperimentConfig {
  std::string name;
  std::string model;
  nlohmann::json init = {{"kind", "stationary"}};
  std::vector<double> horizons;
  double h = 0.01;
  double burn_in = 0.0;
  int replicas = 2;
  std::uint64_t seed = 1;
  std::vector<std::string> statistics{"w2sq"};  // w2sq | w1tilde | w1tilde_sq | xi_sq
  std::vector<int> modes{1, 2, 3};               // eigenmodes for xi_sq
  DistanceConfig distance;
  std::vector<std::string> bounds;               // bracket | upper
  std::map<std::string, Prediction> predictions; // overrides the defaults
  double tolerance = 0.1;
  std::string output;
  nlohmann::json canonical;
};

/// Validates and fills defaults. Throws InvalidArgument on unknown keys,
/// bad values, non-increasing horizons, R < 2 or an unknown model id.
ExperimentConfig parse_config(const nlohmann::json& j);

/// FNV-1a (64 bit) of the key-sorted compact JSON, without the "output" key.
std::string config_hash(const nlohmann::json& j);

struct ResultRow {
  double t = 0.0;
  std::string statistic;
  double mean = 0.0;
  double stderr_ = 0.0;
  int replicas = 0;
};

struct ResultRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  double wall_clock = 0.0;
  bool complete = true;
  std::string error;
  nlohmann::json config;
  std::vector<ResultRow> rows;
  std::map<std::string, std::vector<double>> bounds;  // one value per horizon
  std::map<std::string, RateReport> fits;             // one fit per statistic
  /// True when every fit that carries a prediction passes.
  bool pass() const;
  std::vector<ResultRow> rows_for(const std::string& statistic) const;
};

struct RunOptions {
  int threads = 0;
  const std::atomic<bool>* cancel = nullptr;
};

/// Statistic names produced by a config (xi_sq expands to xi<i>_sq).
std::vector<std::string> statistic_columns(const ExperimentConfig& config);

/// Default predicted exponent of a statistic, if any.
std::optional<Prediction> default_prediction(const std::string& statistic, const DiffusionModel& model);

/// simulate -> empirical measures -> statistics -> bounds -> fit. Replicas
/// run in parallel with ordered reduction, so statistics do not depend on
/// the thread count. A cancelled run returns the completed prefix with
/// complete = false. Stage failures throw ExperimentError.
ResultRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

nlohmann::json to_json(const RateReport& report);
nlohmann::json to_json(const ResultRecord& record);

/// "t,statistic,mean,stderr,R" preceded by a comment line with the hash and
/// seed. Numbers use round-trip precision.
std::string table_csv(const ResultRecord& record);
std::vector<ResultRow> parse_table_csv(const std::string& text);

/// Log-log SVG of each statistic with error bars and a dashed reference
/// line of the predicted slope. `predicted` maps statistic to slope.
std::string render_plot_svg(const std::vector<ResultRow>& rows,
                            const std::map<std::string, double>& predicted,
                            const std::string& caption);

struct SuiteOptions {
  int trials = 200;
  std::vector<double> p{1.5, 2.0, 3.0};
  int k = 4;              // eigenmodes in the random combination q
  double floor = 0.05;    // positivity floor of the densities
  Eigen::Index atoms = 512;
  std::uint64_t seed = 11;
};

struct SuiteResult {
  int cases = 0;
  int violations = 0;
  double min_ratio = INFINITY;  // smallest bound / distance over the cases
  double max_check_error = 0.0; // Theorem A.1 suite: closed-form vs quadrature M_p bound
  std::vector<std::string> failures;
};

/// Random density pairs on the one-dimensional OU basis; for each p checks
/// that the exact `atoms`-point LP cost W_p^p of the quantile
/// discretizations does not exceed the smallest of the three bounds + 1e-9.
/// At p = 2 also records the closed-form vs quadrature M_p bound error.
SuiteResult appendix_check(const SuiteOptions& options);

/// Random nonnegative densities f on the OU basis (floor 0): checks
/// W_2(f mu, mu)^2 <= 4 sum a_i^2 / lambda_i with W_2 from the quantile
/// coupling.
SuiteResult ledoux_check(const SuiteOptions& options);

/// Writes config.json, results.json, table.csv and plot.svg into `dir`.
void write_outputs(const ResultRecord& record, const std::string& dir);

}  // namespace eol
