#ifndef SPEM_WORKFLOW_HPP
#define SPEM_WORKFLOW_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spem/basis.hpp"
#include "spem/config.hpp"
#include "spem/correlation.hpp"
#include "spem/error.hpp"
#include "spem/eval.hpp"
#include "spem/inference.hpp"
#include "spem/predict.hpp"
#include "spem/simulator.hpp"

namespace spem {

using Logger = std::function<void(const std::string&)>;

/// Settings shared by the fit and predict commands. Built from a config file
/// (see README for the keys) with command-line overrides applied on top.
struct RunConfig {
  std::filesystem::path train;
  std::filesystem::path out;

  int basis_degree = 4;
  int basis_interaction = 2;

  std::string family = "bohman";  // bohman | truncpow | powexp
  double alpha = 1.0;
  std::optional<double> nu;
  std::optional<double> cutoff;
  std::optional<double> sparsity;
  double range_low = 0.05;  // powexp prior, effective ranges
  double range_high = 5.0;

  MCMCConfig mcmc;
  CalibrationOptions calibration;

  double level = 0.95;
  Eigen::Index block_size = 4096;
  std::optional<int> draws;
  bool exact_intervals = false;

  std::uint64_t seed = 1;
  double jitter = 0.0;
  int threads = 0;

  static RunConfig from_config(const Config& cfg);
  [[nodiscard]] Config to_config() const;
  /// Family with the configured alpha/nu.
  [[nodiscard]] CorrelationFamily correlation_family() const;
  void validate_for_fit() const;
};

/// Training table split into inputs (columns x1..xd) and response (column y).
struct TrainingTable {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd y;
};

/// Reads consecutive x1..xd columns; `require_y` makes a missing y column a
/// schema error.
TrainingTable read_training_csv(const std::filesystem::path& path, bool require_y = true);
Eigen::MatrixXd read_inputs_csv(const std::filesystem::path& path, Eigen::Index d);

struct FitResult {
  Chain chain;
  double cutoff = 0.0;  // 0 for the power exponential
  Eigen::Index q = 0;
  std::filesystem::path bundle;
};

/// Rescales, optionally calibrates C, samples the chain and writes the model
/// bundle directory.
FitResult cmd_fit(const RunConfig& config, const Logger& log = {});

struct PredictRequest {
  std::filesystem::path bundle;
  std::filesystem::path inputs;
  std::filesystem::path output;
  std::optional<double> level;
  std::optional<Eigen::Index> block_size;
  std::optional<int> draws;
  std::optional<bool> exact_intervals;
  int threads = 0;
};

struct PredictResult {
  Eigen::MatrixXd inputs;
  PredictiveSummary summary;
  std::size_t draws_used = 0;
  Eigen::Index extrapolated = 0;  // rows outside the training box
};

PredictResult cmd_predict(const PredictRequest& request, const Logger& log = {});
void write_predictions_csv(const std::filesystem::path& path, const Eigen::MatrixXd& inputs,
                           const PredictiveSummary& summary);

struct EvalResult {
  double nse = 0.0;
  double coverage = 0.0;
  double level = 0.0;
  Eigen::Index n = 0;
};

/// Truth CSV needs a `y` column aligned row by row with the predictions.
EvalResult cmd_eval(const std::filesystem::path& predictions, const std::filesystem::path& truth);

/// Inputs are rescaled by their own min/max before calibration.
CalibrationReport cmd_calibrate(const std::filesystem::path& design, double target,
                                const CalibrationOptions& options = {});

struct SelectBasisRequest {
  std::filesystem::path train;
  std::optional<std::filesystem::path> holdout;
  double holdout_fraction = 0.2;
  std::vector<int> degrees{1, 2, 3, 4, 5};
  std::vector<int> interactions{1, 2, 3};
  std::uint64_t seed = 1;
};

BasisSelection cmd_select_basis(const SelectBasisRequest& request);
void write_basis_table(const std::filesystem::path& path, const BasisSelection& selection);

SimStudyConfig sim_study_config(const Config& cfg);
BenchmarkOptions benchmark_options(const Config& cfg);

/// Process exit code for an error kind: 2 input, 3 numerical, 4 config.
int exit_code_for(ErrorKind kind);

}  // namespace spem

#endif  // SPEM_WORKFLOW_HPP
