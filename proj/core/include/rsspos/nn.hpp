#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsspos/channel.hpp"
#include "rsspos/metrics.hpp"

namespace rsspos {

/// Single-hidden-layer perceptron: tanh hidden units, linear scalar output.
/// Inputs and output are min-max mapped to [-1, 1] around the network.
struct MlpModel {
  int n_inputs = 0;
  int n_hidden = 0;
  Eigen::MatrixXd w_hidden;  ///< n_hidden x n_inputs
  Eigen::VectorXd b_hidden;  ///< n_hidden
  Eigen::VectorXd w_out;     ///< n_hidden
  double b_out = 0.0;

  Eigen::VectorXd in_min;  ///< per input feature
  Eigen::VectorXd in_max;
  double out_min = -1.0;
  double out_max = 1.0;

  bool operator==(const MlpModel& other) const;
};

/// Row-major sample table: one row of RSS inputs per target position.
struct NnDataset {
  Eigen::MatrixXd inputs;   ///< n x n_features
  Eigen::VectorXd targets;  ///< n
  std::vector<std::string> feature_names;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
};

/// Pivots a survey into one row per x position with RSU RSS columns in id
/// order; the target is x_m. Throws InvalidArgument on an incomplete grid.
NnDataset dataset_from_survey(std::span<const RssSample> samples);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; validation and test get floor(0.15 n) each, train the rest.
SplitIndices split_dataset(std::size_t n, std::uint64_t seed);

/// Weights uniform in +-1/sqrt(fan_in), zero biases, identity normalization.
MlpModel init_mlp(int n_inputs, int n_hidden, std::uint64_t seed);

/// Sets the normalization ranges from the given rows (constant features get a
/// +-1 range).
void fit_normalization(MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows);

double forward(const MlpModel& model, std::span<const double> rss_dbm);

/// Gradients of the batch mean of (normalized output - normalized target)^2.
struct MlpGradients {
  Eigen::MatrixXd w_hidden;
  Eigen::VectorXd b_hidden;
  Eigen::VectorXd w_out;
  double b_out = 0.0;
};

MlpGradients gradients(const MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows);
MlpGradients gradients(const MlpModel& model, const NnDataset& batch);

/// Normalized-scale batch loss that `gradients` differentiates.
double normalized_loss(const MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows);

/// Mean squared error in target units (m^2) over the given rows.
double mse_on(const MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows);

struct TrainConfig {
  int max_epochs = 1000;
  int patience = 6;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;  ///< drives split and initialization in `sweep`
};

struct EpochRecord {
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainResult {
  MlpModel model;  ///< snapshot from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  ///< index into history
};

/// Full-batch gradient descent with early stopping on the validation split.
/// Normalization is fitted on the training rows before the first epoch.
TrainResult train(MlpModel model, const NnDataset& data, const SplitIndices& splits, const TrainConfig& config);

struct SweepConfig {
  std::vector<int> hidden_sizes{2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::uint64_t> seeds = default_seeds(20);
  TrainConfig train;
  unsigned threads = 0;  ///< 0 = hardware concurrency

  static std::vector<std::uint64_t> default_seeds(std::size_t count);
};

struct SweepRow {
  int hidden = 0;
  std::uint64_t seed = 0;
  MetricsReport test;
  MetricsReport all;
};

/// One trained network per (hidden size, seed), ranked by (mse_all,
/// max_abs_error_all, hidden, seed). The table does not depend on the thread
/// count or completion order.
std::vector<SweepRow> sweep(const NnDataset& data, const SweepConfig& config);

/// `rank,hidden,seed,mse_test,mse_all,maxerr_test,maxerr_all,std_test,std_all,var_test,var_all,corr_test,corr_all`
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace rsspos
