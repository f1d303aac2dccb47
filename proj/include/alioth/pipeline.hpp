#pragma once

// Assembly of the estimator: SHAP feature selection over windowed
// features, the denoiser, and the tree model on [x || denoise(x)].

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alioth/baselines.hpp"
#include "alioth/dataprep.hpp"
#include "alioth/explain.hpp"
#include "alioth/gbt.hpp"
#include "alioth/neural.hpp"
#include "alioth/simcloud.hpp"
#include "json.hpp"

namespace alioth::pipeline {

struct PipelineConfig {
  dataprep::WindowConfig window;

  gbt::GbtConfig selector{40, 3, 1.0, 1.0, 1.0, 1.0, 0.2, 1};
  std::size_t selector_rows = 3000;
  std::size_t shap_rows_per_app = 100;
  std::size_t top_n = 20;
  std::size_t quorum = 4;

  neural::DaeArchitecture arch;
  neural::TrainConfig dae{5e-2, 40, 32, 1, 1.0, 10.0};
  neural::TrainConfig dadae{3e-2, 40, 32, 1, 1.0, 10.0};
  bool dadae_warm_start = false;

  gbt::GbtConfig gbt{100, 4, 1.0, 1.0, 1.0, 1.0, 0.1, 1};
  gbt::GbtGrid grid;
  bool grid_search = true;
  std::size_t cv_folds = 5;
  std::size_t grid_rows = 1000;

  gbt::BaggingConfig bagging{10, 12, 2.0, true, 1};
  int practical_k = 20;
  int cart_depth = 8;
  baselines::CpiConfig cpi;

  std::size_t attribution_k = 20;
  double threshold = 0.05;
  double holdout_ratio = 0.8;
  std::uint64_t seed = 1;
  int jobs = 1;

  void validate() const;
};

// Sample indices that get a feature row, in build_features order.
std::vector<std::size_t> eligible_samples(const simcloud::Dataset& data,
                                          const dataprep::WindowConfig& cfg);

// Preprocessing fitted on the samples behind `fit_rows`, then features
// for every eligible sample.
struct Prepared {
  dataprep::PreprocessModel prep;
  dataprep::FeatureSet fs;
};
Prepared prepare(const simcloud::Dataset& data, std::span<const double> labels,
                 std::span<const std::size_t> eligible, std::span<const std::size_t> fit_rows,
                 const dataprep::WindowConfig& window);

// `count` distinct rows drawn from `rows` (all of them if fewer), sorted.
std::vector<std::size_t> sample_rows(std::span<const std::size_t> rows, std::size_t count,
                                     std::uint64_t seed);

struct FeatureSelection {
  std::vector<std::size_t> selected;  // column indices into the full feature set
  std::vector<std::string> apps;
  std::vector<explain::GlobalImportance> importance;  // per app
  bool fallback = false;  // vote was empty; pooled ranking used
};

FeatureSelection select_features(const dataprep::FeatureSet& fs,
                                 std::span<const std::size_t> train_rows,
                                 const PipelineConfig& cfg);

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, std::span<const std::size_t> rows);
Eigen::MatrixXd columns_of(const Eigen::MatrixXd& X, std::span<const std::size_t> cols);
std::vector<double> labels_of(const dataprep::FeatureSet& fs, std::span<const std::size_t> rows);
// [a || b] column-wise.
Eigen::MatrixXd concat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// The deployable estimator. Raw metric windows in, degradation out.
struct AliothModel {
  dataprep::PreprocessModel prep;
  dataprep::WindowConfig window;
  std::vector<std::size_t> selected;  // indices into feature_names(prep.kept_columns)
  std::vector<std::string> selected_names;
  neural::DaeModel dae;
  gbt::TreeEnsemble gbt;

  // X holds selected, scaled window features (rows x |selected|).
  // Estimator inputs [X || denoise(X)].
  Eigen::MatrixXd inputs(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  // `recent` holds the last window of raw metrics (time-major, columns in
  // dataset order); returns D for the final row.
  double predict_window(const Eigen::MatrixXd& recent,
                        std::span<const std::string> metric_names) const;
  std::vector<std::string> input_names() const;  // selected names, then "dae:" copies
};

// Per-SoI intensity models over estimator inputs Z, one row per `meta`
// entry, each on its k most correlated columns.
std::array<explain::SoiWeightModel, kNumSoI> fit_soi_weights(const Eigen::MatrixXd& Z,
                                                             std::span<const dataprep::RowMeta> meta,
                                                             std::size_t k);

nlohmann::json to_json(const AliothModel& m);
AliothModel alioth_from_json(const nlohmann::json& j);
nlohmann::json to_json(const dataprep::PreprocessModel& m);
dataprep::PreprocessModel preprocess_from_json(const nlohmann::json& j);

// Grid search on a seeded subsample of the training rows. Returns the
// tuned config with n_trees and seed taken from `cfg.gbt`.
gbt::GridSearchResult tune_gbt(const Eigen::MatrixXd& Z, std::span<const double> y,
                               const PipelineConfig& cfg);

}  // namespace alioth::pipeline
