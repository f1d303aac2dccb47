#pragma once

// Shapley values for tree ensembles, SHAP-driven feature selection, and
// source-of-interference attribution.

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alioth/common.hpp"
#include "alioth/gbt.hpp"

namespace alioth::explain {

struct ShapExplanation {
  std::vector<double> phi;
  double base_value = 0.0;

  double total() const;  // base_value + sum(phi)
};

enum class ShapMethod {
  PathDependent,   // conditional expectations weighted by training covers
  Interventional,  // expectations over an explicit background set
};

// Expected ensemble output under the training covers.
double expected_value(const gbt::TreeEnsemble& model);

ShapExplanation shap_path_dependent(const gbt::TreeEnsemble& model, std::span<const double> x);
// base_value is the mean background prediction.
ShapExplanation shap_interventional(const gbt::TreeEnsemble& model, std::span<const double> x,
                                    const Eigen::MatrixXd& background);

// Dispatches on `method`. The background is required (non-empty) for both
// methods so the contract matches; path-dependent ignores its rows.
ShapExplanation shap_tree(const gbt::TreeEnsemble& model, std::span<const double> x,
                          const Eigen::MatrixXd& background,
                          ShapMethod method = ShapMethod::PathDependent);

// Rows of the result are samples; columns are features.
Eigen::MatrixXd shap_matrix(const gbt::TreeEnsemble& model, const Eigen::MatrixXd& X,
                            Eigen::VectorXd* base_values = nullptr, int jobs = 1);

struct GlobalImportance {
  std::vector<double> mean_abs;
  std::vector<double> mean_pos;  // mean of max(phi, 0)
  std::vector<double> mean_neg;  // mean of max(-phi, 0)
};

GlobalImportance global_importance(const Eigen::MatrixXd& phi);
GlobalImportance global_importance(std::span<const ShapExplanation> explanations);

// Per app: the top_n features by mean_pos and the top_n by mean_neg (only
// features with a non-zero score qualify). A feature is kept when it is
// in more than `quorum` of those per-app sets. Ascending indices.
std::vector<std::size_t> select_features_cross_app(std::span<const GlobalImportance> per_app,
                                                   std::size_t top_n = 20,
                                                   std::size_t quorum = 4);

double pearson(std::span<const double> a, std::span<const double> b);

// Top-k columns by |Pearson r| with `intensity`, strongest first; ties go
// to the lower index.
std::vector<std::size_t> top_correlated_metrics(const Eigen::MatrixXd& X,
                                                std::span<const double> intensity,
                                                std::size_t k = 20);

struct SoiWeightModel {
  SoIKind soi = SoIKind::LLC;
  std::vector<std::size_t> selected;
  std::vector<double> alpha;     // aligned with `selected`
  std::vector<double> expanded;  // full feature order, zero elsewhere
  bool rank_deficient = false;
};

// Least squares without intercept of the intensity on the selected
// columns; minimum-norm solution when the design is rank deficient.
SoiWeightModel fit_iil(const Eigen::MatrixXd& X, std::span<const double> intensity, SoIKind soi,
                       std::span<const std::size_t> selected);

struct AttributionResult {
  SoIVector c{};
  SoIVector c_tilde{};
  bool defined = false;
  SoIKind top1 = SoIKind::LLC;
};

// c_i = <expanded_i, phi>, rectified at 0 and normalized to sum 1. When
// every rectified score is 0 the result is undefined.
AttributionResult attribute(std::span<const double> phi,
                            const std::array<SoiWeightModel, kNumSoI>& models);

struct ShapRow {
  std::string sample;
  std::vector<double> phi;
  double base_value = 0.0;
  double prediction = 0.0;
};

// Long format: sample, feature, phi. Each sample also gets a "(base)" row.
// Throws NumericalError if a row violates local accuracy.
void write_shap_csv(const std::filesystem::path& path, std::span<const std::string> feature_names,
                    std::span<const ShapRow> rows, double tol = 1e-6);

struct AttributionRow {
  std::string sample;
  AttributionResult result;
  std::optional<SoIKind> truth;
};

void write_attribution_csv(const std::filesystem::path& path, std::span<const AttributionRow> rows);

}  // namespace alioth::explain
