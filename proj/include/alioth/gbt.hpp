#pragma once

// Regression trees with exact greedy second-order splits, the gradient
// boosted ensemble used as the degradation estimator, a bagged-tree
// baseline, univariate feature ranking, and the three-pass grid search.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alioth/common.hpp"
#include "json.hpp"

namespace alioth::gbt {

// Flat node arrays; node 0 is the root. A row goes left iff
// x[feature] < threshold.
struct RegressionTree {
  std::vector<int> feature;  // -1 marks a leaf
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;  // leaf weight
  std::vector<double> cover;  // hessian sum of training rows at the node
  int max_depth = 0;

  std::size_t n_nodes() const { return feature.size(); }
  bool is_leaf(std::size_t node) const { return feature[node] < 0; }
  double predict(std::span<const double> row) const;
  int leaf_of(std::span<const double> row) const;
  int depth() const;
};

enum class EnsembleMode { Boosted, Bagged };

struct TreeEnsemble {
  double base_score = 0.0;
  double eta = 1.0;
  std::vector<RegressionTree> trees;
  EnsembleMode mode = EnsembleMode::Boosted;
  std::size_t n_features = 0;

  double predict_row(std::span<const double> row) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  // Multiplier on each tree's output: eta when boosted, 1/n when bagged.
  double tree_weight() const;
};

struct GbtConfig {
  int n_trees = 100;
  int max_depth = 4;
  double min_child_weight = 1.0;
  double subsample = 1.0;
  double colsample = 1.0;
  double reg_lambda = 1.0;
  double eta = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
  std::string describe() const;
};

// Per-column row order by value, reused across boosting rounds.
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> order;
  std::vector<std::vector<double>> values;  // column values in that order
  explicit SortedColumns(const Eigen::MatrixXd& X);
};

// One tree on gradients/hessians. Rows with zero hessian and gradient are
// ignored. Features outside `features` are never split on (empty = all).
RegressionTree fit_tree(const Eigen::MatrixXd& X, std::span<const double> g,
                        std::span<const double> h, const GbtConfig& cfg, Rng& rng);
RegressionTree fit_tree(const Eigen::MatrixXd& X, const SortedColumns& sorted,
                        std::span<const double> g, std::span<const double> h, int max_depth,
                        double min_child_weight, double reg_lambda,
                        std::span<const std::size_t> features);

// Regularized split gain for squared loss sums.
double split_gain(double gl, double hl, double gr, double hr, double lambda);

TreeEnsemble fit_gbt(const Eigen::MatrixXd& X, std::span<const double> y, const GbtConfig& cfg);

struct BaggingConfig {
  int n_trees = 25;
  int max_depth = 16;
  double min_child_weight = 1.0;
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

TreeEnsemble fit_bagged(const Eigen::MatrixXd& X, std::span<const double> y,
                        const BaggingConfig& cfg);

// Univariate regression F statistic per column: r^2 / (1 - r^2) * (n - 2).
// Constant columns score 0.
std::vector<double> f_values(const Eigen::MatrixXd& X, std::span<const double> y);
// Top-k columns by F value, best first; ties go to the lower index.
std::vector<std::size_t> select_k_best(const Eigen::MatrixXd& X, std::span<const double> y,
                                       int k);

struct GbtGrid {
  std::vector<int> max_depth{3, 4, 6};
  std::vector<double> min_child_weight{1.0, 5.0};
  std::vector<double> subsample{0.7, 1.0};
  std::vector<double> colsample{0.7, 1.0};
  std::vector<double> reg_lambda{0.0, 1.0, 5.0};
  std::vector<double> eta{0.05, 0.1};

  static GbtGrid singleton(const GbtConfig& cfg);
};

struct CvRecord {
  int pass = 0;
  GbtConfig config;
  std::size_t fold = 0;
  double mae = 0.0;
};

struct GridSearchResult {
  GbtConfig best;
  std::vector<CvRecord> table;
};

double cv_mae(const Eigen::MatrixXd& X, std::span<const double> y,
              const std::vector<std::vector<std::size_t>>& folds, const GbtConfig& cfg,
              std::vector<double>* per_fold = nullptr);

// Pass 1 tunes (max_depth, min_child_weight), pass 2 (subsample, colsample),
// pass 3 (reg_lambda, eta), each with earlier winners fixed. Lowest mean
// K-fold MAE wins; ties go to the smaller-capacity candidate.
GridSearchResult grid_search_3pass(const Eigen::MatrixXd& X, std::span<const double> y,
                                   const GbtGrid& grid, std::size_t k, std::uint64_t seed,
                                   const GbtConfig& base = {}, int jobs = 1);

nlohmann::json to_json(const TreeEnsemble& e);
TreeEnsemble ensemble_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GbtConfig& c);
GbtConfig config_from_json(const nlohmann::json& j);

}  // namespace alioth::gbt
