#pragma once

// Degradation estimates read directly off the CPI-analog metric, with a
// known baseline or one recovered by two nested 1-D Gaussian mixtures.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alioth/common.hpp"
#include "alioth/simcloud.hpp"

namespace alioth::baselines {

inline constexpr double kVarianceFloor = 1e-8;

struct Gmm1D {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t k() const { return weights.size(); }
  double log_likelihood(std::span<const double> values) const;
  std::vector<double> responsibilities(double v) const;
  // Highest responsibility; ties go to the lower index.
  std::size_t assign(double v) const;
  std::size_t lowest_mean() const;
};

struct EmResult {
  Gmm1D model;
  std::vector<double> loglik;  // after each iteration, starting at the init
  int iterations = 0;
};

struct EmConfig {
  int max_iter = 500;
  double tol = 1e-8;
};

// EM from a k-means++ seeding. Throws UsageError when there are fewer
// distinct values than components.
EmResult fit_gmm_em(std::span<const double> values, std::size_t k, std::uint64_t seed,
                    const EmConfig& cfg = {});

// -2 loglik + (3K - 1) ln n.
double bic(const Gmm1D& model, std::span<const double> values);

struct BicChoice {
  std::size_t k = 1;
  std::vector<double> bic;  // index K - 1
  Gmm1D model;
};

// K in 1..k_max minimizing BIC; candidates with more components than
// distinct values are skipped.
BicChoice select_k_bic(std::span<const double> values, std::size_t k_max, std::uint64_t seed);

// D = cpi / baseline - 1.
double best_possible_cpi(double cpi, double baseline);

enum class CpiMode { BestPossible, BestEffort };

struct BestEffortApp {
  Gmm1D usage;                         // clusters of memory usage
  std::vector<double> cluster_baseline;  // per usage cluster
};

struct CpiBaselineModel {
  CpiMode mode = CpiMode::BestPossible;
  // Best-Possible: clean mean CPI per (app, workload intensity).
  std::map<std::pair<std::string, double>, double> known;
  // Best-Effort: per app.
  std::map<std::string, BestEffortApp> effort;
  std::size_t cpi_index = 0;
  std::size_t usage_index = 0;

  double predict(const simcloud::Sample& s) const;
};

struct CpiConfig {
  std::size_t k_max = 6;
  std::uint64_t seed = 1;
};

// Baseline from clean samples with known intensity.
CpiBaselineModel fit_best_possible(const simcloud::Dataset& data,
                                   std::span<const std::size_t> rows);
// Baseline recovered from unlabeled history: memory usage clusters stand in
// for workload intensity, and within each cluster the lowest-mean CPI
// component stands in for the clean state.
CpiBaselineModel fit_best_effort(const simcloud::Dataset& data, std::span<const std::size_t> rows,
                                 const CpiConfig& cfg = {});

struct BaselinePrediction {
  std::size_t sample = 0;
  double estimate = 0.0;
  CpiMode mode = CpiMode::BestPossible;
};

void write_predictions(const std::filesystem::path& path,
                       std::span<const BaselinePrediction> rows);

}  // namespace alioth::baselines
