#pragma once

// Column dropping, winsorizing and min-max scaling of raw metrics; windowed
// feature extraction; DAE pair construction and dataset splits.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alioth/common.hpp"
#include "alioth/simcloud.hpp"

namespace alioth::dataprep {

// Named columns over rows; values(row, col).
struct MetricTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

MetricTable to_table(const simcloud::Dataset& data);
// Same, restricted to the given sample indices.
MetricTable to_table(const simcloud::Dataset& data, std::span<const std::size_t> rows);

struct PreprocessModel {
  std::vector<std::string> kept_columns;
  std::vector<std::string> dropped_columns;
  std::vector<double> clip_lo, clip_hi;
  std::vector<double> min, max;
};

inline constexpr double kClipLowPercentile = 0.01;
inline constexpr double kClipHighPercentile = 0.99;

// Linear-interpolation percentile of an unsorted sample, q in [0, 1].
double percentile(std::vector<double> values, double q);

PreprocessModel fit_preprocess(const MetricTable& table);
MetricTable apply_preprocess(const PreprocessModel& model, const MetricTable& table);

enum class WindowStat { Mean, Min, Max, MaxDiff, Std };
inline constexpr std::array<WindowStat, 5> kWindowStats = {
    WindowStat::Mean, WindowStat::Min, WindowStat::Max, WindowStat::MaxDiff, WindowStat::Std};
std::string_view stat_name(WindowStat s);

struct WindowConfig {
  std::vector<int> lengths{3, 5, 10, 20};

  int max_length() const;
  std::size_t features_per_metric() const { return lengths.size() * kWindowStats.size(); }
  void validate() const;
};

// "<metric>.<T>.<stat>", metric-major, then window length, then stat.
std::vector<std::string> feature_names(std::span<const std::string> metrics,
                                       const WindowConfig& cfg);

struct FeatureVector {
  std::vector<double> values;
  double label = 0.0;
};

// Statistics over the `T` samples ending at row `end` (inclusive) of a
// time-major series. Needs end + 1 >= max window length; throws UsageError
// otherwise.
FeatureVector window_features(const Eigen::MatrixXd& series, const WindowConfig& cfg,
                              std::size_t end);

struct RowMeta {
  std::size_t sample = 0;  // index into the source dataset
  std::string app;
  double intensity = 0.0;
  double t = 0.0;
  SoIVector soi{};
  double qos = 0.0;
  double label = 0.0;
  // No interference anywhere in the longest window ending at this row.
  bool window_clean = false;

  bool clean() const {
    for (double s : soi) {
      if (s != 0.0) return false;
    }
    return true;
  }
};

// Windowed, scaled features for every sample with full window history.
struct FeatureSet {
  std::vector<std::string> names;
  Eigen::MatrixXd X;  // rows x features
  std::vector<RowMeta> meta;

  std::size_t rows() const { return meta.size(); }
  std::vector<std::string> apps() const;  // distinct, sorted
};

// Contiguous runs of the same (app, intensity): [begin, end) sample ranges.
std::vector<std::pair<std::size_t, std::size_t>> episodes(const simcloud::Dataset& data);

FeatureSet build_features(const simcloud::Dataset& data, std::span<const double> labels,
                          const PreprocessModel& model, const WindowConfig& cfg);

FeatureSet subset(const FeatureSet& fs, std::span<const std::size_t> rows);
FeatureSet select_columns(const FeatureSet& fs, std::span<const std::size_t> cols);

struct DaePairs {
  Eigen::MatrixXd noisy;  // rows x features
  Eigen::MatrixXd clean;
};

// Mean feature vector per (app, intensity) over the window-clean
// `reference` rows, looked up for each of `rows`. Throws UsageError when a
// group has no clean reference row.
Eigen::MatrixXd clean_targets(const FeatureSet& fs, std::span<const std::size_t> reference,
                              std::span<const std::size_t> rows);

// Every row paired with its group's clean mean computed over the same rows.
DaePairs make_dae_pairs(const FeatureSet& fs, std::span<const std::size_t> rows);
DaePairs make_dae_pairs(const FeatureSet& fs);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-app shuffled holdout; each app contributes round(ratio * n_app) rows
// to train. Needs at least 10 rows.
Split split_holdout(std::span<const std::string> row_apps, double ratio, std::uint64_t seed);
Split split_leave_one_app_out(std::span<const std::string> row_apps, const std::string& app);

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);

// Columns: sample, app, intensity, t, soi_<kind> x4, window_clean, D, then
// features.
void write_features(const FeatureSet& fs, const std::filesystem::path& path);
FeatureSet read_features(const std::filesystem::path& path);

}  // namespace alioth::dataprep
