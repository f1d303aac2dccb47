#pragma once

// Error metrics, violation classification, threshold sweeps, and the
// offline / leave-one-app-out / oracle protocols comparing all methods.

#include <array>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alioth/pipeline.hpp"
#include "alioth/simcloud.hpp"

namespace alioth::evalkit {

double mae(std::span<const double> y, std::span<const double> yhat);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Violation iff value > threshold, for truth and prediction alike. With no
// actual and no predicted positives, precision and recall are 1.
Confusion qos_confusion(std::span<const double> d, std::span<const double> dhat,
                        double threshold);

inline constexpr std::array<double, 4> kSweepThresholds = {0.05, 0.10, 0.15, 0.20};

struct ThresholdSweep {
  std::vector<double> thresholds;
  std::vector<Confusion> rows;
  // max - min over thresholds
  double precision_volatility = 0.0;
  double recall_volatility = 0.0;
  double f1_volatility = 0.0;
  double accuracy_volatility = 0.0;
};

ThresholdSweep threshold_sweep(std::span<const double> d, std::span<const double> dhat,
                               std::span<const double> thresholds = kSweepThresholds);

enum class Protocol { Offline82, LeaveOneAppOut, OracleDae };
std::string_view protocol_name(Protocol p);
Protocol protocol_from_name(std::string_view name);

// Method names used in reports.
namespace method {
inline constexpr const char* kGbt = "gbt";
inline constexpr const char* kAliothDae = "alioth_dae";
inline constexpr const char* kAliothDadae = "alioth_dadae";
inline constexpr const char* kOracleDae = "oracle_dae";
inline constexpr const char* kPractical = "practical";
inline constexpr const char* kCart = "cart";
inline constexpr const char* kBestPossibleCpi = "best_possible_cpi";
inline constexpr const char* kBestEffortCpi = "best_effort_cpi";
}  // namespace method

std::vector<std::string> default_methods(Protocol p);

// The single active source, if exactly one intensity is non-zero.
std::optional<SoIKind> single_soi(const SoIVector& s);

struct Prediction {
  std::size_t sample = 0;
  std::string app;
  std::string method;
  double truth = 0.0;
  double estimate = 0.0;
};

struct AttributionSummary {
  std::size_t flagged = 0;   // single-SoI test rows with estimate > threshold
  std::size_t correct = 0;
  std::size_t undefined = 0;
  bool sums_to_one = true;   // every defined row
  double accuracy() const {
    return flagged ? static_cast<double>(correct) / static_cast<double>(flagged)
                   : std::numeric_limits<double>::quiet_NaN();
  }
};

struct EvalReport {
  Protocol protocol = Protocol::Offline82;
  std::vector<std::string> apps;
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, double>> mae;  // method -> app -> MAE
  std::map<std::string, double> mean_mae;                     // macro over apps
  std::vector<Prediction> predictions;

  // Offline extras (empty under leave-one-app-out).
  std::optional<ThresholdSweep> sweep;
  std::optional<AttributionSummary> attribution;
  std::vector<explain::AttributionRow> attribution_rows;
  double noisy_mae = std::numeric_limits<double>::quiet_NaN();     // MAE(x, clean)
  double denoised_mae = std::numeric_limits<double>::quiet_NaN();  // MAE(denoise(x), clean)
  std::optional<pipeline::AliothModel> model;
  std::vector<std::size_t> selected;
  std::vector<std::string> selected_names;
  std::vector<neural::EpochLog> dae_log;

  gbt::GbtConfig tuned;
  std::vector<gbt::CvRecord> cv_table;
};

// Runs one protocol. When `tuned` is given the grid search is skipped and
// that config is used for every tree model.
EvalReport run_protocol(const simcloud::Dataset& data, std::span<const double> labels,
                        Protocol protocol, std::span<const std::string> methods,
                        const pipeline::PipelineConfig& cfg,
                        const std::optional<gbt::GbtConfig>& tuned = std::nullopt);

// Rows: one per app, then "mean"; columns: methods.
void write_mae_table(const EvalReport& r, const std::filesystem::path& path);
void write_predictions(const EvalReport& r, const std::filesystem::path& path);
void write_sweep(const ThresholdSweep& s, const std::filesystem::path& path);
void write_cv_table(std::span<const gbt::CvRecord> table, const std::filesystem::path& path);
std::string summary_text(const EvalReport& r);

}  // namespace alioth::evalkit
