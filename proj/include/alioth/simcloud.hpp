#pragma once

// Synthetic co-location telemetry: per-second metric vectors for VMs running
// application analogs under scheduled interference, with known QoS.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "alioth/common.hpp"

namespace alioth::simcloud {

enum class Scale { Desk, Full };

// Shape of the QoS response to one SoI's intensity.
enum class ResponseShape { Linear, Saturating };

// Latency: lower is better, D = d - 1. Throughput: D = 1 - d.
enum class QosKind { Latency, Throughput };

enum class MetricRole { VmResource, HwEvent, Host };

struct AppProfile {
  std::string name;
  // base_metric(i) = base_offset + base_slope * i, per metric.
  std::vector<double> base_offset;
  std::vector<double> base_slope;
  // n_metrics rows, one SoIVector of responses per metric.
  std::vector<SoIVector> soi_response;
  SoIVector sensitivity{};
  double qos_base = 1.0;
  double qos_slope = 0.0;
  double qos_noise = 0.0;  // relative std of the QoS measurement
  std::vector<double> noise_scale;

  std::size_t n_metrics() const { return base_offset.size(); }
  // Throws UsageError if an invariant is broken.
  void validate() const;
};

// Interference active on [start, end) seconds.
struct ScheduleSegment {
  double start = 0.0;
  double end = 0.0;
  SoIVector intensity{};
};

struct ScenarioConfig {
  std::vector<AppProfile> apps;
  int n_vm_resource_metrics = 8;
  int n_hw_event_metrics = 40;
  int n_host_metrics = 8;
  int episode_len = 500;
  std::vector<double> workload_levels;
  std::vector<ScheduleSegment> interference_schedule;
  std::uint64_t seed = 1;
  ResponseShape response = ResponseShape::Linear;
  QosKind qos_kind = QosKind::Latency;
  // Sanity mode: the CPI-analog column is exactly proportional to QoS.
  bool cpi_tracks_qos = false;
  bool metric_noise = true;

  std::size_t n_metrics() const {
    return static_cast<std::size_t>(n_vm_resource_metrics + n_hw_event_metrics +
                                    n_host_metrics);
  }
  std::vector<std::string> metric_names() const;
  const AppProfile& app(const std::string& name) const;
  void validate() const;
};

struct Sample {
  double t = 0.0;
  std::vector<double> metrics;
  double qos = 0.0;
  std::string app;
  double intensity = 0.0;
  SoIVector soi_intensity{};

  bool clean() const {
    for (double s : soi_intensity) {
      if (s != 0.0) return false;
    }
    return true;
  }
};

struct Dataset {
  std::vector<std::string> metric_names;
  // Episodes are contiguous, timestamps strictly increasing within each.
  std::vector<Sample> samples;
};

inline constexpr const char* kCpiColumn = "hw_cpi";
inline constexpr const char* kMemUsageColumn = "rv_mem_usage";

MetricRole role_of(const std::string& column);

// Metric names for the given counts, prefixed rv_/hw_/host_.
std::vector<std::string> make_metric_names(int n_rv, int n_hw, int n_host);

ScenarioConfig make_default_scenario(std::uint64_t seed, Scale scale);

double response_curve(double s, ResponseShape shape);

struct SynthOptions {
  ResponseShape response = ResponseShape::Linear;
  bool metric_noise = true;
  // Index of the CPI-analog column and its proportionality to QoS when the
  // sanity mode is active; negative index disables it.
  int cpi_index = -1;
  double cpi_per_qos = 0.0;
};

Sample synth_sample(const AppProfile& profile, double intensity, const SoIVector& s,
                    double t, Rng& rng, const SynthOptions& opts = {});

// Interference vector active at time t under the schedule.
SoIVector schedule_at(const std::vector<ScheduleSegment>& schedule, double t);

// One sample per second, t = 1..episode_len. Throws UsageError for an unknown
// app or an intensity outside the configured levels.
std::vector<Sample> run_episode(const ScenarioConfig& config, const std::string& app,
                                double intensity);

// All (app, level) episodes in config order.
Dataset run_all(const ScenarioConfig& config);

// D for one target: Q / Qbar - 1 (latency) with Qbar over clean samples of the
// same (app, intensity). Throws UsageError when no such clean sample exists.
double ground_truth_degradation(std::span<const Sample> samples, const Sample& target,
                                QosKind kind = QosKind::Latency);

// D for every sample in one pass per group.
std::vector<double> label_degradation(std::span<const Sample> samples,
                                      QosKind kind = QosKind::Latency);

void export_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset import_dataset(const std::filesystem::path& path);

}  // namespace alioth::simcloud
