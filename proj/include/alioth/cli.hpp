#pragma once

// Command-line front end: configuration files, run manifests, and the
// subcommands that wire the modules into experiments.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alioth/acceptance.hpp"
#include "alioth/evalkit.hpp"
#include "alioth/pipeline.hpp"
#include "alioth/simcloud.hpp"

namespace alioth::cli {

struct RunConfig {
  std::uint64_t seed = 1;
  simcloud::Scale scale = simcloud::Scale::Desk;
  simcloud::ResponseShape response = simcloud::ResponseShape::Linear;
  simcloud::QosKind qos = simcloud::QosKind::Latency;
  bool cpi_tracks_qos = false;
  bool metric_noise = true;
  pipeline::PipelineConfig pipeline;

  // Propagates the run seed into every component seed.
  void apply_seed(std::uint64_t s);
  simcloud::ScenarioConfig scenario() const;
};

// INI-style file: [section] headers and key = value lines. Unknown
// sections or keys are errors.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string version;
  std::string started;
  std::string finished;
};

void write_manifest(const RunManifest& m, const std::filesystem::path& dir);
std::string version_string();

// Output directory: the explicit flag, else $OUTPUT_DIR, else `fallback`.
std::filesystem::path resolve_output(const std::string& flag, const std::string& fallback);

struct ReproResult {
  evalkit::EvalReport offline;
  evalkit::EvalReport loao;
  double seconds = 0.0;
  double inference_ms = 0.0;
  std::vector<acceptance::CriterionResult> criteria;
};

// Generates the desk dataset, runs both protocols and every method,
// writes all reports under `out`, and evaluates the acceptance checks
// that one run can decide. `previous` (if any) is compared for
// determinism.
ReproResult repro_all(const RunConfig& cfg, const std::filesystem::path& out,
                      const std::optional<std::filesystem::path>& previous = std::nullopt);

// Entry point; returns the process exit code (0 ok, 2 usage, 3 numerical).
int run(int argc, char** argv);

}  // namespace alioth::cli
