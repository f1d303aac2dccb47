#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "alioth/common.hpp"
#include "alioth/simcloud.hpp"

namespace testsupport {

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("alioth_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double uniform(alioth::Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * alioth::uniform01(rng);
}

inline Eigen::MatrixXd random_matrix(alioth::Rng& rng, int rows, int cols, double lo = 0.0,
                                     double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = uniform(rng, lo, hi);
  }
  return m;
}

// Profile with `m` metrics: offsets 1..m, slopes 0.1, metric j responds to
// SoI j % 4, no noise.
inline alioth::simcloud::AppProfile tiny_profile(const std::string& name, std::size_t m = 8) {
  alioth::simcloud::AppProfile p;
  p.name = name;
  for (std::size_t j = 0; j < m; ++j) {
    p.base_offset.push_back(1.0 + static_cast<double>(j));
    p.base_slope.push_back(0.1);
    alioth::SoIVector r{};
    r[j % 4] = 0.5;
    p.soi_response.push_back(r);
    p.noise_scale.push_back(0.0);
  }
  p.sensitivity = {0.2, 0.4, 0.6, 0.8};
  p.qos_base = 10.0;
  p.qos_slope = 1.0;
  return p;
}

// Two apps, two levels, a short schedule with clean and single-SoI segments.
inline alioth::simcloud::ScenarioConfig tiny_scenario(int episode_len = 60) {
  alioth::simcloud::ScenarioConfig cfg;
  cfg.n_vm_resource_metrics = 3;
  cfg.n_hw_event_metrics = 3;
  cfg.n_host_metrics = 2;
  cfg.episode_len = episode_len;
  cfg.workload_levels = {1.0, 2.0};
  cfg.apps = {tiny_profile("a"), tiny_profile("b")};
  cfg.apps[1].sensitivity = {0.9, 0.1, 0.3, 0.0};
  const double q = episode_len / 4.0;
  cfg.interference_schedule = {{0, q, {}},
                               {q, 2 * q, {0.8, 0, 0, 0}},
                               {2 * q, 3 * q, {}},
                               {3 * q, 4 * q, {0, 0, 0, 0.6}}};
  return cfg;
}

}  // namespace testsupport
