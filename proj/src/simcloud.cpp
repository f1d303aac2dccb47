#include "alioth/simcloud.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "alioth/csv.hpp"

namespace alioth::simcloud {
namespace {

const std::vector<std::string> kRvNames = {
    "cpu_util",     "mem_usage",      "disk_rd_bytes",  "disk_wr_bytes", "net_rd_bytes",
    "net_wr_bytes", "system_time",    "user_time",      "kbcached",      "disk_rd_req",
    "disk_wr_req",  "net_rd_packets", "net_wr_packets", "mem_swap",      "cpu_steal"};

const std::vector<std::string> kHwNames = {
    "cpi",           "llc_miss",         "llc_ref",          "l2_miss",
    "mem_load_retired", "stlb_miss_loads", "branch_miss",   "unhalted_ref_cycles",
    "rs_empty_cycles", "snoop_rsp_ifwdfe", "offcore_rd",    "offcore_wr",
    "dtlb_miss",     "itlb_miss",        "l1d_repl",         "uops_retired"};

const std::vector<std::string> kHostNames = {"mbl",          "mbr",          "llc_occupancy",
                                             "net_rx_bytes", "net_tx_bytes", "bread",
                                             "bwrite",       "cpu_total"};

// Columns whose dominant SoI is fixed by what they measure.
const std::map<std::string, int> kPinnedSoI = {
    {"hw_llc_miss", 0},       {"hw_llc_ref", 0},        {"hw_l2_miss", 0},
    {"host_llc_occupancy", 0}, {"hw_offcore_rd", 0},     {"host_mbl", 1},
    {"host_mbr", 1},          {"hw_mem_load_retired", 1}, {"hw_stlb_miss_loads", 1},
    {"hw_offcore_wr", 1},     {"rv_net_rd_bytes", 2},   {"rv_net_wr_bytes", 2},
    {"host_net_rx_bytes", 2}, {"host_net_tx_bytes", 2}, {"rv_net_rd_packets", 2},
    {"rv_disk_rd_bytes", 3},  {"rv_disk_wr_bytes", 3},  {"host_bread", 3},
    {"host_bwrite", 3},       {"rv_disk_rd_req", 3}};

struct AppSeed {
  const char* name;
  int family;
};

// Families: 0 NoSQL, 1 message queue, 2 key-value, 3 HPC.
const std::vector<AppSeed> kApps = {{"cassandra", 0}, {"etcd", 2},    {"hbase", 0},
                                    {"hpc", 3},       {"kafka", 1},   {"mongodb", 0},
                                    {"rabbitmq", 1},  {"redis", 2}};

const std::array<SoIVector, 4> kFamilySensitivity = {{{0.35, 0.70, 0.50, 0.45},
                                                      {0.20, 0.40, 0.80, 0.60},
                                                      {0.50, 0.60, 0.35, 0.25},
                                                      {0.60, 0.85, 0.10, 0.15}}};

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::vector<std::string> pick(const std::vector<std::string>& pool, const std::string& prefix,
                              const std::string& generic, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    if (static_cast<std::size_t>(i) < pool.size()) {
      out.push_back(prefix + pool[static_cast<std::size_t>(i)]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%03d", generic.c_str(), i);
      out.push_back(prefix + buf);
    }
  }
  return out;
}

std::vector<ScheduleSegment> default_schedule() {
  std::vector<ScheduleSegment> sched;
  double t = 0.0;
  auto add = [&](double len, SoIVector s) {
    sched.push_back({t, t + len, s});
    t += len;
  };
  const SoIVector clean{};
  for (double level : {1.0 / 3.0, 2.0 / 3.0, 1.0}) {
    add(40, clean);
    for (int k = 0; k < kNumSoI; ++k) {
      SoIVector s{};
      s[static_cast<std::size_t>(k)] = level;
      add(20, s);
    }
  }
  add(40, clean);
  add(20, {0.5, 0.5, 0.0, 0.0});
  add(20, {0.0, 0.4, 0.6, 0.0});
  add(20, {0.3, 0.0, 0.0, 0.7});
  add(40, clean);
  return sched;
}

}  // namespace

void AppProfile::validate() const {
  const std::size_t n = base_offset.size();
  if (base_slope.size() != n || soi_response.size() != n || noise_scale.size() != n) {
    throw UsageError("app profile '" + name + "': inconsistent metric dimensions");
  }
  for (double s : sensitivity) {
    if (!(s >= 0.0 && s <= 1.0)) throw UsageError("app profile '" + name + "': sensitivity outside [0,1]");
  }
  if (!(qos_base > 0.0)) throw UsageError("app profile '" + name + "': qos_base must be > 0");
  for (double v : noise_scale) {
    if (!(v >= 0.0)) throw UsageError("app profile '" + name + "': negative noise scale");
  }
}

std::vector<std::string> make_metric_names(int n_rv, int n_hw, int n_host) {
  auto names = pick(kRvNames, "rv_", "metric_", n_rv);
  auto hw = pick(kHwNames, "hw_", "event_", n_hw);
  auto host = pick(kHostNames, "host_", "metric_", n_host);
  names.insert(names.end(), hw.begin(), hw.end());
  names.insert(names.end(), host.begin(), host.end());
  return names;
}

std::vector<std::string> ScenarioConfig::metric_names() const {
  return make_metric_names(n_vm_resource_metrics, n_hw_event_metrics, n_host_metrics);
}

const AppProfile& ScenarioConfig::app(const std::string& name) const {
  for (const auto& a : apps) {
    if (a.name == name) return a;
  }
  throw UsageError("unknown app: " + name);
}

void ScenarioConfig::validate() const {
  if (apps.empty()) throw UsageError("scenario has no apps");
  if (episode_len <= 0) throw UsageError("episode_len must be positive");
  if (workload_levels.empty()) throw UsageError("scenario has no workload levels");
  for (const auto& a : apps) {
    a.validate();
    if (a.n_metrics() != n_metrics()) {
      throw UsageError("app '" + a.name + "' metric count does not match scenario");
    }
  }
  for (const auto& seg : interference_schedule) {
    if (seg.start < 0.0 || seg.end > episode_len || seg.end <= seg.start) {
      throw UsageError("schedule segment outside [0, episode_len]");
    }
    for (double s : seg.intensity) {
      if (!(s >= 0.0 && s <= 1.0)) throw UsageError("schedule intensity outside [0,1]");
    }
  }
  bool has_clean = false;
  for (int sec = 1; sec <= episode_len && !has_clean; ++sec) {
    const SoIVector s = schedule_at(interference_schedule, sec - 1.0);
    has_clean = std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; });
  }
  if (!has_clean) throw UsageError("schedule has no interference-free segment");
}

MetricRole role_of(const std::string& column) {
  if (column.rfind("rv_", 0) == 0) return MetricRole::VmResource;
  if (column.rfind("hw_", 0) == 0) return MetricRole::HwEvent;
  if (column.rfind("host_", 0) == 0) return MetricRole::Host;
  throw UsageError("metric column without role prefix: " + column);
}

ScenarioConfig make_default_scenario(std::uint64_t seed, Scale scale) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  if (scale == Scale::Full) {
    cfg.n_vm_resource_metrics = 15;
    cfg.n_hw_event_metrics = 175;
    cfg.n_host_metrics = 28;
  }
  cfg.episode_len = 500;
  cfg.workload_levels = {1.0, 2.0, 3.0, 4.0, 5.0};
  cfg.interference_schedule = default_schedule();

  const auto names = cfg.metric_names();
  const std::size_t m = names.size();
  Rng rng(derive_seed(seed, hash_tag("scenario")));

  // Shared structure: metric units and the dominant SoI of each column.
  std::vector<double> unit(m);
  std::vector<int> dominant(m, -1);
  for (std::size_t j = 0; j < m; ++j) {
    unit[j] = std::pow(10.0, uniform(rng, 0.0, 3.0));
    if (auto it = kPinnedSoI.find(names[j]); it != kPinnedSoI.end()) {
      dominant[j] = it->second;
    } else if (names[j] != kCpiColumn && names[j] != kMemUsageColumn) {
      const double u = uniform01(rng);
      if (u < 0.9) dominant[j] = static_cast<int>(u / 0.225);
    }
  }
  std::vector<SoIVector> shared_response(m, SoIVector{});
  for (std::size_t j = 0; j < m; ++j) {
    for (int k = 0; k < kNumSoI; ++k) {
      double r = 0.0;
      if (dominant[j] == k) {
        r = uniform(rng, 0.4, 0.8);
      } else if (dominant[j] >= 0 && uniform01(rng) < 0.1) {
        r = uniform(rng, 0.0, 0.1);
      }
      shared_response[j][static_cast<std::size_t>(k)] = r * unit[j];
    }
  }

  const std::size_t cpi = static_cast<std::size_t>(
      std::find(names.begin(), names.end(), kCpiColumn) - names.begin());
  const std::size_t mem = static_cast<std::size_t>(
      std::find(names.begin(), names.end(), kMemUsageColumn) - names.begin());

  // Family prototypes.
  struct Family {
    std::vector<double> offset, slope, response_gain;
    SoIVector cpi_gain{};
    double cpi_offset = 1.0, cpi_slope = 0.1;
  };
  std::array<Family, 4> families;
  for (auto& f : families) {
    f.offset.resize(m);
    f.slope.resize(m);
    f.response_gain.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      f.offset[j] = uniform(rng, 0.3, 1.0);
      f.slope[j] = uniform(rng, 0.3, 0.6);
      f.response_gain[j] = uniform(rng, 0.7, 1.3);
    }
    for (auto& g : f.cpi_gain) g = uniform(rng, 0.1, 0.8);
    f.cpi_offset = uniform(rng, 0.6, 1.2);
    f.cpi_slope = uniform(rng, 0.08, 0.2);
  }

  for (const auto& seed_app : kApps) {
    const Family& fam = families[static_cast<std::size_t>(seed_app.family)];
    Rng arng(derive_seed(seed, hash_tag(seed_app.name)));
    AppProfile p;
    p.name = seed_app.name;
    p.base_offset.resize(m);
    p.base_slope.resize(m);
    p.soi_response.resize(m);
    p.noise_scale.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      p.base_offset[j] = unit[j] * fam.offset[j] * uniform(arng, 0.85, 1.15);
      p.base_slope[j] = unit[j] * fam.slope[j] * uniform(arng, 0.85, 1.15);
      const double gain = fam.response_gain[j] * uniform(arng, 0.9, 1.1);
      for (std::size_t k = 0; k < kNumSoI; ++k) p.soi_response[j][k] = shared_response[j][k] * gain;
      p.noise_scale[j] = unit[j] * uniform(arng, 0.05, 0.15);
    }
    // Memory usage tracks workload intensity only, with tight noise.
    p.base_offset[mem] = unit[mem] * uniform(arng, 0.2, 0.4);
    p.base_slope[mem] = unit[mem] * 0.25;
    p.soi_response[mem] = SoIVector{};
    p.noise_scale[mem] = unit[mem] * 0.01;
    // The CPI analog moves with interference, but with family-level gains
    // unrelated to QoS sensitivity and relative to a workload-dependent base.
    p.base_offset[cpi] = fam.cpi_offset * uniform(arng, 0.9, 1.1);
    p.base_slope[cpi] = fam.cpi_slope * uniform(arng, 0.9, 1.1);
    const double cpi_mid = p.base_offset[cpi] + 3.0 * p.base_slope[cpi];
    for (std::size_t k = 0; k < kNumSoI; ++k) {
      p.soi_response[cpi][k] = cpi_mid * fam.cpi_gain[k] * uniform(arng, 0.9, 1.1);
    }
    p.noise_scale[cpi] = 0.03 * p.base_offset[cpi];

    for (std::size_t k = 0; k < kNumSoI; ++k) {
      const double s = kFamilySensitivity[static_cast<std::size_t>(seed_app.family)][k] +
                       uniform(arng, -0.1, 0.1);
      p.sensitivity[k] = std::clamp(s, 0.0, 1.0);
    }
    p.qos_base = uniform(arng, 2.0, 20.0);
    p.qos_slope = p.qos_base * uniform(arng, 0.1, 0.3);
    p.qos_noise = 0.005;
    cfg.apps.push_back(std::move(p));
  }
  return cfg;
}

double response_curve(double s, ResponseShape shape) {
  if (shape == ResponseShape::Saturating) return std::min(1.0, 1.25 * s);
  return s;
}

Sample synth_sample(const AppProfile& profile, double intensity, const SoIVector& s, double t,
                    Rng& rng, const SynthOptions& opts) {
  Sample out;
  out.t = t;
  out.app = profile.name;
  out.intensity = intensity;
  out.soi_intensity = s;
  const std::size_t m = profile.n_metrics();
  out.metrics.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    double v = profile.base_offset[j] + profile.base_slope[j] * intensity;
    for (std::size_t k = 0; k < kNumSoI; ++k) v += profile.soi_response[j][k] * s[k];
    if (opts.metric_noise && profile.noise_scale[j] > 0.0) {
      v += profile.noise_scale[j] * standard_normal(rng);
    }
    out.metrics[j] = std::max(0.0, v);
  }
  double load = 0.0;
  for (std::size_t k = 0; k < kNumSoI; ++k) {
    load += profile.sensitivity[k] * response_curve(s[k], opts.response);
  }
  double q = (profile.qos_base + profile.qos_slope * (intensity - 1.0)) * (1.0 + load);
  if (profile.qos_noise > 0.0 && opts.metric_noise) {
    q *= 1.0 + profile.qos_noise * standard_normal(rng);
  }
  out.qos = std::max(q, 1e-6 * profile.qos_base);
  if (opts.cpi_index >= 0) out.metrics[static_cast<std::size_t>(opts.cpi_index)] = opts.cpi_per_qos * out.qos;
  return out;
}

SoIVector schedule_at(const std::vector<ScheduleSegment>& schedule, double t) {
  for (const auto& seg : schedule) {
    if (t >= seg.start && t < seg.end) return seg.intensity;
  }
  return SoIVector{};
}

std::vector<Sample> run_episode(const ScenarioConfig& config, const std::string& app,
                                double intensity) {
  const AppProfile& profile = config.app(app);
  const auto& levels = config.workload_levels;
  const auto level_it = std::find(levels.begin(), levels.end(), intensity);
  if (level_it == levels.end()) throw UsageError("intensity not among configured levels");
  const auto level_idx = static_cast<std::uint64_t>(level_it - levels.begin());

  SynthOptions opts;
  opts.response = config.response;
  opts.metric_noise = config.metric_noise;
  if (config.cpi_tracks_qos) {
    const auto names = config.metric_names();
    const auto it = std::find(names.begin(), names.end(), kCpiColumn);
    if (it != names.end()) {
      opts.cpi_index = static_cast<int>(it - names.begin());
      opts.cpi_per_qos = 0.1;
    }
  }
  Rng rng(derive_seed(config.seed, hash_tag(app) ^ (level_idx * 0x9e37ULL + 0x51)));
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(config.episode_len));
  for (int sec = 1; sec <= config.episode_len; ++sec) {
    // Second `sec` covers [sec-1, sec).
    const SoIVector s = schedule_at(config.interference_schedule, sec - 1.0);
    out.push_back(synth_sample(profile, intensity, s, static_cast<double>(sec), rng, opts));
  }
  if (config.qos_kind == QosKind::Throughput) {
    // Throughput falls as interference load rises; keep the same draws.
    for (auto& smp : out) {
      double load = 0.0;
      for (std::size_t k = 0; k < kNumSoI; ++k) {
        load += profile.sensitivity[k] * response_curve(smp.soi_intensity[k], opts.response);
      }
      smp.qos = smp.qos / ((1.0 + load) * (1.0 + load));
    }
  }
  return out;
}

Dataset run_all(const ScenarioConfig& config) {
  config.validate();
  Dataset d;
  d.metric_names = config.metric_names();
  for (const auto& app : config.apps) {
    for (double level : config.workload_levels) {
      auto ep = run_episode(config, app.name, level);
      d.samples.insert(d.samples.end(), std::make_move_iterator(ep.begin()),
                       std::make_move_iterator(ep.end()));
    }
  }
  return d;
}

double ground_truth_degradation(std::span<const Sample> samples, const Sample& target,
                                QosKind kind) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (s.app == target.app && s.intensity == target.intensity && s.clean()) {
      sum += s.qos;
      ++n;
    }
  }
  if (n == 0) {
    throw UsageError("no interference-free samples for app '" + target.app + "' at this intensity");
  }
  const double d = target.qos / (sum / static_cast<double>(n));
  return kind == QosKind::Latency ? d - 1.0 : 1.0 - d;
}

std::vector<double> label_degradation(std::span<const Sample> samples, QosKind kind) {
  std::map<std::pair<std::string, double>, std::pair<double, std::size_t>> clean;
  for (const auto& s : samples) {
    if (!s.clean()) continue;
    auto& acc = clean[{s.app, s.intensity}];
    acc.first += s.qos;
    acc.second += 1;
  }
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto it = clean.find({s.app, s.intensity});
    if (it == clean.end()) {
      throw UsageError("no interference-free samples for app '" + s.app + "' at this intensity");
    }
    const double d = s.qos / (it->second.first / static_cast<double>(it->second.second));
    out.push_back(kind == QosKind::Latency ? d - 1.0 : 1.0 - d);
  }
  return out;
}

void export_dataset(const Dataset& data, const std::filesystem::path& path) {
  if (data.samples.empty()) throw UsageError("refusing to export an empty dataset");
  csv::Table t;
  t.header = {"t", "app", "intensity", "soi_llc", "soi_mbw", "soi_nbw", "soi_dbw", "qos"};
  for (const auto& n : data.metric_names) {
    role_of(n);
    t.header.push_back(n);
  }
  t.rows.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    if (s.metrics.size() != data.metric_names.size()) throw UsageError("sample width mismatch");
    std::vector<std::string> row;
    row.reserve(t.header.size());
    row.push_back(format_double(s.t));
    row.push_back(s.app);
    row.push_back(format_double(s.intensity));
    for (double v : s.soi_intensity) row.push_back(format_double(v));
    row.push_back(format_double(s.qos));
    for (double v : s.metrics) row.push_back(format_double(v));
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

Dataset import_dataset(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  static const std::vector<std::string> fixed = {"t",       "app",     "intensity", "soi_llc",
                                                 "soi_mbw", "soi_nbw", "soi_dbw",   "qos"};
  if (t.header.size() < fixed.size() ||
      !std::equal(fixed.begin(), fixed.end(), t.header.begin())) {
    throw UsageError("unexpected dataset header in " + path.string());
  }
  Dataset d;
  d.metric_names.assign(t.header.begin() + static_cast<long>(fixed.size()), t.header.end());
  for (const auto& n : d.metric_names) role_of(n);
  d.samples.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    Sample s;
    s.t = parse_double(r[0]);
    s.app = r[1];
    s.intensity = parse_double(r[2]);
    for (std::size_t k = 0; k < kNumSoI; ++k) s.soi_intensity[k] = parse_double(r[3 + k]);
    s.qos = parse_double(r[7]);
    s.metrics.reserve(d.metric_names.size());
    for (std::size_t j = fixed.size(); j < r.size(); ++j) s.metrics.push_back(parse_double(r[j]));
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace alioth::simcloud
