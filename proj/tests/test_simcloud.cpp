#include <doctest.h>

#include <algorithm>
#include <map>

#include "alioth/simcloud.hpp"
#include "support.hpp"

using namespace alioth;
using namespace alioth::simcloud;

TEST_CASE("default desk scenario has eight apps and 56 metric columns") {
  const auto cfg = make_default_scenario(1, Scale::Desk);
  CHECK(cfg.apps.size() == 8);
  CHECK(cfg.n_metrics() == 56);
  CHECK(cfg.metric_names().size() == 56);
  CHECK(cfg.workload_levels.size() >= 5);
  cfg.validate();
}

TEST_CASE("default full scenario has 218 metric columns") {
  const auto cfg = make_default_scenario(1, Scale::Full);
  CHECK(cfg.n_metrics() == 218);
  CHECK(cfg.apps.front().n_metrics() == 218);
}

TEST_CASE("default scenario is deterministic in seed") {
  const auto a = make_default_scenario(1, Scale::Desk);
  const auto b = make_default_scenario(1, Scale::Desk);
  const auto c = make_default_scenario(2, Scale::Desk);
  REQUIRE(a.apps.size() == b.apps.size());
  for (std::size_t i = 0; i < a.apps.size(); ++i) {
    CHECK(a.apps[i].name == b.apps[i].name);
    CHECK(a.apps[i].base_offset == b.apps[i].base_offset);
    CHECK(a.apps[i].base_slope == b.apps[i].base_slope);
    CHECK(a.apps[i].sensitivity == b.apps[i].sensitivity);
    CHECK(a.apps[i].noise_scale == b.apps[i].noise_scale);
    CHECK(a.apps[i].soi_response == b.apps[i].soi_response);
  }
  CHECK(a.apps[0].base_offset != c.apps[0].base_offset);
}

TEST_CASE("default profiles satisfy their invariants") {
  const auto cfg = make_default_scenario(3, Scale::Desk);
  for (const auto& a : cfg.apps) {
    for (double s : a.sensitivity) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
    CHECK(a.qos_base > 0.0);
    for (double v : a.noise_scale) CHECK(v >= 0.0);
  }
}

TEST_CASE("metric names carry role prefixes") {
  const auto names = make_metric_names(8, 40, 8);
  int rv = 0, hw = 0, host = 0;
  for (const auto& n : names) {
    switch (role_of(n)) {
      case MetricRole::VmResource: ++rv; break;
      case MetricRole::HwEvent: ++hw; break;
      case MetricRole::Host: ++host; break;
    }
  }
  CHECK(rv == 8);
  CHECK(hw == 40);
  CHECK(host == 8);
  CHECK(std::find(names.begin(), names.end(), kCpiColumn) != names.end());
  CHECK(std::find(names.begin(), names.end(), kMemUsageColumn) != names.end());
  CHECK_THROWS_AS(role_of("cpu"), UsageError);
}

TEST_CASE("zero interference without noise gives the base metrics and base qos") {
  const auto p = testsupport::tiny_profile("a");
  Rng rng(5);
  SynthOptions opts;
  opts.metric_noise = false;
  const auto s = synth_sample(p, 3.0, SoIVector{}, 1.0, rng, opts);
  for (std::size_t j = 0; j < p.n_metrics(); ++j) {
    CHECK(s.metrics[j] == doctest::Approx(p.base_offset[j] + p.base_slope[j] * 3.0).epsilon(1e-15));
  }
  CHECK(s.qos == doctest::Approx(p.qos_base + p.qos_slope * 2.0).epsilon(1e-15));
}

TEST_CASE("closed-form qos for a single sensitive SoI") {
  auto p = testsupport::tiny_profile("a");
  p.sensitivity = {0.0, 1.0, 0.0, 0.0};
  p.qos_base = 10.0;
  Rng rng(1);
  SynthOptions opts;
  opts.metric_noise = false;
  const auto s = synth_sample(p, 1.0, {0.0, 0.6, 0.0, 0.0}, 1.0, rng, opts);
  CHECK(s.qos == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("qos is monotone in SoI intensity") {
  auto p = testsupport::tiny_profile("a");
  SynthOptions opts;
  opts.metric_noise = false;
  for (auto shape : {ResponseShape::Linear, ResponseShape::Saturating}) {
    opts.response = shape;
    Rng rng(1);
    const double hi = synth_sample(p, 1.0, {0, 1.0, 0, 0}, 1, rng, opts).qos;
    const double lo = synth_sample(p, 1.0, {0, 0.5, 0, 0}, 1, rng, opts).qos;
    CHECK(hi >= lo);
  }
}

TEST_CASE("response curve is monotone with g(0) = 0") {
  for (auto shape : {ResponseShape::Linear, ResponseShape::Saturating}) {
    CHECK(response_curve(0.0, shape) == 0.0);
    double prev = 0.0;
    for (int i = 1; i <= 100; ++i) {
      const double v = response_curve(i / 100.0, shape);
      CHECK(v >= prev);
      prev = v;
    }
  }
  CHECK(response_curve(0.5, ResponseShape::Linear) == 0.5);
  CHECK(response_curve(0.9, ResponseShape::Saturating) == 1.0);
}

TEST_CASE("episodes have one sample per second") {
  const auto cfg = testsupport::tiny_scenario(100);
  const auto ep = run_episode(cfg, "a", 1.0);
  REQUIRE(ep.size() == 100);
  for (std::size_t i = 1; i < ep.size(); ++i) CHECK(ep[i].t > ep[i - 1].t);
  CHECK(std::any_of(ep.begin(), ep.end(), [](const Sample& s) { return s.clean(); }));
}

TEST_CASE("single clean segment gives only clean samples") {
  auto cfg = testsupport::tiny_scenario(50);
  cfg.interference_schedule = {{0, 50, {}}};
  for (const auto& s : run_episode(cfg, "b", 2.0)) CHECK(s.clean());
}

TEST_CASE("unknown app and unknown level are rejected") {
  const auto cfg = testsupport::tiny_scenario();
  CHECK_THROWS_AS(run_episode(cfg, "zzz", 1.0), UsageError);
  CHECK_THROWS_AS(run_episode(cfg, "a", 7.0), UsageError);
}

TEST_CASE("default scenario has clean segments for every app") {
  const auto cfg = make_default_scenario(1, Scale::Desk);
  for (const auto& a : cfg.apps) {
    const auto ep = run_episode(cfg, a.name, cfg.workload_levels.front());
    CHECK(std::any_of(ep.begin(), ep.end(), [](const Sample& s) { return s.clean(); }));
  }
}

TEST_CASE("degradation formula") {
  std::vector<Sample> s(3);
  for (auto& x : s) {
    x.app = "a";
    x.intensity = 1.0;
  }
  s[0].qos = 9.0;
  s[1].qos = 11.0;
  s[2].qos = 12.0;
  s[2].soi_intensity = {0, 0.5, 0, 0};
  CHECK(ground_truth_degradation(s, s[2]) == doctest::Approx(0.2));
  Sample at_mean = s[0];
  at_mean.qos = 10.0;
  CHECK(ground_truth_degradation(s, at_mean) == doctest::Approx(0.0));
  CHECK(ground_truth_degradation(s, s[2], QosKind::Throughput) == doctest::Approx(-0.2));
  Sample other = s[0];
  other.app = "b";
  CHECK_THROWS_AS(ground_truth_degradation(s, other), UsageError);
}

TEST_CASE("labels match a two-pass script on the default episode") {
  const auto cfg = make_default_scenario(1, Scale::Desk);
  const auto ep = run_episode(cfg, cfg.apps[0].name, cfg.workload_levels[1]);
  double sum = 0.0;
  int n = 0;
  for (const auto& s : ep) {
    if (s.soi_intensity[0] == 0 && s.soi_intensity[1] == 0 && s.soi_intensity[2] == 0 &&
        s.soi_intensity[3] == 0) {
      sum += s.qos;
      ++n;
    }
  }
  REQUIRE(n > 0);
  const double qbar = sum / n;
  const auto labels = label_degradation(ep);
  for (std::size_t i = 0; i < ep.size(); ++i) {
    CHECK(labels[i] == doctest::Approx(ep[i].qos / qbar - 1.0).epsilon(1e-12));
    CHECK(ground_truth_degradation(ep, ep[i]) == doctest::Approx(labels[i]).epsilon(1e-12));
  }
}

TEST_CASE("noise-free clean samples have zero degradation") {
  auto cfg = testsupport::tiny_scenario();
  cfg.metric_noise = false;
  const auto d = run_all(cfg);
  const auto labels = label_degradation(d.samples);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    if (d.samples[i].clean()) CHECK(labels[i] == 0.0);
  }
}

TEST_CASE("degradation is non-decreasing in a single SoI's intensity") {
  auto p = testsupport::tiny_profile("a");
  SynthOptions opts;
  opts.metric_noise = false;
  Rng rng(1);
  for (int k = 0; k < kNumSoI; ++k) {
    double prev = -1.0;
    for (int step = 0; step <= 10; ++step) {
      SoIVector s{};
      s[static_cast<std::size_t>(k)] = step / 10.0;
      const double d = synth_sample(p, 2.0, s, 1, rng, opts).qos /
                           synth_sample(p, 2.0, {}, 1, rng, opts).qos -
                       1.0;
      CHECK(d >= prev);
      prev = d;
    }
  }
}

TEST_CASE("every interfered group also has a clean sample") {
  const auto cfg = make_default_scenario(2, Scale::Desk);
  const auto d = run_all(cfg);
  std::map<std::pair<std::string, double>, bool> clean;
  for (const auto& s : d.samples) clean[{s.app, s.intensity}] |= s.clean();
  for (const auto& [k, v] : clean) CHECK(v);
}

TEST_CASE("export then import round-trips and row count is the episode total") {
  const auto cfg = testsupport::tiny_scenario();
  const auto d = run_all(cfg);
  CHECK(d.samples.size() == cfg.apps.size() * cfg.workload_levels.size() *
                                static_cast<std::size_t>(cfg.episode_len));
  testsupport::TempDir dir("sim");
  export_dataset(d, dir / "d.csv");
  const auto back = import_dataset(dir / "d.csv");
  CHECK(back.metric_names == d.metric_names);
  REQUIRE(back.samples.size() == d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(back.samples[i].t == d.samples[i].t);
    CHECK(back.samples[i].app == d.samples[i].app);
    CHECK(back.samples[i].qos == d.samples[i].qos);
    CHECK(back.samples[i].soi_intensity == d.samples[i].soi_intensity);
    CHECK(back.samples[i].metrics == d.samples[i].metrics);
  }
  const std::string text = testsupport::slurp(dir / "d.csv");
  CHECK(text.rfind("t,app,intensity,soi_llc,soi_mbw,soi_nbw,soi_dbw,qos,rv_", 0) == 0);
  CHECK(text.back() == '\n');
}

TEST_CASE("identical seeds give bit-identical datasets") {
  const auto cfg = make_default_scenario(4, Scale::Desk);
  testsupport::TempDir dir("simdet");
  export_dataset(run_all(cfg), dir / "a.csv");
  export_dataset(run_all(cfg), dir / "b.csv");
  CHECK(testsupport::slurp(dir / "a.csv") == testsupport::slurp(dir / "b.csv"));
  const auto d = run_all(cfg);
  CHECK(d.samples.size() == 20000);
}

TEST_CASE("exporting an empty dataset is refused") {
  testsupport::TempDir dir("simempty");
  CHECK_THROWS_AS(export_dataset(Dataset{}, dir / "x.csv"), UsageError);
}

TEST_CASE("samples keep metrics finite and non-negative") {
  const auto cfg = make_default_scenario(6, Scale::Desk);
  const auto ep = run_episode(cfg, cfg.apps[3].name, cfg.workload_levels.back());
  for (const auto& s : ep) {
    CHECK(s.qos > 0.0);
    for (double v : s.metrics) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("cpi sanity mode makes the CPI column proportional to qos") {
  auto cfg = make_default_scenario(1, Scale::Desk);
  cfg.cpi_tracks_qos = true;
  const auto names = cfg.metric_names();
  const auto idx = static_cast<std::size_t>(
      std::find(names.begin(), names.end(), kCpiColumn) - names.begin());
  const auto ep = run_episode(cfg, cfg.apps[0].name, 1.0);
  const double ratio = ep[0].metrics[idx] / ep[0].qos;
  for (const auto& s : ep) CHECK(s.metrics[idx] / s.qos == doctest::Approx(ratio));
}
