#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alioth/evalkit.hpp"
#include "support.hpp"

using namespace alioth;
using namespace alioth::evalkit;

namespace {

simcloud::ScenarioConfig eight_apps(int episode_len = 160) {
  auto cfg = testsupport::tiny_scenario(episode_len);
  const double q = episode_len / 8.0;
  cfg.interference_schedule.clear();
  for (int k = 0; k < 4; ++k) {
    SoIVector s{};
    s[static_cast<std::size_t>(k)] = 0.5 + 0.1 * k;
    cfg.interference_schedule.push_back({(2 * k + 1) * q, (2 * k + 2) * q, s});
  }
  cfg.apps.clear();
  for (int a = 0; a < 8; ++a) {
    auto p = testsupport::tiny_profile(std::string(1, static_cast<char>('a' + a)));
    p.sensitivity = {0.1 * (a % 4 + 1), 0.05 * a, 0.3, 0.2 * (a % 3)};
    p.noise_scale.assign(p.noise_scale.size(), 0.02);
    cfg.apps.push_back(p);
  }
  return cfg;
}

pipeline::PipelineConfig fast_config() {
  pipeline::PipelineConfig c;
  c.selector = {5, 2, 1.0, 1.0, 1.0, 1.0, 0.3, 1};
  c.selector_rows = 300;
  c.shap_rows_per_app = 20;
  c.top_n = 5;
  c.quorum = 2;
  c.arch.encoder_hidden = {8, 4};
  c.arch.domain_hidden = {4};
  c.dae = {1e-2, 2, 32, 1, 1.0, 10.0};
  c.dadae = c.dae;
  c.gbt = {10, 3, 1.0, 1.0, 1.0, 1.0, 0.3, 1};
  c.grid_search = false;
  c.cv_folds = 2;
  c.grid_rows = 200;
  c.bagging = {3, 4, 1.0, true, 1};
  c.practical_k = 5;
  c.attribution_k = 3;
  return c;
}

std::vector<std::size_t> ordered(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("mae examples") {
  const std::vector<double> y = {0.5, -1, 2};
  CHECK(mae(y, y) == 0.0);
  CHECK(mae(std::vector<double>{0, 1}, std::vector<double>{1, 0}) == 1.0);
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), UsageError);
  CHECK_THROWS_AS(mae(y, std::vector<double>{1}), UsageError);
}

TEST_CASE("property: mae matches a streaming running mean") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 300);
    std::vector<double> y, yh;
    double running = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y.push_back(testsupport::uniform(rng, -3, 3));
      yh.push_back(testsupport::uniform(rng, -3, 3));
      running += (std::abs(y[i] - yh[i]) - running) / static_cast<double>(i + 1);
    }
    CHECK(mae(y, yh) == doctest::Approx(running).epsilon(1e-12));
    CHECK(mae(y, yh) >= 0.0);
  }
}

TEST_CASE("confusion examples") {
  const std::vector<double> d = {0.0, 0.2, 0.01, 0.5};
  const auto same = qos_confusion(d, d, 0.05);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);
  CHECK(same.accuracy == 1.0);

  const std::vector<double> low = {0.0, 0.01, 0.02};
  const auto neg = qos_confusion(low, low, 0.05);
  CHECK(neg.accuracy == 1.0);
  CHECK(neg.precision == 1.0);
  CHECK(neg.recall == 1.0);

  // Threshold 0.1: truth positives at 1, 2, 4; predicted positives at 1, 3, 4.
  const std::vector<double> t = {0.00, 0.30, 0.12, 0.05, 0.40, 0.10};
  const std::vector<double> p = {0.02, 0.25, 0.08, 0.20, 0.15, 0.10};
  const auto c = qos_confusion(t, p, 0.1);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 2);
  CHECK(c.precision == doctest::Approx(2.0 / 3.0));
  CHECK(c.recall == doctest::Approx(2.0 / 3.0));
  CHECK(c.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(c.accuracy == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("property: confusion is invariant under a strictly monotone transform") {
  Rng rng(2);
  auto f = [](double v) { return std::exp(3 * v) + v * v * v; };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 40);
    std::vector<double> d, dh, fd, fdh;
    for (std::size_t i = 0; i < n; ++i) {
      d.push_back(testsupport::uniform(rng, -0.5, 1));
      dh.push_back(testsupport::uniform(rng, -0.5, 1));
      fd.push_back(f(d.back()));
      fdh.push_back(f(dh.back()));
    }
    const double th = testsupport::uniform(rng, 0.01, 0.5);
    const auto a = qos_confusion(d, dh, th), b = qos_confusion(fd, fdh, f(th));
    CHECK(a.tp == b.tp);
    CHECK(a.fp == b.fp);
    CHECK(a.tn == b.tn);
    CHECK(a.fn == b.fn);
    CHECK(a.f1 == b.f1);
    for (double m : {a.precision, a.recall, a.f1, a.accuracy}) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("threshold sweep") {
  Rng rng(3);
  std::vector<double> d, dh;
  for (int i = 0; i < 200; ++i) {
    d.push_back(testsupport::uniform(rng, 0, 0.3));
    dh.push_back(d.back() + testsupport::uniform(rng, -0.05, 0.05));
  }
  const auto s = threshold_sweep(d, dh);
  REQUIRE(s.rows.size() == 4);
  CHECK(s.thresholds == std::vector<double>(kSweepThresholds.begin(), kSweepThresholds.end()));
  auto spread = [&](double Confusion::*m) {
    std::vector<double> v;
    for (const auto& r : s.rows) v.push_back(r.*m);
    return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
  };
  CHECK(s.precision_volatility == spread(&Confusion::precision));
  CHECK(s.recall_volatility == spread(&Confusion::recall));
  CHECK(s.f1_volatility == spread(&Confusion::f1));
  CHECK(s.accuracy_volatility == spread(&Confusion::accuracy));
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.rows[i].tp == qos_confusion(d, dh, s.thresholds[i]).tp);

  const auto perfect = threshold_sweep(d, d);
  CHECK(perfect.precision_volatility == 0.0);
  CHECK(perfect.recall_volatility == 0.0);
  CHECK(perfect.f1_volatility == 0.0);
  CHECK(perfect.accuracy_volatility == 0.0);
}

TEST_CASE("single active source") {
  CHECK(!single_soi({0, 0, 0, 0}));
  CHECK(single_soi({0, 0.3, 0, 0}) == SoIKind::MBW);
  CHECK(!single_soi({0.1, 0.3, 0, 0}));
}

TEST_CASE("protocol names round-trip") {
  for (auto p : {Protocol::Offline82, Protocol::LeaveOneAppOut, Protocol::OracleDae}) {
    CHECK(protocol_from_name(protocol_name(p)) == p);
  }
  CHECK_THROWS_AS(protocol_from_name("kfold"), UsageError);
}

TEST_CASE("a perfect oracle scores zero under every protocol") {
  auto scenario = eight_apps();
  scenario.cpi_tracks_qos = true;
  const auto data = simcloud::run_all(scenario);
  const auto labels = simcloud::label_degradation(data.samples);
  const std::vector<std::string> methods = {method::kBestPossibleCpi};
  for (auto p : {Protocol::Offline82, Protocol::LeaveOneAppOut, Protocol::OracleDae}) {
    const auto r = run_protocol(data, labels, p, methods, fast_config());
    CHECK(r.mean_mae.at(method::kBestPossibleCpi) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("leave-one-app-out report shape and determinism") {
  const auto data = simcloud::run_all(eight_apps());
  const auto labels = simcloud::label_degradation(data.samples);
  const auto methods = default_methods(Protocol::LeaveOneAppOut);
  const auto cfg = fast_config();
  const auto r = run_protocol(data, labels, Protocol::LeaveOneAppOut, methods, cfg);
  CHECK(r.apps.size() == 8);
  for (const auto& m : methods) {
    CHECK(r.mae.at(m).size() == 8);
    double sum = 0;
    for (const auto& [app, v] : r.mae.at(m)) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(r.mean_mae.at(m) == doctest::Approx(sum / 8));
  }
  CHECK(!r.sweep);
  CHECK(!r.model);
  for (const auto& p : r.predictions) {
    CHECK(std::find(r.apps.begin(), r.apps.end(), p.app) != r.apps.end());
  }

  testsupport::TempDir dir("loao");
  write_mae_table(r, dir / "mae.csv");
  const auto text = testsupport::slurp(dir / "mae.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  CHECK(text.rfind("held_out_app", 0) == 0);

  const auto again = run_protocol(data, labels, Protocol::LeaveOneAppOut, methods, cfg);
  CHECK(again.mean_mae == r.mean_mae);
}

TEST_CASE("offline report carries the extras") {
  const auto data = simcloud::run_all(eight_apps());
  const auto labels = simcloud::label_degradation(data.samples);
  const auto methods = default_methods(Protocol::Offline82);
  const auto r = run_protocol(data, labels, Protocol::Offline82, methods, fast_config());
  REQUIRE(r.sweep);
  CHECK(r.sweep->rows.size() == 4);
  REQUIRE(r.attribution);
  CHECK(r.attribution->sums_to_one);
  REQUIRE(r.model);
  CHECK(std::isfinite(r.noisy_mae));
  CHECK(std::isfinite(r.denoised_mae));
  for (const auto& m : methods) CHECK(std::isfinite(r.mean_mae.at(m)));
  std::map<std::string, std::vector<double>> y, yh;
  for (const auto& p : r.predictions) {
    if (p.method != method::kGbt) continue;
    y[p.app].push_back(p.truth);
    yh[p.app].push_back(p.estimate);
  }
  for (const auto& [app, v] : y) CHECK(r.mae.at(method::kGbt).at(app) == doctest::Approx(mae(v, yh[app])));
  CHECK(!summary_text(r).empty());
}

TEST_CASE("protocol argument errors") {
  const auto data = simcloud::run_all(eight_apps());
  const auto labels = simcloud::label_degradation(data.samples);
  const auto cfg = fast_config();
  const std::vector<std::string> dadae = {method::kAliothDadae};
  CHECK_THROWS_AS(run_protocol(data, labels, Protocol::Offline82, dadae, cfg), UsageError);
  const std::vector<std::string> bogus = {"magic"};
  CHECK_THROWS_AS(run_protocol(data, labels, Protocol::Offline82, bogus, cfg), UsageError);
  const std::vector<double> short_labels(3, 0.0);
  const std::vector<std::string> gbt = {method::kGbt};
  CHECK_THROWS_AS(run_protocol(data, short_labels, Protocol::Offline82, gbt, cfg), UsageError);
}

TEST_CASE("held-out app rows never touch preprocessing") {
  const auto data = simcloud::run_all(eight_apps());
  const auto labels = simcloud::label_degradation(data.samples);
  const auto cfg = fast_config();
  const auto eligible = pipeline::eligible_samples(data, cfg.window);
  std::vector<std::string> row_apps;
  for (std::size_t s : eligible) row_apps.push_back(data.samples[s].app);
  for (const std::string held : {"a", "e"}) {
    const auto split = dataprep::split_leave_one_app_out(row_apps, held);
    const auto with = pipeline::prepare(data, labels, eligible, split.train, cfg.window);

    simcloud::Dataset rest;
    rest.metric_names = data.metric_names;
    std::vector<double> rest_labels;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      if (data.samples[i].app == held) continue;
      rest.samples.push_back(data.samples[i]);
      rest_labels.push_back(labels[i]);
    }
    const auto rest_eligible = pipeline::eligible_samples(rest, cfg.window);
    const auto alone =
        pipeline::prepare(rest, rest_labels, rest_eligible, ordered(rest_eligible.size()), cfg.window);
    CHECK(pipeline::to_json(with.prep) == pipeline::to_json(alone.prep));
  }
}
