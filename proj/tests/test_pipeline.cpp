#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "alioth/evalkit.hpp"
#include "alioth/pipeline.hpp"
#include "support.hpp"

using namespace alioth;
using namespace alioth::pipeline;

namespace {

simcloud::ScenarioConfig small_scenario() {
  auto cfg = testsupport::tiny_scenario(160);
  cfg.interference_schedule.clear();
  for (int k = 0; k < 4; ++k) {
    SoIVector s{};
    s[static_cast<std::size_t>(k)] = 0.6;
    cfg.interference_schedule.push_back({(2 * k + 1) * 20.0, (2 * k + 2) * 20.0, s});
  }
  cfg.apps.clear();
  for (int a = 0; a < 6; ++a) {
    auto p = testsupport::tiny_profile(std::string(1, static_cast<char>('a' + a)));
    p.sensitivity = {0.2 + 0.1 * a, 0.1, 0.3, 0.4};
    p.noise_scale.assign(p.noise_scale.size(), 0.02);
    cfg.apps.push_back(p);
  }
  return cfg;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.selector = {5, 2, 1.0, 1.0, 1.0, 1.0, 0.3, 1};
  c.selector_rows = 300;
  c.shap_rows_per_app = 20;
  c.top_n = 5;
  c.quorum = 2;
  c.arch.encoder_hidden = {8, 4};
  c.dae = {1e-2, 3, 32, 1, 1.0, 10.0};
  c.gbt = {10, 3, 1.0, 1.0, 1.0, 1.0, 0.3, 1};
  c.grid_search = false;
  c.cv_folds = 2;
  c.attribution_k = 3;
  return c;
}

}  // namespace

TEST_CASE("sample_rows draws distinct sorted rows") {
  std::vector<std::size_t> rows(50);
  std::iota(rows.begin(), rows.end(), 100);
  const auto s = sample_rows(rows, 10, 3);
  CHECK(s.size() == 10);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 10);
  for (std::size_t r : s) CHECK((r >= 100 && r < 150));
  CHECK(sample_rows(rows, 80, 3) == rows);
  CHECK(sample_rows(rows, 10, 3) == s);
}

TEST_CASE("matrix helpers") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 2, 3, 4, 5, 6;
  const std::vector<std::size_t> r = {2, 0}, c = {1};
  const auto R = rows_of(X, r);
  CHECK(R(0, 0) == 5);
  CHECK(R(1, 1) == 2);
  const auto C = columns_of(X, c);
  CHECK(C.cols() == 1);
  CHECK(C(2, 0) == 6);
  const auto Z = concat(X, C);
  CHECK(Z.cols() == 3);
  CHECK(Z(1, 2) == 4);
}

TEST_CASE("eligible samples start once a full window exists") {
  const auto data = simcloud::run_all(small_scenario());
  dataprep::WindowConfig w;
  const auto e = eligible_samples(data, w);
  CHECK(e.size() == data.samples.size() - 6 * 2 * 19);
  for (std::size_t s : e) CHECK(data.samples[s].t >= 20.0);
}

TEST_CASE("trained model round-trips and scores single windows") {
  const auto data = simcloud::run_all(small_scenario());
  const auto labels = simcloud::label_degradation(data.samples);
  const std::vector<std::string> methods = {evalkit::method::kAliothDae};
  const auto report =
      evalkit::run_protocol(data, labels, evalkit::Protocol::Offline82, methods, small_config());
  REQUIRE(report.model);
  const auto& m = *report.model;

  const auto fs = dataprep::build_features(data, labels, m.prep, m.window);
  const auto X = columns_of(fs.X, m.selected);
  const auto pred = m.predict(X);

  const auto back = alioth_from_json(to_json(m));
  CHECK((back.predict(X) - pred).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.input_names() == m.input_names());
  CHECK(m.input_names().size() == 2 * m.selected.size());

  const auto len = static_cast<Eigen::Index>(m.window.max_length());
  for (std::size_t i = 0; i < fs.rows(); i += 97) {
    const std::size_t end = fs.meta[i].sample;
    Eigen::MatrixXd recent(len, static_cast<Eigen::Index>(data.metric_names.size()));
    for (Eigen::Index r = 0; r < len; ++r) {
      const auto& s = data.samples[end + 1 - static_cast<std::size_t>(len) + static_cast<std::size_t>(r)];
      for (std::size_t c = 0; c < s.metrics.size(); ++c) recent(r, static_cast<Eigen::Index>(c)) = s.metrics[c];
    }
    CHECK(m.predict_window(recent, data.metric_names) ==
          doctest::Approx(pred(static_cast<Eigen::Index>(i))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(m.predict_window(Eigen::MatrixXd::Zero(3, 8), data.metric_names), UsageError);
}

TEST_CASE("config validation") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  c.cv_folds = 1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = small_config();
  c.holdout_ratio = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = small_config();
  c.threshold = 0.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("soi weight models cover every source") {
  Rng rng(5);
  const int n = 200;
  Eigen::MatrixXd Z = testsupport::random_matrix(rng, n, 6);
  std::vector<dataprep::RowMeta> meta(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 4; ++k) meta[static_cast<std::size_t>(i)].soi[k] = Z(i, static_cast<Eigen::Index>(k)) * (i % 2);
  }
  const auto w = fit_soi_weights(Z, meta, 2);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(w[k].soi == kAllSoI[k]);
    CHECK(w[k].selected.size() == 2);
    CHECK(w[k].selected[0] == k);
    CHECK(w[k].expanded.size() == 6);
  }
}
