#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "alioth/baselines.hpp"
#include "alioth/evalkit.hpp"
#include "support.hpp"

using namespace alioth;
using namespace alioth::baselines;

namespace {

std::vector<double> normal_draws(Rng& rng, std::size_t n, double mean, double sd) {
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(mean + sd * standard_normal(rng));
  return v;
}

double normal_loglik(std::span<const double> v, double mean, double var) {
  double ll = 0;
  for (double x : v) ll += -0.5 * std::log(2 * std::numbers::pi * var) - (x - mean) * (x - mean) / (2 * var);
  return ll;
}

std::vector<std::size_t> all_rows(const simcloud::Dataset& d) {
  std::vector<std::size_t> r(d.samples.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

}  // namespace

TEST_CASE("single component EM is the closed-form MLE") {
  Rng rng(1);
  const auto v = normal_draws(rng, 500, 3.0, 2.0);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 500.0;
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= 500.0;
  const auto r = fit_gmm_em(v, 1, 7);
  CHECK(r.model.weights[0] == doctest::Approx(1.0));
  CHECK(r.model.means[0] == doctest::Approx(mean).epsilon(1e-10));
  CHECK(r.model.variances[0] == doctest::Approx(var).epsilon(1e-10));
  CHECK(r.model.log_likelihood(v) == doctest::Approx(normal_loglik(v, mean, var)).epsilon(1e-10));
}

TEST_CASE("two separated clusters are recovered") {
  Rng rng(2);
  auto v = normal_draws(rng, 300, 0.0, 1.0);
  const auto b = normal_draws(rng, 300, 10.0, 1.0);
  v.insert(v.end(), b.begin(), b.end());
  const auto r = fit_gmm_em(v, 2, 3);
  auto means = r.model.means;
  std::sort(means.begin(), means.end());
  CHECK(std::abs(means[0] - 0.0) < 0.15);
  CHECK(std::abs(means[1] - 10.0) < 0.15);
  for (double w : r.model.weights) CHECK(std::abs(w - 0.5) < 0.05);
  CHECK(r.model.assign(0.0) != r.model.assign(10.0));
  CHECK(r.model.means[r.model.lowest_mean()] == means[0]);
}

TEST_CASE("property: EM log-likelihood never decreases") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v;
    const std::size_t comps = 1 + uniform_index(rng, 4);
    for (std::size_t c = 0; c < comps; ++c) {
      const auto d = normal_draws(rng, 50 + uniform_index(rng, 100), testsupport::uniform(rng, -5, 5),
                                  testsupport::uniform(rng, 0.2, 2));
      v.insert(v.end(), d.begin(), d.end());
    }
    const auto r = fit_gmm_em(v, 1 + uniform_index(rng, 4), rng());
    for (std::size_t i = 1; i < r.loglik.size(); ++i) CHECK(r.loglik[i] >= r.loglik[i - 1] - 1e-9);
    for (double var : r.model.variances) CHECK(var >= kVarianceFloor);
  }
}

TEST_CASE("property: responsibilities sum to one") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Gmm1D g;
    const std::size_t k = 1 + uniform_index(rng, 5);
    for (std::size_t c = 0; c < k; ++c) {
      g.weights.push_back(testsupport::uniform(rng, 0.1, 1));
      g.means.push_back(testsupport::uniform(rng, -10, 10));
      g.variances.push_back(testsupport::uniform(rng, 0.01, 4));
    }
    const double ws = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
    for (double& w : g.weights) w /= ws;
    for (int i = 0; i < 10; ++i) {
      const auto r = g.responsibilities(testsupport::uniform(rng, -50, 50));
      CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("equidistant value goes to the lower index") {
  Gmm1D g;
  g.weights = {0.5, 0.5};
  g.means = {4.0, 0.0};
  g.variances = {1.0, 1.0};
  CHECK(g.assign(2.0) == 0);
  g.means = {0.0, 4.0};
  CHECK(g.assign(2.0) == 0);
}

TEST_CASE("BIC matches its formula and picks the right K") {
  Rng rng(5);
  const auto tight = normal_draws(rng, 400, 5.0, 0.1);
  const auto one = fit_gmm_em(tight, 1, 1);
  const double n = 400;
  CHECK(bic(one.model, tight) == doctest::Approx(-2 * one.model.log_likelihood(tight) + 2 * std::log(n)));
  const auto two = fit_gmm_em(tight, 2, 1);
  CHECK(bic(two.model, tight) == doctest::Approx(-2 * two.model.log_likelihood(tight) + 5 * std::log(n)));
  CHECK(select_k_bic(tight, 6, 1).k == 1);

  auto bimodal = normal_draws(rng, 300, 0.0, 0.5);
  const auto hi = normal_draws(rng, 300, 6.0, 0.5);
  bimodal.insert(bimodal.end(), hi.begin(), hi.end());
  const auto choice = select_k_bic(bimodal, 6, 1);
  CHECK(choice.k == 2);
  CHECK(choice.bic.size() == 6);
}

TEST_CASE("EM rejects more components than distinct values") {
  const std::vector<double> v = {1, 1, 2, 2};
  CHECK_THROWS_AS(fit_gmm_em(v, 3, 1), UsageError);
  CHECK_NOTHROW(fit_gmm_em(v, 2, 1));
  CHECK(select_k_bic(v, 6, 1).k <= 2);
}

TEST_CASE("best-possible estimate is a ratio to the baseline") {
  CHECK(best_possible_cpi(1.5, 1.0) == doctest::Approx(0.5));
  CHECK(best_possible_cpi(2.0, 2.0) == 0.0);
  CHECK(best_possible_cpi(0.9, 1.2) == doctest::Approx(-0.25));
}

TEST_CASE("best-possible is exact when CPI tracks QoS") {
  auto cfg = testsupport::tiny_scenario(80);
  cfg.cpi_tracks_qos = true;
  const auto data = simcloud::run_all(cfg);
  const auto labels = simcloud::label_degradation(data.samples);
  const auto rows = all_rows(data);
  const auto m = fit_best_possible(data, rows);
  for (std::size_t r : rows) CHECK(m.predict(data.samples[r]) == doctest::Approx(labels[r]).epsilon(1e-12));
}

TEST_CASE("best-effort on clean history at one level is near zero") {
  auto cfg = testsupport::tiny_scenario(200);
  cfg.workload_levels = {1.0};
  cfg.interference_schedule = {};
  cfg.apps[0].noise_scale.assign(cfg.apps[0].noise_scale.size(), 0.02);
  cfg.apps[1].noise_scale.assign(cfg.apps[1].noise_scale.size(), 0.02);
  const auto data = simcloud::run_all(cfg);
  const auto m = fit_best_effort(data, all_rows(data));
  double err = 0;
  for (const auto& s : data.samples) err += std::abs(m.predict(s));
  CHECK(err / static_cast<double>(data.samples.size()) < 0.05);
}

TEST_CASE("best-effort error is at least the best-possible error") {
  auto cfg = testsupport::tiny_scenario(120);
  for (auto& a : cfg.apps) a.noise_scale.assign(a.noise_scale.size(), 0.05);
  const auto data = simcloud::run_all(cfg);
  const auto labels = simcloud::label_degradation(data.samples);
  const auto rows = all_rows(data);
  const auto bp = fit_best_possible(data, rows);
  const auto be = fit_best_effort(data, rows);
  std::vector<double> p, e;
  for (const auto& s : data.samples) {
    p.push_back(bp.predict(s));
    e.push_back(be.predict(s));
  }
  CHECK(evalkit::mae(labels, e) >= evalkit::mae(labels, p));
}

TEST_CASE("unknown apps are rejected") {
  const auto data = simcloud::run_all(testsupport::tiny_scenario());
  const auto rows = all_rows(data);
  const auto bp = fit_best_possible(data, rows);
  auto s = data.samples.front();
  s.app = "nope";
  CHECK_THROWS_AS(bp.predict(s), UsageError);
  CHECK_THROWS_AS(fit_best_effort(data, std::vector<std::size_t>{}), UsageError);
}
