#include "alioth/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "alioth/csv.hpp"

namespace alioth::baselines {
namespace {

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

std::size_t count_distinct(std::span<const double> values) {
  return std::set<double>(values.begin(), values.end()).size();
}

// Log-likelihood and responsibilities (row-major n x k).
double e_step(const Gmm1D& m, std::span<const double> values, std::vector<double>& resp) {
  const std::size_t k = m.k();
  resp.resize(values.size() * k);
  std::vector<double> lp(k);
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      lp[j] = m.weights[j] > 0.0
                  ? std::log(m.weights[j]) + log_normal_pdf(values[i], m.means[j], m.variances[j])
                  : -std::numeric_limits<double>::infinity();
      hi = std::max(hi, lp[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(lp[j] - hi);
    const double lse = hi + std::log(s);
    total += lse;
    for (std::size_t j = 0; j < k; ++j) resp[i * k + j] = std::exp(lp[j] - lse);
  }
  return total;
}

void m_step(Gmm1D& m, std::span<const double> values, const std::vector<double>& resp) {
  const std::size_t k = m.k();
  const double n = static_cast<double>(values.size());
  for (std::size_t j = 0; j < k; ++j) {
    double nk = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      nk += resp[i * k + j];
      sx += resp[i * k + j] * values[i];
    }
    if (nk <= 1e-300) {
      m.weights[j] = 0.0;
      continue;
    }
    const double mean = sx / nk;
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - mean;
      ss += resp[i * k + j] * d * d;
    }
    m.weights[j] = nk / n;
    m.means[j] = mean;
    m.variances[j] = std::max(ss / nk, kVarianceFloor);
  }
}

Gmm1D kmeanspp_init(std::span<const double> values, std::size_t k, Rng& rng) {
  std::vector<double> centers{values[uniform_index(rng, values.size())]};
  std::vector<double> d2(values.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (values[i] - c) * (values[i] - c));
      d2[i] = best;
      total += best;
    }
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
      acc += d2[i];
      if (d2[i] > 0.0 && acc > u) {
        pick = i;
        break;
      }
    }
    if (pick == values.size()) {
      for (std::size_t i = values.size(); i-- > 0;) {
        if (d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(values[pick]);
  }

  const double n = static_cast<double>(values.size());
  const double mean_all = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var_all = 0.0;
  for (double v : values) var_all += (v - mean_all) * (v - mean_all);
  var_all = std::max(var_all / n, kVarianceFloor);

  std::vector<double> cnt(k, 0.0), sum(k, 0.0), sq(k, 0.0);
  for (double v : values) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (std::abs(v - centers[j]) < std::abs(v - centers[best])) best = j;
    }
    cnt[best] += 1.0;
    sum[best] += v;
    sq[best] += v * v;
  }
  Gmm1D m;
  for (std::size_t j = 0; j < k; ++j) {
    const double mean = sum[j] / cnt[j];
    const double var = cnt[j] > 1.0 ? sq[j] / cnt[j] - mean * mean : var_all;
    m.weights.push_back(cnt[j] / n);
    m.means.push_back(mean);
    m.variances.push_back(std::max(var, kVarianceFloor));
  }
  return m;
}

std::size_t column_index(const simcloud::Dataset& data, const char* name) {
  const auto it = std::find(data.metric_names.begin(), data.metric_names.end(), name);
  if (it == data.metric_names.end()) throw UsageError(std::string("dataset has no column ") + name);
  return static_cast<std::size_t>(it - data.metric_names.begin());
}

}  // namespace

double Gmm1D::log_likelihood(std::span<const double> values) const {
  std::vector<double> resp;
  return e_step(*this, values, resp);
}

std::vector<double> Gmm1D::responsibilities(double v) const {
  std::vector<double> resp;
  const double x[1] = {v};
  e_step(*this, x, resp);
  return resp;
}

std::size_t Gmm1D::assign(double v) const {
  const auto r = responsibilities(v);
  std::size_t best = 0;
  for (std::size_t j = 1; j < r.size(); ++j) {
    if (r[j] > r[best]) best = j;
  }
  return best;
}

std::size_t Gmm1D::lowest_mean() const {
  std::size_t best = k();
  for (std::size_t j = 0; j < k(); ++j) {
    if (weights[j] > 0.0 && (best == k() || means[j] < means[best])) best = j;
  }
  if (best == k()) throw UsageError("mixture has no populated component");
  return best;
}

EmResult fit_gmm_em(std::span<const double> values, std::size_t k, std::uint64_t seed,
                    const EmConfig& cfg) {
  if (k == 0) throw UsageError("mixture needs at least one component");
  for (double v : values) {
    if (!std::isfinite(v)) throw UsageError("non-finite value in mixture input");
  }
  if (count_distinct(values) < k) {
    throw UsageError("fewer distinct values than mixture components");
  }
  Rng rng(derive_seed(seed, hash_tag("gmm")));
  EmResult out;
  out.model = kmeanspp_init(values, k, rng);
  std::vector<double> resp;
  for (int it = 0;; ++it) {
    const double ll = e_step(out.model, values, resp);
    const bool converged = !out.loglik.empty() && std::abs(ll - out.loglik.back()) < cfg.tol;
    out.loglik.push_back(ll);
    if (converged || it >= cfg.max_iter) break;
    m_step(out.model, values, resp);
    out.iterations = it + 1;
  }
  return out;
}

double bic(const Gmm1D& model, std::span<const double> values) {
  const double params = 3.0 * static_cast<double>(model.k()) - 1.0;
  return -2.0 * model.log_likelihood(values) +
         params * std::log(static_cast<double>(values.size()));
}

BicChoice select_k_bic(std::span<const double> values, std::size_t k_max, std::uint64_t seed) {
  if (k_max == 0) throw UsageError("k_max must be at least 1");
  if (values.empty()) throw UsageError("mixture input is empty");
  const std::size_t distinct = count_distinct(values);
  BicChoice best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (k > distinct) {
      best.bic.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const auto fit = fit_gmm_em(values, k, derive_seed(seed, k));
    const double b = bic(fit.model, values);
    best.bic.push_back(b);
    if (b < best_bic) {
      best_bic = b;
      best.k = k;
      best.model = fit.model;
    }
  }
  return best;
}

double best_possible_cpi(double cpi, double baseline) {
  if (baseline == 0.0 || !std::isfinite(baseline)) throw UsageError("CPI baseline must be non-zero");
  return cpi / baseline - 1.0;
}

double CpiBaselineModel::predict(const simcloud::Sample& s) const {
  if (s.metrics.size() <= std::max(cpi_index, usage_index)) throw UsageError("sample lacks metrics");
  const double cpi = s.metrics[cpi_index];
  if (mode == CpiMode::BestPossible) {
    const auto it = known.find({s.app, s.intensity});
    if (it == known.end()) throw UsageError("no known CPI baseline for app " + s.app);
    return best_possible_cpi(cpi, it->second);
  }
  const auto it = effort.find(s.app);
  if (it == effort.end()) throw UsageError("no CPI history for app " + s.app);
  const auto& e = it->second;
  const std::size_t c = e.usage.assign(s.metrics[usage_index]);
  if (!std::isfinite(e.cluster_baseline[c])) throw UsageError("matching usage cluster is empty");
  return best_possible_cpi(cpi, e.cluster_baseline[c]);
}

CpiBaselineModel fit_best_possible(const simcloud::Dataset& data,
                                   std::span<const std::size_t> rows) {
  CpiBaselineModel m;
  m.mode = CpiMode::BestPossible;
  m.cpi_index = column_index(data, simcloud::kCpiColumn);
  m.usage_index = column_index(data, simcloud::kMemUsageColumn);
  std::map<std::pair<std::string, double>, std::pair<double, std::size_t>> acc;
  for (std::size_t r : rows) {
    const auto& s = data.samples[r];
    if (!s.clean()) continue;
    auto& a = acc[{s.app, s.intensity}];
    a.first += s.metrics[m.cpi_index];
    a.second += 1;
  }
  for (const auto& [key, a] : acc) {
    const double mean = a.first / static_cast<double>(a.second);
    if (!(mean > 0.0) || !std::isfinite(mean)) throw UsageError("CPI baseline is not positive");
    m.known[key] = mean;
  }
  return m;
}

CpiBaselineModel fit_best_effort(const simcloud::Dataset& data, std::span<const std::size_t> rows,
                                 const CpiConfig& cfg) {
  if (rows.empty()) throw UsageError("best-effort baseline needs history");
  CpiBaselineModel m;
  m.mode = CpiMode::BestEffort;
  m.cpi_index = column_index(data, simcloud::kCpiColumn);
  m.usage_index = column_index(data, simcloud::kMemUsageColumn);
  std::map<std::string, std::vector<std::size_t>> by_app;
  for (std::size_t r : rows) by_app[data.samples[r].app].push_back(r);

  for (const auto& [app, idx] : by_app) {
    std::vector<double> usage;
    for (std::size_t r : idx) usage.push_back(data.samples[r].metrics[m.usage_index]);
    const std::uint64_t app_seed = derive_seed(cfg.seed, hash_tag(app));
    BestEffortApp e;
    e.usage = select_k_bic(usage, cfg.k_max, app_seed).model;

    std::vector<std::vector<double>> cpi_by_cluster(e.usage.k());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      cpi_by_cluster[e.usage.assign(usage[i])].push_back(data.samples[idx[i]].metrics[m.cpi_index]);
    }
    // Drop components that no history sample falls into; the argmax of
    // every history sample is unchanged by this.
    Gmm1D kept;
    std::vector<std::vector<double>> kept_cpi;
    for (std::size_t c = 0; c < e.usage.k(); ++c) {
      if (cpi_by_cluster[c].empty()) continue;
      kept.weights.push_back(e.usage.weights[c]);
      kept.means.push_back(e.usage.means[c]);
      kept.variances.push_back(e.usage.variances[c]);
      kept_cpi.push_back(std::move(cpi_by_cluster[c]));
    }
    const double wsum = std::accumulate(kept.weights.begin(), kept.weights.end(), 0.0);
    for (double& w : kept.weights) w /= wsum;
    e.usage = std::move(kept);

    for (std::size_t c = 0; c < kept_cpi.size(); ++c) {
      const auto choice = select_k_bic(kept_cpi[c], cfg.k_max, derive_seed(app_seed, c + 101));
      const double baseline = choice.model.means[choice.model.lowest_mean()];
      if (!(baseline > 0.0)) throw UsageError("best-effort CPI baseline is not positive for " + app);
      e.cluster_baseline.push_back(baseline);
    }
    m.effort[app] = std::move(e);
  }
  return m;
}

void write_predictions(const std::filesystem::path& path,
                       std::span<const BaselinePrediction> rows) {
  csv::Table t;
  t.header = {"sample", "D_hat", "mode"};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.sample), format_double(r.estimate),
                      r.mode == CpiMode::BestPossible ? "best_possible" : "best_effort"});
  }
  csv::write(path, t);
}

}  // namespace alioth::baselines
