#include "alioth/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "alioth/parallel.hpp"

namespace alioth::pipeline {

void PipelineConfig::validate() const {
  window.validate();
  selector.validate();
  gbt.validate();
  dae.validate();
  dadae.validate();
  if (top_n == 0) throw UsageError("top_n must be positive");
  if (cv_folds < 2) throw UsageError("cv_folds must be at least 2");
  if (practical_k <= 0) throw UsageError("practical_k must be positive");
  if (cart_depth < 0) throw UsageError("cart_depth must be >= 0");
  if (attribution_k == 0) throw UsageError("attribution_k must be positive");
  if (!(threshold > 0.0)) throw UsageError("threshold must be positive");
  if (!(holdout_ratio > 0.0 && holdout_ratio < 1.0)) throw UsageError("holdout ratio must be in (0, 1)");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
}

std::vector<std::size_t> eligible_samples(const simcloud::Dataset& data,
                                          const dataprep::WindowConfig& cfg) {
  const auto need = static_cast<std::size_t>(cfg.max_length());
  std::vector<std::size_t> out;
  for (const auto& [b, e] : dataprep::episodes(data)) {
    if (e - b < need) continue;
    for (std::size_t s = b + need - 1; s < e; ++s) out.push_back(s);
  }
  return out;
}

Prepared prepare(const simcloud::Dataset& data, std::span<const double> labels,
                 std::span<const std::size_t> eligible, std::span<const std::size_t> fit_rows,
                 const dataprep::WindowConfig& window) {
  std::vector<std::size_t> fit_samples;
  fit_samples.reserve(fit_rows.size());
  for (std::size_t r : fit_rows) fit_samples.push_back(eligible[r]);
  Prepared p;
  p.prep = dataprep::fit_preprocess(dataprep::to_table(data, fit_samples));
  p.fs = dataprep::build_features(data, labels, p.prep, window);
  if (p.fs.rows() != eligible.size()) throw UsageError("feature rows do not match eligible samples");
  return p;
}

std::vector<std::size_t> sample_rows(std::span<const std::size_t> rows, std::size_t count,
                                     std::uint64_t seed) {
  std::vector<std::size_t> out(rows.begin(), rows.end());
  if (out.size() > count) {
    Rng rng(derive_seed(seed, hash_tag("sample-rows")));
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(out[i], out[i + uniform_index(rng, out.size() - i)]);
    }
    out.resize(count);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::MatrixXd columns_of(const Eigen::MatrixXd& X, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = X.col(static_cast<Eigen::Index>(cols[i]));
  }
  return out;
}

std::vector<double> labels_of(const dataprep::FeatureSet& fs, std::span<const std::size_t> rows) {
  std::vector<double> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(fs.meta[r].label);
  return y;
}

Eigen::MatrixXd concat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) throw UsageError("concat: row count mismatch");
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

FeatureSelection select_features(const dataprep::FeatureSet& fs,
                                 std::span<const std::size_t> train_rows,
                                 const PipelineConfig& cfg) {
  const auto fit_rows = sample_rows(train_rows, cfg.selector_rows, derive_seed(cfg.seed, 11));
  const Eigen::MatrixXd X = rows_of(fs.X, fit_rows);
  gbt::GbtConfig sel = cfg.selector;
  sel.seed = derive_seed(cfg.seed, 12);
  const auto selector = gbt::fit_gbt(X, labels_of(fs, fit_rows), sel);

  std::map<std::string, std::vector<std::size_t>> by_app;
  for (std::size_t r : train_rows) by_app[fs.meta[r].app].push_back(r);
  FeatureSelection out;
  for (const auto& [app, rows] : by_app) {
    const auto pick = sample_rows(rows, cfg.shap_rows_per_app, derive_seed(cfg.seed, hash_tag(app)));
    const Eigen::MatrixXd phi = explain::shap_matrix(selector, rows_of(fs.X, pick), nullptr, cfg.jobs);
    out.apps.push_back(app);
    out.importance.push_back(explain::global_importance(phi));
  }
  const std::size_t quorum = std::min(cfg.quorum, out.apps.size());
  out.selected = explain::select_features_cross_app(out.importance, cfg.top_n, quorum);
  if (out.selected.empty()) {
    // Pooled ranking over all apps.
    out.fallback = true;
    std::vector<double> pooled(static_cast<std::size_t>(fs.X.cols()), 0.0);
    for (const auto& g : out.importance) {
      for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += g.mean_abs[j];
    }
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      if (pooled[j] > 0.0) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return pooled[a] > pooled[b]; });
    if (idx.size() > cfg.top_n) idx.resize(cfg.top_n);
    if (idx.empty()) idx.push_back(0);
    std::sort(idx.begin(), idx.end());
    out.selected = idx;
  }
  return out;
}

Eigen::MatrixXd AliothModel::inputs(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != selected.size()) {
    throw UsageError("expected " + std::to_string(selected.size()) + " selected features, got " +
                     std::to_string(X.cols()));
  }
  return concat(X, neural::denoise(dae, X));
}

Eigen::VectorXd AliothModel::predict(const Eigen::MatrixXd& X) const { return gbt.predict(inputs(X)); }

std::array<explain::SoiWeightModel, kNumSoI> fit_soi_weights(const Eigen::MatrixXd& Z,
                                                             std::span<const dataprep::RowMeta> meta,
                                                             std::size_t k) {
  if (static_cast<std::size_t>(Z.rows()) != meta.size()) throw UsageError("fit_soi_weights: row mismatch");
  std::array<explain::SoiWeightModel, kNumSoI> out;
  for (std::size_t i = 0; i < kNumSoI; ++i) {
    std::vector<double> intensity;
    for (const auto& m : meta) intensity.push_back(m.soi[i]);
    const auto top = explain::top_correlated_metrics(
        Z, intensity, std::min<std::size_t>(k, static_cast<std::size_t>(Z.cols())));
    out[i] = explain::fit_iil(Z, intensity, kAllSoI[i], top);
  }
  return out;
}

double AliothModel::predict_window(const Eigen::MatrixXd& recent,
                                   std::span<const std::string> metric_names) const {
  if (recent.rows() < window.max_length()) throw UsageError("not enough history for one window");
  dataprep::MetricTable t;
  t.columns.assign(metric_names.begin(), metric_names.end());
  t.values = recent;
  const auto scaled = dataprep::apply_preprocess(prep, t);
  const auto fv = dataprep::window_features(scaled.values, window,
                                            static_cast<std::size_t>(recent.rows() - 1));
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(selected.size()));
  for (std::size_t j = 0; j < selected.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = fv.values[selected[j]];
  return predict(x)(0);
}

std::vector<std::string> AliothModel::input_names() const {
  std::vector<std::string> out = selected_names;
  for (const auto& n : selected_names) out.push_back("dae:" + n);
  return out;
}

nlohmann::json to_json(const dataprep::PreprocessModel& m) {
  return {{"kept_columns", m.kept_columns}, {"dropped_columns", m.dropped_columns},
          {"clip_lo", m.clip_lo},           {"clip_hi", m.clip_hi},
          {"min", m.min},                   {"max", m.max}};
}

dataprep::PreprocessModel preprocess_from_json(const nlohmann::json& j) {
  dataprep::PreprocessModel m;
  m.kept_columns = j.at("kept_columns").get<std::vector<std::string>>();
  m.dropped_columns = j.at("dropped_columns").get<std::vector<std::string>>();
  m.clip_lo = j.at("clip_lo").get<std::vector<double>>();
  m.clip_hi = j.at("clip_hi").get<std::vector<double>>();
  m.min = j.at("min").get<std::vector<double>>();
  m.max = j.at("max").get<std::vector<double>>();
  const std::size_t n = m.kept_columns.size();
  if (m.clip_lo.size() != n || m.clip_hi.size() != n || m.min.size() != n || m.max.size() != n) {
    throw UsageError("malformed preprocessing model");
  }
  return m;
}

nlohmann::json to_json(const AliothModel& m) {
  return {{"kind", "alioth"},
          {"preprocess", to_json(m.prep)},
          {"window_lengths", m.window.lengths},
          {"selected", m.selected},
          {"selected_names", m.selected_names},
          {"dae", neural::to_json(m.dae)},
          {"gbt", gbt::to_json(m.gbt)}};
}

AliothModel alioth_from_json(const nlohmann::json& j) {
  if (!j.contains("kind") || j.at("kind").get<std::string>() != "alioth") {
    throw UsageError("not an estimator model");
  }
  AliothModel m;
  m.prep = preprocess_from_json(j.at("preprocess"));
  m.window.lengths = j.at("window_lengths").get<std::vector<int>>();
  m.window.validate();
  m.selected = j.at("selected").get<std::vector<std::size_t>>();
  m.selected_names = j.at("selected_names").get<std::vector<std::string>>();
  m.dae = neural::dae_from_json(j.at("dae"));
  m.gbt = gbt::ensemble_from_json(j.at("gbt"));
  if (m.dae.dim() != m.selected.size() || m.gbt.n_features != 2 * m.selected.size()) {
    throw UsageError("estimator parts disagree on feature count");
  }
  return m;
}

gbt::GridSearchResult tune_gbt(const Eigen::MatrixXd& Z, std::span<const double> y,
                               const PipelineConfig& cfg) {
  std::vector<std::size_t> all(static_cast<std::size_t>(Z.rows()));
  std::iota(all.begin(), all.end(), 0);
  const auto pick = sample_rows(all, cfg.grid_rows, derive_seed(cfg.seed, 21));
  std::vector<double> yy;
  for (std::size_t r : pick) yy.push_back(y[r]);
  const gbt::GbtGrid grid = cfg.grid_search ? cfg.grid : gbt::GbtGrid::singleton(cfg.gbt);
  auto result = gbt::grid_search_3pass(rows_of(Z, pick), yy, grid, cfg.cv_folds,
                                       derive_seed(cfg.seed, 22), cfg.gbt, cfg.jobs);
  result.best.n_trees = cfg.gbt.n_trees;
  result.best.seed = cfg.gbt.seed;
  return result;
}

}  // namespace alioth::pipeline
