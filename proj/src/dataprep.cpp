#include "alioth/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "alioth/csv.hpp"

namespace alioth::dataprep {

MetricTable to_table(const simcloud::Dataset& data) {
  std::vector<std::size_t> all(data.samples.size());
  std::iota(all.begin(), all.end(), 0);
  return to_table(data, all);
}

MetricTable to_table(const simcloud::Dataset& data, std::span<const std::size_t> rows) {
  MetricTable t;
  t.columns = data.metric_names;
  t.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& m = data.samples[rows[r]].metrics;
    for (std::size_t c = 0; c < m.size(); ++c) {
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m[c];
    }
  }
  return t;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PreprocessModel fit_preprocess(const MetricTable& table) {
  const Eigen::Index n = table.values.rows();
  if (n < 2) throw UsageError("fit_preprocess needs at least 2 rows");
  PreprocessModel model;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    const auto col = table.values.col(c);
    const std::string& name = table.columns[static_cast<std::size_t>(c)];
    if (col.maxCoeff() == col.minCoeff()) {
      model.dropped_columns.push_back(name);
      continue;
    }
    std::vector<double> v(col.data(), col.data() + n);
    const double lo = percentile(v, kClipLowPercentile);
    const double hi = percentile(std::move(v), kClipHighPercentile);
    model.kept_columns.push_back(name);
    model.clip_lo.push_back(lo);
    model.clip_hi.push_back(hi);
    // Post-clip extremes are the clip bounds themselves whenever the
    // percentiles lie inside the sample range, which they always do.
    model.min.push_back(lo);
    model.max.push_back(hi);
  }
  if (model.kept_columns.empty()) throw UsageError("every column has zero variance");
  return model;
}

MetricTable apply_preprocess(const PreprocessModel& model, const MetricTable& table) {
  MetricTable out;
  out.columns = model.kept_columns;
  out.values.resize(table.values.rows(), static_cast<Eigen::Index>(model.kept_columns.size()));
  for (std::size_t k = 0; k < model.kept_columns.size(); ++k) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), model.kept_columns[k]);
    if (it == table.columns.end()) throw UsageError("missing column: " + model.kept_columns[k]);
    const auto src = static_cast<Eigen::Index>(it - table.columns.begin());
    const double lo = model.clip_lo[k], hi = model.clip_hi[k];
    const double span = model.max[k] - model.min[k];
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
      const double v = std::clamp(table.values(r, src), lo, hi);
      double scaled = span > 0.0 ? (v - model.min[k]) / span : 0.0;
      out.values(r, static_cast<Eigen::Index>(k)) = std::clamp(scaled, 0.0, 1.0);
    }
  }
  return out;
}

std::string_view stat_name(WindowStat s) {
  switch (s) {
    case WindowStat::Mean: return "mean";
    case WindowStat::Min: return "min";
    case WindowStat::Max: return "max";
    case WindowStat::MaxDiff: return "maxdiff";
    case WindowStat::Std: return "std";
  }
  return "?";
}

int WindowConfig::max_length() const {
  return lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
}

void WindowConfig::validate() const {
  if (lengths.empty()) throw UsageError("no window lengths");
  for (int l : lengths) {
    if (l <= 0) throw UsageError("window lengths must be positive");
  }
}

std::vector<std::string> feature_names(std::span<const std::string> metrics,
                                       const WindowConfig& cfg) {
  std::vector<std::string> names;
  names.reserve(metrics.size() * cfg.features_per_metric());
  for (const auto& m : metrics) {
    for (int len : cfg.lengths) {
      for (WindowStat s : kWindowStats) {
        names.push_back(m + "." + std::to_string(len) + "." + std::string(stat_name(s)));
      }
    }
  }
  return names;
}

namespace {

// Writes the features of one row into `out` (length n_metrics * per-metric).
void window_into(const Eigen::MatrixXd& series, const WindowConfig& cfg, std::size_t end,
                 double* out) {
  const auto e = static_cast<Eigen::Index>(end);
  std::size_t pos = 0;
  for (Eigen::Index m = 0; m < series.cols(); ++m) {
    for (int len : cfg.lengths) {
      const Eigen::Index first = e - len + 1;
      double sum = 0.0, lo = series(first, m), hi = lo;
      for (Eigen::Index r = first; r <= e; ++r) {
        const double v = series(r, m);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double mean = sum / len;
      double ss = 0.0;
      for (Eigen::Index r = first; r <= e; ++r) {
        const double d = series(r, m) - mean;
        ss += d * d;
      }
      out[pos++] = mean;
      out[pos++] = lo;
      out[pos++] = hi;
      out[pos++] = hi - lo;
      out[pos++] = std::sqrt(ss / len);
    }
  }
}

}  // namespace

FeatureVector window_features(const Eigen::MatrixXd& series, const WindowConfig& cfg,
                              std::size_t end) {
  cfg.validate();
  if (end >= static_cast<std::size_t>(series.rows())) throw UsageError("window end past series");
  if (end + 1 < static_cast<std::size_t>(cfg.max_length())) {
    throw UsageError("insufficient history for the longest window");
  }
  FeatureVector fv;
  fv.values.resize(static_cast<std::size_t>(series.cols()) * cfg.features_per_metric());
  window_into(series, cfg, end, fv.values.data());
  return fv;
}

std::vector<std::string> FeatureSet::apps() const {
  std::set<std::string> s;
  for (const auto& m : meta) s.insert(m.app);
  return {s.begin(), s.end()};
}

std::vector<std::pair<std::size_t, std::size_t>> episodes(const simcloud::Dataset& data) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto& s = data.samples;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= s.size(); ++i) {
    if (i == s.size() || s[i].app != s[begin].app || s[i].intensity != s[begin].intensity ||
        s[i].t <= s[i - 1].t) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  if (s.empty()) out.clear();
  return out;
}

FeatureSet build_features(const simcloud::Dataset& data, std::span<const double> labels,
                          const PreprocessModel& model, const WindowConfig& cfg) {
  cfg.validate();
  if (labels.size() != data.samples.size()) throw UsageError("label count mismatch");
  const MetricTable scaled = apply_preprocess(model, to_table(data));
  const auto eps = episodes(data);
  const auto need = static_cast<std::size_t>(cfg.max_length());

  std::size_t total = 0;
  for (const auto& [b, e] : eps) {
    if (e - b >= need) total += e - b - need + 1;
  }
  FeatureSet fs;
  fs.names = feature_names(model.kept_columns, cfg);
  const auto width = static_cast<Eigen::Index>(fs.names.size());
  // Row-major scratch so each row is written contiguously, then transposed.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> buf(
      static_cast<Eigen::Index>(total), width);
  fs.meta.reserve(total);
  Eigen::Index row = 0;
  for (const auto& [b, e] : eps) {
    if (e - b < need) continue;
    const Eigen::MatrixXd series =
        scaled.values.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
    for (std::size_t end = need - 1; end < e - b; ++end) {
      window_into(series, cfg, end, buf.row(row).data());
      const auto& smp = data.samples[b + end];
      bool quiet = true;
      for (std::size_t k = end + 1 - need; k <= end; ++k) quiet = quiet && data.samples[b + k].clean();
      fs.meta.push_back({b + end, smp.app, smp.intensity, smp.t, smp.soi_intensity, smp.qos,
                         labels[b + end], quiet});
      ++row;
    }
  }
  fs.X = buf;
  return fs;
}

FeatureSet subset(const FeatureSet& fs, std::span<const std::size_t> rows) {
  FeatureSet out;
  out.names = fs.names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), fs.X.cols());
  out.meta.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = fs.X.row(static_cast<Eigen::Index>(rows[r]));
    out.meta.push_back(fs.meta[rows[r]]);
  }
  return out;
}

FeatureSet select_columns(const FeatureSet& fs, std::span<const std::size_t> cols) {
  FeatureSet out;
  out.meta = fs.meta;
  out.X.resize(fs.X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] >= fs.names.size()) throw UsageError("feature index out of range");
    out.names.push_back(fs.names[cols[c]]);
    out.X.col(static_cast<Eigen::Index>(c)) = fs.X.col(static_cast<Eigen::Index>(cols[c]));
  }
  return out;
}

Eigen::MatrixXd clean_targets(const FeatureSet& fs, std::span<const std::size_t> reference,
                              std::span<const std::size_t> rows) {
  std::map<std::pair<std::string, double>, std::pair<Eigen::VectorXd, std::size_t>> groups;
  for (std::size_t r : reference) {
    const auto& m = fs.meta[r];
    if (!m.window_clean) continue;
    auto [it, fresh] = groups.try_emplace({m.app, m.intensity});
    if (fresh) it->second = {Eigen::VectorXd::Zero(fs.X.cols()), 0};
    it->second.first += fs.X.row(static_cast<Eigen::Index>(r)).transpose();
    it->second.second += 1;
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), fs.X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = fs.meta[rows[i]];
    const auto it = groups.find({m.app, m.intensity});
    if (it == groups.end()) {
      throw UsageError("no clean reference rows for app '" + m.app + "' at intensity " +
                       format_double(m.intensity));
    }
    out.row(static_cast<Eigen::Index>(i)) =
        (it->second.first / static_cast<double>(it->second.second)).transpose();
  }
  return out;
}

DaePairs make_dae_pairs(const FeatureSet& fs, std::span<const std::size_t> rows) {
  DaePairs p;
  p.clean = clean_targets(fs, rows, rows);
  p.noisy.resize(static_cast<Eigen::Index>(rows.size()), fs.X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.noisy.row(static_cast<Eigen::Index>(i)) = fs.X.row(static_cast<Eigen::Index>(rows[i]));
  }
  return p;
}

DaePairs make_dae_pairs(const FeatureSet& fs) {
  std::vector<std::size_t> all(fs.rows());
  std::iota(all.begin(), all.end(), 0);
  return make_dae_pairs(fs, all);
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  }
}

Split split_holdout(std::span<const std::string> row_apps, double ratio, std::uint64_t seed) {
  if (row_apps.size() < 10) throw UsageError("split_holdout needs at least 10 rows");
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("holdout ratio must be in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> by_app;
  for (std::size_t i = 0; i < row_apps.size(); ++i) by_app[row_apps[i]].push_back(i);
  Split s;
  for (auto& [app, idx] : by_app) {
    Rng rng(derive_seed(seed, hash_tag(app)));
    shuffle_indices(idx, rng);
    const auto n_train =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size()) + 0.5));
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<long>(n_train));
    s.test.insert(s.test.end(), idx.begin() + static_cast<long>(n_train), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Split split_leave_one_app_out(std::span<const std::string> row_apps, const std::string& app) {
  std::set<std::string> distinct(row_apps.begin(), row_apps.end());
  if (distinct.size() < 2) throw UsageError("leave-one-app-out needs at least 2 apps");
  if (!distinct.contains(app)) throw UsageError("unknown app: " + app);
  Split s;
  for (std::size_t i = 0; i < row_apps.size(); ++i) {
    (row_apps[i] == app ? s.test : s.train).push_back(i);
  }
  return s;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k,
                                                    std::uint64_t seed) {
  if (k == 0 || n < k) throw UsageError("kfold needs n >= k > 0");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, hash_tag("kfold")));
  shuffle_indices(idx, rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<long>(pos),
                    idx.begin() + static_cast<long>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

namespace {
constexpr std::size_t kFeatureMetaColumns = 10;
}

void write_features(const FeatureSet& fs, const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"sample", "app", "intensity", "t"};
  for (const char* k : {"soi_llc", "soi_mbw", "soi_nbw", "soi_dbw"}) t.header.push_back(k);
  t.header.push_back("window_clean");
  t.header.push_back("D");
  t.header.insert(t.header.end(), fs.names.begin(), fs.names.end());
  for (std::size_t r = 0; r < fs.rows(); ++r) {
    const auto& m = fs.meta[r];
    std::vector<std::string> row = {std::to_string(m.sample), m.app, format_double(m.intensity),
                                    format_double(m.t)};
    for (double s : m.soi) row.push_back(format_double(s));
    row.push_back(m.window_clean ? "1" : "0");
    row.push_back(format_double(m.label));
    for (Eigen::Index c = 0; c < fs.X.cols(); ++c) {
      row.push_back(format_double(fs.X(static_cast<Eigen::Index>(r), c)));
    }
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

FeatureSet read_features(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  if (t.header.size() <= kFeatureMetaColumns || t.header[0] != "sample" ||
      t.header[kFeatureMetaColumns - 1] != "D") {
    throw UsageError("not a feature table: " + path.string());
  }
  FeatureSet fs;
  fs.names.assign(t.header.begin() + kFeatureMetaColumns, t.header.end());
  fs.X.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(fs.names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw UsageError("ragged feature table row " + std::to_string(r + 2));
    RowMeta m;
    m.sample = static_cast<std::size_t>(parse_double(row[0]));
    m.app = row[1];
    m.intensity = parse_double(row[2]);
    m.t = parse_double(row[3]);
    for (std::size_t k = 0; k < kNumSoI; ++k) m.soi[k] = parse_double(row[4 + k]);
    m.window_clean = row[8] == "1";
    m.label = parse_double(row[9]);
    for (std::size_t c = 0; c < fs.names.size(); ++c) {
      fs.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(row[kFeatureMetaColumns + c]);
    }
    fs.meta.push_back(std::move(m));
  }
  return fs;
}

}  // namespace alioth::dataprep
