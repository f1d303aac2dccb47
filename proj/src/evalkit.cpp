#include "alioth/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "alioth/csv.hpp"
#include "alioth/parallel.hpp"

namespace alioth::evalkit {

double mae(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) throw UsageError("mae of empty sequence");
  if (y.size() != yhat.size()) throw UsageError("mae: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

Confusion qos_confusion(std::span<const double> d, std::span<const double> dhat,
                        double threshold) {
  if (d.size() != dhat.size()) throw UsageError("qos_confusion: length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool actual = d[i] > threshold, predicted = dhat[i] > threshold;
    if (actual && predicted) ++c.tp;
    else if (!actual && predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  const auto tp = static_cast<double>(c.tp);
  c.precision = c.tp + c.fp ? tp / static_cast<double>(c.tp + c.fp) : (c.fn ? 0.0 : 1.0);
  c.recall = c.tp + c.fn ? tp / static_cast<double>(c.tp + c.fn) : (c.fp ? 0.0 : 1.0);
  c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  c.accuracy = d.empty() ? 1.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(d.size());
  return c;
}

ThresholdSweep threshold_sweep(std::span<const double> d, std::span<const double> dhat,
                               std::span<const double> thresholds) {
  ThresholdSweep s;
  s.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) s.rows.push_back(qos_confusion(d, dhat, t));
  auto spread = [&s](double Confusion::*field) {
    if (s.rows.empty()) return 0.0;
    double lo = s.rows[0].*field, hi = lo;
    for (const auto& r : s.rows) {
      lo = std::min(lo, r.*field);
      hi = std::max(hi, r.*field);
    }
    return hi - lo;
  };
  s.precision_volatility = spread(&Confusion::precision);
  s.recall_volatility = spread(&Confusion::recall);
  s.f1_volatility = spread(&Confusion::f1);
  s.accuracy_volatility = spread(&Confusion::accuracy);
  return s;
}

std::string_view protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Offline82: return "offline_8_2";
    case Protocol::LeaveOneAppOut: return "leave_one_app_out";
    case Protocol::OracleDae: return "oracle_dae";
  }
  return "?";
}

Protocol protocol_from_name(std::string_view name) {
  for (Protocol p : {Protocol::Offline82, Protocol::LeaveOneAppOut, Protocol::OracleDae}) {
    if (protocol_name(p) == name) return p;
  }
  throw UsageError("unknown protocol: " + std::string(name));
}

std::vector<std::string> default_methods(Protocol p) {
  using namespace method;
  switch (p) {
    case Protocol::Offline82:
      return {kAliothDae, kGbt, kOracleDae, kPractical, kCart, kBestPossibleCpi, kBestEffortCpi};
    case Protocol::LeaveOneAppOut:
      return {kAliothDadae, kAliothDae, kOracleDae, kGbt, kBestEffortCpi};
    case Protocol::OracleDae:
      return {kOracleDae, kAliothDae, kGbt};
  }
  return {};
}

std::optional<SoIKind> single_soi(const SoIVector& s) {
  std::optional<SoIKind> out;
  for (std::size_t i = 0; i < kNumSoI; ++i) {
    if (s[i] == 0.0) continue;
    if (out) return std::nullopt;
    out = kAllSoI[i];
  }
  return out;
}

namespace {

const std::set<std::string>& known_methods() {
  using namespace method;
  static const std::set<std::string> m = {kGbt,      kAliothDae, kAliothDadae,    kOracleDae,
                                          kPractical, kCart,     kBestPossibleCpi, kBestEffortCpi};
  return m;
}

struct Fold {
  std::vector<std::size_t> train, test;  // indices into the eligible rows
  std::string held_out;                  // empty for the holdout split
};

struct FoldOutput {
  std::vector<Prediction> predictions;
  gbt::GbtConfig tuned;
  std::vector<gbt::CvRecord> cv_table;
  // offline extras
  std::optional<ThresholdSweep> sweep;
  std::optional<AttributionSummary> attribution;
  std::vector<explain::AttributionRow> attribution_rows;
  double noisy_mae = std::numeric_limits<double>::quiet_NaN();
  double denoised_mae = std::numeric_limits<double>::quiet_NaN();
  std::optional<pipeline::AliothModel> model;
  std::vector<std::size_t> selected;
  std::vector<std::string> selected_names;
  std::vector<neural::EpochLog> dae_log;
};

bool wants(std::span<const std::string> methods, const char* name) {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

FoldOutput run_fold(const simcloud::Dataset& data, std::span<const double> labels,
                    std::span<const std::size_t> eligible, const Fold& fold,
                    std::span<const std::string> methods, const pipeline::PipelineConfig& base,
                    const std::optional<gbt::GbtConfig>& tuned, bool extras) {
  using namespace method;
  pipeline::PipelineConfig cfg = base;
  const std::uint64_t fold_seed =
      derive_seed(base.seed, hash_tag(fold.held_out.empty() ? "holdout" : fold.held_out));
  cfg.seed = fold_seed;

  FoldOutput out;
  const auto prep = pipeline::prepare(data, labels, eligible, fold.train, cfg.window);
  const auto& fs = prep.fs;
  const auto sel = pipeline::select_features(fs, fold.train, cfg);
  const auto fsS = dataprep::select_columns(fs, sel.selected);
  const Eigen::MatrixXd Xtr = pipeline::rows_of(fsS.X, fold.train);
  const Eigen::MatrixXd Xte = pipeline::rows_of(fsS.X, fold.test);
  const auto ytr = pipeline::labels_of(fs, fold.train);
  const auto yte = pipeline::labels_of(fs, fold.test);
  out.selected = sel.selected;
  out.selected_names = fsS.names;

  const auto pairs = dataprep::make_dae_pairs(fsS, fold.train);
  neural::TrainConfig dae_cfg = cfg.dae;
  dae_cfg.seed = derive_seed(fold_seed, hash_tag("dae"));
  const auto dae = neural::train_dae(pairs.noisy, pairs.clean, cfg.arch, dae_cfg);
  out.dae_log = dae.log;
  const Eigen::MatrixXd Ztr = pipeline::concat(Xtr, neural::denoise(dae, Xtr));
  const Eigen::MatrixXd Zte = pipeline::concat(Xte, neural::denoise(dae, Xte));

  if (tuned) {
    out.tuned = *tuned;
  } else {
    auto gs = pipeline::tune_gbt(Ztr, ytr, cfg);
    out.tuned = gs.best;
    out.cv_table = std::move(gs.table);
  }
  gbt::GbtConfig gcfg = out.tuned;
  gcfg.seed = derive_seed(fold_seed, hash_tag("gbt"));

  auto emit = [&](const char* name, const std::vector<double>& est) {
    for (std::size_t i = 0; i < fold.test.size(); ++i) {
      const auto& m = fs.meta[fold.test[i]];
      out.predictions.push_back({m.sample, m.app, name, m.label, est[i]});
    }
  };

  std::optional<gbt::TreeEnsemble> alioth;
  std::vector<double> alioth_est;
  if (wants(methods, kAliothDae) || extras) {
    alioth = gbt::fit_gbt(Ztr, ytr, gcfg);
    alioth_est = to_vec(alioth->predict(Zte));
    if (wants(methods, kAliothDae)) emit(kAliothDae, alioth_est);
  }
  if (wants(methods, kGbt)) {
    emit(kGbt, to_vec(gbt::fit_gbt(Xtr, ytr, gcfg).predict(Xte)));
  }
  const auto everything = all_rows(fs.rows());
  const Eigen::MatrixXd clean_te = dataprep::clean_targets(fsS, everything, fold.test);
  if (wants(methods, kOracleDae)) {
    const Eigen::MatrixXd clean_tr = dataprep::clean_targets(fsS, fold.train, fold.train);
    const auto model = gbt::fit_gbt(pipeline::concat(Xtr, clean_tr), ytr, gcfg);
    emit(kOracleDae, to_vec(model.predict(pipeline::concat(Xte, clean_te))));
  }
  if (wants(methods, kAliothDadae)) {
    neural::TrainConfig dcfg = cfg.dadae;
    dcfg.seed = derive_seed(fold_seed, hash_tag("dadae"));
    std::optional<neural::DaeModel> warm;
    if (cfg.dadae_warm_start) warm = dae;
    const auto dadae = neural::train_dadae(pairs.noisy, pairs.clean, Xte, cfg.arch, dcfg, warm);
    const auto model = gbt::fit_gbt(pipeline::concat(Xtr, neural::denoise(dadae, Xtr)), ytr, gcfg);
    emit(kAliothDadae, to_vec(model.predict(pipeline::concat(Xte, neural::denoise(dadae, Xte)))));
  }
  if (wants(methods, kCart)) {
    gbt::BaggingConfig c{1, cfg.cart_depth, cfg.bagging.min_child_weight, false,
                         derive_seed(fold_seed, hash_tag("cart"))};
    emit(kCart, to_vec(gbt::fit_bagged(Xtr, ytr, c).predict(Xte)));
  }
  if (wants(methods, kPractical)) {
    const Eigen::MatrixXd Ftr = pipeline::rows_of(fs.X, fold.train);
    const int k = std::min<int>(cfg.practical_k, static_cast<int>(Ftr.cols()));
    const auto best = gbt::select_k_best(Ftr, ytr, k);
    gbt::BaggingConfig c = cfg.bagging;
    c.seed = derive_seed(fold_seed, hash_tag("practical"));
    const auto model = gbt::fit_bagged(pipeline::columns_of(Ftr, best), ytr, c);
    emit(kPractical,
         to_vec(model.predict(pipeline::columns_of(pipeline::rows_of(fs.X, fold.test), best))));
  }
  auto samples_of = [&](std::span<const std::size_t> rows) {
    std::vector<std::size_t> s;
    for (std::size_t r : rows) s.push_back(eligible[r]);
    return s;
  };
  if (wants(methods, kBestPossibleCpi)) {
    const auto model = baselines::fit_best_possible(data, eligible);
    std::vector<double> est;
    for (std::size_t r : fold.test) est.push_back(model.predict(data.samples[eligible[r]]));
    emit(kBestPossibleCpi, est);
  }
  if (wants(methods, kBestEffortCpi)) {
    // Unlabelled history: the training rows offline, the app's own rows
    // when it was never seen in training.
    baselines::CpiConfig c = cfg.cpi;
    c.seed = derive_seed(fold_seed, hash_tag("cpi"));
    const auto model = baselines::fit_best_effort(
        data, samples_of(fold.held_out.empty() ? fold.train : fold.test), c);
    std::vector<double> est;
    for (std::size_t r : fold.test) est.push_back(model.predict(data.samples[eligible[r]]));
    emit(kBestEffortCpi, est);
  }

  if (!extras) return out;

  // Denoising quality on held-out rows.
  const Eigen::MatrixXd den_te = Zte.rightCols(Xte.cols());
  out.noisy_mae = (Xte - clean_te).cwiseAbs().mean();
  out.denoised_mae = (den_te - clean_te).cwiseAbs().mean();

  out.sweep = threshold_sweep(yte, alioth_est);

  pipeline::AliothModel model;
  model.prep = prep.prep;
  model.window = cfg.window;
  model.selected = sel.selected;
  model.selected_names = fsS.names;
  model.dae = dae;
  model.gbt = *alioth;

  std::vector<dataprep::RowMeta> train_meta;
  for (std::size_t r : fold.train) train_meta.push_back(fs.meta[r]);
  const auto weights = pipeline::fit_soi_weights(Ztr, train_meta, cfg.attribution_k);
  AttributionSummary summary;
  for (std::size_t i = 0; i < fold.test.size(); ++i) {
    const auto& m = fs.meta[fold.test[i]];
    const auto truth = single_soi(m.soi);
    if (!truth || !(alioth_est[i] > cfg.threshold)) continue;
    std::vector<double> z(static_cast<std::size_t>(Zte.cols()));
    for (Eigen::Index c = 0; c < Zte.cols(); ++c) z[static_cast<std::size_t>(c)] = Zte(static_cast<Eigen::Index>(i), c);
    const auto e = explain::shap_path_dependent(*alioth, z);
    const auto a = explain::attribute(e.phi, weights);
    ++summary.flagged;
    if (!a.defined) {
      ++summary.undefined;
    } else {
      const double total = std::accumulate(a.c_tilde.begin(), a.c_tilde.end(), 0.0);
      if (std::abs(total - 1.0) > 1e-9) summary.sums_to_one = false;
      if (a.top1 == *truth) ++summary.correct;
    }
    out.attribution_rows.push_back({std::to_string(m.sample), a, truth});
  }
  out.attribution = summary;
  out.model = std::move(model);
  return out;
}

}  // namespace

EvalReport run_protocol(const simcloud::Dataset& data, std::span<const double> labels,
                        Protocol protocol, std::span<const std::string> methods,
                        const pipeline::PipelineConfig& cfg,
                        const std::optional<gbt::GbtConfig>& tuned) {
  cfg.validate();
  if (labels.size() != data.samples.size()) throw UsageError("label count mismatch");
  if (methods.empty()) throw UsageError("no methods requested");
  for (const auto& m : methods) {
    if (!known_methods().contains(m)) throw UsageError("unknown method: " + m);
  }
  if (protocol != Protocol::LeaveOneAppOut && wants(methods, method::kAliothDadae)) {
    throw UsageError("alioth_dadae needs an unseen target app (leave_one_app_out)");
  }

  const auto eligible = pipeline::eligible_samples(data, cfg.window);
  std::vector<std::string> row_apps;
  for (std::size_t s : eligible) row_apps.push_back(data.samples[s].app);

  EvalReport report;
  report.protocol = protocol;
  report.methods.assign(methods.begin(), methods.end());
  const std::set<std::string> distinct(row_apps.begin(), row_apps.end());
  report.apps.assign(distinct.begin(), distinct.end());

  std::vector<Fold> folds;
  if (protocol == Protocol::LeaveOneAppOut) {
    for (const auto& app : report.apps) {
      const auto s = dataprep::split_leave_one_app_out(row_apps, app);
      folds.push_back({s.train, s.test, app});
    }
  } else {
    const auto s = dataprep::split_holdout(row_apps, cfg.holdout_ratio, derive_seed(cfg.seed, 31));
    folds.push_back({s.train, s.test, ""});
  }

  std::vector<FoldOutput> outs(folds.size());
  pipeline::PipelineConfig inner = cfg;
  if (folds.size() > 1 && cfg.jobs > 1) inner.jobs = 1;
  const bool extras = protocol != Protocol::LeaveOneAppOut;
  parallel_for(folds.size(), folds.size() > 1 ? cfg.jobs : 1, [&](std::size_t f) {
    outs[f] = run_fold(data, labels, eligible, folds[f], methods, inner, tuned, extras);
  });

  for (auto& o : outs) {
    report.predictions.insert(report.predictions.end(), o.predictions.begin(), o.predictions.end());
    report.cv_table.insert(report.cv_table.end(), o.cv_table.begin(), o.cv_table.end());
  }
  report.tuned = outs.front().tuned;
  if (extras) {
    auto& o = outs.front();
    report.sweep = o.sweep;
    report.attribution = o.attribution;
    report.attribution_rows = std::move(o.attribution_rows);
    report.noisy_mae = o.noisy_mae;
    report.denoised_mae = o.denoised_mae;
    report.model = std::move(o.model);
    report.selected = o.selected;
    report.selected_names = o.selected_names;
    report.dae_log = o.dae_log;
  }

  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& p : report.predictions) {
    auto& a = acc[{p.method, p.app}];
    a.first += std::abs(p.truth - p.estimate);
    a.second += 1;
  }
  for (const auto& m : report.methods) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& app : report.apps) {
      const auto it = acc.find({m, app});
      if (it == acc.end()) continue;
      const double v = it->second.first / static_cast<double>(it->second.second);
      report.mae[m][app] = v;
      sum += v;
      ++n;
    }
    report.mean_mae[m] = n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

void write_mae_table(const EvalReport& r, const std::filesystem::path& path) {
  csv::Table t;
  t.header = {r.protocol == Protocol::LeaveOneAppOut ? "held_out_app" : "app"};
  t.header.insert(t.header.end(), r.methods.begin(), r.methods.end());
  auto cell = [&](const std::string& m, const std::string& app) {
    const auto mi = r.mae.find(m);
    if (mi == r.mae.end()) return std::string();
    const auto ai = mi->second.find(app);
    return ai == mi->second.end() ? std::string() : format_double(ai->second);
  };
  for (const auto& app : r.apps) {
    std::vector<std::string> row{app};
    for (const auto& m : r.methods) row.push_back(cell(m, app));
    t.rows.push_back(std::move(row));
  }
  std::vector<std::string> mean{"mean"};
  for (const auto& m : r.methods) mean.push_back(format_double(r.mean_mae.at(m)));
  t.rows.push_back(std::move(mean));
  csv::write(path, t);
}

void write_predictions(const EvalReport& r, const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"sample", "app", "method", "D", "D_hat"};
  for (const auto& p : r.predictions) {
    t.rows.push_back({std::to_string(p.sample), p.app, p.method, format_double(p.truth),
                      format_double(p.estimate)});
  }
  csv::write(path, t);
}

void write_sweep(const ThresholdSweep& s, const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"threshold", "precision", "recall", "f1", "accuracy"};
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& c = s.rows[i];
    t.rows.push_back({format_double(s.thresholds[i]), format_double(c.precision),
                      format_double(c.recall), format_double(c.f1), format_double(c.accuracy)});
  }
  t.rows.push_back({"volatility", format_double(s.precision_volatility),
                    format_double(s.recall_volatility), format_double(s.f1_volatility),
                    format_double(s.accuracy_volatility)});
  csv::write(path, t);
}

void write_cv_table(std::span<const gbt::CvRecord> table, const std::filesystem::path& path) {
  csv::Table t;
  t.header = {"pass", "config", "fold", "mae"};
  for (const auto& r : table) {
    t.rows.push_back({std::to_string(r.pass), r.config.describe(), std::to_string(r.fold),
                      format_double(r.mae)});
  }
  csv::write(path, t);
}

std::string summary_text(const EvalReport& r) {
  std::ostringstream s;
  s << "protocol " << protocol_name(r.protocol) << "\n";
  for (const auto& m : r.methods) s << "  " << m << " mean MAE " << r.mean_mae.at(m) << "\n";
  if (!std::isnan(r.noisy_mae)) {
    s << "  denoising: MAE(x, clean) " << r.noisy_mae << ", MAE(denoise(x), clean) "
      << r.denoised_mae << "\n";
  }
  if (r.sweep) {
    s << "  sweep volatility: f1 " << r.sweep->f1_volatility << ", accuracy "
      << r.sweep->accuracy_volatility << "\n";
  }
  if (r.attribution) {
    s << "  attribution top-1 accuracy " << r.attribution->accuracy() << " over "
      << r.attribution->flagged << " flagged rows\n";
  }
  return s.str();
}

}  // namespace alioth::evalkit
