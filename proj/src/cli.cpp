#include "alioth/cli.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "alioth/baselines.hpp"
#include "alioth/csv.hpp"
#include "alioth/explain.hpp"
#include "alioth/parallel.hpp"
#include "json.hpp"

#ifndef ALIOTH_VERSION
#define ALIOTH_VERSION "0.1.0"
#endif

namespace alioth::cli {
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  auto& p = pipeline;
  p.seed = s;
  p.selector.seed = derive_seed(s, hash_tag("selector"));
  p.dae.seed = derive_seed(s, hash_tag("dae"));
  p.dadae.seed = derive_seed(s, hash_tag("dadae"));
  p.gbt.seed = derive_seed(s, hash_tag("gbt"));
  p.bagging.seed = derive_seed(s, hash_tag("bagging"));
  p.cpi.seed = derive_seed(s, hash_tag("cpi"));
}

simcloud::ScenarioConfig RunConfig::scenario() const {
  auto c = simcloud::make_default_scenario(seed, scale);
  c.response = response;
  c.qos_kind = qos;
  c.cpi_tracks_qos = cpi_tracks_qos;
  c.metric_noise = metric_noise;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw UsageError("not a number: " + v);
  }
}

long long to_int(const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw UsageError("not an integer: " + v);
  }
  if (pos != v.size()) throw UsageError("not an integer: " + v);
  return out;
}

std::size_t to_count(const std::string& v) {
  const auto n = to_int(v);
  if (n < 0) throw UsageError("expected a non-negative integer: " + v);
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("not a boolean: " + v);
}

std::vector<int> to_ints(const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(static_cast<int>(to_int(s)));
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<double> to_doubles(const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(s));
  if (out.empty()) throw UsageError("empty list");
  return out;
}

neural::Activation to_activation(const std::string& v) {
  if (v == "relu") return neural::Activation::Relu;
  if (v == "tanh") return neural::Activation::Tanh;
  if (v == "logistic") return neural::Activation::Logistic;
  if (v == "identity") return neural::Activation::Identity;
  throw UsageError("unknown activation: " + v);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Schema = std::map<std::string, std::map<std::string, Setter>>;

const Schema& schema() {
  static const Schema s = {
      {"scenario",
       {{"scale",
         [](RunConfig& c, const std::string& v) {
           if (v == "desk") c.scale = simcloud::Scale::Desk;
           else if (v == "full") c.scale = simcloud::Scale::Full;
           else throw UsageError("unknown scale: " + v);
         }},
        {"response",
         [](RunConfig& c, const std::string& v) {
           if (v == "linear") c.response = simcloud::ResponseShape::Linear;
           else if (v == "saturating") c.response = simcloud::ResponseShape::Saturating;
           else throw UsageError("unknown response shape: " + v);
         }},
        {"qos",
         [](RunConfig& c, const std::string& v) {
           if (v == "latency") c.qos = simcloud::QosKind::Latency;
           else if (v == "throughput") c.qos = simcloud::QosKind::Throughput;
           else throw UsageError("unknown qos kind: " + v);
         }},
        {"cpi_tracks_qos", [](RunConfig& c, const std::string& v) { c.cpi_tracks_qos = to_bool(v); }},
        {"metric_noise", [](RunConfig& c, const std::string& v) { c.metric_noise = to_bool(v); }}}},
      {"run",
       {{"seed", [](RunConfig& c, const std::string& v) { c.seed = to_count(v); }},
        {"jobs", [](RunConfig& c, const std::string& v) {
           c.pipeline.jobs = static_cast<int>(to_int(v));
         }}}},
      {"features",
       {{"windows", [](RunConfig& c, const std::string& v) { c.pipeline.window.lengths = to_ints(v); }}}},
      {"selection",
       {{"trees", [](RunConfig& c, const std::string& v) { c.pipeline.selector.n_trees = static_cast<int>(to_int(v)); }},
        {"max_depth", [](RunConfig& c, const std::string& v) { c.pipeline.selector.max_depth = static_cast<int>(to_int(v)); }},
        {"eta", [](RunConfig& c, const std::string& v) { c.pipeline.selector.eta = to_double(v); }},
        {"rows", [](RunConfig& c, const std::string& v) { c.pipeline.selector_rows = to_count(v); }},
        {"shap_rows_per_app", [](RunConfig& c, const std::string& v) { c.pipeline.shap_rows_per_app = to_count(v); }},
        {"top_n", [](RunConfig& c, const std::string& v) { c.pipeline.top_n = to_count(v); }},
        {"quorum", [](RunConfig& c, const std::string& v) { c.pipeline.quorum = to_count(v); }}}},
      {"dae",
       {{"encoder", [](RunConfig& c, const std::string& v) { c.pipeline.arch.encoder_hidden = to_ints(v); }},
        {"domain", [](RunConfig& c, const std::string& v) { c.pipeline.arch.domain_hidden = to_ints(v); }},
        {"activation", [](RunConfig& c, const std::string& v) { c.pipeline.arch.hidden = to_activation(v); }},
        {"lr", [](RunConfig& c, const std::string& v) { c.pipeline.dae.lr = to_double(v); }},
        {"epochs", [](RunConfig& c, const std::string& v) { c.pipeline.dae.epochs = static_cast<int>(to_int(v)); }},
        {"batch_size", [](RunConfig& c, const std::string& v) { c.pipeline.dae.batch_size = static_cast<int>(to_int(v)); }},
        {"dadae_lr", [](RunConfig& c, const std::string& v) { c.pipeline.dadae.lr = to_double(v); }},
        {"dadae_epochs", [](RunConfig& c, const std::string& v) { c.pipeline.dadae.epochs = static_cast<int>(to_int(v)); }},
        {"dadae_batch_size", [](RunConfig& c, const std::string& v) { c.pipeline.dadae.batch_size = static_cast<int>(to_int(v)); }},
        {"lambda_max", [](RunConfig& c, const std::string& v) { c.pipeline.dadae.lambda_max = to_double(v); }},
        {"lambda_gamma", [](RunConfig& c, const std::string& v) { c.pipeline.dadae.lambda_gamma = to_double(v); }},
        {"warm_start", [](RunConfig& c, const std::string& v) { c.pipeline.dadae_warm_start = to_bool(v); }}}},
      {"gbt",
       {{"n_trees", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.n_trees = static_cast<int>(to_int(v)); }},
        {"max_depth", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.max_depth = static_cast<int>(to_int(v)); }},
        {"min_child_weight", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.min_child_weight = to_double(v); }},
        {"subsample", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.subsample = to_double(v); }},
        {"colsample", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.colsample = to_double(v); }},
        {"reg_lambda", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.reg_lambda = to_double(v); }},
        {"eta", [](RunConfig& c, const std::string& v) { c.pipeline.gbt.eta = to_double(v); }},
        {"grid_search", [](RunConfig& c, const std::string& v) { c.pipeline.grid_search = to_bool(v); }},
        {"cv_folds", [](RunConfig& c, const std::string& v) { c.pipeline.cv_folds = to_count(v); }},
        {"grid_rows", [](RunConfig& c, const std::string& v) { c.pipeline.grid_rows = to_count(v); }}}},
      {"grid",
       {{"max_depth", [](RunConfig& c, const std::string& v) { c.pipeline.grid.max_depth = to_ints(v); }},
        {"min_child_weight", [](RunConfig& c, const std::string& v) { c.pipeline.grid.min_child_weight = to_doubles(v); }},
        {"subsample", [](RunConfig& c, const std::string& v) { c.pipeline.grid.subsample = to_doubles(v); }},
        {"colsample", [](RunConfig& c, const std::string& v) { c.pipeline.grid.colsample = to_doubles(v); }},
        {"reg_lambda", [](RunConfig& c, const std::string& v) { c.pipeline.grid.reg_lambda = to_doubles(v); }},
        {"eta", [](RunConfig& c, const std::string& v) { c.pipeline.grid.eta = to_doubles(v); }}}},
      {"baselines",
       {{"bagging_trees", [](RunConfig& c, const std::string& v) { c.pipeline.bagging.n_trees = static_cast<int>(to_int(v)); }},
        {"bagging_depth", [](RunConfig& c, const std::string& v) { c.pipeline.bagging.max_depth = static_cast<int>(to_int(v)); }},
        {"bagging_min_child_weight", [](RunConfig& c, const std::string& v) { c.pipeline.bagging.min_child_weight = to_double(v); }},
        {"practical_k", [](RunConfig& c, const std::string& v) { c.pipeline.practical_k = static_cast<int>(to_int(v)); }},
        {"cart_depth", [](RunConfig& c, const std::string& v) { c.pipeline.cart_depth = static_cast<int>(to_int(v)); }},
        {"gmm_k_max", [](RunConfig& c, const std::string& v) { c.pipeline.cpi.k_max = to_count(v); }}}},
      {"eval",
       {{"holdout_ratio", [](RunConfig& c, const std::string& v) { c.pipeline.holdout_ratio = to_double(v); }},
        {"threshold", [](RunConfig& c, const std::string& v) { c.pipeline.threshold = to_double(v); }},
        {"attribution_k", [](RunConfig& c, const std::string& v) { c.pipeline.attribution_k = to_count(v); }}}},
  };
  return s;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw UsageError("config: key outside a section: " + section);
    const auto sec = schema().find(section);
    if (sec == schema().end()) throw UsageError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : node) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) {
        throw UsageError("config: unknown key " + key + " in [" + section + "]");
      }
      const std::string v = trim(value.data());
      try {
        setter->second(cfg, v);
      } catch (const UsageError& e) {
        throw UsageError("config: " + section + "." + key + ": " + e.what());
      }
    }
  }
  cfg.apply_seed(cfg.seed);
  cfg.pipeline.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------- manifest

std::string version_string() { return ALIOTH_VERSION; }

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("not a JSON file: " + path.string() + ": " + e.what());
  }
}

}  // namespace

void write_manifest(const RunManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(dir / "manifest.json", {{"command", m.command},
                                     {"config", m.config_path},
                                     {"seed", m.seed},
                                     {"output_dir", m.output_dir},
                                     {"version", m.version},
                                     {"started", m.started},
                                     {"finished", m.finished}});
}

fs::path resolve_output(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

// ---------------------------------------------------------------- helpers

namespace {

void write_dae_log(std::span<const neural::EpochLog> log, const fs::path& path) {
  csv::Table t;
  t.header = {"epoch", "recon_mse", "domain_loss", "domain_acc", "lambda"};
  for (const auto& e : log) {
    t.rows.push_back({std::to_string(e.epoch), format_double(e.recon_mse),
                      format_double(e.domain_loss), format_double(e.domain_acc),
                      format_double(e.lambda)});
  }
  csv::write(path, t);
}

void write_selected(std::span<const std::size_t> idx, std::span<const std::string> names,
                    const fs::path& path) {
  csv::Table t;
  t.header = {"index", "feature"};
  for (std::size_t i = 0; i < idx.size(); ++i) t.rows.push_back({std::to_string(idx[i]), names[i]});
  csv::write(path, t);
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Column indices of `wanted` in `names`; UsageError for any missing name.
std::vector<std::size_t> columns_by_name(std::span<const std::string> names,
                                         std::span<const std::string> wanted) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < names.size(); ++i) pos.emplace(names[i], i);
  std::vector<std::size_t> out;
  for (const auto& w : wanted) {
    const auto it = pos.find(w);
    if (it == pos.end()) throw UsageError("feature not in data: " + w);
    out.push_back(it->second);
  }
  return out;
}

struct Loaded {
  simcloud::Dataset data;
  std::vector<double> labels;
};

Loaded load_dataset(const fs::path& path, const RunConfig& cfg) {
  Loaded l;
  l.data = simcloud::import_dataset(path);
  l.labels = simcloud::label_degradation(l.data.samples, cfg.qos);
  return l;
}

// Features of an Alioth model over a raw dataset: the selected columns,
// row metadata, and the estimator inputs.
struct ModelView {
  dataprep::FeatureSet fs;  // selected columns only
  Eigen::MatrixXd Z;
};

ModelView view(const pipeline::AliothModel& m, const Loaded& l) {
  ModelView v;
  const auto full = dataprep::build_features(l.data, l.labels, m.prep, m.window);
  v.fs = dataprep::select_columns(full, m.selected);
  v.Z = m.inputs(v.fs.X);
  return v;
}

// A tree ensemble with the names of its input columns and the optional
// denoiser producing the "dae:" half.
struct TreeModel {
  gbt::TreeEnsemble ensemble;
  std::vector<std::string> features;
  std::optional<neural::DaeModel> dae;
  std::vector<std::string> dae_features;
};

TreeModel tree_from_json(const json& j) {
  TreeModel t;
  t.ensemble = gbt::ensemble_from_json(j);
  if (j.contains("features")) t.features = j.at("features").get<std::vector<std::string>>();
  if (j.contains("dae")) {
    t.dae = neural::dae_from_json(j.at("dae"));
    t.dae_features = j.at("dae").at("features").get<std::vector<std::string>>();
  }
  return t;
}

// Estimator inputs for a features file.
Eigen::MatrixXd tree_inputs(const TreeModel& t, const dataprep::FeatureSet& fs) {
  Eigen::MatrixXd Z;
  if (t.dae) {
    const auto cols = columns_by_name(fs.names, t.dae_features);
    const Eigen::MatrixXd X = pipeline::columns_of(fs.X, cols);
    Z = pipeline::concat(X, neural::denoise(*t.dae, X));
  } else if (!t.features.empty()) {
    Z = pipeline::columns_of(fs.X, columns_by_name(fs.names, t.features));
  } else {
    Z = fs.X;
  }
  if (static_cast<std::size_t>(Z.cols()) != t.ensemble.n_features) {
    throw UsageError("model expects " + std::to_string(t.ensemble.n_features) +
                     " inputs, data gives " + std::to_string(Z.cols()));
  }
  return Z;
}

std::string model_kind(const json& j) {
  return j.contains("kind") && j.at("kind").is_string() ? j.at("kind").get<std::string>() : "";
}

std::vector<double> row_vec(const Eigen::MatrixXd& X, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) v[static_cast<std::size_t>(c)] = X(r, c);
  return v;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void write_report(const evalkit::EvalReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  evalkit::write_mae_table(r, dir / "mae.csv");
  evalkit::write_predictions(r, dir / "predictions.csv");
  evalkit::write_cv_table(r.cv_table, dir / "cv.csv");
  if (r.sweep) evalkit::write_sweep(*r.sweep, dir / "sweep.csv");
  if (r.attribution) explain::write_attribution_csv(dir / "attribution.csv", r.attribution_rows);
  if (!r.dae_log.empty()) write_dae_log(r.dae_log, dir / "dae_log.csv");
  if (!r.selected.empty()) write_selected(r.selected, r.selected_names, dir / "selected.csv");
  if (r.model) write_json(dir / "model.json", pipeline::to_json(*r.model));
  write_text(dir / "summary.txt", evalkit::summary_text(r));
}

// Runs `body` between a start and an end manifest.
int with_manifest(const std::string& command, const std::string& config_path, const RunConfig& cfg,
                  const fs::path& out, const std::function<void()>& body) {
  RunManifest m{command, config_path, cfg.seed, out.string(), version_string(), now_iso(), ""};
  write_manifest(m, out);
  body();
  m.finished = now_iso();
  write_manifest(m, out);
  return 0;
}

std::map<std::string, std::string> snapshot_csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).generic_string()] = ss.str();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- repro-all

ReproResult repro_all(const RunConfig& cfg, const fs::path& out,
                      const std::optional<fs::path>& previous) {
  using acceptance::CriterionResult;
  const auto t0 = std::chrono::steady_clock::now();
  const auto before = previous ? std::map<std::string, std::string>{} : snapshot_csvs(out);

  fs::create_directories(out / "data");
  const auto data = simcloud::run_all(cfg.scenario());
  simcloud::export_dataset(data, out / "data" / "dataset.csv");
  const auto labels = simcloud::label_degradation(data.samples, cfg.qos);
  std::cout << "data: " << data.samples.size() << " samples, " << data.metric_names.size()
            << " metrics" << std::endl;

  ReproResult r;
  r.offline = evalkit::run_protocol(data, labels, evalkit::Protocol::Offline82,
                                    evalkit::default_methods(evalkit::Protocol::Offline82),
                                    cfg.pipeline);
  write_report(r.offline, out / "offline");
  std::cout << evalkit::summary_text(r.offline) << std::flush;

  r.loao = evalkit::run_protocol(data, labels, evalkit::Protocol::LeaveOneAppOut,
                                 evalkit::default_methods(evalkit::Protocol::LeaveOneAppOut),
                                 cfg.pipeline);
  write_report(r.loao, out / "loao");
  std::cout << evalkit::summary_text(r.loao) << std::flush;

  // Stand-alone CPI baselines over every sample.
  fs::create_directories(out / "baselines");
  const auto all = iota_rows(data.samples.size());
  baselines::CpiConfig cpi = cfg.pipeline.cpi;
  for (auto mode : {baselines::CpiMode::BestPossible, baselines::CpiMode::BestEffort}) {
    const auto model = mode == baselines::CpiMode::BestPossible
                           ? baselines::fit_best_possible(data, all)
                           : baselines::fit_best_effort(data, all, cpi);
    std::vector<baselines::BaselinePrediction> rows;
    for (std::size_t i : all) rows.push_back({i, model.predict(data.samples[i]), mode});
    baselines::write_predictions(
        out / "baselines" /
            (mode == baselines::CpiMode::BestPossible ? "best_possible.csv" : "best_effort.csv"),
        rows);
  }

  // Plot-ready summaries.
  fs::create_directories(out / "plots");
  for (const auto* rep : {&r.offline, &r.loao}) {
    csv::Table t;
    t.header = {"method", "mean_mae"};
    for (const auto& m : rep->methods) t.rows.push_back({m, format_double(rep->mean_mae.at(m))});
    csv::write(out / "plots" / (std::string(evalkit::protocol_name(rep->protocol)) + "_methods.csv"), t);
  }
  {
    csv::Table t;
    t.header = {"input", "mae_to_clean"};
    t.rows.push_back({"noisy", format_double(r.offline.noisy_mae)});
    t.rows.push_back({"denoised", format_double(r.offline.denoised_mae)});
    csv::write(out / "plots" / "denoising.csv", t);
  }

  r.criteria.push_back(acceptance::check_gradients(cfg.seed));
  r.criteria.push_back(acceptance::check_shapley(cfg.seed));
  r.criteria.push_back(acceptance::check_denoising(r.offline));
  r.criteria.push_back(acceptance::check_pipeline_ordering(r.offline));
  r.criteria.push_back(acceptance::check_generalization(r.loao));
  r.criteria.push_back(acceptance::check_sweep(r.offline));
  r.criteria.push_back(acceptance::check_attribution(r.offline));
  r.criteria.push_back(acceptance::check_gmm(cfg.seed));

  if (previous) {
    r.criteria.push_back(acceptance::check_determinism(*previous, out));
  } else if (!before.empty()) {
    const auto after = snapshot_csvs(out);
    std::size_t differing = 0;
    for (const auto& [name, content] : before) {
      const auto it = after.find(name);
      if (it != after.end() && it->second != content) ++differing;
    }
    const bool same_set = [&] {
      for (const auto& [name, content] : after) {
        if (!before.contains(name)) return false;
      }
      return true;
    }();
    r.criteria.push_back({9, "determinism", differing == 0 && same_set,
                          std::to_string(after.size()) + " CSV files compared with the previous run in place, " +
                              std::to_string(differing) + " differ"});
  } else {
    r.criteria.push_back({9, "determinism", false, "no previous run to compare (re-run or use --compare)", false});
  }

  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.inference_ms = acceptance::inference_ms(*r.offline.model, data);
  r.criteria.push_back(acceptance::check_runtime(r.seconds, r.inference_ms));

  std::ostringstream summary;
  for (const auto& c : r.criteria) summary << acceptance::format_line(c) << "\n";
  write_text(out / "acceptance.txt", summary.str());
  return r;
}

// ---------------------------------------------------------------- commands

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (config.empty()) c.apply_seed(c.seed);
    if (seed) c.apply_seed(*seed);
    if (jobs > 0) c.pipeline.jobs = jobs;
    c.pipeline.validate();
    return c;
  }
};

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
}

int cmd_gen(const Common& common) {
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  return with_manifest("gen", common.config, cfg, out, [&] {
    const auto sc = cfg.scenario();
    const auto data = simcloud::run_all(sc);
    simcloud::export_dataset(data, out / "dataset.csv");
    std::cout << "wrote " << data.samples.size() << " samples x " << data.metric_names.size()
              << " metrics to " << (out / "dataset.csv").string() << "\n";
  });
}

struct PrepArgs {
  std::string data, preprocess;
};

int cmd_prep(const Common& common, const PrepArgs& a) {
  require(a.data, "--data");
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  return with_manifest("prep", common.config, cfg, out, [&] {
    const auto l = load_dataset(a.data, cfg);
    dataprep::PreprocessModel prep;
    if (!a.preprocess.empty()) {
      prep = pipeline::preprocess_from_json(read_json(a.preprocess));
    } else {
      const auto eligible = pipeline::eligible_samples(l.data, cfg.pipeline.window);
      prep = dataprep::fit_preprocess(dataprep::to_table(l.data, eligible));
    }
    const auto fs = dataprep::build_features(l.data, l.labels, prep, cfg.pipeline.window);
    dataprep::write_features(fs, out / "features.csv");
    write_json(out / "preprocess.json", pipeline::to_json(prep));
    std::cout << "wrote " << fs.rows() << " rows x " << fs.names.size() << " features\n";
  });
}

struct TrainArgs {
  std::string stage, data, source, target, dae, columns;
  int epochs = -1;
};

dataprep::FeatureSet load_features(const std::string& path, const std::string& columns) {
  auto fs = dataprep::read_features(path);
  if (!columns.empty()) {
    const auto names = split_list(columns);
    fs = dataprep::select_columns(fs, columns_by_name(fs.names, names));
  }
  return fs;
}

int cmd_train(const Common& common, const TrainArgs& a) {
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  if (a.stage == "dadae") {
    if (a.source.empty() || a.target.empty()) {
      throw UsageError("train --stage dadae needs both --source and --target");
    }
  } else if (a.stage == "dae" || a.stage == "gbt" || a.stage == "bagged") {
    require(a.data, "--data");
  } else {
    throw UsageError("unknown stage: " + a.stage + " (dae, dadae, gbt, bagged)");
  }
  return with_manifest("train", common.config, cfg, out, [&] {
    auto tcfg = a.stage == "dadae" ? cfg.pipeline.dadae : cfg.pipeline.dae;
    if (a.epochs >= 0) tcfg.epochs = a.epochs;
    if (a.stage == "dae") {
      const auto fs = load_features(a.data, a.columns);
      const auto pairs = dataprep::make_dae_pairs(fs);
      const auto m = neural::train_dae(pairs.noisy, pairs.clean, cfg.pipeline.arch, tcfg);
      auto j = neural::to_json(m);
      j["features"] = fs.names;
      write_json(out / "model.json", j);
      write_dae_log(m.log, out / "train_log.csv");
      if (!m.log.empty()) std::cout << "final recon MSE " << m.log.back().recon_mse << "\n";
    } else if (a.stage == "dadae") {
      const auto src = load_features(a.source, a.columns);
      auto tgt = dataprep::read_features(a.target);
      tgt = dataprep::select_columns(tgt, columns_by_name(tgt.names, src.names));
      const auto pairs = dataprep::make_dae_pairs(src);
      const auto m = neural::train_dadae(pairs.noisy, pairs.clean, tgt.X, cfg.pipeline.arch, tcfg);
      auto j = neural::to_json(m);
      j["features"] = src.names;
      write_json(out / "model.json", j);
      write_dae_log(m.log, out / "train_log.csv");
      if (!m.log.empty()) {
        std::cout << "final recon MSE " << m.log.back().recon_mse << ", domain accuracy "
                  << m.log.back().domain_acc << "\n";
      }
    } else {
      auto fs = dataprep::read_features(a.data);
      const auto y = fs.meta.empty() ? std::vector<double>{} : [&] {
        std::vector<double> v;
        for (const auto& m : fs.meta) v.push_back(m.label);
        return v;
      }();
      json j;
      std::vector<std::string> input_names;
      Eigen::MatrixXd Z;
      std::optional<json> dae_json;
      if (!a.dae.empty()) {
        const auto dj = read_json(a.dae);
        const auto dae = neural::dae_from_json(dj);
        const auto names = dj.at("features").get<std::vector<std::string>>();
        const Eigen::MatrixXd X = pipeline::columns_of(fs.X, columns_by_name(fs.names, names));
        Z = pipeline::concat(X, neural::denoise(dae, X));
        input_names = names;
        for (const auto& n : names) input_names.push_back("dae:" + n);
        dae_json = dj;
      } else {
        if (!a.columns.empty()) fs = load_features(a.data, a.columns);
        Z = fs.X;
        input_names = fs.names;
      }
      gbt::TreeEnsemble model;
      if (a.stage == "bagged") {
        model = gbt::fit_bagged(Z, y, cfg.pipeline.bagging);
      } else {
        gbt::GbtConfig best = cfg.pipeline.gbt;
        if (cfg.pipeline.grid_search) {
          const auto gs = pipeline::tune_gbt(Z, y, cfg.pipeline);
          best = gs.best;
          evalkit::write_cv_table(gs.table, out / "cv.csv");
          std::cout << "tuned " << best.describe() << "\n";
        }
        model = gbt::fit_gbt(Z, y, best);
      }
      j = gbt::to_json(model);
      j["features"] = input_names;
      if (dae_json) j["dae"] = *dae_json;
      write_json(out / "model.json", j);
      csv::Table log;
      log.header = {"trees", "train_mae"};
      const auto pred = model.predict(Z);
      double err = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) err += std::abs(pred(static_cast<Eigen::Index>(i)) - y[i]);
      const double train_mae = y.empty() ? 0.0 : err / static_cast<double>(y.size());
      log.rows.push_back({std::to_string(model.trees.size()), format_double(train_mae)});
      csv::write(out / "train_log.csv", log);
      std::cout << "trained " << model.trees.size() << " trees, train MAE " << train_mae << "\n";
    }
  });
}

struct EvalArgs {
  std::string data, protocol = "offline_8_2", methods, model;
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  require(a.data, "--data");
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  const auto protocol = evalkit::protocol_from_name(a.protocol);
  return with_manifest("eval", common.config, cfg, out, [&] {
    const auto l = load_dataset(a.data, cfg);
    if (!a.model.empty()) {
      const auto j = read_json(a.model);
      if (model_kind(j) != "alioth") throw UsageError("eval --model needs an alioth model");
      const auto m = pipeline::alioth_from_json(j);
      const auto v = view(m, l);
      const auto est = to_vec(m.gbt.predict(v.Z));
      evalkit::EvalReport r;
      r.protocol = protocol;
      r.methods = {"model"};
      std::map<std::string, std::pair<double, std::size_t>> acc;
      for (std::size_t i = 0; i < v.fs.rows(); ++i) {
        const auto& meta = v.fs.meta[i];
        r.predictions.push_back({meta.sample, meta.app, "model", meta.label, est[i]});
        acc[meta.app].first += std::abs(meta.label - est[i]);
        acc[meta.app].second += 1;
      }
      double sum = 0.0;
      for (const auto& [app, e] : acc) {
        r.apps.push_back(app);
        r.mae["model"][app] = e.first / static_cast<double>(e.second);
        sum += r.mae["model"][app];
      }
      r.mean_mae["model"] = acc.empty() ? 0.0 : sum / static_cast<double>(acc.size());
      fs::create_directories(out);
      evalkit::write_mae_table(r, out / "mae.csv");
      evalkit::write_predictions(r, out / "predictions.csv");
      std::cout << "model mean MAE " << r.mean_mae["model"] << "\n";
      return;
    }
    const auto methods = a.methods.empty() ? evalkit::default_methods(protocol) : split_list(a.methods);
    const auto r = evalkit::run_protocol(l.data, l.labels, protocol, methods, cfg.pipeline);
    write_report(r, out);
    std::cout << evalkit::summary_text(r);
  });
}

struct ExplainArgs {
  std::string model, data, method = "path";
  std::size_t limit = 100;
  std::size_t background = 100;
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

// Estimator inputs and metadata for explain/attribute, from either model kind.
struct Explained {
  gbt::TreeEnsemble ensemble;
  std::vector<std::string> names;
  Eigen::MatrixXd Z;
  std::vector<dataprep::RowMeta> meta;
  std::optional<pipeline::AliothModel> alioth;
};

Explained load_explained(const std::string& model_path, const std::string& data_path,
                         const RunConfig& cfg) {
  const auto j = read_json(model_path);
  const auto kind = model_kind(j);
  Explained e;
  if (kind == "alioth") {
    auto m = pipeline::alioth_from_json(j);
    const auto v = view(m, load_dataset(data_path, cfg));
    e.ensemble = m.gbt;
    e.names = m.input_names();
    e.Z = v.Z;
    e.meta = v.fs.meta;
    e.alioth = std::move(m);
  } else if (kind == "tree_ensemble") {
    const auto t = tree_from_json(j);
    const auto fs = dataprep::read_features(data_path);
    e.ensemble = t.ensemble;
    e.Z = tree_inputs(t, fs);
    e.names = t.features;
    if (e.names.empty()) {
      for (std::size_t i = 0; i < t.ensemble.n_features; ++i) e.names.push_back("f" + std::to_string(i));
    }
    e.meta = fs.meta;
  } else {
    throw UsageError("not a tree model (kind \"" + kind + "\")");
  }
  return e;
}

int cmd_explain(const Common& common, const ExplainArgs& a) {
  require(a.model, "--model");
  require(a.data, "--data");
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  explain::ShapMethod method;
  if (a.method == "path") method = explain::ShapMethod::PathDependent;
  else if (a.method == "interventional") method = explain::ShapMethod::Interventional;
  else throw UsageError("unknown SHAP method: " + a.method + " (path, interventional)");
  const auto e = load_explained(a.model, a.data, cfg);
  return with_manifest("explain", common.config, cfg, out, [&] {
    const auto all = iota_rows(e.meta.size());
    const auto rows = pipeline::sample_rows(all, a.limit, derive_seed(cfg.seed, hash_tag("explain")));
    const auto bg_rows = pipeline::sample_rows(all, a.background, derive_seed(cfg.seed, hash_tag("background")));
    const Eigen::MatrixXd bg = pipeline::rows_of(e.Z, bg_rows);
    std::vector<explain::ShapRow> out_rows(rows.size());
    parallel_for(rows.size(), cfg.pipeline.jobs, [&](std::size_t i) {
      const auto x = row_vec(e.Z, static_cast<Eigen::Index>(rows[i]));
      const auto s = explain::shap_tree(e.ensemble, x, bg, method);
      out_rows[i] = {std::to_string(e.meta[rows[i]].sample), s.phi, s.base_value,
                     e.ensemble.predict_row(x)};
    });
    explain::write_shap_csv(out / "shap.csv", e.names, out_rows);
    std::cout << "explained " << rows.size() << " rows over " << e.names.size() << " inputs\n";
  });
}

int cmd_attribute(const Common& common, const ExplainArgs& a) {
  require(a.model, "--model");
  require(a.data, "--data");
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  const double threshold = std::isnan(a.threshold) ? cfg.pipeline.threshold : a.threshold;
  const auto e = load_explained(a.model, a.data, cfg);
  if (!e.alioth) throw UsageError("attribution needs an alioth model (per-SoI inputs are model features)");
  return with_manifest("attribute", common.config, cfg, out, [&] {
    const auto weights = pipeline::fit_soi_weights(e.Z, e.meta, cfg.pipeline.attribution_k);
    const auto est = to_vec(e.ensemble.predict(e.Z));
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < est.size(); ++i) {
      if (est[i] > threshold) flagged.push_back(i);
    }
    std::vector<explain::AttributionRow> rows(flagged.size());
    parallel_for(flagged.size(), cfg.pipeline.jobs, [&](std::size_t k) {
      const std::size_t i = flagged[k];
      const auto s = explain::shap_path_dependent(e.ensemble, row_vec(e.Z, static_cast<Eigen::Index>(i)));
      rows[k] = {std::to_string(e.meta[i].sample), explain::attribute(s.phi, weights),
                 evalkit::single_soi(e.meta[i].soi)};
    });
    explain::write_attribution_csv(out / "attribution.csv", rows);
    std::size_t labelled = 0, correct = 0;
    for (const auto& r : rows) {
      if (!r.truth) continue;
      ++labelled;
      if (r.result.defined && r.result.top1 == *r.truth) ++correct;
    }
    std::cout << rows.size() << " rows flagged at threshold " << threshold << "\n";
    if (labelled) {
      std::cout << "top-1 accuracy " << static_cast<double>(correct) / static_cast<double>(labelled)
                << " over " << labelled << " single-SoI rows\n";
    }
  });
}

struct BaselineArgs {
  std::string data, mode = "best_effort";
};

int cmd_baseline(const Common& common, const BaselineArgs& a) {
  require(a.data, "--data");
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  baselines::CpiMode mode;
  if (a.mode == "best_possible") mode = baselines::CpiMode::BestPossible;
  else if (a.mode == "best_effort") mode = baselines::CpiMode::BestEffort;
  else throw UsageError("unknown baseline mode: " + a.mode + " (best_possible, best_effort)");
  return with_manifest("baseline", common.config, cfg, out, [&] {
    const auto l = load_dataset(a.data, cfg);
    const auto all = iota_rows(l.data.samples.size());
    const auto model = mode == baselines::CpiMode::BestPossible
                           ? baselines::fit_best_possible(l.data, all)
                           : baselines::fit_best_effort(l.data, all, cfg.pipeline.cpi);
    std::vector<baselines::BaselinePrediction> rows;
    std::vector<double> est;
    for (std::size_t i : all) {
      est.push_back(model.predict(l.data.samples[i]));
      rows.push_back({i, est.back(), mode});
    }
    baselines::write_predictions(out / "baseline.csv", rows);
    std::cout << a.mode << " MAE " << evalkit::mae(l.labels, est) << " over " << rows.size()
              << " samples\n";
  });
}

struct SweepArgs {
  std::string predictions, method = evalkit::method::kAliothDae, thresholds;
};

int cmd_sweep(const Common& common, const SweepArgs& a) {
  require(a.predictions, "--predictions");
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  const auto thresholds = a.thresholds.empty()
                              ? std::vector<double>(evalkit::kSweepThresholds.begin(),
                                                    evalkit::kSweepThresholds.end())
                              : to_doubles(a.thresholds);
  return with_manifest("sweep", common.config, cfg, out, [&] {
    const auto t = csv::read(a.predictions);
    const auto cm = t.column("method"), cd = t.column("D"), ch = t.column("D_hat");
    std::vector<double> d, dhat;
    for (const auto& row : t.rows) {
      if (row.at(cm) != a.method) continue;
      d.push_back(parse_double(row.at(cd)));
      dhat.push_back(parse_double(row.at(ch)));
    }
    if (d.empty()) throw UsageError("no predictions for method " + a.method);
    const auto s = evalkit::threshold_sweep(d, dhat, thresholds);
    evalkit::write_sweep(s, out / "sweep.csv");
    std::cout << "f1 volatility " << s.f1_volatility << ", accuracy volatility "
              << s.accuracy_volatility << "\n";
  });
}

struct ReproArgs {
  std::string compare;
};

int cmd_repro(const Common& common, const ReproArgs& a) {
  const auto cfg = common.resolve();
  const auto out = resolve_output(common.out, "run");
  return with_manifest("repro-all", common.config, cfg, out, [&] {
    const auto r = repro_all(cfg, out, a.compare.empty() ? std::nullopt
                                                         : std::optional<fs::path>(a.compare));
    for (const auto& c : r.criteria) std::cout << acceptance::format_line(c) << "\n";
    std::cout << "repro-all finished in " << r.seconds << " s\n";
  });
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Co-location interference degradation estimator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", version_string());

  Common common;
  app.add_option("--config", common.config, "INI configuration file");
  app.add_option("--seed", common.seed, "Run seed (overrides the config)");
  app.add_option("--out", common.out, "Output directory (default: $OUTPUT_DIR, else ./run)");
  app.add_option("--jobs", common.jobs, "Worker threads");

  auto* gen = app.add_subcommand("gen", "Generate a synthetic telemetry dataset");

  PrepArgs prep_args;
  auto* prep = app.add_subcommand("prep", "Preprocess and window a dataset into features");
  prep->add_option("--data", prep_args.data, "Dataset CSV");
  prep->add_option("--preprocess", prep_args.preprocess, "Reuse a fitted preprocess.json");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one model stage");
  train->add_option("--stage", train_args.stage, "dae, dadae, gbt or bagged")->required();
  train->add_option("--data", train_args.data, "Features CSV");
  train->add_option("--source", train_args.source, "Source features CSV (dadae)");
  train->add_option("--target", train_args.target, "Target features CSV (dadae)");
  train->add_option("--dae", train_args.dae, "Trained DAE model; adds denoised inputs (gbt, bagged)");
  train->add_option("--columns", train_args.columns, "Comma-separated feature subset");
  train->add_option("--epochs", train_args.epochs, "Override the epoch count");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Run an evaluation protocol");
  eval->add_option("--data", eval_args.data, "Dataset CSV");
  eval->add_option("--protocol", eval_args.protocol, "offline_8_2, leave_one_app_out or oracle_dae");
  eval->add_option("--methods", eval_args.methods, "Comma-separated methods");
  eval->add_option("--model", eval_args.model, "Score a saved alioth model instead");

  ExplainArgs explain_args;
  auto* expl = app.add_subcommand("explain", "Shapley values of a tree model");
  expl->add_option("--model", explain_args.model, "alioth or tree_ensemble model JSON");
  expl->add_option("--data", explain_args.data, "Dataset CSV (alioth) or features CSV (tree_ensemble)");
  expl->add_option("--limit", explain_args.limit, "Rows to explain");
  expl->add_option("--background", explain_args.background, "Background rows");
  expl->add_option("--method", explain_args.method, "path or interventional");

  ExplainArgs attr_args;
  auto* attr = app.add_subcommand("attribute", "Attribute flagged violations to sources of interference");
  attr->add_option("--model", attr_args.model, "alioth model JSON");
  attr->add_option("--data", attr_args.data, "Dataset CSV");
  attr->add_option("--threshold", attr_args.threshold, "Violation threshold on D (default 0.05)");

  BaselineArgs base_args;
  auto* base = app.add_subcommand("baseline", "CPI-based degradation estimates");
  base->add_option("--data", base_args.data, "Dataset CSV");
  base->add_option("--mode", base_args.mode, "best_possible or best_effort");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Violation detection across thresholds");
  sweep->add_option("--predictions", sweep_args.predictions, "predictions.csv from eval");
  sweep->add_option("--method", sweep_args.method, "Method to score");
  sweep->add_option("--thresholds", sweep_args.thresholds, "Comma-separated thresholds");

  ReproArgs repro_args;
  auto* repro = app.add_subcommand("repro-all", "Full pipeline with acceptance summary");
  repro->add_option("--compare", repro_args.compare, "Previous run directory for the determinism check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(common);
    if (prep->parsed()) return cmd_prep(common, prep_args);
    if (train->parsed()) return cmd_train(common, train_args);
    if (eval->parsed()) return cmd_eval(common, eval_args);
    if (expl->parsed()) return cmd_explain(common, explain_args);
    if (attr->parsed()) return cmd_attribute(common, attr_args);
    if (base->parsed()) return cmd_baseline(common, base_args);
    if (sweep->parsed()) return cmd_sweep(common, sweep_args);
    if (repro->parsed()) return cmd_repro(common, repro_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed model: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace alioth::cli
