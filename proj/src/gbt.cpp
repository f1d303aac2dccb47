#include "alioth/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "alioth/dataprep.hpp"
#include "alioth/parallel.hpp"

namespace alioth::gbt {
namespace {

constexpr double kMinGain = 1e-12;

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return lo < mid ? mid : hi;
}

std::vector<std::size_t> sample_features(std::size_t n_features, double colsample, Rng& rng) {
  std::vector<std::size_t> idx(n_features);
  std::iota(idx.begin(), idx.end(), 0);
  if (colsample >= 1.0) return idx;
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(colsample * static_cast<double>(n_features) + 0.5)));
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, n_features - i)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Leaf reached by row r of X, read in place.
int leaf_of_row(const RegressionTree& t, const Eigen::MatrixXd& X, Eigen::Index r) {
  std::size_t node = 0;
  while (t.feature[node] >= 0) {
    node = static_cast<std::size_t>(X(r, t.feature[node]) < t.threshold[node] ? t.left[node] : t.right[node]);
  }
  return static_cast<int>(node);
}

std::span<const double> row_of(const Eigen::MatrixXd& X, Eigen::Index r, std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) buf[static_cast<std::size_t>(c)] = X(r, c);
  return buf;
}

// Rows of X restricted to `rows`, in that order.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void check_targets(std::span<const double> y) {
  for (double v : y) {
    if (!std::isfinite(v)) throw UsageError("non-finite regression target");
  }
}

nlohmann::json tree_json(const RegressionTree& t) {
  return {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left},
          {"right", t.right},     {"value", t.value},         {"cover", t.cover},
          {"max_depth", t.max_depth}};
}

RegressionTree tree_from(const nlohmann::json& j) {
  RegressionTree t;
  t.feature = j.at("feature").get<std::vector<int>>();
  t.threshold = j.at("threshold").get<std::vector<double>>();
  t.left = j.at("left").get<std::vector<int>>();
  t.right = j.at("right").get<std::vector<int>>();
  t.value = j.at("value").get<std::vector<double>>();
  t.cover = j.at("cover").get<std::vector<double>>();
  t.max_depth = j.at("max_depth").get<int>();
  const std::size_t n = t.feature.size();
  if (t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
      t.value.size() != n || t.cover.size() != n) {
    throw UsageError("malformed tree: node arrays differ in length");
  }
  return t;
}

}  // namespace

double RegressionTree::predict(std::span<const double> row) const {
  return value[static_cast<std::size_t>(leaf_of(row))];
}

int RegressionTree::leaf_of(std::span<const double> row) const {
  std::size_t node = 0;
  while (feature[node] >= 0) {
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[node])] < threshold[node]
                                        ? left[node]
                                        : right[node]);
  }
  return static_cast<int>(node);
}

int RegressionTree::depth() const {
  std::vector<int> d(n_nodes(), 0);
  int best = 0;
  for (std::size_t n = 0; n < n_nodes(); ++n) {
    if (feature[n] >= 0) {
      d[static_cast<std::size_t>(left[n])] = d[n] + 1;
      d[static_cast<std::size_t>(right[n])] = d[n] + 1;
    }
    best = std::max(best, d[n]);
  }
  return best;
}

double TreeEnsemble::tree_weight() const {
  if (mode == EnsembleMode::Bagged) return trees.empty() ? 0.0 : 1.0 / static_cast<double>(trees.size());
  return eta;
}

double TreeEnsemble::predict_row(std::span<const double> row) const {
  if (row.size() != n_features) throw UsageError("feature dimension mismatch");
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(row);
  if (mode == EnsembleMode::Bagged) return trees.empty() ? base_score : sum / trees.size();
  return base_score + eta * sum;
}

Eigen::VectorXd TreeEnsemble::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_features) {
    throw UsageError("feature dimension mismatch: model expects " + std::to_string(n_features) +
                     ", got " + std::to_string(X.cols()));
  }
  Eigen::VectorXd out(X.rows());
  std::vector<double> buf;
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(row_of(X, r, buf));
  return out;
}

void GbtConfig::validate() const {
  if (n_trees < 0) throw UsageError("n_trees must be >= 0");
  if (max_depth < 0) throw UsageError("max_depth must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw UsageError("subsample must be in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) throw UsageError("colsample must be in (0, 1]");
  if (!(eta > 0.0 && eta <= 1.0)) throw UsageError("eta must be in (0, 1]");
  if (!(reg_lambda >= 0.0)) throw UsageError("reg_lambda must be >= 0");
  if (!(min_child_weight >= 0.0)) throw UsageError("min_child_weight must be >= 0");
}

std::string GbtConfig::describe() const {
  std::ostringstream s;
  s << "n_trees=" << n_trees << ";max_depth=" << max_depth
    << ";min_child_weight=" << format_double(min_child_weight)
    << ";subsample=" << format_double(subsample) << ";colsample=" << format_double(colsample)
    << ";reg_lambda=" << format_double(reg_lambda) << ";eta=" << format_double(eta);
  return s.str();
}

SortedColumns::SortedColumns(const Eigen::MatrixXd& X) {
  order.resize(static_cast<std::size_t>(X.cols()));
  values.resize(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    auto& o = order[static_cast<std::size_t>(c)];
    o.resize(static_cast<std::size_t>(X.rows()));
    std::iota(o.begin(), o.end(), 0U);
    const double* col = X.col(c).data();
    std::stable_sort(o.begin(), o.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    auto& v = values[static_cast<std::size_t>(c)];
    v.resize(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) v[i] = col[o[i]];
  }
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, const SortedColumns& sorted,
                        std::span<const double> g, std::span<const double> h, int max_depth,
                        double min_child_weight, double reg_lambda,
                        std::span<const std::size_t> features) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0) throw UsageError("fit_tree: empty input");
  if (g.size() != n || h.size() != n) throw UsageError("fit_tree: gradient length mismatch");
  std::vector<std::size_t> all;
  if (features.empty()) {
    all.resize(static_cast<std::size_t>(X.cols()));
    std::iota(all.begin(), all.end(), 0);
    features = all;
  }

  RegressionTree tree;
  tree.max_depth = max_depth;
  std::vector<double> G, H;
  auto add_node = [&](double gs, double hs) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(0.0);
    tree.cover.push_back(hs);
    G.push_back(gs);
    H.push_back(hs);
    return static_cast<int>(tree.feature.size() - 1);
  };

  std::vector<int> pos(n, -1), row_slot(n, -1);
  double g0 = 0.0, h0 = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (h[r] != 0.0 || g[r] != 0.0) {
      pos[r] = 0;
      g0 += g[r];
      h0 += h[r];
    }
  }
  add_node(g0, h0);

  struct Best {
    double gain = kMinGain;
    int feature = -1;
    double threshold = 0.0;
  };
  std::vector<int> frontier = {0};
  for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
    std::vector<int> local(tree.n_nodes(), -1);
    for (std::size_t k = 0; k < frontier.size(); ++k) local[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);
    const std::size_t nf = frontier.size();
    // Frontier slot, gradient and hessian per row; slot -1 skips the row.
    for (std::size_t r = 0; r < n; ++r) {
      row_slot[r] = pos[r] < 0 ? -1 : local[static_cast<std::size_t>(pos[r])];
    }
    std::vector<Best> best(nf);
    std::vector<double> gl(nf), hl(nf), last(nf), gtot(nf), htot(nf);
    for (std::size_t k = 0; k < nf; ++k) {
      gtot[k] = G[static_cast<std::size_t>(frontier[k])];
      htot[k] = H[static_cast<std::size_t>(frontier[k])];
    }
    std::vector<char> seen(nf);
    for (std::size_t f : features) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      const auto& ord = sorted.order[f];
      const double* vals = sorted.values[f].data();
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t r = ord[i];
        const int li = row_slot[r];
        if (li < 0) continue;
        const auto k = static_cast<std::size_t>(li);
        const double v = vals[i];
        if (seen[k] && v != last[k]) {
          const double hleft = hl[k], hright = htot[k] - hleft;
          if (hleft > 0.0 && hright > 0.0 && hleft >= min_child_weight &&
              hright >= min_child_weight) {
            const double gain = split_gain(gl[k], hleft, gtot[k] - gl[k], hright, reg_lambda);
            if (gain > best[k].gain) best[k] = {gain, static_cast<int>(f), midpoint(last[k], v)};
          }
        }
        gl[k] += g[r];
        hl[k] += h[r];
        last[k] = v;
        seen[k] = 1;
      }
    }

    std::vector<int> next;
    for (std::size_t k = 0; k < nf; ++k) {
      if (best[k].feature < 0) continue;
      const auto node = static_cast<std::size_t>(frontier[k]);
      tree.feature[node] = best[k].feature;
      tree.threshold[node] = best[k].threshold;
      tree.left[node] = add_node(0.0, 0.0);
      tree.right[node] = add_node(0.0, 0.0);
      next.push_back(tree.left[node]);
      next.push_back(tree.right[node]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (pos[r] < 0) continue;
      const auto node = static_cast<std::size_t>(pos[r]);
      if (local.size() <= node || local[node] < 0 || tree.feature[node] < 0) continue;
      const int child = X(static_cast<Eigen::Index>(r), tree.feature[node]) < tree.threshold[node]
                            ? tree.left[node]
                            : tree.right[node];
      pos[r] = child;
      G[static_cast<std::size_t>(child)] += g[r];
      H[static_cast<std::size_t>(child)] += h[r];
      tree.cover[static_cast<std::size_t>(child)] += h[r];
    }
    frontier = std::move(next);
  }
  for (std::size_t node = 0; node < tree.n_nodes(); ++node) {
    if (tree.feature[node] < 0) {
      const double denom = H[node] + reg_lambda;
      tree.value[node] = denom > 0.0 ? -G[node] / denom : 0.0;
    }
  }
  return tree;
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, std::span<const double> g,
                        std::span<const double> h, const GbtConfig& cfg, Rng& rng) {
  cfg.validate();
  if (X.rows() == 0) throw UsageError("fit_tree: empty input");
  const SortedColumns sorted(X);
  const auto features = sample_features(static_cast<std::size_t>(X.cols()), cfg.colsample, rng);
  return fit_tree(X, sorted, g, h, cfg.max_depth, cfg.min_child_weight, cfg.reg_lambda, features);
}

TreeEnsemble fit_gbt(const Eigen::MatrixXd& X, std::span<const double> y, const GbtConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw UsageError("fit_gbt needs at least 2 rows");
  if (y.size() != n) throw UsageError("fit_gbt: target length mismatch");
  check_targets(y);

  TreeEnsemble ens;
  ens.mode = EnsembleMode::Boosted;
  ens.eta = cfg.eta;
  ens.n_features = static_cast<std::size_t>(X.cols());
  ens.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  const SortedColumns sorted(X);
  Rng rng(derive_seed(cfg.seed, hash_tag("gbt")));
  std::vector<double> pred(n, ens.base_score), g(n), h(n);
  std::vector<double> buf;
  for (int round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      const bool keep = cfg.subsample >= 1.0 || uniform01(rng) < cfg.subsample;
      g[r] = keep ? pred[r] - y[r] : 0.0;
      h[r] = keep ? 1.0 : 0.0;
    }
    const auto features = sample_features(ens.n_features, cfg.colsample, rng);
    RegressionTree tree = fit_tree(X, sorted, g, h, cfg.max_depth, cfg.min_child_weight,
                                   cfg.reg_lambda, features);
    for (std::size_t r = 0; r < n; ++r) {
      pred[r] += cfg.eta * tree.value[static_cast<std::size_t>(leaf_of_row(tree, X, static_cast<Eigen::Index>(r)))];
    }
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

TreeEnsemble fit_bagged(const Eigen::MatrixXd& X, std::span<const double> y,
                        const BaggingConfig& cfg) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw UsageError("fit_bagged needs at least 2 rows");
  if (y.size() != n) throw UsageError("fit_bagged: target length mismatch");
  if (cfg.n_trees <= 0) throw UsageError("fit_bagged needs at least one tree");
  check_targets(y);
  TreeEnsemble ens;
  ens.mode = EnsembleMode::Bagged;
  ens.eta = 1.0;
  ens.n_features = static_cast<std::size_t>(X.cols());
  const SortedColumns sorted(X);
  Rng rng(derive_seed(cfg.seed, hash_tag("bagging")));
  std::vector<double> g(n), h(n);
  for (int t = 0; t < cfg.n_trees; ++t) {
    std::fill(h.begin(), h.end(), cfg.bootstrap ? 0.0 : 1.0);
    if (cfg.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) h[uniform_index(rng, n)] += 1.0;
    }
    for (std::size_t r = 0; r < n; ++r) g[r] = -h[r] * y[r];
    ens.trees.push_back(
        fit_tree(X, sorted, g, h, cfg.max_depth, cfg.min_child_weight, 0.0, {}));
  }
  return ens;
}

std::vector<double> f_values(const Eigen::MatrixXd& X, std::span<const double> y) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (y.size() != n) throw UsageError("f_values: target length mismatch");
  if (n < 3) throw UsageError("f_values needs at least 3 rows");
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const double syy = yc.squaredNorm();
  std::vector<double> out(static_cast<std::size_t>(X.cols()), 0.0);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const Eigen::VectorXd xc = X.col(c).array() - X.col(c).mean();
    const double sxx = xc.squaredNorm();
    if (sxx <= 0.0 || syy <= 0.0) continue;
    const double r = xc.dot(yc) / std::sqrt(sxx * syy);
    const double r2 = std::min(r * r, 1.0);
    out[static_cast<std::size_t>(c)] =
        r2 >= 1.0 ? std::numeric_limits<double>::infinity()
                  : r2 / (1.0 - r2) * static_cast<double>(n - 2);
  }
  return out;
}

std::vector<std::size_t> select_k_best(const Eigen::MatrixXd& X, std::span<const double> y,
                                       int k) {
  if (k <= 0) throw UsageError("select_k_best: k must be positive");
  if (k > X.cols()) throw UsageError("select_k_best: k exceeds feature count");
  const auto f = f_values(X, y);
  std::vector<std::size_t> idx(f.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&f](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

GbtGrid GbtGrid::singleton(const GbtConfig& cfg) {
  GbtGrid g;
  g.max_depth = {cfg.max_depth};
  g.min_child_weight = {cfg.min_child_weight};
  g.subsample = {cfg.subsample};
  g.colsample = {cfg.colsample};
  g.reg_lambda = {cfg.reg_lambda};
  g.eta = {cfg.eta};
  return g;
}

double cv_mae(const Eigen::MatrixXd& X, std::span<const double> y,
              const std::vector<std::vector<std::size_t>>& folds, const GbtConfig& cfg,
              std::vector<double>* per_fold) {
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<char> in_fold(n);
  double total = 0.0;
  if (per_fold) per_fold->clear();
  for (const auto& fold : folds) {
    std::fill(in_fold.begin(), in_fold.end(), 0);
    for (std::size_t r : fold) in_fold[r] = 1;
    std::vector<std::size_t> train;
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_fold[r]) train.push_back(r);
    }
    std::vector<double> ytrain;
    for (std::size_t r : train) ytrain.push_back(y[r]);
    const TreeEnsemble model = fit_gbt(take_rows(X, train), ytrain, cfg);
    const Eigen::VectorXd pred = model.predict(take_rows(X, fold));
    double err = 0.0;
    for (std::size_t i = 0; i < fold.size(); ++i) err += std::abs(pred(static_cast<Eigen::Index>(i)) - y[fold[i]]);
    err /= static_cast<double>(fold.size());
    if (per_fold) per_fold->push_back(err);
    total += err;
  }
  return total / static_cast<double>(folds.size());
}

GridSearchResult grid_search_3pass(const Eigen::MatrixXd& X, std::span<const double> y,
                                   const GbtGrid& grid, std::size_t k, std::uint64_t seed,
                                   const GbtConfig& base, int jobs) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < k) throw UsageError("grid search: fewer rows than folds");
  if (grid.max_depth.empty() || grid.min_child_weight.empty() || grid.subsample.empty() ||
      grid.colsample.empty() || grid.reg_lambda.empty() || grid.eta.empty()) {
    throw UsageError("grid search: every pass needs at least one candidate");
  }
  const auto folds = dataprep::kfold_indices(n, k, seed);
  GridSearchResult result;
  GbtConfig current = base;

  // Candidates are listed smallest capacity first; the first of equal
  // scores wins.
  auto run_pass = [&](int pass, std::vector<GbtConfig> candidates) {
    std::vector<std::vector<double>> fold_mae(candidates.size());
    std::vector<double> mean(candidates.size());
    parallel_for(candidates.size(), jobs, [&](std::size_t i) {
      mean[i] = cv_mae(X, y, folds, candidates[i], &fold_mae[i]);
    });
    std::size_t win = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        result.table.push_back({pass, candidates[i], f, fold_mae[i][f]});
      }
      if (mean[i] < mean[win] - 1e-12 * std::max(1.0, std::abs(mean[win]))) win = i;
    }
    current = candidates[win];
  };

  {
    auto depths = grid.max_depth;
    std::sort(depths.begin(), depths.end());
    auto mcw = grid.min_child_weight;
    std::sort(mcw.begin(), mcw.end(), std::greater<>());
    std::vector<GbtConfig> c;
    for (int d : depths) {
      for (double w : mcw) {
        GbtConfig cfg = current;
        cfg.max_depth = d;
        cfg.min_child_weight = w;
        c.push_back(cfg);
      }
    }
    run_pass(1, std::move(c));
  }
  {
    auto ss = grid.subsample;
    std::sort(ss.begin(), ss.end());
    auto cs = grid.colsample;
    std::sort(cs.begin(), cs.end());
    std::vector<GbtConfig> c;
    for (double s : ss) {
      for (double col : cs) {
        GbtConfig cfg = current;
        cfg.subsample = s;
        cfg.colsample = col;
        c.push_back(cfg);
      }
    }
    run_pass(2, std::move(c));
  }
  {
    auto lambdas = grid.reg_lambda;
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    auto etas = grid.eta;
    std::sort(etas.begin(), etas.end());
    std::vector<GbtConfig> c;
    for (double l : lambdas) {
      for (double e : etas) {
        GbtConfig cfg = current;
        cfg.reg_lambda = l;
        cfg.eta = e;
        c.push_back(cfg);
      }
    }
    run_pass(3, std::move(c));
  }
  result.best = current;
  return result;
}

nlohmann::json to_json(const GbtConfig& c) {
  return {{"n_trees", c.n_trees},         {"max_depth", c.max_depth},
          {"min_child_weight", c.min_child_weight}, {"subsample", c.subsample},
          {"colsample", c.colsample},     {"reg_lambda", c.reg_lambda},
          {"eta", c.eta},                 {"seed", c.seed}};
}

GbtConfig config_from_json(const nlohmann::json& j) {
  GbtConfig c;
  c.n_trees = j.at("n_trees").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.min_child_weight = j.at("min_child_weight").get<double>();
  c.subsample = j.at("subsample").get<double>();
  c.colsample = j.at("colsample").get<double>();
  c.reg_lambda = j.at("reg_lambda").get<double>();
  c.eta = j.at("eta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

nlohmann::json to_json(const TreeEnsemble& e) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : e.trees) trees.push_back(tree_json(t));
  return {{"kind", "tree_ensemble"},
          {"mode", e.mode == EnsembleMode::Boosted ? "boosted" : "bagged"},
          {"base_score", e.base_score},
          {"eta", e.eta},
          {"n_features", e.n_features},
          {"trees", trees}};
}

TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
  if (!j.contains("kind") || j.at("kind").get<std::string>() != "tree_ensemble") {
    throw UsageError("not a tree ensemble model");
  }
  TreeEnsemble e;
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "boosted" && mode != "bagged") throw UsageError("unknown ensemble mode: " + mode);
  e.mode = mode == "boosted" ? EnsembleMode::Boosted : EnsembleMode::Bagged;
  e.base_score = j.at("base_score").get<double>();
  e.eta = j.at("eta").get<double>();
  e.n_features = j.at("n_features").get<std::size_t>();
  for (const auto& t : j.at("trees")) e.trees.push_back(tree_from(t));
  return e;
}

}  // namespace alioth::gbt
