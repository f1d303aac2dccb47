#include "alioth/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alioth/csv.hpp"
#include "alioth/parallel.hpp"

namespace alioth::explain {
namespace {

struct PathElem {
  int feature = -1;
  double zero = 0.0;
  double one = 0.0;
  double pweight = 0.0;
};

void extend_path(std::vector<PathElem>& path, int depth, double zero, double one, int feature) {
  path[static_cast<std::size_t>(depth)] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    path[static_cast<std::size_t>(i + 1)].pweight += one * cur.pweight * (i + 1) / (depth + 1);
    cur.pweight = zero * cur.pweight * (depth - i) / (depth + 1);
  }
}

void unwind_path(std::vector<PathElem>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one;
  const double zero = path[static_cast<std::size_t>(index)].zero;
  double next = path[static_cast<std::size_t>(depth)].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = cur.pweight;
      cur.pweight = next * (depth + 1) / ((i + 1) * one);
      next = tmp - cur.pweight * zero * (depth - i) / (depth + 1);
    } else {
      cur.pweight = cur.pweight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& dst = path[static_cast<std::size_t>(i)];
    const auto& src = path[static_cast<std::size_t>(i + 1)];
    dst.feature = src.feature;
    dst.zero = src.zero;
    dst.one = src.one;
  }
}

double unwound_sum(const std::vector<PathElem>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one;
  const double zero = path[static_cast<std::size_t>(index)].zero;
  double next = path[static_cast<std::size_t>(depth)].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    const double pw = path[static_cast<std::size_t>(i)].pweight;
    if (one != 0.0) {
      const double tmp = next * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next = pw - tmp * zero * (depth - i) / static_cast<double>(depth + 1);
    } else if (zero != 0.0) {
      total += pw / zero / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

struct TreeShap {
  const gbt::RegressionTree& tree;
  std::span<const double> x;
  double scale;
  std::vector<double>& phi;

  void recurse(std::size_t node, std::vector<PathElem> path, int depth, double pzero, double pone,
               int pfeature) {
    extend_path(path, depth, pzero, pone, pfeature);
    if (tree.is_leaf(node)) {
      for (int i = 1; i <= depth; ++i) {
        const auto& el = path[static_cast<std::size_t>(i)];
        const double w = unwound_sum(path, depth, i);
        phi[static_cast<std::size_t>(el.feature)] +=
            scale * w * (el.one - el.zero) * tree.value[node];
      }
      return;
    }
    const int f = tree.feature[node];
    const auto l = static_cast<std::size_t>(tree.left[node]);
    const auto r = static_cast<std::size_t>(tree.right[node]);
    const bool go_left = x[static_cast<std::size_t>(f)] < tree.threshold[node];
    const std::size_t hot = go_left ? l : r;
    const std::size_t cold = go_left ? r : l;
    double izero = 1.0, ione = 1.0;
    for (int k = 1; k <= depth; ++k) {
      if (path[static_cast<std::size_t>(k)].feature == f) {
        izero = path[static_cast<std::size_t>(k)].zero;
        ione = path[static_cast<std::size_t>(k)].one;
        unwind_path(path, depth, k);
        --depth;
        break;
      }
    }
    const double cover = tree.cover[node];
    const double hot_frac = cover > 0.0 ? tree.cover[hot] / cover : 0.0;
    const double cold_frac = cover > 0.0 ? tree.cover[cold] / cover : 0.0;
    recurse(hot, path, depth + 1, izero * hot_frac, ione, f);
    recurse(cold, path, depth + 1, izero * cold_frac, 0.0, f);
  }
};

double tree_expectation(const gbt::RegressionTree& t, std::size_t node) {
  if (t.is_leaf(node)) return t.value[node];
  const auto l = static_cast<std::size_t>(t.left[node]);
  const auto r = static_cast<std::size_t>(t.right[node]);
  const double cover = t.cover[node];
  if (cover <= 0.0) return 0.5 * (tree_expectation(t, l) + tree_expectation(t, r));
  return (t.cover[l] * tree_expectation(t, l) + t.cover[r] * tree_expectation(t, r)) / cover;
}

// (p-1)! n! / (p+n)! and p! (n-1)! / (p+n)!.
double subset_weight(int a, int b) {
  return std::exp(std::lgamma(a + 1.0) + std::lgamma(b + 1.0) - std::lgamma(a + b + 2.0));
}

struct InterventionalShap {
  const gbt::RegressionTree& tree;
  std::span<const double> x;
  std::span<const double> z;
  double scale;
  std::vector<double>& phi;
  std::vector<signed char>& state;  // +1 in P (from x), -1 in N (from z)
  std::vector<int> in_p, in_n;

  void recurse(std::size_t node) {
    if (tree.is_leaf(node)) {
      const double v = scale * tree.value[node];
      const int p = static_cast<int>(in_p.size()), n = static_cast<int>(in_n.size());
      if (p > 0) {
        const double w = subset_weight(p - 1, n);
        for (int f : in_p) phi[static_cast<std::size_t>(f)] += v * w;
      }
      if (n > 0) {
        const double w = subset_weight(p, n - 1);
        for (int f : in_n) phi[static_cast<std::size_t>(f)] -= v * w;
      }
      return;
    }
    const int f = tree.feature[node];
    const auto fi = static_cast<std::size_t>(f);
    const auto l = static_cast<std::size_t>(tree.left[node]);
    const auto r = static_cast<std::size_t>(tree.right[node]);
    const std::size_t x_child = x[fi] < tree.threshold[node] ? l : r;
    const std::size_t z_child = z[fi] < tree.threshold[node] ? l : r;
    if (state[fi] > 0) return recurse(x_child);
    if (state[fi] < 0) return recurse(z_child);
    if (x_child == z_child) return recurse(x_child);
    state[fi] = 1;
    in_p.push_back(f);
    recurse(x_child);
    in_p.pop_back();
    state[fi] = -1;
    in_n.push_back(f);
    recurse(z_child);
    in_n.pop_back();
    state[fi] = 0;
  }
};

void check_dim(const gbt::TreeEnsemble& model, std::size_t n) {
  if (n != model.n_features) {
    throw UsageError("explanation input has " + std::to_string(n) + " features, model expects " +
                     std::to_string(model.n_features));
  }
}

double ensemble_offset(const gbt::TreeEnsemble& model) {
  return model.mode == gbt::EnsembleMode::Boosted || model.trees.empty() ? model.base_score : 0.0;
}

std::vector<std::size_t> top_by(const std::vector<double>& score, std::size_t n) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (score[i] > 0.0) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&score](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  if (idx.size() > n) idx.resize(n);
  return idx;
}

}  // namespace

double ShapExplanation::total() const {
  return base_value + std::accumulate(phi.begin(), phi.end(), 0.0);
}

double expected_value(const gbt::TreeEnsemble& model) {
  double sum = 0.0;
  for (const auto& t : model.trees) sum += tree_expectation(t, 0);
  return ensemble_offset(model) + model.tree_weight() * sum;
}

ShapExplanation shap_path_dependent(const gbt::TreeEnsemble& model, std::span<const double> x) {
  check_dim(model, x.size());
  ShapExplanation e;
  e.phi.assign(x.size(), 0.0);
  e.base_value = expected_value(model);
  const double w = model.tree_weight();
  for (const auto& t : model.trees) {
    std::vector<PathElem> path(static_cast<std::size_t>(t.depth()) + 2);
    TreeShap{t, x, w, e.phi}.recurse(0, std::move(path), 0, 1.0, 1.0, -1);
  }
  return e;
}

ShapExplanation shap_interventional(const gbt::TreeEnsemble& model, std::span<const double> x,
                                    const Eigen::MatrixXd& background) {
  check_dim(model, x.size());
  if (background.rows() == 0) throw UsageError("empty background set");
  check_dim(model, static_cast<std::size_t>(background.cols()));
  ShapExplanation e;
  e.phi.assign(x.size(), 0.0);
  const double w = model.tree_weight() / static_cast<double>(background.rows());
  std::vector<signed char> state(x.size(), 0);
  std::vector<double> z(x.size());
  double base = 0.0;
  for (Eigen::Index b = 0; b < background.rows(); ++b) {
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = background(b, static_cast<Eigen::Index>(c));
    base += model.predict_row(z);
    for (const auto& t : model.trees) {
      InterventionalShap{t, x, z, w, e.phi, state, {}, {}}.recurse(0);
    }
  }
  e.base_value = base / static_cast<double>(background.rows());
  return e;
}

ShapExplanation shap_tree(const gbt::TreeEnsemble& model, std::span<const double> x,
                          const Eigen::MatrixXd& background, ShapMethod method) {
  if (background.rows() == 0) throw UsageError("empty background set");
  if (method == ShapMethod::Interventional) return shap_interventional(model, x, background);
  return shap_path_dependent(model, x);
}

Eigen::MatrixXd shap_matrix(const gbt::TreeEnsemble& model, const Eigen::MatrixXd& X,
                            Eigen::VectorXd* base_values, int jobs) {
  check_dim(model, static_cast<std::size_t>(X.cols()));
  Eigen::MatrixXd phi(X.rows(), X.cols());
  if (base_values) base_values->resize(X.rows());
  parallel_for(static_cast<std::size_t>(X.rows()), jobs, [&](std::size_t r) {
    const auto ri = static_cast<Eigen::Index>(r);
    std::vector<double> x(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index c = 0; c < X.cols(); ++c) x[static_cast<std::size_t>(c)] = X(ri, c);
    const auto e = shap_path_dependent(model, x);
    for (Eigen::Index c = 0; c < X.cols(); ++c) phi(ri, c) = e.phi[static_cast<std::size_t>(c)];
    if (base_values) (*base_values)(ri) = e.base_value;
  });
  return phi;
}

GlobalImportance global_importance(const Eigen::MatrixXd& phi) {
  if (phi.rows() == 0) throw UsageError("global importance needs at least one explanation");
  GlobalImportance g;
  const double n = static_cast<double>(phi.rows());
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    const auto col = phi.col(c).array();
    g.mean_abs.push_back(col.abs().sum() / n);
    g.mean_pos.push_back(col.max(0.0).sum() / n);
    g.mean_neg.push_back((-col).max(0.0).sum() / n);
  }
  return g;
}

GlobalImportance global_importance(std::span<const ShapExplanation> explanations) {
  if (explanations.empty()) throw UsageError("global importance needs at least one explanation");
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(explanations.size()),
                      static_cast<Eigen::Index>(explanations[0].phi.size()));
  for (std::size_t r = 0; r < explanations.size(); ++r) {
    if (explanations[r].phi.size() != explanations[0].phi.size()) {
      throw UsageError("explanations differ in length");
    }
    for (std::size_t c = 0; c < explanations[r].phi.size(); ++c) {
      phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = explanations[r].phi[c];
    }
  }
  return global_importance(phi);
}

std::vector<std::size_t> select_features_cross_app(std::span<const GlobalImportance> per_app,
                                                   std::size_t top_n, std::size_t quorum) {
  if (per_app.size() < quorum) {
    throw UsageError("feature selection needs at least " + std::to_string(quorum) + " apps, got " +
                     std::to_string(per_app.size()));
  }
  if (per_app.empty()) return {};
  const std::size_t n = per_app[0].mean_pos.size();
  std::vector<std::size_t> votes(n, 0);
  for (const auto& g : per_app) {
    if (g.mean_pos.size() != n || g.mean_neg.size() != n) {
      throw UsageError("importance vectors differ in length");
    }
    std::vector<char> in(n, 0);
    for (std::size_t i : top_by(g.mean_pos, top_n)) in[i] = 1;
    for (std::size_t i : top_by(g.mean_neg, top_n)) in[i] = 1;
    for (std::size_t i = 0; i < n; ++i) votes[i] += static_cast<std::size_t>(in[i]);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (votes[i] > quorum) out.push_back(i);
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw UsageError("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::size_t> top_correlated_metrics(const Eigen::MatrixXd& X,
                                                std::span<const double> intensity,
                                                std::size_t k) {
  if (static_cast<std::size_t>(X.rows()) != intensity.size()) {
    throw UsageError("intensity length does not match rows");
  }
  const auto [lo, hi] = std::minmax_element(intensity.begin(), intensity.end());
  if (intensity.empty() || *lo == *hi) throw UsageError("interference intensity has zero variance");
  std::vector<double> r(static_cast<std::size_t>(X.cols()));
  std::vector<double> col(intensity.size());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) col[static_cast<std::size_t>(i)] = X(i, c);
    r[static_cast<std::size_t>(c)] = std::abs(pearson(col, intensity));
  }
  std::vector<std::size_t> idx(r.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&r](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

SoiWeightModel fit_iil(const Eigen::MatrixXd& X, std::span<const double> intensity, SoIKind soi,
                       std::span<const std::size_t> selected) {
  if (static_cast<std::size_t>(X.rows()) != intensity.size()) {
    throw UsageError("intensity length does not match rows");
  }
  if (selected.size() > intensity.size()) throw UsageError("more selected metrics than rows");
  Eigen::MatrixXd A(X.rows(), static_cast<Eigen::Index>(selected.size()));
  for (std::size_t j = 0; j < selected.size(); ++j) {
    if (selected[j] >= static_cast<std::size_t>(X.cols())) throw UsageError("metric index out of range");
    A.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(selected[j]));
  }
  const Eigen::Map<const Eigen::VectorXd> y(intensity.data(), static_cast<Eigen::Index>(intensity.size()));
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  const Eigen::VectorXd alpha = cod.solve(y);

  SoiWeightModel m;
  m.soi = soi;
  m.selected.assign(selected.begin(), selected.end());
  m.alpha.assign(alpha.data(), alpha.data() + alpha.size());
  m.rank_deficient = cod.rank() < A.cols();
  m.expanded.assign(static_cast<std::size_t>(X.cols()), 0.0);
  for (std::size_t j = 0; j < selected.size(); ++j) m.expanded[selected[j]] += m.alpha[j];
  return m;
}

AttributionResult attribute(std::span<const double> phi,
                            const std::array<SoiWeightModel, kNumSoI>& models) {
  AttributionResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumSoI; ++i) {
    const auto& w = models[i].expanded;
    if (w.size() != phi.size()) throw UsageError("weight model and explanation differ in length");
    double c = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) c += w[j] * phi[j];
    out.c[i] = c;
    sum += std::max(c, 0.0);
  }
  if (!(sum > 0.0)) return out;
  out.defined = true;
  std::size_t best = 0;
  for (std::size_t i = 0; i < kNumSoI; ++i) {
    out.c_tilde[i] = std::max(out.c[i], 0.0) / sum;
    if (out.c_tilde[i] > out.c_tilde[best]) best = i;
  }
  out.top1 = kAllSoI[best];
  return out;
}

void write_shap_csv(const std::filesystem::path& path, std::span<const std::string> feature_names,
                    std::span<const ShapRow> rows, double tol) {
  csv::Table t;
  t.header = {"sample", "feature", "phi"};
  for (const auto& r : rows) {
    if (r.phi.size() != feature_names.size()) throw UsageError("phi length does not match features");
    const double total = r.base_value + std::accumulate(r.phi.begin(), r.phi.end(), 0.0);
    if (!(std::abs(total - r.prediction) <= tol)) {
      throw NumericalError("local accuracy violated for sample " + r.sample);
    }
    t.rows.push_back({r.sample, "(base)", format_double(r.base_value)});
    for (std::size_t j = 0; j < r.phi.size(); ++j) {
      t.rows.push_back({r.sample, feature_names[j], format_double(r.phi[j])});
    }
  }
  csv::write(path, t);
}

void write_attribution_csv(const std::filesystem::path& path, std::span<const AttributionRow> rows) {
  csv::Table t;
  t.header = {"sample"};
  for (SoIKind s : kAllSoI) t.header.push_back("c_" + std::string(soi_name(s)));
  t.header.push_back("top1");
  t.header.push_back("truth");
  for (const auto& r : rows) {
    std::vector<std::string> row{r.sample};
    for (std::size_t i = 0; i < kNumSoI; ++i) {
      row.push_back(r.result.defined ? format_double(r.result.c_tilde[i]) : "");
    }
    row.push_back(r.result.defined ? std::string(soi_name(r.result.top1)) : "none");
    row.push_back(r.truth ? std::string(soi_name(*r.truth)) : "");
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

}  // namespace alioth::explain
