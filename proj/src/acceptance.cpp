#include "alioth/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "alioth/baselines.hpp"

namespace alioth::acceptance {
namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * standard_normal(rng);
  }
  return m;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6); }

// Compares analytic gradients against central differences of `loss` in
// the parameters of `net`.
double compare(neural::Mlp& net, const neural::Gradients& analytic,
               const std::function<double()>& loss) {
  constexpr double eps = 1e-5;
  auto params = net.flat();
  const auto g = analytic.flat();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + eps;
    net.set_flat(params);
    const double up = loss();
    params[i] = keep - eps;
    net.set_flat(params);
    const double down = loss();
    params[i] = keep;
    net.set_flat(params);
    worst = std::max(worst, rel_error(g[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

// Moves every parameter off zero so no ReLU unit sits exactly on its kink,
// where central differences are meaningless.
void jitter(neural::Mlp& net, Rng& rng) {
  auto p = net.flat();
  for (double& v : p) v += 0.1 * standard_normal(rng);
  net.set_flat(p);
}

double recon_loss(const neural::Mlp& enc, const neural::Mlp& dec, const Eigen::MatrixXd& x,
                  const Eigen::MatrixXd& y) {
  return neural::evaluate_loss(dec.forward(enc.forward(x)), y, neural::Loss::SquaredError).value;
}

double domain_loss(const neural::DadaeModel& m, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xt) {
  Eigen::MatrixXd h(m.encoder.output_dim(), xs.cols() + xt.cols());
  h << m.encoder.forward(xs), m.encoder.forward(xt);
  Eigen::MatrixXd labels(1, h.cols());
  labels.leftCols(xs.cols()).setZero();
  labels.rightCols(xt.cols()).setOnes();
  return neural::evaluate_loss(m.domain.forward(h), labels, neural::Loss::Logistic).value;
}

double tree_conditional(const gbt::RegressionTree& t, std::size_t node, const std::vector<double>& x,
                        unsigned mask) {
  if (t.is_leaf(node)) return t.value[node];
  const int f = t.feature[node];
  const auto l = static_cast<std::size_t>(t.left[node]);
  const auto r = static_cast<std::size_t>(t.right[node]);
  if (mask & (1U << f)) {
    return tree_conditional(t, x[static_cast<std::size_t>(f)] < t.threshold[node] ? l : r, x, mask);
  }
  const double c = t.cover[node];
  if (c <= 0.0) return 0.5 * (tree_conditional(t, l, x, mask) + tree_conditional(t, r, x, mask));
  return (t.cover[l] * tree_conditional(t, l, x, mask) + t.cover[r] * tree_conditional(t, r, x, mask)) / c;
}

std::vector<double> shapley_from_values(const std::vector<double>& v, std::size_t n) {
  std::vector<double> fact(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> phi(n, 0.0);
  for (unsigned s = 0; s < (1U << n); ++s) {
    const auto size = static_cast<std::size_t>(__builtin_popcount(s));
    for (std::size_t i = 0; i < n; ++i) {
      if (s & (1U << i)) continue;
      const double w = fact[size] * fact[n - size - 1] / fact[n];
      phi[i] += w * (v[s | (1U << i)] - v[s]);
    }
  }
  return phi;
}

gbt::TreeEnsemble random_ensemble(std::size_t features, int trees, int depth, Rng& rng,
                                  std::uint64_t seed) {
  const Eigen::MatrixXd X = random_matrix(300, static_cast<Eigen::Index>(features), rng);
  std::vector<double> y(300);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    y[static_cast<std::size_t>(i)] = std::sin(X(i, 0)) + X(i, 1) * X(i, features > 2 ? 2 : 0) +
                                     (X(i, 0) > 0.3 ? 1.0 : 0.0) + 0.1 * standard_normal(rng);
  }
  gbt::GbtConfig cfg{trees, depth, 1.0, 0.8, 0.8, 1.0, 0.3, seed};
  return gbt::fit_gbt(X, y, cfg);
}

std::vector<double> row_vec(const Eigen::MatrixXd& X, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) v[static_cast<std::size_t>(c)] = X(r, c);
  return v;
}

double gap(double better, double worse) { return worse > 0.0 ? (worse - better) / worse : 0.0; }

}  // namespace

std::string format_line(const CriterionResult& r) {
  std::ostringstream s;
  s << "[" << (!r.evaluated ? "SKIP" : r.pass ? "PASS" : "FAIL") << "] " << r.id << ". " << r.name;
  if (!r.detail.empty()) s << ": " << r.detail;
  return s.str();
}

GradientCheck gradient_check(std::uint64_t seed, int configurations) {
  using namespace neural;
  GradientCheck out;
  const Activation hidden[] = {Activation::Tanh, Activation::Logistic, Activation::Relu,
                               Activation::Tanh, Activation::Relu};
  for (int c = 0; c < configurations; ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const Activation act = hidden[c % 5];
    const int in = 3 + static_cast<int>(uniform_index(rng, 4));
    const int h1 = 3 + static_cast<int>(uniform_index(rng, 5));
    const int h2 = 2 + static_cast<int>(uniform_index(rng, 4));
    const int n = 6;

    // Regression network, squared error.
    {
      const int outd = 1 + static_cast<int>(uniform_index(rng, 3));
      Mlp net(MlpSpec{{in, h1, h2, outd}, act, Activation::Identity}, rng);
      jitter(net, rng);
      const Eigen::MatrixXd X = random_matrix(in, n, rng);
      const Eigen::MatrixXd Y = random_matrix(outd, n, rng);
      Gradients g = net.zero_gradients();
      loss_and_grad(net, X, Y, Loss::SquaredError, g);
      out.max_rel_error = std::max(out.max_rel_error, compare(net, g, [&] {
        return evaluate_loss(net.forward(X), Y, Loss::SquaredError).value;
      }));
    }
    // Classifier head, logistic loss.
    {
      Mlp net(MlpSpec{{in, h1, 1}, act, Activation::Logistic}, rng);
      jitter(net, rng);
      const Eigen::MatrixXd X = random_matrix(in, n, rng);
      Eigen::MatrixXd Y(1, n);
      for (int i = 0; i < n; ++i) Y(0, i) = i % 2;
      Gradients g = net.zero_gradients();
      loss_and_grad(net, X, Y, Loss::Logistic, g);
      out.max_rel_error = std::max(out.max_rel_error, compare(net, g, [&] {
        return evaluate_loss(net.forward(X), Y, Loss::Logistic).value;
      }));
    }
    DaeArchitecture arch;
    arch.encoder_hidden = {h1, h2};
    arch.domain_hidden = {3};
    arch.hidden = act;
    // DAE reconstruction.
    {
      DaeModel m = init_dae(static_cast<std::size_t>(in), arch, derive_seed(seed, 100 + c));
      jitter(m.encoder, rng);
      jitter(m.decoder, rng);
      const Eigen::MatrixXd X = random_matrix(in, n, rng);
      const Eigen::MatrixXd Y = random_matrix(in, n, rng);
      Gradients ge = m.encoder.zero_gradients(), gd = m.decoder.zero_gradients();
      dae_gradients(m, X, Y, ge, gd);
      auto loss = [&] { return recon_loss(m.encoder, m.decoder, X, Y); };
      out.max_rel_error = std::max(out.max_rel_error, compare(m.encoder, ge, loss));
      out.max_rel_error = std::max(out.max_rel_error, compare(m.decoder, gd, loss));
    }
    // DADAE through the reversal layer.
    {
      const DaeModel base = init_dae(static_cast<std::size_t>(in), arch, derive_seed(seed, 200 + c));
      DadaeModel m;
      m.encoder = base.encoder;
      m.decoder = base.decoder;
      m.domain = Mlp(MlpSpec{{h2, 3, 1}, act, Activation::Logistic}, rng);
      jitter(m.encoder, rng);
      jitter(m.decoder, rng);
      jitter(m.domain, rng);
      const double lambda = 0.2 + 0.8 * uniform01(rng);
      const Eigen::MatrixXd Xs = random_matrix(in, n, rng);
      const Eigen::MatrixXd Ys = random_matrix(in, n, rng);
      const Eigen::MatrixXd Xt = random_matrix(in, n - 2, rng, 1.5);
      Gradients ge = m.encoder.zero_gradients(), gd = m.decoder.zero_gradients(),
                gc = m.domain.zero_gradients();
      dadae_gradients(m, Xs, Ys, Xt, lambda, ge, gd, gc);
      out.max_rel_error = std::max(out.max_rel_error, compare(m.encoder, ge, [&] {
        return recon_loss(m.encoder, m.decoder, Xs, Ys) - lambda * domain_loss(m, Xs, Xt);
      }));
      out.max_rel_error = std::max(out.max_rel_error, compare(m.decoder, gd, [&] {
        return recon_loss(m.encoder, m.decoder, Xs, Ys);
      }));
      out.max_rel_error = std::max(out.max_rel_error, compare(m.domain, gc, [&] {
        return domain_loss(m, Xs, Xt);
      }));
    }
    ++out.configurations;
  }
  return out;
}

CriterionResult check_gradients(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = gradient_check(seed, 5);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CriterionResult r{1, "gradient correctness", g.max_rel_error <= 1e-4 && secs < 30.0, ""};
  r.detail = "max rel error " + fmt(g.max_rel_error) + " over " + std::to_string(g.configurations) +
             " configurations (<= 1e-4), " + fmt(secs) + " s (< 30 s)";
  return r;
}

std::vector<double> brute_force_interventional(const gbt::TreeEnsemble& model,
                                               const std::vector<double>& x,
                                               const Eigen::MatrixXd& background) {
  const std::size_t n = x.size();
  if (n > 16) throw UsageError("brute force limited to 16 features");
  std::vector<double> v(1U << n, 0.0);
  std::vector<double> z(n);
  for (unsigned s = 0; s < (1U << n); ++s) {
    double sum = 0.0;
    for (Eigen::Index b = 0; b < background.rows(); ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        z[j] = (s & (1U << j)) ? x[j] : background(b, static_cast<Eigen::Index>(j));
      }
      sum += model.predict_row(z);
    }
    v[s] = sum / static_cast<double>(background.rows());
  }
  return shapley_from_values(v, n);
}

std::vector<double> brute_force_path_dependent(const gbt::TreeEnsemble& model,
                                               const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n > 16) throw UsageError("brute force limited to 16 features");
  std::vector<double> v(1U << n, 0.0);
  for (unsigned s = 0; s < (1U << n); ++s) {
    double sum = 0.0;
    for (const auto& t : model.trees) sum += tree_conditional(t, 0, x, s);
    v[s] = model.tree_weight() * sum;
  }
  return shapley_from_values(v, n);
}

CriterionResult check_shapley(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_brute = 0.0;
  Rng rng(derive_seed(seed, hash_tag("shapley")));
  for (std::size_t features : {3U, 5U, 8U, 10U}) {
    const auto model = random_ensemble(features, 12, 4, rng, derive_seed(seed, features));
    const Eigen::MatrixXd bg = random_matrix(8, static_cast<Eigen::Index>(features), rng);
    const Eigen::MatrixXd pts = random_matrix(5, static_cast<Eigen::Index>(features), rng);
    for (Eigen::Index p = 0; p < pts.rows(); ++p) {
      const auto x = row_vec(pts, p);
      const auto fast_i = explain::shap_interventional(model, x, bg);
      const auto slow_i = brute_force_interventional(model, x, bg);
      const auto fast_p = explain::shap_path_dependent(model, x);
      const auto slow_p = brute_force_path_dependent(model, x);
      for (std::size_t j = 0; j < features; ++j) {
        worst_brute = std::max(worst_brute, std::abs(fast_i.phi[j] - slow_i[j]));
        worst_brute = std::max(worst_brute, std::abs(fast_p.phi[j] - slow_p[j]));
      }
    }
  }
  double worst_local = 0.0;
  {
    const auto model = random_ensemble(20, 100, 6, rng, derive_seed(seed, 99));
    const Eigen::MatrixXd pts = random_matrix(1000, 20, rng);
    const Eigen::MatrixXd bg = random_matrix(3, 20, rng);
    for (Eigen::Index p = 0; p < pts.rows(); ++p) {
      const auto x = row_vec(pts, p);
      const double f = model.predict_row(x);
      worst_local = std::max(worst_local, std::abs(explain::shap_path_dependent(model, x).total() - f));
      worst_local = std::max(worst_local, std::abs(explain::shap_interventional(model, x, bg).total() - f));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CriterionResult r{2, "Shapley correctness",
                    worst_brute <= 1e-8 && worst_local <= 1e-6 && secs < 120.0, ""};
  r.detail = "max |fast - brute force| " + fmt(worst_brute) + " (<= 1e-8), max local accuracy error " +
             fmt(worst_local) + " on 1000 samples (<= 1e-6), " + fmt(secs) + " s (< 120 s)";
  return r;
}

CriterionResult check_denoising(const evalkit::EvalReport& offline) {
  const double ratio = offline.denoised_mae / offline.noisy_mae;
  CriterionResult r{3, "denoising effect", ratio <= 0.5, ""};
  r.detail = "MAE(denoise(x), clean) " + fmt(offline.denoised_mae) + " vs MAE(x, clean) " +
             fmt(offline.noisy_mae) + ", ratio " + fmt(ratio) + " (<= 0.5)";
  return r;
}

CriterionResult check_pipeline_ordering(const evalkit::EvalReport& offline) {
  using namespace evalkit::method;
  const double a = offline.mean_mae.at(kAliothDae);
  const double g = offline.mean_mae.at(kGbt);
  const double c = offline.mean_mae.at(kBestEffortCpi);
  const double g1 = gap(a, g), g2 = gap(g, c);
  CriterionResult r{4, "offline pipeline ordering", a <= g && g <= c && g1 >= 0.05 && g2 >= 0.05, ""};
  r.detail = "DAE+GBT " + fmt(a) + " <= GBT " + fmt(g) + " <= Best-Effort CPI " + fmt(c) +
             ", gaps " + fmt(100 * g1) + "% and " + fmt(100 * g2) + "% (>= 5%)";
  return r;
}

CriterionResult check_generalization(const evalkit::EvalReport& loao) {
  using namespace evalkit::method;
  const double da = loao.mean_mae.at(kAliothDadae);
  const double off = loao.mean_mae.at(kAliothDae);
  const double orc = loao.mean_mae.at(kOracleDae);
  CriterionResult r{5, "leave-one-app-out ordering", da < off && da <= 2.0 * orc, ""};
  r.detail = "DADAE+GBT " + fmt(da) + " < offline DAE+GBT " + fmt(off) + "; oracle " + fmt(orc) +
             ", ratio " + fmt(da / orc) + " (<= 2)";
  return r;
}

CriterionResult check_sweep(const evalkit::EvalReport& offline) {
  const auto& s = *offline.sweep;
  CriterionResult r{6, "threshold robustness",
                    s.f1_volatility <= 0.15 && s.accuracy_volatility <= 0.15, ""};
  r.detail = "F1 volatility " + fmt(s.f1_volatility) + ", accuracy volatility " +
             fmt(s.accuracy_volatility) + " (<= 0.15)";
  return r;
}

CriterionResult check_attribution(const evalkit::EvalReport& offline) {
  const auto& a = *offline.attribution;
  const double acc = a.accuracy();
  CriterionResult r{7, "source-of-interference attribution",
                    a.flagged > 0 && acc >= 0.6 && a.sums_to_one, ""};
  r.detail = "top-1 accuracy " + fmt(acc) + " over " + std::to_string(a.flagged) +
             " flagged rows (>= 0.6), normalized scores sum to 1: " +
             (a.sums_to_one ? "yes" : "no");
  return r;
}

CriterionResult check_gmm(std::uint64_t seed) {
  Rng rng(derive_seed(seed, hash_tag("gmm-check")));
  bool monotone = true;
  auto check_trace = [&monotone](const std::vector<double>& ll) {
    for (std::size_t i = 1; i < ll.size(); ++i) {
      if (ll[i] < ll[i - 1] - 1e-9 * std::abs(ll[i - 1])) monotone = false;
    }
  };
  std::vector<double> values;
  for (int i = 0; i < 500; ++i) values.push_back(0.1 * standard_normal(rng));
  for (int i = 0; i < 500; ++i) values.push_back(10.0 + 0.1 * standard_normal(rng));
  const auto fit = baselines::fit_gmm_em(values, 2, seed);
  check_trace(fit.loglik);
  auto means = fit.model.means;
  std::sort(means.begin(), means.end());
  const double err = std::max(std::abs(means[0]), std::abs(means[1] - 10.0));
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v;
    const int comps = 1 + trial % 4;
    for (int i = 0; i < 300; ++i) {
      v.push_back(static_cast<double>(uniform_index(rng, static_cast<std::size_t>(comps))) * 3.0 +
                  standard_normal(rng));
    }
    for (std::size_t k = 1; k <= 5; ++k) check_trace(baselines::fit_gmm_em(v, k, seed + trial).loglik);
  }
  CriterionResult r{8, "mixture fitting", monotone && err <= 0.05, ""};
  r.detail = std::string("log-likelihood monotone on 51 fits: ") + (monotone ? "yes" : "no") +
             ", max mean error " + fmt(err) + " (<= 0.05)";
  return r;
}

CriterionResult check_determinism(const std::filesystem::path& a, const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(fs::relative(e.path(), a));
  }
  std::sort(files.begin(), files.end());
  std::size_t others = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") ++others;
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  std::vector<std::string> differing;
  for (const auto& f : files) {
    if (!fs::exists(b / f) || slurp(a / f) != slurp(b / f)) differing.push_back(f.string());
  }
  CriterionResult r{9, "determinism", !files.empty() && differing.empty() && others == files.size(), ""};
  r.detail = std::to_string(files.size()) + " CSV files compared, " +
             std::to_string(differing.size()) + " differ";
  if (!differing.empty()) r.detail += " (first: " + differing.front() + ")";
  return r;
}

double inference_ms(const pipeline::AliothModel& model, const simcloud::Dataset& data, int repeats) {
  const auto len = static_cast<std::size_t>(model.window.max_length());
  if (data.samples.size() < len) throw UsageError("dataset shorter than one window");
  Eigen::MatrixXd recent(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(data.metric_names.size()));
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t c = 0; c < data.metric_names.size(); ++c) {
      recent(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = data.samples[i].metrics[c];
    }
  }
  double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) sink += model.predict_window(recent, data.metric_names);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!std::isfinite(sink)) throw NumericalError("non-finite prediction during timing");
  return ms / repeats;
}

CriterionResult check_runtime(double repro_seconds, double inference) {
  CriterionResult r{10, "runtime budget", repro_seconds < 900.0 && inference < 10.0, ""};
  r.detail = "repro-all " + fmt(repro_seconds) + " s (< 900 s), single-sample inference " +
             fmt(inference) + " ms (< 10 ms)";
  return r;
}

}  // namespace alioth::acceptance
