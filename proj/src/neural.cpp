#include "alioth/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alioth::neural {
namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Logistic: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  return z;
}

// d(activation)/dz expressed through the activated output y.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& y, Activation a) {
  switch (a) {
    case Activation::Identity: return Eigen::MatrixXd::Ones(y.rows(), y.cols());
    case Activation::Relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Logistic: return (y.array() * (1.0 - y.array())).matrix();
  }
  return y;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Logistic: return "logistic";
  }
  return "identity";
}

Activation activation_from(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "logistic") return Activation::Logistic;
  throw UsageError("unknown activation: " + s);
}

// Columns of `rows` (a rows x dim matrix) gathered as a dim x batch block.
Eigen::MatrixXd gather(const Eigen::MatrixXd& rows, const std::vector<std::size_t>& order,
                       std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(rows.cols(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) {
    out.col(static_cast<Eigen::Index>(i - begin)) =
        rows.row(static_cast<Eigen::Index>(order[i])).transpose();
  }
  return out;
}

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
}

void check_finite(double v, const char* what, int epoch) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string(what) + " diverged (non-finite loss) at epoch " +
                         std::to_string(epoch) + "; lower the learning rate");
  }
}

MlpSpec encoder_spec(std::size_t dim, const DaeArchitecture& arch) {
  MlpSpec s;
  s.layer_sizes.push_back(static_cast<int>(dim));
  s.layer_sizes.insert(s.layer_sizes.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
  s.hidden = arch.hidden;
  s.output = arch.hidden;
  return s;
}

MlpSpec decoder_spec(std::size_t dim, const DaeArchitecture& arch) {
  MlpSpec s;
  s.layer_sizes.assign(arch.encoder_hidden.rbegin(), arch.encoder_hidden.rend());
  s.layer_sizes.push_back(static_cast<int>(dim));
  s.hidden = arch.hidden;
  s.output = Activation::Identity;
  return s;
}

MlpSpec domain_spec(const DaeArchitecture& arch) {
  MlpSpec s;
  s.layer_sizes.push_back(arch.encoder_hidden.back());
  s.layer_sizes.insert(s.layer_sizes.end(), arch.domain_hidden.begin(), arch.domain_hidden.end());
  s.layer_sizes.push_back(1);
  s.hidden = arch.hidden;
  s.output = Activation::Logistic;
  return s;
}

nlohmann::json log_json(const std::vector<EpochLog>& log) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : log) {
    arr.push_back({{"epoch", e.epoch},
                   {"recon_mse", e.recon_mse},
                   {"domain_loss", e.domain_loss},
                   {"domain_acc", e.domain_acc},
                   {"lambda", e.lambda}});
  }
  return arr;
}

std::vector<EpochLog> log_from(const nlohmann::json& j) {
  std::vector<EpochLog> out;
  if (!j.contains("log")) return out;
  for (const auto& e : j.at("log")) {
    out.push_back({e.at("epoch").get<int>(), e.at("recon_mse").get<double>(),
                   e.at("domain_loss").get<double>(), e.at("domain_acc").get<double>(),
                   e.at("lambda").get<double>()});
  }
  return out;
}

}  // namespace

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw UsageError("an MLP needs at least 2 layer sizes");
  for (int s : layer_sizes) {
    if (s <= 0) throw UsageError("layer sizes must be positive");
  }
}

void Gradients::set_zero() {
  for (auto& w : dW) w.setZero();
  for (auto& b : db) b.setZero();
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] += other.dW[l];
    db[l] += other.db[l];
  }
  return *this;
}

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < dW.size(); ++l) {
    out.insert(out.end(), dW[l].data(), dW[l].data() + dW[l].size());
    out.insert(out.end(), db[l].data(), db[l].data() + db[l].size());
  }
  return out;
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t l = 0; l + 1 < spec_.layer_sizes.size(); ++l) {
    const int in = spec_.layer_sizes[l], out = spec_.layer_sizes[l + 1];
    const double limit =
        std::sqrt((activation_of(l) == Activation::Relu ? 6.0 : 3.0) / static_cast<double>(in));
    Dense d;
    d.W.resize(out, in);
    // Column-major fill order is part of the seeded layout.
    for (Eigen::Index c = 0; c < d.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < d.W.rows(); ++r) {
        d.W(r, c) = limit * (2.0 * uniform01(rng) - 1.0);
      }
    }
    d.b = Eigen::VectorXd::Zero(out);
    layers_.push_back(std::move(d));
  }
}

std::size_t Mlp::input_dim() const {
  return spec_.layer_sizes.empty() ? 0 : static_cast<std::size_t>(spec_.layer_sizes.front());
}

std::size_t Mlp::output_dim() const {
  return spec_.layer_sizes.empty() ? 0 : static_cast<std::size_t>(spec_.layer_sizes.back());
}

Activation Mlp::activation_of(std::size_t layer) const {
  return layer + 2 == spec_.layer_sizes.size() ? spec_.output : spec_.hidden;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.rows()) != input_dim()) {
    throw UsageError("dimension mismatch: expected " + std::to_string(input_dim()) +
                     " inputs, got " + std::to_string(X.rows()));
  }
  Eigen::MatrixXd a = X;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].W * a;
    z.colwise() += layers_[l].b;
    a = activate(z, activation_of(l));
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X, ForwardCache& cache) const {
  if (static_cast<std::size_t>(X.rows()) != input_dim()) {
    throw UsageError("dimension mismatch: expected " + std::to_string(input_dim()) +
                     " inputs, got " + std::to_string(X.rows()));
  }
  cache.inputs.resize(layers_.size());
  cache.outputs.resize(layers_.size());
  const Eigen::MatrixXd* a = &X;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs[l] = *a;
    Eigen::MatrixXd z = layers_[l].W * (*a);
    z.colwise() += layers_[l].b;
    cache.outputs[l] = activate(z, activation_of(l));
    a = &cache.outputs[l];
  }
  return cache.outputs.back();
}

Eigen::MatrixXd Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                              Gradients& grads, bool wrt_preactivation) const {
  Eigen::MatrixXd delta = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (!(wrt_preactivation && l + 1 == layers_.size())) {
      delta = delta.cwiseProduct(activation_grad(cache.outputs[l], activation_of(l)));
    }
    grads.dW[l].noalias() += delta * cache.inputs[l].transpose();
    grads.db[l].noalias() += delta.rowwise().sum();
    delta = layers_[l].W.transpose() * delta;
  }
  return delta;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const auto& d : layers_) {
    g.dW.push_back(Eigen::MatrixXd::Zero(d.W.rows(), d.W.cols()));
    g.db.push_back(Eigen::VectorXd::Zero(d.b.size()));
  }
  return g;
}

void Mlp::sgd_step(const Gradients& grads, double lr) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].W.noalias() -= lr * grads.dW[l];
    layers_[l].b.noalias() -= lr * grads.db[l];
  }
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (const auto& d : layers_) n += static_cast<std::size_t>(d.W.size() + d.b.size());
  return n;
}

std::vector<double> Mlp::flat() const {
  std::vector<double> out;
  out.reserve(n_params());
  for (const auto& d : layers_) {
    out.insert(out.end(), d.W.data(), d.W.data() + d.W.size());
    out.insert(out.end(), d.b.data(), d.b.data() + d.b.size());
  }
  return out;
}

void Mlp::set_flat(const std::vector<double>& params) {
  if (params.size() != n_params()) throw UsageError("parameter count mismatch");
  std::size_t pos = 0;
  for (auto& d : layers_) {
    std::copy_n(params.begin() + static_cast<long>(pos), d.W.size(), d.W.data());
    pos += static_cast<std::size_t>(d.W.size());
    std::copy_n(params.begin() + static_cast<long>(pos), d.b.size(), d.b.data());
    pos += static_cast<std::size_t>(d.b.size());
  }
}

LossValue evaluate_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, Loss loss) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw UsageError("loss: prediction and target shapes differ");
  }
  const double batch = static_cast<double>(pred.cols());
  LossValue out;
  if (loss == Loss::SquaredError) {
    const Eigen::MatrixXd diff = pred - target;
    out.value = diff.squaredNorm() / batch;
    out.grad = (2.0 / batch) * diff;
  } else {
    const auto p = pred.array().max(1e-12).min(1.0 - 1e-12);
    const auto y = target.array();
    out.value = -(y * p.log() + (1.0 - y) * (1.0 - p).log()).sum() / batch;
    out.grad = ((p - y) / (p * (1.0 - p)) / batch).matrix();
  }
  return out;
}

double loss_and_grad(const Mlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& target,
                     Loss loss, Gradients& grads) {
  ForwardCache cache;
  const Eigen::MatrixXd pred = net.forward(X, cache);
  LossValue lv = evaluate_loss(pred, target, loss);
  if (loss == Loss::Logistic && net.spec().output == Activation::Logistic) {
    // d(BCE)/dz = p - y, exact and stable through a logistic output.
    const Eigen::MatrixXd dz = (pred - target) / static_cast<double>(pred.cols());
    net.backward(cache, dz, grads, true);
  } else {
    net.backward(cache, lv.grad, grads);
  }
  return lv.value;
}

GradientReversal::GradientReversal(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0)) throw UsageError("gradient reversal coefficient must be >= 0");
}

double grl_schedule(double p, double lambda_max, double gamma) {
  return lambda_max * (2.0 / (1.0 + std::exp(-gamma * p)) - 1.0);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw UsageError("learning rate must be > 0");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (batch_size <= 0) throw UsageError("batch size must be > 0");
  if (!(lambda_max >= 0.0)) throw UsageError("lambda_max must be >= 0");
}

DaeModel DadaeModel::as_dae() const {
  DaeModel d;
  d.encoder = encoder;
  d.decoder = decoder;
  d.seed = seed;
  d.log = log;
  return d;
}

DaeModel init_dae(std::size_t dim, const DaeArchitecture& arch, std::uint64_t seed) {
  if (dim == 0) throw UsageError("DAE input dimension must be positive");
  if (arch.encoder_hidden.empty()) throw UsageError("DAE needs at least one encoder layer");
  Rng rng(derive_seed(seed, hash_tag("dae-init")));
  DaeModel m;
  m.encoder = Mlp(encoder_spec(dim, arch), rng);
  m.decoder = Mlp(decoder_spec(dim, arch), rng);
  m.seed = seed;
  return m;
}

double dae_gradients(const DaeModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     Gradients& ge, Gradients& gd) {
  ForwardCache ce, cd;
  const Eigen::MatrixXd code = m.encoder.forward(x, ce);
  const Eigen::MatrixXd out = m.decoder.forward(code, cd);
  const LossValue lv = evaluate_loss(out, y, Loss::SquaredError);
  ge.set_zero();
  gd.set_zero();
  const Eigen::MatrixXd dcode = m.decoder.backward(cd, lv.grad, gd);
  m.encoder.backward(ce, dcode, ge);
  return lv.value;
}

DadaeStep dadae_gradients(const DadaeModel& m, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                          const Eigen::MatrixXd& xt, double lambda, Gradients& ge, Gradients& gd,
                          Gradients& gc) {
  const GradientReversal grl(lambda);
  const auto ns = xs.cols(), nt = xt.cols();
  ForwardCache ce, ce_t, cd, cc;
  const Eigen::MatrixXd hs = m.encoder.forward(xs, ce);
  const Eigen::MatrixXd ht = m.encoder.forward(xt, ce_t);
  const Eigen::MatrixXd out = m.decoder.forward(hs, cd);
  const LossValue recon = evaluate_loss(out, ys, Loss::SquaredError);

  Eigen::MatrixXd h(hs.rows(), ns + nt);
  h << grl.forward(hs), grl.forward(ht);
  Eigen::MatrixXd labels(1, ns + nt);
  labels.leftCols(ns).setZero();
  labels.rightCols(nt).setOnes();
  DadaeStep st;
  st.prob = m.domain.forward(h, cc);
  st.recon = recon.value;
  st.domain = evaluate_loss(st.prob, labels, Loss::Logistic).value;

  Gradients ge_t = m.encoder.zero_gradients();
  ge.set_zero();
  gd.set_zero();
  gc.set_zero();
  const Eigen::MatrixXd dhs_recon = m.decoder.backward(cd, recon.grad, gd);
  const Eigen::MatrixXd dz = (st.prob - labels) / static_cast<double>(st.prob.cols());
  const Eigen::MatrixXd dh = grl.backward(m.domain.backward(cc, dz, gc, true));
  const Eigen::MatrixXd dhs = dhs_recon + dh.leftCols(ns);
  m.encoder.backward(ce, dhs, ge);
  m.encoder.backward(ce_t, dh.rightCols(nt), ge_t);
  ge += ge_t;
  return st;
}

DaeModel train_dae(const Eigen::MatrixXd& noisy, const Eigen::MatrixXd& clean,
                   const DaeArchitecture& arch, const TrainConfig& cfg) {
  cfg.validate();
  if (noisy.rows() == 0) throw UsageError("train_dae needs at least one pair");
  if (noisy.rows() != clean.rows() || noisy.cols() != clean.cols()) {
    throw UsageError("train_dae: noisy and clean shapes differ");
  }
  DaeModel m = init_dae(static_cast<std::size_t>(noisy.cols()), arch, cfg.seed);
  Rng order_rng(derive_seed(cfg.seed, hash_tag("dae-order")));
  std::vector<std::size_t> order(static_cast<std::size_t>(noisy.rows()));
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const double dim = static_cast<double>(noisy.cols());

  Gradients ge = m.encoder.zero_gradients();
  Gradients gd = m.decoder.zero_gradients();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      const Eigen::MatrixXd xb = gather(noisy, order, b, e);
      const Eigen::MatrixXd yb = gather(clean, order, b, e);
      sum += dae_gradients(m, xb, yb, ge, gd) * static_cast<double>(e - b);
      m.decoder.sgd_step(gd, cfg.lr);
      m.encoder.sgd_step(ge, cfg.lr);
    }
    const double mse = sum / static_cast<double>(order.size()) / dim;
    check_finite(mse, "DAE training", epoch);
    m.log.push_back({epoch, mse, 0.0, 0.0, 0.0});
  }
  return m;
}

DadaeModel train_dadae(const Eigen::MatrixXd& source_noisy, const Eigen::MatrixXd& source_clean,
                       const Eigen::MatrixXd& target, const DaeArchitecture& arch,
                       const TrainConfig& cfg, const std::optional<DaeModel>& warm_start) {
  cfg.validate();
  if (source_noisy.rows() == 0 || target.rows() == 0) {
    throw UsageError("train_dadae needs non-empty source and target domains");
  }
  if (source_noisy.rows() != source_clean.rows() || source_noisy.cols() != source_clean.cols() ||
      target.cols() != source_noisy.cols()) {
    throw UsageError("train_dadae: inconsistent dimensions");
  }
  const auto dim = static_cast<std::size_t>(source_noisy.cols());
  DadaeModel m;
  {
    DaeModel base = warm_start ? *warm_start : init_dae(dim, arch, cfg.seed);
    if (base.dim() != dim) throw UsageError("warm-start DAE dimension mismatch");
    m.encoder = std::move(base.encoder);
    m.decoder = std::move(base.decoder);
    Rng drng(derive_seed(cfg.seed, hash_tag("dadae-domain-init")));
    m.domain = Mlp(domain_spec(arch), drng);
  }
  m.seed = cfg.seed;

  Rng order_rng(derive_seed(cfg.seed, hash_tag("dae-order")));
  Rng target_rng(derive_seed(cfg.seed, hash_tag("dadae-target-order")));
  std::vector<std::size_t> order(static_cast<std::size_t>(source_noisy.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> torder(static_cast<std::size_t>(target.rows()));
  std::iota(torder.begin(), torder.end(), 0);
  shuffle(torder, target_rng);
  std::size_t tpos = 0;

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (order.size() + batch - 1) / batch;
  const double total_steps = static_cast<double>(steps_per_epoch) * std::max(1, cfg.epochs);

  Gradients ge = m.encoder.zero_gradients();
  Gradients gd = m.decoder.zero_gradients();
  Gradients gc = m.domain.zero_gradients();
  std::size_t step = 0;
  double lambda = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double recon_sum = 0.0, dom_sum = 0.0, correct = 0.0, dom_count = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch, ++step) {
      const std::size_t e = std::min(order.size(), b + batch);
      const std::size_t ns = e - b;
      lambda = grl_schedule(static_cast<double>(step) / total_steps, cfg.lambda_max,
                            cfg.lambda_gamma);

      std::vector<std::size_t> tb(ns);
      for (std::size_t i = 0; i < ns; ++i) {
        if (tpos == torder.size()) {
          shuffle(torder, target_rng);
          tpos = 0;
        }
        tb[i] = torder[tpos++];
      }
      const Eigen::MatrixXd xs = gather(source_noisy, order, b, e);
      const Eigen::MatrixXd ys = gather(source_clean, order, b, e);
      const Eigen::MatrixXd xt = gather(target, tb, 0, ns);

      const DadaeStep st = dadae_gradients(m, xs, ys, xt, lambda, ge, gd, gc);
      recon_sum += st.recon * static_cast<double>(ns);
      dom_sum += st.domain * static_cast<double>(2 * ns);
      for (Eigen::Index i = 0; i < st.prob.cols(); ++i) {
        const bool target_side = i >= static_cast<Eigen::Index>(ns);
        correct += ((st.prob(0, i) >= 0.5) == target_side) ? 1.0 : 0.0;
      }
      dom_count += static_cast<double>(2 * ns);

      m.decoder.sgd_step(gd, cfg.lr);
      m.encoder.sgd_step(ge, cfg.lr);
      m.domain.sgd_step(gc, cfg.lr);
    }
    const double mse = recon_sum / static_cast<double>(order.size()) / static_cast<double>(dim);
    const double dl = dom_sum / dom_count;
    check_finite(mse, "DADAE reconstruction", epoch);
    check_finite(dl, "DADAE domain classifier", epoch);
    m.log.push_back({epoch, mse, dl, correct / dom_count, lambda});
  }
  m.grl_lambda = lambda;
  return m;
}

Eigen::MatrixXd denoise(const DaeModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.dim()) {
    throw UsageError("denoise: dimension mismatch");
  }
  return model.decoder.forward(model.encoder.forward(X.transpose())).transpose();
}

Eigen::MatrixXd denoise(const DadaeModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.dim()) {
    throw UsageError("denoise: dimension mismatch");
  }
  return model.decoder.forward(model.encoder.forward(X.transpose())).transpose();
}

Eigen::VectorXd domain_probability(const DadaeModel& model, const Eigen::MatrixXd& X) {
  return model.domain.forward(model.encoder.forward(X.transpose())).row(0).transpose();
}

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.spec().layer_sizes;
  j["hidden"] = activation_name(net.spec().hidden);
  j["output"] = activation_name(net.spec().output);
  j["params"] = net.flat();
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  spec.hidden = activation_from(j.at("hidden").get<std::string>());
  spec.output = activation_from(j.at("output").get<std::string>());
  Rng rng(0);
  Mlp net(spec, rng);
  net.set_flat(j.at("params").get<std::vector<double>>());
  return net;
}

nlohmann::json to_json(const DaeModel& m) {
  return {{"kind", "dae"},
          {"seed", m.seed},
          {"encoder", to_json(m.encoder)},
          {"decoder", to_json(m.decoder)},
          {"log", log_json(m.log)}};
}

nlohmann::json to_json(const DadaeModel& m) {
  return {{"kind", "dadae"},
          {"seed", m.seed},
          {"grl_lambda", m.grl_lambda},
          {"encoder", to_json(m.encoder)},
          {"decoder", to_json(m.decoder)},
          {"domain", to_json(m.domain)},
          {"log", log_json(m.log)}};
}

DaeModel dae_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "dae" && kind != "dadae") throw UsageError("not a DAE model: " + kind);
  DaeModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.encoder = mlp_from_json(j.at("encoder"));
  m.decoder = mlp_from_json(j.at("decoder"));
  m.log = log_from(j);
  return m;
}

DadaeModel dadae_from_json(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != "dadae") throw UsageError("not a DADAE model");
  DadaeModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.grl_lambda = j.at("grl_lambda").get<double>();
  m.encoder = mlp_from_json(j.at("encoder"));
  m.decoder = mlp_from_json(j.at("decoder"));
  m.domain = mlp_from_json(j.at("domain"));
  m.log = log_from(j);
  return m;
}

}  // namespace alioth::neural
