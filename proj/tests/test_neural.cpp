#include <doctest.h>

#include <cmath>

#include "alioth/acceptance.hpp"
#include "alioth/neural.hpp"
#include "support.hpp"

using namespace alioth;
using namespace alioth::neural;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6); }

Eigen::MatrixXd hand_forward(const Mlp& net, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd a = X;
  const auto& L = net.layers();
  for (std::size_t l = 0; l < L.size(); ++l) {
    Eigen::MatrixXd z(L[l].W.rows(), a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      for (Eigen::Index r = 0; r < L[l].W.rows(); ++r) {
        double s = L[l].b(r);
        for (Eigen::Index k = 0; k < L[l].W.cols(); ++k) s += L[l].W(r, k) * a(k, c);
        z(r, c) = s;
      }
    }
    const bool last = l + 1 == L.size();
    const Activation act = last ? net.spec().output : net.spec().hidden;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      double& v = z.data()[i];
      if (act == Activation::Relu) v = v > 0 ? v : 0;
      if (act == Activation::Tanh) v = std::tanh(v);
      if (act == Activation::Logistic) v = 1.0 / (1.0 + std::exp(-v));
    }
    a = z;
  }
  return a;
}

// Central differences of a scalar function of the flat parameters.
template <class F>
std::vector<double> numeric_grad(Mlp& net, F loss, double eps = 1e-5) {
  auto p = net.flat();
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + eps;
    net.set_flat(p);
    const double up = loss();
    p[i] = keep - eps;
    net.set_flat(p);
    const double down = loss();
    p[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  net.set_flat(p);
  return g;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
  return m;
}

Eigen::MatrixXd tanh_rows(const Eigen::MatrixXd& x) { return x.array().tanh().matrix(); }

}  // namespace

TEST_CASE("zero weights with relu give zero output") {
  Rng rng(1);
  Mlp net({{3, 4, 2}, Activation::Relu, Activation::Relu}, rng);
  for (auto& d : net.layers()) {
    d.W.setZero();
    d.b.setZero();
  }
  CHECK(net.forward(Eigen::MatrixXd::Random(3, 5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity single linear layer returns its input") {
  Rng rng(1);
  Mlp net({{4, 4}, Activation::Relu, Activation::Identity}, rng);
  net.layers()[0].W = Eigen::MatrixXd::Identity(4, 4);
  net.layers()[0].b.setZero();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  CHECK(net.forward(x) == x);
}

TEST_CASE("random three-layer nets match hand matrix arithmetic") {
  Rng rng(2);
  for (auto act : {Activation::Relu, Activation::Tanh}) {
    Mlp net({{5, 7, 6, 3}, act, Activation::Logistic}, rng);
    const auto x = testsupport::random_matrix(rng, 5, 4, -1, 1);
    CHECK((net.forward(x) - hand_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  Rng rng(1);
  Mlp net({{3, 2}, Activation::Relu, Activation::Identity}, rng);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(4, 1)), UsageError);
  CHECK_THROWS_AS(Mlp({{3}, Activation::Relu, Activation::Identity}, rng), UsageError);
}

TEST_CASE("constant loss has zero gradient") {
  Rng rng(3);
  Mlp net({{3, 4, 2}, Activation::Tanh, Activation::Identity}, rng);
  auto g = net.zero_gradients();
  ForwardCache cache;
  net.forward(testsupport::random_matrix(rng, 3, 5), cache);
  net.backward(cache, Eigen::MatrixXd::Zero(2, 5), g);
  for (double v : g.flat()) CHECK(v == 0.0);
}

TEST_CASE("gradients match central differences and scale linearly") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto act = trial % 2 ? Activation::Tanh : Activation::Relu;
    Mlp net({{4, 6, 3}, act, Activation::Identity}, rng);
    const auto x = testsupport::random_matrix(rng, 4, 7, -1, 1);
    const auto y = testsupport::random_matrix(rng, 3, 7, -1, 1);
    auto g = net.zero_gradients();
    loss_and_grad(net, x, y, Loss::SquaredError, g);
    const auto num = numeric_grad(net, [&] {
      return evaluate_loss(net.forward(x), y, Loss::SquaredError).value;
    });
    CHECK(max_rel(g.flat(), num) < 1e-4);

    ForwardCache cache;
    const auto out = net.forward(x, cache);
    const auto lv = evaluate_loss(out, y, Loss::SquaredError);
    auto g1 = net.zero_gradients();
    auto g2 = net.zero_gradients();
    net.backward(cache, lv.grad, g1);
    net.backward(cache, 2.0 * lv.grad, g2);
    const auto f1 = g1.flat(), f2 = g2.flat();
    for (std::size_t i = 0; i < f1.size(); ++i) CHECK(f2[i] == doctest::Approx(2.0 * f1[i]));
  }
}

TEST_CASE("logistic-output gradients match central differences") {
  Rng rng(5);
  Mlp net({{3, 5, 1}, Activation::Tanh, Activation::Logistic}, rng);
  const auto x = testsupport::random_matrix(rng, 3, 8, -1, 1);
  Eigen::MatrixXd y(1, 8);
  y << 0, 1, 1, 0, 1, 0, 0, 1;
  auto g = net.zero_gradients();
  loss_and_grad(net, x, y, Loss::Logistic, g);
  const auto num = numeric_grad(net, [&] { return evaluate_loss(net.forward(x), y, Loss::Logistic).value; });
  CHECK(max_rel(g.flat(), num) < 1e-4);
}

TEST_CASE("gradient reversal") {
  const GradientReversal zero(0.0);
  Eigen::MatrixXd g(2, 1);
  g << 1, -2;
  CHECK(zero.backward(g).cwiseAbs().maxCoeff() == 0.0);
  const GradientReversal one(1.0);
  CHECK(one.backward(g)(0, 0) == -1.0);
  CHECK(one.backward(g)(1, 0) == 2.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
  CHECK(one.forward(x) == x);
  CHECK(GradientReversal(3.5).forward(x) == x);
  CHECK_THROWS_AS(GradientReversal(-1.0), UsageError);
}

TEST_CASE("lambda schedule warms up from 0 to lambda_max") {
  CHECK(grl_schedule(0.0, 1.0) == 0.0);
  CHECK(grl_schedule(1.0, 1.0) == doctest::Approx(2.0 / (1.0 + std::exp(-10.0)) - 1.0));
  CHECK(grl_schedule(1.0, 0.5) == doctest::Approx(0.5 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0)));
  double prev = -1;
  for (int i = 0; i <= 20; ++i) {
    const double v = grl_schedule(i / 20.0, 1.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("dae gradients match central differences") {
  Rng rng(6);
  DaeArchitecture arch;
  arch.encoder_hidden = {5, 3};
  arch.hidden = Activation::Tanh;
  DaeModel m = init_dae(4, arch, 7);
  const auto x = testsupport::random_matrix(rng, 4, 6);
  const auto y = testsupport::random_matrix(rng, 4, 6);
  auto ge = m.encoder.zero_gradients();
  auto gd = m.decoder.zero_gradients();
  dae_gradients(m, x, y, ge, gd);
  auto loss = [&] {
    return evaluate_loss(m.decoder.forward(m.encoder.forward(x)), y, Loss::SquaredError).value;
  };
  CHECK(max_rel(ge.flat(), numeric_grad(m.encoder, loss)) < 1e-4);
  CHECK(max_rel(gd.flat(), numeric_grad(m.decoder, loss)) < 1e-4);
}

TEST_CASE("adversarial gradients through the reversal layer match central differences") {
  Rng rng(8);
  DaeArchitecture arch;
  arch.encoder_hidden = {5, 3};
  arch.domain_hidden = {4};
  arch.hidden = Activation::Tanh;
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto xs = testsupport::random_matrix(rng, 4, 5);
  const auto ys = testsupport::random_matrix(rng, 4, 5);
  const auto xt = testsupport::random_matrix(rng, 4, 3);
  DadaeModel m = train_dadae(xs.transpose(), ys.transpose(), xt.transpose(), arch, cfg);
  const double lambda = 0.7;
  auto ge = m.encoder.zero_gradients();
  auto gd = m.decoder.zero_gradients();
  auto gc = m.domain.zero_gradients();
  dadae_gradients(m, xs, ys, xt, lambda, ge, gd, gc);

  Eigen::MatrixXd labels(1, 8);
  labels << 0, 0, 0, 0, 0, 1, 1, 1;
  auto recon = [&] {
    return evaluate_loss(m.decoder.forward(m.encoder.forward(xs)), ys, Loss::SquaredError).value;
  };
  auto domain = [&] {
    Eigen::MatrixXd h(3, 8);
    h << m.encoder.forward(xs), m.encoder.forward(xt);
    return evaluate_loss(m.domain.forward(h), labels, Loss::Logistic).value;
  };
  // Encoder descends reconstruction and ascends the domain loss.
  const auto enc_r = numeric_grad(m.encoder, recon);
  const auto enc_d = numeric_grad(m.encoder, domain);
  std::vector<double> expect(enc_r.size());
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = enc_r[i] - lambda * enc_d[i];
  CHECK(max_rel(ge.flat(), expect) < 1e-4);
  CHECK(max_rel(gd.flat(), numeric_grad(m.decoder, recon)) < 1e-4);
  CHECK(max_rel(gc.flat(), numeric_grad(m.domain, domain)) < 1e-4);
}

TEST_CASE("lambda 0 leaves encoder updates equal to the plain DAE") {
  Rng rng(9);
  DaeArchitecture arch;
  arch.encoder_hidden = {6, 3};
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto xs = testsupport::random_matrix(rng, 5, 4);
  const auto ys = testsupport::random_matrix(rng, 5, 4);
  const auto xt = testsupport::random_matrix(rng, 5, 4);
  DadaeModel m = train_dadae(xs.transpose(), ys.transpose(), xt.transpose(), arch, cfg);
  auto ge = m.encoder.zero_gradients();
  auto gd = m.decoder.zero_gradients();
  auto gc = m.domain.zero_gradients();
  dadae_gradients(m, xs, ys, xt, 0.0, ge, gd, gc);
  const DaeModel d = m.as_dae();
  auto ge2 = d.encoder.zero_gradients();
  auto gd2 = d.decoder.zero_gradients();
  dae_gradients(d, xs, ys, ge2, gd2);
  const auto a = ge.flat(), b = ge2.flat();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  double domain_norm = 0.0;
  for (double v : gc.flat()) domain_norm += std::abs(v);
  CHECK(domain_norm > 0.0);
}

TEST_CASE("zero epochs return the initial parameters") {
  DaeArchitecture arch;
  arch.encoder_hidden = {8, 4};
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 11;
  Rng rng(1);
  const auto x = testsupport::random_matrix(rng, 20, 6);
  const auto m = train_dae(x, x, arch, cfg);
  const auto init = init_dae(6, arch, 11);
  CHECK(m.encoder.flat() == init.encoder.flat());
  CHECK(m.decoder.flat() == init.decoder.flat());
  CHECK(m.log.empty());
}

TEST_CASE("identity pairs train to low error and denoise reproduces the input") {
  DaeArchitecture arch;
  arch.encoder_hidden = {32, 16};
  arch.hidden = Activation::Tanh;
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.lr = 0.05;
  cfg.batch_size = 10;
  Rng rng(3);
  // 100 rows on a 2-D manifold in 6-D.
  Eigen::MatrixXd z = testsupport::random_matrix(rng, 100, 2);
  Eigen::MatrixXd mix = testsupport::random_matrix(rng, 2, 6);
  const Eigen::MatrixXd x = tanh_rows(z * mix);
  const auto m = train_dae(x, x, arch, cfg);
  CHECK(m.log.back().recon_mse < 1e-2);
  const Eigen::MatrixXd out = denoise(m, x);
  CHECK(out.rows() == x.rows());
  CHECK(out.cols() == x.cols());
  CHECK((out - x).cwiseAbs().mean() < 0.1);
}

TEST_CASE("training is deterministic in seed") {
  DaeArchitecture arch;
  arch.encoder_hidden = {8, 4};
  TrainConfig cfg;
  cfg.epochs = 5;
  Rng rng(4);
  const auto x = testsupport::random_matrix(rng, 50, 5);
  const auto y = testsupport::random_matrix(rng, 50, 5);
  const auto a = train_dae(x, y, arch, cfg);
  const auto b = train_dae(x, y, arch, cfg);
  CHECK(a.encoder.flat() == b.encoder.flat());
  CHECK(a.decoder.flat() == b.decoder.flat());
  const auto c = train_dadae(x, y, x, arch, cfg);
  const auto d = train_dadae(x, y, x, arch, cfg);
  CHECK(c.encoder.flat() == d.encoder.flat());
  CHECK(c.domain.flat() == d.domain.flat());
}

TEST_CASE("indistinguishable domains drive the classifier to chance") {
  DaeArchitecture arch;
  arch.encoder_hidden = {8, 4};
  arch.domain_hidden = {4};
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 0.02;
  cfg.batch_size = 16;
  Rng rng(5);
  const auto x = testsupport::random_matrix(rng, 200, 6);
  const auto m = train_dadae(x, x, x, arch, cfg);
  CHECK(m.log.back().domain_loss == doctest::Approx(std::log(2.0)).epsilon(0.1 / std::log(2.0)));
  const auto p = domain_probability(m, x);
  CHECK(std::abs(m.log.back().domain_acc - 0.5) < 0.15);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    CHECK(p(i) > 0.0);
    CHECK(p(i) < 1.0);
  }
}

TEST_CASE("divergence raises a numerical error") {
  DaeArchitecture arch;
  arch.encoder_hidden = {8, 4};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e6;
  Rng rng(6);
  const auto x = testsupport::random_matrix(rng, 40, 5, 0, 10);
  CHECK_THROWS_AS(train_dae(x, x, arch, cfg), NumericalError);
}

TEST_CASE("bad inputs are usage errors") {
  DaeArchitecture arch;
  TrainConfig cfg;
  CHECK_THROWS_AS(train_dae(Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 3), arch, cfg), UsageError);
  CHECK_THROWS_AS(train_dae(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 4), arch, cfg),
                  UsageError);
  CHECK_THROWS_AS(train_dadae(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3),
                              Eigen::MatrixXd(0, 3), arch, cfg),
                  UsageError);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(train_dae(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3), arch, cfg),
                  UsageError);
  const auto m = init_dae(3, arch, 1);
  CHECK_THROWS_AS(denoise(m, Eigen::MatrixXd::Zero(2, 4)), UsageError);
}

TEST_CASE("json round-trip preserves every parameter") {
  DaeArchitecture arch;
  arch.encoder_hidden = {6, 3};
  TrainConfig cfg;
  cfg.epochs = 2;
  Rng rng(7);
  const auto x = testsupport::random_matrix(rng, 30, 4);
  const auto m = train_dae(x, x, arch, cfg);
  const auto back = dae_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.encoder.flat() == m.encoder.flat());
  CHECK(back.decoder.flat() == m.decoder.flat());
  CHECK(denoise(back, x) == denoise(m, x));
  const auto d = train_dadae(x, x, x, arch, cfg);
  const auto dback = dadae_from_json(nlohmann::json::parse(to_json(d).dump()));
  CHECK(dback.domain.flat() == d.domain.flat());
  CHECK(dback.grl_lambda == d.grl_lambda);
}

TEST_CASE("property: gradient check passes across seeds and activations") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto g = acceptance::gradient_check(seed, 5);
    CHECK(g.configurations == 5);
    CHECK(g.max_rel_error <= 1e-4);
  }
}
