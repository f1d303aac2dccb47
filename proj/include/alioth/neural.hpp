#pragma once

// Feed-forward networks with reverse-mode gradients, the denoising
// auto-encoder, and its domain-adversarial variant.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "alioth/common.hpp"
#include "json.hpp"

namespace alioth::neural {

enum class Activation { Identity, Relu, Tanh, Logistic };

struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;

  void validate() const;
};

struct Dense {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

// Parameter-shaped gradient buffers.
struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  void set_zero();
  Gradients& operator+=(const Gradients& other);
  std::vector<double> flat() const;
};

// Activations of one forward pass. inputs[l] feeds layer l; outputs[l] is
// its activated output.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> outputs;
};

// Samples are columns: X is (input_dim x batch).
class Mlp {
 public:
  Mlp() = default;
  // Uniform init with limit sqrt(6 / fan_in) for ReLU layers and
  // sqrt(3 / fan_in) otherwise; zero biases.
  Mlp(MlpSpec spec, Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, ForwardCache& cache) const;

  // Propagates dL/d(output) back through the network. Parameter gradients
  // are accumulated into `grads` (which must be shaped by zero_gradients);
  // returns dL/dX. If `wrt_preactivation`, `grad_out` is already taken
  // with respect to the last layer's pre-activation.
  Eigen::MatrixXd backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                           Gradients& grads, bool wrt_preactivation = false) const;

  Gradients zero_gradients() const;
  void sgd_step(const Gradients& grads, double lr);

  std::size_t n_params() const;
  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& params);

 private:
  Activation activation_of(std::size_t layer) const;

  MlpSpec spec_;
  std::vector<Dense> layers_;
};

enum class Loss { SquaredError, Logistic };

// Value and gradient w.r.t. the network output. SquaredError: mean over
// samples of the per-sample squared norm. Logistic: mean binary
// cross-entropy of probabilities against 0/1 targets.
struct LossValue {
  double value = 0.0;
  Eigen::MatrixXd grad;
};
LossValue evaluate_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, Loss loss);

// Full gradient of a loss over a batch. For a Logistic loss on a network
// with a logistic output the gradient flows through the pre-activation.
double loss_and_grad(const Mlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& target,
                     Loss loss, Gradients& grads);

// Identity forward, gradient scaled by -lambda backward.
class GradientReversal {
 public:
  explicit GradientReversal(double lambda);
  double lambda() const { return lambda_; }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const { return x; }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& g) const { return -lambda_ * g; }

 private:
  double lambda_;
};

// Warm-up schedule for the reversal coefficient over progress p in [0, 1].
double grl_schedule(double p, double lambda_max, double gamma = 10.0);

struct TrainConfig {
  double lr = 1e-2;
  int epochs = 50;
  int batch_size = 64;
  std::uint64_t seed = 1;
  double lambda_max = 1.0;
  double lambda_gamma = 10.0;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double recon_mse = 0.0;    // mean squared error per element
  double domain_loss = 0.0;  // DADAE only
  double domain_acc = 0.0;   // DADAE only
  double lambda = 0.0;       // DADAE only
};

struct DaeModel {
  Mlp encoder;
  Mlp decoder;
  std::uint64_t seed = 0;
  std::vector<EpochLog> log;

  std::size_t dim() const { return encoder.input_dim(); }
};

struct DadaeModel {
  Mlp encoder;
  Mlp decoder;
  Mlp domain;
  double grl_lambda = 0.0;
  std::uint64_t seed = 0;
  std::vector<EpochLog> log;

  std::size_t dim() const { return encoder.input_dim(); }
  DaeModel as_dae() const;
};

struct DaeArchitecture {
  std::vector<int> encoder_hidden{128, 32};  // last entry is the code size
  std::vector<int> domain_hidden{16};
  Activation hidden = Activation::Relu;
};

// Initial parameters only (what train_dae returns for epochs = 0).
DaeModel init_dae(std::size_t dim, const DaeArchitecture& arch, std::uint64_t seed);

// Mini-batch SGD on the reconstruction loss. Rows of `noisy` and `clean`
// are paired samples. Throws NumericalError on a non-finite loss.
DaeModel train_dae(const Eigen::MatrixXd& noisy, const Eigen::MatrixXd& clean,
                   const DaeArchitecture& arch, const TrainConfig& cfg);

// Reconstruction on labelled source pairs plus the adversarial domain loss
// (source d = 0, target d = 1) through a gradient reversal layer.
DadaeModel train_dadae(const Eigen::MatrixXd& source_noisy, const Eigen::MatrixXd& source_clean,
                       const Eigen::MatrixXd& target, const DaeArchitecture& arch,
                       const TrainConfig& cfg,
                       const std::optional<DaeModel>& warm_start = std::nullopt);

// One mini-batch of reconstruction gradients; samples are columns.
// Returns the loss.
double dae_gradients(const DaeModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     Gradients& ge, Gradients& gd);

struct DadaeStep {
  double recon = 0.0;
  double domain = 0.0;
  Eigen::MatrixXd prob;  // 1 x (source + target) domain probabilities
};

// One mini-batch of the adversarial objective; samples are columns. The
// decoder gets the reconstruction gradient, the domain head the domain
// loss gradient (source d = 0, target d = 1), and the encoder the
// reconstruction gradient plus the domain gradient reversed by `lambda`.
DadaeStep dadae_gradients(const DadaeModel& m, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                          const Eigen::MatrixXd& xt, double lambda, Gradients& ge, Gradients& gd,
                          Gradients& gc);

// decode(encode(x)) row by row; X is rows x dim.
Eigen::MatrixXd denoise(const DaeModel& model, const Eigen::MatrixXd& X);
Eigen::MatrixXd denoise(const DadaeModel& model, const Eigen::MatrixXd& X);

// Domain probability per row.
Eigen::VectorXd domain_probability(const DadaeModel& model, const Eigen::MatrixXd& X);

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DaeModel& m);
nlohmann::json to_json(const DadaeModel& m);
DaeModel dae_from_json(const nlohmann::json& j);
DadaeModel dadae_from_json(const nlohmann::json& j);

}  // namespace alioth::neural
