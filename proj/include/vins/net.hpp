#pragma once

#include "vins/datapipe.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace vins::net {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Valid (unpadded) 1-D cross-correlation. Weights are stored as an
/// out x (in * kernel) matrix; column c * kernel + j holds tap j of input channel c,
/// which is the row-major layout of an out x in x kernel tensor.
struct Conv1dLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_len = 10;
  int stride = 1;
  MatrixXd weights;
  VectorXd bias;

  Conv1dLayer() = default;
  Conv1dLayer(int in, int out, int kernel, int stride_);

  int output_length(int input_length) const { return (input_length - kernel_len) / stride + 1; }
  double& weight(int out, int in, int tap) { return weights(out, in * kernel_len + tap); }
  double weight(int out, int in, int tap) const { return weights(out, in * kernel_len + tap); }
};

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  MatrixXd weights;  // out x in
  VectorXd bias;

  DenseLayer() = default;
  DenseLayer(int in, int out);
};

/// Layer sizes of the regressor. Defaults reproduce the published network:
/// 6-60-120-240 channel convolutions with kernel 10, stride 1, then 400 and 40
/// hidden units before the scalar output.
struct NetArch {
  int input_length = 200;
  std::array<int, 4> channels{6, 60, 120, 240};
  int kernel_len = 10;
  int stride = 1;
  std::array<int, 2> hidden{400, 40};

  /// Length of the last convolution's output; L - 3 (k - 1) for stride 1.
  int conv_output_length() const;
  int flatten_dim() const { return channels[3] * conv_output_length(); }
};

struct ModelParams {
  Conv1dLayer conv1, conv2, conv3;
  DenseLayer fc1, fc2, fc3;
  // Bumped on every parameter update; lets backward() detect caches from older weights.
  std::uint64_t revision = 0;

  ModelParams() = default;
  explicit ModelParams(const NetArch& arch);  // zero-initialized

  NetArch arch() const;
  int input_length() const;
  std::size_t parameter_count() const;

  /// Visits every parameter tensor (weights then bias, layer order conv1..fc3).
  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto* c : {&conv1, &conv2, &conv3}) { f(c->weights); f(c->bias); }
    for (auto* d : {&fc1, &fc2, &fc3}) { f(d->weights); f(d->bias); }
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (const auto* c : {&conv1, &conv2, &conv3}) { f(c->weights); f(c->bias); }
    for (const auto* d : {&fc1, &fc2, &fc3}) { f(d->weights); f(d->bias); }
  }

  void set_zero();
  bool all_finite() const;
};

/// Parameter values are compared; the revision counter is ignored.
bool operator==(const ModelParams& a, const ModelParams& b);

using Gradients = ModelParams;

/// He-style uniform fan-in initialization, zero biases.
ModelParams init_params(const NetArch& arch, std::uint64_t seed);

MatrixXd conv1d_forward(const Conv1dLayer& layer, const MatrixXd& x);

/// Activations of one forward pass over a batch of B windows. Convolution
/// activations are stored time-major: sample b occupies rows [b * L, (b + 1) * L).
struct ForwardCache {
  std::uint64_t revision = 0;
  const ModelParams* params = nullptr;
  int batch = 0;
  std::array<MatrixXd, 3> cols;    // (L_out * B) x (in * kernel) im2col of each conv input
  std::array<MatrixXd, 3> conv_z;  // (L_out * B) x out pre-activations
  MatrixXd flat;                   // flatten_dim x B
  MatrixXd z1, z2;                 // dense pre-activations, hidden x B
  MatrixXd a1, a2;
  VectorXd output;                 // B
};

struct ForwardResult {
  double speed = 0.0;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const WindowData& window);
ForwardCache forward_batch(const ModelParams& params, std::span<const WindowData* const> windows);
double predict(const ModelParams& params, const WindowData& window);
std::vector<double> predict_batch(const ModelParams& params, const std::vector<Window>& windows);

double loss(double speed_pred, double label_speed);
/// Mean squared error over a mini-batch.
double batch_loss(std::span<const double> preds, std::span<const double> labels);

/// Gradient of loss(forward(window), label) w.r.t. every parameter.
Gradients backward(const ModelParams& params, const ForwardCache& cache, double label);

/// Adds scale * d(sum_b loss_b)/d(params) into `grads` for a batched cache.
void accumulate_backward(const ModelParams& params, const ForwardCache& cache,
                         std::span<const double> labels, double scale, Gradients& grads);

struct AdamState {
  std::uint64_t step = 0;
  Gradients m;
  Gradients v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double learning_rate = 1e-4;

  AdamState() = default;
  AdamState(const ModelParams& like, double lr);
};

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 10;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  NetArch arch;  // input_length is taken from the training windows
};

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN without a validation fold
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLoss> trace;
};

struct FoldSelection {
  const FoldPlan* plan = nullptr;
  int fold = 0;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

TrainResult train(const std::vector<Window>& windows, const TrainConfig& cfg,
                  std::optional<FoldSelection> fold = std::nullopt,
                  const EpochCallback& on_epoch = {});

struct EvalRecord {
  double label = 0.0;
  double prediction = 0.0;
  std::optional<Mode> mode;
};

struct EvalResult {
  double rmse = 0.0;
  std::vector<EvalRecord> records;
};

EvalResult evaluate(const ModelParams& params, const std::vector<Window>& windows);

struct ModeRmse {
  std::optional<Mode> mode;  // nullopt: unlabeled windows
  std::size_t count = 0;
  double rmse = 0.0;
};

std::vector<ModeRmse> rmse_by_mode(const std::vector<EvalRecord>& records);

void write_eval_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
void write_loss_trace_csv(const std::vector<EpochLoss>& trace, const std::filesystem::path& path);

void save_weights(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_weights(const std::filesystem::path& path);

}  // namespace vins::net
