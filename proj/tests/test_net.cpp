#include "test_util.hpp"

#include "vins/net.hpp"

#include <cmath>
#include <fstream>
#include <span>

namespace vins::net {
namespace {

using testing::error_kind_of;
using testing::TempDir;

NetArch tiny_arch(int length = 24) {
  NetArch a;
  a.input_length = length;
  a.channels = {6, 4, 3, 2};
  a.kernel_len = 3;
  a.hidden = {5, 3};
  return a;
}

WindowData random_window(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  WindowData w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  return w;
}

// Textbook triple loop: out[o][t] = b[o] + sum_i sum_j w[o][i][j] x[i][t*stride + j].
MatrixXd naive_conv(const Conv1dLayer& layer, const MatrixXd& x) {
  const int lout = layer.output_length(static_cast<int>(x.cols()));
  MatrixXd y(layer.out_channels, lout);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int t = 0; t < lout; ++t) {
      double acc = layer.bias(o);
      for (int i = 0; i < layer.in_channels; ++i) {
        for (int j = 0; j < layer.kernel_len; ++j) acc += layer.weight(o, i, j) * x(i, t * layer.stride + j);
      }
      y(o, t) = acc;
    }
  }
  return y;
}

TEST(Conv1d, SmallHandExample) {
  Conv1dLayer layer(1, 1, 2, 1);
  layer.weights << 1, 1;
  MatrixXd x(1, 3);
  x << 1, 2, 3;
  const MatrixXd y = conv1d_forward(layer, x);
  ASSERT_EQ(y.cols(), 2);
  EXPECT_DOUBLE_EQ(y(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(y(0, 1), 5.0);
}

TEST(Conv1d, ImpulseKernelTruncatesInput) {
  Conv1dLayer layer(2, 2, 4, 1);
  layer.weight(0, 0, 0) = 1.0;
  layer.weight(1, 1, 0) = 1.0;
  std::mt19937_64 rng(1);
  const MatrixXd x = random_window(rng, 2, 10);
  const MatrixXd y = conv1d_forward(layer, x);
  EXPECT_EQ(y, x.leftCols(7));
}

TEST(Conv1d, MatchesNaiveLoop) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int stride : {1, 2, 3}) {
    Conv1dLayer layer(5, 7, 4, stride);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
    const MatrixXd x = random_window(rng, 5, 29);
    const MatrixXd y = conv1d_forward(layer, x);
    const MatrixXd ref = naive_conv(layer, x);
    ASSERT_EQ(y.cols(), ref.cols());
    EXPECT_LT((y - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Conv1d, ShapeErrors) {
  Conv1dLayer layer(2, 1, 5, 1);
  EXPECT_EQ(error_kind_of([&] { conv1d_forward(layer, MatrixXd::Zero(3, 10)); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(error_kind_of([&] { conv1d_forward(layer, MatrixXd::Zero(2, 4)); }), ErrorKind::ShapeMismatch);
}

TEST(Forward, ZeroParametersGiveZero) {
  const ModelParams params(tiny_arch());
  std::mt19937_64 rng(3);
  EXPECT_EQ(predict(params, random_window(rng, 6, 24)), 0.0);
}

TEST(Forward, PublishedShapeChain) {
  NetArch arch;
  EXPECT_EQ(arch.input_length, 200);
  EXPECT_EQ(arch.conv_output_length(), 173);
  EXPECT_EQ(arch.flatten_dim(), 41520);
  const ModelParams params(arch);
  EXPECT_EQ(params.conv1.output_length(200), 191);
  EXPECT_EQ(params.conv2.output_length(191), 182);
  EXPECT_EQ(params.conv3.output_length(182), 173);
  EXPECT_EQ(params.fc1.in_dim, 41520);
  EXPECT_EQ(params.fc1.out_dim, 400);
  EXPECT_EQ(params.fc2.out_dim, 40);
  EXPECT_EQ(params.fc3.out_dim, 1);
  EXPECT_EQ(params.input_length(), 200);
}

TEST(Forward, HandComputedTinyNet) {
  // One channel throughout, kernel 2, input 1..12.
  NetArch arch;
  arch.input_length = 12;
  arch.channels = {1, 1, 1, 1};
  arch.kernel_len = 2;
  arch.hidden = {1, 1};
  ModelParams p(arch);
  for (auto* c : {&p.conv1, &p.conv2, &p.conv3}) c->weights << 0.5, 0.5;  // moving average
  p.fc1.weights.setConstant(1.0 / 9.0);
  p.fc1.bias << -1.0;
  p.fc2.weights << 2.0;
  p.fc2.bias << -1.0;
  p.fc3.weights << 0.5;
  p.fc3.bias << -7.0;
  WindowData x(1, 12);
  for (int i = 0; i < 12; ++i) x(0, i) = i + 1;
  // conv3 output is 2.5 .. 10.5 (9 values, mean 6.5); fc1: 6.5 - 1 = 5.5;
  // fc2: 2 * 5.5 - 1 = 10; fc3: 0.5 * 10 - 7 = -2 (linear output may be negative).
  EXPECT_NEAR(predict(p, x), -2.0, 1e-12);
}

TEST(Forward, RejectsWrongWindowShape) {
  const ModelParams params = init_params(tiny_arch(), 1);
  EXPECT_EQ(error_kind_of([&] { predict(params, WindowData::Zero(6, 25)); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(error_kind_of([&] { predict(params, WindowData::Zero(5, 24)); }), ErrorKind::ShapeMismatch);
}

TEST(Forward, BatchMatchesSingle) {
  const ModelParams params = init_params(tiny_arch(), 4);
  std::mt19937_64 rng(4);
  std::vector<Window> windows(37);
  for (auto& w : windows) w.data = random_window(rng, 6, 24);
  const auto batch = predict_batch(params, windows);
  ASSERT_EQ(batch.size(), windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) EXPECT_NEAR(batch[i], predict(params, windows[i].data), 1e-12);
}

TEST(Forward, OutputLayerHomogeneity) {
  ModelParams params = init_params(tiny_arch(), 5);
  std::mt19937_64 rng(5);
  const WindowData x = random_window(rng, 6, 24);
  const double base = predict(params, x);
  params.fc3.weights *= -2.5;
  params.fc3.bias *= -2.5;
  EXPECT_NEAR(predict(params, x), -2.5 * base, 1e-12);
}

TEST(Loss, Examples) {
  EXPECT_EQ(loss(1.3, 1.3), 0.0);
  EXPECT_DOUBLE_EQ(loss(1.5, 1.0), 0.25);
  const std::vector<double> preds{1, 0}, labels{0, 1};
  EXPECT_DOUBLE_EQ(batch_loss(preds, labels), 1.0);
}

TEST(Backward, ZeroLossGivesZeroGradients) {
  const ModelParams params = init_params(tiny_arch(), 6);
  std::mt19937_64 rng(6);
  const auto fr = forward(params, random_window(rng, 6, 24));
  const Gradients g = backward(params, fr.cache, fr.speed);
  g.for_each_tensor([](const auto& t) { EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0); });
}

TEST(Backward, OutputLayerHandDerivative) {
  const ModelParams params = init_params(tiny_arch(), 7);
  std::mt19937_64 rng(7);
  const auto fr = forward(params, random_window(rng, 6, 24));
  const double y = 0.8;
  const Gradients g = backward(params, fr.cache, y);
  // d/dw (w.a + b - y)^2 = 2 (pred - y) a ; d/db = 2 (pred - y).
  const double r = 2.0 * (fr.speed - y);
  EXPECT_LT((g.fc3.weights.transpose() - r * fr.cache.a2.col(0)).norm(), 1e-12);
  EXPECT_NEAR(g.fc3.bias(0), r, 1e-12);
}

// One span per parameter tensor, in for_each_tensor order.
std::vector<std::span<double>> flat_views(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.for_each_tensor([&](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
  return out;
}

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-8 ? std::abs(a - b) : std::abs(a - b) / scale;
}

TEST(Backward, MatchesCentralDifferences) {
  ModelParams params = init_params(tiny_arch(16), 8);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 0.1);
  params.for_each_tensor([&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += n(rng);
  });
  const WindowData x = random_window(rng, 6, 16);
  const double y = 0.7;
  const auto fr = forward(params, x);
  Gradients g = backward(params, fr.cache, y);

  const auto tensors = flat_views(params);
  const auto grads = flat_views(g);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    for (std::size_t i = 0; i < tensors[k].size(); ++i) {
      double& w = tensors[k][i];
      const double saved = w;
      w = saved + h;
      const double up = loss(predict(params, x), y);
      w = saved - h;
      const double down = loss(predict(params, x), y);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, relative_error(grads[k][i], numeric));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Backward, BatchedAccumulationEqualsSumOfSingles) {
  const ModelParams params = init_params(tiny_arch(), 9);
  std::mt19937_64 rng(9);
  std::vector<WindowData> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_window(rng, 6, 24));
  const std::vector<double> labels{0.1, 0.5, 1.0, 1.5};
  std::vector<const WindowData*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  const auto cache = forward_batch(params, ptrs);
  Gradients batched(params.arch());
  accumulate_backward(params, cache, labels, 0.25, batched);

  Gradients summed(params.arch());
  for (int i = 0; i < 4; ++i) {
    const auto fr = forward(params, xs[static_cast<std::size_t>(i)]);
    Gradients gi = backward(params, fr.cache, labels[static_cast<std::size_t>(i)]);
    const auto src = flat_views(gi);
    const auto dst = flat_views(summed);
    for (std::size_t k = 0; k < dst.size(); ++k) {
      for (std::size_t j = 0; j < dst[k].size(); ++j) dst[k][j] += 0.25 * src[k][j];
    }
  }
  const auto a = flat_views(batched);
  const auto b = flat_views(summed);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t j = 0; j < a[k].size(); ++j) EXPECT_NEAR(a[k][j], b[k][j], 1e-12);
  }
}

TEST(Backward, StaleCacheDetected) {
  ModelParams params = init_params(tiny_arch(), 10);
  std::mt19937_64 rng(10);
  const auto fr = forward(params, random_window(rng, 6, 24));
  AdamState adam(params, 1e-3);
  Gradients g = backward(params, fr.cache, 1.0);
  adam_step(params, g, adam);
  EXPECT_EQ(error_kind_of([&] { backward(params, fr.cache, 1.0); }), ErrorKind::StaleCache);
  const ModelParams other = params;
  EXPECT_EQ(error_kind_of([&] { backward(other, forward(params, random_window(rng, 6, 24)).cache, 1.0); }),
            ErrorKind::StaleCache);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ModelParams params = init_params(tiny_arch(), 11);
  const ModelParams before = params;
  Gradients g(params.arch());
  AdamState adam(params, 1e-2);
  for (int i = 0; i < 5; ++i) adam_step(params, g, adam);
  EXPECT_TRUE(params == before);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  ModelParams params(tiny_arch());
  Gradients g(params.arch());
  g.fc3.bias(0) = 1.0;
  AdamState adam(params, 0.01);
  adam_step(params, g, adam);
  EXPECT_NEAR(params.fc3.bias(0), -0.01, 1e-9);
}

TEST(Adam, ScalarQuadraticMatchesReference) {
  // Minimize (w - 3)^2 through the fc3 bias; every other gradient is zero.
  ModelParams params(tiny_arch());
  Gradients g(params.arch());
  AdamState adam(params, 0.1);
  double w = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    g.fc3.bias(0) = 2.0 * (params.fc3.bias(0) - 3.0);
    adam_step(params, g, adam);
    const double grad = 2.0 * (w - 3.0);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mhat = m / (1 - std::pow(0.9, t));
    const double vhat = v / (1 - std::pow(0.999, t));
    w -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  }
  EXPECT_NEAR(params.fc3.bias(0), w, 1e-12);
  EXPECT_LT(std::abs(params.fc3.bias(0) - 3.0), 0.1);
}

std::vector<Window> two_class_windows(int count, int length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<Window> out;
  for (int i = 0; i < count; ++i) {
    Window w;
    const bool fast = i % 2 == 1;
    w.data = WindowData(6, length);
    for (int c = 0; c < length; ++c) {
      const double phase = 2 * 3.14159265 * (fast ? 2.0 : 1.0) * c / 100.0;
      w.data.col(c) << n(rng), n(rng), 9.81 + (fast ? 3.0 : 1.0) * std::sin(phase), n(rng), n(rng), n(rng);
    }
    w.label_speed = fast ? 1.4 : 0.6;
    w.mode = Mode::Walking;
    out.push_back(std::move(w));
  }
  return out;
}

TEST(Train, DeterministicForSeed) {
  const auto windows = two_class_windows(12, 24, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.seed = 42;
  cfg.arch = tiny_arch();
  const auto a = train(windows, cfg);
  const auto b = train(windows, cfg);
  EXPECT_TRUE(a.params == b.params);
  ASSERT_EQ(a.trace.size(), 5u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].train_loss, b.trace[i].train_loss);
  cfg.seed = 43;
  EXPECT_FALSE(train(windows, cfg).params == a.params);
}

TEST(Train, LossDecreasesAndValidationTraceIsFinite) {
  const auto windows = two_class_windows(30, 24, 2);
  const FoldPlan plan = kfold_split(windows.size(), 5, 3);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 5;
  cfg.learning_rate = 3e-3;
  cfg.seed = 1;
  cfg.arch = tiny_arch();
  const auto res = train(windows, cfg, FoldSelection{&plan, 2});
  ASSERT_EQ(res.trace.size(), 150u);
  for (const auto& e : res.trace) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    EXPECT_TRUE(std::isfinite(e.validation_loss));
  }
  EXPECT_LT(res.trace.back().train_loss, 0.2 * res.trace.front().train_loss);
  const auto unfolded = train(windows, cfg);
  EXPECT_TRUE(std::isnan(unfolded.trace.back().validation_loss));
}

TEST(Train, InsufficientData) {
  const auto windows = two_class_windows(6, 24, 3);
  TrainConfig cfg;
  cfg.arch = tiny_arch();
  EXPECT_EQ(error_kind_of([&] { train(windows, cfg); }), ErrorKind::InsufficientData);
  EXPECT_EQ(error_kind_of([&] { train({}, cfg); }), ErrorKind::InsufficientData);
}

TEST(Weights, SaveLoadRoundTripIsBitExact) {
  TempDir dir;
  const ModelParams params = init_params(tiny_arch(), 12);
  save_weights(params, dir / "w.bin");
  const ModelParams back = load_weights(dir / "w.bin");
  EXPECT_TRUE(back == params);
  EXPECT_EQ(back.input_length(), 24);
  save_weights(back, dir / "w2.bin");
  EXPECT_EQ(testing::read_bytes(dir / "w.bin"), testing::read_bytes(dir / "w2.bin"));
}

TEST(Weights, FileLayout) {
  TempDir dir;
  const ModelParams params = init_params(tiny_arch(), 13);
  save_weights(params, dir / "w.bin");
  const std::string bytes = testing::read_bytes(dir / "w.bin");
  EXPECT_EQ(bytes.substr(0, 9), "VINS-NET1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 6u);  // u32 layer count, little-endian
  EXPECT_EQ(bytes[10], 0);
  EXPECT_EQ(bytes[13], 0);  // first layer kind: conv
  const std::size_t header = 9 + 4 + 3 * (1 + 16) + 3 * (1 + 8);
  EXPECT_EQ(bytes.size(), header + params.parameter_count() * 8);
}

TEST(Weights, CorruptFilesRejected) {
  TempDir dir;
  save_weights(init_params(tiny_arch(), 14), dir / "w.bin");
  const std::string bytes = testing::read_bytes(dir / "w.bin");
  testing::write_text(dir / "trunc.bin", bytes.substr(0, bytes.size() - 5));
  EXPECT_EQ(error_kind_of([&] { load_weights(dir / "trunc.bin"); }), ErrorKind::CorruptWeights);
  std::string bad = bytes;
  bad[0] = 'X';
  testing::write_text(dir / "magic.bin", bad);
  EXPECT_EQ(error_kind_of([&] { load_weights(dir / "magic.bin"); }), ErrorKind::CorruptWeights);
  testing::write_text(dir / "extra.bin", bytes + "junk");
  EXPECT_EQ(error_kind_of([&] { load_weights(dir / "extra.bin"); }), ErrorKind::CorruptWeights);
  EXPECT_EQ(error_kind_of([&] { load_weights(dir / "missing.bin"); }), ErrorKind::IoError);
}

// Network whose output equals the constant value of input channel 0.
ModelParams passthrough_net() {
  NetArch arch;
  arch.input_length = 8;
  arch.channels = {6, 1, 1, 1};
  arch.kernel_len = 2;
  arch.hidden = {1, 1};
  ModelParams p(arch);
  p.conv1.weight(0, 0, 0) = 1.0;
  p.conv2.weight(0, 0, 0) = 1.0;
  p.conv3.weight(0, 0, 0) = 1.0;
  p.fc1.weights(0, 0) = 1.0;
  p.fc2.weights(0, 0) = 1.0;
  p.fc3.weights(0, 0) = 1.0;
  return p;
}

Window constant_window(double value, double label, std::optional<Mode> mode = std::nullopt) {
  Window w;
  w.data = WindowData::Zero(6, 8);
  w.data.row(0).setConstant(value);
  w.label_speed = label;
  w.mode = mode;
  return w;
}

TEST(Evaluate, PerfectPredictionsGiveZero) {
  const auto p = passthrough_net();
  const auto res = evaluate(p, {constant_window(0.5, 0.5), constant_window(1.25, 1.25)});
  EXPECT_EQ(res.rmse, 0.0);
}

TEST(Evaluate, HandExample) {
  const auto res = evaluate(passthrough_net(), {constant_window(0.0, 1.0), constant_window(2.0, 1.0)});
  EXPECT_DOUBLE_EQ(res.rmse, 1.0);
  EXPECT_EQ(res.records[1].prediction, 2.0);
}

TEST(Evaluate, MeanPredictorGivesLabelStdDev) {
  const std::vector<double> labels{0.2, 0.9, 1.1, 1.6, 0.4};
  double mean = 0.0;
  for (double l : labels) mean += l / labels.size();
  double var = 0.0;
  for (double l : labels) var += (l - mean) * (l - mean) / labels.size();
  std::vector<Window> ws;
  for (double l : labels) ws.push_back(constant_window(mean, l));
  EXPECT_NEAR(evaluate(passthrough_net(), ws).rmse, std::sqrt(var), 1e-12);
}

TEST(Evaluate, TwoPassOracleAndModeBreakdown) {
  const ModelParams params = init_params(tiny_arch(), 15);
  std::mt19937_64 rng(15);
  std::vector<Window> ws;
  for (int i = 0; i < 23; ++i) {
    Window w;
    w.data = random_window(rng, 6, 24);
    w.label_speed = 0.1 * i;
    if (i % 3 == 0) w.mode = Mode::Stairs;
    else if (i % 3 == 1) w.mode = Mode::Walking;
    ws.push_back(std::move(w));
  }
  const auto res = evaluate(params, ws);
  double ss = 0.0;
  for (const auto& w : ws) {
    const double e = predict(params, w.data) - w.label_speed;
    ss += e * e;
  }
  EXPECT_NEAR(res.rmse, std::sqrt(ss / ws.size()), 1e-12);
  std::size_t total = 0;
  for (const auto& row : rmse_by_mode(res.records)) total += row.count;
  EXPECT_EQ(total, ws.size());
  EXPECT_EQ(error_kind_of([&] { evaluate(params, {}); }), ErrorKind::InsufficientData);
}

TEST(Evaluate, CsvExport) {
  TempDir dir;
  const auto res = evaluate(passthrough_net(), {constant_window(0.5, 1.0, Mode::Static), constant_window(2.0, 1.0)});
  write_eval_csv(res.records, dir / "eval.csv");
  std::ifstream in(dir / "eval.csv");
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_EQ(header, "label,prediction,mode");
  EXPECT_EQ(row1, "1,0.5,static");
  EXPECT_EQ(row2, "1,2,");
}

}  // namespace
}  // namespace vins::net
