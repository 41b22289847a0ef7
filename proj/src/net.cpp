#include "vins/net.hpp"
#include "vins/error.hpp"

#include "io_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace vins::net {

namespace {

constexpr char kMagic[] = "VINS-NET1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// Time-major im2col: cols(b * L_out + t, c * K + j) = x(b * L_in + t * stride + j, c).
MatrixXd im2col(const MatrixXd& x, int batch, int in_len, const Conv1dLayer& layer) {
  const int out_len = layer.output_length(in_len);
  const int k = layer.kernel_len;
  MatrixXd cols(static_cast<Eigen::Index>(out_len) * batch,
                static_cast<Eigen::Index>(layer.in_channels) * k);
  for (int c = 0; c < layer.in_channels; ++c) {
    for (int j = 0; j < k; ++j) {
      double* dst = cols.col(c * k + j).data();
      const double* src = x.col(c).data();
      for (int b = 0; b < batch; ++b) {
        const double* s = src + static_cast<std::ptrdiff_t>(b) * in_len + j;
        double* d = dst + static_cast<std::ptrdiff_t>(b) * out_len;
        for (int t = 0; t < out_len; ++t) d[t] = s[t * layer.stride];
      }
    }
  }
  return cols;
}

MatrixXd col2im(const MatrixXd& dcols, int batch, int in_len, const Conv1dLayer& layer) {
  const int out_len = layer.output_length(in_len);
  const int k = layer.kernel_len;
  MatrixXd dx = MatrixXd::Zero(static_cast<Eigen::Index>(in_len) * batch, layer.in_channels);
  for (int c = 0; c < layer.in_channels; ++c) {
    double* dst = dx.col(c).data();
    for (int j = 0; j < k; ++j) {
      const double* src = dcols.col(c * k + j).data();
      for (int b = 0; b < batch; ++b) {
        double* d = dst + static_cast<std::ptrdiff_t>(b) * in_len + j;
        const double* s = src + static_cast<std::ptrdiff_t>(b) * out_len;
        for (int t = 0; t < out_len; ++t) d[t * layer.stride] += s[t];
      }
    }
  }
  return dx;
}

MatrixXd relu(const MatrixXd& z) { return z.cwiseMax(0.0); }

MatrixXd relu_mask(const MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

// Raw views over every parameter tensor in a fixed order.
std::vector<Eigen::Map<VectorXd>> flat_views(ModelParams& p) {
  std::vector<Eigen::Map<VectorXd>> views;
  p.for_each_tensor([&](auto& t) { views.emplace_back(t.data(), t.size()); });
  return views;
}

std::vector<Eigen::Map<const VectorXd>> flat_views(const ModelParams& p) {
  std::vector<Eigen::Map<const VectorXd>> views;
  p.for_each_tensor([&](const auto& t) { views.emplace_back(t.data(), t.size()); });
  return views;
}

void require_same_shape(const ModelParams& a, const ModelParams& b) {
  const auto va = flat_views(a);
  const auto vb = flat_views(b);
  if (va.size() != vb.size()) throw Error(ErrorKind::ShapeMismatch, "parameter tensor count differs");
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].size() != vb[i].size()) {
      throw Error(ErrorKind::ShapeMismatch, "parameter tensor " + std::to_string(i) + " has " +
                                                std::to_string(vb[i].size()) + " values, expected " +
                                                std::to_string(va[i].size()));
    }
  }
}

void check_window(const ModelParams& params, const WindowData& w) {
  if (w.rows() != params.conv1.in_channels || w.cols() != params.input_length()) {
    throw Error(ErrorKind::ShapeMismatch, "window is " + shape_str(w.rows(), w.cols()) +
                                              ", network expects " +
                                              shape_str(params.conv1.in_channels, params.input_length()));
  }
}

}  // namespace

Conv1dLayer::Conv1dLayer(int in, int out, int kernel, int stride_)
    : in_channels(in), out_channels(out), kernel_len(kernel), stride(stride_),
      weights(MatrixXd::Zero(out, static_cast<Eigen::Index>(in) * kernel)), bias(VectorXd::Zero(out)) {}

DenseLayer::DenseLayer(int in, int out)
    : in_dim(in), out_dim(out), weights(MatrixXd::Zero(out, in)), bias(VectorXd::Zero(out)) {}

int NetArch::conv_output_length() const {
  int len = input_length;
  for (int i = 0; i < 3; ++i) {
    if (len < kernel_len) return 0;
    len = (len - kernel_len) / stride + 1;
  }
  return len;
}

ModelParams::ModelParams(const NetArch& arch) {
  if (arch.kernel_len < 1 || arch.stride < 1 || arch.conv_output_length() < 1) {
    throw Error(ErrorKind::ShapeMismatch, "input length " + std::to_string(arch.input_length) +
                                              " is too short for three kernel-" +
                                              std::to_string(arch.kernel_len) + " convolutions");
  }
  conv1 = Conv1dLayer(arch.channels[0], arch.channels[1], arch.kernel_len, arch.stride);
  conv2 = Conv1dLayer(arch.channels[1], arch.channels[2], arch.kernel_len, arch.stride);
  conv3 = Conv1dLayer(arch.channels[2], arch.channels[3], arch.kernel_len, arch.stride);
  fc1 = DenseLayer(arch.flatten_dim(), arch.hidden[0]);
  fc2 = DenseLayer(arch.hidden[0], arch.hidden[1]);
  fc3 = DenseLayer(arch.hidden[1], 1);
}

int ModelParams::input_length() const {
  if (conv3.out_channels == 0) return 0;
  int len = fc1.in_dim / conv3.out_channels;
  for (const auto* c : {&conv3, &conv2, &conv1}) len = (len - 1) * c->stride + c->kernel_len;
  return len;
}

NetArch ModelParams::arch() const {
  NetArch a;
  a.input_length = input_length();
  a.channels = {conv1.in_channels, conv1.out_channels, conv2.out_channels, conv3.out_channels};
  a.kernel_len = conv1.kernel_len;
  a.stride = conv1.stride;
  a.hidden = {fc1.out_dim, fc2.out_dim};
  return a;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

void ModelParams::set_zero() {
  for_each_tensor([](auto& t) { t.setZero(); });
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  const auto va = flat_views(a);
  const auto vb = flat_views(b);
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].size() != vb[i].size() || va[i] != vb[i]) return false;
  }
  return a.conv1.kernel_len == b.conv1.kernel_len && a.conv1.stride == b.conv1.stride;
}

ModelParams init_params(const NetArch& arch, std::uint64_t seed) {
  ModelParams p(arch);
  std::mt19937_64 rng(seed);
  auto fill = [&](MatrixXd& w, int fan_in) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = limit * dist(rng);
  };
  for (auto* c : {&p.conv1, &p.conv2, &p.conv3}) fill(c->weights, c->in_channels * c->kernel_len);
  for (auto* d : {&p.fc1, &p.fc2, &p.fc3}) fill(d->weights, d->in_dim);
  return p;
}

MatrixXd conv1d_forward(const Conv1dLayer& layer, const MatrixXd& x) {
  if (x.rows() != layer.in_channels) {
    throw Error(ErrorKind::ShapeMismatch, "conv input has " + std::to_string(x.rows()) +
                                              " channels, layer expects " +
                                              std::to_string(layer.in_channels));
  }
  if (x.cols() < layer.kernel_len) {
    throw Error(ErrorKind::ShapeMismatch, "conv input length " + std::to_string(x.cols()) +
                                              " shorter than kernel " + std::to_string(layer.kernel_len));
  }
  const int in_len = static_cast<int>(x.cols());
  const MatrixXd xt = x.transpose();
  const MatrixXd cols = im2col(xt, 1, in_len, layer);
  MatrixXd z = cols * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  return z.transpose();
}

ForwardCache forward_batch(const ModelParams& params, std::span<const WindowData* const> windows) {
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "empty batch");
  const int batch = static_cast<int>(windows.size());
  const int length = params.input_length();
  for (const auto* w : windows) check_window(params, *w);

  ForwardCache cache;
  cache.revision = params.revision;
  cache.params = &params;
  cache.batch = batch;

  MatrixXd x(static_cast<Eigen::Index>(length) * batch, params.conv1.in_channels);
  for (int b = 0; b < batch; ++b) x.middleRows(static_cast<Eigen::Index>(b) * length, length) = windows[b]->transpose();

  int len = length;
  const std::array<const Conv1dLayer*, 3> convs{&params.conv1, &params.conv2, &params.conv3};
  for (int i = 0; i < 3; ++i) {
    const auto& layer = *convs[i];
    cache.cols[i] = im2col(x, batch, len, layer);
    cache.conv_z[i].noalias() = cache.cols[i] * layer.weights.transpose();
    cache.conv_z[i].rowwise() += layer.bias.transpose();
    x = relu(cache.conv_z[i]);
    len = layer.output_length(len);
  }

  const int channels = params.conv3.out_channels;
  cache.flat.resize(static_cast<Eigen::Index>(channels) * len, batch);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      cache.flat.col(b).segment(static_cast<Eigen::Index>(c) * len, len) =
          x.col(c).segment(static_cast<Eigen::Index>(b) * len, len);
    }
  }

  cache.z1.noalias() = params.fc1.weights * cache.flat;
  cache.z1.colwise() += params.fc1.bias;
  cache.a1 = relu(cache.z1);
  cache.z2.noalias() = params.fc2.weights * cache.a1;
  cache.z2.colwise() += params.fc2.bias;
  cache.a2 = relu(cache.z2);
  MatrixXd out = params.fc3.weights * cache.a2;
  out.colwise() += params.fc3.bias;
  cache.output = out.row(0).transpose();
  return cache;
}

ForwardResult forward(const ModelParams& params, const WindowData& window) {
  const WindowData* ptr = &window;
  ForwardResult r;
  r.cache = forward_batch(params, std::span<const WindowData* const>(&ptr, 1));
  r.speed = r.cache.output(0);
  return r;
}

double predict(const ModelParams& params, const WindowData& window) {
  return forward(params, window).speed;
}

std::vector<double> predict_batch(const ModelParams& params, const std::vector<Window>& windows) {
  constexpr std::size_t kChunk = 32;
  std::vector<double> preds;
  preds.reserve(windows.size());
  std::vector<const WindowData*> ptrs;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    ptrs.clear();
    for (std::size_t i = start; i < std::min(windows.size(), start + kChunk); ++i) ptrs.push_back(&windows[i].data);
    const auto cache = forward_batch(params, ptrs);
    for (Eigen::Index i = 0; i < cache.output.size(); ++i) preds.push_back(cache.output(i));
  }
  return preds;
}

double loss(double speed_pred, double label_speed) {
  const double e = speed_pred - label_speed;
  return e * e;
}

double batch_loss(std::span<const double> preds, std::span<const double> labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "prediction and label counts differ or are empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += loss(preds[i], labels[i]);
  return sum / static_cast<double>(preds.size());
}

void accumulate_backward(const ModelParams& params, const ForwardCache& cache,
                         std::span<const double> labels, double scale, Gradients& grads) {
  if (cache.params != &params || cache.revision != params.revision || cache.batch == 0) {
    throw Error(ErrorKind::StaleCache, "forward cache does not belong to these parameters");
  }
  if (static_cast<int>(labels.size()) != cache.batch) {
    throw Error(ErrorKind::ShapeMismatch, "label count does not match cached batch");
  }
  require_same_shape(params, grads);
  const int batch = cache.batch;

  // dL/d(output) for L = sum_b (out_b - y_b)^2
  Eigen::RowVectorXd g(batch);
  for (int b = 0; b < batch; ++b) g(b) = scale * 2.0 * (cache.output(b) - labels[b]);

  grads.fc3.weights.noalias() += g * cache.a2.transpose();
  grads.fc3.bias(0) += g.sum();
  MatrixXd dz = (params.fc3.weights.transpose() * g).cwiseProduct(relu_mask(cache.z2));

  grads.fc2.weights.noalias() += dz * cache.a1.transpose();
  grads.fc2.bias += dz.rowwise().sum();
  dz = (params.fc2.weights.transpose() * dz).cwiseProduct(relu_mask(cache.z1));

  grads.fc1.weights.noalias() += dz * cache.flat.transpose();
  grads.fc1.bias += dz.rowwise().sum();
  const MatrixXd dflat = params.fc1.weights.transpose() * dz;

  // Unflatten into the time-major layout of conv3's activation, then apply its ReLU mask.
  const int channels = params.conv3.out_channels;
  const auto len3 = static_cast<int>(cache.conv_z[2].rows()) / batch;
  MatrixXd dconv(static_cast<Eigen::Index>(len3) * batch, channels);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      dconv.col(c).segment(static_cast<Eigen::Index>(b) * len3, len3) =
          dflat.col(b).segment(static_cast<Eigen::Index>(c) * len3, len3);
    }
  }
  dconv = dconv.cwiseProduct(relu_mask(cache.conv_z[2]));

  const std::array<const Conv1dLayer*, 3> convs{&params.conv1, &params.conv2, &params.conv3};
  const std::array<Conv1dLayer*, 3> gconvs{&grads.conv1, &grads.conv2, &grads.conv3};
  for (int i = 2; i >= 0; --i) {
    gconvs[i]->weights.noalias() += dconv.transpose() * cache.cols[i];
    gconvs[i]->bias += dconv.colwise().sum().transpose();
    if (i == 0) break;
    const MatrixXd dcols = dconv * convs[i]->weights;
    const int in_len = static_cast<int>(cache.conv_z[i - 1].rows()) / batch;
    dconv = col2im(dcols, batch, in_len, *convs[i]).cwiseProduct(relu_mask(cache.conv_z[i - 1]));
  }
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, double label) {
  if (cache.batch != 1) throw Error(ErrorKind::ShapeMismatch, "backward expects a single-sample cache");
  Gradients grads(params.arch());
  accumulate_backward(params, cache, std::span<const double>(&label, 1), 1.0, grads);
  return grads;
}

AdamState::AdamState(const ModelParams& like, double lr)
    : m(like.arch()), v(like.arch()), learning_rate(lr) {}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
  require_same_shape(params, grads);
  require_same_shape(params, state.m);
  require_same_shape(params, state.v);
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto p = flat_views(params);
  const auto g = flat_views(grads);
  auto m = flat_views(state.m);
  auto v = flat_views(state.v);
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i].cwiseAbs2();
    p[i].array() -= state.learning_rate * (m[i].array() / c1) /
                    ((v[i].array() / c2).sqrt() + state.eps);
  }
  ++params.revision;
}

TrainResult train(const std::vector<Window>& windows, const TrainConfig& cfg,
                  std::optional<FoldSelection> fold, const EpochCallback& on_epoch) {
  if (cfg.epochs <= 0 || cfg.batch_size <= 0 || !(cfg.learning_rate > 0.0)) {
    throw Error(ErrorKind::BadArguments, "epochs, batch size and learning rate must be positive");
  }
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "no training windows");
  const auto length = windows.front().data.cols();
  for (const auto& w : windows) {
    if (w.data.cols() != length || w.data.rows() != 6) {
      throw Error(ErrorKind::ShapeMismatch, "windows must share one 6 x L shape");
    }
  }

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  if (fold) {
    if (fold->plan == nullptr || fold->plan->assignments.size() != windows.size() || fold->fold < 0 ||
        fold->fold >= fold->plan->k) {
      throw Error(ErrorKind::BadArguments, "fold plan does not match the window list");
    }
    train_idx = fold->plan->training_indices(fold->fold);
    val_idx = fold->plan->validation_indices(fold->fold);
  } else {
    train_idx.resize(windows.size());
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  }
  if (train_idx.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw Error(ErrorKind::InsufficientData, std::to_string(train_idx.size()) +
                                                 " training windows, batch size " +
                                                 std::to_string(cfg.batch_size));
  }

  NetArch arch = cfg.arch;
  arch.input_length = static_cast<int>(length);
  TrainResult result{init_params(arch, cfg.seed), {}};
  ModelParams& params = result.params;
  AdamState adam(params, cfg.learning_rate);
  Gradients grads(arch);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<const WindowData*> batch;
  std::vector<double> labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&windows[train_idx[i]].data);
        labels.push_back(windows[train_idx[i]].label_speed);
      }
      const ForwardCache cache = forward_batch(params, batch);
      for (std::size_t i = 0; i < labels.size(); ++i) loss_sum += loss(cache.output(static_cast<Eigen::Index>(i)), labels[i]);
      grads.set_zero();
      accumulate_backward(params, cache, labels, 1.0 / static_cast<double>(labels.size()), grads);
      adam_step(params, grads, adam);
    }

    EpochLoss entry{epoch, loss_sum / static_cast<double>(train_idx.size()),
                    std::numeric_limits<double>::quiet_NaN()};
    if (!val_idx.empty()) {
      double sum = 0.0;
      std::vector<const WindowData*> ptrs;
      for (std::size_t i = 0; i < val_idx.size(); ++i) {
        ptrs.push_back(&windows[val_idx[i]].data);
        if (ptrs.size() == 32 || i + 1 == val_idx.size()) {
          const auto cache = forward_batch(params, ptrs);
          const std::size_t base = i + 1 - ptrs.size();
          for (std::size_t j = 0; j < ptrs.size(); ++j) {
            sum += loss(cache.output(static_cast<Eigen::Index>(j)), windows[val_idx[base + j]].label_speed);
          }
          ptrs.clear();
        }
      }
      entry.validation_loss = sum / static_cast<double>(val_idx.size());
    }
    result.trace.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

EvalResult evaluate(const ModelParams& params, const std::vector<Window>& windows) {
  if (windows.empty()) throw Error(ErrorKind::InsufficientData, "nothing to evaluate");
  const auto preds = predict_batch(params, windows);
  EvalResult r;
  r.records.reserve(windows.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    r.records.push_back({windows[i].label_speed, preds[i], windows[i].mode});
    sum += loss(preds[i], windows[i].label_speed);
  }
  r.rmse = std::sqrt(sum / static_cast<double>(windows.size()));
  return r;
}

std::vector<ModeRmse> rmse_by_mode(const std::vector<EvalRecord>& records) {
  std::vector<ModeRmse> out;
  auto add = [&](std::optional<Mode> mode) {
    ModeRmse row{mode, 0, 0.0};
    double sum = 0.0;
    for (const auto& r : records) {
      if (r.mode != mode) continue;
      ++row.count;
      sum += loss(r.prediction, r.label);
    }
    if (row.count == 0) return;
    row.rmse = std::sqrt(sum / static_cast<double>(row.count));
    out.push_back(row);
  };
  for (Mode m : kAllModes) add(m);
  add(std::nullopt);
  return out;
}

void write_eval_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "label,prediction,mode\n";
  for (const auto& r : records) {
    out << detail::format_double(r.label) << ',' << detail::format_double(r.prediction) << ','
        << (r.mode ? mode_name(*r.mode) : std::string_view{}) << '\n';
  }
}

void write_loss_trace_csv(const std::vector<EpochLoss>& trace, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : trace) {
    out << e.epoch << ',' << detail::format_double(e.train_loss) << ',';
    if (!std::isnan(e.validation_loss)) out << detail::format_double(e.validation_loss);
    out << '\n';
  }
}

void save_weights(const ModelParams& params, const std::filesystem::path& path) {
  auto out = detail::open_output(path, true);
  out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
  detail::write_le<std::uint32_t>(out, 6);
  auto write_matrix = [&](const auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) detail::write_le(out, static_cast<double>(m(r, c)));
  };
  for (const auto* c : {&params.conv1, &params.conv2, &params.conv3}) {
    detail::write_le<std::uint8_t>(out, 0);
    for (int d : {c->out_channels, c->in_channels, c->kernel_len, c->stride})
      detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    write_matrix(c->weights);
    write_matrix(c->bias);
  }
  for (const auto* d : {&params.fc1, &params.fc2, &params.fc3}) {
    detail::write_le<std::uint8_t>(out, 1);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d->out_dim));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d->in_dim));
    write_matrix(d->weights);
    write_matrix(d->bias);
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

ModelParams load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  auto corrupt = [&](const std::string& what) {
    return Error(ErrorKind::CorruptWeights, path.string() + ": " + what);
  };
  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::string_view(magic, kMagicLen) != std::string_view(kMagic, kMagicLen)) {
    throw corrupt("bad magic");
  }
  std::uint32_t count = 0;
  if (!detail::read_le(in, count) || count != 6) throw corrupt("expected 6 layers");

  auto read_u32 = [&](const char* what) {
    std::uint32_t v = 0;
    if (!detail::read_le(in, v)) throw corrupt(std::string("truncated reading ") + what);
    if (v == 0 || v > (1u << 24)) throw corrupt(std::string("implausible ") + what);
    return static_cast<int>(v);
  };
  auto read_kind = [&](std::uint8_t expected) {
    std::uint8_t kind = 0;
    if (!detail::read_le(in, kind)) throw corrupt("truncated layer header");
    if (kind != expected) throw corrupt("unexpected layer kind");
  };
  auto read_matrix = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!detail::read_le(in, m(r, c))) throw corrupt("truncated tensor data");
  };

  ModelParams p;
  for (auto* c : {&p.conv1, &p.conv2, &p.conv3}) {
    read_kind(0);
    const int out = read_u32("out channels");
    const int inc = read_u32("in channels");
    const int k = read_u32("kernel length");
    const int s = read_u32("stride");
    *c = Conv1dLayer(inc, out, k, s);
    read_matrix(c->weights);
    read_matrix(c->bias);
  }
  for (auto* d : {&p.fc1, &p.fc2, &p.fc3}) {
    read_kind(1);
    const int out = read_u32("out dim");
    const int inn = read_u32("in dim");
    *d = DenseLayer(inn, out);
    read_matrix(d->weights);
    read_matrix(d->bias);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw corrupt("trailing bytes");

  if (p.conv2.in_channels != p.conv1.out_channels || p.conv3.in_channels != p.conv2.out_channels ||
      p.fc1.in_dim % p.conv3.out_channels != 0 || p.fc2.in_dim != p.fc1.out_dim ||
      p.fc3.in_dim != p.fc2.out_dim || p.fc3.out_dim != 1) {
    throw corrupt("inconsistent layer shapes");
  }
  return p;
}

}  // namespace vins::net
