#include "vins/datapipe.hpp"
#include "vins/error.hpp"

#include "io_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace vins {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr double kQuatNormTol = 1e-6;

using detail::line_msg;
using detail::read_numeric_csv;

template <typename Samples>
void check_monotone(const Samples& samples, const char* what) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) {
      throw Error(ErrorKind::NonMonotoneTime,
                  std::string(what) + " sample " + std::to_string(i) + " at t=" +
                      detail::format_double(samples[i].t) + " does not follow t=" +
                      detail::format_double(samples[i - 1].t));
    }
  }
}

// Index of the last sample with t <= query (track is non-empty and query in range).
std::size_t bracket(const PoseTrack& track, double t) {
  const auto& s = track.samples;
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double value, const PoseSample& p) { return value < p.t; });
  if (it == s.begin()) return 0;
  return static_cast<std::size_t>(std::distance(s.begin(), it)) - 1;
}

std::size_t nearest_sample(const std::vector<ImuSample>& s, double t) {
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const ImuSample& a, double value) { return a.t < value; });
  if (it == s.end()) return s.size() - 1;
  const auto idx = static_cast<std::size_t>(std::distance(s.begin(), it));
  if (idx > 0 && (t - s[idx - 1].t) <= (s[idx].t - t)) return idx - 1;
  return idx;
}

void normalize_channels(WindowData& data) {
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const double mean = data.row(r).mean();
    data.row(r).array() -= mean;
    const double sd = std::sqrt(data.row(r).squaredNorm() / static_cast<double>(data.cols()));
    if (sd > 1e-12) data.row(r) /= sd;
  }
}

}  // namespace

std::vector<std::size_t> FoldPlan::validation_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::training_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

std::size_t FoldPlan::fold_size(int fold) const {
  return static_cast<std::size_t>(std::count(assignments.begin(), assignments.end(), fold));
}

void validate(const ImuSequence& seq) {
  if (seq.samples.empty()) throw Error(ErrorKind::EmptyInput, "IMU sequence is empty");
  check_monotone(seq.samples, "IMU");
  const double max_gap = 5.0 / seq.nominal_rate;
  for (std::size_t i = 1; i < seq.samples.size(); ++i) {
    const double gap = seq.samples[i].t - seq.samples[i - 1].t;
    if (gap >= max_gap) {
      throw Error(ErrorKind::TimeGap, "IMU gap of " + detail::format_double(gap) + " s before sample " +
                                          std::to_string(i));
    }
  }
}

void validate(const PoseTrack& track) {
  if (track.samples.empty()) throw Error(ErrorKind::EmptyInput, "pose track is empty");
  check_monotone(track.samples, "pose");
}

ImuSequence load_imu_csv(const std::filesystem::path& path, double nominal_rate) {
  const auto rows = read_numeric_csv(path, "t,ax,ay,az,gx,gy,gz");
  ImuSequence seq;
  seq.nominal_rate = nominal_rate;
  seq.samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ImuSample s{r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}};
    if (!is_plausible(s)) {
      throw Error(ErrorKind::MalformedRow, line_msg(path, i + 2, "IMU reading outside sanity bounds"));
    }
    seq.samples.push_back(s);
  }
  validate(seq);
  return seq;
}

PoseTrack load_pose_csv(const std::filesystem::path& path, double nominal_rate) {
  const auto rows = read_numeric_csv(path, "t,px,py,pz,qw,qx,qy,qz");
  PoseTrack track;
  track.nominal_rate = nominal_rate;
  track.samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    PoseSample s{r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6], r[7]}};
    if (std::abs(s.q.norm() - 1.0) > kQuatNormTol) {
      throw Error(ErrorKind::MalformedRow, line_msg(path, i + 2, "quaternion is not unit norm"));
    }
    track.samples.push_back(s);
  }
  validate(track);
  return track;
}

std::vector<MotionLabel> load_labels_csv(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw Error(ErrorKind::EmptyFile, path.string());
  if (detail::trim(lines[0]) != "t_start,t_end,mode") {
    throw Error(ErrorKind::MalformedRow, line_msg(path, 1, "expected header 't_start,t_end,mode'"));
  }
  std::vector<MotionLabel> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = detail::trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    MotionLabel label;
    if (fields.size() != 3 || !detail::parse_double(fields[0], label.t_start) ||
        !detail::parse_double(fields[1], label.t_end)) {
      throw Error(ErrorKind::MalformedRow, line_msg(path, i + 1, "expected t_start,t_end,mode"));
    }
    const auto mode = parse_mode(detail::trim(fields[2]));
    if (!mode) throw Error(ErrorKind::MalformedRow, line_msg(path, i + 1, "unknown mode"));
    if (!(label.t_start < label.t_end)) {
      throw Error(ErrorKind::MalformedRow, line_msg(path, i + 1, "t_start must precede t_end"));
    }
    label.mode = *mode;
    labels.push_back(label);
  }
  return labels;
}

void write_imu_csv(const ImuSequence& seq, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,ax,ay,az,gx,gy,gz\n";
  for (const auto& s : seq.samples) {
    out << detail::format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(s.acc[i]);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(s.gyro[i]);
    out << '\n';
  }
}

void write_pose_csv(const PoseTrack& track, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,px,py,pz,qw,qx,qy,qz\n";
  for (const auto& s : track.samples) {
    out << detail::format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(s.p[i]);
    for (double c : {s.q.w, s.q.x, s.q.y, s.q.z}) out << ',' << detail::format_double(c);
    out << '\n';
  }
}

void write_labels_csv(const std::vector<MotionLabel>& labels, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t_start,t_end,mode\n";
  for (const auto& l : labels) {
    out << detail::format_double(l.t_start) << ',' << detail::format_double(l.t_end) << ','
        << mode_name(l.mode) << '\n';
  }
}

Vec3 interpolate_position(const PoseTrack& track, double t) {
  if (track.samples.empty()) throw Error(ErrorKind::OutOfRange, "empty pose track");
  const double first = track.start_time();
  const double last = track.end_time();
  if (!(t >= first - kTimeEps && t <= last + kTimeEps)) {
    throw Error(ErrorKind::OutOfRange, "t=" + detail::format_double(t) + " outside [" +
                                           detail::format_double(first) + ", " +
                                           detail::format_double(last) + "]");
  }
  t = std::clamp(t, first, last);
  const std::size_t i = bracket(track, t);
  const auto& a = track.samples[i];
  if (a.t == t || i + 1 == track.samples.size()) return a.p;
  const auto& b = track.samples[i + 1];
  const double u = (t - a.t) / (b.t - a.t);
  return a.p + u * (b.p - a.p);
}

double label_speed(const PoseTrack& track, double t0, double tT) {
  if (!(t0 < tT)) throw Error(ErrorKind::OutOfRange, "label window must have t0 < tT");
  return (interpolate_position(track, tT) - interpolate_position(track, t0)).norm() / (tT - t0);
}

std::optional<Mode> majority_mode(const std::vector<MotionLabel>& labels, double t0, double tT) {
  std::map<int, double> coverage;
  for (const auto& l : labels) {
    const double overlap = std::min(tT, l.t_end) - std::max(t0, l.t_start);
    if (overlap > 0.0) coverage[static_cast<int>(l.mode)] += overlap;
  }
  if (coverage.empty()) return std::nullopt;
  const auto best = std::max_element(coverage.begin(), coverage.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  return static_cast<Mode>(best->first);
}

int window_length(double window_seconds, double rate) {
  return static_cast<int>(std::lround(window_seconds * rate));
}

WindowData make_window_data(const std::vector<ImuSample>& samples, std::size_t first, int length) {
  WindowData data(6, length);
  for (int c = 0; c < length; ++c) {
    const auto& s = samples[first + static_cast<std::size_t>(c)];
    data.col(c).head<3>() = s.acc;
    data.col(c).tail<3>() = s.gyro;
  }
  return data;
}

std::vector<Window> extract_windows(const ImuSequence& imu, const PoseTrack& track,
                                    const WindowConfig& cfg,
                                    const std::vector<MotionLabel>& labels) {
  if (!(cfg.window_seconds > 0.0) || !(cfg.stride_seconds > 0.0)) {
    throw Error(ErrorKind::BadArguments, "window and stride must be positive");
  }
  if (imu.samples.empty() || track.samples.empty()) {
    throw Error(ErrorKind::InsufficientOverlap, "empty input sequence");
  }
  const int length = window_length(cfg.window_seconds, imu.nominal_rate);
  const double begin = std::max(imu.start_time(), track.start_time());
  const double end = std::min(imu.end_time(), track.end_time());
  if (end - begin < cfg.window_seconds - kTimeEps) {
    throw Error(ErrorKind::InsufficientOverlap,
                "sequences overlap for " + detail::format_double(std::max(0.0, end - begin)) +
                    " s, window needs " + detail::format_double(cfg.window_seconds) + " s");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(0.0, cfg.stride_seconds);
  std::vector<Window> windows;
  const auto& s = imu.samples;
  for (std::size_t k = 0;; ++k) {
    double start = begin + static_cast<double>(k) * cfg.stride_seconds;
    if (start > end - cfg.window_seconds + kTimeEps) break;
    if (cfg.randomize) start += jitter(rng);
    const std::size_t first = nearest_sample(s, start);
    if (first + static_cast<std::size_t>(length) > s.size()) continue;
    const double t0 = s[first].t;
    const double tT = t0 + cfg.window_seconds;
    if (t0 < track.start_time() - kTimeEps || tT > track.end_time() + kTimeEps) continue;

    Window w;
    w.data = make_window_data(s, first, length);
    if (cfg.normalize) normalize_channels(w.data);
    w.t0 = t0;
    w.tT = tT;
    w.label_speed = label_speed(track, t0, tT);
    w.mode = majority_mode(labels, t0, tT);
    windows.push_back(std::move(w));
  }
  if (windows.empty()) {
    throw Error(ErrorKind::InsufficientOverlap, "no complete window fits the sequences");
  }
  return windows;
}

FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || n < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::BadArguments, "k-fold split needs n >= k >= 2 (n=" + std::to_string(n) +
                                             ", k=" + std::to_string(k) + ")");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) plan.assignments[perm[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  return plan;
}

SpeedStats window_speed_stats(const PoseTrack& track, double t0, double tT, double sub_dt) {
  if (!(sub_dt > 0.0)) throw Error(ErrorKind::BadArguments, "sub_dt must be positive");
  if (!(t0 < tT)) throw Error(ErrorKind::OutOfRange, "stats window must have t0 < tT");
  const auto steps = std::max<long>(1, static_cast<long>(std::floor((tT - t0) / sub_dt + 1e-9)));
  SpeedStats st{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  Vec3 prev = interpolate_position(track, t0);
  double t_prev = t0;
  for (long i = 1; i <= steps; ++i) {
    const double t = std::min(tT, t0 + static_cast<double>(i) * sub_dt);
    const Vec3 p = interpolate_position(track, t);
    const double speed = (p - prev).norm() / (t - t_prev);
    t_prev = t;
    st.min = std::min(st.min, speed);
    st.max = std::max(st.max, speed);
    st.mean += speed;
    prev = p;
  }
  st.mean /= static_cast<double>(steps);
  return st;
}

void write_windows_bin(const std::vector<Window>& windows, const std::filesystem::path& path) {
  auto out = detail::open_output(path, true);
  for (const auto& w : windows) {
    detail::write_le(out, w.t0);
    detail::write_le(out, w.tT);
    detail::write_le(out, w.label_speed);
    detail::write_le(out, w.mode ? static_cast<double>(static_cast<int>(*w.mode)) : -1.0);
    for (Eigen::Index r = 0; r < w.data.rows(); ++r)
      for (Eigen::Index c = 0; c < w.data.cols(); ++c) detail::write_le(out, w.data(r, c));
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

std::vector<Window> read_windows_bin(const std::filesystem::path& path, int length) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  const auto record_bytes = static_cast<std::uintmax_t>(4 + 6 * length) * 8;
  const auto size = std::filesystem::file_size(path);
  if (length <= 0 || size % record_bytes != 0) {
    throw Error(ErrorKind::MalformedRow, path.string() + " is not a whole number of window records");
  }
  std::vector<Window> windows(size / record_bytes);
  for (auto& w : windows) {
    double mode_id = -1.0;
    detail::read_le(in, w.t0);
    detail::read_le(in, w.tT);
    detail::read_le(in, w.label_speed);
    detail::read_le(in, mode_id);
    if (mode_id >= 0.0) w.mode = static_cast<Mode>(static_cast<int>(mode_id));
    w.data.resize(6, length);
    for (Eigen::Index r = 0; r < 6; ++r)
      for (Eigen::Index c = 0; c < length; ++c) detail::read_le(in, w.data(r, c));
  }
  if (!in) throw Error(ErrorKind::IoError, "short read: " + path.string());
  return windows;
}

}  // namespace vins
