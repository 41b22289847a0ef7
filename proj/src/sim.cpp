#include "vins/sim.hpp"
#include "vins/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vins::sim {

namespace {

constexpr double kSpeedRamp = 1.0;     // s
constexpr double kEnvelopeRamp = 0.5;  // s
constexpr double kSwayPerAmp = 0.03;   // rad of roll sway per m/s^2 of gait amplitude

// Smootherstep and its derivatives; zero first and second derivative at both ends.
double step(double u) { return u * u * u * (u * (6.0 * u - 15.0) + 10.0); }
double step_d1(double u) { return 30.0 * u * u * (u - 1.0) * (u - 1.0); }
double step_d2(double u) { return 60.0 * u * (2.0 * u * u - 3.0 * u + 1.0); }
double step_integral(double u) { return u * u * u * u * (u * (u - 3.0) + 2.5); }

struct Scalar3 {
  double f = 0.0, d1 = 0.0, d2 = 0.0;
};

// Rising-then-falling envelope over [0, duration] with ramps of length r.
Scalar3 envelope(double tau, double duration, double r) {
  if (r <= 0.0) return {1.0, 0.0, 0.0};
  const double u = std::clamp(tau / r, 0.0, 1.0);
  const double w = std::clamp((duration - tau) / r, 0.0, 1.0);
  const bool in_u = tau > 0.0 && tau < r;
  const bool in_w = duration - tau > 0.0 && duration - tau < r;
  const Scalar3 rise{step(u), in_u ? step_d1(u) / r : 0.0, in_u ? step_d2(u) / (r * r) : 0.0};
  const Scalar3 fall{step(w), in_w ? -step_d1(w) / r : 0.0, in_w ? step_d2(w) / (r * r) : 0.0};
  return {rise.f * fall.f, rise.d1 * fall.f + rise.f * fall.d1,
          rise.d2 * fall.f + 2.0 * rise.d1 * fall.d1 + rise.f * fall.d2};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::BadSpec, what);
}

// Distance travelled after tau seconds of a smooth speed ramp speed0 -> speed1.
double arc_length(double speed0, double speed1, double ramp, double tau) {
  if (ramp <= 0.0) return speed0 * tau;
  const double delta = speed1 - speed0;
  if (tau < ramp) return speed0 * tau + delta * ramp * step_integral(tau / ramp);
  return speed0 * tau + delta * (ramp * step_integral(1.0) + (tau - ramp));
}

double segment_duration(const Segment& seg) {
  return std::visit([](const auto& s) { return s.duration; }, seg);
}

}  // namespace

void validate(const TrajectorySpec& spec) {
  require(!spec.segments.empty(), "trajectory has no segments");
  require(std::isfinite(spec.sample_rate) && spec.sample_rate > 0.0, "sample rate must be positive");
  for (const auto& seg : spec.segments) {
    const double d = segment_duration(seg);
    require(std::isfinite(d) && d > 0.0, "segment duration must be positive");
    if (const auto* w = std::get_if<StraightWalk>(&seg)) {
      require(std::isfinite(w->speed) && w->speed >= 0.0, "walk speed must be non-negative");
      require(std::isfinite(w->gait_freq) && w->gait_freq >= 0.0, "gait frequency must be non-negative");
      require(std::isfinite(w->gait_amp) && w->gait_amp >= 0.0, "gait amplitude must be non-negative");
      require(w->gait_amp == 0.0 || w->gait_freq > 0.0, "gait amplitude needs a gait frequency");
    }
    if (const auto* c = std::get_if<Circle>(&seg)) {
      require(std::isfinite(c->radius) && c->radius > 0.0, "circle radius must be positive");
      require(std::isfinite(c->angular_rate) && c->angular_rate != 0.0,
              "circle angular rate must be non-zero");
    }
  }
}

AnalyticTrajectory::AnalyticTrajectory(const TrajectorySpec& spec) : rate_(spec.sample_rate) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  phase_ = spec.seed == 0 ? 0.0 : std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);

  auto target_speed = [](const Segment& seg) {
    if (const auto* w = std::get_if<StraightWalk>(&seg)) return w->speed;
    if (const auto* c = std::get_if<Circle>(&seg)) return std::abs(c->angular_rate) * c->radius;
    return 0.0;
  };

  double t = 0.0;
  Vec3 p = Vec3::Zero();
  double heading = 0.0;
  double speed = target_speed(spec.segments.front());
  for (const auto& seg : spec.segments) {
    Piece piece;
    piece.t_start = t;
    piece.duration = segment_duration(seg);
    piece.p0 = p;
    piece.heading0 = heading;
    piece.speed0 = speed;
    piece.speed1 = target_speed(seg);
    piece.ramp = piece.speed0 == piece.speed1 ? 0.0 : std::min(kSpeedRamp, 0.5 * piece.duration);
    if (std::holds_alternative<Stationary>(seg)) piece.mode = Mode::Static;
    if (const auto* w = std::get_if<StraightWalk>(&seg)) {
      piece.gait_omega = 2.0 * std::numbers::pi * w->gait_freq;
      piece.gait_amp = w->gait_amp;
      piece.sway_amp = kSwayPerAmp * w->gait_amp;
      piece.envelope_ramp = std::min(kEnvelopeRamp, 0.25 * piece.duration);
    }
    if (const auto* c = std::get_if<Circle>(&seg)) {
      piece.curvature = (c->angular_rate > 0.0 ? 1.0 : -1.0) / c->radius;
    }
    pieces_.push_back(piece);

    const Kinematics end = eval(piece, piece.duration);
    p = end.p;
    heading = piece.heading0 + piece.curvature * arc_length(piece.speed0, piece.speed1, piece.ramp, piece.duration);
    speed = piece.speed1;
    t += piece.duration;
  }
  duration_ = t;
}

Kinematics AnalyticTrajectory::eval(const Piece& pc, double tau) const {
  // Speed profile and arc length.
  double s = pc.speed0;
  double ds = 0.0;
  const double arc = arc_length(pc.speed0, pc.speed1, pc.ramp, tau);
  if (pc.ramp > 0.0) {
    const double delta = pc.speed1 - pc.speed0;
    if (tau < pc.ramp) {
      const double u = tau / pc.ramp;
      s += delta * step(u);
      ds = delta * step_d1(u) / pc.ramp;
    } else {
      s = pc.speed1;
    }
  }

  const double heading = pc.heading0 + pc.curvature * arc;
  const double heading_rate = pc.curvature * s;
  const double ch = std::cos(heading);
  const double sh = std::sin(heading);

  Kinematics k;
  if (pc.curvature == 0.0) {
    k.p = pc.p0 + arc * Vec3(ch, sh, 0.0);
  } else {
    const double r = 1.0 / pc.curvature;
    k.p = pc.p0 + r * Vec3(sh - std::sin(pc.heading0), std::cos(pc.heading0) - ch, 0.0);
  }
  k.v = s * Vec3(ch, sh, 0.0);
  k.a = ds * Vec3(ch, sh, 0.0) + s * heading_rate * Vec3(-sh, ch, 0.0);

  // Gait: vertical oscillation z = e(t) * Z(t) with Z'' = A sin(W t + phase), plus roll sway.
  double roll = 0.0;
  double roll_rate = 0.0;
  if (pc.gait_amp > 0.0) {
    const Scalar3 e = envelope(tau, pc.duration, pc.envelope_ramp);
    const double w = pc.gait_omega;
    const double arg = w * tau + phase_;
    const double sa = std::sin(arg);
    const double ca = std::cos(arg);
    const double z = -pc.gait_amp / (w * w) * sa;
    const double dz = -pc.gait_amp / w * ca;
    const double ddz = pc.gait_amp * sa;
    k.p.z() += e.f * z;
    k.v.z() += e.d1 * z + e.f * dz;
    k.a.z() += e.d2 * z + 2.0 * e.d1 * dz + e.f * ddz;
    roll = e.f * pc.sway_amp * sa;
    roll_rate = e.d1 * pc.sway_amp * sa + e.f * pc.sway_amp * w * ca;
  }

  // q = yaw(heading) (x) roll(roll); angular rate from 2 vec(q* (x) dq/dt).
  const Quaternion qz{std::cos(0.5 * heading), 0.0, 0.0, std::sin(0.5 * heading)};
  const Quaternion qx{std::cos(0.5 * roll), std::sin(0.5 * roll), 0.0, 0.0};
  const Quaternion dqz{-0.5 * heading_rate * std::sin(0.5 * heading), 0.0, 0.0,
                       0.5 * heading_rate * std::cos(0.5 * heading)};
  const Quaternion dqx{-0.5 * roll_rate * std::sin(0.5 * roll), 0.5 * roll_rate * std::cos(0.5 * roll), 0.0,
                       0.0};
  k.q = qz * qx;
  const Quaternion a1 = dqz * qx;
  const Quaternion a2 = qz * dqx;
  const Quaternion dq{a1.w + a2.w, a1.x + a2.x, a1.y + a2.y, a1.z + a2.z};
  k.omega_body = 2.0 * (k.q.conjugate() * dq).vec();
  return k;
}

Kinematics AnalyticTrajectory::at(double t) const {
  t = std::clamp(t, 0.0, duration_);
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                             [](double value, const Piece& p) { return value < p.t_start; });
  const Piece& piece = it == pieces_.begin() ? pieces_.front() : *std::prev(it);
  return eval(piece, std::min(t - piece.t_start, piece.duration));
}

std::vector<double> AnalyticTrajectory::sample_times() const {
  const auto n = static_cast<std::size_t>(std::llround(duration_ * rate_));
  std::vector<double> times(n + 1);
  for (std::size_t k = 0; k <= n; ++k) times[k] = static_cast<double>(k) / rate_;
  return times;
}

std::vector<MotionLabel> AnalyticTrajectory::labels() const {
  std::vector<MotionLabel> out;
  for (const auto& p : pieces_) out.push_back({p.mode, p.t_start, p.t_start + p.duration});
  return out;
}

PoseTrack gen_truth(const AnalyticTrajectory& traj) {
  PoseTrack track;
  track.nominal_rate = traj.sample_rate();
  for (double t : traj.sample_times()) {
    const auto k = traj.at(t);
    track.samples.push_back({t, k.p, k.q});
  }
  return track;
}

PoseTrack gen_truth(const TrajectorySpec& spec) { return gen_truth(AnalyticTrajectory(spec)); }

ImuSequence derive_imu(const AnalyticTrajectory& traj, const Vec3& gravity) {
  ImuSequence imu;
  imu.nominal_rate = traj.sample_rate();
  for (double t : traj.sample_times()) {
    const auto k = traj.at(t);
    ImuSample s;
    s.t = t;
    s.acc = rotate(k.q.conjugate(), k.a - gravity);
    s.gyro = k.omega_body;
    imu.samples.push_back(s);
  }
  return imu;
}

ImuSequence derive_imu(const TrajectorySpec& spec, const Vec3& gravity) {
  return derive_imu(AnalyticTrajectory(spec), gravity);
}

ImuSequence add_noise(const ImuSequence& imu, const NoiseSpec& noise) {
  if (!(noise.accel_density >= 0.0) || !(noise.gyro_density >= 0.0)) {
    throw Error(ErrorKind::BadSpec, "noise densities must be non-negative");
  }
  ImuSequence out = imu;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double acc_sd = noise.accel_density * std::sqrt(imu.nominal_rate);
  const double gyro_sd = noise.gyro_density * std::sqrt(imu.nominal_rate);
  for (auto& s : out.samples) {
    for (int i = 0; i < 3; ++i) s.acc[i] += noise.accel_bias[i] + acc_sd * normal(rng);
    for (int i = 0; i < 3; ++i) s.gyro[i] += noise.gyro_bias[i] + gyro_sd * normal(rng);
  }
  return out;
}

std::vector<Window> gen_training_set(const std::vector<TrajectorySpec>& specs, const NoiseSpec& noise,
                                     const WindowConfig& window_cfg) {
  std::vector<Window> windows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const AnalyticTrajectory traj(specs[i]);
    NoiseSpec ns = noise;
    ns.seed = noise.seed + i;
    const ImuSequence imu = add_noise(derive_imu(traj), ns);
    WindowConfig wc = window_cfg;
    wc.seed = window_cfg.seed + i;
    auto part = extract_windows(imu, gen_truth(traj), wc, traj.labels());
    windows.insert(windows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return windows;
}

}  // namespace vins::sim
