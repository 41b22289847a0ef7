#pragma once

#include "vins/core.hpp"
#include "vins/datapipe.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace vins::sim {

struct Stationary {
  double duration = 0.0;
};

/// Straight walk along the current heading. The gait adds a zero-mean vertical
/// specific-force oscillation of amplitude gait_amp at gait_freq, plus a roll
/// sway whose amplitude scales with gait_amp.
struct StraightWalk {
  double speed = 0.0;
  double duration = 0.0;
  double gait_freq = 0.0;
  double gait_amp = 0.0;
};

/// Constant-speed turn; positive angular_rate turns left (counter-clockwise about +z).
struct Circle {
  double radius = 0.0;
  double angular_rate = 0.0;
  double duration = 0.0;
};

using Segment = std::variant<Stationary, StraightWalk, Circle>;

/// One or more segments played back to back; a single segment is the
/// non-composite case. Speed changes between segments are blended with a
/// smooth ramp at the start of the later segment.
struct TrajectorySpec {
  std::vector<Segment> segments;
  double sample_rate = 100.0;
  std::uint64_t seed = 0;  // selects the gait phase
};

struct NoiseSpec {
  double accel_density = 0.0;  // m/s^2/sqrt(Hz)
  double gyro_density = 0.0;   // rad/s/sqrt(Hz)
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  std::uint64_t seed = 0;
};

struct Kinematics {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Quaternion q;
  Vec3 omega_body = Vec3::Zero();
};

/// Closed-form position/orientation and their derivatives for a TrajectorySpec.
class AnalyticTrajectory {
 public:
  explicit AnalyticTrajectory(const TrajectorySpec& spec);

  Kinematics at(double t) const;
  double duration() const { return duration_; }
  double sample_rate() const { return rate_; }
  std::vector<double> sample_times() const;
  /// One motion label per segment (stationary -> static, otherwise walking).
  std::vector<MotionLabel> labels() const;

 private:
  struct Piece {
    double t_start = 0.0;
    double duration = 0.0;
    Vec3 p0 = Vec3::Zero();
    double heading0 = 0.0;
    double speed0 = 0.0;
    double speed1 = 0.0;
    double ramp = 0.0;
    double curvature = 0.0;
    double gait_omega = 0.0;
    double gait_amp = 0.0;
    double sway_amp = 0.0;
    double envelope_ramp = 0.0;
    Mode mode = Mode::Walking;
  };

  Kinematics eval(const Piece& piece, double tau) const;

  std::vector<Piece> pieces_;
  double duration_ = 0.0;
  double rate_ = 100.0;
  double phase_ = 0.0;
};

void validate(const TrajectorySpec& spec);

/// Ground-truth pose track sampled at the trajectory's sample rate.
PoseTrack gen_truth(const TrajectorySpec& spec);
PoseTrack gen_truth(const AnalyticTrajectory& traj);

/// Noise-free IMU: acc = R^T (p'' - g), gyro = 2 vec(q* (x) q').
ImuSequence derive_imu(const AnalyticTrajectory& traj, const Vec3& gravity = kGravity);
ImuSequence derive_imu(const TrajectorySpec& spec, const Vec3& gravity = kGravity);

/// White noise with variance density^2 * rate per axis plus constant biases.
ImuSequence add_noise(const ImuSequence& imu, const NoiseSpec& noise);

/// gen_truth + derive_imu + add_noise + extract_windows for every spec; labels
/// come from the noise-free truth. Spec i draws its noise with seed noise.seed + i.
std::vector<Window> gen_training_set(const std::vector<TrajectorySpec>& specs, const NoiseSpec& noise,
                                     const WindowConfig& window_cfg);

}  // namespace vins::sim
