#pragma once

#include "vins/core.hpp"
#include "vins/datapipe.hpp"
#include "vins/net.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace vins::ins {

inline constexpr int kStateDim = 15;
using Cov = Eigen::Matrix<double, kStateDim, kStateDim>;

// Error-state layout.
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kAtt = 6;
inline constexpr int kAccBias = 9;
inline constexpr int kGyroBias = 12;

struct NavState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Quaternion q;
  Vec3 b_a = Vec3::Zero();
  Vec3 b_g = Vec3::Zero();
  Cov P = Cov::Identity() * 1e-4;
};

struct FilterConfig {
  Vec3 gravity = kGravity;

  // Process noise (continuous-time densities).
  double accel_noise_density = 0.02;  // m/s^2/sqrt(Hz)
  double gyro_noise_density = 0.002;  // rad/s/sqrt(Hz)
  double accel_bias_walk = 1e-4;      // m/s^3/sqrt(Hz)
  double gyro_bias_walk = 1e-5;       // rad/s^2/sqrt(Hz)

  // Initial error-state standard deviations used when the tracker builds its own initial state.
  double init_pos_sigma = 0.05;
  double init_vel_sigma = 0.5;
  double init_tilt_sigma = 0.05;
  double init_yaw_sigma = 3.2;
  double init_accel_bias_sigma = 0.1;
  double init_gyro_bias_sigma = 0.01;

  double zupt_variance = 1e-4;  // (m/s)^2 per axis

  // Pseudo-speed noise schedule: sigma_low when the clamped speed is below the threshold.
  double pseudo_sigma_low = 0.15;
  double pseudo_sigma_high = 0.5;
  double pseudo_low_threshold = 0.2;
  double pseudo_period = 1.0;  // s between pseudo-speed updates
  double speed_min = 0.0;
  double speed_max = 5.0;
  double speed_epsilon = 1e-3;  // below this ||v|| the norm Jacobian is undefined

  // Stationarity detector over a trailing window.
  double zupt_window = 0.5;        // s
  double zupt_gyro_std = 0.03;     // rad/s
  double zupt_accel_std = 0.12;    // m/s^2
  double zupt_gyro_mean = 0.05;    // rad/s
  double imu_rate = 100.0;         // Hz, sets the detector's sample count

  int zupt_window_samples() const;
};

struct SpeedMeasurement {
  double t = 0.0;
  double s = 0.0;
  double sigma = 0.5;
};

struct PositionFix {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  double sigma = 0.05;
};

NavState propagate(const NavState& state, const ImuSample& imu, double dt, const FilterConfig& cfg);

bool zupt_detect(std::span<const ImuSample> recent, const FilterConfig& cfg);

/// Linear EKF update with measurement z = H x + noise(R), z given as the innovation.
template <int M>
NavState ekf_update(const NavState& state, const Eigen::Matrix<double, M, kStateDim>& H,
                    const Eigen::Matrix<double, M, 1>& innovation, const Eigen::Matrix<double, M, M>& R);

NavState update_zupt(const NavState& state, const FilterConfig& cfg);

/// Scalar update on h(x) = ||v||.
NavState update_pseudo_speed(const NavState& state, const SpeedMeasurement& meas,
                             const FilterConfig& cfg = {});

/// Jacobian of ||v|| with respect to the error state (zero outside the velocity block).
Eigen::Matrix<double, 1, kStateDim> speed_jacobian(const Vec3& v);

NavState update_position_fix(const NavState& state, const PositionFix& fix);

/// Clamps a raw regressor output and attaches the scheduled noise.
SpeedMeasurement make_speed_measurement(double t, double raw_speed, const FilterConfig& cfg);

struct NoSpeed {};

struct ConstantSpeed {
  double speed = 0.75;
  double sigma = 1.0;
};

/// Predicts momentary speed from the trailing IMU window ending at t_end.
using SpeedPredictor = std::function<double(const WindowData& window, double t_end)>;

struct RegressedSpeed {
  SpeedPredictor predictor;
  int window_length = 200;  // IMU samples per window
  double period = 1.0;      // s between predictions

  static RegressedSpeed from_model(net::ModelParams params, double period = 1.0);
};

using SpeedSource = std::variant<NoSpeed, ConstantSpeed, RegressedSpeed>;

struct TrajectoryPoint {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Quaternion q;
};

using Trajectory = std::vector<TrajectoryPoint>;

enum class StepKind { Propagate, Zupt, PseudoSpeed, PositionFix };

/// Called after every filter step with the state before and after it.
using StepObserver = std::function<void(StepKind, const NavState& before, const NavState& after)>;

/// Initial state from a position and the mean specific force of the leading
/// samples (roll and pitch from gravity, yaw zero).
NavState initial_state(const Vec3& p, std::span<const ImuSample> leading, const FilterConfig& cfg);

Trajectory run_tracker(const ImuSequence& imu, const std::vector<PositionFix>& fixes,
                       const SpeedSource& speed_source, const FilterConfig& cfg,
                       std::optional<NavState> initial = std::nullopt, const StepObserver& observer = {});

/// RMSE of 3-D position at the truth timestamps covered by the trajectory.
double trajectory_rmse(const Trajectory& traj, const PoseTrack& truth);

/// Fixes taken from a reference track every `interval` seconds starting at its first sample.
std::vector<PositionFix> sample_fixes(const PoseTrack& truth, double interval, double sigma);

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory_csv(const std::filesystem::path& path);
void write_fixes_csv(const std::vector<PositionFix>& fixes, const std::filesystem::path& path);
std::vector<PositionFix> load_fixes_csv(const std::filesystem::path& path);

}  // namespace vins::ins
