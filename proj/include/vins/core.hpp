#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string_view>

namespace vins {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Standard gravity in the z-up world frame.
inline const Vec3 kGravity{0.0, 0.0, -9.81};

/// Hamilton, scalar-first unit quaternion. Rotates body-frame vectors into
/// the world frame.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {}; }
  static Quaternion from_axis_angle(const Vec3& axis, double angle);

  Vec3 vec() const { return {x, y, z}; }
  double norm() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Quaternion normalized() const;
  /// Body-to-world rotation matrix.
  Mat3 to_rotation_matrix() const;
  bool is_finite() const;
};

/// Hamilton product a ⊗ b.
Quaternion quat_mul(const Quaternion& a, const Quaternion& b);
inline Quaternion operator*(const Quaternion& a, const Quaternion& b) { return quat_mul(a, b); }

/// Exponential map of a constant body rate over dt seconds.
Quaternion quat_from_rate(const Vec3& omega, double dt);

/// Rotation vector (axis * angle) to quaternion.
Quaternion quat_exp(const Vec3& rotvec);

/// Body-frame vector expressed in the world frame.
Vec3 rotate(const Quaternion& q, const Vec3& v);

Mat3 skew(const Vec3& v);

struct ImuSample {
  double t = 0.0;
  Vec3 acc = Vec3::Zero();   // specific force, m/s^2, body frame
  Vec3 gyro = Vec3::Zero();  // angular rate, rad/s, body frame
};

inline constexpr double kMaxAccelNorm = 200.0;
inline constexpr double kMaxGyroNorm = 50.0;

/// True when the sample is finite and within the accelerometer/gyro sanity bounds.
bool is_plausible(const ImuSample& s);

struct PoseSample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Quaternion q;
};

enum class Mode : int { Static = 0, Walking = 1, Stairs = 2, Elevator = 3, Escalator = 4 };

inline constexpr std::array<Mode, 5> kAllModes{Mode::Static, Mode::Walking, Mode::Stairs,
                                               Mode::Elevator, Mode::Escalator};

std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view name);

struct MotionLabel {
  Mode mode = Mode::Walking;
  double t_start = 0.0;
  double t_end = 0.0;
};

}  // namespace vins
