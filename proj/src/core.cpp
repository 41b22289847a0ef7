#include "vins/core.hpp"
#include "vins/error.hpp"

#include <cmath>

namespace vins {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorKind::TimeGap: return "TimeGap";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorKind::BadArguments: return "BadArguments";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CorruptWeights: return "CorruptWeights";
    case ErrorKind::BadDt: return "BadDt";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::BadSpec: return "BadSpec";
  }
  return "Unknown";
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return identity();
  const Vec3 u = axis / n;
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), u.x() * s, u.y() * s, u.z() * s};
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Mat3 Quaternion::to_rotation_matrix() const {
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

bool Quaternion::is_finite() const {
  return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion quat_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    // second-order series; reduces to identity at zero
    const Vec3 h = 0.5 * rotvec;
    return Quaternion{1.0, h.x(), h.y(), h.z()}.normalized();
  }
  const double s = std::sin(0.5 * angle) / angle;
  return {std::cos(0.5 * angle), rotvec.x() * s, rotvec.y() * s, rotvec.z() * s};
}

Quaternion quat_from_rate(const Vec3& omega, double dt) { return quat_exp(omega * dt); }

Vec3 rotate(const Quaternion& q, const Vec3& v) {
  // v' = v + 2w (u x v) + 2 u x (u x v)
  const Vec3 u = q.vec();
  const Vec3 t = 2.0 * u.cross(v);
  return v + q.w * t + u.cross(t);
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

bool is_plausible(const ImuSample& s) {
  return std::isfinite(s.t) && s.acc.allFinite() && s.gyro.allFinite() &&
         s.acc.norm() < kMaxAccelNorm && s.gyro.norm() < kMaxGyroNorm;
}

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Static: return "static";
    case Mode::Walking: return "walking";
    case Mode::Stairs: return "stairs";
    case Mode::Elevator: return "elevator";
    case Mode::Escalator: return "escalator";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : kAllModes) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

}  // namespace vins
