#include "test_util.hpp"

#include "vins/core.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace vins {
namespace {

using testing::random_unit_quaternion;
using testing::random_vec;

Eigen::Vector4d as_vec4(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }

// Left-multiplication matrix: a (x) b == L(a) * b.
Eigen::Matrix4d left_matrix(const Quaternion& a) {
  Eigen::Matrix4d m;
  m << a.w, -a.x, -a.y, -a.z,
       a.x,  a.w, -a.z,  a.y,
       a.y,  a.z,  a.w, -a.x,
       a.z, -a.y,  a.x,  a.w;
  return m;
}

// Rotation matrix written out from the quaternion components.
Mat3 explicit_rotation(const Quaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

void expect_quat_near(const Quaternion& a, const Quaternion& b, double tol) {
  EXPECT_NEAR(a.w, b.w, tol);
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

TEST(QuatMul, IdentityIsNeutral) {
  std::mt19937_64 rng(1);
  const Quaternion q = random_unit_quaternion(rng);
  expect_quat_near(Quaternion::identity() * q, q, 0.0);
  expect_quat_near(q * Quaternion::identity(), q, 0.0);
}

TEST(QuatMul, ISquaredIsMinusOne) {
  const Quaternion i{0, 1, 0, 0};
  expect_quat_near(i * i, Quaternion{-1, 0, 0, 0}, 0.0);
}

TEST(QuatMul, MatchesMatrixForm) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Quaternion a{n(rng), n(rng), n(rng), n(rng)};
    const Quaternion b{n(rng), n(rng), n(rng), n(rng)};
    const Eigen::Vector4d expected = left_matrix(a) * as_vec4(b);
    EXPECT_LT((as_vec4(a * b) - expected).norm(), 1e-12 * (1 + expected.norm()));
    EXPECT_NEAR((a * b).norm(), a.norm() * b.norm(), 1e-12 * (1 + a.norm() * b.norm()));
  }
}

TEST(QuatMul, AgreesWithRotationComposition) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Quaternion a = random_unit_quaternion(rng);
    const Quaternion b = random_unit_quaternion(rng);
    const Mat3 composed = explicit_rotation(a) * explicit_rotation(b);
    EXPECT_LT((explicit_rotation(a * b) - composed).norm(), 1e-12);
  }
}

TEST(QuatMul, Associative) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Quaternion a = random_unit_quaternion(rng);
    const Quaternion b = random_unit_quaternion(rng);
    const Quaternion c = random_unit_quaternion(rng);
    expect_quat_near((a * b) * c, a * (b * c), 1e-12);
  }
}

TEST(QuatFromRate, ZeroRateIsIdentity) {
  expect_quat_near(quat_from_rate(Vec3::Zero(), 0.01), Quaternion::identity(), 0.0);
  expect_quat_near(quat_from_rate(Vec3(1e-15, 0, 0), 0.01), Quaternion::identity(), 1e-15);
}

TEST(QuatFromRate, HalfTurnYaw) {
  expect_quat_near(quat_from_rate(Vec3(0, 0, std::numbers::pi), 1.0), Quaternion{0, 0, 0, 1}, 1e-12);
}

TEST(QuatFromRate, MatchesFineStepIntegration) {
  const Vec3 omega(0.1, 0.2, 0.3);
  // First-order quaternion kinematics q' = 0.5 q (x) (0, w), renormalized each step.
  Quaternion q;
  const double h = 1e-4;
  for (int i = 0; i < 100; ++i) {
    const Quaternion dq{1.0, 0.5 * omega.x() * h, 0.5 * omega.y() * h, 0.5 * omega.z() * h};
    q = (q * dq).normalized();
  }
  expect_quat_near(quat_from_rate(omega, 0.01), q, 1e-9);
}

TEST(QuatFromRate, AdditiveForConstantRate) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 w = random_vec(rng, 3.0);
    const double d1 = 0.3, d2 = 0.7;
    expect_quat_near(quat_from_rate(w, d1 + d2), quat_from_rate(w, d1) * quat_from_rate(w, d2), 1e-10);
  }
}

TEST(QuatExp, SmallAngleSeriesIsUnitNorm) {
  const Quaternion q = quat_exp(Vec3(1e-13, -2e-13, 0));
  EXPECT_NEAR(q.norm(), 1.0, 1e-15);
  EXPECT_NEAR(q.x, 0.5e-13, 1e-20);
}

TEST(Rotate, IdentityLeavesVectorUnchanged) {
  const Vec3 v(1.5, -2.0, 0.25);
  EXPECT_EQ(rotate(Quaternion::identity(), v), v);
}

TEST(Rotate, QuarterTurnAboutZ) {
  const Quaternion q = Quaternion::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
  EXPECT_LT((rotate(q, Vec3::UnitX()) - Vec3::UnitY()).norm(), 1e-12);
}

TEST(Rotate, MatchesExplicitMatrix) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Quaternion q = random_unit_quaternion(rng);
    const Vec3 v = random_vec(rng, 10.0);
    EXPECT_LT((rotate(q, v) - explicit_rotation(q) * v).norm(), 1e-12);
    EXPECT_LT((q.to_rotation_matrix() - explicit_rotation(q)).norm(), 1e-12);
  }
}

TEST(Rotate, PreservesNormsAndInnerProducts) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Quaternion q = random_unit_quaternion(rng);
    const Vec3 a = random_vec(rng, 5.0);
    const Vec3 b = random_vec(rng, 5.0);
    EXPECT_NEAR(rotate(q, a).norm(), a.norm(), 1e-9);
    EXPECT_NEAR(rotate(q, a).dot(rotate(q, b)), a.dot(b), 1e-9);
  }
}

TEST(Rotate, ComposesWithProduct) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Quaternion a = random_unit_quaternion(rng);
    const Quaternion b = random_unit_quaternion(rng);
    const Vec3 v = random_vec(rng, 5.0);
    EXPECT_LT((rotate(a * b, v) - rotate(a, rotate(b, v))).norm(), 1e-10);
  }
}

TEST(Quaternion, NormalizeGivesUnitNorm) {
  const Quaternion q = Quaternion{3, -1, 2, 0.5}.normalized();
  EXPECT_NEAR(q.norm(), 1.0, 1e-9);
}

TEST(Skew, CrossProduct) {
  const Vec3 a(1, 2, 3), b(-4, 0.5, 2);
  EXPECT_LT((skew(a) * b - a.cross(b)).norm(), 1e-15);
}

TEST(ImuSample, PlausibilityBounds) {
  ImuSample s;
  s.acc = Vec3(0, 0, 9.81);
  EXPECT_TRUE(is_plausible(s));
  s.acc = Vec3(0, 0, 200.0);
  EXPECT_FALSE(is_plausible(s));
  s.acc = Vec3(0, 0, 9.81);
  s.gyro = Vec3(50.0, 0, 0);
  EXPECT_FALSE(is_plausible(s));
  s.gyro = Vec3(std::nan(""), 0, 0);
  EXPECT_FALSE(is_plausible(s));
}

TEST(Mode, NamesRoundTrip) {
  for (Mode m : kAllModes) EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_FALSE(parse_mode("running").has_value());
}

}  // namespace
}  // namespace vins
