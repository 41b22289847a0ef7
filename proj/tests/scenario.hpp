#pragma once

#include "vins/ins.hpp"
#include "vins/sim.hpp"

#include <memory>
#include <random>

namespace vins::testing {

// Noisy straight walk preceded by a stationary lead-in, with position fixes
// sampled from the truth track.
struct WalkBenchmark {
  std::shared_ptr<sim::AnalyticTrajectory> traj;
  PoseTrack truth;
  ImuSequence imu;
  std::vector<ins::PositionFix> fixes;
};

struct WalkParams {
  double speed = 1.2;
  double total_seconds = 120.0;
  double lead_seconds = 10.0;
  double fix_interval = 17.0;
  double accel_density = 0.02;
  double gyro_density = 0.002;
  Vec3 accel_bias{0.1, -0.1, 0.05};
  Vec3 gyro_bias{0.01, -0.01, 0.01};
  std::uint64_t seed = 1;
};

inline WalkBenchmark make_walk_benchmark(const WalkParams& w) {
  sim::TrajectorySpec spec;
  spec.seed = 3;
  spec.segments = {sim::Stationary{w.lead_seconds},
                   sim::StraightWalk{w.speed, w.total_seconds - w.lead_seconds, 2.0, 2.0}};
  WalkBenchmark b;
  b.traj = std::make_shared<sim::AnalyticTrajectory>(spec);
  b.truth = sim::gen_truth(*b.traj);
  sim::NoiseSpec noise{w.accel_density, w.gyro_density, w.accel_bias, w.gyro_bias, w.seed};
  b.imu = sim::add_noise(sim::derive_imu(*b.traj), noise);
  b.fixes = ins::sample_fixes(b.truth, w.fix_interval, 0.05);
  return b;
}

// Speed source that reports the true instantaneous speed plus Gaussian noise.
inline ins::RegressedSpeed oracle_speed(std::shared_ptr<const sim::AnalyticTrajectory> traj, double noise_sigma,
                                        std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  ins::RegressedSpeed src;
  src.predictor = [traj, rng, noise_sigma](const WindowData&, double t) {
    std::normal_distribution<double> n(0.0, noise_sigma);
    return traj->at(t).v.norm() + n(*rng);
  };
  return src;
}

}  // namespace vins::testing
