#pragma once

#include "vins/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace vins {

struct ImuSequence {
  std::vector<ImuSample> samples;
  double nominal_rate = 100.0;

  double start_time() const { return samples.front().t; }
  double end_time() const { return samples.back().t; }
};

struct PoseTrack {
  std::vector<PoseSample> samples;
  double nominal_rate = 60.0;

  double start_time() const { return samples.front().t; }
  double end_time() const { return samples.back().t; }
};

/// 6 x L window: rows acc x,y,z then gyro x,y,z; one column per IMU sample.
using WindowData = Eigen::MatrixXd;

struct Window {
  WindowData data;
  double t0 = 0.0;
  double tT = 0.0;
  double label_speed = 0.0;
  std::optional<Mode> mode;
};

struct WindowConfig {
  double window_seconds = 2.0;
  double stride_seconds = 1.0;
  bool randomize = false;
  std::uint64_t seed = 0;
  // Per-channel standardization of IMU data. Off: raw samples feed the network.
  bool normalize = false;
};

struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // window index -> fold index

  std::vector<std::size_t> validation_indices(int fold) const;
  std::vector<std::size_t> training_indices(int fold) const;
  std::size_t fold_size(int fold) const;
};

struct SpeedStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Throws TimeGap / NonMonotoneTime if the sequence violates its invariants.
void validate(const ImuSequence& seq);
void validate(const PoseTrack& track);

ImuSequence load_imu_csv(const std::filesystem::path& path, double nominal_rate = 100.0);
PoseTrack load_pose_csv(const std::filesystem::path& path, double nominal_rate = 60.0);
std::vector<MotionLabel> load_labels_csv(const std::filesystem::path& path);

void write_imu_csv(const ImuSequence& seq, const std::filesystem::path& path);
void write_pose_csv(const PoseTrack& track, const std::filesystem::path& path);
void write_labels_csv(const std::vector<MotionLabel>& labels, const std::filesystem::path& path);

/// Piecewise-linear position at time t. Throws OutOfRange outside the track.
Vec3 interpolate_position(const PoseTrack& track, double t);

/// Displacement-based momentary speed ||p(tT) - p(t0)|| / (tT - t0).
double label_speed(const PoseTrack& track, double t0, double tT);

/// Majority-duration label over [t0, tT]; nullopt when no span overlaps.
std::optional<Mode> majority_mode(const std::vector<MotionLabel>& labels, double t0, double tT);

/// Number of IMU columns per window for the sequence's nominal rate.
int window_length(double window_seconds, double rate);

std::vector<Window> extract_windows(const ImuSequence& imu, const PoseTrack& track,
                                    const WindowConfig& cfg,
                                    const std::vector<MotionLabel>& labels = {});

/// Builds a 6 x L window from consecutive samples [first, first + L).
WindowData make_window_data(const std::vector<ImuSample>& samples, std::size_t first, int length);

FoldPlan kfold_split(std::size_t n, int k, std::uint64_t seed);

/// Finite-difference instantaneous speed statistics over [t0, tT].
SpeedStats window_speed_stats(const PoseTrack& track, double t0, double tT, double sub_dt);

/// Binary cache: little-endian f64 records [t0, tT, label, mode_id, 6*L data row-major].
/// mode_id is -1 for unlabeled windows.
void write_windows_bin(const std::vector<Window>& windows, const std::filesystem::path& path);
std::vector<Window> read_windows_bin(const std::filesystem::path& path, int length);

}  // namespace vins
