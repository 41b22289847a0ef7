#include "vins/ins.hpp"
#include "vins/error.hpp"

#include "io_util.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace vins::ins {

namespace {

void symmetrize(Cov& P) { P = 0.5 * (P + P.transpose()).eval(); }

NavState inject(const NavState& state, const Eigen::Matrix<double, kStateDim, 1>& dx) {
  NavState out = state;
  out.p += dx.segment<3>(kPos);
  out.v += dx.segment<3>(kVel);
  out.q = (state.q * quat_exp(dx.segment<3>(kAtt))).normalized();
  out.b_a += dx.segment<3>(kAccBias);
  out.b_g += dx.segment<3>(kGyroBias);
  return out;
}

double population_stddev(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

int FilterConfig::zupt_window_samples() const {
  return std::max(2, static_cast<int>(std::lround(zupt_window * imu_rate)));
}

NavState propagate(const NavState& state, const ImuSample& imu, double dt, const FilterConfig& cfg) {
  if (!(dt > 0.0 && dt < 0.1)) {
    throw Error(ErrorKind::BadDt, "propagation step " + detail::format_double(dt) + " s outside (0, 0.1)");
  }
  const Vec3 omega = imu.gyro - state.b_g;
  const Vec3 f = imu.acc - state.b_a;

  NavState out = state;
  const Quaternion q_mid = state.q * quat_from_rate(omega, 0.5 * dt);
  out.q = (state.q * quat_from_rate(omega, dt)).normalized();
  const Vec3 a_world = rotate(q_mid, f) + cfg.gravity;
  out.v = state.v + a_world * dt;
  out.p = state.p + state.v * dt + 0.5 * a_world * dt * dt;

  const Mat3 R = q_mid.to_rotation_matrix();
  const Mat3 I = Mat3::Identity();
  Cov F = Cov::Identity();
  F.block<3, 3>(kPos, kVel) = I * dt;
  F.block<3, 3>(kVel, kAtt) = -R * skew(f) * dt;
  F.block<3, 3>(kVel, kAccBias) = -R * dt;
  F.block<3, 3>(kAtt, kAtt) = quat_from_rate(omega, dt).to_rotation_matrix().transpose();
  F.block<3, 3>(kAtt, kGyroBias) = -I * dt;

  Eigen::Matrix<double, kStateDim, 1> q_diag;
  q_diag << Vec3::Zero(), Vec3::Constant(cfg.accel_noise_density * cfg.accel_noise_density * dt),
      Vec3::Constant(cfg.gyro_noise_density * cfg.gyro_noise_density * dt),
      Vec3::Constant(cfg.accel_bias_walk * cfg.accel_bias_walk * dt),
      Vec3::Constant(cfg.gyro_bias_walk * cfg.gyro_bias_walk * dt);

  out.P = F * state.P * F.transpose();
  out.P.diagonal() += q_diag;
  symmetrize(out.P);
  return out;
}

bool zupt_detect(std::span<const ImuSample> recent, const FilterConfig& cfg) {
  const auto needed = static_cast<std::size_t>(cfg.zupt_window_samples());
  if (recent.size() < needed) {
    throw Error(ErrorKind::InsufficientSamples, "stationarity detector needs " + std::to_string(needed) +
                                                    " samples, got " + std::to_string(recent.size()));
  }
  const auto window = recent.last(needed);
  std::vector<double> gyro(needed);
  std::vector<double> acc(needed);
  for (std::size_t i = 0; i < needed; ++i) {
    gyro[i] = window[i].gyro.norm();
    acc[i] = window[i].acc.norm();
  }
  const double n = static_cast<double>(needed);
  double gyro_mean = 0.0;
  double acc_mean = 0.0;
  for (std::size_t i = 0; i < needed; ++i) {
    gyro_mean += gyro[i] / n;
    acc_mean += acc[i] / n;
  }
  return population_stddev(gyro, gyro_mean) < cfg.zupt_gyro_std &&
         population_stddev(acc, acc_mean) < cfg.zupt_accel_std && gyro_mean < cfg.zupt_gyro_mean;
}

template <int M>
NavState ekf_update(const NavState& state, const Eigen::Matrix<double, M, kStateDim>& H,
                    const Eigen::Matrix<double, M, 1>& innovation, const Eigen::Matrix<double, M, M>& R) {
  const Eigen::Matrix<double, M, M> S = H * state.P * H.transpose() + R;
  const Eigen::Matrix<double, kStateDim, M> K = state.P * H.transpose() * S.inverse();
  NavState out = inject(state, K * innovation);
  // Joseph form keeps P symmetric positive semidefinite.
  const Cov IKH = Cov::Identity() - K * H;
  out.P = IKH * state.P * IKH.transpose() + K * R * K.transpose();
  symmetrize(out.P);
  return out;
}

template NavState ekf_update<1>(const NavState&, const Eigen::Matrix<double, 1, kStateDim>&,
                                const Eigen::Matrix<double, 1, 1>&, const Eigen::Matrix<double, 1, 1>&);
template NavState ekf_update<3>(const NavState&, const Eigen::Matrix<double, 3, kStateDim>&,
                                const Eigen::Matrix<double, 3, 1>&, const Eigen::Matrix<double, 3, 3>&);

namespace {

NavState velocity_update(const NavState& state, const Vec3& target, double variance) {
  Eigen::Matrix<double, 3, kStateDim> H = Eigen::Matrix<double, 3, kStateDim>::Zero();
  H.block<3, 3>(0, kVel) = Mat3::Identity();
  return ekf_update<3>(state, H, target - state.v, Mat3::Identity() * variance);
}

}  // namespace

NavState update_zupt(const NavState& state, const FilterConfig& cfg) {
  return velocity_update(state, Vec3::Zero(), cfg.zupt_variance);
}

Eigen::Matrix<double, 1, kStateDim> speed_jacobian(const Vec3& v) {
  Eigen::Matrix<double, 1, kStateDim> H = Eigen::Matrix<double, 1, kStateDim>::Zero();
  const double n = v.norm();
  if (n > 0.0) H.segment<3>(kVel) = v.transpose() / n;
  return H;
}

NavState update_pseudo_speed(const NavState& state, const SpeedMeasurement& meas, const FilterConfig& cfg) {
  if (!(meas.sigma > 0.0)) throw Error(ErrorKind::BadArguments, "speed measurement sigma must be positive");
  const double speed = state.v.norm();
  if (speed < cfg.speed_epsilon) {
    // The norm is not differentiable at zero: a near-zero measurement becomes a
    // zero-velocity update, anything else is skipped.
    if (meas.s <= cfg.speed_epsilon) return update_zupt(state, cfg);
    return state;
  }
  Eigen::Matrix<double, 1, 1> y;
  y << meas.s - speed;
  Eigen::Matrix<double, 1, 1> R;
  R << meas.sigma * meas.sigma;
  return ekf_update<1>(state, speed_jacobian(state.v), y, R);
}

NavState update_position_fix(const NavState& state, const PositionFix& fix) {
  if (!(fix.sigma > 0.0)) throw Error(ErrorKind::BadArguments, "position fix sigma must be positive");
  Eigen::Matrix<double, 3, kStateDim> H = Eigen::Matrix<double, 3, kStateDim>::Zero();
  H.block<3, 3>(0, kPos) = Mat3::Identity();
  return ekf_update<3>(state, H, fix.p - state.p, Mat3::Identity() * fix.sigma * fix.sigma);
}

SpeedMeasurement make_speed_measurement(double t, double raw_speed, const FilterConfig& cfg) {
  SpeedMeasurement m;
  m.t = t;
  m.s = std::clamp(std::isfinite(raw_speed) ? raw_speed : cfg.speed_min, cfg.speed_min, cfg.speed_max);
  m.sigma = m.s < cfg.pseudo_low_threshold ? cfg.pseudo_sigma_low : cfg.pseudo_sigma_high;
  return m;
}

RegressedSpeed RegressedSpeed::from_model(net::ModelParams params, double period) {
  auto shared = std::make_shared<const net::ModelParams>(std::move(params));
  RegressedSpeed r;
  r.window_length = shared->input_length();
  r.period = period;
  r.predictor = [shared](const WindowData& window, double) { return net::predict(*shared, window); };
  return r;
}

NavState initial_state(const Vec3& p, std::span<const ImuSample> leading, const FilterConfig& cfg) {
  NavState s;
  s.p = p;
  Vec3 f = Vec3::Zero();
  for (const auto& x : leading) f += x.acc;
  if (!leading.empty() && f.norm() > 0.0) {
    f /= static_cast<double>(leading.size());
    const double roll = std::atan2(f.y(), f.z());
    const double pitch = std::atan2(-f.x(), std::hypot(f.y(), f.z()));
    s.q = Quaternion::from_axis_angle(Vec3::UnitY(), pitch) * Quaternion::from_axis_angle(Vec3::UnitX(), roll);
  }
  Eigen::Matrix<double, kStateDim, 1> sd;
  sd << Vec3::Constant(cfg.init_pos_sigma), Vec3::Constant(cfg.init_vel_sigma),
      cfg.init_tilt_sigma, cfg.init_tilt_sigma, cfg.init_yaw_sigma,
      Vec3::Constant(cfg.init_accel_bias_sigma), Vec3::Constant(cfg.init_gyro_bias_sigma);
  s.P = sd.cwiseAbs2().asDiagonal();
  return s;
}

Trajectory run_tracker(const ImuSequence& imu, const std::vector<PositionFix>& fixes,
                       const SpeedSource& speed_source, const FilterConfig& cfg_in,
                       std::optional<NavState> initial, const StepObserver& observer) {
  if (imu.samples.empty()) throw Error(ErrorKind::EmptyInput, "no IMU samples");
  validate(imu);
  for (std::size_t i = 1; i < fixes.size(); ++i) {
    if (fixes[i].t < fixes[i - 1].t) throw Error(ErrorKind::BadArguments, "position fixes must be sorted");
  }
  FilterConfig cfg = cfg_in;
  cfg.imu_rate = imu.nominal_rate;
  const auto& samples = imu.samples;
  const std::span<const ImuSample> all(samples);

  NavState state;
  if (initial) {
    state = *initial;
  } else {
    if (fixes.empty()) throw Error(ErrorKind::EmptyInput, "no initial state and no position fix");
    const auto lead = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(cfg.zupt_window_samples()));
    state = initial_state(fixes.front().p, all.first(lead), cfg);
  }

  auto step = [&](StepKind kind, NavState next) {
    if (observer) observer(kind, state, next);
    state = std::move(next);
  };

  const auto zupt_n = static_cast<std::size_t>(cfg.zupt_window_samples());
  const auto* regressed = std::get_if<RegressedSpeed>(&speed_source);
  const auto* constant = std::get_if<ConstantSpeed>(&speed_source);
  const double period = regressed ? regressed->period : cfg.pseudo_period;
  if ((regressed || constant) && !(period > 0.0)) {
    throw Error(ErrorKind::BadArguments, "pseudo-speed period must be positive");
  }
  double next_speed_time = samples.front().t + period;
  std::size_t next_fix = 0;

  Trajectory traj;
  traj.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double t = samples[k].t;

    while (next_fix < fixes.size() && fixes[next_fix].t <= t + 1e-9) {
      if (fixes[next_fix].t >= samples.front().t - 1e-9) {
        step(StepKind::PositionFix, update_position_fix(state, fixes[next_fix]));
      }
      ++next_fix;
    }

    if (k + 1 >= zupt_n && zupt_detect(all.subspan(k + 1 - zupt_n, zupt_n), cfg)) {
      step(StepKind::Zupt, update_zupt(state, cfg));
    }

    if ((regressed || constant) && t >= next_speed_time - 1e-9) {
      next_speed_time += period;
      if (constant) {
        step(StepKind::PseudoSpeed, update_pseudo_speed(state, {t, constant->speed, constant->sigma}, cfg));
      } else {
        const auto len = static_cast<std::size_t>(regressed->window_length);
        if (k + 1 >= len) {
          const WindowData window = make_window_data(samples, k + 1 - len, static_cast<int>(len));
          const double raw = regressed->predictor(window, t);
          step(StepKind::PseudoSpeed, update_pseudo_speed(state, make_speed_measurement(t, raw, cfg), cfg));
        }
      }
    }

    traj.push_back({t, state.p, state.v, state.q});
    if (k + 1 < samples.size()) {
      step(StepKind::Propagate, propagate(state, samples[k], samples[k + 1].t - t, cfg));
    }
  }
  return traj;
}

double trajectory_rmse(const Trajectory& traj, const PoseTrack& truth) {
  if (traj.empty() || truth.samples.empty()) throw Error(ErrorKind::InsufficientOverlap, "empty input");
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t j = 0;
  for (const auto& s : truth.samples) {
    if (s.t < traj.front().t - 1e-9 || s.t > traj.back().t + 1e-9) continue;
    while (j + 1 < traj.size() && traj[j + 1].t <= s.t) ++j;
    Vec3 p = traj[j].p;
    if (j + 1 < traj.size() && traj[j].t < s.t) {
      const double u = (s.t - traj[j].t) / (traj[j + 1].t - traj[j].t);
      p += u * (traj[j + 1].p - traj[j].p);
    }
    sum += (p - s.p).squaredNorm();
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::InsufficientOverlap, "trajectory and truth do not overlap in time");
  return std::sqrt(sum / static_cast<double>(count));
}

std::vector<PositionFix> sample_fixes(const PoseTrack& truth, double interval, double sigma) {
  if (!(interval > 0.0) || !(sigma > 0.0)) throw Error(ErrorKind::BadArguments, "interval and sigma must be positive");
  if (truth.samples.empty()) throw Error(ErrorKind::EmptyInput, "empty reference track");
  std::vector<PositionFix> fixes;
  for (std::size_t k = 0;; ++k) {
    const double t = truth.start_time() + static_cast<double>(k) * interval;
    if (t > truth.end_time() + 1e-9) break;
    fixes.push_back({t, interpolate_position(truth, std::min(t, truth.end_time())), sigma});
  }
  return fixes;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz\n";
  for (const auto& pt : traj) {
    out << detail::format_double(pt.t);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(pt.p[i]);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(pt.v[i]);
    for (double c : {pt.q.w, pt.q.x, pt.q.y, pt.q.z}) out << ',' << detail::format_double(c);
    out << '\n';
  }
}

Trajectory load_trajectory_csv(const std::filesystem::path& path) {
  const auto rows = detail::read_numeric_csv(path, "t,px,py,pz,vx,vy,vz,qw,qx,qy,qz");
  Trajectory traj;
  for (const auto& r : rows) {
    traj.push_back({r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}, {r[7], r[8], r[9], r[10]}});
  }
  return traj;
}

void write_fixes_csv(const std::vector<PositionFix>& fixes, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,px,py,pz,sigma\n";
  for (const auto& f : fixes) {
    out << detail::format_double(f.t);
    for (int i = 0; i < 3; ++i) out << ',' << detail::format_double(f.p[i]);
    out << ',' << detail::format_double(f.sigma) << '\n';
  }
}

std::vector<PositionFix> load_fixes_csv(const std::filesystem::path& path) {
  const auto rows = detail::read_numeric_csv(path, "t,px,py,pz,sigma");
  std::vector<PositionFix> fixes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!(r[4] > 0.0)) throw Error(ErrorKind::MalformedRow, detail::line_msg(path, i + 2, "sigma must be positive"));
    if (i > 0 && r[0] < rows[i - 1][0]) {
      throw Error(ErrorKind::NonMonotoneTime, detail::line_msg(path, i + 2, "fixes must be sorted by time"));
    }
    fixes.push_back({r[0], {r[1], r[2], r[3]}, r[4]});
  }
  return fixes;
}

}  // namespace vins::ins
