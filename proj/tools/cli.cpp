#include "cli.hpp"

#include "vins/datapipe.hpp"
#include "vins/error.hpp"
#include "vins/ins.hpp"
#include "vins/net.hpp"
#include "vins/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace vins::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

// Pulls `--config FILE` out of the argument list and appends every key=value
// entry that was not already given on the command line.
void merge_config(std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return;
  std::ifstream in(*path);
  if (!in) throw UsageError("cannot open config file " + *path);
  std::string line;
  int lineno = 0;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(*path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    if (key.empty()) throw UsageError(*path + ":" + std::to_string(lineno) + ": empty key");
    const std::string flag = "--" + key;
    if (!has_flag(args, flag)) extra.push_back(flag + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t given) {
  if (opt->count() > 0) return given;
  if (const char* env = std::getenv("VINS_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("VINS_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

json config_snapshot(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string& name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      cfg[name] = joined;
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  json config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

void write_manifest(const Manifest& m, const fs::path& path) {
  json j;
  j["tool"] = "vins";
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["args"] = m.args;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

fs::path manifest_path_for(const fs::path& primary) { return fs::path(primary.string() + ".manifest.json"); }

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

// ---- train ---------------------------------------------------------------

struct TrainOpts {
  std::string imu, pose, labels, out_weights, out_loss;
  int epochs = 2000;
  int batch = 10;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double window_sec = 2.0;
  double stride_sec = 1.0;
  int folds = 0;
  bool fixed_windows = false;
  double imu_rate = 100.0;
  std::vector<int> channels{60, 120, 240};
  std::vector<int> hidden{400, 40};
  int kernel = 10;
  CLI::Option* seed_opt = nullptr;
};

std::vector<MotionLabel> maybe_labels(const std::string& path) {
  return path.empty() ? std::vector<MotionLabel>{} : load_labels_csv(path);
}

net::NetArch arch_from(const TrainOpts& o) {
  if (o.channels.size() != 3) throw UsageError("--channels takes three values");
  if (o.hidden.size() != 2) throw UsageError("--hidden takes two values");
  net::NetArch arch;
  arch.channels = {6, o.channels[0], o.channels[1], o.channels[2]};
  arch.hidden = {o.hidden[0], o.hidden[1]};
  arch.kernel_len = o.kernel;
  return arch;
}

double rmse_of(const net::ModelParams& params, const std::vector<Window>& windows,
               const std::vector<std::size_t>& idx) {
  double ss = 0.0;
  for (auto i : idx) {
    const double e = net::predict(params, windows[i].data) - windows[i].label_speed;
    ss += e * e;
  }
  return idx.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(idx.size()));
}

void run_train(const TrainOpts& o, const CLI::App& sub, const std::vector<std::string>& args, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(o.seed_opt, o.seed);
  const net::NetArch arch = arch_from(o);
  const ImuSequence imu = load_imu_csv(o.imu, o.imu_rate);
  const PoseTrack pose = load_pose_csv(o.pose);
  const auto labels = maybe_labels(o.labels);

  WindowConfig wc;
  wc.window_seconds = o.window_sec;
  wc.stride_seconds = o.stride_sec;
  wc.randomize = !o.fixed_windows;
  wc.seed = seed;
  const auto windows = extract_windows(imu, pose, wc, labels);
  out << "windows: " << windows.size() << " x " << windows.front().data.cols() << " samples\n";

  net::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.learning_rate = o.lr;
  tc.seed = seed;
  tc.arch = arch;

  const fs::path weights_path = o.out_weights;
  const fs::path loss_path = o.out_loss.empty() ? fs::path(o.out_weights + ".loss.csv") : fs::path(o.out_loss);
  Manifest m{"train", args, config_snapshot(sub), seed, {o.imu, o.pose}, {}};
  if (!o.labels.empty()) m.inputs.push_back(o.labels);

  if (o.folds >= 2) {
    const FoldPlan plan = kfold_split(windows.size(), o.folds, seed);
    double sum = 0.0;
    for (int f = 0; f < o.folds; ++f) {
      const auto res = net::train(windows, tc, net::FoldSelection{&plan, f});
      const double r = rmse_of(res.params, windows, plan.validation_indices(f));
      sum += r;
      const fs::path fw = o.out_weights + ".fold" + std::to_string(f);
      const fs::path fl = o.out_weights + ".fold" + std::to_string(f) + ".loss.csv";
      net::save_weights(res.params, fw);
      net::write_loss_trace_csv(res.trace, fl);
      m.outputs.push_back(fw.string());
      m.outputs.push_back(fl.string());
      out << "fold " << f << ": validation rmse " << fmt(r) << " m/s\n";
    }
    out << "cross-validation rmse (mean over folds): " << fmt(sum / o.folds) << " m/s\n";
  }

  const auto res = net::train(windows, tc);
  net::save_weights(res.params, weights_path);
  net::write_loss_trace_csv(res.trace, loss_path);
  m.outputs.push_back(weights_path.string());
  m.outputs.push_back(loss_path.string());
  out << "final training loss: " << fmt(res.trace.back().train_loss) << "\n";
  write_manifest(m, manifest_path_for(weights_path));
}

// ---- eval ----------------------------------------------------------------

struct EvalOpts {
  std::string weights, imu, pose, labels, out_csv;
  double stride_sec = 1.0;
  double imu_rate = 100.0;
};

void run_eval(const EvalOpts& o, const CLI::App& sub, const std::vector<std::string>& args, std::ostream& out) {
  const auto params = net::load_weights(o.weights);
  const ImuSequence imu = load_imu_csv(o.imu, o.imu_rate);
  const PoseTrack pose = load_pose_csv(o.pose);
  WindowConfig wc;
  wc.window_seconds = params.input_length() / imu.nominal_rate;
  wc.stride_seconds = o.stride_sec;
  const auto windows = extract_windows(imu, pose, wc, maybe_labels(o.labels));
  const auto result = net::evaluate(params, windows);
  net::write_eval_csv(result.records, o.out_csv);
  out << "windows: " << result.records.size() << "\n";
  out << "rmse: " << fmt(result.rmse) << " m/s\n";
  for (const auto& row : net::rmse_by_mode(result.records)) {
    out << "  " << (row.mode ? std::string(mode_name(*row.mode)) : std::string("unlabeled")) << ": n="
        << row.count << " rmse=" << fmt(row.rmse) << " m/s\n";
  }
  Manifest m{"eval", args, config_snapshot(sub), 0, {o.weights, o.imu, o.pose}, {o.out_csv}};
  if (!o.labels.empty()) m.inputs.push_back(o.labels);
  write_manifest(m, manifest_path_for(o.out_csv));
}

// ---- track ---------------------------------------------------------------

struct TrackOpts {
  std::string imu, fixes, speed_mode = "none", weights, out_traj, truth;
  double speed = 0.75;
  double speed_sigma = 1.0;
  double period = 1.0;
  double imu_rate = 100.0;
};

void run_track(const TrackOpts& o, const CLI::App& sub, const std::vector<std::string>& args, std::ostream& out) {
  if (o.speed_mode == "cnn" && o.weights.empty()) throw UsageError("--speed-mode cnn requires --weights");
  const ImuSequence imu = load_imu_csv(o.imu, o.imu_rate);
  const auto fixes = ins::load_fixes_csv(o.fixes);
  ins::FilterConfig cfg;
  cfg.pseudo_period = o.period;

  ins::SpeedSource source = ins::NoSpeed{};
  if (o.speed_mode == "constant") {
    source = ins::ConstantSpeed{o.speed, o.speed_sigma};
  } else if (o.speed_mode == "cnn") {
    source = ins::RegressedSpeed::from_model(net::load_weights(o.weights), o.period);
  }
  const auto traj = ins::run_tracker(imu, fixes, source, cfg);
  out << "trajectory points: " << traj.size() << "\n";

  Manifest m{"track", args, config_snapshot(sub), 0, {o.imu, o.fixes}, {}};
  if (!o.weights.empty()) m.inputs.push_back(o.weights);
  if (!o.truth.empty()) {
    const double r = ins::trajectory_rmse(traj, load_pose_csv(o.truth));
    out << "position rmse (" << o.speed_mode << "): " << fmt(r) << " m\n";
    m.inputs.push_back(o.truth);
  }
  if (!o.out_traj.empty()) {
    ins::write_trajectory_csv(traj, o.out_traj);
    m.outputs.push_back(o.out_traj);
    write_manifest(m, manifest_path_for(o.out_traj));
  }
}

// ---- simulate ------------------------------------------------------------

sim::TrajectorySpec parse_spec(const json& j) {
  sim::TrajectorySpec spec;
  spec.sample_rate = j.value("sample_rate", 100.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  if (!j.contains("segments") || !j["segments"].is_array()) {
    throw Error(ErrorKind::BadSpec, "trajectory spec needs a \"segments\" array");
  }
  for (const auto& s : j["segments"]) {
    const std::string type = s.value("type", "");
    if (type == "stationary") {
      spec.segments.push_back(sim::Stationary{s.at("duration").get<double>()});
    } else if (type == "straight_walk") {
      spec.segments.push_back(sim::StraightWalk{s.at("speed").get<double>(), s.at("duration").get<double>(),
                                                s.value("gait_freq", 0.0), s.value("gait_amp", 0.0)});
    } else if (type == "circle") {
      spec.segments.push_back(sim::Circle{s.at("radius").get<double>(), s.at("angular_rate").get<double>(),
                                          s.at("duration").get<double>()});
    } else {
      throw Error(ErrorKind::BadSpec, "unknown segment type \"" + type + "\"");
    }
  }
  return spec;
}

Vec3 parse_vec3(const json& j, const char* key) {
  if (!j.contains(key)) return Vec3::Zero();
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw Error(ErrorKind::BadSpec, std::string(key) + " must be a 3-vector");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

sim::NoiseSpec parse_noise(const json& j) {
  sim::NoiseSpec n;
  n.accel_density = j.value("accel_density", 0.0);
  n.gyro_density = j.value("gyro_density", 0.0);
  n.accel_bias = parse_vec3(j, "accel_bias");
  n.gyro_bias = parse_vec3(j, "gyro_bias");
  n.seed = j.value("seed", std::uint64_t{0});
  if (n.accel_density < 0.0 || n.gyro_density < 0.0) throw Error(ErrorKind::BadSpec, "noise densities must be >= 0");
  return n;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadSpec, path + ": " + e.what());
  }
}

struct SimOpts {
  std::string spec, noise, out_imu, out_pose, out_labels, out_fixes;
  double fix_interval = 17.0;
  double fix_sigma = 0.05;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void run_simulate(const SimOpts& o, const CLI::App& sub, const std::vector<std::string>& args, std::ostream& out) {
  sim::TrajectorySpec spec;
  sim::NoiseSpec noise;
  try {
    spec = parse_spec(read_json(o.spec));
    if (!o.noise.empty()) noise = parse_noise(read_json(o.noise));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadSpec, e.what());
  }
  // An explicit seed (flag or VINS_SEED) overrides the one in the noise file.
  const bool seed_given = o.seed_opt->count() > 0 || std::getenv("VINS_SEED") != nullptr;
  if (seed_given) noise.seed = resolve_seed(o.seed_opt, o.seed);

  const sim::AnalyticTrajectory traj(spec);
  const PoseTrack truth = sim::gen_truth(traj);
  const ImuSequence imu = sim::add_noise(sim::derive_imu(traj), noise);
  write_imu_csv(imu, o.out_imu);
  write_pose_csv(truth, o.out_pose);
  Manifest m{"simulate", args, config_snapshot(sub), noise.seed, {o.spec}, {o.out_imu, o.out_pose}};
  if (!o.noise.empty()) m.inputs.push_back(o.noise);
  if (!o.out_labels.empty()) {
    write_labels_csv(traj.labels(), o.out_labels);
    m.outputs.push_back(o.out_labels);
  }
  if (!o.out_fixes.empty()) {
    ins::write_fixes_csv(ins::sample_fixes(truth, o.fix_interval, o.fix_sigma), o.out_fixes);
    m.outputs.push_back(o.out_fixes);
  }
  out << "simulated " << imu.samples.size() << " samples over " << fmt(traj.duration()) << " s\n";
  write_manifest(m, manifest_path_for(o.out_imu));
}

// ---- stats ---------------------------------------------------------------

struct StatsOpts {
  std::string pose, labels, out_hist;
  double window_sec = 2.0;
  double stride_sec = 1.0;
  double bin_width = 0.25;
  double sub_dt = 0.01;
};

void run_stats(const StatsOpts& o, const CLI::App& sub, const std::vector<std::string>& args, std::ostream& out) {
  if (!(o.bin_width > 0.0) || !(o.window_sec > 0.0) || !(o.stride_sec > 0.0) || !(o.sub_dt > 0.0)) {
    throw UsageError("--window-sec, --stride-sec, --bin-width and --sub-dt must be positive");
  }
  const PoseTrack pose = load_pose_csv(o.pose);
  const auto labels = maybe_labels(o.labels);

  struct Row {
    std::optional<Mode> mode;
    SpeedStats stats;
  };
  std::vector<Row> rows;
  const double begin = pose.start_time();
  const double end = pose.end_time();
  for (int k = 0;; ++k) {
    const double t0 = begin + k * o.stride_sec;
    const double t1 = t0 + o.window_sec;
    if (t1 > end + 1e-9) break;
    rows.push_back({majority_mode(labels, t0, t1), window_speed_stats(pose, t0, std::min(t1, end), o.sub_dt)});
  }
  if (rows.empty()) throw Error(ErrorKind::InsufficientOverlap, "pose track shorter than one window");

  double top = 0.0;
  for (const auto& r : rows) top = std::max(top, r.stats.max);
  const int bins = std::max(1, static_cast<int>(std::floor(top / o.bin_width)) + 1);
  auto bin_of = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / o.bin_width)), 0, bins - 1); };

  // Key -1 collects unlabeled windows.
  std::map<int, std::array<std::vector<std::size_t>, 3>> hist;
  for (const auto& r : rows) {
    auto& h = hist[r.mode ? static_cast<int>(*r.mode) : -1];
    for (auto& v : h) v.resize(static_cast<std::size_t>(bins), 0);
    ++h[0][static_cast<std::size_t>(bin_of(r.stats.min))];
    ++h[1][static_cast<std::size_t>(bin_of(r.stats.max))];
    ++h[2][static_cast<std::size_t>(bin_of(r.stats.mean))];
  }
  std::ofstream csv(o.out_hist);
  if (!csv) throw Error(ErrorKind::IoError, "cannot write " + o.out_hist);
  csv << "mode,stat,bin_lo,bin_hi,count\n";
  const char* stat_names[3] = {"min", "max", "mean"};
  for (const auto& [key, h] : hist) {
    const std::string name = key < 0 ? "unlabeled" : std::string(mode_name(static_cast<Mode>(key)));
    for (int s = 0; s < 3; ++s) {
      for (int b = 0; b < bins; ++b) {
        csv << name << ',' << stat_names[s] << ',' << b * o.bin_width << ',' << (b + 1) * o.bin_width << ','
            << h[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] << '\n';
      }
    }
  }
  if (!csv) throw Error(ErrorKind::IoError, "failed writing " + o.out_hist);
  out << "windows: " << rows.size() << "\n";
  Manifest m{"stats", args, config_snapshot(sub), 0, {o.pose}, {o.out_hist}};
  if (!o.labels.empty()) m.inputs.push_back(o.labels);
  write_manifest(m, manifest_path_for(o.out_hist));
}

// ---- replay --------------------------------------------------------------

std::vector<std::string> manifest_args(const std::string& path) {
  const json j = read_json(path);
  if (!j.contains("args") || !j["args"].is_array()) throw Error(ErrorKind::BadSpec, path + ": no \"args\" array");
  auto args = j["args"].get<std::vector<std::string>>();
  if (!args.empty() && args.front() == "replay") throw Error(ErrorKind::BadSpec, "manifest replays itself");
  // Pin the recorded seed so the replay does not depend on VINS_SEED.
  const bool seeded = !args.empty() && (args.front() == "train" || args.front() == "simulate");
  if (seeded && !has_flag(args, "--seed") && j.contains("seed")) {
    args.push_back("--seed=" + std::to_string(j["seed"].get<std::uint64_t>()));
  }
  return args;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speed-constrained inertial navigation toolkit", "vins"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  app.option_defaults()->always_capture_default();
  app.add_option("--config", "flat key=value file supplying defaults for any flag");

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "train the speed regressor");
  train->add_option("--imu", tr.imu, "IMU CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--pose", tr.pose, "reference pose CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--labels", tr.labels, "motion-mode labels CSV")->check(CLI::ExistingFile);
  train->add_option("--out-weights", tr.out_weights, "output weight file")->required();
  train->add_option("--out-loss", tr.out_loss, "loss trace CSV (default <out-weights>.loss.csv)");
  train->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  tr.seed_opt = train->add_option("--seed", tr.seed, "RNG seed (falls back to VINS_SEED)");
  train->add_option("--window-sec", tr.window_sec)->check(CLI::PositiveNumber);
  train->add_option("--stride-sec", tr.stride_sec)->check(CLI::PositiveNumber);
  train->add_option("--folds", tr.folds, "k-fold cross-validation before the final fit (0 = off)");
  train->add_flag("--fixed-windows", tr.fixed_windows, "use the fixed stride grid instead of jittered starts");
  train->add_option("--imu-rate", tr.imu_rate)->check(CLI::PositiveNumber);
  train->add_option("--channels", tr.channels, "conv output channels")->delimiter(',')->expected(3);
  train->add_option("--hidden", tr.hidden, "dense hidden sizes")->delimiter(',')->expected(2);
  train->add_option("--kernel", tr.kernel)->check(CLI::PositiveNumber);

  EvalOpts ev;
  auto* eval = app.add_subcommand("eval", "evaluate a trained regressor");
  eval->add_option("--weights", ev.weights)->required()->check(CLI::ExistingFile);
  eval->add_option("--imu", ev.imu)->required()->check(CLI::ExistingFile);
  eval->add_option("--pose", ev.pose)->required()->check(CLI::ExistingFile);
  eval->add_option("--labels", ev.labels)->check(CLI::ExistingFile);
  eval->add_option("--out-csv", ev.out_csv, "label,prediction,mode CSV")->required();
  eval->add_option("--stride-sec", ev.stride_sec)->check(CLI::PositiveNumber);
  eval->add_option("--imu-rate", ev.imu_rate)->check(CLI::PositiveNumber);

  TrackOpts tk;
  auto* track = app.add_subcommand("track", "run the INS tracker");
  track->add_option("--imu", tk.imu)->required()->check(CLI::ExistingFile);
  track->add_option("--fixes", tk.fixes)->required()->check(CLI::ExistingFile);
  track->add_option("--speed-mode", tk.speed_mode)->check(CLI::IsMember({"none", "constant", "cnn"}));
  track->add_option("--weights", tk.weights)->check(CLI::ExistingFile);
  track->add_option("--speed", tk.speed, "constant pseudo-speed (m/s)")->check(CLI::NonNegativeNumber);
  track->add_option("--speed-sigma", tk.speed_sigma, "constant pseudo-speed sigma (m/s)")->check(CLI::PositiveNumber);
  track->add_option("--period", tk.period, "seconds between pseudo-speed updates")->check(CLI::PositiveNumber);
  track->add_option("--out-traj", tk.out_traj);
  track->add_option("--truth", tk.truth, "reference pose CSV for RMSE")->check(CLI::ExistingFile);
  track->add_option("--imu-rate", tk.imu_rate)->check(CLI::PositiveNumber);

  SimOpts sm;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic IMU and pose data");
  simulate->add_option("--spec", sm.spec, "trajectory spec JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--noise", sm.noise, "noise spec JSON")->check(CLI::ExistingFile);
  simulate->add_option("--out-imu", sm.out_imu)->required();
  simulate->add_option("--out-pose", sm.out_pose)->required();
  simulate->add_option("--out-labels", sm.out_labels);
  simulate->add_option("--out-fixes", sm.out_fixes);
  simulate->add_option("--fix-interval", sm.fix_interval)->check(CLI::PositiveNumber);
  simulate->add_option("--fix-sigma", sm.fix_sigma)->check(CLI::PositiveNumber);
  sm.seed_opt = simulate->add_option("--seed", sm.seed, "noise seed (overrides the noise file)");

  StatsOpts st;
  auto* stats = app.add_subcommand("stats", "per-mode speed statistics histogram");
  stats->add_option("--pose", st.pose)->required()->check(CLI::ExistingFile);
  stats->add_option("--labels", st.labels)->check(CLI::ExistingFile);
  stats->add_option("--out-hist", st.out_hist)->required();
  stats->add_option("--window-sec", st.window_sec);
  stats->add_option("--stride-sec", st.stride_sec);
  stats->add_option("--bin-width", st.bin_width);
  stats->add_option("--sub-dt", st.sub_dt);

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);

  try {
    merge_config(args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }
    if (train->parsed()) run_train(tr, *train, args, out);
    else if (eval->parsed()) run_eval(ev, *eval, args, out);
    else if (track->parsed()) run_track(tk, *track, args, out);
    else if (simulate->parsed()) run_simulate(sm, *simulate, args, out);
    else if (stats->parsed()) run_stats(st, *stats, args, out);
    else if (replay->parsed()) return run_cli(manifest_args(manifest), out, err);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, const char* const argv[]) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(std::move(args), std::cout, std::cerr);
}

}  // namespace vins::cli
