#include "cli.hpp"
#include "vins/datapipe.hpp"
#include "vins/error.hpp"
#include "vins/ins.hpp"
#include "vins/net.hpp"
#include "vins/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace vins;

namespace {

using RowsX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowsX4 = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

Eigen::Vector4d quat_to_array(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }
Quaternion quat_from_array(const Eigen::Vector4d& a) { return {a[0], a[1], a[2], a[3]}; }

ImuSequence imu_from_arrays(const Eigen::VectorXd& t, const RowsX3& acc, const RowsX3& gyro, double rate) {
  if (acc.rows() != t.size() || gyro.rows() != t.size()) {
    throw Error(ErrorKind::BadArguments, "t, acc and gyro must have the same number of rows");
  }
  ImuSequence seq;
  seq.nominal_rate = rate;
  for (Eigen::Index i = 0; i < t.size(); ++i) seq.samples.push_back({t[i], acc.row(i).transpose(), gyro.row(i).transpose()});
  return seq;
}

PoseTrack pose_from_arrays(const Eigen::VectorXd& t, const RowsX3& p, const RowsX4& q, double rate) {
  if (p.rows() != t.size() || q.rows() != t.size()) {
    throw Error(ErrorKind::BadArguments, "t, p and q must have the same number of rows");
  }
  PoseTrack track;
  track.nominal_rate = rate;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    track.samples.push_back({t[i], p.row(i).transpose(), quat_from_array(q.row(i).transpose())});
  }
  return track;
}

template <typename Seq, typename F>
RowsX3 stack3(const Seq& samples, F&& get) {
  RowsX3 out(static_cast<Eigen::Index>(samples.size()), 3);
  for (std::size_t i = 0; i < samples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = get(samples[i]).transpose();
  return out;
}

template <typename Seq>
Eigen::VectorXd times(const Seq& samples) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) t[static_cast<Eigen::Index>(i)] = samples[i].t;
  return t;
}

template <typename Seq>
RowsX4 quats(const Seq& samples) {
  RowsX4 out(static_cast<Eigen::Index>(samples.size()), 4);
  for (std::size_t i = 0; i < samples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = quat_to_array(samples[i].q).transpose();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Speed-constrained inertial navigation: simulator, speed CNN and EKF tracker";

  static py::exception<Error> error(m, "VinsError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error.ptr())(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  // ---- core
  m.def("quat_mul", [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return quat_to_array(quat_from_array(a) * quat_from_array(b));
  }, py::arg("a"), py::arg("b"), "Hamilton product of scalar-first quaternions.");
  m.def("quat_from_rate", [](const Vec3& omega, double dt) { return quat_to_array(quat_from_rate(omega, dt)); },
        py::arg("omega"), py::arg("dt"));
  m.def("rotate", [](const Eigen::Vector4d& q, const Vec3& v) { return rotate(quat_from_array(q), v); },
        py::arg("q"), py::arg("v"), "Rotate a body-frame vector into the world frame.");

  // ---- data
  py::class_<ImuSequence>(m, "ImuSequence")
      .def(py::init(&imu_from_arrays), py::arg("t"), py::arg("acc"), py::arg("gyro"), py::arg("rate") = 100.0)
      .def_property_readonly("t", [](const ImuSequence& s) { return times(s.samples); })
      .def_property_readonly("acc", [](const ImuSequence& s) { return stack3(s.samples, [](const ImuSample& x) { return x.acc; }); })
      .def_property_readonly("gyro", [](const ImuSequence& s) { return stack3(s.samples, [](const ImuSample& x) { return x.gyro; }); })
      .def_readwrite("rate", &ImuSequence::nominal_rate)
      .def("__len__", [](const ImuSequence& s) { return s.samples.size(); });

  py::class_<PoseTrack>(m, "PoseTrack")
      .def(py::init(&pose_from_arrays), py::arg("t"), py::arg("p"), py::arg("q"), py::arg("rate") = 60.0)
      .def_property_readonly("t", [](const PoseTrack& s) { return times(s.samples); })
      .def_property_readonly("p", [](const PoseTrack& s) { return stack3(s.samples, [](const PoseSample& x) { return x.p; }); })
      .def_property_readonly("q", [](const PoseTrack& s) { return quats(s.samples); })
      .def_readwrite("rate", &PoseTrack::nominal_rate)
      .def("__len__", [](const PoseTrack& s) { return s.samples.size(); });

  py::class_<MotionLabel>(m, "MotionLabel")
      .def(py::init([](const std::string& mode, double t0, double t1) {
             const auto parsed = parse_mode(mode);
             if (!parsed) throw Error(ErrorKind::BadArguments, "unknown mode " + mode);
             return MotionLabel{*parsed, t0, t1};
           }), py::arg("mode"), py::arg("t_start"), py::arg("t_end"))
      .def_property_readonly("mode", [](const MotionLabel& l) { return std::string(mode_name(l.mode)); })
      .def_readonly("t_start", &MotionLabel::t_start)
      .def_readonly("t_end", &MotionLabel::t_end);

  m.def("load_imu_csv", &load_imu_csv, py::arg("path"), py::arg("rate") = 100.0);
  m.def("load_pose_csv", &load_pose_csv, py::arg("path"), py::arg("rate") = 60.0);
  m.def("load_labels_csv", &load_labels_csv, py::arg("path"));
  m.def("write_imu_csv", &write_imu_csv, py::arg("imu"), py::arg("path"));
  m.def("write_pose_csv", &write_pose_csv, py::arg("track"), py::arg("path"));
  m.def("label_speed", &label_speed, py::arg("track"), py::arg("t0"), py::arg("t1"));

  py::class_<Window>(m, "Window")
      .def_readonly("data", &Window::data)
      .def_readonly("t0", &Window::t0)
      .def_readonly("t1", &Window::tT)
      .def_readonly("label_speed", &Window::label_speed)
      .def_property_readonly("mode", [](const Window& w) -> std::optional<std::string> {
        if (!w.mode) return std::nullopt;
        return std::string(mode_name(*w.mode));
      });

  m.def("extract_windows",
        [](const ImuSequence& imu, const PoseTrack& track, double window_seconds, double stride_seconds,
           bool randomize, std::uint64_t seed, bool normalize, const std::vector<MotionLabel>& labels) {
          WindowConfig cfg{window_seconds, stride_seconds, randomize, seed, normalize};
          return extract_windows(imu, track, cfg, labels);
        },
        py::arg("imu"), py::arg("track"), py::arg("window_seconds") = 2.0, py::arg("stride_seconds") = 1.0,
        py::arg("randomize") = false, py::arg("seed") = 0, py::arg("normalize") = false,
        py::arg("labels") = std::vector<MotionLabel>{});
  m.def("kfold_split", [](std::size_t n, int k, std::uint64_t seed) { return kfold_split(n, k, seed).assignments; },
        py::arg("n"), py::arg("k") = 10, py::arg("seed") = 0, "Fold index of every item.");

  // ---- simulator
  py::class_<sim::Stationary>(m, "Stationary").def(py::init<double>(), py::arg("duration"));
  py::class_<sim::StraightWalk>(m, "StraightWalk")
      .def(py::init<double, double, double, double>(), py::arg("speed"), py::arg("duration"),
           py::arg("gait_freq") = 0.0, py::arg("gait_amp") = 0.0);
  py::class_<sim::Circle>(m, "Circle")
      .def(py::init<double, double, double>(), py::arg("radius"), py::arg("angular_rate"), py::arg("duration"));

  py::class_<sim::TrajectorySpec>(m, "TrajectorySpec")
      .def(py::init([](std::vector<sim::Segment> segments, double rate, std::uint64_t seed) {
             return sim::TrajectorySpec{std::move(segments), rate, seed};
           }), py::arg("segments"), py::arg("sample_rate") = 100.0, py::arg("seed") = 0);

  py::class_<sim::NoiseSpec>(m, "NoiseSpec")
      .def(py::init([](double ad, double gd, const Vec3& ab, const Vec3& gb, std::uint64_t seed) {
             return sim::NoiseSpec{ad, gd, ab, gb, seed};
           }), py::arg("accel_density") = 0.0, py::arg("gyro_density") = 0.0, py::arg("accel_bias") = Vec3::Zero(),
           py::arg("gyro_bias") = Vec3::Zero(), py::arg("seed") = 0);

  m.def("gen_truth", py::overload_cast<const sim::TrajectorySpec&>(&sim::gen_truth), py::arg("spec"));
  m.def("derive_imu", [](const sim::TrajectorySpec& spec) { return sim::derive_imu(spec); }, py::arg("spec"));
  m.def("add_noise", &sim::add_noise, py::arg("imu"), py::arg("noise"));
  m.def("segment_labels", [](const sim::TrajectorySpec& spec) { return sim::AnalyticTrajectory(spec).labels(); },
        py::arg("spec"));

  // ---- network
  py::class_<net::NetArch>(m, "NetArch")
      .def(py::init([](int input_length, std::array<int, 4> channels, int kernel, std::array<int, 2> hidden) {
             net::NetArch a;
             a.input_length = input_length;
             a.channels = channels;
             a.kernel_len = kernel;
             a.hidden = hidden;
             return a;
           }), py::arg("input_length") = 200, py::arg("channels") = std::array<int, 4>{6, 60, 120, 240},
           py::arg("kernel") = 10, py::arg("hidden") = std::array<int, 2>{400, 40})
      .def_readonly("input_length", &net::NetArch::input_length)
      .def_readonly("channels", &net::NetArch::channels)
      .def_readonly("hidden", &net::NetArch::hidden)
      .def("flatten_dim", &net::NetArch::flatten_dim);

  py::class_<net::ModelParams>(m, "ModelParams")
      .def_property_readonly("arch", &net::ModelParams::arch)
      .def("parameter_count", &net::ModelParams::parameter_count)
      .def("__eq__", [](const net::ModelParams& a, const net::ModelParams& b) { return a == b; });

  m.def("init_params", &net::init_params, py::arg("arch"), py::arg("seed") = 0);
  m.def("load_weights", &net::load_weights, py::arg("path"));
  m.def("save_weights", &net::save_weights, py::arg("params"), py::arg("path"));
  m.def("predict", [](const net::ModelParams& p, const WindowData& x) { return net::predict(p, x); },
        py::arg("params"), py::arg("window"), "Speed for one 6 x L window.");
  m.def("train",
        [](const std::vector<Window>& windows, int epochs, int batch_size, double lr, std::uint64_t seed,
           const net::NetArch& arch) {
          net::TrainConfig cfg;
          cfg.epochs = epochs;
          cfg.batch_size = batch_size;
          cfg.learning_rate = lr;
          cfg.seed = seed;
          cfg.arch = arch;
          net::TrainResult res;
          {
            py::gil_scoped_release release;
            res = net::train(windows, cfg);
          }
          std::vector<double> losses;
          for (const auto& e : res.trace) losses.push_back(e.train_loss);
          return py::make_tuple(res.params, losses);
        },
        py::arg("windows"), py::arg("epochs") = 2000, py::arg("batch_size") = 10, py::arg("learning_rate") = 1e-4,
        py::arg("seed") = 0, py::arg("arch") = net::NetArch{},
        "Returns (params, per-epoch training loss).");
  m.def("evaluate",
        [](const net::ModelParams& p, const std::vector<Window>& windows) {
          const auto r = net::evaluate(p, windows);
          std::vector<double> preds;
          for (const auto& rec : r.records) preds.push_back(rec.prediction);
          return py::make_tuple(r.rmse, preds);
        },
        py::arg("params"), py::arg("windows"), "Returns (rmse, predictions).");

  // ---- tracker
  py::class_<ins::PositionFix>(m, "PositionFix")
      .def(py::init([](double t, const Vec3& p, double sigma) { return ins::PositionFix{t, p, sigma}; }),
           py::arg("t"), py::arg("p"), py::arg("sigma"))
      .def_readonly("t", &ins::PositionFix::t)
      .def_readonly("p", &ins::PositionFix::p)
      .def_readonly("sigma", &ins::PositionFix::sigma);
  m.def("sample_fixes", &ins::sample_fixes, py::arg("truth"), py::arg("interval") = 17.0, py::arg("sigma") = 0.05);
  m.def("load_fixes_csv", &ins::load_fixes_csv, py::arg("path"));

  m.def("run_tracker",
        [](const ImuSequence& imu, const std::vector<ins::PositionFix>& fixes, const std::string& mode,
           double speed, double sigma, std::optional<net::ModelParams> params, double period) {
          ins::SpeedSource src = ins::NoSpeed{};
          if (mode == "constant") src = ins::ConstantSpeed{speed, sigma};
          else if (mode == "cnn") {
            if (!params) throw Error(ErrorKind::BadArguments, "cnn mode needs params");
            src = ins::RegressedSpeed::from_model(*params, period);
          } else if (mode != "none") {
            throw Error(ErrorKind::BadArguments, "mode must be none, constant or cnn");
          }
          ins::FilterConfig cfg;
          cfg.pseudo_period = period;
          ins::Trajectory traj;
          {
            py::gil_scoped_release release;
            traj = ins::run_tracker(imu, fixes, src, cfg);
          }
          py::dict out;
          out["t"] = times(traj);
          out["p"] = stack3(traj, [](const ins::TrajectoryPoint& x) { return x.p; });
          out["v"] = stack3(traj, [](const ins::TrajectoryPoint& x) { return x.v; });
          out["q"] = quats(traj);
          return out;
        },
        py::arg("imu"), py::arg("fixes"), py::arg("mode") = "none", py::arg("speed") = 0.75,
        py::arg("sigma") = 1.0, py::arg("params") = std::nullopt, py::arg("period") = 1.0,
        "Returns a dict of arrays t, p, v, q.");
  m.def("trajectory_rmse",
        [](const Eigen::VectorXd& t, const RowsX3& p, const PoseTrack& truth) {
          ins::Trajectory traj;
          for (Eigen::Index i = 0; i < t.size(); ++i) traj.push_back({t[i], p.row(i).transpose(), Vec3::Zero(), {}});
          return ins::trajectory_rmse(traj, truth);
        },
        py::arg("t"), py::arg("p"), py::arg("truth"));

  // ---- command line
  m.def("run_cli",
        [](std::vector<std::string> args) {
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = cli::run_cli(std::move(args), out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a vins subcommand; returns (exit code, stdout, stderr).");
  m.attr("__version__") = cli::kToolVersion;
}
