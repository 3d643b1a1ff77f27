#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "egobridge/action_chunk.hpp"
#include "egobridge/arm_ik.hpp"
#include "egobridge/cli.hpp"
#include "egobridge/ensemble.hpp"
#include "egobridge/errors.hpp"
#include "egobridge/geometry.hpp"
#include "egobridge/hand.hpp"
#include "egobridge/metrics.hpp"
#include "egobridge/retarget.hpp"

namespace py = pybind11;
using namespace egobridge;

namespace {

using Tips = Eigen::Matrix<double, kNumFingers, 3, Eigen::RowMajor>;
using Keypoints = Eigen::Matrix<double, kNumKeypoints, 3, Eigen::RowMajor>;

Tips tips_to_matrix(const Fingertips& f) {
  Tips m;
  for (int i = 0; i < kNumFingers; ++i) m.row(i) = f[i].transpose();
  return m;
}

Fingertips tips_from_matrix(const Tips& m) {
  Fingertips f;
  for (int i = 0; i < kNumFingers; ++i) f[i] = m.row(i).transpose();
  return f;
}

py::object json_to_py(const io::Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_egobridge, m) {
  m.doc() = "egobridge: hand retargeting, action chunks, arm IK and task metrics";
  m.attr("__version__") = "0.1.0";

  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  (void)data_error;

  m.attr("HORIZON") = kHorizon;
  m.attr("STEP_DIM") = kStepDim;
  m.attr("CONTROL_HZ") = kControlHz;

  // geometry
  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Vec3& t, const Mat3& r) { return Pose{t, r}; }), py::arg("t"), py::arg("r"))
      .def_readwrite("t", &Pose::t)
      .def_readwrite("r", &Pose::r)
      .def("__matmul__", &pose_compose)
      .def("inverse", &pose_inverse)
      .def("__repr__", [](const Pose& p) {
        std::ostringstream s;
        s << "Pose(t=[" << p.t.transpose() << "])";
        return s.str();
      });
  m.def("rot6d_from_matrix", &rot6d_from_matrix, py::arg("r"));
  m.def("matrix_from_rot6d", &matrix_from_rot6d, py::arg("v"));
  m.def("pose_compose", &pose_compose);
  m.def("pose_inverse", &pose_inverse);
  m.def("transform_point", &transform_point, py::arg("pose"), py::arg("p"));
  m.def("project_to_camera", &project_to_camera, py::arg("camera_pose_world"), py::arg("pose_world"));
  m.def("unproject_from_camera", &unproject_from_camera, py::arg("camera_pose_world"), py::arg("pose_camera"));
  m.def("geodesic_angle", &geodesic_angle);
  m.def("exp_so3", &exp_so3);
  m.def("log_so3", &log_so3);
  m.def("is_rotation", &is_rotation, py::arg("r"), py::arg("tol") = 1e-9);

  // hands
  py::class_<HumanHandModel>(m, "HumanHandModel");
  m.def("load_hand_model", &load_hand_model, py::arg("path"));
  m.def(
      "human_hand_fk",
      [](const HumanHandModel& model, const PcaCoeffs& c) {
        const HandKeypoints k = human_hand_fk(model, c);
        Keypoints out;
        for (int i = 0; i < kNumKeypoints; ++i) out.row(i) = k[static_cast<std::size_t>(i)].transpose();
        return out;
      },
      py::arg("model"), py::arg("pca"), "21 x 3 keypoints in the wrist frame.");
  m.def(
      "human_fingertips",
      [](const HumanHandModel& model, const PcaCoeffs& c) { return tips_to_matrix(fingertips(human_hand_fk(model, c))); },
      py::arg("model"), py::arg("pca"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("pca", &FitResult::c)
      .def_readonly("residual", &FitResult::residual)
      .def_readonly("rms_error", &FitResult::rms_error)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("attempts", &FitResult::attempts)
      .def_readonly("converged", &FitResult::converged);
  m.def(
      "fit_hand_params",
      [](const HumanHandModel& model, const Tips& targets, const PcaCoeffs& init, double beta) {
        FitConfig cfg;
        cfg.beta = beta;
        return fit_hand_params(model, tips_from_matrix(targets), init, cfg);
      },
      py::arg("model"), py::arg("targets"), py::arg("init") = PcaCoeffs::Zero(), py::arg("beta") = 1.0);

  py::class_<RobotHandModel>(m, "RobotHandModel");
  m.def("load_robot_hand", &load_robot_hand, py::arg("path"));
  m.def(
      "robot_hand_fk",
      [](const RobotHandModel& model, const RobotHandCommand& q) { return tips_to_matrix(robot_hand_fk(model, q)); },
      py::arg("model"), py::arg("q"));

  // retargeting
  py::class_<BimanualCommand>(m, "BimanualCommand")
      .def(py::init<>())
      .def(py::init([](const RobotHandCommand& l, const RobotHandCommand& r) { return BimanualCommand{l, r}; }),
           py::arg("left"), py::arg("right"))
      .def_readwrite("left", &BimanualCommand::left)
      .def_readwrite("right", &BimanualCommand::right);
  py::class_<RetargetPair>(m, "RetargetPair")
      .def_readonly("input", &RetargetPair::input)
      .def_readonly("target", &RetargetPair::target);
  py::class_<RetargetHyper>(m, "RetargetHyper")
      .def(py::init<>())
      .def_readwrite("epochs", &RetargetHyper::epochs)
      .def_readwrite("batch", &RetargetHyper::batch)
      .def_readwrite("lr", &RetargetHyper::lr)
      .def_readwrite("seed", &RetargetHyper::seed)
      .def_readwrite("hidden", &RetargetHyper::hidden);
  py::class_<RetargeterWeights>(m, "RetargeterWeights")
      .def_readonly("final_loss", &RetargeterWeights::final_loss)
      .def("to_json", [](const RetargeterWeights& w) { return json_to_py(to_json(w)); });
  m.def("stratified_grid_commands", &stratified_grid_commands, py::arg("model"), py::arg("levels"),
        py::arg("count"), py::arg("seed"));
  m.def("random_commands", &random_commands, py::arg("model"), py::arg("count"), py::arg("seed"));
  m.def(
      "build_retarget_dataset",
      [](const RobotHandModel& model, const std::vector<BimanualCommand>& commands) {
        return build_retarget_dataset(model, commands);
      },
      py::arg("model"), py::arg("commands"));
  m.def(
      "train_retargeter",
      [](const std::vector<RetargetPair>& pairs, const RetargetHyper& hyper) {
        py::gil_scoped_release release;
        return train_retargeter(pairs, hyper);
      },
      py::arg("pairs"), py::arg("hyper") = RetargetHyper{});
  m.def("load_retargeter", &load_retargeter, py::arg("path"));
  m.def("retargeter_forward", &retargeter_forward, py::arg("weights"), py::arg("input"));
  m.def(
      "evaluate_retargeter",
      [](const RetargeterWeights& w, const RobotHandModel& model, const std::vector<RetargetPair>& pairs) {
        return evaluate_retargeter(w, model, pairs);
      },
      py::arg("weights"), py::arg("model"), py::arg("pairs"), "Mean fingertip error in meters.");
  m.def(
      "pack_fingertips",
      [](const Tips& left, const Tips& right) { return pack_fingertips(tips_from_matrix(left), tips_from_matrix(right)); },
      py::arg("left"), py::arg("right"));

  // arm
  py::class_<ArmModel>(m, "ArmModel").def_property_readonly("dof", &ArmModel::dof);
  m.def("load_arm_model", &load_arm_model, py::arg("path"));
  m.def("arm_fk", &arm_fk, py::arg("model"), py::arg("q"));
  m.def("within_limits", &within_limits, py::arg("model"), py::arg("q"));
  py::class_<IkConfig>(m, "IkConfig")
      .def(py::init<>())
      .def_readwrite("damping", &IkConfig::damping)
      .def_readwrite("max_step", &IkConfig::max_step)
      .def_readwrite("pos_tolerance", &IkConfig::pos_tolerance)
      .def_readwrite("rot_tolerance", &IkConfig::rot_tolerance)
      .def_readwrite("max_iterations", &IkConfig::max_iterations)
      .def_readwrite("restarts", &IkConfig::restarts)
      .def_readwrite("seed", &IkConfig::seed);
  py::class_<IkResult>(m, "IkResult")
      .def_readonly("q", &IkResult::q)
      .def_readonly("pos_err", &IkResult::pos_err)
      .def_readonly("rot_err", &IkResult::rot_err)
      .def_readonly("iterations", &IkResult::iterations)
      .def_readonly("restarts_used", &IkResult::restarts_used)
      .def_readonly("converged", &IkResult::converged);
  m.def("solve_ik", &solve_ik, py::arg("model"), py::arg("target"), py::arg("q0"), py::arg("config") = IkConfig{});

  // chunks
  py::class_<ChunkBuffer>(m, "ChunkBuffer")
      .def(py::init<double, int>(), py::arg("m") = kDefaultSmoothing, py::arg("capacity") = kHorizon)
      .def(
          "push",
          [](ChunkBuffer& b, Tick tick, const ActionChunk::Storage& values) {
            ActionChunk c;
            c.values = values;
            b.push(tick, c);
          },
          py::arg("tick"), py::arg("chunk"), "chunk: 30 x 48 array; row k is the action for tick + k.")
      .def("action", &ChunkBuffer::action, py::arg("tick"))
      .def("covers", &ChunkBuffer::covers, py::arg("tick"))
      .def_property_readonly("live", &ChunkBuffer::live)
      .def_property_readonly("smoothing", &ChunkBuffer::smoothing);

  // metrics
  py::class_<TaskRule>(m, "TaskRule")
      .def_readonly("task", &TaskRule::task)
      .def_readonly("instruction", &TaskRule::instruction)
      .def_property_readonly("subtasks", [](const TaskRule& r) {
        std::vector<std::string> names;
        for (const auto& s : r.subtasks) names.push_back(s.name);
        return names;
      });
  py::class_<TaskCatalog>(m, "TaskCatalog")
      .def_readonly("tasks", &TaskCatalog::tasks)
      .def("find", &TaskCatalog::find, py::return_value_policy::reference_internal);
  m.def("load_task_rules", &load_task_rules, py::arg("path"));
  py::class_<StepLog>(m, "StepLog")
      .def_readonly("task", &StepLog::task)
      .def_readonly("episode", &StepLog::episode)
      .def("__len__", [](const StepLog& l) { return l.steps.size(); });
  m.def("read_step_log", &read_step_log, py::arg("path"));
  py::class_<EpisodeResult>(m, "EpisodeResult")
      .def_readonly("task", &EpisodeResult::task)
      .def_readonly("episode", &EpisodeResult::episode)
      .def_readonly("success", &EpisodeResult::success)
      .def_readonly("success_tick", &EpisodeResult::success_tick)
      .def_readonly("subtask_values", &EpisodeResult::subtask_values)
      .def_readonly("subtask_names", &EpisodeResult::subtask_names)
      .def_readonly("progress", &EpisodeResult::progress);
  m.def(
      "eval_episode",
      [](const TaskRule& rule, const StepLog& log) {
        EpisodeResult r = eval_episode(rule, log.steps);
        r.episode = log.episode;
        return r;
      },
      py::arg("rule"), py::arg("log"));
  m.def(
      "aggregate", [](const std::vector<EpisodeResult>& results) { return json_to_py(to_json(aggregate(results))); },
      py::arg("results"), "SR / PSR report as a dict.");

  // command line
  m.def("data_dir", [] { return cli::data_dir().string(); });
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a subcommand in-process; returns (exit_code, stdout, stderr).");
}
