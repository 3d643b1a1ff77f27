#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "egobridge/hand.hpp"
#include "egobridge/nn.hpp"

namespace egobridge {

// ---------------------------------------------------------------------------
// Robot fingertips -> human PCA coefficients

double smooth_l1(double x, double beta);

struct FitConfig {
  int max_iterations = 100;
  double beta = 1.0;            // SmoothL1 transition, meters
  double step_tolerance = 1e-7;
  double gradient_tolerance = 1e-8;
  double jacobian_step = 1e-6;
  // Local minima exist. When a solve ends above restart_residual it is
  // retried from seeded random starts in [-restart_spread, restart_spread]
  // and the best result kept.
  int restarts = 8;
  double restart_residual = 1e-10;
  double restart_spread = 2.5;
  std::uint64_t restart_seed = 0;
};

struct FitResult {
  PcaCoeffs c = PcaCoeffs::Zero();
  double residual = 0.0;   // (1/5) sum over tips of SmoothL1 summed over xyz
  double rms_error = 0.0;  // root mean square fingertip distance, meters
  int iterations = 0;  // of the attempt that produced c
  int attempts = 1;
  bool converged = false;
};

// Mean SmoothL1 fingertip discrepancy between the hand at `c` and `targets`.
double fingertip_objective(const HumanHandModel& model, const PcaCoeffs& c,
                           const Fingertips& targets, double beta, Handedness side);

// Levenberg-damped Gauss-Newton on the SmoothL1 objective with a
// central-difference Jacobian. Coefficients are kept inside the sanity
// bound. Throws NonFinite if the objective stops being a number.
FitResult fit_hand_params(const HumanHandModel& model, const Fingertips& targets,
                          const PcaCoeffs& init, const FitConfig& cfg, Handedness side);
FitResult fit_hand_params(const HumanHandModel& model, const Fingertips& targets,
                          const PcaCoeffs& init = PcaCoeffs::Zero(), const FitConfig& cfg = {});

// Fits a demonstration frame by frame, warm-starting each frame from the
// previous solution.
std::vector<FitResult> fit_hand_sequence(const HumanHandModel& model,
                                         std::span<const Fingertips> targets, Handedness side,
                                         const FitConfig& cfg = {});

// ---------------------------------------------------------------------------
// Human fingertips -> robot joint commands

inline constexpr int kRetargetInput = 2 * kNumFingers * 3;  // 30
inline constexpr int kRetargetOutput = 2 * kRobotActive;    // 12

using RetargetInput = Eigen::Matrix<double, kRetargetInput, 1>;
using RetargetOutput = Eigen::Matrix<double, kRetargetOutput, 1>;

struct BimanualCommand {
  RobotHandCommand left = RobotHandCommand::Zero();
  RobotHandCommand right = RobotHandCommand::Zero();
};

// Left tips (thumb..pinky, xyz) then right tips, each in its wrist frame.
RetargetInput pack_fingertips(const Fingertips& left, const Fingertips& right);
RetargetOutput pack_commands(const BimanualCommand& q);
BimanualCommand unpack_commands(const RetargetOutput& v);

struct RetargetPair {
  RetargetInput input;
  RetargetOutput target;
};

// Robot FK of both hands; the left hand is the mirror of the model.
RetargetInput robot_fingertip_input(const RobotHandModel& model, const BimanualCommand& q);

std::vector<RetargetPair> build_retarget_dataset(const RobotHandModel& model,
                                                 std::span<const BimanualCommand> frames);

// Evenly spaced samples per active joint across its limits, paired between
// hands by a seeded permutation. Size = points_per_joint^6.
std::vector<BimanualCommand> joint_grid_commands(const RobotHandModel& model, int points_per_joint,
                                                 std::uint64_t seed);
// Stratified grid: `count` samples where each joint of each hand visits
// `levels` evenly spaced values across its limits equally often, combined
// across joints and hands by independent seeded shuffles.
std::vector<BimanualCommand> stratified_grid_commands(const RobotHandModel& model, int levels,
                                                      std::size_t count, std::uint64_t seed);
std::vector<BimanualCommand> random_commands(const RobotHandModel& model, std::size_t count,
                                             std::uint64_t seed);

struct RetargetHyper {
  int epochs = 2000;
  int batch = 2048;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64, 128, 64};
};

// Standardization is folded around the network: inputs and outputs are
// shifted and scaled by the training-set statistics.
struct RetargeterWeights {
  nn::Mlp mlp;
  RetargetInput input_mean = RetargetInput::Zero();
  RetargetInput input_scale = RetargetInput::Ones();
  RetargetOutput output_mean = RetargetOutput::Zero();
  RetargetOutput output_scale = RetargetOutput::Ones();
  double final_loss = 0.0;  // mean squared command error on the training set, rad^2
};

RetargeterWeights train_retargeter(std::span<const RetargetPair> pairs, const RetargetHyper& hyper);

// Raw network output in radians, unclamped.
RetargetOutput retargeter_forward(const RetargeterWeights& w, const RetargetInput& input);

BimanualCommand apply_retargeter(const RetargeterWeights& w, const RobotHandModel& model,
                                 const RetargetInput& fingertip_input);
BimanualCommand apply_retargeter(const RetargeterWeights& w, const RobotHandModel& model,
                                 const HandKeypoints& left, const HandKeypoints& right);

// Mean fingertip distance (meters) between `forward(network(input))` and
// the input tips, over pairs and tips.
using TipsForward = std::function<RetargetInput(const RetargetOutput&)>;
double evaluate_retargeter(const RetargeterWeights& w, std::span<const RetargetPair> pairs,
                           const TipsForward& forward);
// Uses clamped commands and robot_hand_fk.
double evaluate_retargeter(const RetargeterWeights& w, const RobotHandModel& model,
                           std::span<const RetargetPair> pairs);

io::Json to_json(const RetargeterWeights& w);
RetargeterWeights retargeter_from_json(const io::Json& j);
RetargeterWeights load_retargeter(const std::filesystem::path& path);

}  // namespace egobridge
