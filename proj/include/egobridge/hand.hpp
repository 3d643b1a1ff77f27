#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egobridge/geometry.hpp"
#include "egobridge/json_io.hpp"

namespace egobridge {

enum class Handedness { kLeft, kRight };

inline constexpr int kNumFingers = 5;
inline constexpr int kJointsPerFinger = 3;
inline constexpr int kHumanPoseDof = kNumFingers * kJointsPerFinger * 3;  // 45
inline constexpr int kPcaDim = 15;
inline constexpr int kNumKeypoints = 1 + kNumFingers * 4;  // 21
inline constexpr double kPcaSanityBound = 10.0;

using PcaCoeffs = Eigen::Matrix<double, kPcaDim, 1>;
using HandPose45 = Eigen::Matrix<double, kHumanPoseDof, 1>;
using PcaBasis = Eigen::Matrix<double, kHumanPoseDof, kPcaDim>;
using Fingertips = std::array<Point3, kNumFingers>;

// Keypoint layout: index 0 is the wrist root; finger f (thumb = 0 .. pinky
// = 4) owns indices 1 + 4f (base joint) through 4 + 4f (tip).
using HandKeypoints = std::array<Point3, kNumKeypoints>;

constexpr int fingertip_index(int finger) { return 4 + 4 * finger; }

// Rigid-chain stand-in for a parametric human hand: 5 fingers of 3 ball
// joints each. Joint rotations are axis-angle triples, applied in the
// joint-local frame from proximal to distal; each joint is followed by a
// translation of its segment length along the finger's rest direction.
struct HumanHandModel {
  Handedness handedness = Handedness::kRight;
  std::array<Vec3, kNumFingers> palm_offsets;
  std::array<Vec3, kNumFingers> finger_directions;  // unit
  std::array<std::array<double, kJointsPerFinger>, kNumFingers> segment_lengths{};
  HandPose45 mean_pose = HandPose45::Zero();
  PcaBasis pca_basis = PcaBasis::Zero();
};

Handedness parse_handedness(const std::string& s);
std::string to_string(Handedness h);

// Validates the "ehm-1" schema and model invariants.
HumanHandModel human_hand_model_from_json(const io::Json& j);
io::Json to_json(const HumanHandModel& m);
HumanHandModel load_hand_model(const std::filesystem::path& path);
void validate(const HumanHandModel& m);

// Throws InvalidModel if any coefficient is non-finite or beyond the
// sanity bound.
void check_pca(const PcaCoeffs& c);

HandPose45 pose_from_pca(const HumanHandModel& model, const PcaCoeffs& c);

// Keypoints in the wrist frame. When `side` differs from the model's
// handedness the result is mirrored across the x = 0 plane.
HandKeypoints human_hand_fk(const HumanHandModel& model, const PcaCoeffs& c);
HandKeypoints human_hand_fk(const HumanHandModel& model, const PcaCoeffs& c,
                            Handedness side);

Fingertips fingertips(const HandKeypoints& k);

// Central-difference Jacobian of the 15 fingertip coordinates
// (thumb..pinky, xyz) with respect to the PCA coefficients.
Eigen::Matrix<double, 3 * kNumFingers, kPcaDim> fingertip_jacobian(
    const HumanHandModel& model, const PcaCoeffs& c, Handedness side, double step = 1e-6);

// ---------------------------------------------------------------------------
// Robot hand

inline constexpr int kRobotActive = 6;
inline constexpr int kRobotMimic = 6;
inline constexpr int kRobotDof = kRobotActive + kRobotMimic;

using RobotHandCommand = Eigen::Matrix<double, kRobotActive, 1>;
using RobotJointVector = Eigen::Matrix<double, kRobotDof, 1>;

struct RobotJoint {
  std::string name;
  Vec3 axis = Vec3::UnitX();    // unit, in the joint frame
  Vec3 origin = Vec3::Zero();   // offset from the parent link frame
  double lo = 0.0;
  double hi = 0.0;
};

struct MimicJoint {
  RobotJoint joint;
  int source = 0;  // index into the active joints
  double multiplier = 1.0;
  double offset = 0.0;
};

// Six active and six mimic revolute joints arranged in five finger chains.
// Joint indices in `chains` address the expanded 12-vector: 0..5 are the
// active joints, 6..11 the mimic joints.
struct RobotHandModel {
  Handedness handedness = Handedness::kRight;
  std::array<RobotJoint, kRobotActive> active;
  std::array<MimicJoint, kRobotMimic> mimic;
  std::array<std::vector<int>, kNumFingers> chains;
  std::array<Vec3, kNumFingers> fingertip_offsets;

  const RobotJoint& joint(int expanded_index) const;
  double lo(int expanded_index) const { return joint(expanded_index).lo; }
  double hi(int expanded_index) const { return joint(expanded_index).hi; }
};

// Validates the "erh-1" schema and model invariants.
RobotHandModel robot_hand_model_from_json(const io::Json& j);
io::Json to_json(const RobotHandModel& m);
RobotHandModel load_robot_hand(const std::filesystem::path& path);
void validate(const RobotHandModel& m);

RobotHandCommand clamp_command(const RobotHandModel& model, const RobotHandCommand& q);

// Actives (clamped) followed by mimics (affine in their source, clamped).
RobotJointVector expand_mimic(const RobotHandModel& model, const RobotHandCommand& q);

// Fingertips in the wrist frame, mirrored across x = 0 when `side`
// differs from the model's handedness.
Fingertips robot_hand_fk(const RobotHandModel& model, const RobotHandCommand& q);
Fingertips robot_hand_fk(const RobotHandModel& model, const RobotHandCommand& q,
                         Handedness side);

}  // namespace egobridge
