#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egobridge/geometry.hpp"
#include "egobridge/json_io.hpp"

namespace egobridge {

struct ArmJoint {
  std::string name;
  Vec3 axis = Vec3::UnitZ();  // unit, in the joint frame
  Pose origin;                // from the previous joint frame
  double lo = 0.0;
  double hi = 0.0;
};

struct ArmModel {
  std::string name;
  std::vector<ArmJoint> joints;
  Pose ee_offset;

  int dof() const { return static_cast<int>(joints.size()); }
};

using JointVector = Eigen::VectorXd;
using ArmJacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

// Throws InvalidModel on an empty chain, a non-unit axis or lo >= hi.
void validate(const ArmModel& m);

ArmModel arm_model_from_json(const io::Json& j);
io::Json to_json(const ArmModel& m);
ArmModel load_arm_model(const std::filesystem::path& path);

JointVector clamp_joints(const ArmModel& m, const JointVector& q);
bool within_limits(const ArmModel& m, const JointVector& q);

// Throws ShapeMismatch when q has the wrong length.
Pose arm_fk(const ArmModel& m, const JointVector& q);

// Rows 0-2 linear velocity of the end effector, rows 3-5 angular velocity,
// both in the base frame.
ArmJacobian geometric_jacobian(const ArmModel& m, const JointVector& q);

struct IkConfig {
  double damping = 0.05;
  double max_step = 0.2;  // rad, largest joint change per iteration
  double pos_tolerance = 1e-4;
  double rot_tolerance = 1e-3;
  int max_iterations = 100;
  int restarts = 5;  // extra attempts from random in-limit seeds
  std::uint64_t seed = 0;
};

struct IkResult {
  JointVector q;
  double pos_err = 0.0;
  double rot_err = 0.0;
  int iterations = 0;  // of the attempt that produced q
  int restarts_used = 0;
  bool converged = false;
};

// 6-vector (p_target - p, log(R_target R^T)).
Eigen::Matrix<double, 6, 1> pose_error(const Pose& target, const Pose& current);

// Damped least squares. Unreachable targets come back with converged=false
// and the lowest-error q seen; the result always respects the limits.
IkResult solve_ik(const ArmModel& m, const Pose& target, const JointVector& q0,
                  const IkConfig& cfg = {});

}  // namespace egobridge
