#include "egobridge/arm_ik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>

#include "egobridge/errors.hpp"

namespace egobridge {

void validate(const ArmModel& m) {
  if (m.joints.empty()) throw InvalidModel("arm model has no joints");
  for (std::size_t i = 0; i < m.joints.size(); ++i) {
    const ArmJoint& j = m.joints[i];
    const std::string where = "joints[" + std::to_string(i) + "] (" + j.name + ")";
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) throw InvalidModel(where + ": axis is not unit length");
    if (!(j.lo < j.hi)) throw InvalidModel(where + ": limits must satisfy lo < hi");
    if (!is_rotation(j.origin.r)) throw InvalidModel(where + ": origin rotation is not orthonormal");
  }
}

ArmModel arm_model_from_json(const io::Json& j) {
  io::check_schema(j, "earm-1", "");
  ArmModel m;
  m.name = j.contains("name") ? io::require_string(j, "name", "") : "";
  const io::Json& joints = io::require(j, "joints", "");
  if (!joints.is_array()) throw SchemaError("joints: expected an array");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string path = "joints[" + std::to_string(i) + "]";
    const io::Json& e = joints[i];
    ArmJoint jt;
    jt.name = io::require_string(e, "name", path);
    jt.axis = io::as_vec3(io::require(e, "axis", path), path + ".axis");
    jt.origin = io::pose_from_json(io::require(e, "origin", path), path + ".origin");
    jt.lo = io::require_number(e, "lo", path);
    jt.hi = io::require_number(e, "hi", path);
    m.joints.push_back(jt);
  }
  m.ee_offset = io::pose_from_json(io::require(j, "ee_offset", ""), "ee_offset");
  validate(m);
  return m;
}

io::Json to_json(const ArmModel& m) {
  io::Json joints = io::Json::array();
  for (const ArmJoint& jt : m.joints) {
    joints.push_back({{"name", jt.name},
                      {"axis", {jt.axis.x(), jt.axis.y(), jt.axis.z()}},
                      {"origin", io::pose_to_json(jt.origin)},
                      {"lo", jt.lo},
                      {"hi", jt.hi}});
  }
  return {{"schema", "earm-1"},
          {"name", m.name},
          {"joints", joints},
          {"ee_offset", io::pose_to_json(m.ee_offset)}};
}

ArmModel load_arm_model(const std::filesystem::path& path) {
  return arm_model_from_json(io::read_json_file(path));
}

namespace {

void check_size(const ArmModel& m, const JointVector& q) {
  if (q.size() != m.dof()) {
    throw ShapeMismatch("arm: expected " + std::to_string(m.dof()) + " joint values, got " +
                        std::to_string(q.size()));
  }
}

// Frame of every joint (after its origin, before its rotation) plus the
// end-effector pose.
struct ChainFrames {
  std::vector<Pose> joint;
  Pose ee;
};

ChainFrames chain_frames(const ArmModel& m, const JointVector& q) {
  check_size(m, q);
  ChainFrames out;
  out.joint.reserve(m.joints.size());
  Pose t;
  for (int i = 0; i < m.dof(); ++i) {
    const ArmJoint& jt = m.joints[static_cast<std::size_t>(i)];
    t = pose_compose(t, jt.origin);
    out.joint.push_back(t);
    t.r = t.r * rotation_about(jt.axis, q[i]);
  }
  out.ee = pose_compose(t, m.ee_offset);
  return out;
}

}  // namespace

JointVector clamp_joints(const ArmModel& m, const JointVector& q) {
  check_size(m, q);
  JointVector out = q;
  for (int i = 0; i < m.dof(); ++i) {
    out[i] = std::clamp(q[i], m.joints[static_cast<std::size_t>(i)].lo,
                        m.joints[static_cast<std::size_t>(i)].hi);
  }
  return out;
}

bool within_limits(const ArmModel& m, const JointVector& q) {
  if (q.size() != m.dof()) return false;
  for (int i = 0; i < m.dof(); ++i) {
    const ArmJoint& jt = m.joints[static_cast<std::size_t>(i)];
    if (!(q[i] >= jt.lo && q[i] <= jt.hi)) return false;
  }
  return true;
}

Pose arm_fk(const ArmModel& m, const JointVector& q) { return chain_frames(m, q).ee; }

ArmJacobian geometric_jacobian(const ArmModel& m, const JointVector& q) {
  const ChainFrames f = chain_frames(m, q);
  ArmJacobian jac(6, m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    const Pose& frame = f.joint[static_cast<std::size_t>(i)];
    const Vec3 z = frame.r * m.joints[static_cast<std::size_t>(i)].axis;
    jac.col(i).head<3>() = z.cross(f.ee.t - frame.t);
    jac.col(i).tail<3>() = z;
  }
  return jac;
}

Eigen::Matrix<double, 6, 1> pose_error(const Pose& target, const Pose& current) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.t - current.t;
  e.tail<3>() = log_so3(target.r * current.r.transpose());
  return e;
}

namespace {

IkResult solve_once(const ArmModel& m, const Pose& target, const JointVector& q0,
                    const IkConfig& cfg) {
  IkResult best;
  JointVector q = clamp_joints(m, q0);
  double best_score = std::numeric_limits<double>::infinity();
  const double lambda2 = cfg.damping * cfg.damping;

  for (int it = 0;; ++it) {
    const Eigen::Matrix<double, 6, 1> e = pose_error(target, arm_fk(m, q));
    const double pos = e.head<3>().norm();
    const double rot = e.tail<3>().norm();
    // Error in meters plus radians scaled to a 0.1 m lever; only used to
    // pick the best iterate of an unconverged solve.
    const double score = pos + 0.1 * rot;
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best.q = q;
      best.pos_err = pos;
      best.rot_err = rot;
      best.iterations = it;
    }
    if (pos < cfg.pos_tolerance && rot < cfg.rot_tolerance) {
      best = {q, pos, rot, it, 0, true};
      return best;
    }
    if (it >= cfg.max_iterations) break;

    const ArmJacobian jac = geometric_jacobian(m, q);
    Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
    jjt.diagonal().array() += lambda2;
    JointVector dq = jac.transpose() * jjt.ldlt().solve(e);
    const double largest = dq.cwiseAbs().maxCoeff();
    if (largest > cfg.max_step) dq *= cfg.max_step / largest;
    if (!dq.allFinite()) break;
    q = clamp_joints(m, q + dq);
  }
  return best;
}

}  // namespace

IkResult solve_ik(const ArmModel& m, const Pose& target, const JointVector& q0,
                  const IkConfig& cfg) {
  check_size(m, q0);
  IkResult best = solve_once(m, target, q0, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < cfg.restarts && !best.converged; ++k) {
    JointVector seed(m.dof());
    for (int i = 0; i < m.dof(); ++i) {
      const ArmJoint& jt = m.joints[static_cast<std::size_t>(i)];
      seed[i] = jt.lo + (jt.hi - jt.lo) * u(rng);
    }
    IkResult trial = solve_once(m, target, seed, cfg);
    trial.restarts_used = k + 1;
    if (trial.converged || trial.pos_err + 0.1 * trial.rot_err < best.pos_err + 0.1 * best.rot_err) {
      best = trial;
    } else {
      best.restarts_used = k + 1;
    }
  }
  return best;
}

}  // namespace egobridge
