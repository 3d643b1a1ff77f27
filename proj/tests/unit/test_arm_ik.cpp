#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "egobridge/arm_ik.hpp"
#include "egobridge/errors.hpp"
#include "random.hpp"

using namespace egobridge;

namespace {

const std::filesystem::path kData = EGOBRIDGE_DEFAULT_DATA_DIR;

ArmModel arm() { return load_arm_model(kData / "arm_7dof.json"); }

JointVector random_q(const ArmModel& m, std::mt19937_64& rng, double margin = 0.0) {
  JointVector q(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    const ArmJoint& j = m.joints[static_cast<std::size_t>(i)];
    std::uniform_real_distribution<double> u(j.lo + margin, j.hi - margin);
    q[i] = u(rng);
  }
  return q;
}

ArmModel single_z_joint() {
  ArmModel m;
  ArmJoint j;
  j.name = "yaw";
  j.axis = Vec3::UnitZ();
  j.lo = -std::numbers::pi;
  j.hi = std::numbers::pi;
  m.joints.push_back(j);
  m.ee_offset = Pose::translation({0.5, 0, 0});
  return m;
}

}  // namespace

TEST_CASE("arm model file") {
  const ArmModel m = arm();
  CHECK(m.dof() == 7);
  const ArmModel back = arm_model_from_json(to_json(m));
  const JointVector q = JointVector::Constant(7, 0.1);
  CHECK((arm_fk(back, q).t - arm_fk(m, q).t).norm() == 0.0);

  io::Json j = to_json(m);
  SUBCASE("inverted limits") {
    j["joints"][3]["lo"] = 3.0;
    CHECK_THROWS_AS(arm_model_from_json(j), InvalidModel);
  }
  SUBCASE("non-unit axis") {
    j["joints"][0]["axis"] = {0, 2, 0};
    CHECK_THROWS_AS(arm_model_from_json(j), InvalidModel);
  }
  SUBCASE("no joints") {
    j["joints"] = io::Json::array();
    CHECK_THROWS_AS(arm_model_from_json(j), InvalidModel);
  }
  SUBCASE("missing origin") {
    j["joints"][2].erase("origin");
    CHECK_THROWS_AS(arm_model_from_json(j), SchemaError);
  }
}

TEST_CASE("arm FK at zero is the product of the offsets") {
  const ArmModel m = arm();
  Pose expected;
  for (const ArmJoint& j : m.joints) expected = pose_compose(expected, j.origin);
  expected = pose_compose(expected, m.ee_offset);
  const Pose p = arm_fk(m, JointVector::Zero(7));
  CHECK((p.t - expected.t).norm() < 1e-15);
  CHECK((p.r - expected.r).norm() < 1e-15);
  CHECK((p.t - Vec3(0, 0, -0.63)).norm() < 1e-15);
  CHECK_THROWS_AS(arm_fk(m, JointVector::Zero(6)), ShapeMismatch);
}

TEST_CASE("single z joint rotates the end effector") {
  const ArmModel m = single_z_joint();
  const Pose p = arm_fk(m, JointVector::Constant(1, std::numbers::pi / 2));
  CHECK((p.t - Vec3(0, 0.5, 0)).norm() < 1e-15);
  CHECK(geodesic_angle(p.r, rotation_about(Vec3::UnitZ(), std::numbers::pi / 2)) < 1e-12);

  const ArmJacobian jac = geometric_jacobian(m, JointVector::Zero(1));
  Eigen::Matrix<double, 6, 1> expected;
  expected << Vec3::UnitZ().cross(Vec3(0.5, 0, 0)), Vec3::UnitZ();
  CHECK((jac.col(0) - expected).norm() < 1e-15);
}

TEST_CASE("geometric Jacobian matches finite differences of FK") {
  const ArmModel m = arm();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const JointVector q = random_q(m, rng, 0.01);
    const ArmJacobian jac = geometric_jacobian(m, q);
    REQUIRE(jac.rows() == 6);
    REQUIRE(jac.cols() == 7);
    const double h = 1e-6;
    for (int i = 0; i < m.dof(); ++i) {
      JointVector qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Pose a = arm_fk(m, qp);
      const Pose b = arm_fk(m, qm);
      Eigen::Matrix<double, 6, 1> fd;
      fd.head<3>() = (a.t - b.t) / (2 * h);
      fd.tail<3>() = log_so3(a.r * b.r.transpose()) / (2 * h);
      CHECK((jac.col(i) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("IK recovers FK-generated targets from nearby seeds") {
  const ArmModel m = arm();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  int solved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const JointVector truth = random_q(m, rng);
    JointVector q0 = truth;
    for (int i = 0; i < q0.size(); ++i) q0[i] += jitter(rng);
    q0 = clamp_joints(m, q0);
    const IkResult r = solve_ik(m, arm_fk(m, truth), q0);
    CHECK(within_limits(m, r.q));
    if (r.converged && r.pos_err < 1e-4 && r.rot_err < 1e-3) ++solved;
  }
  MESSAGE("IK solved " << solved << "/100");
  CHECK(solved >= 90);
}

TEST_CASE("IK at the seed pose takes zero iterations") {
  const ArmModel m = arm();
  std::mt19937_64 rng(5);
  const JointVector q0 = random_q(m, rng);
  const IkResult r = solve_ik(m, arm_fk(m, q0), q0);
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.q == q0);
}

TEST_CASE("unreachable targets fail cleanly") {
  const ArmModel m = arm();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Pose target = egobridge::testing::random_pose(rng);
    target.t = target.t.normalized() * 10.0;
    const IkResult r = solve_ik(m, target, JointVector::Zero(7));
    CHECK_FALSE(r.converged);
    CHECK(r.q.allFinite());
    CHECK(std::isfinite(r.pos_err));
    CHECK(within_limits(m, r.q));
    CHECK(r.restarts_used == IkConfig{}.restarts);
  }
}

TEST_CASE("iterates stay finite at the stretched singular pose") {
  const ArmModel m = arm();
  // Arm hanging straight down: shoulder and wrist roll axes are aligned.
  const JointVector q0 = JointVector::Zero(7);
  Pose target = arm_fk(m, q0);
  target.t += Vec3(0, 0, -0.05);  // beyond full reach
  IkConfig cfg;
  cfg.restarts = 0;
  const IkResult r = solve_ik(m, target, q0, cfg);
  CHECK(r.q.allFinite());
  CHECK_FALSE(r.converged);
  CHECK(r.pos_err == doctest::Approx(0.05).epsilon(1e-6));
}
