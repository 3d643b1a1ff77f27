#include "egobridge/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "egobridge/errors.hpp"

namespace egobridge {

Rot6D rot6d_from_matrix(const Mat3& r) {
  Rot6D v;
  v << r.col(0), r.col(1);
  return v;
}

Mat3 matrix_from_rot6d(const Rot6D& v) {
  const Vec3 a = v.head<3>();
  const Vec3 b = v.tail<3>();
  const double na = a.norm();
  if (!(na >= kDegenerateNorm)) {
    throw DegenerateInput("rot6d: first column has near-zero norm");
  }
  const Vec3 b1 = a / na;
  const Vec3 u = b - b1.dot(b) * b1;
  const double nu = u.norm();
  if (!(nu >= kDegenerateNorm)) {
    throw DegenerateInput("rot6d: second column is parallel to the first");
  }
  const Vec3 b2 = u / nu;
  Mat3 r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

Rot6D matrix_from_rot6d_vjp(const Rot6D& v, const Mat3& grad_r) {
  const Vec3 a = v.head<3>();
  const Vec3 b = v.tail<3>();
  const double na = a.norm();
  if (!(na >= kDegenerateNorm)) {
    throw DegenerateInput("rot6d: first column has near-zero norm");
  }
  const Vec3 b1 = a / na;
  const double proj = b1.dot(b);
  const Vec3 u = b - proj * b1;
  const double nu = u.norm();
  if (!(nu >= kDegenerateNorm)) {
    throw DegenerateInput("rot6d: second column is parallel to the first");
  }
  const Vec3 b2 = u / nu;

  const Vec3 g3 = grad_r.col(2);
  Vec3 g1 = grad_r.col(0) + b2.cross(g3);
  const Vec3 g2 = grad_r.col(1) + g3.cross(b1);

  // b2 = u / |u|
  const Vec3 gu = (g2 - b2 * b2.dot(g2)) / nu;
  // u = b - (b1 . b) b1
  const Vec3 gb = gu - b1 * b1.dot(gu);
  g1 -= proj * gu + b * b1.dot(gu);
  // b1 = a / |a|
  const Vec3 ga = (g1 - b1 * b1.dot(g1)) / na;

  Rot6D out;
  out << ga, gb;
  return out;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.r * b.t + a.t, a.r * b.r};
}

Pose pose_inverse(const Pose& a) {
  const Mat3 rt = a.r.transpose();
  return {-(rt * a.t), rt};
}

Point3 transform_point(const Pose& a, const Point3& p) { return a.r * p + a.t; }

Pose project_to_camera(const Pose& camera_pose_world, const Pose& pose_world) {
  return pose_compose(pose_inverse(camera_pose_world), pose_world);
}

Pose unproject_from_camera(const Pose& camera_pose_world, const Pose& pose_camera) {
  return pose_compose(camera_pose_world, pose_camera);
}

double geodesic_angle(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Mat3 exp_so3(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-15) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Vec3 log_so3(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

Mat3 rotation_about(const Vec3& unit_axis, double angle) {
  return Eigen::AngleAxisd(angle, unit_axis).toRotationMatrix();
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 orthonormalize(const Mat3& m) {
  Rot6D v;
  v << m.col(0), m.col(1);
  return matrix_from_rot6d(v);
}

}  // namespace egobridge
