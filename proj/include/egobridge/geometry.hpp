#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace egobridge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Point3 = Eigen::Vector3d;

// First two columns of a rotation matrix, stacked column-major:
// (r00, r10, r20, r01, r11, r21).
using Rot6D = Eigen::Matrix<double, 6, 1>;

// Norm below which Gram-Schmidt refuses to normalize.
inline constexpr double kDegenerateNorm = 1e-8;

// Rigid transform. Translation in meters; `r` must be a proper rotation.
struct Pose {
  Vec3 t = Vec3::Zero();
  Mat3 r = Mat3::Identity();

  static Pose identity() { return {}; }
  static Pose translation(const Vec3& t) { return {t, Mat3::Identity()}; }
};

Rot6D rot6d_from_matrix(const Mat3& r);

// Gram-Schmidt decode. Throws DegenerateInput when either column cannot be
// normalized.
Mat3 matrix_from_rot6d(const Rot6D& v);

// Vector-Jacobian product of matrix_from_rot6d: given dL/dR, returns dL/dv.
Rot6D matrix_from_rot6d_vjp(const Rot6D& v, const Mat3& grad_r);

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& a);
Point3 transform_point(const Pose& a, const Point3& p);

// Expresses a world-frame pose in the frame of a camera given as
// camera-to-world.
Pose project_to_camera(const Pose& camera_pose_world, const Pose& pose_world);
// Inverse of project_to_camera.
Pose unproject_from_camera(const Pose& camera_pose_world, const Pose& pose_camera);

// Angle of the relative rotation a^T b, in [0, pi].
double geodesic_angle(const Mat3& a, const Mat3& b);

// Rodrigues map and its inverse. log_so3 returns axis * angle with
// angle in [0, pi].
Mat3 exp_so3(const Vec3& axis_angle);
Vec3 log_so3(const Mat3& r);

Mat3 rotation_about(const Vec3& unit_axis, double angle);

bool is_rotation(const Mat3& r, double tol = 1e-9);

// Gram-Schmidt on the first two columns of `m`; the first column keeps its
// direction. Exact for matrices that are already rotations.
Mat3 orthonormalize(const Mat3& m);

}  // namespace egobridge
