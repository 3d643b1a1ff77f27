#pragma once

#include <random>

#include <Eigen/Geometry>

#include "egobridge/geometry.hpp"

namespace egobridge::testing {

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Pose random_pose(std::mt19937_64& rng, double scale = 1.0) {
  return {random_vec3(rng, scale), random_rotation(rng)};
}

template <typename Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.derived().data()[i] = u(rng);
}

}  // namespace egobridge::testing
