#pragma once

#include <Eigen/Core>

#include "egobridge/geometry.hpp"
#include "egobridge/hand.hpp"

namespace egobridge {

inline constexpr int kHorizon = 30;       // future steps per chunk
inline constexpr double kControlHz = 30.0;
inline constexpr int kNumHands = 2;       // 0 = left, 1 = right
inline constexpr int kHandActionDim = 3 + 6 + kPcaDim;  // 24
inline constexpr int kStepDim = kNumHands * kHandActionDim;  // 48
inline constexpr int kChunkSize = kHorizon * kStepDim;  // 1440

// Offsets inside one hand's 24-value block.
inline constexpr int kTransOffset = 0;
inline constexpr int kRotOffset = 3;
inline constexpr int kPcaOffset = 9;

constexpr Handedness hand_side(int hand) {
  return hand == 0 ? Handedness::kLeft : Handedness::kRight;
}

// Wrist pose plus PCA pose coefficients for one hand.
struct HandState {
  Pose wrist;
  PcaCoeffs pca = PcaCoeffs::Zero();
};

using HandVector = Eigen::Matrix<double, kHandActionDim, 1>;
using StepVector = Eigen::Matrix<double, kStepDim, 1>;

HandVector encode_hand(const HandState& s);
// Throws DegenerateInput if the rot6D block cannot be decoded.
HandState decode_hand(const HandVector& v);

StepVector encode_step(const HandState& left, const HandState& right);

// Proprioception uses the same 2 x 24 layout as one chunk step.
using ProprioState = StepVector;

// H = 30 future steps x (left 24 | right 24). Row k is step k + 1.
struct ActionChunk {
  using Storage = Eigen::Matrix<double, kHorizon, kStepDim, Eigen::RowMajor>;
  Storage values = Storage::Zero();

  auto hand(int step, int h) { return values.row(step).segment<kHandActionDim>(h * kHandActionDim); }
  auto hand(int step, int h) const {
    return values.row(step).segment<kHandActionDim>(h * kHandActionDim);
  }
  Vec3 translation(int step, int h) const {
    return hand(step, h).segment<3>(kTransOffset).transpose();
  }
  Rot6D rot6d(int step, int h) const { return hand(step, h).segment<6>(kRotOffset).transpose(); }
  PcaCoeffs pca(int step, int h) const {
    return hand(step, h).segment<kPcaDim>(kPcaOffset).transpose();
  }
  void set_hand(int step, int h, const HandState& s) { hand(step, h) = encode_hand(s).transpose(); }

  bool all_finite() const { return values.allFinite(); }
};

}  // namespace egobridge
