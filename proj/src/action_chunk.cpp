#include "egobridge/action_chunk.hpp"

namespace egobridge {

HandVector encode_hand(const HandState& s) {
  HandVector v;
  v.segment<3>(kTransOffset) = s.wrist.t;
  v.segment<6>(kRotOffset) = rot6d_from_matrix(s.wrist.r);
  v.segment<kPcaDim>(kPcaOffset) = s.pca;
  return v;
}

HandState decode_hand(const HandVector& v) {
  HandState s;
  s.wrist.t = v.segment<3>(kTransOffset);
  s.wrist.r = matrix_from_rot6d(v.segment<6>(kRotOffset));
  s.pca = v.segment<kPcaDim>(kPcaOffset);
  return s;
}

StepVector encode_step(const HandState& left, const HandState& right) {
  StepVector v;
  v.head<kHandActionDim>() = encode_hand(left);
  v.tail<kHandActionDim>() = encode_hand(right);
  return v;
}

}  // namespace egobridge
