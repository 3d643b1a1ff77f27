#include "egobridge/ensemble.hpp"

#include <cmath>
#include <string>

#include "egobridge/errors.hpp"

namespace egobridge {

ChunkBuffer::ChunkBuffer(double m, int capacity)
    : m_(m), capacity_(static_cast<std::size_t>(capacity)) {
  if (!(m > 0.0) || !std::isfinite(m)) throw DataError("smoothing parameter must be positive");
  if (capacity < 1 || capacity > kHorizon) throw DataError("capacity must be in [1, 30]");
}

void ChunkBuffer::push(Tick tick, const ActionChunk& chunk) {
  if (!chunks_.empty() && tick <= chunks_.back().tick) {
    throw NonMonotonicTick("chunk tick " + std::to_string(tick) + " does not follow " +
                           std::to_string(chunks_.back().tick));
  }
  while (!chunks_.empty() && tick - chunks_.front().tick >= kHorizon) chunks_.pop_front();
  chunks_.push_back({tick, chunk});
  while (chunks_.size() > capacity_) chunks_.pop_front();
}

bool ChunkBuffer::covers(Tick tick) const {
  for (const Entry& e : chunks_) {
    if (tick >= e.tick && tick - e.tick < kHorizon) return true;
  }
  return false;
}

std::vector<Tick> ChunkBuffer::issue_ticks() const {
  std::vector<Tick> out;
  for (const Entry& e : chunks_) out.push_back(e.tick);
  return out;
}

StepVector ChunkBuffer::action(Tick tick) const {
  StepVector sum = StepVector::Zero();
  Mat3 rot[kNumHands] = {Mat3::Zero(), Mat3::Zero()};
  double total = 0.0;
  for (const Entry& e : chunks_) {
    const Tick age = tick - e.tick;
    if (age < 0 || age >= kHorizon) continue;
    const double w = std::pow(m_, static_cast<double>(age));
    const int row = static_cast<int>(age);
    sum += w * e.chunk.values.row(row).transpose();
    for (int h = 0; h < kNumHands; ++h) rot[h] += w * matrix_from_rot6d(e.chunk.rot6d(row, h));
    total += w;
  }
  if (total == 0.0) throw NoCoverage("no live chunk covers tick " + std::to_string(tick));

  StepVector out = sum / total;
  for (int h = 0; h < kNumHands; ++h) {
    const Mat3 r = orthonormalize(rot[h] / total);
    out.segment<6>(h * kHandActionDim + kRotOffset) = rot6d_from_matrix(r);
  }
  return out;
}

std::vector<std::optional<StepVector>> replay_chunks(std::span<const TimedChunk> chunks, Tick first,
                                                     Tick count, double m) {
  ChunkBuffer buf(m);
  std::vector<std::optional<StepVector>> out;
  out.reserve(static_cast<std::size_t>(std::max<Tick>(count, 0)));
  std::size_t next = 0;
  for (Tick t = first; t < first + count; ++t) {
    while (next < chunks.size() && chunks[next].tick <= t) {
      buf.push(chunks[next].tick, chunks[next].chunk);
      ++next;
    }
    if (buf.covers(t)) {
      out.emplace_back(buf.action(t));
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace egobridge
