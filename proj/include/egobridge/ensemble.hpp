#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "egobridge/action_chunk.hpp"

namespace egobridge {

using Tick = std::int64_t;

inline constexpr double kDefaultSmoothing = 0.8;

// Temporal ensembling of overlapping chunks. A chunk issued at tick t
// supplies row (tick - t) for ticks t .. t + 29; its weight at a tick is
// m^(tick - t), so the newest chunk weighs most.
class ChunkBuffer {
 public:
  explicit ChunkBuffer(double m = kDefaultSmoothing, int capacity = kHorizon);

  // Throws NonMonotonicTick unless tick exceeds every earlier push. Chunks
  // that can no longer cover tick or later are evicted, then the oldest
  // beyond capacity.
  void push(Tick tick, const ActionChunk& chunk);

  // Weighted mean of translations and PCA; rotations by weighted chordal
  // mean projected back onto SO(3). Throws NoCoverage when no live chunk
  // covers tick.
  StepVector action(Tick tick) const;
  bool covers(Tick tick) const;

  std::size_t live() const { return chunks_.size(); }
  std::vector<Tick> issue_ticks() const;
  double smoothing() const { return m_; }

 private:
  struct Entry {
    Tick tick;
    ActionChunk chunk;
  };
  double m_;
  std::size_t capacity_;
  std::deque<Entry> chunks_;
};

struct TimedChunk {
  Tick tick = 0;
  ActionChunk chunk;
};

// Pushes each chunk at its tick and queries every tick in [first, first +
// count). Ticks with no coverage give nullopt.
std::vector<std::optional<StepVector>> replay_chunks(std::span<const TimedChunk> chunks, Tick first,
                                                     Tick count, double m = kDefaultSmoothing);

}  // namespace egobridge
