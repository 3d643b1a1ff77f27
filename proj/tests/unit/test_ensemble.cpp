#include <cmath>
#include <random>

#include "doctest.h"
#include "egobridge/ensemble.hpp"
#include "egobridge/errors.hpp"
#include "random.hpp"

using namespace egobridge;

namespace {

ActionChunk random_chunk(std::mt19937_64& rng) {
  ActionChunk c;
  for (int k = 0; k < kHorizon; ++k) {
    for (int h = 0; h < kNumHands; ++h) {
      HandState s;
      s.wrist = egobridge::testing::random_pose(rng);
      egobridge::testing::fill_uniform(s.pca, rng, -2.0, 2.0);
      c.set_hand(k, h, s);
    }
  }
  return c;
}

// Every non-rotation component set to `value`; rotations identity.
ActionChunk constant_chunk(double value) {
  ActionChunk c;
  for (int k = 0; k < kHorizon; ++k) {
    for (int h = 0; h < kNumHands; ++h) {
      HandState s;
      s.wrist.t.setConstant(value);
      s.pca.setConstant(value);
      c.set_hand(k, h, s);
    }
  }
  return c;
}

bool is_rotation_component(int i) {
  const int in_hand = i % kHandActionDim;
  return in_hand >= kRotOffset && in_hand < kRotOffset + 6;
}

}  // namespace

TEST_CASE("push evicts chunks older than the horizon") {
  ChunkBuffer buf;
  const ActionChunk c;
  for (Tick t = 0; t < 31; ++t) buf.push(t, c);
  CHECK(buf.live() == 30);
  const auto ticks = buf.issue_ticks();
  CHECK(ticks.front() == 1);
  for (std::size_t i = 1; i < ticks.size(); ++i) CHECK(ticks[i] == ticks[i - 1] + 1);

  CHECK_THROWS_AS(buf.push(30, c), NonMonotonicTick);
  CHECK_THROWS_AS(buf.push(5, c), NonMonotonicTick);

  ChunkBuffer sparse;
  sparse.push(0, c);
  sparse.push(10, c);
  sparse.push(35, c);
  CHECK(sparse.issue_ticks() == std::vector<Tick>{10, 35});
}

TEST_CASE("single chunk returns its own row") {
  std::mt19937_64 rng(1);
  const ActionChunk c = random_chunk(rng);
  ChunkBuffer buf;
  buf.push(100, c);
  for (int k = 0; k < kHorizon; ++k) {
    const StepVector a = buf.action(100 + k);
    CHECK((a - c.values.row(k).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(buf.action(99), NoCoverage);
  CHECK_THROWS_AS(buf.action(130), NoCoverage);
  CHECK_FALSE(buf.covers(130));
}

TEST_CASE("two chunks weight the newest by 1 and the older by 0.8") {
  ChunkBuffer buf(0.8);
  buf.push(0, constant_chunk(0.0));
  buf.push(1, constant_chunk(1.0));
  const StepVector a = buf.action(1);
  for (int i = 0; i < kStepDim; ++i) {
    if (is_rotation_component(i)) continue;
    CHECK(std::abs(a[i] - 1.0 / 1.8) < 1e-9);
    CHECK(std::abs(a[i] - 0.5556) < 1e-4);
  }
}

TEST_CASE("identical chunks reproduce the chunk") {
  std::mt19937_64 rng(2);
  const ActionChunk base = random_chunk(rng);
  ChunkBuffer buf;
  for (Tick t = 0; t < 10; ++t) {
    ActionChunk shifted;
    // Chunk issued at t predicts row k for tick t + k; align rows so every
    // chunk predicts base row (tick - 0) at each tick.
    for (int k = 0; k < kHorizon; ++k) {
      shifted.values.row(k) = base.values.row(std::min<int>(kHorizon - 1, static_cast<int>(t) + k));
    }
    buf.push(t, shifted);
  }
  for (Tick t = 9; t < 20; ++t) {
    const StepVector a = buf.action(t);
    CHECK((a - base.values.row(static_cast<int>(std::min<Tick>(t, kHorizon - 1))).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("ensembled actions lie in the convex hull and decode to rotations") {
  std::mt19937_64 rng(3);
  ChunkBuffer buf;
  std::vector<ActionChunk> history;
  for (Tick t = 0; t < 40; ++t) {
    history.push_back(random_chunk(rng));
    buf.push(t, history.back());
    const StepVector a = buf.action(t);
    for (int i = 0; i < kStepDim; ++i) {
      if (is_rotation_component(i)) continue;
      double lo = 1e9, hi = -1e9;
      for (Tick s = std::max<Tick>(0, t - kHorizon + 1); s <= t; ++s) {
        const double v = history[static_cast<std::size_t>(s)].values(static_cast<int>(t - s), i);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      CHECK(a[i] >= lo - 1e-12);
      CHECK(a[i] <= hi + 1e-12);
    }
    for (int h = 0; h < kNumHands; ++h) {
      const Rot6D r6 = a.segment<6>(h * kHandActionDim + kRotOffset);
      const Mat3 r = matrix_from_rot6d(r6);
      CHECK(is_rotation(r, 1e-9));
      CHECK((rot6d_from_matrix(r) - r6).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("vanishing smoothing keeps only the newest chunk") {
  std::mt19937_64 rng(4);
  ChunkBuffer buf(1e-9);
  ActionChunk newest;
  for (Tick t = 0; t < 5; ++t) {
    newest = random_chunk(rng);
    buf.push(t, newest);
  }
  CHECK((buf.action(4) - newest.values.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(ChunkBuffer(0.0), DataError);
}

TEST_CASE("replay reports uncovered ticks") {
  std::mt19937_64 rng(5);
  std::vector<TimedChunk> chunks = {{2, random_chunk(rng)}, {3, random_chunk(rng)}};
  const auto out = replay_chunks(chunks, 0, 40);
  REQUIRE(out.size() == 40);
  CHECK_FALSE(out[0].has_value());
  CHECK_FALSE(out[1].has_value());
  CHECK(out[2].has_value());
  CHECK(out[32].has_value());
  CHECK_FALSE(out[33].has_value());
  CHECK((*out[2] - chunks[0].chunk.values.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-12);
}
