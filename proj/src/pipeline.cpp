#include "egobridge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "egobridge/errors.hpp"

namespace egobridge {

namespace {

const char* kHandKeys[kNumHands] = {"left", "right"};

std::string frame_path(std::size_t i) { return "frames[" + std::to_string(i) + "]"; }

HandState hand_from_json(const io::Json& j, const std::string& path) {
  HandState s;
  s.wrist = io::pose_from_json(io::require(j, "wrist", path), path + ".wrist");
  const auto pca = io::require_numbers(j, "pca", path, kPcaDim);
  s.pca = Eigen::Map<const PcaCoeffs>(pca.data());
  return s;
}

io::Json hand_to_json(const HandState& s) {
  return {{"wrist", io::pose_to_json(s.wrist)},
          {"pca", std::vector<double>(s.pca.data(), s.pca.data() + kPcaDim)}};
}

}  // namespace

std::vector<EpisodeIssue> validate_episode(const Episode& e) {
  std::vector<EpisodeIssue> issues;
  if (!(e.rate_hz > 0.0) || !std::isfinite(e.rate_hz)) issues.push_back({0, "rate_hz must be positive"});
  for (std::size_t i = 0; i < e.frames.size(); ++i) {
    const EpisodeFrame& f = e.frames[i];
    if (!std::isfinite(f.t)) issues.push_back({i, "timestamp is not finite"});
    if (i > 0 && !(f.t > e.frames[i - 1].t)) issues.push_back({i, "timestamp does not increase"});
    if (!f.camera.t.allFinite() || !is_rotation(f.camera.r)) issues.push_back({i, "invalid camera pose"});
    for (int h = 0; h < kNumHands; ++h) {
      const std::string hand = kHandKeys[h];
      if (!f.hands[h].wrist.t.allFinite() || !is_rotation(f.hands[h].wrist.r)) {
        issues.push_back({i, hand + " wrist pose is invalid"});
      }
      if (!f.hands[h].pca.allFinite()) {
        issues.push_back({i, hand + " pca is not finite"});
      } else if (f.hands[h].pca.cwiseAbs().maxCoeff() > kPcaSanityBound) {
        issues.push_back({i, hand + " pca exceeds the sanity bound"});
      }
    }
  }
  return issues;
}

Episode episode_from_records(const std::vector<io::Json>& records, const std::string& origin) {
  if (records.empty()) throw SchemaError(origin + ": missing eep-1 header");
  const io::Json& header = records.front();
  io::check_schema(header, "eep-1", "header");
  Episode e;
  e.source = io::require_string(header, "source", "header");
  e.rate_hz = header.contains("rate_hz") ? io::require_number(header, "rate_hz", "header")
                                         : kDefaultNativeHz;
  if (!(e.rate_hz > 0.0)) throw SchemaError("header.rate_hz: must be positive");

  e.frames.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const std::size_t i = r - 1;
    const std::string path = frame_path(i);
    const io::Json& j = records[r];
    EpisodeFrame f;
    f.t = io::require_number(j, "t", path);
    f.camera = io::pose_from_json(io::require(j, "camera", path), path + ".camera");
    for (int h = 0; h < kNumHands; ++h) {
      f.hands[h] = hand_from_json(io::require(j, kHandKeys[h], path), path + "." + kHandKeys[h]);
    }
    f.image = j.contains("image") ? io::require_string(j, "image", path) : "";
    f.instruction = io::require_string(j, "instruction", path);
    if (!e.frames.empty() && !(f.t > e.frames.back().t)) {
      throw NonMonotonicTime(i, path + ".t: timestamp " + std::to_string(f.t) +
                                    " does not exceed the previous frame");
    }
    e.frames.push_back(std::move(f));
  }
  return e;
}

Episode read_episode(const std::filesystem::path& path) {
  return episode_from_records(io::read_jsonl(path), path.string());
}

std::vector<io::Json> episode_to_records(const Episode& e) {
  std::vector<io::Json> out;
  out.reserve(e.frames.size() + 1);
  out.push_back({{"schema", "eep-1"}, {"source", e.source}, {"rate_hz", e.rate_hz}});
  for (const EpisodeFrame& f : e.frames) {
    out.push_back({{"t", f.t},
                   {"camera", io::pose_to_json(f.camera)},
                   {"left", hand_to_json(f.hands[0])},
                   {"right", hand_to_json(f.hands[1])},
                   {"image", f.image},
                   {"instruction", f.instruction}});
  }
  return out;
}

void write_episode(const std::filesystem::path& path, const Episode& e) {
  io::write_jsonl(path, episode_to_records(e));
}

std::size_t nearest_frame(const Episode& e, double t) {
  if (e.frames.empty()) throw EmptyInput("episode has no frames");
  auto it = std::lower_bound(e.frames.begin(), e.frames.end(), t,
                             [](const EpisodeFrame& f, double v) { return f.t < v; });
  if (it == e.frames.begin()) return 0;
  if (it == e.frames.end()) return e.frames.size() - 1;
  const auto after = static_cast<std::size_t>(it - e.frames.begin());
  return (t - e.frames[after - 1].t) <= (e.frames[after].t - t) ? after - 1 : after;
}

std::vector<std::size_t> grid_frames(const Episode& e, double fps) {
  std::vector<std::size_t> out;
  if (e.frames.empty()) return out;
  const double start = e.frames.front().t;
  const double end = e.frames.back().t;
  for (long k = 0;; ++k) {
    const double t = start + static_cast<double>(k) / fps;
    if (t > end + 0.5 / e.rate_hz) break;
    const std::size_t i = nearest_frame(e, t);
    if (out.empty() || out.back() != i) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> resample_anchors(const Episode& e, double fps) {
  if (!(fps > 0.0) || fps > e.rate_hz + 1e-9) {
    throw DataError("fps must be in (0, rate_hz]; got " + std::to_string(fps));
  }
  std::vector<std::size_t> out;
  if (e.frames.empty()) return out;
  // Half a native period of slack absorbs timestamp jitter.
  const double slack = 0.5 / e.rate_hz;
  const double first = e.frames.front().t;
  const double last = e.frames.back().t;
  for (std::size_t i : grid_frames(e, fps)) {
    const double t = e.frames[i].t;
    const bool future = t + kHorizon / kControlHz <= last + slack;
    const bool history = t - kHistoryFrames * kHistorySpacing >= first - slack;
    if (future && history) out.push_back(i);
  }
  return out;
}

InstructionVocab::InstructionVocab(std::vector<std::string> names) {
  for (const std::string& n : names) {
    if (contains(n)) throw SchemaError("vocab: duplicate instruction \"" + n + "\"");
    intern(n);
  }
}

int InstructionVocab::intern(const std::string& instruction) {
  auto [it, inserted] = ids_.emplace(instruction, size());
  if (inserted) names_.push_back(instruction);
  return it->second;
}

int InstructionVocab::id(const std::string& instruction) const {
  auto it = ids_.find(instruction);
  if (it == ids_.end()) throw UnknownInstruction("unknown instruction \"" + instruction + "\"");
  return it->second;
}

const std::string& InstructionVocab::name(int id) const {
  if (id < 0 || id >= size()) throw UnknownInstruction("instruction id " + std::to_string(id) + " out of range");
  return names_[static_cast<std::size_t>(id)];
}

std::vector<TrainingSample> make_samples(const Episode& e, std::span<const std::size_t> anchors,
                                         InstructionVocab& vocab) {
  std::vector<TrainingSample> out;
  out.reserve(anchors.size());
  for (std::size_t a : anchors) {
    if (a >= e.frames.size()) throw DataError("anchor " + std::to_string(a) + " outside the episode");
    const EpisodeFrame& f = e.frames[a];
    TrainingSample s;
    s.episode = e.source;
    s.anchor = a;
    s.t = f.t;
    HandState now[kNumHands];
    for (int h = 0; h < kNumHands; ++h) {
      now[h] = {project_to_camera(f.camera, f.hands[h].wrist), f.hands[h].pca};
    }
    s.proprio = encode_step(now[0], now[1]);
    for (int k = 1; k <= kHorizon; ++k) {
      const EpisodeFrame& fut = e.frames[nearest_frame(e, f.t + k / kControlHz)];
      for (int h = 0; h < kNumHands; ++h) {
        // Always the anchor's camera, never the future frame's.
        s.target.set_hand(k - 1, h, {project_to_camera(f.camera, fut.hands[h].wrist), fut.hands[h].pca});
      }
    }
    s.instruction_id = vocab.intern(f.instruction);
    for (int j = 0; j <= kHistoryFrames; ++j) {
      s.image_refs.push_back(e.frames[nearest_frame(e, f.t - j * kHistorySpacing)].image);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_samples(const std::filesystem::path& path, const SampleSet& set) {
  std::vector<io::Json> lines;
  lines.reserve(set.samples.size() + 1);
  lines.push_back({{"schema", "ets-1"},
                   {"vocab", set.vocab.names()},
                   {"fps", set.fps},
                   {"horizon", kHorizon},
                   {"count", set.samples.size()}});
  for (const TrainingSample& s : set.samples) {
    lines.push_back({{"episode", s.episode},
                     {"anchor", s.anchor},
                     {"t", s.t},
                     {"instruction_id", s.instruction_id},
                     {"image_refs", s.image_refs},
                     {"proprio", std::vector<double>(s.proprio.data(), s.proprio.data() + kStepDim)},
                     {"target", std::vector<double>(s.target.values.data(),
                                                    s.target.values.data() + kChunkSize)}});
  }
  io::write_jsonl(path, lines);
}

SampleSet read_samples(const std::filesystem::path& path) {
  const std::vector<io::Json> lines = io::read_jsonl(path);
  if (lines.empty()) throw SchemaError(path.string() + ": missing ets-1 header");
  io::check_schema(lines[0], "ets-1", "header");
  SampleSet set;
  const io::Json& names = io::require(lines[0], "vocab", "header");
  if (!names.is_array()) throw SchemaError("header.vocab: expected an array of strings");
  std::vector<std::string> vocab;
  for (const auto& n : names) {
    if (!n.is_string()) throw SchemaError("header.vocab: expected an array of strings");
    vocab.push_back(n.get<std::string>());
  }
  set.vocab = InstructionVocab(vocab);
  set.fps = io::require_number(lines[0], "fps", "header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string path_i = "samples[" + std::to_string(i - 1) + "]";
    const io::Json& j = lines[i];
    TrainingSample s;
    s.episode = io::require_string(j, "episode", path_i);
    s.anchor = static_cast<std::size_t>(io::require_number(j, "anchor", path_i));
    s.t = io::require_number(j, "t", path_i);
    s.instruction_id = static_cast<int>(io::require_number(j, "instruction_id", path_i));
    set.vocab.name(s.instruction_id);
    if (j.contains("image_refs")) {
      for (const auto& r : j.at("image_refs")) s.image_refs.push_back(r.get<std::string>());
    }
    const auto proprio = io::require_numbers(j, "proprio", path_i, kStepDim);
    s.proprio = Eigen::Map<const ProprioState>(proprio.data());
    const auto target = io::require_numbers(j, "target", path_i, kChunkSize);
    s.target.values = Eigen::Map<const ActionChunk::Storage>(target.data());
    set.samples.push_back(std::move(s));
  }
  return set;
}

SampleSet preprocess_directory(const std::filesystem::path& dir, double fps) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyDataset(dir.string() + ": no .jsonl episodes");

  SampleSet set;
  set.fps = fps;
  for (const auto& file : files) {
    const Episode e = read_episode(file);
    const auto issues = validate_episode(e);
    if (!issues.empty()) {
      throw DataError(file.string() + ": frame " + std::to_string(issues[0].frame) + ": " +
                      issues[0].message);
    }
    const auto anchors = resample_anchors(e, fps);
    auto samples = make_samples(e, anchors, set.vocab);
    for (auto& s : samples) set.samples.push_back(std::move(s));
  }
  return set;
}

Episode synthetic_episode(std::size_t frames, double rate_hz, std::uint64_t seed,
                          const std::string& instruction, bool moving_camera) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double phase[8];
  for (double& p : phase) p = 3.0 * u(rng);
  PcaCoeffs pca_amp, pca_phase;
  for (int i = 0; i < kPcaDim; ++i) {
    pca_amp[i] = 0.5 * u(rng);
    pca_phase[i] = 3.0 * u(rng);
  }

  Episode e;
  e.source = "synthetic-" + std::to_string(seed);
  e.rate_hz = rate_hz;
  for (std::size_t i = 0; i < frames; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    EpisodeFrame f;
    f.t = t;
    if (moving_camera) {
      f.camera.t = Vec3(0.3 * std::cos(0.4 * t + phase[0]), 0.3 * std::sin(0.4 * t + phase[0]), 1.5);
      f.camera.r = exp_so3(Vec3(0.1 * std::sin(0.7 * t + phase[1]), 0.2 * std::cos(0.5 * t), 0.4 * t));
    }
    for (int h = 0; h < kNumHands; ++h) {
      const double side = h == 0 ? -1.0 : 1.0;
      f.hands[h].wrist.t = Vec3(side * 0.2 + 0.05 * std::sin(1.3 * t + phase[2 + h]),
                                0.4 + 0.05 * std::cos(0.9 * t + phase[4 + h]),
                                0.9 + 0.03 * std::sin(2.1 * t + phase[6]));
      f.hands[h].wrist.r =
          exp_so3(Vec3(0.3 * std::sin(0.8 * t + phase[7]), side * 0.2, 0.25 * std::cos(1.1 * t)));
      for (int k = 0; k < kPcaDim; ++k) {
        f.hands[h].pca[k] = pca_amp[k] * std::sin(1.5 * t + pca_phase[k] + h);
      }
    }
    f.image = e.source + "/frame_" + std::to_string(i) + ".jpg";
    f.instruction = instruction;
    e.frames.push_back(std::move(f));
  }
  return e;
}

RobotAction pack_robot_action(const RobotFrame& f) {
  RobotAction a = RobotAction::Zero();
  for (int h = 0; h < kNumHands; ++h) {
    a.segment<3>(9 * h) = f.ee[h].t;
    a.segment<6>(9 * h + 3) = rot6d_from_matrix(f.ee[h].r);
    a.segment<kRobotActive>(18 + kRobotActive * h) = f.hand[h];
  }
  return a;
}

RobotFrame unpack_robot_action(std::span<const double> values, const std::string& layout) {
  if (layout != kRobotActionLayout) throw SchemaError("unknown robot action layout \"" + layout + "\"");
  if (values.size() != kRobotActionDim) {
    throw ShapeMismatch("robot action needs 36 values, got " + std::to_string(values.size()));
  }
  const Eigen::Map<const RobotAction> a(values.data());
  RobotFrame f;
  for (int h = 0; h < kNumHands; ++h) {
    f.ee[h].t = a.segment<3>(9 * h);
    f.ee[h].r = matrix_from_rot6d(a.segment<6>(9 * h + 3));
    f.hand[h] = a.segment<kRobotActive>(18 + kRobotActive * h);
  }
  return f;
}

}  // namespace egobridge
