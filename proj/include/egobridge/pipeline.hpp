#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egobridge/action_chunk.hpp"
#include "egobridge/json_io.hpp"

namespace egobridge {

inline constexpr double kDefaultNativeHz = 30.0;
inline constexpr double kDefaultSampleFps = 3.0;
inline constexpr int kHistoryFrames = 5;  // past frames besides the current one
inline constexpr double kHistorySpacing = 0.2;  // seconds

struct EpisodeFrame {
  double t = 0.0;     // seconds
  Pose camera;        // camera-to-world
  HandState hands[kNumHands];  // wrists in world frame
  std::string image;  // opaque reference
  std::string instruction;
};

struct Episode {
  std::string source;
  double rate_hz = kDefaultNativeHz;
  std::vector<EpisodeFrame> frames;
};

struct EpisodeIssue {
  std::size_t frame;
  std::string message;
};

// Empty when the episode is usable.
std::vector<EpisodeIssue> validate_episode(const Episode& e);

// JSONL: a header {"schema":"eep-1","source","rate_hz"} then one frame per
// line. Throws SchemaError naming the offending field, or NonMonotonicTime
// with the index of the first frame whose time does not increase.
Episode episode_from_records(const std::vector<io::Json>& records, const std::string& origin = "");
Episode read_episode(const std::filesystem::path& path);
std::vector<io::Json> episode_to_records(const Episode& e);
void write_episode(const std::filesystem::path& path, const Episode& e);

// Index of the frame nearest to time t (ties go to the earlier frame).
std::size_t nearest_frame(const Episode& e, double t);

// Frames nearest to start + k / fps for k = 0, 1, ... up to the last frame,
// duplicates removed.
std::vector<std::size_t> grid_frames(const Episode& e, double fps);

// Grid frames whose 30-step future window at 30 Hz and 1 s history at
// 0.2 s spacing both fall inside the episode. Throws DataError unless
// 0 < fps <= rate_hz.
std::vector<std::size_t> resample_anchors(const Episode& e, double fps = kDefaultSampleFps);

class InstructionVocab {
 public:
  InstructionVocab() = default;
  explicit InstructionVocab(std::vector<std::string> names);

  // Existing id, or a new one appended at the end.
  int intern(const std::string& instruction);
  // Throws UnknownInstruction.
  int id(const std::string& instruction) const;
  const std::string& name(int id) const;
  bool contains(const std::string& instruction) const { return ids_.count(instruction) != 0; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> ids_;
};

struct TrainingSample {
  std::string episode;
  std::size_t anchor = 0;
  double t = 0.0;
  ProprioState proprio = ProprioState::Zero();  // anchor camera frame
  ActionChunk target;  // row k holds step k + 1, anchor camera frame
  int instruction_id = 0;
  std::vector<std::string> image_refs;  // current then 5 earlier, 0.2 s apart
};

std::vector<TrainingSample> make_samples(const Episode& e, std::span<const std::size_t> anchors,
                                         InstructionVocab& vocab);

struct SampleSet {
  InstructionVocab vocab;
  double fps = kDefaultSampleFps;
  std::vector<TrainingSample> samples;
};

// "ets-1" JSONL: header {"schema","vocab","fps","horizon"} then samples.
void write_samples(const std::filesystem::path& path, const SampleSet& set);
SampleSet read_samples(const std::filesystem::path& path);

// Every *.jsonl under dir in name order, one shared vocabulary.
SampleSet preprocess_directory(const std::filesystem::path& dir, double fps = kDefaultSampleFps);

// Smooth deterministic episode: camera orbiting, wrists and PCA waving.
Episode synthetic_episode(std::size_t frames, double rate_hz, std::uint64_t seed,
                          const std::string& instruction, bool moving_camera = true);

// 36-value robot action. Layout "ego36-v1": left wrist trans + rot6D,
// right wrist trans + rot6D, left 6 actives, right 6 actives, 6 reserved
// zeros.
inline constexpr int kRobotActionDim = 36;
inline constexpr const char* kRobotActionLayout = "ego36-v1";
using RobotAction = Eigen::Matrix<double, kRobotActionDim, 1>;

struct RobotFrame {
  Pose ee[kNumHands];
  RobotHandCommand hand[kNumHands] = {RobotHandCommand::Zero(), RobotHandCommand::Zero()};
};

RobotAction pack_robot_action(const RobotFrame& f);
// Throws ShapeMismatch for a length other than 36 and SchemaError for an
// unknown layout tag.
RobotFrame unpack_robot_action(std::span<const double> values,
                               const std::string& layout = kRobotActionLayout);

}  // namespace egobridge
