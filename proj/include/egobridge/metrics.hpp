#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egobridge/geometry.hpp"
#include "egobridge/json_io.hpp"

namespace egobridge {

struct EntityState {
  Pose pose;
  std::optional<double> joint_fraction;  // articulated objects, 0 = closed
  std::optional<double> up_z;            // defaults to the z row of pose.r * e_z
  std::optional<double> height;          // defaults to pose.t.z

  double up() const { return up_z ? *up_z : pose.r(2, 2); }
  double z() const { return height ? *height : pose.t.z(); }
};

struct StepState {
  long tick = 0;
  Pose ee_left;
  Pose ee_right;
  std::map<std::string, EntityState> entities;
};

enum class Compare { kLess, kLessEqual, kGreater, kGreaterEqual };
bool compare(double value, Compare op, double threshold);

// Parsed condition tree. Templates over entity lists are expanded at load
// time, so every node here is concrete.
struct Condition {
  enum class Kind {
    kDistance,
    kHeight,
    kHeightDelta,
    kUpAxis,
    kJointFraction,
    kInRegion,
    kCount,
    kOrdered,
    kAnd,
    kOr,
    kNot,
  };
  enum class Metric { kXyz, kXy, kZ };

  Kind kind = Kind::kAnd;
  Compare op = Compare::kLess;
  double threshold = 0.0;
  std::string a;  // entity, or "ee" / "ee_left" / "ee_right" for distance
  std::string b;
  Metric metric = Metric::kXyz;
  std::string relative_to;    // height: subtract this entity's height
  bool delta = false;         // joint_fraction: relative to the first step
  std::string frame;          // in_region: bounds offset by this entity's position
  std::optional<double> lo[3];
  std::optional<double> hi[3];
  int n = 0;                  // count: required number of satisfied items
  std::vector<Condition> items;
  int id = 0;                 // unique within a rule, used for ordering state
};

struct Subtask {
  std::string name;
  Condition condition;
  bool latching = true;
};

struct TaskRule {
  std::string task;
  std::string instruction;
  Condition success;
  std::vector<Subtask> subtasks;
};

struct TaskCatalog {
  std::vector<TaskRule> tasks;
  const TaskRule& find(const std::string& task) const;  // MissingEntity if absent
};

// "etr-1" rule files. SchemaError for missing fields or duplicate names,
// UnknownConditionKind for an unrecognised "kind".
TaskCatalog task_catalog_from_json(const io::Json& j);
TaskCatalog load_task_rules(const std::filesystem::path& path);
Condition condition_from_json(const io::Json& j, const std::string& path);

// Value of a condition at one step: 0/1 for predicates, the satisfied
// count for count nodes. `initial` supplies the reference for height and
// joint-fraction deltas; ordered nodes need episode history and are only
// evaluated through EpisodeEvaluator. Throws MissingEntity.
double eval_condition(const Condition& c, const StepState& s, const StepState& initial);
double eval_condition(const Condition& c, const StepState& s);

struct EpisodeResult {
  std::string task;
  std::string episode;
  bool success = false;
  std::optional<long> success_tick;
  std::vector<double> subtask_values;  // completion in [0, 1]
  std::vector<std::string> subtask_names;
  double progress = 0.0;
};

// Streams steps through a rule, keeping latches and ordering state.
class EpisodeEvaluator {
 public:
  explicit EpisodeEvaluator(const TaskRule& rule);
  void step(const StepState& s);
  EpisodeResult result() const;  // EmptyLog before the first step

 private:
  double eval(const Condition& c, const StepState& s);
  double latched_value(const Condition& c, const StepState& s, std::vector<char>& latch);

  const TaskRule& rule_;
  std::optional<StepState> initial_;
  std::vector<char> seen_;  // ordered nodes: first item true at an earlier tick
  std::vector<char> seen_next_;
  std::vector<std::vector<char>> latches_;
  std::vector<double> values_;
  bool success_ = false;
  std::optional<long> success_tick_;
};

EpisodeResult eval_episode(const TaskRule& rule, std::span<const StepState> log);

struct StepLog {
  std::string task;
  std::string episode;
  std::vector<StepState> steps;
};

// "esl-1" JSONL: header {"schema","task","episode"} then one step per line.
StepLog step_log_from_records(const std::vector<io::Json>& records, const std::string& origin = "");
StepLog read_step_log(const std::filesystem::path& path);
std::vector<io::Json> step_log_to_records(const StepLog& log);
void write_step_log(const std::filesystem::path& path, const StepLog& log);

struct TaskReport {
  std::string task;
  int episodes = 0;
  int successes = 0;
  double sr = 0.0;   // percent, 2 decimals
  double psr = 0.0;  // percent, 2 decimals
};

struct Report {
  std::vector<TaskReport> tasks;  // in first-seen order
  double mean_sr = 0.0;
  double mean_psr = 0.0;
};

double round_percent(double fraction);
// Throws EmptyInput when there are no results.
Report aggregate(std::span<const EpisodeResult> results);
io::Json to_json(const Report& r);
std::string format_table(const Report& r);

}  // namespace egobridge
