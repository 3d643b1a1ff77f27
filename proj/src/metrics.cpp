#include "egobridge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "egobridge/errors.hpp"

namespace egobridge {

bool compare(double value, Compare op, double threshold) {
  switch (op) {
    case Compare::kLess: return value < threshold;
    case Compare::kLessEqual: return value <= threshold;
    case Compare::kGreater: return value > threshold;
    case Compare::kGreaterEqual: return value >= threshold;
  }
  return false;
}

namespace {

using Kind = Condition::Kind;

Compare parse_op(const io::Json& j, const std::string& path) {
  const std::string op = io::require_string(j, "op", path);
  if (op == "<") return Compare::kLess;
  if (op == "<=") return Compare::kLessEqual;
  if (op == ">") return Compare::kGreater;
  if (op == ">=") return Compare::kGreaterEqual;
  throw SchemaError(path + ".op: unknown comparison \"" + op + "\"");
}

void parse_threshold(const io::Json& j, const std::string& path, Condition& c) {
  c.op = parse_op(j, path);
  c.threshold = io::require_number(j, "threshold", path);
  if (!std::isfinite(c.threshold)) throw SchemaError(path + ".threshold: must be finite");
}

// Replaces every "$e" inside string values.
io::Json substitute(const io::Json& j, const std::string& entity) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    for (std::size_t pos = s.find("$e"); pos != std::string::npos; pos = s.find("$e", pos + entity.size())) {
      s.replace(pos, 2, entity);
    }
    return s;
  }
  if (j.is_object()) {
    io::Json out = io::Json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = substitute(it.value(), entity);
    return out;
  }
  if (j.is_array()) {
    io::Json out = io::Json::array();
    for (const auto& v : j) out.push_back(substitute(v, entity));
    return out;
  }
  return j;
}

std::vector<Condition> parse_items(const io::Json& j, const std::string& path) {
  const io::Json& items = io::require(j, "items", path);
  if (!items.is_array() || items.empty()) throw SchemaError(path + ".items: expected a non-empty array");
  std::vector<Condition> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back(condition_from_json(items[i], path + ".items[" + std::to_string(i) + "]"));
  }
  return out;
}

void number_nodes(Condition& c, int& next) {
  c.id = next++;
  for (Condition& child : c.items) number_nodes(child, next);
}

int count_nodes(const Condition& c) {
  int n = 1;
  for (const Condition& child : c.items) n += count_nodes(child);
  return n;
}

}  // namespace

Condition condition_from_json(const io::Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path + ": expected an object");
  const std::string kind = io::require_string(j, "kind", path);
  Condition c;
  if (kind == "distance") {
    c.kind = Kind::kDistance;
    c.a = io::require_string(j, "a", path);
    c.b = io::require_string(j, "b", path);
    const std::string metric = j.contains("metric") ? io::require_string(j, "metric", path) : "xyz";
    if (metric == "xyz") c.metric = Condition::Metric::kXyz;
    else if (metric == "xy") c.metric = Condition::Metric::kXy;
    else if (metric == "z") c.metric = Condition::Metric::kZ;
    else throw SchemaError(path + ".metric: expected xyz, xy or z");
    parse_threshold(j, path, c);
  } else if (kind == "height" || kind == "height_delta" || kind == "up_axis") {
    c.kind = kind == "height" ? Kind::kHeight : kind == "height_delta" ? Kind::kHeightDelta : Kind::kUpAxis;
    c.a = io::require_string(j, "entity", path);
    if (c.kind == Kind::kHeight && j.contains("relative_to")) {
      c.relative_to = io::require_string(j, "relative_to", path);
    }
    parse_threshold(j, path, c);
  } else if (kind == "joint_fraction") {
    c.kind = Kind::kJointFraction;
    c.a = io::require_string(j, "entity", path);
    const std::string mode = j.contains("mode") ? io::require_string(j, "mode", path) : "absolute";
    if (mode != "absolute" && mode != "delta") throw SchemaError(path + ".mode: expected absolute or delta");
    c.delta = mode == "delta";
    parse_threshold(j, path, c);
  } else if (kind == "in_region") {
    c.kind = Kind::kInRegion;
    c.a = io::require_string(j, "entity", path);
    if (j.contains("frame")) c.frame = io::require_string(j, "frame", path);
    for (const char* key : {"min", "max"}) {
      const io::Json& bounds = io::require(j, key, path);
      if (!bounds.is_array() || bounds.size() != 3) {
        throw SchemaError(path + "." + key + ": expected 3 numbers or nulls");
      }
      for (int k = 0; k < 3; ++k) {
        if (bounds[k].is_null()) continue;
        if (!bounds[k].is_number()) throw SchemaError(path + "." + key + ": expected 3 numbers or nulls");
        (std::string(key) == "min" ? c.lo : c.hi)[k] = bounds[k].get<double>();
      }
    }
  } else if (kind == "count") {
    c.kind = Kind::kCount;
    if (j.contains("template")) {
      const io::Json& entities = io::require(j, "entities", path);
      if (!entities.is_array() || entities.empty()) {
        throw SchemaError(path + ".entities: expected a non-empty array of names");
      }
      for (std::size_t i = 0; i < entities.size(); ++i) {
        if (!entities[i].is_string()) throw SchemaError(path + ".entities: expected names");
        c.items.push_back(condition_from_json(substitute(j.at("template"), entities[i].get<std::string>()),
                                              path + ".template[" + entities[i].get<std::string>() + "]"));
      }
    } else {
      c.items = parse_items(j, path);
    }
    c.n = j.contains("n") ? static_cast<int>(io::require_number(j, "n", path))
                          : static_cast<int>(c.items.size());
    if (c.n < 1 || c.n > static_cast<int>(c.items.size())) {
      throw SchemaError(path + ".n: must be between 1 and the number of items");
    }
  } else if (kind == "ordered") {
    c.kind = Kind::kOrdered;
    c.items.push_back(condition_from_json(io::require(j, "first", path), path + ".first"));
    c.items.push_back(condition_from_json(io::require(j, "then", path), path + ".then"));
  } else if (kind == "and" || kind == "or") {
    c.kind = kind == "and" ? Kind::kAnd : Kind::kOr;
    c.items = parse_items(j, path);
  } else if (kind == "not") {
    c.kind = Kind::kNot;
    c.items.push_back(condition_from_json(io::require(j, "item", path), path + ".item"));
  } else {
    throw UnknownConditionKind(path + ".kind: unknown condition kind \"" + kind + "\"");
  }
  return c;
}

const TaskRule& TaskCatalog::find(const std::string& task) const {
  for (const TaskRule& r : tasks) {
    if (r.task == task) return r;
  }
  throw MissingEntity("no rule for task \"" + task + "\"");
}

TaskCatalog task_catalog_from_json(const io::Json& j) {
  io::check_schema(j, "etr-1", "");
  const io::Json& tasks = io::require(j, "tasks", "");
  if (!tasks.is_array()) throw SchemaError("tasks: expected an array");
  TaskCatalog cat;
  std::set<std::string> names;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string path = "tasks[" + std::to_string(i) + "]";
    const io::Json& t = tasks[i];
    TaskRule rule;
    rule.task = io::require_string(t, "task", path);
    if (!names.insert(rule.task).second) throw SchemaError(path + ".task: duplicate task \"" + rule.task + "\"");
    rule.instruction = t.contains("instruction") ? io::require_string(t, "instruction", path) : "";
    rule.success = condition_from_json(io::require(t, "success", path), path + ".success");
    std::set<std::string> sub_names;
    if (t.contains("subtasks")) {
      const io::Json& subs = t.at("subtasks");
      if (!subs.is_array()) throw SchemaError(path + ".subtasks: expected an array");
      for (std::size_t k = 0; k < subs.size(); ++k) {
        const std::string sp = path + ".subtasks[" + std::to_string(k) + "]";
        Subtask s;
        s.name = io::require_string(subs[k], "name", sp);
        if (!sub_names.insert(s.name).second) throw SchemaError(sp + ".name: duplicate subtask \"" + s.name + "\"");
        s.condition = condition_from_json(io::require(subs[k], "condition", sp), sp + ".condition");
        if (subs[k].contains("latching")) {
          if (!subs[k].at("latching").is_boolean()) throw SchemaError(sp + ".latching: expected a boolean");
          s.latching = subs[k].at("latching").get<bool>();
        }
        rule.subtasks.push_back(std::move(s));
      }
    }
    int next = 0;
    number_nodes(rule.success, next);
    for (Subtask& s : rule.subtasks) number_nodes(s.condition, next);
    cat.tasks.push_back(std::move(rule));
  }
  return cat;
}

TaskCatalog load_task_rules(const std::filesystem::path& path) {
  return task_catalog_from_json(io::read_json_file(path));
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

const EntityState& entity(const StepState& s, const std::string& name) {
  auto it = s.entities.find(name);
  if (it == s.entities.end()) {
    throw MissingEntity("tick " + std::to_string(s.tick) + ": missing entity \"" + name + "\"");
  }
  return it->second;
}

double metric_distance(const Vec3& a, const Vec3& b, Condition::Metric m) {
  switch (m) {
    case Condition::Metric::kXyz: return (a - b).norm();
    case Condition::Metric::kXy: return (a - b).head<2>().norm();
    case Condition::Metric::kZ: return std::abs(a.z() - b.z());
  }
  return 0.0;
}

std::vector<Vec3> points_of(const StepState& s, const std::string& name) {
  if (name == "ee") return {s.ee_left.t, s.ee_right.t};
  if (name == "ee_left") return {s.ee_left.t};
  if (name == "ee_right") return {s.ee_right.t};
  return {entity(s, name).pose.t};
}

double fraction_of(const StepState& s, const std::string& name) {
  const EntityState& e = entity(s, name);
  if (!e.joint_fraction) {
    throw MissingEntity("tick " + std::to_string(s.tick) + ": entity \"" + name + "\" has no joint_fraction");
  }
  return *e.joint_fraction;
}

bool truth(const Condition& c, double value) { return c.kind == Kind::kCount ? value >= c.n : value > 0.0; }

// Leaf predicates, shared by the stateless and stateful evaluators.
double eval_leaf(const Condition& c, const StepState& s, const StepState& initial) {
  switch (c.kind) {
    case Kind::kDistance: {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& p : points_of(s, c.a)) {
        for (const Vec3& q : points_of(s, c.b)) best = std::min(best, metric_distance(p, q, c.metric));
      }
      return compare(best, c.op, c.threshold);
    }
    case Kind::kHeight: {
      double h = entity(s, c.a).z();
      if (!c.relative_to.empty()) h -= entity(s, c.relative_to).z();
      return compare(h, c.op, c.threshold);
    }
    case Kind::kHeightDelta:
      return compare(entity(s, c.a).z() - entity(initial, c.a).z(), c.op, c.threshold);
    case Kind::kUpAxis:
      return compare(entity(s, c.a).up(), c.op, c.threshold);
    case Kind::kJointFraction: {
      double f = fraction_of(s, c.a);
      if (c.delta) f -= fraction_of(initial, c.a);
      return compare(f, c.op, c.threshold);
    }
    case Kind::kInRegion: {
      Vec3 p = entity(s, c.a).pose.t;
      if (!c.frame.empty()) p -= entity(s, c.frame).pose.t;
      for (int k = 0; k < 3; ++k) {
        if (c.lo[k] && !(p[k] > *c.lo[k])) return 0.0;
        if (c.hi[k] && !(p[k] < *c.hi[k])) return 0.0;
      }
      return 1.0;
    }
    default:
      break;
  }
  throw DataError("not a leaf condition");
}

template <typename Eval>
double eval_node(const Condition& c, const StepState& s, const StepState& initial, Eval&& child) {
  switch (c.kind) {
    case Kind::kCount: {
      double n = 0;
      for (const Condition& item : c.items) n += truth(item, child(item)) ? 1.0 : 0.0;
      return n;
    }
    case Kind::kAnd:
      for (const Condition& item : c.items) {
        if (!truth(item, child(item))) return 0.0;
      }
      return 1.0;
    case Kind::kOr:
      for (const Condition& item : c.items) {
        if (truth(item, child(item))) return 1.0;
      }
      return 0.0;
    case Kind::kNot:
      return truth(c.items[0], child(c.items[0])) ? 0.0 : 1.0;
    case Kind::kOrdered:
      throw DataError("ordered conditions need episode history; evaluate them with eval_episode");
    default:
      return eval_leaf(c, s, initial);
  }
}

}  // namespace

double eval_condition(const Condition& c, const StepState& s, const StepState& initial) {
  return eval_node(c, s, initial, [&](const Condition& item) { return eval_condition(item, s, initial); });
}

double eval_condition(const Condition& c, const StepState& s) { return eval_condition(c, s, s); }

EpisodeEvaluator::EpisodeEvaluator(const TaskRule& rule) : rule_(rule) {
  int nodes = count_nodes(rule.success);
  for (const Subtask& st : rule.subtasks) nodes += count_nodes(st.condition);
  seen_.assign(static_cast<std::size_t>(nodes), 0);
  seen_next_ = seen_;
  for (const Subtask& st : rule.subtasks) {
    latches_.emplace_back(std::max<std::size_t>(1, st.condition.items.size()), 0);
  }
  values_.assign(rule.subtasks.size(), 0.0);
}

double EpisodeEvaluator::eval(const Condition& c, const StepState& s) {
  if (c.kind == Kind::kOrdered) {
    const Condition& first = c.items[0];
    const Condition& then = c.items[1];
    const bool first_now = truth(first, eval(first, s));
    const bool then_now = truth(then, eval(then, s));
    const auto id = static_cast<std::size_t>(c.id);
    if (first_now) seen_next_[id] = 1;
    return seen_[id] && then_now ? 1.0 : 0.0;
  }
  return eval_node(c, s, *initial_, [&](const Condition& item) { return eval(item, s); });
}

double EpisodeEvaluator::latched_value(const Condition& c, const StepState& s, std::vector<char>& latch) {
  if (c.kind == Kind::kCount) {
    double done = 0.0;
    for (std::size_t i = 0; i < c.items.size(); ++i) {
      if (truth(c.items[i], eval(c.items[i], s))) latch[i] = 1;
      done += latch[i];
    }
    return std::min(done, static_cast<double>(c.n)) / static_cast<double>(c.n);
  }
  if (truth(c, eval(c, s))) latch[0] = 1;
  return latch[0];
}

void EpisodeEvaluator::step(const StepState& s) {
  if (!initial_) initial_ = s;
  if (truth(rule_.success, eval(rule_.success, s)) && !success_) {
    success_ = true;
    success_tick_ = s.tick;
  }
  for (std::size_t k = 0; k < rule_.subtasks.size(); ++k) {
    const Subtask& st = rule_.subtasks[k];
    if (st.latching) {
      values_[k] = latched_value(st.condition, s, latches_[k]);
    } else {
      const double v = eval(st.condition, s);
      values_[k] = st.condition.kind == Kind::kCount ? std::min(v, static_cast<double>(st.condition.n)) / st.condition.n
                                                     : (truth(st.condition, v) ? 1.0 : 0.0);
    }
  }
  for (std::size_t i = 0; i < seen_.size(); ++i) seen_[i] = seen_[i] || seen_next_[i];
}

EpisodeResult EpisodeEvaluator::result() const {
  if (!initial_) throw EmptyLog("task " + rule_.task + ": empty step log");
  EpisodeResult r;
  r.task = rule_.task;
  r.success = success_;
  r.success_tick = success_tick_;
  r.subtask_values = values_;
  for (const Subtask& st : rule_.subtasks) r.subtask_names.push_back(st.name);
  if (values_.empty()) {
    r.progress = success_ ? 1.0 : 0.0;
  } else {
    double sum = 0.0;
    for (double v : values_) sum += v;
    r.progress = sum / static_cast<double>(values_.size());
  }
  return r;
}

EpisodeResult eval_episode(const TaskRule& rule, std::span<const StepState> log) {
  if (log.empty()) throw EmptyLog("task " + rule.task + ": empty step log");
  EpisodeEvaluator ev(rule);
  for (const StepState& s : log) ev.step(s);
  return ev.result();
}

// ---------------------------------------------------------------------------
// Logs

StepLog step_log_from_records(const std::vector<io::Json>& records, const std::string& origin) {
  if (records.empty()) throw SchemaError(origin + ": missing esl-1 header");
  io::check_schema(records[0], "esl-1", "header");
  StepLog log;
  log.task = io::require_string(records[0], "task", "header");
  log.episode = records[0].contains("episode") ? io::require_string(records[0], "episode", "header") : origin;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const std::string path = "steps[" + std::to_string(i - 1) + "]";
    const io::Json& j = records[i];
    StepState s;
    s.tick = j.contains("tick") ? static_cast<long>(io::require_number(j, "tick", path))
                                : static_cast<long>(i - 1);
    s.ee_left = io::pose_from_json(io::require(j, "ee_left", path), path + ".ee_left");
    s.ee_right = io::pose_from_json(io::require(j, "ee_right", path), path + ".ee_right");
    const io::Json& ents = io::require(j, "entities", path);
    if (!ents.is_object()) throw SchemaError(path + ".entities: expected an object");
    for (auto it = ents.begin(); it != ents.end(); ++it) {
      const std::string ep = path + ".entities." + it.key();
      EntityState e;
      e.pose = io::pose_from_json(io::require(it.value(), "pose", ep), ep + ".pose");
      if (it.value().contains("joint_fraction")) e.joint_fraction = io::require_number(it.value(), "joint_fraction", ep);
      if (it.value().contains("up_z")) {
        e.up_z = io::require_number(it.value(), "up_z", ep);
        if (*e.up_z < -1.0 || *e.up_z > 1.0) throw SchemaError(ep + ".up_z: must lie in [-1, 1]");
      }
      if (it.value().contains("height")) e.height = io::require_number(it.value(), "height", ep);
      s.entities.emplace(it.key(), std::move(e));
    }
    log.steps.push_back(std::move(s));
  }
  return log;
}

StepLog read_step_log(const std::filesystem::path& path) {
  return step_log_from_records(io::read_jsonl(path), path.stem().string());
}

std::vector<io::Json> step_log_to_records(const StepLog& log) {
  std::vector<io::Json> out;
  out.push_back({{"schema", "esl-1"}, {"task", log.task}, {"episode", log.episode}});
  for (const StepState& s : log.steps) {
    io::Json ents = io::Json::object();
    for (const auto& [name, e] : s.entities) {
      io::Json je = {{"pose", io::pose_to_json(e.pose)}};
      if (e.joint_fraction) je["joint_fraction"] = *e.joint_fraction;
      if (e.up_z) je["up_z"] = *e.up_z;
      if (e.height) je["height"] = *e.height;
      ents[name] = je;
    }
    out.push_back({{"tick", s.tick},
                   {"ee_left", io::pose_to_json(s.ee_left)},
                   {"ee_right", io::pose_to_json(s.ee_right)},
                   {"entities", ents}});
  }
  return out;
}

void write_step_log(const std::filesystem::path& path, const StepLog& log) {
  io::write_jsonl(path, step_log_to_records(log));
}

// ---------------------------------------------------------------------------
// Aggregation

double round_percent(double fraction) { return std::round(fraction * 100.0 * 100.0) / 100.0; }

Report aggregate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw EmptyInput("aggregate: no episode results");
  struct Acc {
    int n = 0;
    int ok = 0;
    double progress = 0.0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const EpisodeResult& r : results) {
    if (!acc.count(r.task)) order.push_back(r.task);
    Acc& a = acc[r.task];
    ++a.n;
    a.ok += r.success ? 1 : 0;
    a.progress += r.progress;
  }
  Report rep;
  double sr_sum = 0.0, psr_sum = 0.0;
  for (const std::string& task : order) {
    const Acc& a = acc[task];
    const double sr = static_cast<double>(a.ok) / a.n;
    const double psr = a.progress / a.n;
    rep.tasks.push_back({task, a.n, a.ok, round_percent(sr), round_percent(psr)});
    sr_sum += sr;
    psr_sum += psr;
  }
  rep.mean_sr = round_percent(sr_sum / static_cast<double>(order.size()));
  rep.mean_psr = round_percent(psr_sum / static_cast<double>(order.size()));
  return rep;
}

io::Json to_json(const Report& r) {
  io::Json tasks = io::Json::array();
  for (const TaskReport& t : r.tasks) {
    tasks.push_back({{"task", t.task},
                     {"episodes", t.episodes},
                     {"successes", t.successes},
                     {"SR", t.sr},
                     {"PSR", t.psr}});
  }
  return {{"tasks", tasks}, {"mean_SR", r.mean_sr}, {"mean_PSR", r.mean_psr}};
}

std::string format_table(const Report& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s\n", "task", "episodes", "SR", "PSR");
  out += line;
  for (const TaskReport& t : r.tasks) {
    std::snprintf(line, sizeof line, "%-24s %8d %8.2f %8.2f\n", t.task.c_str(), t.episodes, t.sr, t.psr);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-24s %8s %8.2f %8.2f\n", "mean", "", r.mean_sr, r.mean_psr);
  out += line;
  return out;
}

}  // namespace egobridge
