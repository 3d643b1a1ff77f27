#include <filesystem>

#include "doctest.h"
#include "egobridge/errors.hpp"
#include "egobridge/metrics.hpp"
#include "task_logs.hpp"

using namespace egobridge;
using namespace egobridge::testing;

namespace {

const std::filesystem::path kData = EGOBRIDGE_DEFAULT_DATA_DIR;

TaskCatalog catalog() { return load_task_rules(kData / "task_rules.json"); }

Condition parse(const char* text) { return condition_from_json(io::Json::parse(text), "c"); }

StepState two_entities(const Vec3& a, const Vec3& b) {
  StepState s;
  s.entities["box"] = entity_at(a);
  s.entities["goal"] = entity_at(b);
  return s;
}

}  // namespace

TEST_CASE("default catalog has 12 tasks") {
  const TaskCatalog cat = catalog();
  CHECK(cat.tasks.size() == 12);
  CHECK(cat.find("Stack-Can").subtasks.size() == 1);
  CHECK_THROWS_AS(cat.find("Juggle"), MissingEntity);
}

TEST_CASE("rule file errors") {
  io::Json j = io::read_json_file(kData / "task_rules.json");
  SUBCASE("missing threshold") {
    j["tasks"][0]["success"].erase("threshold");
    CHECK_THROWS_AS(task_catalog_from_json(j), SchemaError);
  }
  SUBCASE("duplicate subtask name") {
    j["tasks"][4]["subtasks"][1]["name"] = "reach";
    CHECK_THROWS_AS(task_catalog_from_json(j), SchemaError);
  }
  SUBCASE("unknown kind") {
    j["tasks"][2]["subtasks"][0]["condition"]["kind"] = "telepathy";
    CHECK_THROWS_AS(task_catalog_from_json(j), UnknownConditionKind);
  }
  SUBCASE("bad operator") {
    j["tasks"][1]["success"]["op"] = "!=";
    CHECK_THROWS_AS(task_catalog_from_json(j), SchemaError);
  }
}

TEST_CASE("distance predicates use strict comparisons") {
  const Condition c = parse(R"({"kind":"distance","a":"box","b":"goal","op":"<","threshold":0.08})");
  CHECK(eval_condition(c, two_entities({0, 0, 0}, {0.05, 0, 0})) == 1.0);
  CHECK(eval_condition(c, two_entities({0, 0, 0}, {0.08, 0, 0})) == 0.0);
  CHECK(eval_condition(c, two_entities({0.5, 0, 0}, {0.5 - 0.0799, 0, 0})) == 1.0);

  const Condition xy = parse(R"({"kind":"distance","a":"box","b":"goal","metric":"xy","op":"<","threshold":0.1})");
  CHECK(eval_condition(xy, two_entities({0, 0, 0}, {0.05, 0, 5})) == 1.0);
  const Condition z = parse(R"({"kind":"distance","a":"box","b":"goal","metric":"z","op":"<","threshold":0.02})");
  CHECK(eval_condition(z, two_entities({0, 0, 1.0}, {9, 9, 0.99})) == 1.0);
  CHECK(eval_condition(z, two_entities({0, 0, 0.97}, {0, 0, 1.0})) == 0.0);

  CHECK_THROWS_AS(eval_condition(c, StepState{}), MissingEntity);
}

TEST_CASE("ee distance takes the closer hand") {
  const Condition c = parse(R"({"kind":"distance","a":"ee","b":"box","op":"<","threshold":0.13})");
  StepState s = two_entities({1, 0, 0}, {0, 0, 0});
  s.ee_left = at({5, 5, 5});
  s.ee_right = at({1.1, 0, 0});
  CHECK(eval_condition(c, s) == 1.0);
  const Condition left = parse(R"({"kind":"distance","a":"ee_left","b":"box","op":"<","threshold":0.13})");
  CHECK(eval_condition(left, s) == 0.0);
}

TEST_CASE("up axis, heights and joint fractions") {
  StepState s;
  s.entities["mug"] = entity_at({0, 0, 1}, rotation_about(Vec3::UnitX(), std::acos(0.6)));
  const Condition up = parse(R"({"kind":"up_axis","entity":"mug","op":">","threshold":0.5})");
  CHECK(eval_condition(up, s) == 1.0);
  s.entities["mug"].up_z = 0.5;
  CHECK(eval_condition(up, s) == 0.0);

  StepState start;
  start.entities["bottle"] = entity_at({0, 0, 1.0});
  start.entities["drawer"] = articulated({0, 0, 0}, 0.5);
  StepState later = start;
  later.entities["bottle"] = entity_at({0, 0, 1.06});
  later.entities["drawer"] = articulated({0, 0, 0}, 0.39);
  const Condition lift = parse(R"({"kind":"height_delta","entity":"bottle","op":">=","threshold":0.06})");
  CHECK(eval_condition(lift, later, start) == 1.0);
  CHECK(eval_condition(lift, later) == 0.0);
  const Condition closing =
      parse(R"({"kind":"joint_fraction","entity":"drawer","mode":"delta","op":"<=","threshold":-0.1})");
  CHECK(eval_condition(closing, later, start) == 1.0);
  const Condition no_fraction = parse(R"({"kind":"joint_fraction","entity":"bottle","op":">","threshold":0})");
  CHECK_THROWS_AS(eval_condition(no_fraction, later), MissingEntity);

  s.entities["table"] = entity_at({0, 0, 0.9});
  const Condition above = parse(R"({"kind":"height","entity":"mug","relative_to":"table","op":">","threshold":0.05})");
  CHECK(eval_condition(above, s) == 1.0);
}

TEST_CASE("count returns the satisfied count") {
  const Condition c = parse(R"({"kind":"count","entities":["a","b","c"],"n":2,
      "template":{"kind":"in_region","entity":"$e","frame":"bin","min":[-0.1,-0.1,null],"max":[0.1,0.1,null]}})");
  StepState s;
  s.entities["bin"] = entity_at({1, 1, 0});
  s.entities["a"] = entity_at({1.05, 1, 3});
  s.entities["b"] = entity_at({0.95, 1.05, -3});
  s.entities["c"] = entity_at({1.2, 1, 0});
  CHECK(eval_condition(c, s) == 2.0);
  REQUIRE(c.items.size() == 3);
  CHECK(c.items[2].a == "c");
}

TEST_CASE("box-goal distance crossing 0.08 at tick 50") {
  const TaskCatalog cat = catalog();
  const TaskRule& rule = cat.find("Push-Box");
  std::vector<StepState> log;
  for (long t = 0; t < 80; ++t) {
    StepState s = two_entities({0.3 - 0.004 * t + 0.2, 0, 1}, {0, 0, 1});
    s.entities["goal_marker"] = s.entities["goal"];
    s.ee_right = at({5, 5, 5});
    s.ee_left = at({5, 5, 5});
    s.tick = t;
    log.push_back(s);
  }
  // Box x = 0.5 - 0.004 t reaches 0.3 at t = 50; nudge exact boundary aside.
  for (auto& s : log) {
    const double x = s.entities["box"].pose.t.x();
    s.entities["box"].pose.t.x() = s.tick < 50 ? std::max(x, 0.0801) : std::min(x, 0.0799);
  }
  const EpisodeResult r = eval_episode(rule, log);
  CHECK(r.success);
  REQUIRE(r.success_tick.has_value());
  CHECK(*r.success_tick == 50);
  CHECK(r.progress == 0.0);
  CHECK_THROWS_AS(eval_episode(rule, std::span<const StepState>()), EmptyLog);
}

TEST_CASE("progress averages latched subtasks") {
  io::Json j = io::Json::parse(R"({"schema":"etr-1","tasks":[{"task":"T",
    "success":{"kind":"up_axis","entity":"x","op":">","threshold":2},
    "subtasks":[
      {"name":"s1","condition":{"kind":"height","entity":"x","op":">","threshold":1}},
      {"name":"s2","condition":{"kind":"height","entity":"x","op":">","threshold":2}},
      {"name":"s3","condition":{"kind":"height","entity":"x","op":">","threshold":3}},
      {"name":"s4","condition":{"kind":"height","entity":"x","op":">","threshold":4}}]}]})");
  const TaskCatalog cat = task_catalog_from_json(j);
  std::vector<StepState> log(4);
  const double heights[] = {0.0, 2.5, 0.0, 1.5};
  std::vector<double> values;
  EpisodeEvaluator ev(cat.tasks[0]);
  double last_sum = 0.0;
  for (int t = 0; t < 4; ++t) {
    log[t].tick = t;
    log[t].entities["x"] = entity_at({0, 0, heights[t]});
    ev.step(log[t]);
    double sum = 0.0;
    for (double v : ev.result().subtask_values) sum += v;
    CHECK(sum >= last_sum);  // latching is monotone
    last_sum = sum;
  }
  const EpisodeResult r = eval_episode(cat.tasks[0], log);
  CHECK(r.progress == 0.5);
  CHECK_FALSE(r.success);
}

TEST_CASE("every default task passes its success log and fails its near miss") {
  const TaskCatalog cat = catalog();
  const auto good = all_task_logs(true);
  const auto bad = all_task_logs(false);
  REQUIRE(good.size() == cat.tasks.size());
  for (std::size_t i = 0; i < good.size(); ++i) {
    CAPTURE(good[i].task);
    const TaskRule& rule = cat.find(good[i].task);
    const EpisodeResult ok = eval_episode(rule, good[i].build("good").steps);
    const EpisodeResult miss = eval_episode(rule, bad[i].build("miss").steps);
    CHECK(ok.success);
    CHECK(ok.progress == 1.0);
    CHECK_FALSE(miss.success);
    // Same log twice gives the same answer.
    const EpisodeResult again = eval_episode(rule, good[i].build("good").steps);
    CHECK(again.progress == ok.progress);
    CHECK(again.success_tick == ok.success_tick);
  }
}

TEST_CASE("unloading before inserting does not count") {
  const TaskCatalog cat = catalog();
  const TaskRule& rule = cat.find("Insert-And-Unload-Cans");
  const EpisodeResult r = eval_episode(rule, insert_and_unload(true, true).build("reverse").steps);
  CHECK_FALSE(r.success);
  for (std::size_t k = 0; k < r.subtask_names.size(); ++k) {
    CAPTURE(r.subtask_names[k]);
    CHECK(r.subtask_values[k] == 1.0);
  }
}

TEST_CASE("step logs roundtrip") {
  const StepLog log = open_drawer(true).build("ep0");
  const auto path = std::filesystem::temp_directory_path() / "egobridge_step_log.jsonl";
  write_step_log(path, log);
  const StepLog back = read_step_log(path);
  CHECK(back.task == "Open-Drawer");
  CHECK(back.episode == "ep0");
  REQUIRE(back.steps.size() == log.steps.size());
  const TaskCatalog cat = catalog();
  const TaskRule& rule = cat.find("Open-Drawer");
  CHECK(eval_episode(rule, back.steps).success == eval_episode(rule, log.steps).success);
}

TEST_CASE("aggregate") {
  std::vector<EpisodeResult> results;
  for (int i = 0; i < 27; ++i) {
    EpisodeResult r;
    r.task = "Stack-Can";
    r.success = i < 21;
    r.progress = r.success ? 1.0 : 0.5;
    results.push_back(r);
  }
  const Report rep = aggregate(results);
  REQUIRE(rep.tasks.size() == 1);
  CHECK(rep.tasks[0].sr == 77.78);
  CHECK(rep.tasks[0].psr == round_percent((21 + 3) / 27.0));
  CHECK(rep.tasks[0].sr <= rep.tasks[0].psr);
  CHECK(format_table(rep).find("77.78") != std::string::npos);

  for (auto& r : results) r.progress = 1.0;
  CHECK(aggregate(results).tasks[0].psr == 100.0);
  CHECK_THROWS_AS(aggregate(std::span<const EpisodeResult>()), EmptyInput);
}
