// Regenerates data/samples: constructed step logs for every default task
// (one success, one near miss), two synthetic episodes, a robot command
// stream and a few reachable IK targets.
//
//   gen_samples <out-dir>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>

#include "egobridge/arm_ik.hpp"
#include "egobridge/cli.hpp"
#include "egobridge/pipeline.hpp"
#include "task_logs.hpp"

using namespace egobridge;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_samples <out-dir>\n";
    return 1;
  }
  const fs::path out = argv[1];
  fs::create_directories(out / "logs");
  fs::create_directories(out / "episodes");

  for (bool success : {true, false}) {
    for (const auto& b : testing::all_task_logs(success)) {
      const std::string name = b.task + (success ? "_success" : "_near_miss");
      write_step_log(out / "logs" / (name + ".jsonl"), b.build(name));
    }
  }

  write_episode(out / "episodes" / "wave_0.jsonl", synthetic_episode(300, 30.0, 1, "wave both hands"));
  write_episode(out / "episodes" / "reach_1.jsonl", synthetic_episode(300, 30.0, 2, "reach forward", false));

  const RobotHandModel robot = load_robot_hand(cli::data_dir() / "robot_hand_right.json");
  std::vector<cli::CommandFrame> frames;
  for (int i = 0; i < 10; ++i) {
    cli::CommandFrame f;
    f.t = i / 30.0;
    for (int j = 0; j < kRobotActive; ++j) {
      const double s = 0.5 + 0.4 * std::sin(0.3 * i + j);
      f.q.left[j] = robot.active[j].lo + s * (robot.active[j].hi - robot.active[j].lo);
      f.q.right[j] = robot.active[j].lo + (1.0 - s) * (robot.active[j].hi - robot.active[j].lo);
    }
    frames.push_back(f);
  }
  cli::write_commands(out / "robot_demo.jsonl", frames);

  const ArmModel arm = load_arm_model(cli::data_dir() / "arm_7dof.json");
  std::mt19937_64 rng(3);
  std::vector<io::Json> targets = {{{"schema", "eik-1"}}};
  for (int i = 0; i < 5; ++i) {
    JointVector q(arm.dof());
    for (int j = 0; j < arm.dof(); ++j) {
      std::uniform_real_distribution<double> u(0.8 * arm.joints[j].lo, 0.8 * arm.joints[j].hi);
      q[j] = u(rng);
    }
    targets.push_back({{"pose", io::pose_to_json(arm_fk(arm, q))}});
  }
  io::write_jsonl(out / "ik_targets.jsonl", targets);
  std::cout << "wrote " << out << "\n";
  return 0;
}
