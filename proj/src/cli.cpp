#include "egobridge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "egobridge/action_head.hpp"
#include "egobridge/arm_ik.hpp"
#include "egobridge/errors.hpp"
#include "egobridge/metrics.hpp"
#include "egobridge/pipeline.hpp"

namespace egobridge::cli {

namespace fs = std::filesystem;
using io::Json;

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("EGOBRIDGE_DATA_DIR"); env && *env) return env;
  return EGOBRIDGE_DEFAULT_DATA_DIR;
}

// ---------------------------------------------------------------------------
// Formats

namespace {

RobotHandCommand command_from_json(const Json& j, std::string_view key, const std::string& path) {
  const auto v = io::require_numbers(j, key, path, kRobotActive);
  return Eigen::Map<const RobotHandCommand>(v.data());
}

Json numbers(const double* data, int n) { return std::vector<double>(data, data + n); }

ActionChunk chunk_from_json(const Json& j, const std::string& path) {
  const auto v = io::require_numbers(j, "chunk", path, kChunkSize);
  ActionChunk c;
  c.values = Eigen::Map<const ActionChunk::Storage>(v.data());
  return c;
}

}  // namespace

std::vector<CommandFrame> read_commands(const fs::path& path) {
  const auto records = io::read_jsonl(path);
  if (records.empty()) throw SchemaError(path.string() + ": missing erd-1 header");
  io::check_schema(records[0], "erd-1", "header");
  std::vector<CommandFrame> frames;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const std::string p = "frames[" + std::to_string(i - 1) + "]";
    CommandFrame f;
    f.t = io::require_number(records[i], "t", p);
    f.q.left = command_from_json(records[i], "left", p);
    f.q.right = command_from_json(records[i], "right", p);
    if (!frames.empty() && !(f.t > frames.back().t)) {
      throw NonMonotonicTime(i - 1, path.string() + ": " + p + ".t does not increase");
    }
    frames.push_back(f);
  }
  return frames;
}

void write_commands(const fs::path& path, const std::vector<CommandFrame>& frames) {
  std::vector<Json> records = {{{"schema", "erd-1"}}};
  for (const auto& f : frames) {
    records.push_back({{"t", f.t},
                       {"left", numbers(f.q.left.data(), kRobotActive)},
                       {"right", numbers(f.q.right.data(), kRobotActive)}});
  }
  io::write_jsonl(path, records);
}

std::vector<ChunkRecord> read_chunks(const fs::path& path) {
  const auto records = io::read_jsonl(path);
  if (records.empty()) throw SchemaError(path.string() + ": missing ech-1 header");
  io::check_schema(records[0], "ech-1", "header");
  std::vector<ChunkRecord> chunks;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const std::string p = "chunks[" + std::to_string(i - 1) + "]";
    ChunkRecord c;
    const double tick = io::require_number(records[i], "tick", p);
    if (tick != std::floor(tick)) throw SchemaError(p + ".tick: expected an integer");
    c.timed.tick = static_cast<Tick>(tick);
    c.timed.chunk = chunk_from_json(records[i], p);
    if (records[i].contains("episode")) c.episode = io::require_string(records[i], "episode", p);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

void write_chunks(const fs::path& path, const std::vector<ChunkRecord>& chunks) {
  std::vector<Json> records = {{{"schema", "ech-1"}, {"hz", kControlHz}}};
  for (const auto& c : chunks) {
    Json r = {{"tick", c.timed.tick}, {"chunk", numbers(c.timed.chunk.values.data(), kChunkSize)}};
    if (!c.episode.empty()) r["episode"] = c.episode;
    records.push_back(std::move(r));
  }
  io::write_jsonl(path, records);
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

struct Common {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

void summary(const Common& c, Json j) { *c.out << j.dump() << std::endl; }

fs::path default_path(const std::string& given, const char* file) {
  return given.empty() ? data_dir() / file : fs::path(given);
}

struct PreprocessArgs {
  std::string in, out;
  double fps = kDefaultSampleFps;
};

int cmd_preprocess(const Common& c, const PreprocessArgs& a) {
  const SampleSet set = preprocess_directory(a.in, a.fps);
  write_samples(a.out, set);
  std::map<std::string, int> episodes;
  for (const auto& s : set.samples) ++episodes[s.episode];
  summary(c, {{"command", "preprocess"}, {"in", a.in}, {"out", a.out}, {"fps", a.fps},
              {"episodes", episodes.size()}, {"samples", set.samples.size()}, {"vocab", set.vocab.names()}});
  return kExitOk;
}

struct FitHandArgs {
  std::string in, out, model, robot;
  double beta = 1.0;
};

int cmd_fit_hand(const Common& c, const FitHandArgs& a) {
  const HumanHandModel human = load_hand_model(default_path(a.model, "human_hand_right.json"));
  const RobotHandModel robot = load_robot_hand(default_path(a.robot, "robot_hand_right.json"));
  const auto frames = read_commands(a.in);
  if (frames.empty()) throw EmptyInput(a.in + ": no frames");
  FitConfig cfg;
  cfg.beta = a.beta;

  std::vector<Fingertips> tips[kNumHands];
  for (const auto& f : frames) {
    tips[0].push_back(robot_hand_fk(robot, f.q.left, Handedness::kLeft));
    tips[1].push_back(robot_hand_fk(robot, f.q.right, Handedness::kRight));
  }
  std::vector<FitResult> fits[kNumHands];
  for (int h = 0; h < kNumHands; ++h) fits[h] = fit_hand_sequence(human, tips[h], hand_side(h), cfg);

  std::vector<Json> records = {{{"schema", "efh-1"}, {"beta", a.beta}}};
  double worst_rms = 0.0, mean_rms = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Json r = {{"t", frames[i].t}};
    for (int h = 0; h < kNumHands; ++h) {
      const FitResult& f = fits[h][i];
      r[h == 0 ? "left" : "right"] = {{"pca", numbers(f.c.data(), kPcaDim)},
                                      {"residual", f.residual},
                                      {"rms_error", f.rms_error},
                                      {"converged", f.converged}};
      worst_rms = std::max(worst_rms, f.rms_error);
      mean_rms += f.rms_error;
    }
    records.push_back(std::move(r));
  }
  io::write_jsonl(a.out, records);
  summary(c, {{"command", "fit-hand"}, {"in", a.in}, {"out", a.out}, {"beta", a.beta},
              {"frames", frames.size()}, {"mean_rms_error_m", mean_rms / (2.0 * frames.size())},
              {"max_rms_error_m", worst_rms}});
  return kExitOk;
}

struct TrainRetargeterArgs {
  std::string out, robot;
  std::uint64_t seed = 0;
  RetargetHyper hyper;
  int levels = 64;
  std::size_t samples = 4096;
  std::size_t heldout = 1000;
};

int cmd_train_retargeter(const Common& c, TrainRetargeterArgs a) {
  const RobotHandModel robot = load_robot_hand(default_path(a.robot, "robot_hand_right.json"));
  a.hyper.seed = a.seed;
  const auto train = build_retarget_dataset(robot, stratified_grid_commands(robot, a.levels, a.samples, a.seed));
  const RetargeterWeights w = train_retargeter(train, a.hyper);
  io::write_json_file(a.out, to_json(w));
  Json s = {{"command", "train-retargeter"}, {"out", a.out}, {"seed", a.seed},
            {"epochs", a.hyper.epochs}, {"batch", a.hyper.batch}, {"lr", a.hyper.lr},
            {"hidden", a.hyper.hidden}, {"levels", a.levels}, {"samples", a.samples},
            {"final_loss", w.final_loss}};
  if (a.heldout > 0) {
    const auto test = build_retarget_dataset(robot, random_commands(robot, a.heldout, a.seed + 1));
    s["heldout"] = a.heldout;
    s["heldout_error_m"] = evaluate_retargeter(w, robot, test);
  }
  summary(c, s);
  return kExitOk;
}

struct RetargetArgs {
  std::string in, out, model, human, robot;
};

int cmd_retarget(const Common& c, const RetargetArgs& a) {
  const RetargeterWeights w = load_retargeter(a.model);
  const HumanHandModel human = load_hand_model(default_path(a.human, "human_hand_right.json"));
  const RobotHandModel robot = load_robot_hand(default_path(a.robot, "robot_hand_right.json"));
  const Episode e = read_episode(a.in);
  std::vector<CommandFrame> frames;
  for (const auto& f : e.frames) {
    const HandKeypoints left = human_hand_fk(human, f.hands[0].pca, Handedness::kLeft);
    const HandKeypoints right = human_hand_fk(human, f.hands[1].pca, Handedness::kRight);
    frames.push_back({f.t, apply_retargeter(w, robot, left, right)});
  }
  write_commands(a.out, frames);
  summary(c, {{"command", "retarget"}, {"in", a.in}, {"out", a.out}, {"model", a.model},
              {"frames", frames.size()}});
  return kExitOk;
}

struct TrainHeadArgs {
  std::string in, out;
  std::uint64_t seed = 0;
  nn::LossWeights lambda;
  HeadHyper hyper;
  HeadConfig cfg;
  int pre_epochs = 20, post_epochs = 115, drop_epoch = 100;
  double pre_lr = 1e-4, post_lr = 2e-5, drop_lr = 2e-6;
};

int cmd_train_head(const Common& c, TrainHeadArgs a) {
  const SampleSet set = read_samples(a.in);
  a.cfg.vocab_size = std::max(1, set.vocab.size());
  a.hyper.seed = a.seed;
  a.hyper.lambda = a.lambda;
  a.hyper.phases.clear();
  if (a.pre_epochs > 0) a.hyper.phases.push_back({a.pre_epochs, a.pre_lr, std::nullopt, 0.0});
  if (a.post_epochs > 0) a.hyper.phases.push_back({a.post_epochs, a.post_lr, a.drop_epoch, a.drop_lr});
  HeadTraining run = train_head(set.samples, a.cfg, a.hyper);
  run.weights.vocab = set.vocab.names();
  io::write_json_file(a.out, to_json(run.weights));
  const double loss = head_loss(run.weights, set.samples, a.lambda);
  summary(c, {{"command", "train-head"}, {"in", a.in}, {"out", a.out}, {"seed", a.seed},
              {"samples", set.samples.size()}, {"steps", run.steps},
              {"lambda_trans", a.lambda.trans}, {"lambda_rot", a.lambda.rot}, {"lambda_joint", a.lambda.joint},
              {"encoder", {{"depth", a.cfg.encoder.depth}, {"hidden", a.cfg.encoder.hidden},
                           {"heads", a.cfg.encoder.heads}, {"ff", a.cfg.encoder.ff}}},
              {"final_loss", loss},
              {"wrist_error_m", predict_wrist_error(run.weights, set.samples)}});
  return kExitOk;
}

struct PredictArgs {
  std::string in, out, model;
};

int cmd_predict(const Common& c, const PredictArgs& a) {
  const HeadWeights w = load_head(a.model);
  SampleSet set = read_samples(a.in);
  // Map sample instruction ids onto the head's vocabulary by name.
  if (!w.vocab.empty()) {
    const InstructionVocab head_vocab(w.vocab);
    for (auto& s : set.samples) s.instruction_id = head_vocab.id(set.vocab.name(s.instruction_id));
  }
  std::vector<ChunkRecord> chunks;
  for (const auto& s : set.samples) {
    ChunkRecord r;
    r.timed.tick = std::llround(s.t * kControlHz);
    r.timed.chunk = head_forward(w, s.proprio, s.instruction_id);
    r.episode = s.episode;
    chunks.push_back(std::move(r));
  }
  write_chunks(a.out, chunks);
  summary(c, {{"command", "predict"}, {"in", a.in}, {"out", a.out}, {"model", a.model},
              {"chunks", chunks.size()}, {"wrist_error_m", predict_wrist_error(w, set.samples)}});
  return kExitOk;
}

struct IkArgs {
  std::string in, out, model;
  IkConfig cfg;
};

int cmd_ik_solve(const Common& c, const IkArgs& a) {
  const ArmModel arm = load_arm_model(default_path(a.model, "arm_7dof.json"));
  const auto records = io::read_jsonl(a.in);
  if (records.empty()) throw SchemaError(a.in + ": missing eik-1 header");
  io::check_schema(records[0], "eik-1", "header");
  std::vector<Json> out = {{{"schema", "eiks-1"}, {"arm", arm.name}}};
  int solved = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const std::string p = "targets[" + std::to_string(i - 1) + "]";
    const Pose target = io::pose_from_json(io::require(records[i], "pose", p), p + ".pose");
    JointVector q0 = JointVector::Zero(arm.dof());
    if (records[i].contains("q0")) {
      const auto v = io::require_numbers(records[i], "q0", p, static_cast<std::size_t>(arm.dof()));
      q0 = Eigen::Map<const JointVector>(v.data(), arm.dof());
    }
    IkConfig cfg = a.cfg;
    cfg.seed = a.cfg.seed + (i - 1);
    const IkResult r = solve_ik(arm, target, clamp_joints(arm, q0), cfg);
    solved += r.converged;
    out.push_back({{"q", numbers(r.q.data(), static_cast<int>(r.q.size()))},
                   {"pos_err", r.pos_err},
                   {"rot_err", r.rot_err},
                   {"iterations", r.iterations},
                   {"restarts_used", r.restarts_used},
                   {"converged", r.converged}});
  }
  io::write_jsonl(a.out, out);
  summary(c, {{"command", "ik-solve"}, {"in", a.in}, {"out", a.out}, {"arm", arm.name},
              {"damping", a.cfg.damping}, {"restarts", a.cfg.restarts}, {"targets", records.size() - 1},
              {"converged", solved}});
  return kExitOk;
}

struct EnsembleArgs {
  std::string in, out, episode;
  double m = kDefaultSmoothing;
  std::optional<long> first, count;
};

int cmd_ensemble(const Common& c, const EnsembleArgs& a) {
  auto records = read_chunks(a.in);
  if (records.empty()) throw EmptyInput(a.in + ": no chunks");
  // One stream at a time; without --episode the first one in the file.
  const std::string episode = a.episode.empty() ? records.front().episode : a.episode;
  std::vector<TimedChunk> chunks;
  for (auto& r : records) {
    if (r.episode == episode) chunks.push_back(std::move(r.timed));
  }
  if (chunks.empty()) throw EmptyInput(a.in + ": no chunks for episode " + episode);
  const Tick first = a.first.value_or(chunks.front().tick);
  const Tick count = a.count.value_or(chunks.back().tick + kHorizon - first);
  const auto actions = replay_chunks(chunks, first, count, a.m);
  std::vector<Json> out = {{{"schema", "eact-1"}, {"m", a.m}, {"hz", kControlHz}}};
  long covered = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    Json r = {{"tick", first + static_cast<Tick>(i)}, {"action", nullptr}};
    if (actions[i]) {
      r["action"] = numbers(actions[i]->data(), kStepDim);
      ++covered;
    }
    out.push_back(std::move(r));
  }
  io::write_jsonl(a.out, out);
  summary(c, {{"command", "ensemble"}, {"in", a.in}, {"out", a.out}, {"episode", episode}, {"m", a.m},
              {"chunks", chunks.size()}, {"first", first}, {"ticks", actions.size()}, {"covered", covered}});
  return kExitOk;
}

struct EvaluateArgs {
  std::string rules, logs, out;
};

int cmd_evaluate(const Common& c, const EvaluateArgs& a) {
  const TaskCatalog catalog = load_task_rules(default_path(a.rules, "task_rules.json"));
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.logs)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EpisodeResult> results;
  for (const auto& f : files) {
    const StepLog log = read_step_log(f);
    EpisodeResult r = eval_episode(catalog.find(log.task), log.steps);
    r.episode = log.episode;
    results.push_back(std::move(r));
  }
  // Rule-file order, not file order.
  std::stable_sort(results.begin(), results.end(), [&](const EpisodeResult& x, const EpisodeResult& y) {
    auto index = [&](const std::string& t) {
      for (std::size_t i = 0; i < catalog.tasks.size(); ++i) {
        if (catalog.tasks[i].task == t) return i;
      }
      return catalog.tasks.size();
    };
    return index(x.task) < index(y.task);
  });
  const Report report = aggregate(results);
  const Json rj = to_json(report);
  if (!a.out.empty()) io::write_json_file(a.out, rj);
  *c.err << format_table(report);
  summary(c, {{"command", "evaluate"}, {"logs", a.logs}, {"episodes", results.size()}, {"report", rj}});
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Human-to-robot hand action toolkit", "egobridge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Common common{&out, &err};
  int status = kExitOk;

  PreprocessArgs pre;
  auto* sub = app.add_subcommand("preprocess", "Episodes (eep-1) -> training samples (ets-1)");
  sub->add_option("--in", pre.in, "Directory of episode .jsonl files")->required();
  sub->add_option("--out", pre.out, "Sample file to write")->required();
  sub->add_option("--fps", pre.fps, "Anchor sampling rate")->capture_default_str();
  sub->callback([&] { status = cmd_preprocess(common, pre); });

  FitHandArgs fit;
  sub = app.add_subcommand("fit-hand", "Robot joint commands (erd-1) -> human PCA coefficients (efh-1)");
  sub->add_option("--in", fit.in, "Robot command stream")->required();
  sub->add_option("--out", fit.out, "Fitted coefficients")->required();
  sub->add_option("--model", fit.model, "Human hand model (default: data dir)");
  sub->add_option("--robot", fit.robot, "Robot hand model (default: data dir)");
  sub->add_option("--beta", fit.beta, "SmoothL1 transition, meters")->capture_default_str();
  sub->callback([&] { status = cmd_fit_hand(common, fit); });

  TrainRetargeterArgs tr;
  sub = app.add_subcommand("train-retargeter", "Train the fingertip -> joint command network (erw-1)");
  sub->add_option("--out", tr.out, "Weight file")->required();
  sub->add_option("--seed", tr.seed, "Grid and training seed")->required();
  sub->add_option("--robot", tr.robot, "Robot hand model (default: data dir)");
  sub->add_option("--epochs", tr.hyper.epochs)->capture_default_str();
  sub->add_option("--batch", tr.hyper.batch)->capture_default_str();
  sub->add_option("--lr", tr.hyper.lr)->capture_default_str();
  sub->add_option("--levels", tr.levels, "Grid levels per joint")->capture_default_str();
  sub->add_option("--samples", tr.samples, "Grid size")->capture_default_str();
  sub->add_option("--heldout", tr.heldout, "Random held-out commands (0 skips)")->capture_default_str();
  sub->callback([&] { status = cmd_train_retargeter(common, tr); });

  RetargetArgs rt;
  sub = app.add_subcommand("retarget", "Human episode (eep-1) -> robot joint commands (erd-1)");
  sub->add_option("--in", rt.in, "Episode file")->required();
  sub->add_option("--out", rt.out, "Command stream to write")->required();
  sub->add_option("--model", rt.model, "Retargeter weights (erw-1)")->required();
  sub->add_option("--human", rt.human, "Human hand model (default: data dir)");
  sub->add_option("--robot", rt.robot, "Robot hand model (default: data dir)");
  sub->callback([&] { status = cmd_retarget(common, rt); });

  TrainHeadArgs th;
  sub = app.add_subcommand("train-head", "Train the action head on samples (ets-1 -> eah-1)");
  sub->add_option("--in", th.in, "Sample file")->required();
  sub->add_option("--out", th.out, "Weight file")->required();
  sub->add_option("--seed", th.seed)->required();
  sub->add_option("--lambda-trans", th.lambda.trans)->capture_default_str();
  sub->add_option("--lambda-rot", th.lambda.rot)->capture_default_str();
  sub->add_option("--lambda-joint", th.lambda.joint)->capture_default_str();
  sub->add_option("--pretrain-epochs", th.pre_epochs)->capture_default_str();
  sub->add_option("--pretrain-lr", th.pre_lr)->capture_default_str();
  sub->add_option("--posttrain-epochs", th.post_epochs)->capture_default_str();
  sub->add_option("--posttrain-lr", th.post_lr)->capture_default_str();
  sub->add_option("--drop-epoch", th.drop_epoch, "Post-training epoch where the rate drops")->capture_default_str();
  sub->add_option("--drop-lr", th.drop_lr)->capture_default_str();
  sub->add_option("--batch", th.hyper.batch)->capture_default_str();
  sub->add_option("--max-steps", th.hyper.max_steps, "0 = no cap")->capture_default_str();
  sub->add_option("--depth", th.cfg.encoder.depth)->capture_default_str();
  sub->add_option("--hidden", th.cfg.encoder.hidden)->capture_default_str();
  sub->add_option("--heads", th.cfg.encoder.heads)->capture_default_str();
  sub->add_option("--ff", th.cfg.encoder.ff)->capture_default_str();
  sub->add_option("--proprio-hidden", th.cfg.proprio_hidden)->capture_default_str();
  sub->callback([&] { status = cmd_train_head(common, th); });

  PredictArgs pr;
  sub = app.add_subcommand("predict", "Action chunks for samples (ets-1 -> ech-1)");
  sub->add_option("--in", pr.in, "Sample file")->required();
  sub->add_option("--out", pr.out, "Chunk file")->required();
  sub->add_option("--model", pr.model, "Head weights (eah-1)")->required();
  sub->callback([&] { status = cmd_predict(common, pr); });

  IkArgs ik;
  sub = app.add_subcommand("ik-solve", "End-effector targets (eik-1) -> arm joint angles");
  sub->add_option("--in", ik.in, "Target file")->required();
  sub->add_option("--out", ik.out, "Result file")->required();
  sub->add_option("--model", ik.model, "Arm model (default: data dir)");
  sub->add_option("--damping", ik.cfg.damping)->capture_default_str();
  sub->add_option("--restarts", ik.cfg.restarts)->capture_default_str();
  sub->add_option("--max-iterations", ik.cfg.max_iterations)->capture_default_str();
  sub->add_option("--seed", ik.cfg.seed, "Restart seed")->capture_default_str();
  sub->callback([&] { status = cmd_ik_solve(common, ik); });

  EnsembleArgs en;
  sub = app.add_subcommand("ensemble", "Temporal ensembling of chunks (ech-1) into per-tick actions");
  sub->add_option("--in", en.in, "Chunk file")->required();
  sub->add_option("--out", en.out, "Action file")->required();
  sub->add_option("--m", en.m, "Smoothing parameter")->capture_default_str();
  sub->add_option("--episode", en.episode, "Only chunks from this episode");
  sub->add_option("--first", en.first, "First tick (default: first chunk)");
  sub->add_option("--count", en.count, "Number of ticks (default: through the last chunk)");
  sub->callback([&] { status = cmd_ensemble(common, en); });

  EvaluateArgs ev;
  sub = app.add_subcommand("evaluate", "Score step logs (esl-1) against task rules (etr-1)");
  sub->add_option("--rules", ev.rules, "Rule file (default: data dir)");
  sub->add_option("--logs", ev.logs, "Directory of step logs")->required();
  sub->add_option("--out", ev.out, "Also write the report here");
  sub->callback([&] { status = cmd_evaluate(common, ev); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);  // --help
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return status;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace egobridge::cli
