// Acceptance suite: one PASS/FAIL line per criterion, with wall time.
//
//   acceptance [--only name[,name...]] [--list]
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "egobridge/action_head.hpp"
#include "egobridge/arm_ik.hpp"
#include "egobridge/ensemble.hpp"
#include "egobridge/geometry.hpp"
#include "egobridge/metrics.hpp"
#include "egobridge/nn.hpp"
#include "egobridge/pipeline.hpp"
#include "egobridge/retarget.hpp"
#include "gradcheck.hpp"
#include "random.hpp"
#include "task_logs.hpp"

using namespace egobridge;
namespace fs = std::filesystem;

namespace {

const fs::path kData = EGOBRIDGE_DEFAULT_DATA_DIR;

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome rot6d_roundtrip() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  bool valid = true;
  for (int i = 0; i < 100000; ++i) {
    const Mat3 r = testing::random_rotation(rng);
    const Rot6D once = rot6d_from_matrix(r);
    const Mat3 decoded = matrix_from_rot6d(once);
    const Mat3 again = matrix_from_rot6d(rot6d_from_matrix(decoded));
    worst = std::max({worst, (decoded - r).cwiseAbs().maxCoeff(), (again - r).cwiseAbs().maxCoeff()});
    valid = valid && is_rotation(decoded, 1e-9);
  }
  return {valid && worst < 1e-9, "100000 rotations, max matrix deviation " + fmt("%.2e", worst) + " (< 1e-9)"};
}

Outcome gradient_suite() {
  std::mt19937_64 rng(2);
  auto fill = [&](nn::Matrix& m, double s) { testing::fill_uniform(m, rng, -s, s); };
  double mlp_worst = 0.0, enc_worst = 0.0, loss_worst = 0.0;
  constexpr int kInstances = 20;

  for (int trial = 0; trial < kInstances; ++trial) {
    const int sizes[] = {3 + trial % 4, 6, 5, 2 + trial % 3};
    nn::Mlp m = nn::make_mlp(sizes, trial % 2 ? nn::Activation::kTanh : nn::Activation::kGelu,
                             nn::Activation::kLinear, rng);
    for (auto& l : m.layers) testing::fill_uniform(l.bias, rng, -0.5, 0.5);
    nn::Matrix x(sizes[0], 4), g(sizes[3], 4);
    fill(x, 1.0);
    fill(g, 1.0);
    auto loss = [&] { return nn::mlp_forward(m, x).cwiseProduct(g).sum(); };
    nn::MlpGradient grad = nn::mlp_grad(m, x, g);
    mlp_worst = std::max({mlp_worst, testing::gradient_relative_error(nn::parameters(m), nn::parameters(grad.weights), loss),
                          testing::gradient_relative_error(testing::as_params(x), testing::as_params(grad.input), loss)});
  }

  for (int trial = 0; trial < kInstances; ++trial) {
    nn::Encoder e = nn::make_encoder({2, 16, 4, 32}, rng);
    for (auto& p : nn::parameters(e)) {
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      for (double& v : p) v += u(rng);
    }
    nn::Matrix x(3 + trial % 4, 16), g(3 + trial % 4, 16);
    fill(x, 1.0);
    fill(g, 1.0);
    auto loss = [&] { return nn::encoder_forward(e, x).cwiseProduct(g).sum(); };
    nn::EncoderCache cache;
    nn::encoder_forward(e, x, &cache);
    nn::Encoder grads = nn::zeros_like(e);
    nn::Matrix gx = nn::encoder_backward(e, cache, g, grads);
    enc_worst = std::max({enc_worst, testing::gradient_relative_error(nn::parameters(e), nn::parameters(grads), loss),
                          testing::gradient_relative_error(testing::as_params(x), testing::as_params(gx), loss)});
  }

  for (int trial = 0; trial < kInstances; ++trial) {
    ActionChunk pred, gt;
    testing::fill_uniform(pred.values, rng, -1.0, 1.0);
    testing::fill_uniform(gt.values, rng, -1.0, 1.0);
    const nn::LossWeights w{20.0, 5.0, 5.0};
    nn::Matrix grad = nn::composite_loss(pred, gt, w).grad.values;
    nn::Matrix values = pred.values;
    auto loss = [&] {
      pred.values = values;
      return nn::composite_loss(pred, gt, w).total;
    };
    loss_worst = std::max(loss_worst, testing::gradient_relative_error(testing::as_params(values),
                                                                       testing::as_params(grad), loss));
  }
  const bool ok = mlp_worst < 1e-4 && enc_worst < 1e-3 && loss_worst < 1e-4;
  return {ok, "20 instances each; max relative error mlp " + fmt("%.1e", mlp_worst) + " (< 1e-4), encoder " +
                  fmt("%.1e", enc_worst) + " (< 1e-3), composite loss " + fmt("%.1e", loss_worst) + " (< 1e-4)"};
}

Outcome hand_fitting() {
  const HumanHandModel m = load_hand_model(kData / "human_hand_right.json");
  std::mt19937_64 rng(3);
  int ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PcaCoeffs truth;
    testing::fill_uniform(truth, rng, -2.0, 2.0);
    const Fingertips targets = fingertips(human_hand_fk(m, truth));
    const FitResult r = fit_hand_params(m, targets);
    const Fingertips got = fingertips(human_hand_fk(m, r.c));
    double sum = 0.0;
    for (int f = 0; f < kNumFingers; ++f) sum += (got[f] - targets[f]).squaredNorm();
    const double rms = std::sqrt(sum / kNumFingers);
    worst = std::max(worst, rms);
    if (rms < 1e-4) ++ok;
  }
  return {ok >= 95, std::to_string(ok) + "/100 fits with fingertip RMS < 1e-4 m (need >= 95); worst " +
                        fmt("%.1e", worst) + " m"};
}

Outcome retargeter() {
  const RobotHandModel m = load_robot_hand(kData / "robot_hand_right.json");
  const auto train = build_retarget_dataset(m, stratified_grid_commands(m, 64, 4096, 1));
  const auto heldout = build_retarget_dataset(m, random_commands(m, 1000, 2));
  RetargetHyper hyper;  // 2000 epochs, batch 2048, lr 1e-3, hidden 64-128-64
  hyper.seed = 1;
  const RetargeterWeights w = train_retargeter(train, hyper);
  const double train_err = evaluate_retargeter(w, m, train);
  const double err = evaluate_retargeter(w, m, heldout);
  return {err <= 1e-3, "held-out mean fingertip error " + fmt("%.3e", err) + " m (<= 1e-3), train " +
                           fmt("%.3e", train_err) + " m; 4096-sample grid, 2000 epochs, batch 2048, lr 1e-3"};
}

Outcome inverse_kinematics() {
  const ArmModel m = load_arm_model(kData / "arm_7dof.json");
  std::mt19937_64 rng(4);
  int ok = 0, max_restarts = 0;
  const JointVector neutral = clamp_joints(m, JointVector::Zero(m.dof()));
  for (int trial = 0; trial < 100; ++trial) {
    JointVector truth(m.dof());
    for (int i = 0; i < m.dof(); ++i) {
      const ArmJoint& j = m.joints[static_cast<std::size_t>(i)];
      std::uniform_real_distribution<double> u(j.lo, j.hi);
      truth[i] = u(rng);
    }
    IkConfig cfg;
    cfg.restarts = 5;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const IkResult r = solve_ik(m, arm_fk(m, truth), neutral, cfg);
    max_restarts = std::max(max_restarts, r.restarts_used);
    if (r.pos_err < 1e-4 && r.rot_err < 1e-3 && r.restarts_used <= 5 && within_limits(m, r.q)) ++ok;
  }
  return {ok >= 90, std::to_string(ok) + "/100 targets solved to pos < 1e-4 m, rot < 1e-3 rad (need >= 90) "
                        "from the neutral pose; at most " + std::to_string(max_restarts) + " restarts"};
}

ActionChunk random_chunk(std::mt19937_64& rng) {
  ActionChunk c;
  for (int k = 0; k < kHorizon; ++k) {
    for (int h = 0; h < kNumHands; ++h) {
      HandState s;
      s.wrist = testing::random_pose(rng);
      testing::fill_uniform(s.pca, rng, -2.0, 2.0);
      c.set_hand(k, h, s);
    }
  }
  return c;
}

bool rotation_component(int i) {
  const int in_hand = i % kHandActionDim;
  return in_hand >= kRotOffset && in_hand < kRotOffset + 6;
}

Outcome ensembling() {
  std::mt19937_64 rng(5);
  bool hull = true, normalized = true;
  ChunkBuffer buf;
  std::vector<ActionChunk> history;
  for (Tick t = 0; t < 60; ++t) {
    history.push_back(random_chunk(rng));
    buf.push(t, history.back());
    const StepVector a = buf.action(t);
    for (int i = 0; i < kStepDim; ++i) {
      if (rotation_component(i)) continue;
      double lo = 1e300, hi = -1e300;
      for (Tick s = std::max<Tick>(0, t - kHorizon + 1); s <= t; ++s) {
        const double v = history[static_cast<std::size_t>(s)].values(static_cast<int>(t - s), i);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      hull = hull && a[i] >= lo - 1e-12 && a[i] <= hi + 1e-12;
    }
    for (int h = 0; h < kNumHands; ++h) {
      normalized = normalized && is_rotation(matrix_from_rot6d(a.segment<6>(h * kHandActionDim + kRotOffset)), 1e-9);
    }
  }
  // Weights sum to one: chunks that all hold the same step come back unchanged.
  const ActionChunk same = random_chunk(rng);
  ActionChunk flat = same;
  for (int k = 1; k < kHorizon; ++k) flat.values.row(k) = same.values.row(0);
  ChunkBuffer copies;
  for (Tick t = 0; t < 10; ++t) copies.push(t, flat);
  double norm_err = 0.0;
  for (Tick t = 9; t < 30; ++t) {
    norm_err = std::max(norm_err, (copies.action(t) - same.values.row(0).transpose()).cwiseAbs().maxCoeff());
  }
  ChunkBuffer single;
  single.push(7, same);
  double single_err = 0.0;
  for (int k = 0; k < kHorizon; ++k) {
    single_err = std::max(single_err, (single.action(7 + k) - same.values.row(k).transpose()).cwiseAbs().maxCoeff());
  }
  // Chunk of zeros issued at tick 0, chunk of ones at tick 1, m = 0.8:
  // (0.8 * 0 + 1 * 1) / (0.8 + 1) = 0.5556.
  auto constant = [](double v) {
    ActionChunk c;
    for (int k = 0; k < kHorizon; ++k) {
      for (int h = 0; h < kNumHands; ++h) {
        HandState s;
        s.wrist.t.setConstant(v);
        s.pca.setConstant(v);
        c.set_hand(k, h, s);
      }
    }
    return c;
  };
  ChunkBuffer two(0.8);
  two.push(0, constant(0.0));
  two.push(1, constant(1.0));
  const double value = two.action(1)[0];
  const double expected = 1.0 / 1.8;
  const bool ok = hull && normalized && norm_err < 1e-12 && single_err < 1e-12 &&
                  std::abs(value - expected) <= 1e-9 && std::abs(value - 0.5556) < 5e-5;
  return {ok, std::string("convex hull ") + (hull ? "ok" : "violated") + ", rotations " +
                  (normalized ? "orthonormal" : "NOT orthonormal") + ", identical-chunk error " + fmt("%.1e", norm_err) +
                  ", single-chunk error " + fmt("%.1e", single_err) + ", two-chunk value " + fmt("%.10f", value) +
                  " (1/1.8 +- 1e-9)"};
}

Outcome pipeline() {
  const Episode e = synthetic_episode(300, 30.0, 6, "wave");
  const auto anchors = resample_anchors(e, 3.0);
  // Window arithmetic: anchors every 10 frames with 30 frames of history
  // and 30 of future inside [0, 299] are 30, 40, ..., 260.
  std::vector<std::size_t> expected;
  for (std::size_t i = 30; i + 30 <= 299; i += 10) expected.push_back(i);
  InstructionVocab vocab;
  const auto samples = make_samples(e, anchors, vocab);
  double worst = 0.0;
  for (const auto& s : samples) {
    const Pose cam = e.frames[s.anchor].camera;
    for (int h = 0; h < kNumHands; ++h) {
      const Pose now = unproject_from_camera(cam, {s.proprio.segment<3>(h * kHandActionDim).transpose(),
                                                   matrix_from_rot6d(s.proprio.segment<6>(h * kHandActionDim + kRotOffset).transpose())});
      worst = std::max({worst, (now.t - e.frames[s.anchor].hands[h].wrist.t).norm(),
                        (now.r - e.frames[s.anchor].hands[h].wrist.r).cwiseAbs().maxCoeff()});
      for (int k = 0; k < kHorizon; ++k) {
        const Pose world = unproject_from_camera(cam, {s.target.translation(k, h), matrix_from_rot6d(s.target.rot6d(k, h))});
        const Pose& truth = e.frames[s.anchor + 1 + static_cast<std::size_t>(k)].hands[h].wrist;
        worst = std::max({worst, (world.t - truth.t).norm(), (world.r - truth.r).cwiseAbs().maxCoeff()});
      }
    }
  }
  const bool ok = anchors.size() == 24 && anchors == expected && samples.size() == 24 && worst < 1e-9;
  return {ok, std::to_string(anchors.size()) + " anchors at 3 fps (expected 24, frames 30..260); "
              "max re-projection error " + fmt("%.1e", worst) + " (< 1e-9)"};
}

Outcome head_overfit() {
  const Episode e = synthetic_episode(300, 30.0, 3, "wave");
  InstructionVocab vocab;
  auto samples = make_samples(e, resample_anchors(e), vocab);
  samples.resize(8);
  HeadConfig cfg;
  cfg.encoder = {2, 32, 4, 64};
  cfg.proprio_hidden = 32;
  cfg.vocab_size = 1;
  HeadHyper hyper;
  hyper.phases = {{3000, 1e-3, 2000, 3e-4}};
  hyper.seed = 5;
  const HeadTraining a = train_head(samples, cfg, hyper);
  const HeadTraining b = train_head(samples, cfg, hyper);
  const double loss = head_loss(a.weights, samples);
  const bool same = a.loss_curve == b.loss_curve && head_loss(b.weights, samples) == loss;
  const bool ok = loss < 1e-3 && a.steps <= 3000 && same;
  return {ok, "8 samples, 2 layers x 32 hidden: composite loss " + fmt("%.2e", loss) + " (< 1e-3) after " +
                  std::to_string(a.steps) + " steps; rerun with the same seed " + (same ? "identical" : "DIFFERS")};
}

Outcome metrics() {
  const TaskCatalog cat = load_task_rules(kData / "task_rules.json");
  int pass = 0, reject = 0;
  const auto good = testing::all_task_logs(true);
  const auto bad = testing::all_task_logs(false);
  for (std::size_t i = 0; i < good.size(); ++i) {
    const TaskRule& rule = cat.find(good[i].task);
    pass += eval_episode(rule, good[i].build("good").steps).success;
    reject += !eval_episode(rule, bad[i].build("miss").steps).success;
  }
  // 27 Stack-Can episodes: 21 success logs and 6 near misses.
  std::vector<EpisodeResult> suite;
  const TaskRule& stack = cat.find("Stack-Can");
  for (int i = 0; i < 27; ++i) {
    suite.push_back(eval_episode(stack, testing::stack_can(i < 21).build("ep" + std::to_string(i)).steps));
  }
  const Report report = aggregate(suite);
  std::ostringstream sr;
  sr.precision(2);
  sr << std::fixed << report.tasks[0].sr;
  const bool ok = cat.tasks.size() == 12 && pass == 12 && reject == 12 && sr.str() == "77.78" &&
                  report.tasks[0].sr <= report.tasks[0].psr;
  return {ok, std::to_string(cat.tasks.size()) + " tasks; success logs passed " + std::to_string(pass) +
                  "/12, near misses rejected " + std::to_string(reject) + "/12; 21/27 suite SR " + sr.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"rot6d-roundtrip", 1.0, rot6d_roundtrip},
      {"gradient-suite", 30.0, gradient_suite},
      {"hand-fitting", 60.0, hand_fitting},
      {"retargeter-error", 300.0, retargeter},
      {"ik", 30.0, inverse_kinematics},
      {"ensembling", 1.0, ensembling},
      {"pipeline", 5.0, pipeline},
      {"head-overfit", 120.0, head_overfit},
      {"metrics", 5.0, metrics},
  };
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--list") == 0) {
      for (const auto& c : all) std::printf("%s\n", c.name.c_str());
      return 0;
    }
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string name; std::getline(ss, name, ',');) only.push_back(name);
    } else {
      std::fprintf(stderr, "usage: acceptance [--only name[,name...]] [--list]\n");
      return 1;
    }
  }

  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = o.ok && s <= c.limit_s;
    failed += !ok;
    std::printf("%s  %-17s %s [%.2f s, limit %.0f s%s]\n", ok ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), s,
                c.limit_s, s <= c.limit_s ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matched\n");
    return 1;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
