#include "egobridge/retarget.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>

#include "egobridge/errors.hpp"

namespace egobridge {

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

namespace {

using TipVector = Eigen::Matrix<double, 3 * kNumFingers, 1>;
using TipJacobian = Eigen::Matrix<double, 3 * kNumFingers, kPcaDim>;

TipVector stack(const Fingertips& t) {
  TipVector v;
  for (int f = 0; f < kNumFingers; ++f) v.segment<3>(3 * f) = t[f];
  return v;
}

TipVector tip_residual(const HumanHandModel& model, const PcaCoeffs& c, const TipVector& target,
                       Handedness side) {
  return stack(fingertips(human_hand_fk(model, c, side))) - target;
}

double objective_of(const TipVector& r, double beta) {
  double sum = 0.0;
  for (int i = 0; i < r.size(); ++i) sum += smooth_l1(r[i], beta);
  return sum / kNumFingers;
}

double rms_of(const TipVector& r) {
  double sum = 0.0;
  for (int f = 0; f < kNumFingers; ++f) sum += r.segment<3>(3 * f).squaredNorm();
  return std::sqrt(sum / kNumFingers);
}

PcaCoeffs project_to_bound(const PcaCoeffs& c) {
  return c.cwiseMax(-kPcaSanityBound).cwiseMin(kPcaSanityBound);
}

constexpr double kMaxDamping = 1e12;

}  // namespace

double fingertip_objective(const HumanHandModel& model, const PcaCoeffs& c,
                           const Fingertips& targets, double beta, Handedness side) {
  return objective_of(tip_residual(model, c, stack(targets), side), beta);
}

FitResult fit_hand_params(const HumanHandModel& model, const Fingertips& targets,
                          const PcaCoeffs& init, const FitConfig& cfg) {
  return fit_hand_params(model, targets, init, cfg, model.handedness);
}

namespace {

FitResult fit_once(const HumanHandModel& model, const Fingertips& targets, const PcaCoeffs& init,
                   const FitConfig& cfg, Handedness side) {
  if (!(cfg.beta > 0.0)) throw DataError("fit: SmoothL1 beta must be positive");
  const TipVector target = stack(targets);
  if (!target.allFinite()) throw DataError("fit: target fingertips must be finite");

  FitResult out;
  out.c = project_to_bound(init);
  TipVector r = tip_residual(model, out.c, target, side);
  double f = objective_of(r, cfg.beta);
  if (!std::isfinite(f)) throw NonFinite("fit: objective is not finite at the initial guess");

  double damping = -1.0;
  while (out.iterations < cfg.max_iterations) {
    // Iteratively reweighted Gauss-Newton model of the SmoothL1 objective.
    TipVector psi, weight;
    for (int i = 0; i < r.size(); ++i) {
      const double a = std::abs(r[i]);
      psi[i] = a < cfg.beta ? r[i] / cfg.beta : (r[i] > 0 ? 1.0 : -1.0);
      weight[i] = a < cfg.beta ? 1.0 / cfg.beta : 1.0 / a;
    }
    const TipJacobian jac = fingertip_jacobian(model, out.c, side, cfg.jacobian_step);
    const PcaCoeffs grad = jac.transpose() * psi / kNumFingers;
    if (grad.norm() < cfg.gradient_tolerance) {
      out.converged = true;
      break;
    }
    const Eigen::Matrix<double, kPcaDim, kPcaDim> h =
        jac.transpose() * weight.asDiagonal() * jac / kNumFingers;
    if (damping < 0.0) damping = 1e-3 * std::max(h.diagonal().maxCoeff(), 1e-12);

    bool accepted = false;
    while (!accepted && out.iterations < cfg.max_iterations) {
      ++out.iterations;
      Eigen::Matrix<double, kPcaDim, kPcaDim> damped = h;
      damped.diagonal().array() += damping;
      const PcaCoeffs candidate = project_to_bound(out.c - damped.ldlt().solve(grad));
      const TipVector rc = tip_residual(model, candidate, target, side);
      const double fc = objective_of(rc, cfg.beta);
      if (std::isnan(fc)) throw NonFinite("fit: objective became NaN");
      if (fc < f) {
        const double step = (candidate - out.c).norm();
        out.c = candidate;
        r = rc;
        f = fc;
        damping = std::max(damping / 3.0, 1e-15);
        accepted = true;
        if (step < cfg.step_tolerance) out.converged = true;
      } else {
        damping *= 4.0;
        if (damping > kMaxDamping) break;
      }
    }
    if (out.converged || !accepted) break;
  }
  out.residual = f;
  out.rms_error = rms_of(r);
  return out;
}

}  // namespace

FitResult fit_hand_params(const HumanHandModel& model, const Fingertips& targets,
                          const PcaCoeffs& init, const FitConfig& cfg, Handedness side) {
  FitResult best = fit_once(model, targets, init, cfg, side);
  std::mt19937_64 rng(cfg.restart_seed);
  std::uniform_real_distribution<double> u(-cfg.restart_spread, cfg.restart_spread);
  int attempts = 1;
  for (int k = 0; k < cfg.restarts && best.residual > cfg.restart_residual; ++k) {
    PcaCoeffs start;
    for (int i = 0; i < kPcaDim; ++i) start[i] = u(rng);
    const FitResult trial = fit_once(model, targets, start, cfg, side);
    ++attempts;
    if (trial.residual < best.residual) best = trial;
  }
  best.attempts = attempts;
  return best;
}

std::vector<FitResult> fit_hand_sequence(const HumanHandModel& model,
                                         std::span<const Fingertips> targets, Handedness side,
                                         const FitConfig& cfg) {
  std::vector<FitResult> out;
  out.reserve(targets.size());
  PcaCoeffs warm = PcaCoeffs::Zero();
  for (const Fingertips& t : targets) {
    out.push_back(fit_hand_params(model, t, warm, cfg, side));
    warm = out.back().c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Retargeting MLP

RetargetInput pack_fingertips(const Fingertips& left, const Fingertips& right) {
  RetargetInput v;
  for (int f = 0; f < kNumFingers; ++f) {
    v.segment<3>(3 * f) = left[f];
    v.segment<3>(15 + 3 * f) = right[f];
  }
  return v;
}

RetargetOutput pack_commands(const BimanualCommand& q) {
  RetargetOutput v;
  v << q.left, q.right;
  return v;
}

BimanualCommand unpack_commands(const RetargetOutput& v) {
  return {v.head<kRobotActive>(), v.tail<kRobotActive>()};
}

RetargetInput robot_fingertip_input(const RobotHandModel& model, const BimanualCommand& q) {
  return pack_fingertips(robot_hand_fk(model, q.left, Handedness::kLeft),
                         robot_hand_fk(model, q.right, Handedness::kRight));
}

std::vector<RetargetPair> build_retarget_dataset(const RobotHandModel& model,
                                                 std::span<const BimanualCommand> frames) {
  std::vector<RetargetPair> pairs;
  pairs.reserve(frames.size());
  for (const BimanualCommand& q : frames) {
    const BimanualCommand clamped{clamp_command(model, q.left), clamp_command(model, q.right)};
    pairs.push_back({robot_fingertip_input(model, clamped), pack_commands(clamped)});
  }
  return pairs;
}

std::vector<BimanualCommand> joint_grid_commands(const RobotHandModel& model, int points_per_joint,
                                                 std::uint64_t seed) {
  if (points_per_joint < 2) throw DataError("grid needs at least 2 points per joint");
  std::size_t count = 1;
  for (int i = 0; i < kRobotActive; ++i) count *= static_cast<std::size_t>(points_per_joint);

  std::vector<RobotHandCommand> grid;
  grid.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    RobotHandCommand q;
    std::size_t rest = n;
    for (int j = 0; j < kRobotActive; ++j) {
      const auto k = static_cast<double>(rest % points_per_joint);
      rest /= points_per_joint;
      const RobotJoint& jt = model.active[j];
      q[j] = jt.lo + (jt.hi - jt.lo) * k / (points_per_joint - 1);
    }
    grid.push_back(q);
  }
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<BimanualCommand> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) out.push_back({grid[n], grid[perm[n]]});
  return out;
}

std::vector<BimanualCommand> stratified_grid_commands(const RobotHandModel& model, int levels,
                                                      std::size_t count, std::uint64_t seed) {
  if (levels < 2) throw DataError("stratified grid needs at least 2 levels");
  std::mt19937_64 rng(seed);
  std::vector<BimanualCommand> out(count);
  std::vector<std::size_t> slot(count);
  for (int h = 0; h < 2; ++h) {
    for (int j = 0; j < kRobotActive; ++j) {
      std::iota(slot.begin(), slot.end(), 0);
      std::shuffle(slot.begin(), slot.end(), rng);
      const RobotJoint& jt = model.active[j];
      for (std::size_t n = 0; n < count; ++n) {
        const auto k = static_cast<double>(slot[n] % static_cast<std::size_t>(levels));
        const double v = jt.lo + (jt.hi - jt.lo) * k / (levels - 1);
        (h == 0 ? out[n].left : out[n].right)[j] = v;
      }
    }
  }
  return out;
}

std::vector<BimanualCommand> random_commands(const RobotHandModel& model, std::size_t count,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto sample = [&] {
    RobotHandCommand q;
    for (int j = 0; j < kRobotActive; ++j) {
      q[j] = model.active[j].lo + (model.active[j].hi - model.active[j].lo) * u(rng);
    }
    return q;
  };
  std::vector<BimanualCommand> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    BimanualCommand b;
    b.left = sample();
    b.right = sample();
    out.push_back(b);
  }
  return out;
}

namespace {

template <int N>
void standardize_stats(const nn::Matrix& data, Eigen::Matrix<double, N, 1>& mean,
                       Eigen::Matrix<double, N, 1>& scale) {
  mean = data.rowwise().mean();
  const nn::Matrix centered = data.colwise() - nn::Vector(mean);
  const nn::Vector var = centered.array().square().rowwise().mean();
  for (int i = 0; i < N; ++i) {
    const double s = std::sqrt(var[i]);
    scale[i] = s > 1e-8 ? s : 1.0;
  }
}

}  // namespace

RetargeterWeights train_retargeter(std::span<const RetargetPair> pairs, const RetargetHyper& hyper) {
  if (pairs.empty()) throw EmptyDataset("train_retargeter: no training pairs");
  if (hyper.epochs < 0 || hyper.batch < 1 || !(hyper.lr > 0.0)) {
    throw DataError("train_retargeter: invalid hyperparameters");
  }
  const auto n = static_cast<Eigen::Index>(pairs.size());
  nn::Matrix inputs(kRetargetInput, n), targets(kRetargetOutput, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.col(i) = pairs[static_cast<std::size_t>(i)].input;
    targets.col(i) = pairs[static_cast<std::size_t>(i)].target;
  }
  if (!inputs.allFinite() || !targets.allFinite()) throw DataError("train_retargeter: non-finite data");

  RetargeterWeights w;
  standardize_stats(inputs, w.input_mean, w.input_scale);
  standardize_stats(targets, w.output_mean, w.output_scale);
  const nn::Matrix x = (inputs.colwise() - nn::Vector(w.input_mean)).array().colwise() /
                       w.input_scale.array();
  const nn::Matrix y = (targets.colwise() - nn::Vector(w.output_mean)).array().colwise() /
                       w.output_scale.array();

  std::mt19937_64 rng(hyper.seed);
  std::vector<int> sizes = {kRetargetInput};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(kRetargetOutput);
  w.mlp = nn::make_mlp(sizes, nn::Activation::kTanh, nn::Activation::kLinear, rng);

  nn::AdamState adam;
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = hyper.lr;
  nn::Mlp grads = nn::zeros_like(w.mlp);
  nn::ParamList params = nn::parameters(w.mlp);
  nn::ParamList grad_list = nn::parameters(grads);
  nn::MlpTape tape;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index batch = std::min<Eigen::Index>(hyper.batch, n);
  nn::Matrix xb, yb;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index b = std::min(batch, n - start);
      xb.resize(kRetargetInput, b);
      yb.resize(kRetargetOutput, b);
      for (Eigen::Index k = 0; k < b; ++k) {
        xb.col(k) = x.col(order[static_cast<std::size_t>(start + k)]);
        yb.col(k) = y.col(order[static_cast<std::size_t>(start + k)]);
      }
      const nn::Matrix pred = nn::mlp_forward(w.mlp, xb, &tape);
      const nn::Matrix g = (pred - yb) * (2.0 / static_cast<double>(b * kRetargetOutput));
      for (auto& l : grads.layers) {
        l.weight.setZero();
        l.bias.setZero();
      }
      nn::mlp_backward(w.mlp, tape, g, grads);
      nn::adam_step(adam, params, grad_list, adam_cfg);
    }
  }

  const nn::Matrix pred = nn::mlp_forward(w.mlp, x);
  const nn::Matrix err = (pred - y).array().colwise() * w.output_scale.array();
  w.final_loss = err.squaredNorm() / static_cast<double>(err.size());
  if (!std::isfinite(w.final_loss)) throw NonFinite("train_retargeter: training diverged");
  return w;
}

RetargetOutput retargeter_forward(const RetargeterWeights& w, const RetargetInput& input) {
  const nn::Matrix x = ((input - w.input_mean).array() / w.input_scale.array()).matrix();
  const nn::Matrix y = nn::mlp_forward(w.mlp, x);
  return (y.col(0).array() * w.output_scale.array()).matrix() + w.output_mean;
}

BimanualCommand apply_retargeter(const RetargeterWeights& w, const RobotHandModel& model,
                                 const RetargetInput& fingertip_input) {
  const BimanualCommand raw = unpack_commands(retargeter_forward(w, fingertip_input));
  return {clamp_command(model, raw.left), clamp_command(model, raw.right)};
}

BimanualCommand apply_retargeter(const RetargeterWeights& w, const RobotHandModel& model,
                                 const HandKeypoints& left, const HandKeypoints& right) {
  return apply_retargeter(w, model, pack_fingertips(fingertips(left), fingertips(right)));
}

double evaluate_retargeter(const RetargeterWeights& w, std::span<const RetargetPair> pairs,
                           const TipsForward& forward) {
  if (pairs.empty()) throw EmptyDataset("evaluate_retargeter: no pairs");
  double total = 0.0;
  for (const RetargetPair& p : pairs) {
    const RetargetInput tips = forward(retargeter_forward(w, p.input));
    for (int t = 0; t < 2 * kNumFingers; ++t) {
      total += (tips.segment<3>(3 * t) - p.input.segment<3>(3 * t)).norm();
    }
  }
  return total / static_cast<double>(pairs.size() * 2 * kNumFingers);
}

double evaluate_retargeter(const RetargeterWeights& w, const RobotHandModel& model,
                           std::span<const RetargetPair> pairs) {
  return evaluate_retargeter(w, pairs, [&](const RetargetOutput& out) {
    const BimanualCommand q = unpack_commands(out);
    return robot_fingertip_input(model, {clamp_command(model, q.left), clamp_command(model, q.right)});
  });
}

namespace {

template <int N>
io::Json vec_json(const Eigen::Matrix<double, N, 1>& v) {
  return std::vector<double>(v.data(), v.data() + N);
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const io::Json& j, std::string_view key) {
  const auto d = io::require_numbers(j, key, "", N);
  return Eigen::Map<const Eigen::Matrix<double, N, 1>>(d.data());
}

}  // namespace

io::Json to_json(const RetargeterWeights& w) {
  return {{"schema", "erw-1"},
          {"input_layout", "left thumb..pinky xyz, right thumb..pinky xyz (wrist frames, m)"},
          {"output_layout", "left 6 active, right 6 active (rad)"},
          {"sizes", w.mlp.sizes()},
          {"input_mean", vec_json(w.input_mean)},
          {"input_scale", vec_json(w.input_scale)},
          {"output_mean", vec_json(w.output_mean)},
          {"output_scale", vec_json(w.output_scale)},
          {"final_loss", w.final_loss},
          {"mlp", nn::to_json(w.mlp)}};
}

RetargeterWeights retargeter_from_json(const io::Json& j) {
  io::check_schema(j, "erw-1", "");
  RetargeterWeights w;
  w.mlp = nn::mlp_from_json(io::require(j, "mlp", ""), "mlp");
  if (w.mlp.input_size() != kRetargetInput || w.mlp.output_size() != kRetargetOutput) {
    throw ShapeMismatch("retargeter network must map 30 inputs to 12 outputs");
  }
  w.input_mean = vec_from<kRetargetInput>(j, "input_mean");
  w.input_scale = vec_from<kRetargetInput>(j, "input_scale");
  w.output_mean = vec_from<kRetargetOutput>(j, "output_mean");
  w.output_scale = vec_from<kRetargetOutput>(j, "output_scale");
  w.final_loss = io::require_number(j, "final_loss", "");
  return w;
}

RetargeterWeights load_retargeter(const std::filesystem::path& path) {
  return retargeter_from_json(io::read_json_file(path));
}

}  // namespace egobridge
