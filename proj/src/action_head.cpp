#include "egobridge/action_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egobridge/errors.hpp"

namespace egobridge {

namespace {

constexpr int kFixedTokens = 2;  // proprio, instruction

std::span<double> span_of(nn::Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(nn::Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

nn::Matrix small_normal(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  nn::Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

void check_instruction(const HeadWeights& w, int id) {
  if (id < 0 || id >= w.config.vocab_size) {
    throw UnknownInstruction("instruction id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(w.config.vocab_size));
  }
}

void check_shapes(const HeadWeights& w) {
  const int d = w.config.encoder.hidden;
  if (w.instruction.rows() != w.config.vocab_size || w.instruction.cols() != d ||
      w.queries.rows() != w.config.queries || w.queries.cols() != d ||
      w.query_pos.rows() != w.config.queries || w.query_pos.cols() != d ||
      w.out_weight.rows() != kStepDim || w.out_weight.cols() != d || w.out_bias.size() != kStepDim ||
      w.proprio_mlp.input_size() != kStepDim || w.proprio_mlp.output_size() != d) {
    throw ShapeMismatch("action head weights do not match their config");
  }
}

}  // namespace

void validate(const HeadConfig& cfg) {
  nn::validate(cfg.encoder);
  if (cfg.queries != kHorizon) {
    throw ShapeMismatch("query token count " + std::to_string(cfg.queries) + " must equal the horizon " +
                        std::to_string(kHorizon));
  }
  if (cfg.vocab_size < 1) throw DataError("instruction vocabulary must not be empty");
  if (cfg.proprio_hidden < 1) throw DataError("proprio_hidden must be positive");
}

HeadWeights make_head(const HeadConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  const int d = cfg.encoder.hidden;
  HeadWeights w;
  w.config = cfg;
  const int sizes[] = {kStepDim, cfg.proprio_hidden, d};
  w.proprio_mlp = nn::make_mlp(sizes, nn::Activation::kGelu, nn::Activation::kLinear, rng);
  w.instruction = small_normal(cfg.vocab_size, d, 1.0, rng);
  w.queries = small_normal(cfg.queries, d, 1.0, rng);
  w.query_pos = small_normal(cfg.queries, d, 0.02, rng);
  w.encoder = nn::make_encoder(cfg.encoder, rng);
  w.out_weight = small_normal(kStepDim, d, 0.02, rng);
  w.out_bias = nn::Vector::Zero(kStepDim);
  for (int h = 0; h < kNumHands; ++h) {
    w.out_bias[h * kHandActionDim + kRotOffset + 0] = 1.0;
    w.out_bias[h * kHandActionDim + kRotOffset + 4] = 1.0;
  }
  return w;
}

HeadWeights zeros_like(const HeadWeights& w) {
  HeadWeights z;
  z.config = w.config;
  z.proprio_mlp = nn::zeros_like(w.proprio_mlp);
  z.instruction = nn::Matrix::Zero(w.instruction.rows(), w.instruction.cols());
  z.queries = nn::Matrix::Zero(w.queries.rows(), w.queries.cols());
  z.query_pos = nn::Matrix::Zero(w.query_pos.rows(), w.query_pos.cols());
  z.encoder = nn::zeros_like(w.encoder);
  z.out_weight = nn::Matrix::Zero(w.out_weight.rows(), w.out_weight.cols());
  z.out_bias = nn::Vector::Zero(w.out_bias.size());
  z.vocab = w.vocab;
  return z;
}

nn::ParamList parameters(HeadWeights& w) {
  nn::ParamList p = nn::parameters(w.proprio_mlp);
  p.push_back(span_of(w.instruction));
  p.push_back(span_of(w.queries));
  p.push_back(span_of(w.query_pos));
  for (auto s : nn::parameters(w.encoder)) p.push_back(s);
  p.push_back(span_of(w.out_weight));
  p.push_back(span_of(w.out_bias));
  return p;
}

ActionChunk head_forward(const HeadWeights& w, const ProprioState& proprio, int instruction_id,
                         HeadTape* tape) {
  check_instruction(w, instruction_id);
  check_shapes(w);
  const int d = w.config.encoder.hidden;
  const int q = w.config.queries;
  nn::Matrix tokens(kFixedTokens + q, d);
  const nn::Matrix x = proprio;
  tokens.row(0) = nn::mlp_forward(w.proprio_mlp, x, tape ? &tape->proprio : nullptr).transpose();
  tokens.row(1) = w.instruction.row(instruction_id);
  tokens.bottomRows(q) = w.queries + w.query_pos;
  nn::Matrix encoded = nn::encoder_forward(w.encoder, tokens, tape ? &tape->encoder : nullptr);

  ActionChunk out;
  out.values = (encoded.bottomRows(q) * w.out_weight.transpose()).rowwise() + w.out_bias.transpose();
  if (tape) tape->encoded = std::move(encoded);
  return out;
}

void head_backward(const HeadWeights& w, const HeadTape& tape, int instruction_id,
                   const ActionChunk& grad_chunk, HeadWeights& grads) {
  const int q = w.config.queries;
  const nn::Matrix gy = grad_chunk.values;  // q x 48
  const auto query_out = tape.encoded.bottomRows(q);
  grads.out_weight.noalias() += gy.transpose() * query_out;
  grads.out_bias += gy.colwise().sum().transpose();

  nn::Matrix g_encoded = nn::Matrix::Zero(tape.encoded.rows(), tape.encoded.cols());
  g_encoded.bottomRows(q).noalias() = gy * w.out_weight;
  const nn::Matrix g_tokens = nn::encoder_backward(w.encoder, tape.encoder, g_encoded, grads.encoder);

  grads.queries += g_tokens.bottomRows(q);
  grads.query_pos += g_tokens.bottomRows(q);
  grads.instruction.row(instruction_id) += g_tokens.row(1);
  nn::mlp_backward(w.proprio_mlp, tape.proprio, g_tokens.row(0).transpose(), grads.proprio_mlp);
}

double phase_lr(const TrainPhase& phase, int epoch) {
  return phase.drop_epoch && epoch >= *phase.drop_epoch ? phase.lr_after : phase.lr;
}

HeadTraining train_head(std::span<const TrainingSample> samples, const HeadConfig& cfg,
                        const HeadHyper& hyper, const HeadWeights* init) {
  if (samples.empty()) throw EmptyDataset("train_head: no training samples");
  if (hyper.batch < 1) throw DataError("train_head: batch must be positive");
  nn::validate(hyper.lambda);
  for (const TrainingSample& s : samples) {
    if (s.instruction_id < 0 || s.instruction_id >= cfg.vocab_size) {
      throw UnknownInstruction("sample instruction id " + std::to_string(s.instruction_id) +
                               " outside vocabulary of " + std::to_string(cfg.vocab_size));
    }
  }

  std::mt19937_64 rng(hyper.seed);
  HeadTraining out;
  out.weights = init ? *init : make_head(cfg, rng);
  check_shapes(out.weights);
  HeadWeights& w = out.weights;
  nn::ParamList params = parameters(w);
  nn::AdamState adam;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(hyper.batch), samples.size());
  HeadTape tape;

  for (const TrainPhase& phase : hyper.phases) {
    nn::AdamConfig adam_cfg;
    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
      adam_cfg.lr = phase_lr(phase, epoch);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        const double scale = 1.0 / static_cast<double>(end - start);
        HeadWeights grads = zeros_like(w);
        double loss = 0.0;
        for (std::size_t i = start; i < end; ++i) {
          const TrainingSample& s = samples[order[i]];
          const ActionChunk pred = head_forward(w, s.proprio, s.instruction_id, &tape);
          nn::LossResult r = nn::composite_loss(pred, s.target, hyper.lambda);
          loss += scale * r.total;
          r.grad.values *= scale;
          head_backward(w, tape, s.instruction_id, r.grad, grads);
        }
        if (!std::isfinite(loss)) throw NonFinite("train_head: loss became non-finite");
        out.loss_curve.push_back(loss);
        if (loss < hyper.target_loss) return out;
        if (hyper.max_steps > 0 && out.steps >= hyper.max_steps) return out;
        nn::adam_step(adam, params, parameters(grads), adam_cfg);
        ++out.steps;
      }
    }
  }
  return out;
}

double head_loss(const HeadWeights& w, std::span<const TrainingSample> samples,
                 const nn::LossWeights& lambda) {
  if (samples.empty()) throw EmptyDataset("head_loss: no samples");
  double sum = 0.0;
  for (const TrainingSample& s : samples) {
    sum += nn::composite_loss(head_forward(w, s.proprio, s.instruction_id), s.target, lambda).total;
  }
  return sum / static_cast<double>(samples.size());
}

double predict_wrist_error(const HeadWeights& w, std::span<const TrainingSample> samples) {
  if (samples.empty()) throw EmptyDataset("predict_wrist_error: no samples");
  double sum = 0.0;
  for (const TrainingSample& s : samples) {
    const ActionChunk pred = head_forward(w, s.proprio, s.instruction_id);
    for (int k = 0; k < kHorizon; ++k) {
      for (int h = 0; h < kNumHands; ++h) sum += (pred.translation(k, h) - s.target.translation(k, h)).norm();
    }
  }
  return sum / static_cast<double>(samples.size() * kHorizon * kNumHands);
}

io::Json to_json(const HeadWeights& w) {
  const HeadConfig& c = w.config;
  return {{"schema", "eah-1"},
          {"config",
           {{"vocab_size", c.vocab_size},
            {"proprio_hidden", c.proprio_hidden},
            {"queries", c.queries},
            {"encoder",
             {{"depth", c.encoder.depth}, {"hidden", c.encoder.hidden}, {"heads", c.encoder.heads},
              {"ff", c.encoder.ff}}}}},
          {"vocab", w.vocab},
          {"proprio_mlp", nn::to_json(w.proprio_mlp)},
          {"instruction", nn::matrix_json(w.instruction)},
          {"queries", nn::matrix_json(w.queries)},
          {"query_pos", nn::matrix_json(w.query_pos)},
          {"encoder", nn::to_json(w.encoder)},
          {"out_weight", nn::matrix_json(w.out_weight)},
          {"out_bias", nn::vector_json(w.out_bias)}};
}

HeadWeights head_from_json(const io::Json& j) {
  io::check_schema(j, "eah-1", "");
  const io::Json& cj = io::require(j, "config", "");
  HeadWeights w;
  HeadConfig& c = w.config;
  c.vocab_size = static_cast<int>(io::require_number(cj, "vocab_size", "config"));
  c.proprio_hidden = static_cast<int>(io::require_number(cj, "proprio_hidden", "config"));
  c.queries = static_cast<int>(io::require_number(cj, "queries", "config"));
  const io::Json& ej = io::require(cj, "encoder", "config");
  c.encoder.depth = static_cast<int>(io::require_number(ej, "depth", "config.encoder"));
  c.encoder.hidden = static_cast<int>(io::require_number(ej, "hidden", "config.encoder"));
  c.encoder.heads = static_cast<int>(io::require_number(ej, "heads", "config.encoder"));
  c.encoder.ff = static_cast<int>(io::require_number(ej, "ff", "config.encoder"));
  validate(c);
  const int d = c.encoder.hidden;

  if (j.contains("vocab")) {
    const io::Json& v = j.at("vocab");
    if (!v.is_array()) throw SchemaError("vocab: expected an array of names");
    for (const auto& name : v) {
      if (!name.is_string()) throw SchemaError("vocab: expected an array of names");
      w.vocab.push_back(name.get<std::string>());
    }
    if (!w.vocab.empty() && static_cast<int>(w.vocab.size()) != c.vocab_size) {
      throw ShapeMismatch("vocab: " + std::to_string(w.vocab.size()) + " names for vocab_size " +
                          std::to_string(c.vocab_size));
    }
  }
  w.proprio_mlp = nn::mlp_from_json(io::require(j, "proprio_mlp", ""), "proprio_mlp");
  w.instruction = nn::matrix_from_json(io::require(j, "instruction", ""), "instruction", c.vocab_size, d);
  w.queries = nn::matrix_from_json(io::require(j, "queries", ""), "queries", c.queries, d);
  w.query_pos = nn::matrix_from_json(io::require(j, "query_pos", ""), "query_pos", c.queries, d);
  w.encoder = nn::encoder_from_json(io::require(j, "encoder", ""), "encoder");
  w.out_weight = nn::matrix_from_json(io::require(j, "out_weight", ""), "out_weight", kStepDim, d);
  w.out_bias = nn::vector_from_json(j, "out_bias", "", kStepDim);
  if (w.encoder.spec.depth != c.encoder.depth || w.encoder.spec.hidden != d ||
      w.encoder.spec.heads != c.encoder.heads || w.encoder.spec.ff != c.encoder.ff) {
    throw ShapeMismatch("encoder: spec differs from config.encoder");
  }
  check_shapes(w);
  return w;
}

HeadWeights load_head(const std::filesystem::path& path) {
  return head_from_json(io::read_json_file(path));
}

}  // namespace egobridge
