#pragma once

// Desk-scale action head. Tokens are [proprio MLP embedding, instruction
// embedding, 30 query embeddings + learned positions]; the encoder output
// at the query positions is projected linearly to one 48-value step each.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "egobridge/action_chunk.hpp"
#include "egobridge/nn.hpp"
#include "egobridge/pipeline.hpp"

namespace egobridge {

struct HeadConfig {
  nn::EncoderSpec encoder;  // 4 layers, 128 hidden, 4 heads, ff 512
  int vocab_size = 1;
  int proprio_hidden = 128;  // width of the proprio MLP's hidden layer
  int queries = kHorizon;
};

void validate(const HeadConfig& cfg);

struct HeadWeights {
  HeadConfig config;
  nn::Mlp proprio_mlp;       // 48 -> proprio_hidden -> hidden
  nn::Matrix instruction;    // vocab x hidden
  nn::Matrix queries;        // 30 x hidden
  nn::Matrix query_pos;      // 30 x hidden
  nn::Encoder encoder;
  nn::Matrix out_weight;     // 48 x hidden
  nn::Vector out_bias;       // 48
  std::vector<std::string> vocab;  // optional instruction names, index = id
};

// Output bias starts at zero translation/PCA and the identity rot6D so an
// untrained head already decodes.
HeadWeights make_head(const HeadConfig& cfg, std::mt19937_64& rng);
HeadWeights zeros_like(const HeadWeights& w);
nn::ParamList parameters(HeadWeights& w);

struct HeadTape {
  nn::MlpTape proprio;
  nn::EncoderCache encoder;
  nn::Matrix encoded;  // all tokens after the encoder
};

// Throws UnknownInstruction for an id outside the vocabulary.
ActionChunk head_forward(const HeadWeights& w, const ProprioState& proprio, int instruction_id,
                         HeadTape* tape = nullptr);

// Accumulates parameter gradients into `grads` given dL/dchunk.
void head_backward(const HeadWeights& w, const HeadTape& tape, int instruction_id,
                   const ActionChunk& grad_chunk, HeadWeights& grads);

struct TrainPhase {
  int epochs = 1;
  double lr = 1e-4;
  // From this epoch of the phase on the learning rate is lr_after.
  std::optional<int> drop_epoch;
  double lr_after = 0.0;
};

struct HeadHyper {
  // Pretraining 20 epochs at 1e-4, post-training 115 epochs at 2e-5 dropping
  // to 2e-6 after epoch 100.
  std::vector<TrainPhase> phases = {{20, 1e-4, std::nullopt, 0.0}, {115, 2e-5, 100, 2e-6}};
  int batch = 8;
  std::uint64_t seed = 0;
  nn::LossWeights lambda;
  int max_steps = 0;         // 0 = no cap
  double target_loss = 0.0;  // stop once a step's batch loss falls below this
};

double phase_lr(const TrainPhase& phase, int epoch);

struct HeadTraining {
  HeadWeights weights;
  std::vector<double> loss_curve;  // batch loss before each step
  int steps = 0;
};

// Starts from `init` when given, otherwise from make_head(cfg) seeded by
// hyper.seed. Throws EmptyDataset without samples.
HeadTraining train_head(std::span<const TrainingSample> samples, const HeadConfig& cfg,
                        const HeadHyper& hyper, const HeadWeights* init = nullptr);

// Mean composite loss of the head over samples.
double head_loss(const HeadWeights& w, std::span<const TrainingSample> samples,
                 const nn::LossWeights& lambda = {});

// Mean wrist translation error in meters over samples, steps and hands.
double predict_wrist_error(const HeadWeights& w, std::span<const TrainingSample> samples);

io::Json to_json(const HeadWeights& w);
HeadWeights head_from_json(const io::Json& j);
HeadWeights load_head(const std::filesystem::path& path);

}  // namespace egobridge
