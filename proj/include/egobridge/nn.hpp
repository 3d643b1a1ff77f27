#pragma once

// Small from-scratch differentiable kernel: dense MLPs, a pre-norm
// transformer encoder, the Adam optimizer and the composite action loss.
//
// Gradients use the same types as the weights they belong to, so every
// model exposes one parameter ordering through `parameters()` that both
// the optimizer and the gradient checks rely on.

#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egobridge/action_chunk.hpp"
#include "egobridge/json_io.hpp"

namespace egobridge::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ParamList = std::vector<std::span<double>>;

enum class Activation { kLinear, kTanh, kGelu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

// Row-major {"rows","cols","data"} matrices and plain number arrays.
io::Json matrix_json(const Matrix& m);
Matrix matrix_from_json(const io::Json& j, const std::string& path, int rows, int cols);
io::Json vector_json(const Vector& v);
Vector vector_from_json(const io::Json& j, std::string_view key, const std::string& path, int n);

// ---------------------------------------------------------------------------
// MLP

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kLinear;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  int input_size() const;
  int output_size() const;
  std::vector<int> sizes() const;
};

// Xavier-uniform weights, zero biases. `sizes` includes input and output.
Mlp make_mlp(std::span<const int> sizes, Activation hidden, Activation output,
             std::mt19937_64& rng);
// Same shapes and activations, all parameters zero.
Mlp zeros_like(const Mlp& m);

// Intermediate values kept for the backward pass.
struct MlpTape {
  std::vector<Matrix> inputs;      // per layer, in x batch
  std::vector<Matrix> pre_activations;  // per layer, out x batch
};

// Columns are samples. Throws ShapeMismatch on a wrong input height.
Matrix mlp_forward(const Mlp& w, const Matrix& x, MlpTape* tape = nullptr);

// Accumulates parameter gradients into `grads` and returns dL/dx.
Matrix mlp_backward(const Mlp& w, const MlpTape& tape, const Matrix& grad_y, Mlp& grads);

struct MlpGradient {
  Mlp weights;
  Matrix input;
};
MlpGradient mlp_grad(const Mlp& w, const Matrix& x, const Matrix& grad_y);

ParamList parameters(Mlp& m);
void validate(const Mlp& m);

io::Json to_json(const Mlp& m);
Mlp mlp_from_json(const io::Json& j, const std::string& path);

// ---------------------------------------------------------------------------
// Transformer encoder

struct EncoderSpec {
  int depth = 4;
  int hidden = 128;
  int heads = 4;
  int ff = 512;
};

void validate(const EncoderSpec& s);

struct LayerNorm {
  Vector gamma;
  Vector beta;
};

struct EncoderLayer {
  LayerNorm ln_attn;
  Matrix wq, wk, wv, wo;  // hidden x hidden, applied as x * W^T
  Vector bq, bk, bv, bo;
  LayerNorm ln_ff;
  Matrix w1;  // ff x hidden
  Vector b1;
  Matrix w2;  // hidden x ff
  Vector b2;
};

struct Encoder {
  EncoderSpec spec;
  std::vector<EncoderLayer> layers;
  LayerNorm final_norm;
};

Encoder make_encoder(const EncoderSpec& spec, std::mt19937_64& rng);
Encoder zeros_like(const Encoder& e);

struct LayerNormTape {
  Matrix xhat;  // normalized input, rows are tokens
  Vector rstd;  // per-token 1 / sqrt(var + eps)
};

struct EncoderLayerTape {
  Matrix input;
  LayerNormTape ln_attn;
  Matrix h_attn, q, k, v;
  std::vector<Matrix> probs;  // per head, tokens x tokens
  Matrix attn_concat;
  Matrix mid;
  LayerNormTape ln_ff;
  Matrix h_ff;
  Matrix ff_pre;
  Matrix ff_act;
};

struct EncoderCache {
  std::vector<EncoderLayerTape> layers;
  LayerNormTape final_norm;
};

// Tokens are rows: (count x hidden) in, (count x hidden) out. Pre-norm
// self-attention and GELU feed-forward blocks with residuals, then a final
// layer norm. No positional information is added here.
Matrix encoder_forward(const Encoder& w, const Matrix& tokens, EncoderCache* cache = nullptr);

// Accumulates parameter gradients into `grads`; returns dL/dtokens.
Matrix encoder_backward(const Encoder& w, const EncoderCache& cache, const Matrix& grad_out,
                        Encoder& grads);

ParamList parameters(Encoder& e);

io::Json to_json(const Encoder& e);
Encoder encoder_from_json(const io::Json& j, const std::string& path);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  long step = 0;
};

// One bias-corrected update of every parameter block. State buffers are
// created on the first call; later calls must keep the same block sizes.
void adam_step(AdamState& state, const ParamList& params,
               const std::vector<std::span<const double>>& grads, const AdamConfig& cfg);
void adam_step(AdamState& state, const ParamList& params, const ParamList& grads,
               const AdamConfig& cfg);

// ---------------------------------------------------------------------------
// Composite action loss

struct LossWeights {
  double trans = 20.0;
  double rot = 5.0;
  double joint = 5.0;
};

void validate(const LossWeights& w);

struct LossResult {
  double total = 0.0;
  double trans = 0.0;  // unweighted terms
  double rot = 0.0;
  double joint = 0.0;
  ActionChunk grad;    // dL/dpred
};

// Weighted sum of mean squared wrist-translation error, mean squared
// Frobenius error between decoded wrist rotations, and mean squared PCA
// error. Means run over the 30 steps and both hands. Throws
// DegenerateInput if a rot6D block of either chunk cannot be decoded.
LossResult composite_loss(const ActionChunk& pred, const ActionChunk& gt, const LossWeights& w);

}  // namespace egobridge::nn
