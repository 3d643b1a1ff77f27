#include "egobridge/nn.hpp"

#include <cmath>
#include <numbers>

#include "egobridge/errors.hpp"

namespace egobridge::nn {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);

double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluK * (u + kGeluC * u * u * u))); }

double gelu_grad(double u) {
  const double t = std::tanh(kGeluK * (u + kGeluC * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * u * u);
}

Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::kLinear: return z;
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kGelu: return z.unaryExpr([](double u) { return gelu(u); });
  }
  return z;
}

// dL/dz given dL/da and the pre-activation z.
Matrix activate_backward(Activation a, const Matrix& z, const Matrix& grad) {
  switch (a) {
    case Activation::kLinear: return grad;
    case Activation::kTanh: {
      const Matrix t = z.array().tanh().matrix();
      return (grad.array() * (1.0 - t.array().square())).matrix();
    }
    case Activation::kGelu:
      return (grad.array() * z.unaryExpr([](double u) { return gelu_grad(u); }).array()).matrix();
  }
  return grad;
}

Matrix xavier(int out, int in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(out, in);
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) w(r, c) = dist(rng);
  }
  return w;
}

std::span<double> span_of(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Rows of `x` are normalized independently.
Matrix layer_norm(const LayerNorm& ln, const Matrix& x, LayerNormTape* tape) {
  const int d = static_cast<int>(x.cols());
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Vector var = centered.array().square().rowwise().sum() / d;
  const Vector rstd = (var.array() + kLayerNormEps).rsqrt();
  const Matrix xhat = centered.array().colwise() * rstd.array();
  Matrix y = (xhat.array().rowwise() * ln.gamma.transpose().array()).matrix();
  y.rowwise() += ln.beta.transpose();
  if (tape) {
    tape->xhat = xhat;
    tape->rstd = rstd;
  }
  return y;
}

Matrix layer_norm_backward(const LayerNorm& ln, const LayerNormTape& tape, const Matrix& grad_y,
                           LayerNorm& grads) {
  grads.gamma += (grad_y.array() * tape.xhat.array()).colwise().sum().transpose().matrix();
  grads.beta += grad_y.colwise().sum().transpose();
  const Matrix gxhat = (grad_y.array().rowwise() * ln.gamma.transpose().array()).matrix();
  const Vector mean_g = gxhat.rowwise().mean();
  const Vector mean_gx = (gxhat.array() * tape.xhat.array()).rowwise().mean();
  Matrix gx = gxhat.colwise() - mean_g;
  gx -= (tape.xhat.array().colwise() * mean_gx.array()).matrix();
  return (gx.array().colwise() * tape.rstd.array()).matrix();
}

// x * W^T + b, with tokens as rows.
Matrix affine_rows(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

void softmax_rows(Matrix& s) {
  for (int r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

LayerNorm make_layer_norm(int d) { return {Vector::Ones(d), Vector::Zero(d)}; }
LayerNorm zero_layer_norm(int d) { return {Vector::Zero(d), Vector::Zero(d)}; }

io::Json layer_norm_json(const LayerNorm& ln) {
  return {{"gamma", vector_json(ln.gamma)}, {"beta", vector_json(ln.beta)}};
}

LayerNorm layer_norm_from_json(const io::Json& j, const std::string& path, int d) {
  return {vector_from_json(j, "gamma", path, d), vector_from_json(j, "beta", path, d)};
}

}  // namespace

io::Json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const io::Json& j, const std::string& path, int rows, int cols) {
  const int r = static_cast<int>(io::require_number(j, "rows", path));
  const int c = static_cast<int>(io::require_number(j, "cols", path));
  if (r != rows || c != cols) {
    throw ShapeMismatch(path + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                        ", got " + std::to_string(r) + "x" + std::to_string(c));
  }
  const auto data = io::require_numbers(j, "data", path, static_cast<std::size_t>(r) * c);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < c; ++k) m(i, k) = data[static_cast<std::size_t>(i) * c + k];
  }
  return m;
}

io::Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const io::Json& j, std::string_view key, const std::string& path, int n) {
  const auto data = io::require_numbers(j, key, path, static_cast<std::size_t>(n));
  return Eigen::Map<const Vector>(data.data(), n);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kGelu: return "gelu";
  }
  return "linear";
}

Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  if (s == "gelu") return Activation::kGelu;
  throw SchemaError("unknown activation \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// MLP

int Mlp::input_size() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int Mlp::output_size() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(input_size());
  for (const auto& l : layers) s.push_back(static_cast<int>(l.weight.rows()));
  return s;
}

Mlp make_mlp(std::span<const int> sizes, Activation hidden, Activation output,
             std::mt19937_64& rng) {
  if (sizes.size() < 2) throw ShapeMismatch("an MLP needs at least input and output sizes");
  Mlp m;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] <= 0 || sizes[i + 1] <= 0) throw ShapeMismatch("layer sizes must be positive");
    DenseLayer layer;
    layer.weight = xavier(sizes[i + 1], sizes[i], rng);
    layer.bias = Vector::Zero(sizes[i + 1]);
    layer.activation = (i + 2 == sizes.size()) ? output : hidden;
    m.layers.push_back(std::move(layer));
  }
  return m;
}

Mlp zeros_like(const Mlp& m) {
  Mlp z = m;
  for (auto& l : z.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return z;
}

Matrix mlp_forward(const Mlp& w, const Matrix& x, MlpTape* tape) {
  if (x.rows() != w.input_size()) {
    throw ShapeMismatch("mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                        std::to_string(w.input_size()));
  }
  if (tape) {
    tape->inputs.clear();
    tape->pre_activations.clear();
  }
  Matrix a = x;
  for (const auto& layer : w.layers) {
    Matrix z = layer.weight * a;
    z.colwise() += layer.bias;
    if (tape) {
      tape->inputs.push_back(a);
      tape->pre_activations.push_back(z);
    }
    a = activate(layer.activation, z);
  }
  return a;
}

Matrix mlp_backward(const Mlp& w, const MlpTape& tape, const Matrix& grad_y, Mlp& grads) {
  if (tape.inputs.size() != w.layers.size() || grads.layers.size() != w.layers.size()) {
    throw ShapeMismatch("mlp tape or gradient does not match the network");
  }
  if (grad_y.rows() != w.output_size() || grad_y.cols() != tape.inputs.front().cols()) {
    throw ShapeMismatch("mlp output gradient has the wrong shape");
  }
  Matrix g = grad_y;
  for (std::size_t i = w.layers.size(); i-- > 0;) {
    const DenseLayer& layer = w.layers[i];
    const Matrix gz = activate_backward(layer.activation, tape.pre_activations[i], g);
    grads.layers[i].weight.noalias() += gz * tape.inputs[i].transpose();
    grads.layers[i].bias += gz.rowwise().sum();
    g = layer.weight.transpose() * gz;
  }
  return g;
}

MlpGradient mlp_grad(const Mlp& w, const Matrix& x, const Matrix& grad_y) {
  MlpTape tape;
  mlp_forward(w, x, &tape);
  MlpGradient out{zeros_like(w), Matrix()};
  out.input = mlp_backward(w, tape, grad_y, out.weights);
  return out;
}

ParamList parameters(Mlp& m) {
  ParamList p;
  for (auto& l : m.layers) {
    p.push_back(span_of(l.weight));
    p.push_back(span_of(l.bias));
  }
  return p;
}

void validate(const Mlp& m) {
  if (m.layers.empty()) throw ShapeMismatch("mlp has no layers");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    if (l.bias.size() != l.weight.rows()) throw ShapeMismatch("mlp bias size mismatch");
    if (i > 0 && l.weight.cols() != m.layers[i - 1].weight.rows()) {
      throw ShapeMismatch("mlp layer " + std::to_string(i) + " input does not match previous output");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw NonFinite("mlp layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

io::Json to_json(const Mlp& m) {
  io::Json layers = io::Json::array();
  for (const auto& l : m.layers) {
    io::Json lj = matrix_json(l.weight);
    lj["bias"] = vector_json(l.bias);
    lj["activation"] = to_string(l.activation);
    layers.push_back(lj);
  }
  return {{"schema", "enn-1"}, {"kind", "mlp"}, {"sizes", m.sizes()}, {"layers", layers}};
}

Mlp mlp_from_json(const io::Json& j, const std::string& path) {
  io::check_schema(j, "enn-1", path);
  const auto sizes = io::require_numbers(j, "sizes", path, 0);
  const io::Json& layers = io::require(j, "layers", path);
  if (!layers.is_array() || sizes.size() != layers.size() + 1) {
    throw ShapeMismatch(path + ": layer count does not match sizes");
  }
  Mlp m;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string lp = path + ".layers[" + std::to_string(i) + "]";
    DenseLayer l;
    const int out = static_cast<int>(sizes[i + 1]);
    l.weight = matrix_from_json(layers[i], lp, out, static_cast<int>(sizes[i]));
    l.bias = vector_from_json(layers[i], "bias", lp, out);
    l.activation = parse_activation(io::require_string(layers[i], "activation", lp));
    m.layers.push_back(std::move(l));
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------
// Encoder

void validate(const EncoderSpec& s) {
  if (s.depth < 1 || s.hidden < 1 || s.heads < 1 || s.ff < 1) {
    throw ShapeMismatch("encoder dimensions must be positive");
  }
  if (s.hidden % s.heads != 0) throw ShapeMismatch("encoder hidden size must be divisible by heads");
}

Encoder make_encoder(const EncoderSpec& spec, std::mt19937_64& rng) {
  validate(spec);
  const int d = spec.hidden;
  Encoder e;
  e.spec = spec;
  for (int i = 0; i < spec.depth; ++i) {
    EncoderLayer l;
    l.ln_attn = make_layer_norm(d);
    l.wq = xavier(d, d, rng);
    l.wk = xavier(d, d, rng);
    l.wv = xavier(d, d, rng);
    l.wo = xavier(d, d, rng);
    l.bq = l.bk = l.bv = l.bo = Vector::Zero(d);
    l.ln_ff = make_layer_norm(d);
    l.w1 = xavier(spec.ff, d, rng);
    l.b1 = Vector::Zero(spec.ff);
    l.w2 = xavier(d, spec.ff, rng);
    l.b2 = Vector::Zero(d);
    e.layers.push_back(std::move(l));
  }
  e.final_norm = make_layer_norm(d);
  return e;
}

Encoder zeros_like(const Encoder& e) {
  Encoder z = e;
  const int d = e.spec.hidden;
  for (auto& l : z.layers) {
    l.ln_attn = zero_layer_norm(d);
    l.ln_ff = zero_layer_norm(d);
    for (Matrix* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) m->setZero();
    for (Vector* v : {&l.bq, &l.bk, &l.bv, &l.bo, &l.b1, &l.b2}) v->setZero();
  }
  z.final_norm = zero_layer_norm(d);
  return z;
}

Matrix encoder_forward(const Encoder& w, const Matrix& tokens, EncoderCache* cache) {
  const int d = w.spec.hidden;
  if (tokens.cols() != d) {
    throw ShapeMismatch("encoder tokens have width " + std::to_string(tokens.cols()) +
                        ", expected " + std::to_string(d));
  }
  if (tokens.rows() < 1) throw ShapeMismatch("encoder needs at least one token");
  const int heads = w.spec.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int n = static_cast<int>(tokens.rows());

  if (cache) cache->layers.assign(w.layers.size(), {});
  Matrix x = tokens;
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const EncoderLayer& l = w.layers[li];
    EncoderLayerTape local;
    EncoderLayerTape& t = cache ? cache->layers[li] : local;
    t.input = x;
    t.h_attn = layer_norm(l.ln_attn, x, &t.ln_attn);
    t.q = affine_rows(t.h_attn, l.wq, l.bq);
    t.k = affine_rows(t.h_attn, l.wk, l.bk);
    t.v = affine_rows(t.h_attn, l.wv, l.bv);
    t.attn_concat.resize(n, d);
    t.probs.assign(heads, Matrix());
    for (int h = 0; h < heads; ++h) {
      Matrix s = t.q.middleCols(h * dh, dh) * t.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(s);
      t.attn_concat.middleCols(h * dh, dh) = s * t.v.middleCols(h * dh, dh);
      t.probs[h] = std::move(s);
    }
    t.mid = x + affine_rows(t.attn_concat, l.wo, l.bo);
    t.h_ff = layer_norm(l.ln_ff, t.mid, &t.ln_ff);
    t.ff_pre = affine_rows(t.h_ff, l.w1, l.b1);
    t.ff_act = activate(Activation::kGelu, t.ff_pre);
    x = t.mid + affine_rows(t.ff_act, l.w2, l.b2);
  }
  return layer_norm(w.final_norm, x, cache ? &cache->final_norm : nullptr);
}

Matrix encoder_backward(const Encoder& w, const EncoderCache& cache, const Matrix& grad_out,
                        Encoder& grads) {
  if (cache.layers.size() != w.layers.size() || grads.layers.size() != w.layers.size()) {
    throw ShapeMismatch("encoder cache or gradient does not match the network");
  }
  if (grad_out.cols() != w.spec.hidden || grad_out.rows() != cache.final_norm.xhat.rows()) {
    throw ShapeMismatch("encoder output gradient has the wrong shape");
  }
  const int d = w.spec.hidden;
  const int heads = w.spec.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix gx = layer_norm_backward(w.final_norm, cache.final_norm, grad_out, grads.final_norm);
  for (std::size_t li = w.layers.size(); li-- > 0;) {
    const EncoderLayer& l = w.layers[li];
    const EncoderLayerTape& t = cache.layers[li];
    EncoderLayer& g = grads.layers[li];

    // Feed-forward block.
    const Matrix& gf = gx;
    g.w2.noalias() += gf.transpose() * t.ff_act;
    g.b2 += gf.colwise().sum().transpose();
    const Matrix gpre = activate_backward(Activation::kGelu, t.ff_pre, gf * l.w2);
    g.w1.noalias() += gpre.transpose() * t.h_ff;
    g.b1 += gpre.colwise().sum().transpose();
    Matrix gmid = gx + layer_norm_backward(l.ln_ff, t.ln_ff, gpre * l.w1, g.ln_ff);

    // Attention block.
    g.wo.noalias() += gmid.transpose() * t.attn_concat;
    g.bo += gmid.colwise().sum().transpose();
    const Matrix go = gmid * l.wo;
    Matrix gq(t.q.rows(), d), gk(t.k.rows(), d), gv(t.v.rows(), d);
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = t.probs[h];
      const auto goh = go.middleCols(h * dh, dh);
      const Matrix gp = goh * t.v.middleCols(h * dh, dh).transpose();
      gv.middleCols(h * dh, dh) = p.transpose() * goh;
      const Vector row_dot = (gp.array() * p.array()).rowwise().sum();
      const Matrix gs = (p.array() * (gp.colwise() - row_dot).array()).matrix() * scale;
      gq.middleCols(h * dh, dh) = gs * t.k.middleCols(h * dh, dh);
      gk.middleCols(h * dh, dh) = gs.transpose() * t.q.middleCols(h * dh, dh);
    }
    g.wq.noalias() += gq.transpose() * t.h_attn;
    g.wk.noalias() += gk.transpose() * t.h_attn;
    g.wv.noalias() += gv.transpose() * t.h_attn;
    g.bq += gq.colwise().sum().transpose();
    g.bk += gk.colwise().sum().transpose();
    g.bv += gv.colwise().sum().transpose();
    const Matrix gh = gq * l.wq + gk * l.wk + gv * l.wv;
    gx = gmid + layer_norm_backward(l.ln_attn, t.ln_attn, gh, g.ln_attn);
  }
  return gx;
}

ParamList parameters(Encoder& e) {
  ParamList p;
  for (auto& l : e.layers) {
    p.push_back(span_of(l.ln_attn.gamma));
    p.push_back(span_of(l.ln_attn.beta));
    p.push_back(span_of(l.wq));
    p.push_back(span_of(l.bq));
    p.push_back(span_of(l.wk));
    p.push_back(span_of(l.bk));
    p.push_back(span_of(l.wv));
    p.push_back(span_of(l.bv));
    p.push_back(span_of(l.wo));
    p.push_back(span_of(l.bo));
    p.push_back(span_of(l.ln_ff.gamma));
    p.push_back(span_of(l.ln_ff.beta));
    p.push_back(span_of(l.w1));
    p.push_back(span_of(l.b1));
    p.push_back(span_of(l.w2));
    p.push_back(span_of(l.b2));
  }
  p.push_back(span_of(e.final_norm.gamma));
  p.push_back(span_of(e.final_norm.beta));
  return p;
}

io::Json to_json(const Encoder& e) {
  io::Json layers = io::Json::array();
  for (const auto& l : e.layers) {
    layers.push_back({{"ln_attn", layer_norm_json(l.ln_attn)},
                      {"wq", matrix_json(l.wq)}, {"bq", vector_json(l.bq)},
                      {"wk", matrix_json(l.wk)}, {"bk", vector_json(l.bk)},
                      {"wv", matrix_json(l.wv)}, {"bv", vector_json(l.bv)},
                      {"wo", matrix_json(l.wo)}, {"bo", vector_json(l.bo)},
                      {"ln_ff", layer_norm_json(l.ln_ff)},
                      {"w1", matrix_json(l.w1)}, {"b1", vector_json(l.b1)},
                      {"w2", matrix_json(l.w2)}, {"b2", vector_json(l.b2)}});
  }
  return {{"schema", "enn-1"},
          {"kind", "encoder"},
          {"spec",
           {{"depth", e.spec.depth}, {"hidden", e.spec.hidden}, {"heads", e.spec.heads},
            {"ff", e.spec.ff}}},
          {"layers", layers},
          {"final_norm", layer_norm_json(e.final_norm)}};
}

Encoder encoder_from_json(const io::Json& j, const std::string& path) {
  io::check_schema(j, "enn-1", path);
  const io::Json& sj = io::require(j, "spec", path);
  Encoder e;
  e.spec.depth = static_cast<int>(io::require_number(sj, "depth", path + ".spec"));
  e.spec.hidden = static_cast<int>(io::require_number(sj, "hidden", path + ".spec"));
  e.spec.heads = static_cast<int>(io::require_number(sj, "heads", path + ".spec"));
  e.spec.ff = static_cast<int>(io::require_number(sj, "ff", path + ".spec"));
  validate(e.spec);
  const int d = e.spec.hidden;
  const int ff = e.spec.ff;
  const io::Json& layers = io::require(j, "layers", path);
  if (!layers.is_array() || static_cast<int>(layers.size()) != e.spec.depth) {
    throw ShapeMismatch(path + ".layers: expected " + std::to_string(e.spec.depth) + " layers");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string lp = path + ".layers[" + std::to_string(i) + "]";
    const io::Json& lj = layers[i];
    EncoderLayer l;
    l.ln_attn = layer_norm_from_json(io::require(lj, "ln_attn", lp), lp + ".ln_attn", d);
    l.wq = matrix_from_json(io::require(lj, "wq", lp), lp + ".wq", d, d);
    l.wk = matrix_from_json(io::require(lj, "wk", lp), lp + ".wk", d, d);
    l.wv = matrix_from_json(io::require(lj, "wv", lp), lp + ".wv", d, d);
    l.wo = matrix_from_json(io::require(lj, "wo", lp), lp + ".wo", d, d);
    l.bq = vector_from_json(lj, "bq", lp, d);
    l.bk = vector_from_json(lj, "bk", lp, d);
    l.bv = vector_from_json(lj, "bv", lp, d);
    l.bo = vector_from_json(lj, "bo", lp, d);
    l.ln_ff = layer_norm_from_json(io::require(lj, "ln_ff", lp), lp + ".ln_ff", d);
    l.w1 = matrix_from_json(io::require(lj, "w1", lp), lp + ".w1", ff, d);
    l.b1 = vector_from_json(lj, "b1", lp, ff);
    l.w2 = matrix_from_json(io::require(lj, "w2", lp), lp + ".w2", d, ff);
    l.b2 = vector_from_json(lj, "b2", lp, d);
    e.layers.push_back(std::move(l));
  }
  e.final_norm = layer_norm_from_json(io::require(j, "final_norm", path), path + ".final_norm", d);
  return e;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(AdamState& state, const ParamList& params,
               const std::vector<std::span<const double>>& grads, const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw ShapeMismatch("adam: " + std::to_string(params.size()) + " parameter blocks but " +
                        std::to_string(grads.size()) + " gradient blocks");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
      state.v.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
    }
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("adam: state has a different block count");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() ||
        static_cast<std::size_t>(state.m[b].size()) != params[b].size()) {
      throw ShapeMismatch("adam: block " + std::to_string(b) + " size mismatch");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    Vector& m = state.m[b];
    Vector& v = state.v[b];
    const auto& g = grads[b];
    auto& p = params[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[i];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

void adam_step(AdamState& state, const ParamList& params, const ParamList& grads,
               const AdamConfig& cfg) {
  std::vector<std::span<const double>> g(grads.begin(), grads.end());
  adam_step(state, params, g, cfg);
}

// ---------------------------------------------------------------------------
// Composite loss

void validate(const LossWeights& w) {
  if (!(w.trans >= 0.0) || !(w.rot >= 0.0) || !(w.joint >= 0.0)) {
    throw DataError("loss weights must be non-negative");
  }
}

LossResult composite_loss(const ActionChunk& pred, const ActionChunk& gt, const LossWeights& w) {
  validate(w);
  constexpr double n = kHorizon * kNumHands;
  LossResult out;
  for (int k = 0; k < kHorizon; ++k) {
    for (int h = 0; h < kNumHands; ++h) {
      const Vec3 dt = pred.translation(k, h) - gt.translation(k, h);
      out.trans += dt.squaredNorm();

      const Rot6D vp = pred.rot6d(k, h);
      const Mat3 dr = matrix_from_rot6d(vp) - matrix_from_rot6d(gt.rot6d(k, h));
      out.rot += dr.squaredNorm();

      const PcaCoeffs dj = pred.pca(k, h) - gt.pca(k, h);
      out.joint += dj.squaredNorm();

      auto g = out.grad.hand(k, h);
      g.segment<3>(kTransOffset) = (2.0 * w.trans / n) * dt.transpose();
      g.segment<6>(kRotOffset) = matrix_from_rot6d_vjp(vp, (2.0 * w.rot / n) * dr).transpose();
      g.segment<kPcaDim>(kPcaOffset) = (2.0 * w.joint / n) * dj.transpose();
    }
  }
  out.trans /= n;
  out.rot /= n;
  out.joint /= n;
  out.total = w.trans * out.trans + w.rot * out.rot + w.joint * out.joint;
  return out;
}

}  // namespace egobridge::nn
