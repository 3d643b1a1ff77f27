#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "doctest.h"
#include "egobridge/errors.hpp"
#include "egobridge/nn.hpp"
#include "gradcheck.hpp"
#include "random.hpp"

using namespace egobridge;
using namespace egobridge::nn;
using egobridge::testing::gradient_relative_error;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  Matrix m(r, c);
  egobridge::testing::fill_uniform(m, rng, -scale, scale);
  return m;
}

void randomize_biases(Mlp& m, std::mt19937_64& rng) {
  for (auto& l : m.layers) egobridge::testing::fill_uniform(l.bias, rng, -0.5, 0.5);
}

ActionChunk random_chunk(std::mt19937_64& rng) {
  ActionChunk c;
  egobridge::testing::fill_uniform(c.values, rng, -1.0, 1.0);
  return c;
}

}  // namespace

TEST_CASE("mlp with zero parameters outputs activation(0)") {
  std::mt19937_64 rng(1);
  const int sizes[] = {4, 8, 3};
  for (Activation a : {Activation::kTanh, Activation::kLinear, Activation::kGelu}) {
    Mlp m = zeros_like(make_mlp(sizes, a, a, rng));
    const Matrix y = mlp_forward(m, random_matrix(4, 5, rng));
    CHECK(y.rows() == 3);
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);
  }
  Mlp m = make_mlp(sizes, Activation::kTanh, Activation::kLinear, rng);
  CHECK_THROWS_AS(mlp_forward(m, Matrix::Zero(5, 1)), ShapeMismatch);
}

TEST_CASE("linear-only mlp is homogeneous") {
  std::mt19937_64 rng(2);
  const int sizes[] = {5, 7, 4};
  const Mlp m = make_mlp(sizes, Activation::kLinear, Activation::kLinear, rng);
  const Matrix x = random_matrix(5, 3, rng);
  CHECK((mlp_forward(m, 2.5 * x) - 2.5 * mlp_forward(m, x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mlp gradients match central differences") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int sizes[] = {3 + trial % 4, 6, 5, 2 + trial % 3};
    Mlp m = make_mlp(sizes, trial % 2 ? Activation::kTanh : Activation::kGelu, Activation::kLinear, rng);
    randomize_biases(m, rng);
    Matrix x = random_matrix(sizes[0], 4, rng);
    const Matrix g = random_matrix(sizes[3], 4, rng);
    auto loss = [&] { return mlp_forward(m, x).cwiseProduct(g).sum(); };

    MlpGradient grad = mlp_grad(m, x, g);
    CHECK(gradient_relative_error(parameters(m), parameters(grad.weights), loss) < 1e-4);
    CHECK(gradient_relative_error(egobridge::testing::as_params(x),
                                  egobridge::testing::as_params(grad.input), loss) < 1e-4);
  }
}

TEST_CASE("mlp json roundtrip is exact") {
  std::mt19937_64 rng(4);
  const int sizes[] = {30, 64, 128, 64, 12};
  const Mlp m = make_mlp(sizes, Activation::kTanh, Activation::kLinear, rng);
  const Mlp back = mlp_from_json(to_json(m), "mlp");
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    CHECK((back.layers[i].weight - m.layers[i].weight).norm() == 0.0);
    CHECK(back.layers[i].activation == m.layers[i].activation);
  }
  io::Json bad = to_json(m);
  bad["sizes"][2] = 127;
  CHECK_THROWS_AS(mlp_from_json(bad, "mlp"), ShapeMismatch);
}

TEST_CASE("encoder preserves shape for any token count") {
  std::mt19937_64 rng(5);
  const Encoder e = make_encoder({2, 16, 4, 32}, rng);
  for (int n : {1, 2, 7, 33}) {
    const Matrix out = encoder_forward(e, random_matrix(n, 16, rng));
    CHECK(out.rows() == n);
    CHECK(out.cols() == 16);
    CHECK(out.allFinite());
  }
  CHECK_THROWS_AS(encoder_forward(e, Matrix::Zero(3, 15)), ShapeMismatch);
  CHECK_THROWS_AS(make_encoder({2, 18, 4, 32}, rng), ShapeMismatch);
}

TEST_CASE("encoder is permutation equivariant") {
  std::mt19937_64 rng(6);
  const Encoder e = make_encoder({3, 16, 2, 24}, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    const Matrix x = random_matrix(n, 16, rng);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix px(n, 16);
    for (int i = 0; i < n; ++i) px.row(i) = x.row(perm[i]);
    const Matrix y = encoder_forward(e, x);
    const Matrix py = encoder_forward(e, px);
    for (int i = 0; i < n; ++i) CHECK((py.row(i) - y.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encoder gradients match central differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    Encoder e = make_encoder({2, 16, 4, 32}, rng);
    for (auto& p : parameters(e)) {
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      for (double& v : p) v += u(rng);
    }
    Matrix x = random_matrix(5, 16, rng);
    const Matrix g = random_matrix(5, 16, rng);
    auto loss = [&] { return encoder_forward(e, x).cwiseProduct(g).sum(); };

    EncoderCache cache;
    encoder_forward(e, x, &cache);
    Encoder grads = zeros_like(e);
    Matrix gx = encoder_backward(e, cache, g, grads);
    CHECK(gradient_relative_error(parameters(e), parameters(grads), loss) < 1e-3);
    CHECK(gradient_relative_error(egobridge::testing::as_params(x),
                                  egobridge::testing::as_params(gx), loss) < 1e-3);
  }
}

TEST_CASE("encoder json roundtrip") {
  std::mt19937_64 rng(8);
  const Encoder e = make_encoder({2, 8, 2, 16}, rng);
  const Encoder back = encoder_from_json(to_json(e), "enc");
  const Matrix x = random_matrix(4, 8, rng);
  CHECK((encoder_forward(e, x) - encoder_forward(back, x)).norm() == 0.0);
}

TEST_CASE("adam") {
  std::vector<double> p = {1.0, -2.0, 3.0};
  std::vector<double> g = {0.0, 0.0, 0.0};
  AdamState state;
  ParamList params = {std::span<double>(p)};
  ParamList grads = {std::span<double>(g)};

  SUBCASE("zero gradient leaves parameters unchanged") {
    for (int i = 0; i < 5; ++i) adam_step(state, params, grads, {});
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
  }
  SUBCASE("first step moves each coordinate by lr") {
    // Bias correction makes m_hat = g and v_hat = g^2, so the step is
    // lr * g / (|g| + eps).
    g = {0.5, -3.0, 1e-3};
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(state, params, grads, cfg);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(3.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("identical runs give identical trajectories") {
    std::vector<double> q = p;
    AdamState other;
    ParamList qp = {std::span<double>(q)};
    for (int i = 0; i < 20; ++i) {
      g = {std::sin(i), std::cos(i), 0.1 * i};
      adam_step(state, params, grads, {});
      adam_step(other, qp, grads, {});
    }
    CHECK(std::memcmp(p.data(), q.data(), sizeof(double) * 3) == 0);
  }
  SUBCASE("shape mismatch") {
    std::vector<double> short_g = {1.0};
    ParamList bad = {std::span<double>(short_g)};
    CHECK_THROWS_AS(adam_step(state, params, bad, {}), ShapeMismatch);
  }
}

TEST_CASE("composite loss is zero at the target") {
  std::mt19937_64 rng(9);
  const ActionChunk gt = random_chunk(rng);
  const LossResult r = composite_loss(gt, gt, {});
  CHECK(r.total == 0.0);
  CHECK(r.grad.values.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("unit error in every term gives 20 + 5 + 5") {
  ActionChunk gt, pred;
  const double angle = std::acos(0.75);  // ||R1 - R2||_F^2 = 4 - 4 cos = 1
  for (int k = 0; k < kHorizon; ++k) {
    for (int h = 0; h < kNumHands; ++h) {
      HandState s;
      s.wrist.t = Vec3(0.1 * k, -0.2, h);
      gt.set_hand(k, h, s);
      HandState p = s;
      p.wrist.t += Vec3(0, 1, 0);
      p.wrist.r = rotation_about(Vec3::UnitX(), angle);
      p.pca[3] += 1.0;
      pred.set_hand(k, h, p);
    }
  }
  const LossResult r = composite_loss(pred, gt, {20.0, 5.0, 5.0});
  CHECK(r.trans == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.rot == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.joint == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.total == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("composite loss gradient matches central differences") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    ActionChunk pred = random_chunk(rng);
    const ActionChunk gt = random_chunk(rng);
    const LossWeights w{20.0, 5.0, 5.0};
    const LossResult r = composite_loss(pred, gt, w);
    nn::Matrix grad = r.grad.values;
    nn::Matrix values = pred.values;
    auto loss = [&] {
      pred.values = values;
      return composite_loss(pred, gt, w).total;
    };
    CHECK(gradient_relative_error(egobridge::testing::as_params(values),
                                  egobridge::testing::as_params(grad), loss) < 1e-4);
  }
}

TEST_CASE("composite loss rejects undecodable rotations") {
  ActionChunk gt;
  for (int k = 0; k < kHorizon; ++k) {
    for (int h = 0; h < kNumHands; ++h) gt.set_hand(k, h, HandState{});
  }
  ActionChunk pred = gt;
  pred.hand(4, 1).segment<3>(kRotOffset).setZero();
  CHECK_THROWS_AS(composite_loss(pred, gt, {}), DegenerateInput);
  CHECK_THROWS_AS(composite_loss(gt, gt, {-1.0, 5.0, 5.0}), DataError);
}
