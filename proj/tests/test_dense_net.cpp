#include <gtest/gtest.h>

#include <cmath>

#include "gridmix/dense_net.hpp"

using namespace gridmix;

namespace {

// Loop-by-loop forward pass over the documented parameter layout.
std::vector<double> naive_forward(const Topology& t, std::span<const double> p, std::vector<double> x) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < t.num_layers(); ++l) {
    const int in = t.sizes[l], out = t.sizes[l + 1];
    std::vector<double> y(out, 0.0);
    for (int o = 0; o < out; ++o) {
      double z = 0.0;
      for (int i = 0; i < in; ++i) z += p[off + static_cast<std::size_t>(o) * in + i] * x[i];
      z += p[off + static_cast<std::size_t>(in) * out + o];
      switch (t.activations[l]) {
        case Activation::Identity: y[o] = z; break;
        case Activation::ReLU: y[o] = z > 0 ? z : 0; break;
        case Activation::Abs: y[o] = z < 0 ? -z : z; break;
        case Activation::Tanh: y[o] = std::tanh(z); break;
        case Activation::ELU: y[o] = z > 0 ? z : std::exp(z) - 1.0; break;
      }
    }
    off += static_cast<std::size_t>(in) * out + out;
    x = std::move(y);
  }
  return x;
}

Matrix random_input(int rows, int cols, Rng& rng) {
  Matrix x(rows, cols);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = uniform_real(rng, -1.0, 1.0);
  return x;
}

}  // namespace

TEST(DenseNet, ParamCountAndLayout) {
  const Topology t = Topology::mlp({484, 64, 64, 5}, Activation::ReLU);
  EXPECT_EQ(t.param_count(), 484u * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
  EXPECT_EQ(t.bias_offset(0), 484u * 64);
  EXPECT_EQ(t.weight_offset(1), 484u * 64 + 64);
  EXPECT_EQ(t.activations.back(), Activation::Identity);
  EXPECT_THROW(Topology({3}, {}), ShapeMismatch);
  EXPECT_THROW(Topology({3, 0}, {Activation::ReLU}), ShapeMismatch);
}

TEST(DenseNet, IdentityNetPassesInputThrough) {
  NetParams net(Topology({3, 3}, {Activation::Identity}));
  for (int i = 0; i < 3; ++i) net.values[static_cast<std::size_t>(i) * 3 + i] = 1.0;
  const std::vector<double> y = forward(net, std::vector<double>{0.5, -2.0, 7.0});
  EXPECT_EQ(y, (std::vector<double>{0.5, -2.0, 7.0}));
}

TEST(DenseNet, ActivationsAtKnownPoints) {
  Matrix z(1, 3);
  z << -3.0, -2.5, 0.0;
  EXPECT_EQ(activate(Activation::Abs, z)(0, 0), 3.0);
  EXPECT_EQ(activate(Activation::ReLU, z)(0, 1), 0.0);
  EXPECT_EQ(activation_slope(Activation::Abs, z)(0, 2), 0.0);
  EXPECT_EQ(activation_slope(Activation::ReLU, z)(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(activate(Activation::ELU, z)(0, 0), std::expm1(-3.0));
  EXPECT_DOUBLE_EQ(activation_slope(Activation::ELU, z)(0, 0), std::exp(-3.0));
}

TEST(DenseNet, ForwardMatchesNaiveLoops) {
  Rng rng(11);
  for (Activation a : {Activation::ReLU, Activation::Abs, Activation::Tanh, Activation::ELU}) {
    const Topology t({6, 5, 4, 3}, {a, a, Activation::Identity});
    NetParams net = make_net(t, rng);
    for (double& b : net.values) b += uniform_real(rng, -0.1, 0.1);
    const Matrix x = random_input(6, 7, rng);
    const Matrix y = forward(net, x);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const std::vector<double> col(x.col(c).data(), x.col(c).data() + 6);
      const std::vector<double> ref = naive_forward(t, net.values, col);
      for (int o = 0; o < 3; ++o) EXPECT_NEAR(y(o, c), ref[o], 1e-12);
    }
  }
}

TEST(DenseNet, ShapeMismatchOnWrongInput) {
  Rng rng(1);
  const NetParams net = make_net(Topology::mlp({4, 3, 2}, Activation::ReLU), rng);
  EXPECT_THROW(forward(net, Matrix::Zero(5, 1)), ShapeMismatch);
  Tape tape;
  forward(net, Matrix::Zero(4, 2), &tape);
  std::vector<double> g(net.values.size());
  EXPECT_THROW(backward(net.topology, net.values, tape, Matrix::Zero(2, 3), g), ShapeMismatch);
}

TEST(DenseNet, LinearNeuronGradientIsInput) {
  NetParams net(Topology({3, 1}, {Activation::Identity}));
  net.values = {0.3, -0.2, 0.7, 0.1};
  Matrix x(3, 1);
  x << 1.5, -2.0, 4.0;
  Tape tape;
  forward(net, x, &tape);
  std::vector<double> g(4, 0.0);
  const Matrix dx = backward(net.topology, net.values, tape, Matrix::Ones(1, 1), g);
  EXPECT_EQ(g, (std::vector<double>{1.5, -2.0, 4.0, 1.0}));
  EXPECT_DOUBLE_EQ(dx(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(dx(2, 0), 0.7);
}

TEST(DenseNet, ZeroOutputGradientGivesZeroParamGradient) {
  Rng rng(3);
  const NetParams net = make_net(Topology::mlp({5, 8, 2}, Activation::ReLU), rng);
  Tape tape;
  forward(net, random_input(5, 4, rng), &tape);
  std::vector<double> g(net.values.size(), 0.0);
  backward(net.topology, net.values, tape, Matrix::Zero(2, 4), g);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(DenseNet, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  for (Activation a : {Activation::ReLU, Activation::Abs, Activation::Tanh, Activation::ELU}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Topology t({7, 6, 5, 3}, {a, a, Activation::Identity});
      NetParams net = make_net(t, rng);
      for (double& b : net.values) b += uniform_real(rng, -0.2, 0.2);
      const Matrix x = random_input(7, 4, rng);
      const Matrix target = random_input(3, 4, rng);
      auto loss = [&](std::span<const double> p) {
        const Matrix y = forward(t, p, x);
        return 0.5 * (y - target).squaredNorm();
      };
      Tape tape;
      const Matrix y = forward(t, net.values, x, &tape);
      if (has_kink(a) && min_kink_margin(t, tape) < 1e-4) continue;
      std::vector<double> g(net.values.size(), 0.0);
      backward(t, net.values, tape, y - target, g);
      const FiniteDiffReport r = finite_diff_check(net.values, g, loss);
      EXPECT_LT(r.max_rel_error, 1e-6) << to_string(a);
      EXPECT_EQ(r.checked, net.values.size());
    }
  }
}

TEST(DenseNet, InputGradientMatchesFiniteDifferences) {
  Rng rng(8);
  const Topology t({4, 6, 2}, {Activation::Tanh, Activation::Identity});
  const NetParams net = make_net(t, rng);
  Matrix x = random_input(4, 1, rng);
  Tape tape;
  forward(net, x, &tape);
  std::vector<double> g(net.values.size(), 0.0);
  const Matrix dx = backward(t, net.values, tape, Matrix::Ones(2, 1), g);
  for (int k = 0; k < 4; ++k) {
    Matrix up = x, down = x;
    up(k, 0) += 1e-6;
    down(k, 0) -= 1e-6;
    const double num = (forward(net, up).sum() - forward(net, down).sum()) / 2e-6;
    EXPECT_NEAR(dx(k, 0), num, 1e-8);
  }
}

TEST(FiniteDiff, QuadraticIsExact) {
  const std::vector<double> theta{0.5, -1.25, 3.0, 2.0};
  std::vector<double> grad;
  for (double v : theta) grad.push_back(2.0 * v);
  auto loss = [](std::span<const double> p) {
    double s = 0.0;
    for (double v : p) s += v * v;
    return s;
  };
  EXPECT_LT(finite_diff_check(theta, grad, loss).max_rel_error, 1e-9);
}

TEST(FiniteDiff, DetectsWrongGradientAndSubsamples) {
  const std::vector<double> theta(300, 1.0);
  std::vector<double> grad(300, 2.0);
  grad[17] = 3.0;
  auto loss = [](std::span<const double> p) {
    double s = 0.0;
    for (double v : p) s += v * v;
    return s;
  };
  const FiniteDiffReport full = finite_diff_check(theta, grad, loss);
  EXPECT_GT(full.max_rel_error, 0.3);
  EXPECT_EQ(full.worst_index, 17u);
  FiniteDiffOptions opt;
  opt.max_coords = 200;
  EXPECT_EQ(finite_diff_check(theta, grad, loss, opt).checked, 200u);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> before = p;
  AdamState st(3);
  adam_step(p, std::vector<double>(3, 0.0), st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  // After one step m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
  std::vector<double> p{0.0, 0.0, 0.0};
  const std::vector<double> g{0.3, -4.0, 1e-3};
  AdamState st(3, AdamConfig{0.01, 0.9, 0.999, 1e-8});
  adam_step(p, g, st);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(p[k], -0.01 * g[k] / (std::abs(g[k]) + 1e-8), 1e-15);
}

TEST(Adam, SecondStepMatchesClosedForm) {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> p{1.0};
  AdamState st(1, AdamConfig{lr, b1, b2, eps});
  adam_step(p, std::vector<double>{2.0}, st);
  adam_step(p, std::vector<double>{-1.0}, st);
  const double m1 = 0.1 * 2.0, v1 = 0.001 * 4.0;
  const double x1 = 1.0 - lr * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + eps);
  const double m2 = b1 * m1 + 0.1 * -1.0, v2 = b2 * v1 + 0.001 * 1.0;
  const double x2 = x1 - lr * (m2 / (1 - b1 * b1)) / (std::sqrt(v2 / (1 - b2 * b2)) + eps);
  EXPECT_NEAR(p[0], x2, 1e-14);
}

TEST(Adam, DeterministicAndRejectsNonFinite) {
  std::vector<double> a{1.0, 2.0}, b{1.0, 2.0};
  AdamState sa(2), sb(2);
  adam_step(a, std::vector<double>{0.1, -0.2}, sa);
  adam_step(b, std::vector<double>{0.1, -0.2}, sb);
  EXPECT_EQ(a, b);
  const std::vector<double> before = a;
  EXPECT_THROW(adam_step(a, std::vector<double>{0.1, std::nan("")}, sa), NonFiniteGradient);
  EXPECT_THROW(adam_step(a, std::vector<double>{INFINITY, 0.0}, sa), NonFiniteGradient);
  EXPECT_EQ(a, before);
  EXPECT_EQ(sa.step, 1);
}

TEST(Clip, ScalesToMaxNorm) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  std::vector<double> small{0.3, 0.4};
  clip_global_norm(small, 1.0);
  EXPECT_EQ(small, (std::vector<double>{0.3, 0.4}));
}

TEST(Init, OutputScaleNearFanInEstimate) {
  // Uniform(+-sqrt(1/n)) weights have variance 1/(3n), so a linear layer maps
  // unit-variance inputs to outputs with standard deviation 1/sqrt(3).
  Rng rng(21);
  const Topology t({256, 64}, {Activation::Identity});
  const NetParams net = make_net(t, rng);
  Matrix x(256, 400);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = uniform_real(rng, -std::sqrt(3.0), std::sqrt(3.0));
  const Matrix y = forward(net, x);
  ASSERT_TRUE(y.allFinite());
  const double sd = std::sqrt(y.array().square().mean());
  const double expected = 1.0 / std::sqrt(3.0);
  EXPECT_GT(sd, 0.1 * expected);
  EXPECT_LT(sd, 10.0 * expected);
  for (std::size_t k = t.bias_offset(0); k < t.param_count(); ++k) EXPECT_EQ(net.values[k], 0.0);
}

TEST(Checkpoint, BitExactRoundTrip) {
  Rng rng(4);
  NetParams net = make_net(Topology({5, 4, 1}, {Activation::ELU, Activation::Abs}), rng);
  net.values[0] = 0.1 + 0.2;  // not representable in short decimal form
  const nlohmann::json j = net;
  const NetParams back = nlohmann::json::parse(j.dump()).get<NetParams>();
  EXPECT_EQ(back, net);
  EXPECT_EQ(j.at("format_version").get<int>(), 1);
}

TEST(Checkpoint, RejectsCorruptInput) {
  Rng rng(4);
  nlohmann::json j = make_net(Topology({2, 2}, {Activation::ReLU}), rng);
  nlohmann::json bad = j;
  bad["params"].erase(0);
  EXPECT_THROW(bad.get<NetParams>(), CheckpointInvalid);
  bad = j;
  bad["format_version"] = 2;
  EXPECT_THROW(bad.get<NetParams>(), CheckpointInvalid);
  bad = j;
  bad["topology"]["activations"][0] = "swish";
  EXPECT_THROW(bad.get<NetParams>(), CheckpointInvalid);
}
