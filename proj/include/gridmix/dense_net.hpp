#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "gridmix/error.hpp"
#include "gridmix/random.hpp"

namespace gridmix {

// Columns are samples.
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Identity, ReLU, Abs, Tanh, ELU };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Abs: return "abs";
    case Activation::Tanh: return "tanh";
    case Activation::ELU: return "elu";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  for (Activation a : {Activation::Identity, Activation::ReLU, Activation::Abs, Activation::Tanh, Activation::ELU})
    if (s == to_string(a)) return a;
  throw CheckpointInvalid("unknown activation '" + s + "'");
}

// ReLU and Abs have a kink at zero; the others are differentiable everywhere.
constexpr bool has_kink(Activation a) noexcept { return a == Activation::ReLU || a == Activation::Abs; }

// Elementwise activation. ELU uses alpha = 1.
inline Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Abs: return z.cwiseAbs();
    case Activation::Tanh: return z.unaryExpr([](double v) { return std::tanh(v); });
    case Activation::ELU: return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  }
  return z;
}

// Derivative at the pre-activation. Subgradients at the kinks are 0.
inline Matrix activation_slope(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::Identity: return Matrix::Ones(z.rows(), z.cols());
    case Activation::ReLU: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::Abs: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    case Activation::Tanh: return z.unaryExpr([](double v) { const double t = std::tanh(v); return 1.0 - t * t; });
    case Activation::ELU: return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
  }
  return Matrix::Ones(z.rows(), z.cols());
}

// Layer sizes [n0, ..., nL] with one activation per affine layer.
struct Topology {
  std::vector<int> sizes;
  std::vector<Activation> activations;

  Topology() = default;
  Topology(std::vector<int> s, std::vector<Activation> a) : sizes(std::move(s)), activations(std::move(a)) {
    validate();
  }

  // Hidden layers share one activation; the last layer gets `output`.
  static Topology mlp(std::vector<int> s, Activation hidden, Activation output = Activation::Identity) {
    std::vector<Activation> acts(s.empty() ? 0 : s.size() - 1, hidden);
    if (!acts.empty()) acts.back() = output;
    return Topology(std::move(s), std::move(acts));
  }

  void validate() const {
    if (sizes.size() < 2) throw ShapeMismatch("topology needs at least one layer");
    if (activations.size() != sizes.size() - 1) throw ShapeMismatch("one activation per layer required");
    for (int n : sizes)
      if (n < 1) throw ShapeMismatch("layer sizes must be >= 1");
  }

  std::size_t num_layers() const noexcept { return activations.size(); }
  int input_size() const noexcept { return sizes.front(); }
  int output_size() const noexcept { return sizes.back(); }

  // Layer-major; each layer stores its weights row-major (out x in), then biases.
  std::size_t weight_offset(std::size_t layer) const noexcept {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
      off += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    return off;
  }
  std::size_t bias_offset(std::size_t layer) const noexcept {
    return weight_offset(layer) + static_cast<std::size_t>(sizes[layer]) * sizes[layer + 1];
  }
  std::size_t param_count() const noexcept { return weight_offset(num_layers()); }

  friend bool operator==(const Topology&, const Topology&) = default;
};

// Parameter-sized buffers start on a packet boundary, so every layer slice has
// the same alignment in every run and vectorized kernels round identically.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct NetParams {
  Topology topology;
  ParamVector values;

  NetParams() = default;
  explicit NetParams(Topology topo) : topology(std::move(topo)), values(topology.param_count(), 0.0) {}

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases.
inline void initialize(const Topology& topo, std::span<double> params, Rng& rng) {
  if (params.size() != topo.param_count()) throw ShapeMismatch("parameter vector length does not match topology");
  for (std::size_t l = 0; l < topo.num_layers(); ++l) {
    const double bound = std::sqrt(1.0 / topo.sizes[l]);
    const std::size_t w0 = topo.weight_offset(l), b0 = topo.bias_offset(l);
    const std::size_t b1 = b0 + topo.sizes[l + 1];
    for (std::size_t k = w0; k < b0; ++k) params[k] = uniform_real(rng, -bound, bound);
    for (std::size_t k = b0; k < b1; ++k) params[k] = 0.0;
  }
}

inline NetParams make_net(const Topology& topo, Rng& rng) {
  NetParams net(topo);
  initialize(topo, net.values, rng);
  return net;
}

// Per-layer cache from a forward pass: the layer inputs and pre-activations.
struct Tape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

namespace detail {
inline Eigen::Map<const RowMatrix> weights(const Topology& t, std::span<const double> p, std::size_t l) {
  return {p.data() + t.weight_offset(l), t.sizes[l + 1], t.sizes[l]};
}
inline Eigen::Map<const Eigen::VectorXd> biases(const Topology& t, std::span<const double> p, std::size_t l) {
  return {p.data() + t.bias_offset(l), t.sizes[l + 1]};
}
}  // namespace detail

// A reused tape keeps its buffers, so repeated passes of one shape do not allocate.
inline Matrix forward(const Topology& topo, std::span<const double> params, const Matrix& input, Tape* tape = nullptr) {
  if (params.size() != topo.param_count()) throw ShapeMismatch("parameter vector length does not match topology");
  if (input.rows() != topo.input_size())
    throw ShapeMismatch("input has " + std::to_string(input.rows()) + " rows, net expects " +
                        std::to_string(topo.input_size()));
  const std::size_t layers = topo.num_layers();
  if (tape) {
    tape->inputs.resize(layers);
    tape->pre.resize(layers);
    tape->inputs[0] = input;
  }
  Matrix z, x;
  const Matrix* in = &input;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix& pre = tape ? tape->pre[l] : z;
    pre.noalias() = detail::weights(topo, params, l) * *in;
    pre.colwise() += detail::biases(topo, params, l);
    Matrix& next = (tape && l + 1 < layers) ? tape->inputs[l + 1] : x;
    next = activate(topo.activations[l], pre);
    in = &next;
  }
  return *in;
}

inline Matrix forward(const NetParams& net, const Matrix& input, Tape* tape = nullptr) {
  return forward(net.topology, net.values, input, tape);
}

inline std::vector<double> forward(const NetParams& net, std::span<const double> input) {
  const Matrix x = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  const Matrix y = forward(net, x);
  return {y.data(), y.data() + y.size()};
}

// Reverse pass for a tape recorded with `params`. Parameter gradients are
// accumulated into `grad_params`; the gradient w.r.t. the input is returned
// (an empty matrix when `want_input_grad` is false).
inline Matrix backward(const Topology& topo, std::span<const double> params, const Tape& tape, const Matrix& grad_out,
                       std::span<double> grad_params, bool want_input_grad = true) {
  if (grad_params.size() != topo.param_count() || params.size() != topo.param_count())
    throw ShapeMismatch("gradient/parameter length does not match topology");
  if (tape.pre.size() != topo.num_layers()) throw ShapeMismatch("tape does not match topology");
  if (grad_out.rows() != topo.output_size() || grad_out.cols() != tape.pre.back().cols())
    throw ShapeMismatch("output gradient shape does not match the forward pass");
  Matrix grad = grad_out;
  for (std::size_t l = topo.num_layers(); l-- > 0;) {
    Matrix dz = grad.cwiseProduct(activation_slope(topo.activations[l], tape.pre[l]));
    Eigen::Map<RowMatrix> gw(grad_params.data() + topo.weight_offset(l), topo.sizes[l + 1], topo.sizes[l]);
    Eigen::Map<Eigen::VectorXd> gb(grad_params.data() + topo.bias_offset(l), topo.sizes[l + 1]);
    gw.noalias() += dz * tape.inputs[l].transpose();
    gb.noalias() += dz.rowwise().sum();
    if (l == 0 && !want_input_grad) return Matrix();
    grad.noalias() = detail::weights(topo, params, l).transpose() * dz;
  }
  return grad;
}

// Smallest |pre-activation| feeding a ReLU/Abs layer; +inf if none.
inline double min_kink_margin(const Topology& topo, const Tape& tape) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < tape.pre.size(); ++l)
    if (has_kink(topo.activations[l]) && tape.pre[l].size() > 0)
      margin = std::min(margin, tape.pre[l].cwiseAbs().minCoeff());
  return margin;
}

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  ParamVector m;
  ParamVector v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamConfig cfg = {}) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

// Plain left-to-right sum: a vectorized reduction over an unaligned buffer
// peels a prefix whose length depends on the address, which changes the
// rounding from run to run.
inline double global_norm(std::span<const double> g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

// Scales `g` so its L2 norm is at most `max_norm`; returns the norm before clipping.
inline double clip_global_norm(std::span<double> g, double max_norm) {
  const double norm = global_norm(g);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& x : g) x *= scale;
  }
  return norm;
}

// Bias-corrected adaptive-moment update. Parameters are untouched when the
// gradient contains a non-finite entry.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw ShapeMismatch("adam_step: parameter, gradient and moment lengths differ");
  for (std::size_t k = 0; k < grads.size(); ++k)
    if (!std::isfinite(grads[k]))
      throw NonFiniteGradient("gradient entry " + std::to_string(k) + " is " + std::to_string(grads[k]) +
                              " at optimizer step " + std::to_string(state.step));
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = c.lr / bc1, inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  // Written as a plain loop: Eigen's packet sqrt is approximate under its
  // default fast-math setting, so results would depend on buffer alignment.
  double* m = state.m.data();
  double* v = state.v.data();
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const double g = grads[k];
    m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
    v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
    params[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + c.eps);
  }
}

struct FiniteDiffOptions {
  double eps = 1e-5;
  std::size_t max_coords = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;
  // Relative error is |a - n| / max(|a|, |n|, denom_floor), so gradients
  // below the floor are compared absolutely.
  double denom_floor = 1e-6;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Compares `analytic` with central differences of `loss` around `params`.
inline FiniteDiffReport finite_diff_check(std::span<const double> params, std::span<const double> analytic,
                                          const std::function<double(std::span<const double>)>& loss,
                                          const FiniteDiffOptions& opt = {}) {
  if (params.size() != analytic.size()) throw ShapeMismatch("finite_diff_check: length mismatch");
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opt.max_coords != 0 && opt.max_coords < coords.size()) {
    Rng rng(opt.seed);
    for (std::size_t i = 0; i < opt.max_coords; ++i)
      std::swap(coords[i], coords[i + uniform_index(rng, coords.size() - i)]);
    coords.resize(opt.max_coords);
  }
  std::vector<double> theta(params.begin(), params.end());
  FiniteDiffReport report;
  for (std::size_t k : coords) {
    const double orig = theta[k];
    theta[k] = orig + opt.eps;
    const double up = loss(theta);
    theta[k] = orig - opt.eps;
    const double down = loss(theta);
    theta[k] = orig;
    const double numeric = (up - down) / (2.0 * opt.eps);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[k]), opt.denom_floor});
    const double err = std::abs(numeric - analytic[k]) / denom;
    if (err > report.max_rel_error || !std::isfinite(err)) {
      report.max_rel_error = err;
      report.worst_index = k;
    }
    ++report.checked;
  }
  return report;
}

inline constexpr int kNetFormatVersion = 1;

inline void to_json(nlohmann::json& j, const Topology& t) {
  std::vector<std::string> acts;
  for (Activation a : t.activations) acts.emplace_back(to_string(a));
  j = nlohmann::json{{"sizes", t.sizes}, {"activations", acts}};
}

inline void from_json(const nlohmann::json& j, Topology& t) {
  std::vector<Activation> acts;
  for (const auto& s : j.at("activations")) acts.push_back(activation_from_string(s.get<std::string>()));
  t = Topology(j.at("sizes").get<std::vector<int>>(), std::move(acts));
}

// {"format_version":1,"topology":{...},"params":[...]}; doubles round-trip exactly.
inline void to_json(nlohmann::json& j, const NetParams& net) {
  j = nlohmann::json{{"format_version", kNetFormatVersion}, {"topology", net.topology}, {"params", net.values}};
}

inline void from_json(const nlohmann::json& j, NetParams& net) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kNetFormatVersion) throw CheckpointInvalid("unsupported format_version " + std::to_string(version));
    net.topology = j.at("topology").get<Topology>();
    const auto values = j.at("params").get<std::vector<double>>();
    net.values.assign(values.begin(), values.end());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointInvalid(e.what());
  } catch (const ShapeMismatch& e) {
    throw CheckpointInvalid(e.what());
  }
  if (net.values.size() != net.topology.param_count()) throw CheckpointInvalid("parameter count does not match topology");
  for (double v : net.values)
    if (!std::isfinite(v)) throw CheckpointInvalid("non-finite parameter");
}

}  // namespace gridmix
