#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmix/dense_net.hpp"
#include "gridmix/grid_world.hpp"
#include "gridmix/observation.hpp"
#include "gridmix/replay_buffer.hpp"

namespace gridmix {

// QMIX: monotone hypernetwork mixer. VDN: Q_tot is the plain sum.
// IQL: no mixer, each agent regresses on its own DQN target.
enum class MixerMode { QMIX, VDN, IQL };

inline const char* to_string(MixerMode m) {
  switch (m) {
    case MixerMode::QMIX: return "qmix";
    case MixerMode::VDN: return "vdn";
    case MixerMode::IQL: return "iql";
  }
  return "?";
}

inline MixerMode mixer_mode_from_string(const std::string& s) {
  if (s == "qmix" || s == "QMIX") return MixerMode::QMIX;
  if (s == "vdn" || s == "VDN") return MixerMode::VDN;
  if (s == "iql" || s == "IQL") return MixerMode::IQL;
  throw ConfigInvalid("unknown mode '" + s + "' (expected qmix, vdn or iql)");
}

struct LearnerConfig {
  MixerMode mode = MixerMode::QMIX;
  int n_agents = 2;
  int obs_radius = 5;
  int grid_size = 8;
  std::vector<int> hidden{64, 64};
  int embed_dim = 32;
  double gamma = 0.99;
  double grad_clip = 10.0;
  AdamConfig adam;
  std::uint64_t seed = 0;

  std::size_t obs_size() const noexcept { return observation_size(obs_radius); }
  std::size_t state_size() const noexcept { return global_state_size(grid_size); }

  void validate() const {
    if (n_agents < 1) throw ConfigInvalid("n_agents must be >= 1");
    if (obs_radius < 1) throw ConfigInvalid("obs_radius must be >= 1");
    if (grid_size < 2) throw ConfigInvalid("grid_size must be >= 2");
    if (embed_dim < 1) throw ConfigInvalid("embed_dim must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigInvalid("gamma must lie in [0, 1)");
    if (!(grad_clip > 0.0)) throw ConfigInvalid("grad_clip must be > 0");
    for (int h : hidden)
      if (h < 1) throw ConfigInvalid("hidden sizes must be >= 1");
  }
};

// Where each network lives inside the flat parameter vector of a bundle.
struct BundleLayout {
  Topology agent;
  Topology hw1, hb1, hw2, hb2;
  std::size_t agent_off = 0, hw1_off = 0, hb1_off = 0, hw2_off = 0, hb2_off = 0;
  std::size_t total = 0;
  bool has_mixer = false;

  explicit BundleLayout(const LearnerConfig& c) {
    std::vector<int> sizes{static_cast<int>(c.obs_size())};
    sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
    sizes.push_back(kNumActions);
    agent = Topology::mlp(sizes, Activation::ReLU, Activation::Identity);
    total = agent.param_count();
    has_mixer = c.mode == MixerMode::QMIX;
    if (!has_mixer) return;
    const int s = static_cast<int>(c.state_size());
    const int e = c.embed_dim;
    hw1 = Topology({s, c.n_agents * e}, {Activation::Abs});
    hb1 = Topology({s, e}, {Activation::Identity});
    hw2 = Topology({s, e}, {Activation::Abs});
    hb2 = Topology({s, e, 1}, {Activation::ReLU, Activation::Identity});
    hw1_off = total;
    hb1_off = hw1_off + hw1.param_count();
    hw2_off = hb1_off + hb1.param_count();
    hb2_off = hw2_off + hw2.param_count();
    total = hb2_off + hb2.param_count();
  }

  static std::span<const double> slice(std::span<const double> p, std::size_t off, const Topology& t) {
    return p.subspan(off, t.param_count());
  }
  static std::span<double> slice(std::span<double> p, std::size_t off, const Topology& t) {
    return p.subspan(off, t.param_count());
  }
};

struct HyperTapes {
  Tape hw1, hb1, hw2, hb2;
};

// Scratch space for repeated loss evaluations on same-shaped batches.
struct TrainWorkspace {
  Tape agent;
  HyperTapes hyper;
};

// The trainable learner: one agent Q-network shared by all agents, the
// hypernetworks (QMIX only), target copies of both, and optimizer state.
class MixerBundle {
 public:
  explicit MixerBundle(const LearnerConfig& config)
      : config_(config), layout_((config.validate(), config)), online_(layout_.total, 0.0), adam_(layout_.total, config.adam) {
    Rng rng(derive_seed(config.seed, {0x51u}));
    std::span<double> p(online_);
    initialize(layout_.agent, BundleLayout::slice(p, layout_.agent_off, layout_.agent), rng);
    if (layout_.has_mixer) {
      initialize(layout_.hw1, BundleLayout::slice(p, layout_.hw1_off, layout_.hw1), rng);
      initialize(layout_.hb1, BundleLayout::slice(p, layout_.hb1_off, layout_.hb1), rng);
      initialize(layout_.hw2, BundleLayout::slice(p, layout_.hw2_off, layout_.hw2), rng);
      initialize(layout_.hb2, BundleLayout::slice(p, layout_.hb2_off, layout_.hb2), rng);
    }
    sync_targets();
  }

  const LearnerConfig& config() const noexcept { return config_; }
  const BundleLayout& layout() const noexcept { return layout_; }
  MixerMode mode() const noexcept { return config_.mode; }

  std::span<const double> online() const noexcept { return online_; }
  std::span<double> online_mut() noexcept { return online_; }
  std::span<const double> target() const noexcept { return target_; }
  std::span<double> target_mut() noexcept { return target_; }

  AdamState& optimizer() noexcept { return adam_; }
  const AdamState& optimizer() const noexcept { return adam_; }
  std::int64_t train_steps() const noexcept { return train_steps_; }
  void set_train_steps(std::int64_t n) noexcept { train_steps_ = n; }
  void count_train_step() noexcept { ++train_steps_; }
  TrainWorkspace& workspace() noexcept { return workspace_; }

  // Hard update: target := online.
  void sync_targets() { target_ = online_; }

  NetParams net(const Topology& topo, std::size_t off, bool use_target = false) const {
    NetParams out(topo);
    const auto& src = use_target ? target_ : online_;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(off), topo.param_count(), out.values.begin());
    return out;
  }

 private:
  LearnerConfig config_;
  BundleLayout layout_;
  ParamVector online_;
  ParamVector target_;
  AdamState adam_;
  std::int64_t train_steps_ = 0;
  TrainWorkspace workspace_;
};

// Q-values of the shared agent net for every column of `obs` (5 x cols).
inline Matrix agent_q_batch(const BundleLayout& layout, std::span<const double> params, const Matrix& obs,
                            Tape* tape = nullptr) {
  return forward(layout.agent, BundleLayout::slice(params, layout.agent_off, layout.agent), obs, tape);
}

inline std::array<double, kNumActions> agent_q_values(const MixerBundle& bundle, std::span<const double> observation) {
  if (observation.size() != bundle.config().obs_size())
    throw ShapeMismatch("observation has length " + std::to_string(observation.size()) + ", net expects " +
                        std::to_string(bundle.config().obs_size()));
  const Matrix x = Eigen::Map<const Eigen::VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  const Matrix q = agent_q_batch(bundle.layout(), bundle.online(), x);
  std::array<double, kNumActions> out{};
  for (int a = 0; a < kNumActions; ++a) out[static_cast<std::size_t>(a)] = q(a, 0);
  return out;
}

// Mixing-network weights generated from a batch of states (one column per sample).
// w1 column b is the n_agents x embed matrix of sample b, row-major.
struct MixingWeights {
  Matrix w1;
  Matrix b1;
  Matrix w2;
  Matrix b2;
};

inline MixingWeights generate_mixing_weights(const BundleLayout& layout, std::span<const double> params,
                                             const Matrix& states, HyperTapes* tapes = nullptr) {
  if (!layout.has_mixer) throw ShapeMismatch("bundle has no hypernetworks");
  MixingWeights w;
  w.w1 = forward(layout.hw1, BundleLayout::slice(params, layout.hw1_off, layout.hw1), states, tapes ? &tapes->hw1 : nullptr);
  w.b1 = forward(layout.hb1, BundleLayout::slice(params, layout.hb1_off, layout.hb1), states, tapes ? &tapes->hb1 : nullptr);
  w.w2 = forward(layout.hw2, BundleLayout::slice(params, layout.hw2_off, layout.hw2), states, tapes ? &tapes->hw2 : nullptr);
  w.b2 = forward(layout.hb2, BundleLayout::slice(params, layout.hb2_off, layout.hb2), states, tapes ? &tapes->hb2 : nullptr);
  return w;
}

// Q_tot = act(qs^T W1 + b1) . W2 + b2, per column. `hidden_pre` receives the
// hidden pre-activations (embed x B) for the backward pass.
inline Matrix mix_forward(const MixingWeights& w, const Matrix& qs, Activation hidden = Activation::ELU,
                          Matrix* hidden_pre = nullptr) {
  const Eigen::Index n = qs.rows(), batch = qs.cols(), embed = w.b1.rows();
  if (w.w1.rows() != n * embed || w.w1.cols() != batch || w.w2.rows() != embed || w.b2.rows() != 1)
    throw ShapeMismatch("mixing weights do not match agent Q-values");
  Matrix z = w.b1;
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = qs(i, b);
      for (Eigen::Index j = 0; j < embed; ++j) z(j, b) += q * w.w1(i * embed + j, b);
    }
  const Matrix h = activate(hidden, z);
  Matrix out = w.b2;
  for (Eigen::Index b = 0; b < batch; ++b) out(0, b) += h.col(b).dot(w.w2.col(b));
  if (hidden_pre) *hidden_pre = std::move(z);
  return out;
}

// Reverse of mix_forward. Returns d/dqs and fills `grad` with d/d(weights).
inline Matrix mix_backward(const MixingWeights& w, const Matrix& qs, const Matrix& hidden_pre, const Matrix& grad_out,
                           Activation hidden, MixingWeights& grad) {
  const Eigen::Index n = qs.rows(), batch = qs.cols(), embed = w.b1.rows();
  const Matrix h = activate(hidden, hidden_pre);
  const Matrix slope = activation_slope(hidden, hidden_pre);
  grad.b2 = grad_out;
  grad.w2 = h * grad_out.asDiagonal();
  Matrix dz = w.w2.cwiseProduct(slope) * grad_out.asDiagonal();
  grad.b1 = dz;
  grad.w1.resize(n * embed, batch);
  Matrix dqs(n, batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < embed; ++j) {
        grad.w1(i * embed + j, b) = dz(j, b) * qs(i, b);
        acc += dz(j, b) * w.w1(i * embed + j, b);
      }
      dqs(i, b) = acc;
    }
  return dqs;
}

// Joint value of agent Q-values `qs` in global state `state` (online params).
inline double mix(const MixerBundle& bundle, std::span<const double> qs, std::span<const double> state) {
  if (qs.size() != static_cast<std::size_t>(bundle.config().n_agents)) throw ShapeMismatch("one Q-value per agent required");
  switch (bundle.mode()) {
    case MixerMode::VDN: {
      double s = 0.0;
      for (double q : qs) s += q;
      return s;
    }
    case MixerMode::IQL: throw ShapeMismatch("IQL mode has no mixer");
    case MixerMode::QMIX: break;
  }
  if (state.size() != bundle.config().state_size()) throw ShapeMismatch("global state has the wrong length");
  const Matrix s = Eigen::Map<const Eigen::VectorXd>(state.data(), static_cast<Eigen::Index>(state.size()));
  const Matrix q = Eigen::Map<const Eigen::VectorXd>(qs.data(), static_cast<Eigen::Index>(qs.size()));
  return mix_forward(generate_mixing_weights(bundle.layout(), bundle.online(), s), q)(0, 0);
}

// Lowest action code among the maxima.
inline int greedy_action(const Matrix& q, Eigen::Index col) {
  int best = 0;
  for (int a = 1; a < q.rows(); ++a)
    if (q(a, col) > q(best, col)) best = a;
  return best;
}

// Regression targets. QMIX/VDN: 1 x B team targets; IQL: n_agents x B.
// Next-step greedy actions come from the target agent net; agents that are off
// the map at the next step contribute 0 to the mixer.
inline Matrix td_targets(const MixerBundle& bundle, const TransitionBatch& batch) {
  const auto& cfg = bundle.config();
  const auto& layout = bundle.layout();
  const std::size_t n = batch.n_agents, bsz = batch.size;
  if (n != static_cast<std::size_t>(cfg.n_agents)) throw ShapeMismatch("batch agent count does not match the bundle");
  const Matrix q_next = agent_q_batch(layout, bundle.target(), batch.next_obs);
  Matrix max_next = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bsz));
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(batch.slot(b, i));
      if (!batch.done[batch.slot(b, i)]) max_next(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = q_next(greedy_action(q_next, col), col);
    }

  if (cfg.mode == MixerMode::IQL) {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bsz));
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = batch.slot(b, i);
        if (!batch.active[s]) continue;
        const double boot = batch.done[s] ? 0.0 : cfg.gamma * max_next(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
        y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = batch.rewards[s] + boot;
      }
    return y;
  }

  Matrix next_tot;
  if (cfg.mode == MixerMode::VDN) {
    next_tot = max_next.colwise().sum();
  } else {
    next_tot = mix_forward(generate_mixing_weights(layout, bundle.target(), batch.next_state), max_next);
  }
  Matrix y(1, static_cast<Eigen::Index>(bsz));
  for (std::size_t b = 0; b < bsz; ++b) {
    const double boot = batch.terminal(b) ? 0.0 : cfg.gamma * next_tot(0, static_cast<Eigen::Index>(b));
    y(0, static_cast<Eigen::Index>(b)) = batch.team_reward(b) + boot;
  }
  return y;
}

struct LossReport {
  double loss = 0.0;
  std::vector<double> td_errors;  // prediction - target, one per unmasked sample
  double grad_norm = 0.0;         // before clipping
  double q_tot_mean = 0.0;
  double kink_margin = 0.0;       // smallest |pre-activation| at a ReLU/Abs
};

// Squared TD loss of the online parameters `params` against fixed `targets`,
// averaged over unmasked samples. When `grad` is non-empty the exact gradient
// is accumulated into it.
inline LossReport loss_and_grad(const LearnerConfig& cfg, const BundleLayout& layout, std::span<const double> params,
                                const TransitionBatch& batch, const Matrix& targets, std::span<double> grad = {},
                                TrainWorkspace* workspace = nullptr) {
  const std::size_t n = batch.n_agents, bsz = batch.size;
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != layout.total) throw ShapeMismatch("gradient buffer has the wrong length");
  if (params.size() != layout.total) throw ShapeMismatch("parameter vector has the wrong length");

  TrainWorkspace local;
  TrainWorkspace& ws = workspace ? *workspace : local;
  Tape& agent_tape = ws.agent;
  const Matrix q_all = agent_q_batch(layout, params, batch.obs, &agent_tape);
  Matrix qs = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bsz));
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = batch.slot(b, i);
      if (batch.active[s]) qs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = q_all(batch.actions[s], static_cast<Eigen::Index>(s));
    }

  LossReport report;
  report.kink_margin = min_kink_margin(layout.agent, agent_tape);
  Matrix dqs = Matrix::Zero(qs.rows(), qs.cols());

  if (cfg.mode == MixerMode::IQL) {
    if (targets.rows() != static_cast<Eigen::Index>(n) || targets.cols() != static_cast<Eigen::Index>(bsz))
      throw ShapeMismatch("IQL targets must be n_agents x batch");
    std::size_t count = 0;
    double sum_sq = 0.0, sum_q = 0.0;
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        if (!batch.active[batch.slot(b, i)]) continue;
        const auto ri = static_cast<Eigen::Index>(i), cb = static_cast<Eigen::Index>(b);
        const double delta = qs(ri, cb) - targets(ri, cb);
        report.td_errors.push_back(delta);
        sum_sq += delta * delta;
        sum_q += qs(ri, cb);
        ++count;
      }
    if (count == 0) return report;
    report.loss = sum_sq / static_cast<double>(count);
    report.q_tot_mean = sum_q / static_cast<double>(count);
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        if (!batch.active[batch.slot(b, i)]) continue;
        const auto ri = static_cast<Eigen::Index>(i), cb = static_cast<Eigen::Index>(b);
        dqs(ri, cb) = 2.0 * (qs(ri, cb) - targets(ri, cb)) / static_cast<double>(count);
      }
  } else {
    if (targets.rows() != 1 || targets.cols() != static_cast<Eigen::Index>(bsz))
      throw ShapeMismatch("team targets must be 1 x batch");
    Matrix q_tot;
    MixingWeights weights;
    HyperTapes& tapes = ws.hyper;
    Matrix hidden_pre;
    if (cfg.mode == MixerMode::QMIX) {
      weights = generate_mixing_weights(layout, params, batch.state, &tapes);
      q_tot = mix_forward(weights, qs, Activation::ELU, &hidden_pre);
      report.kink_margin = std::min({report.kink_margin, min_kink_margin(layout.hw1, tapes.hw1),
                                     min_kink_margin(layout.hw2, tapes.hw2), min_kink_margin(layout.hb2, tapes.hb2)});
    } else {
      q_tot = qs.colwise().sum();
    }
    const Matrix delta = q_tot - targets;
    report.td_errors.assign(delta.data(), delta.data() + delta.size());
    report.loss = delta.squaredNorm() / static_cast<double>(bsz);
    report.q_tot_mean = q_tot.mean();
    if (want_grad) {
      const Matrix d_tot = 2.0 * delta / static_cast<double>(bsz);
      if (cfg.mode == MixerMode::QMIX) {
        MixingWeights dw;
        dqs = mix_backward(weights, qs, hidden_pre, d_tot, Activation::ELU, dw);
        backward(layout.hw1, BundleLayout::slice(params, layout.hw1_off, layout.hw1), tapes.hw1, dw.w1,
                 BundleLayout::slice(grad, layout.hw1_off, layout.hw1), false);
        backward(layout.hb1, BundleLayout::slice(params, layout.hb1_off, layout.hb1), tapes.hb1, dw.b1,
                 BundleLayout::slice(grad, layout.hb1_off, layout.hb1), false);
        backward(layout.hw2, BundleLayout::slice(params, layout.hw2_off, layout.hw2), tapes.hw2, dw.w2,
                 BundleLayout::slice(grad, layout.hw2_off, layout.hw2), false);
        backward(layout.hb2, BundleLayout::slice(params, layout.hb2_off, layout.hb2), tapes.hb2, dw.b2,
                 BundleLayout::slice(grad, layout.hb2_off, layout.hb2), false);
      } else {
        dqs = d_tot.replicate(static_cast<Eigen::Index>(n), 1);
      }
    }
  }

  if (want_grad) {
    // Off-map agents feed a constant 0 into the mixer, so their slots get no gradient.
    Matrix d_all = Matrix::Zero(q_all.rows(), q_all.cols());
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = batch.slot(b, i);
        if (batch.active[s])
          d_all(batch.actions[s], static_cast<Eigen::Index>(s)) = dqs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
      }
    backward(layout.agent, BundleLayout::slice(params, layout.agent_off, layout.agent), agent_tape, d_all,
             BundleLayout::slice(grad, layout.agent_off, layout.agent), false);
  }
  return report;
}

// One clipped optimizer update on a batch; target parameters are read only.
inline LossReport train_step(MixerBundle& bundle, const TransitionBatch& batch) {
  if (batch.size == 0) throw ShapeMismatch("empty batch");
  const Matrix targets = td_targets(bundle, batch);
  ParamVector grad(bundle.layout().total, 0.0);
  LossReport report =
      loss_and_grad(bundle.config(), bundle.layout(), bundle.online(), batch, targets, grad, &bundle.workspace());
  report.grad_norm = clip_global_norm(grad, bundle.config().grad_clip);
  adam_step(bundle.online_mut(), grad, bundle.optimizer());
  bundle.count_train_step();
  return report;
}

inline void sync_targets(MixerBundle& bundle) { bundle.sync_targets(); }

// Per column: a uniform random action with probability epsilon, else the
// greedy action. Inactive columns emit Stay and consume no randomness.
inline std::vector<Action> epsilon_greedy(const Matrix& q, std::span<const std::uint8_t> active, double epsilon, Rng& rng) {
  std::vector<Action> out(static_cast<std::size_t>(q.cols()), Action::Stay);
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (!active.empty() && !active[static_cast<std::size_t>(c)]) continue;
    if (uniform01(rng) < epsilon)
      out[static_cast<std::size_t>(c)] = static_cast<Action>(uniform_index(rng, kNumActions));
    else
      out[static_cast<std::size_t>(c)] = static_cast<Action>(greedy_action(q, c));
  }
  return out;
}

// Observations of all agents (one column each) -> per-agent actions.
inline std::vector<Action> select_actions(const MixerBundle& bundle, const Matrix& observations,
                                          std::span<const std::uint8_t> active, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigInvalid("epsilon must lie in [0, 1]");
  if (!active.empty() && active.size() != static_cast<std::size_t>(observations.cols()))
    throw ShapeMismatch("one active flag per observation column required");
  const Matrix q = agent_q_batch(bundle.layout(), bundle.online(), observations);
  return epsilon_greedy(q, active, epsilon, rng);
}

inline constexpr int kBundleFormatVersion = 1;

inline nlohmann::json save_checkpoint(const MixerBundle& bundle) {
  const auto& cfg = bundle.config();
  const auto& l = bundle.layout();
  nlohmann::json j{{"format_version", kBundleFormatVersion},
                   {"mode", to_string(cfg.mode)},
                   {"n_agents", cfg.n_agents},
                   {"obs_radius", cfg.obs_radius},
                   {"grid_size", cfg.grid_size},
                   {"hidden", cfg.hidden},
                   {"embed_dim", cfg.embed_dim},
                   {"gamma", cfg.gamma},
                   {"train_steps", bundle.train_steps()},
                   {"agent_net", bundle.net(l.agent, l.agent_off)}};
  if (l.has_mixer)
    j["hypernets"] = {{"hw1", bundle.net(l.hw1, l.hw1_off)},
                      {"hb1", bundle.net(l.hb1, l.hb1_off)},
                      {"hw2", bundle.net(l.hw2, l.hw2_off)},
                      {"hb2", bundle.net(l.hb2, l.hb2_off)}};
  return j;
}

// Restores online and target parameters; optimizer moments start fresh.
inline MixerBundle load_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kBundleFormatVersion) throw CheckpointInvalid("unsupported format_version");
    LearnerConfig cfg;
    cfg.mode = mixer_mode_from_string(j.at("mode").get<std::string>());
    cfg.n_agents = j.at("n_agents").get<int>();
    cfg.obs_radius = j.at("obs_radius").get<int>();
    cfg.grid_size = j.at("grid_size").get<int>();
    cfg.hidden = j.at("hidden").get<std::vector<int>>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.gamma = j.at("gamma").get<double>();
    MixerBundle bundle(cfg);
    const auto& l = bundle.layout();
    auto restore = [&](const nlohmann::json& node, const Topology& topo, std::size_t off) {
      const auto net = node.get<NetParams>();
      if (net.topology != topo) throw CheckpointInvalid("network topology does not match the bundle metadata");
      std::copy(net.values.begin(), net.values.end(), bundle.online_mut().begin() + static_cast<std::ptrdiff_t>(off));
    };
    restore(j.at("agent_net"), l.agent, l.agent_off);
    if (l.has_mixer) {
      const auto& h = j.at("hypernets");
      restore(h.at("hw1"), l.hw1, l.hw1_off);
      restore(h.at("hb1"), l.hb1, l.hb1_off);
      restore(h.at("hw2"), l.hw2, l.hw2_off);
      restore(h.at("hb2"), l.hb2, l.hb2_off);
    }
    bundle.set_train_steps(j.at("train_steps").get<std::int64_t>());
    bundle.sync_targets();
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointInvalid(e.what());
  }
}

}  // namespace gridmix
