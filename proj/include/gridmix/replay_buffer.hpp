#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridmix/dense_net.hpp"
#include "gridmix/grid_world.hpp"
#include "gridmix/random.hpp"

namespace gridmix {

// One environment step for all agents. Per-agent arrays are indexed by agent;
// observation arrays are agent-major concatenations of flattened observations.
// Agents inactive at the step start carry zero observations and Stay.
struct JointTransition {
  std::vector<double> obs;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> next_obs;
  std::vector<double> state;
  std::vector<double> next_state;
  std::vector<std::uint8_t> done;    // agent is off the map after the step
  std::vector<std::uint8_t> active;  // agent was on the map at the step start

  std::size_t n_agents() const noexcept { return actions.size(); }
  bool terminal() const noexcept {
    return std::all_of(done.begin(), done.end(), [](std::uint8_t d) { return d != 0; });
  }
};

// Column-per-sample view of a batch, ready for the learner. Agent columns in
// `obs`/`next_obs` are ordered sample-major: column b * n_agents + i.
struct TransitionBatch {
  std::size_t size = 0;
  std::size_t n_agents = 0;
  Matrix obs;
  Matrix next_obs;
  Matrix state;
  Matrix next_state;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;
  std::vector<std::uint8_t> active;
  std::vector<std::size_t> indices;

  std::size_t slot(std::size_t b, std::size_t i) const noexcept { return b * n_agents + i; }
  bool terminal(std::size_t b) const noexcept {
    for (std::size_t i = 0; i < n_agents; ++i)
      if (!done[slot(b, i)]) return false;
    return true;
  }
  // Sum of the rewards of agents on the map at the step start.
  double team_reward(std::size_t b) const noexcept {
    double r = 0.0;
    for (std::size_t i = 0; i < n_agents; ++i)
      if (active[slot(b, i)]) r += rewards[slot(b, i)];
    return r;
  }
};

inline TransitionBatch batch_from(std::span<const JointTransition> items) {
  if (items.empty()) throw ShapeMismatch("empty batch");
  const std::size_t n = items.front().n_agents();
  const std::size_t obs_len = items.front().obs.size() / n;
  const std::size_t state_len = items.front().state.size();
  TransitionBatch batch;
  batch.size = items.size();
  batch.n_agents = n;
  batch.obs.resize(static_cast<Eigen::Index>(obs_len), static_cast<Eigen::Index>(items.size() * n));
  batch.next_obs.resizeLike(batch.obs);
  batch.state.resize(static_cast<Eigen::Index>(state_len), static_cast<Eigen::Index>(items.size()));
  batch.next_state.resizeLike(batch.state);
  for (std::size_t b = 0; b < items.size(); ++b) {
    const JointTransition& tr = items[b];
    if (tr.n_agents() != n || tr.obs.size() != n * obs_len || tr.next_obs.size() != n * obs_len ||
        tr.state.size() != state_len || tr.next_state.size() != state_len || tr.rewards.size() != n ||
        tr.done.size() != n || tr.active.size() != n)
      throw ShapeMismatch("transition " + std::to_string(b) + " has inconsistent shapes");
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(b * n + i);
      for (std::size_t k = 0; k < obs_len; ++k) {
        batch.obs(static_cast<Eigen::Index>(k), col) = tr.obs[i * obs_len + k];
        batch.next_obs(static_cast<Eigen::Index>(k), col) = tr.next_obs[i * obs_len + k];
      }
      batch.actions.push_back(static_cast<int>(tr.actions[i]));
      batch.rewards.push_back(tr.rewards[i]);
      batch.done.push_back(tr.done[i]);
      batch.active.push_back(tr.active[i]);
    }
    for (std::size_t k = 0; k < state_len; ++k) {
      batch.state(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = tr.state[k];
      batch.next_state(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = tr.next_state[k];
    }
    batch.indices.push_back(b);
  }
  return batch;
}

// Fixed-capacity ring of joint transitions with uniform sampling.
// Observations and states are held in single precision: their entries are
// 0/1 flags except the inverse goal distance.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t n_agents, std::size_t obs_len, std::size_t state_len,
               std::uint64_t seed)
      : capacity_(capacity), n_agents_(n_agents), obs_len_(obs_len), state_len_(state_len), rng_(seed) {
    if (capacity == 0 || n_agents == 0) throw ConfigInvalid("replay buffer needs capacity and agents >= 1");
    obs_.resize(capacity * n_agents * obs_len);
    next_obs_.resize(obs_.size());
    state_.resize(capacity * state_len);
    next_state_.resize(state_.size());
    actions_.resize(capacity * n_agents);
    rewards_.resize(capacity * n_agents);
    done_.resize(capacity * n_agents);
    active_.resize(capacity * n_agents);
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t cursor() const noexcept { return cursor_; }
  std::size_t n_agents() const noexcept { return n_agents_; }

  void push(const JointTransition& tr) {
    if (tr.n_agents() != n_agents_ || tr.obs.size() != n_agents_ * obs_len_ ||
        tr.next_obs.size() != n_agents_ * obs_len_ || tr.state.size() != state_len_ ||
        tr.next_state.size() != state_len_ || tr.rewards.size() != n_agents_ || tr.done.size() != n_agents_ ||
        tr.active.size() != n_agents_)
      throw ShapeMismatch("transition does not match the buffer layout");
    const std::size_t s = cursor_;
    std::copy(tr.obs.begin(), tr.obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(s * n_agents_ * obs_len_));
    std::copy(tr.next_obs.begin(), tr.next_obs.end(),
              next_obs_.begin() + static_cast<std::ptrdiff_t>(s * n_agents_ * obs_len_));
    std::copy(tr.state.begin(), tr.state.end(), state_.begin() + static_cast<std::ptrdiff_t>(s * state_len_));
    std::copy(tr.next_state.begin(), tr.next_state.end(),
              next_state_.begin() + static_cast<std::ptrdiff_t>(s * state_len_));
    for (std::size_t i = 0; i < n_agents_; ++i) {
      actions_[s * n_agents_ + i] = tr.actions[i];
      rewards_[s * n_agents_ + i] = tr.rewards[i];
      done_[s * n_agents_ + i] = tr.done[i];
      active_[s * n_agents_ + i] = tr.active[i];
    }
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  // Stored transition at ring slot `s`.
  JointTransition at(std::size_t s) const {
    if (s >= size_) throw Underfilled("slot " + std::to_string(s) + " is empty");
    JointTransition tr;
    const auto obs0 = obs_.begin() + static_cast<std::ptrdiff_t>(s * n_agents_ * obs_len_);
    const auto nobs0 = next_obs_.begin() + static_cast<std::ptrdiff_t>(s * n_agents_ * obs_len_);
    const auto st0 = state_.begin() + static_cast<std::ptrdiff_t>(s * state_len_);
    const auto nst0 = next_state_.begin() + static_cast<std::ptrdiff_t>(s * state_len_);
    tr.obs.assign(obs0, obs0 + static_cast<std::ptrdiff_t>(n_agents_ * obs_len_));
    tr.next_obs.assign(nobs0, nobs0 + static_cast<std::ptrdiff_t>(n_agents_ * obs_len_));
    tr.state.assign(st0, st0 + static_cast<std::ptrdiff_t>(state_len_));
    tr.next_state.assign(nst0, nst0 + static_cast<std::ptrdiff_t>(state_len_));
    for (std::size_t i = 0; i < n_agents_; ++i) {
      tr.actions.push_back(actions_[s * n_agents_ + i]);
      tr.rewards.push_back(rewards_[s * n_agents_ + i]);
      tr.done.push_back(done_[s * n_agents_ + i]);
      tr.active.push_back(active_[s * n_agents_ + i]);
    }
    return tr;
  }

  // Uniform with replacement over stored transitions.
  std::vector<std::size_t> sample_indices(std::size_t batch_size) {
    if (size_ < batch_size || size_ == 0)
      throw Underfilled("buffer holds " + std::to_string(size_) + " transitions, batch needs " +
                        std::to_string(batch_size));
    std::vector<std::size_t> idx(batch_size);
    for (auto& s : idx) s = uniform_index(rng_, size_);
    return idx;
  }

  TransitionBatch sample(std::size_t batch_size) { return gather(sample_indices(batch_size)); }

  // Same draw as sample(), written into `batch` so its storage is reused.
  void sample_into(std::size_t batch_size, TransitionBatch& batch) { gather_into(sample_indices(batch_size), batch); }

  TransitionBatch gather(std::span<const std::size_t> slots) const {
    TransitionBatch batch;
    gather_into(slots, batch);
    return batch;
  }

  void gather_into(std::span<const std::size_t> slots, TransitionBatch& batch) const {
    batch.size = slots.size();
    batch.n_agents = n_agents_;
    const auto cols = static_cast<Eigen::Index>(slots.size() * n_agents_);
    batch.obs.resize(static_cast<Eigen::Index>(obs_len_), cols);
    batch.next_obs.resize(static_cast<Eigen::Index>(obs_len_), cols);
    batch.state.resize(static_cast<Eigen::Index>(state_len_), static_cast<Eigen::Index>(slots.size()));
    batch.next_state.resizeLike(batch.state);
    batch.actions.resize(slots.size() * n_agents_);
    batch.rewards.resize(slots.size() * n_agents_);
    batch.done.resize(slots.size() * n_agents_);
    batch.active.resize(slots.size() * n_agents_);
    batch.indices.assign(slots.begin(), slots.end());
    for (std::size_t b = 0; b < slots.size(); ++b) {
      const std::size_t s = slots[b];
      if (s >= size_) throw Underfilled("slot " + std::to_string(s) + " is empty");
      for (std::size_t i = 0; i < n_agents_; ++i) {
        const std::size_t src = (s * n_agents_ + i) * obs_len_;
        const auto col = static_cast<Eigen::Index>(b * n_agents_ + i);
        batch.obs.col(col) =
            Eigen::Map<const Eigen::VectorXf>(obs_.data() + src, static_cast<Eigen::Index>(obs_len_)).cast<double>();
        batch.next_obs.col(col) =
            Eigen::Map<const Eigen::VectorXf>(next_obs_.data() + src, static_cast<Eigen::Index>(obs_len_))
                .cast<double>();
        batch.actions[b * n_agents_ + i] = static_cast<int>(actions_[s * n_agents_ + i]);
        batch.rewards[b * n_agents_ + i] = rewards_[s * n_agents_ + i];
        batch.done[b * n_agents_ + i] = done_[s * n_agents_ + i];
        batch.active[b * n_agents_ + i] = active_[s * n_agents_ + i];
      }
      batch.state.col(static_cast<Eigen::Index>(b)) =
          Eigen::Map<const Eigen::VectorXf>(state_.data() + s * state_len_, static_cast<Eigen::Index>(state_len_))
              .cast<double>();
      batch.next_state.col(static_cast<Eigen::Index>(b)) =
          Eigen::Map<const Eigen::VectorXf>(next_state_.data() + s * state_len_,
                                            static_cast<Eigen::Index>(state_len_))
              .cast<double>();
    }
  }

 private:
  std::size_t capacity_;
  std::size_t n_agents_;
  std::size_t obs_len_;
  std::size_t state_len_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  Rng rng_;
  std::vector<float> obs_;
  std::vector<float> next_obs_;
  std::vector<float> state_;
  std::vector<float> next_state_;
  std::vector<Action> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> done_;
  std::vector<std::uint8_t> active_;
};

}  // namespace gridmix
