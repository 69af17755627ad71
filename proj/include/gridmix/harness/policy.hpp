#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gridmix/grid_world.hpp"
#include "gridmix/observation.hpp"
#include "gridmix/qmix.hpp"

namespace gridmix {

// Maps the current state to one action per agent. Implementations must be
// callable concurrently on different states; randomness comes from `rng`.
using Policy = std::function<std::vector<Action>(const EnvState&, Rng&)>;

inline Policy random_policy() {
  return [](const EnvState& s, Rng& rng) {
    std::vector<Action> out(s.n_agents(), Action::Stay);
    for (std::size_t i = 0; i < s.n_agents(); ++i)
      if (s.agents[i].active) out[i] = static_cast<Action>(uniform_index(rng, kNumActions));
    return out;
  };
}

// Each agent steps to the neighbour with the smallest static distance to its
// goal, lowest action code on ties. Other agents are ignored.
inline Action greedy_bfs_action(const EnvState& s, std::size_t i) {
  const AgentState& a = s.agents[i];
  Action best = Action::Stay;
  int best_d = a.distance(s.grid);
  for (int code = 1; code < kNumActions; ++code) {
    const Cell n = moved(a.pos, static_cast<Action>(code));
    if (!s.grid.is_free(n)) continue;
    const int d = a.distance_at(s.grid, n);
    if (d < best_d) {
      best_d = d;
      best = static_cast<Action>(code);
    }
  }
  return best;
}

inline Policy greedy_bfs_policy() {
  return [](const EnvState& s, Rng&) {
    std::vector<Action> out(s.n_agents(), Action::Stay);
    for (std::size_t i = 0; i < s.n_agents(); ++i)
      if (s.agents[i].active) out[i] = greedy_bfs_action(s, i);
    return out;
  };
}

inline Policy baseline_policy(const std::string& kind) {
  if (kind == "random") return random_policy();
  if (kind == "greedy_bfs") return greedy_bfs_policy();
  throw ConfigInvalid("unknown baseline '" + kind + "' (expected random or greedy_bfs)");
}

// Observations of all agents as columns; inactive agents get zero columns.
inline Matrix observation_matrix(const EnvState& s, std::vector<std::uint8_t>* active = nullptr) {
  const std::size_t len = observation_size(s.obs_radius);
  Matrix obs = Matrix::Zero(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(s.n_agents()));
  if (active) active->assign(s.n_agents(), 0);
  for (std::size_t i = 0; i < s.n_agents(); ++i) {
    if (!s.agents[i].active) continue;
    observe_into<double>(s, i, std::span<double>(obs.col(static_cast<Eigen::Index>(i)).data(), len));
    if (active) (*active)[i] = 1;
  }
  return obs;
}

// Greedy (epsilon = 0) policy of the shared agent Q-network. The bundle must
// outlive the policy and must not be trained while the policy is in use.
inline Policy greedy_q_policy(const MixerBundle& bundle) {
  return [&bundle](const EnvState& s, Rng&) {
    if (s.obs_radius != bundle.config().obs_radius)
      throw TopologyMismatch("map observation radius differs from the network's");
    std::vector<std::uint8_t> active;
    const Matrix obs = observation_matrix(s, &active);
    const Matrix q = agent_q_batch(bundle.layout(), bundle.online(), obs);
    std::vector<Action> out(s.n_agents(), Action::Stay);
    for (std::size_t i = 0; i < s.n_agents(); ++i)
      if (active[i]) out[i] = static_cast<Action>(greedy_action(q, static_cast<Eigen::Index>(i)));
    return out;
  };
}

}  // namespace gridmix
