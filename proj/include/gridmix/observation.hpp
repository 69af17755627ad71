#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "gridmix/grid_world.hpp"

namespace gridmix {

enum ObsChannel : int { kObsObstacles = 0, kObsAgents = 1, kObsOtherGoals = 2, kObsOwnGoal = 3 };
inline constexpr int kObsChannels = 4;

constexpr int window_side(int radius) noexcept { return 2 * radius + 1; }
constexpr std::size_t observation_size(int radius) noexcept {
  return static_cast<std::size_t>(kObsChannels) * window_side(radius) * window_side(radius);
}

// Offset of a goal relative to the observer, moved onto the window when it
// falls outside. Componentwise clamping keeps the in-range coordinate (border
// cell on the same row/column) or lands on the nearest corner.
constexpr std::pair<int, int> project_goal(int delta_row, int delta_col, int radius) noexcept {
  return {std::clamp(delta_row, -radius, radius), std::clamp(delta_col, -radius, radius)};
}

// Egocentric 4 x (2R+1) x (2R+1) observation; channel-major, rows then columns.
struct Observation {
  int radius = 0;
  std::vector<double> data;

  int side() const noexcept { return window_side(radius); }
  double at(int channel, int row, int col) const {
    return data[(static_cast<std::size_t>(channel) * side() + row) * side() + col];
  }
};

// Writes the observation of `agent_index` into `out` (length observation_size(R)).
template <class T>
void observe_into(const EnvState& state, std::size_t agent_index, std::span<T> out) {
  const int radius = state.obs_radius;
  const int side = window_side(radius);
  if (out.size() != observation_size(radius)) throw ShapeMismatch("observation buffer has wrong length");
  if (agent_index >= state.agents.size()) throw InactiveAgent("agent index out of range");
  const AgentState& self = state.agents[agent_index];
  if (!self.active) throw InactiveAgent("agent " + std::to_string(agent_index) + " is not on the map");

  const std::size_t plane = static_cast<std::size_t>(side) * side;
  std::fill(out.begin(), out.end(), T(0));
  auto slot = [&](int channel, int wr, int wc) -> T& {
    return out[channel * plane + static_cast<std::size_t>(wr) * side + wc];
  };
  const int top = self.pos.row - radius;
  const int left = self.pos.col - radius;
  auto in_window = [&](Cell c) {
    return c.row >= top && c.row < top + side && c.col >= left && c.col < left + side;
  };

  for (int wr = 0; wr < side; ++wr) {
    for (int wc = 0; wc < side; ++wc) {
      const Cell c{top + wr, left + wc};
      if (!state.grid.in_bounds(c) || state.grid.is_blocked(c)) slot(kObsObstacles, wr, wc) = T(1);
    }
  }

  for (std::size_t j = 0; j < state.agents.size(); ++j) {
    const AgentState& other = state.agents[j];
    if (j == agent_index || !other.active) continue;
    if (in_window(other.pos)) slot(kObsAgents, other.pos.row - top, other.pos.col - left) = T(1);
    if (in_window(other.goal)) slot(kObsOtherGoals, other.goal.row - top, other.goal.col - left) = T(1);
  }
  // Active agents never stand on their goal, so the distance is at least 1.
  slot(kObsAgents, radius, radius) = T(1.0 / static_cast<double>(self.distance(state.grid)));

  const auto [dr, dc] = project_goal(self.goal.row - self.pos.row, self.goal.col - self.pos.col, radius);
  slot(kObsOwnGoal, dr + radius, dc + radius) = T(1);
}

inline Observation observe(const EnvState& state, std::size_t agent_index) {
  Observation obs;
  obs.radius = state.obs_radius;
  obs.data.resize(observation_size(state.obs_radius));
  observe_into<double>(state, agent_index, obs.data);
  return obs;
}

}  // namespace gridmix
