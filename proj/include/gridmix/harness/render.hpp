#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gridmix/harness/evaluate.hpp"

namespace gridmix {

// '#' obstacle, '.' free, digits for agents (index mod 10), letters for their
// goals. Agents that have left the map are drawn with neither.
inline std::string render_state(const EnvState& s) {
  const int n = s.grid.size;
  std::vector<std::string> rows(static_cast<std::size_t>(n), std::string(static_cast<std::size_t>(n), '.'));
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (s.grid.is_blocked({r, c})) rows[r][c] = '#';
  for (std::size_t i = 0; i < s.n_agents(); ++i)
    if (s.agents[i].active) rows[s.agents[i].goal.row][s.agents[i].goal.col] = static_cast<char>('a' + i % 26);
  for (std::size_t i = 0; i < s.n_agents(); ++i)
    if (s.agents[i].active) rows[s.agents[i].pos.row][s.agents[i].pos.col] = static_cast<char>('0' + i % 10);
  std::string out;
  for (const auto& row : rows) out += row + '\n';
  return out;
}

// One frame for the initial state plus one per logged step.
inline std::vector<std::string> render_frames(const EpisodeLog& log) {
  EnvState state;
  try {
    state = load_map(log.map, log.obs_radius, log.horizon);
  } catch (const MapInvalid& e) {
    throw MalformedLog(e.what());
  }
  std::vector<std::string> frames{render_state(state)};
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    const auto& row = log.actions[t];
    if (row.size() != state.n_agents()) throw MalformedLog("step " + std::to_string(t) + " has the wrong number of actions");
    if (state.episode_over()) throw MalformedLog("log continues after the episode ended at step " + std::to_string(t));
    std::vector<Action> actions;
    for (int code : row) {
      if (code < 0 || code >= kNumActions) throw MalformedLog("invalid action code " + std::to_string(code));
      actions.push_back(static_cast<Action>(code));
    }
    step(state, actions);
    frames.push_back(render_state(state));
  }
  return frames;
}

inline void print_frames(std::ostream& os, const std::vector<std::string>& frames) {
  for (std::size_t t = 0; t < frames.size(); ++t) os << "t=" << t << '\n' << frames[t] << '\n';
}

}  // namespace gridmix
