#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridmix/error.hpp"
#include "gridmix/random.hpp"

namespace gridmix {

// Row 0 is the top row, column 0 the leftmost column.
struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

// Integer codes are part of the serialized formats; do not reorder.
enum class Action : std::uint8_t { Stay = 0, Up = 1, Down = 2, Left = 3, Right = 4 };
inline constexpr int kNumActions = 5;

constexpr Cell moved(Cell c, Action a) noexcept {
  switch (a) {
    case Action::Up: return {c.row - 1, c.col};
    case Action::Down: return {c.row + 1, c.col};
    case Action::Left: return {c.row, c.col - 1};
    case Action::Right: return {c.row, c.col + 1};
    case Action::Stay: break;
  }
  return c;
}

constexpr Action action_from_code(int code) {
  if (code < 0 || code >= kNumActions) throw ConfigInvalid("action code out of range: " + std::to_string(code));
  return static_cast<Action>(code);
}

struct EnvConfig {
  int size = 8;
  double density = 0.3;
  int n_agents = 1;
  int obs_radius = 5;
  int horizon = 16;
  std::optional<int> goal_dist;
  std::uint64_t seed = 0;

  void validate() const {
    if (size < 2) throw ConfigInvalid("size must be >= 2");
    if (!(density >= 0.0 && density < 1.0)) throw ConfigInvalid("density must lie in [0, 1)");
    if (n_agents < 1) throw ConfigInvalid("n_agents must be >= 1");
    if (obs_radius < 1 || obs_radius > size) throw ConfigInvalid("obs_radius must lie in [1, size]");
    if (horizon < 1) throw ConfigInvalid("horizon must be >= 1");
    if (goal_dist && (*goal_dist < 1 || *goal_dist > size * size))
      throw ConfigInvalid("goal_dist must lie in [1, size^2]");
  }

  int obstacle_count() const {
    return static_cast<int>(std::floor(density * static_cast<double>(size) * static_cast<double>(size)));
  }
};

struct GridMap {
  int size = 0;
  std::vector<std::uint8_t> blocked;  // row-major, 1 = obstacle

  GridMap() = default;
  explicit GridMap(int n) : size(n), blocked(static_cast<std::size_t>(n) * n, 0) {}

  bool in_bounds(Cell c) const noexcept { return c.row >= 0 && c.col >= 0 && c.row < size && c.col < size; }
  std::size_t index(Cell c) const noexcept { return static_cast<std::size_t>(c.row) * size + c.col; }
  Cell cell(std::size_t idx) const noexcept {
    return {static_cast<int>(idx / size), static_cast<int>(idx % size)};
  }
  bool is_blocked(Cell c) const noexcept { return blocked[index(c)] != 0; }
  bool is_free(Cell c) const noexcept { return in_bounds(c) && !is_blocked(c); }
  void set_blocked(Cell c, bool b) noexcept { blocked[index(c)] = b ? 1 : 0; }
  std::size_t obstacle_count() const noexcept {
    return static_cast<std::size_t>(std::count(blocked.begin(), blocked.end(), std::uint8_t{1}));
  }

  friend bool operator==(const GridMap&, const GridMap&) = default;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max();
using DistanceField = std::vector<int>;

// 4-connected BFS distance to `goal` over free cells. Blocked and unreachable
// cells hold kUnreachable.
inline DistanceField bfs_distance_field(const GridMap& grid, Cell goal) {
  DistanceField dist(grid.blocked.size(), kUnreachable);
  if (!grid.is_free(goal)) return dist;
  std::vector<Cell> frontier{goal};
  frontier.reserve(grid.blocked.size());
  dist[grid.index(goal)] = 0;
  static constexpr std::array<Action, 4> kMoves{Action::Up, Action::Down, Action::Left, Action::Right};
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const Cell c = frontier[head];
    const int next = dist[grid.index(c)] + 1;
    for (Action a : kMoves) {
      const Cell n = moved(c, a);
      if (!grid.is_free(n)) continue;
      int& d = dist[grid.index(n)];
      if (d != kUnreachable) continue;
      d = next;
      frontier.push_back(n);
    }
  }
  return dist;
}

struct AgentState {
  Cell pos;
  Cell goal;
  bool active = true;
  bool reached = false;  // set once the agent enters its goal
  DistanceField dist_field;

  int distance_at(const GridMap& grid, Cell c) const { return dist_field[grid.index(c)]; }
  int distance(const GridMap& grid) const { return distance_at(grid, pos); }

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct EnvState {
  GridMap grid;
  std::vector<AgentState> agents;
  int t = 0;
  int horizon = 1;
  int obs_radius = 1;
  Rng rng;

  std::size_t n_agents() const noexcept { return agents.size(); }
  std::size_t active_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(agents.begin(), agents.end(), [](const AgentState& a) { return a.active; }));
  }
  bool episode_over() const noexcept { return t >= horizon || active_count() == 0; }
  std::size_t reached_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(agents.begin(), agents.end(), [](const AgentState& a) { return a.reached; }));
  }
  // Index of the active agent at `c`, or -1.
  int occupant(Cell c) const noexcept {
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (agents[i].active && agents[i].pos == c) return static_cast<int>(i);
    return -1;
  }

  // Equality ignores the generator state.
  friend bool operator==(const EnvState& a, const EnvState& b) {
    return a.grid == b.grid && a.agents == b.agents && a.t == b.t && a.horizon == b.horizon &&
           a.obs_radius == b.obs_radius;
  }
};

struct StepOutcome {
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;   // agent entered its goal on this step
  std::vector<std::uint8_t> moved;  // position changed on this step
  bool episode_over = false;
};

inline constexpr double kRewardProgress = 0.5;
inline constexpr double kRewardStay = -0.5;
inline constexpr double kRewardRegress = -1.0;

// The grid graph is bipartite, so a successful move changes the BFS distance
// by exactly one.
inline double reward_for(const GridMap& grid, const AgentState& agent, Cell old_pos, Cell new_pos) {
  if (old_pos == new_pos) return kRewardStay;
  const int d_old = agent.distance_at(grid, old_pos);
  const int d_new = agent.distance_at(grid, new_pos);
  assert((d_new == d_old - 1 || d_new == d_old + 1) && "bipartite move property violated");
  return d_new < d_old ? kRewardProgress : kRewardRegress;
}

// Agents resolve one at a time in ascending index. A move fails (the agent
// stays) when the target is off-grid, blocked, or holds an active agent at its
// already-resolved position. Agents entering their goal leave the map at once.
inline StepOutcome step(EnvState& state, std::span<const Action> actions) {
  const std::size_t n = state.agents.size();
  if (actions.size() != n)
    throw InvalidActionCount("expected " + std::to_string(n) + " actions, got " + std::to_string(actions.size()));
  if (state.episode_over()) throw EpisodeFinished("step called after the episode ended");

  StepOutcome out;
  out.rewards.assign(n, 0.0);
  out.done.assign(n, 0);
  out.moved.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    AgentState& agent = state.agents[i];
    if (!agent.active) continue;
    const Cell old_pos = agent.pos;
    const Cell target = moved(old_pos, actions[i]);
    if (target != old_pos && state.grid.is_free(target) && state.occupant(target) < 0) agent.pos = target;
    out.rewards[i] = reward_for(state.grid, agent, old_pos, agent.pos);
    out.moved[i] = agent.pos != old_pos;
    if (agent.pos == agent.goal) {
      agent.active = false;
      agent.reached = true;
      out.done[i] = 1;
    }
  }

  ++state.t;
  if (state.t >= state.horizon)
    for (auto& agent : state.agents) agent.active = false;
  out.episode_over = state.episode_over();
  return out;
}

inline StepOutcome step(EnvState& state, std::initializer_list<Action> actions) {
  return step(state, std::span<const Action>(actions.begin(), actions.size()));
}

namespace detail {

// Partial Fisher-Yates: the first k entries become a uniform k-subset.
inline void shuffle_prefix(std::vector<std::size_t>& items, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k && i + 1 < items.size(); ++i) {
    const std::size_t j = i + uniform_index(rng, items.size() - i);
    std::swap(items[i], items[j]);
  }
}

inline std::optional<EnvState> try_generate(const EnvConfig& config, Rng& rng) {
  const std::size_t cells = static_cast<std::size_t>(config.size) * config.size;
  GridMap grid(config.size);

  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto n_blocked = static_cast<std::size_t>(config.obstacle_count());
  shuffle_prefix(order, n_blocked, rng);
  for (std::size_t k = 0; k < n_blocked; ++k) grid.blocked[order[k]] = 1;

  std::vector<std::size_t> free_cells;
  for (std::size_t idx = 0; idx < cells; ++idx)
    if (!grid.blocked[idx]) free_cells.push_back(idx);
  const auto n_agents = static_cast<std::size_t>(config.n_agents);
  if (free_cells.size() < n_agents) return std::nullopt;
  shuffle_prefix(free_cells, n_agents, rng);

  EnvState state;
  state.horizon = config.horizon;
  state.obs_radius = config.obs_radius;
  state.agents.reserve(n_agents);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n_agents; ++i) {
    const Cell start = grid.cell(free_cells[i]);
    // BFS distance is symmetric, so distances from the start locate goal candidates.
    const DistanceField from_start = bfs_distance_field(grid, start);
    candidates.clear();
    for (std::size_t idx = 0; idx < cells; ++idx) {
      const int d = from_start[idx];
      if (d == kUnreachable || d == 0) continue;
      if (config.goal_dist && d != *config.goal_dist) continue;
      candidates.push_back(idx);
    }
    if (candidates.empty()) return std::nullopt;
    AgentState agent;
    agent.pos = start;
    agent.goal = grid.cell(candidates[uniform_index(rng, candidates.size())]);
    agent.dist_field = bfs_distance_field(grid, agent.goal);
    state.agents.push_back(std::move(agent));
  }
  state.grid = std::move(grid);
  return state;
}

}  // namespace detail

inline constexpr int kMaxGenerationAttempts = 64;

// Random map with exactly floor(density * size^2) obstacles, distinct free
// starts, and goals reachable at goal_dist (when set).
inline EnvState generate(const EnvConfig& config) {
  config.validate();
  Rng rng(config.seed);
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    if (auto state = detail::try_generate(config, rng)) {
      state->rng = rng;
      return std::move(*state);
    }
  }
  throw GenerationFailed("no valid placement after " + std::to_string(kMaxGenerationAttempts) +
                         " attempts (size=" + std::to_string(config.size) +
                         ", n_agents=" + std::to_string(config.n_agents) + ")");
}

inline std::size_t global_state_size(int grid_size) noexcept {
  return 3 * static_cast<std::size_t>(grid_size) * grid_size;
}

// Channels: obstacles, active-agent occupancy, goals of active agents.
template <class T>
void global_state_into(const EnvState& state, std::span<T> out) {
  const std::size_t plane = state.grid.blocked.size();
  if (out.size() != 3 * plane) throw ShapeMismatch("global state buffer has wrong length");
  std::fill(out.begin(), out.end(), T(0));
  for (std::size_t idx = 0; idx < plane; ++idx) out[idx] = state.grid.blocked[idx] ? T(1) : T(0);
  for (const auto& agent : state.agents) {
    if (!agent.active) continue;
    out[plane + state.grid.index(agent.pos)] = T(1);
    out[2 * plane + state.grid.index(agent.goal)] = T(1);
  }
}

inline std::vector<double> global_state_tensor(const EnvState& state) {
  std::vector<double> out(3 * state.grid.blocked.size());
  global_state_into<double>(state, out);
  return out;
}

}  // namespace gridmix
