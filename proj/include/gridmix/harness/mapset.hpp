#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gridmix/harness/evaluate.hpp"
#include "gridmix/harness/policy.hpp"
#include "gridmix/map_io.hpp"

namespace gridmix {

// True when the all-agents-greedy rollout leaves at least one agent short of its goal.
inline bool greedy_rollout_fails(const MapRecord& map, int horizon) {
  Rng unused(0);
  return rollout(greedy_bfs_policy(), map, 1, horizon, unused).success < 1.0;
}

// Fewest steps in which all agents can reach their goals under the sequential
// resolution rules, found by breadth-first search over joint positions.
// Returns nullopt when no joint plan finishes within `horizon`. Up to 4 agents.
inline std::optional<int> joint_makespan(const MapRecord& map, int horizon) {
  if (map.agents.size() > 4) throw ConfigInvalid("joint search supports at most 4 agents");
  EnvState root = load_map(map, 1, horizon + 1);
  const std::size_t n = root.n_agents();
  auto key = [&](const EnvState& s) {
    std::uint64_t k = 0;
    for (const auto& a : s.agents) k = (k << 16) | (a.active ? 1 + s.grid.index(a.pos) : 0);
    return k;
  };
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= kNumActions;

  std::unordered_set<std::uint64_t> seen{key(root)};
  std::vector<EnvState> layer{root};
  std::vector<Action> actions(n);
  for (int depth = 1; depth <= horizon && !layer.empty(); ++depth) {
    std::vector<EnvState> next;
    for (const EnvState& s : layer) {
      for (std::size_t c = 0; c < combos; ++c) {
        std::size_t code = c;
        bool redundant = false;
        for (std::size_t i = 0; i < n; ++i) {
          actions[i] = static_cast<Action>(code % kNumActions);
          code /= kNumActions;
          // Off-map agents ignore their action; enumerate only Stay for them.
          if (!s.agents[i].active && actions[i] != Action::Stay) redundant = true;
        }
        if (redundant) continue;
        EnvState child = s;
        step(child, actions);
        if (child.reached_count() == n) return depth;
        if (child.active_count() == 0) continue;
        if (seen.insert(key(child)).second) next.push_back(std::move(child));
      }
    }
    layer = std::move(next);
  }
  return std::nullopt;
}

inline MapSet gen_random_mapset(const EnvConfig& config, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigInvalid("count must be >= 1");
  MapSet set;
  set.provenance = "random";
  set.obs_radius = config.obs_radius;
  set.horizon = config.horizon;
  for (std::size_t k = 0; k < count; ++k) {
    EnvConfig c = config;
    c.seed = derive_seed(seed, {k});
    set.maps.push_back(record_of(generate(c), c.seed));
  }
  return set;
}

namespace detail {

// Width-1 corridor with a single one-cell alcove; every other cell is blocked
// unless it is a pocket that does not touch the corridor. Two agents cross
// the corridor in opposite directions.
inline std::optional<MapRecord> try_giveway(int size, int horizon, std::uint64_t seed) {
  Rng rng(seed);
  const int length = 5 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(size - 4)));
  const int line = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(size)));
  const int offset = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(size - length + 1)));
  const int junction = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(length - 2)));
  int side = uniform_index(rng, 2) == 0 ? -1 : 1;
  if (line + side < 0 || line + side >= size) side = -side;
  const bool vertical = uniform_index(rng, 2) == 1;
  auto at = [&](int along, int across) { return vertical ? Cell{along, across} : Cell{across, along}; };

  std::vector<Cell> passage;
  for (int k = 0; k < length; ++k) passage.push_back(at(offset + k, line));
  const Cell alcove = at(offset + junction, line + side);
  passage.push_back(alcove);

  GridMap grid(size);
  std::fill(grid.blocked.begin(), grid.blocked.end(), std::uint8_t{1});
  for (Cell c : passage) grid.set_blocked(c, false);
  auto touches_passage = [&](Cell c) {
    for (Cell p : passage)
      if (std::abs(p.row - c.row) + std::abs(p.col - c.col) <= 1) return true;
    return false;
  };
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if (!touches_passage({r, c}) && uniform01(rng) < 0.3) grid.set_blocked({r, c}, false);

  // Agent A walks toward higher corridor indices, B toward lower ones.
  const int a_start = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(length - 1)));
  const int b_start = a_start + 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(length - 1 - a_start)));
  const int a_goal = a_start + 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(length - 1 - a_start)));
  const int b_goal = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(b_start)));

  MapRecord map;
  map.size = size;
  map.seed = seed;
  for (std::size_t idx = 0; idx < grid.blocked.size(); ++idx)
    if (grid.blocked[idx]) map.blocked.push_back(grid.cell(idx));
  MapRecord::Agent a{at(offset + a_start, line), at(offset + a_goal, line)};
  MapRecord::Agent b{at(offset + b_start, line), at(offset + b_goal, line)};
  if (uniform_index(rng, 2) == 1) std::swap(a, b);
  map.agents = {a, b};

  if (!greedy_rollout_fails(map, horizon)) return std::nullopt;
  if (!joint_makespan(map, horizon)) return std::nullopt;
  return map;
}

}  // namespace detail

inline constexpr int kGivewayAttempts = 256;

// One give-way map drawn from `seed`: greedy play deadlocks, cooperative play
// finishes within the horizon.
inline MapRecord gen_giveway_map(int size, int horizon, std::uint64_t seed) {
  if (size < 5) throw GenerationFailed("give-way maps need size >= 5");
  for (int attempt = 0; attempt < kGivewayAttempts; ++attempt)
    if (auto map = detail::try_giveway(size, horizon, derive_seed(seed, {static_cast<std::uint64_t>(attempt)})))
      return *map;
  throw GenerationFailed("no give-way map satisfied the oracles (size=" + std::to_string(size) +
                         ", horizon=" + std::to_string(horizon) + ")");
}

inline MapSet gen_giveway_mapset(const EnvConfig& config, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigInvalid("count must be >= 1");
  if (config.n_agents != 2) throw ConfigInvalid("give-way maps are built for exactly 2 agents");
  MapSet set;
  set.provenance = "giveway";
  set.obs_radius = config.obs_radius;
  set.horizon = config.horizon;
  std::unordered_set<std::uint64_t> hashes;
  for (std::uint64_t k = 0; set.maps.size() < count; ++k) {
    if (k > 64 * count) throw GenerationFailed("too many duplicate give-way maps");
    MapRecord map = gen_giveway_map(config.size, config.horizon, derive_seed(seed, {k}));
    if (hashes.insert(map_hash(map)).second) set.maps.push_back(std::move(map));
  }
  return set;
}

inline MapSet gen_mapset(const std::string& kind, const EnvConfig& config, std::size_t count, std::uint64_t seed) {
  config.validate();
  if (kind == "random") return gen_random_mapset(config, count, seed);
  if (kind == "giveway") return gen_giveway_mapset(config, count, seed);
  throw ConfigInvalid("unknown map kind '" + kind + "' (expected random or giveway)");
}

}  // namespace gridmix
