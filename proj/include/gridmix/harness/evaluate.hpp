#pragma once

#include <chrono>
#include <cstdint>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmix/harness/parallel.hpp"
#include "gridmix/harness/policy.hpp"
#include "gridmix/map_io.hpp"

namespace gridmix {

// Actions taken on one map, enough to replay the episode exactly.
struct EpisodeLog {
  MapRecord map;
  int obs_radius = 5;
  int horizon = 16;
  std::vector<std::vector<int>> actions;  // one row per step, one code per agent
};

inline void to_json(nlohmann::json& j, const EpisodeLog& log) {
  j = nlohmann::json{{"obs_radius", log.obs_radius}, {"horizon", log.horizon}, {"map", log.map}, {"actions", log.actions}};
}

inline void from_json(const nlohmann::json& j, EpisodeLog& log) {
  try {
    log.obs_radius = j.at("obs_radius").get<int>();
    log.horizon = j.at("horizon").get<int>();
    log.map = j.at("map").get<MapRecord>();
    log.actions = j.at("actions").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedLog(e.what());
  } catch (const MapInvalid& e) {
    throw MalformedLog(e.what());
  }
}

struct EpisodeResult {
  double success = 0.0;  // fraction of agents that reached their goal
  int length = 0;
  EpisodeLog log;
};

inline EpisodeResult rollout(const Policy& policy, const MapRecord& map, int obs_radius, int horizon, Rng& rng) {
  EnvState state = load_map(map, obs_radius, horizon);
  EpisodeResult result;
  result.log.map = map;
  result.log.obs_radius = obs_radius;
  result.log.horizon = horizon;
  while (!state.episode_over()) {
    const std::vector<Action> actions = policy(state, rng);
    std::vector<int>& row = result.log.actions.emplace_back();
    for (Action a : actions) row.push_back(static_cast<int>(a));
    step(state, actions);
  }
  result.length = state.t;
  result.success = static_cast<double>(state.reached_count()) / static_cast<double>(state.n_agents());
  return result;
}

struct EvalReport {
  std::vector<double> per_map;  // success averaged over repeats
  double mean = 0.0;
  std::int64_t steps = 0;       // training steps when evaluated
  double wall_s = 0.0;
};

// Rolls `policy` out `repeats` times on every map. Repeat r of map m draws
// from its own stream keyed by (seed, m, r), so maps can run in parallel.
inline EvalReport evaluate(const Policy& policy, const MapSet& maps, int repeats, std::uint64_t seed = 0) {
  if (repeats < 1) throw ConfigInvalid("repeats must be >= 1");
  if (maps.maps.empty()) throw ConfigInvalid("empty map set");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  report.per_map.assign(maps.maps.size(), 0.0);
  parallel_for(maps.maps.size(), [&](std::size_t m) {
    double total = 0.0;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(seed, {m, static_cast<std::uint64_t>(r)}));
      total += rollout(policy, maps.maps[m], maps.obs_radius, maps.horizon, rng).success;
    }
    report.per_map[m] = total / repeats;
  });
  report.mean = std::accumulate(report.per_map.begin(), report.per_map.end(), 0.0) /
                static_cast<double>(report.per_map.size());
  report.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// Checks the network against the map set before evaluating it.
inline EvalReport evaluate(const MixerBundle& bundle, const MapSet& maps, int repeats, std::uint64_t seed = 0) {
  if (bundle.config().obs_radius != maps.obs_radius)
    throw TopologyMismatch("checkpoint obs_radius " + std::to_string(bundle.config().obs_radius) +
                           " != map set obs_radius " + std::to_string(maps.obs_radius));
  if (static_cast<std::size_t>(bundle.config().n_agents) != maps.n_agents())
    throw TopologyMismatch("checkpoint n_agents " + std::to_string(bundle.config().n_agents) +
                           " != map set n_agents " + std::to_string(maps.n_agents()));
  return evaluate(greedy_q_policy(bundle), maps, repeats, seed);
}

}  // namespace gridmix
