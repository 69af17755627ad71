#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmix/grid_world.hpp"

namespace gridmix {

using json = nlohmann::json;

// One map in the interchange schema:
//   {"size":int,"blocked":[[r,c],...],"agents":[{"start":[r,c],"goal":[r,c]},...],"seed":u64}
struct MapRecord {
  struct Agent {
    Cell start;
    Cell goal;
    friend bool operator==(const Agent&, const Agent&) = default;
  };

  int size = 0;
  std::vector<Cell> blocked;
  std::vector<Agent> agents;
  std::uint64_t seed = 0;

  friend bool operator==(const MapRecord&, const MapRecord&) = default;
};

inline void to_json(json& j, const Cell& c) { j = json::array({c.row, c.col}); }
inline void from_json(const json& j, Cell& c) {
  if (!j.is_array() || j.size() != 2) throw MapInvalid("cell must be a [row, col] pair");
  c.row = j.at(0).get<int>();
  c.col = j.at(1).get<int>();
}

inline void to_json(json& j, const MapRecord& m) {
  json agents = json::array();
  for (const auto& a : m.agents) agents.push_back({{"start", a.start}, {"goal", a.goal}});
  j = json{{"size", m.size}, {"blocked", m.blocked}, {"agents", std::move(agents)}, {"seed", m.seed}};
}

inline void from_json(const json& j, MapRecord& m) {
  try {
    m.size = j.at("size").get<int>();
    m.blocked = j.at("blocked").get<std::vector<Cell>>();
    m.agents.clear();
    for (const auto& a : j.at("agents")) m.agents.push_back({a.at("start").get<Cell>(), a.at("goal").get<Cell>()});
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw MapInvalid(e.what());
  }
}

// Snapshot of the map and the agents' start/goal cells at the current time.
inline MapRecord record_of(const EnvState& state, std::uint64_t seed = 0) {
  MapRecord m;
  m.size = state.grid.size;
  for (std::size_t idx = 0; idx < state.grid.blocked.size(); ++idx)
    if (state.grid.blocked[idx]) m.blocked.push_back(state.grid.cell(idx));
  for (const auto& a : state.agents) m.agents.push_back({a.pos, a.goal});
  m.seed = seed;
  return m;
}

// FNV-1a over the canonical content (size, sorted obstacles, starts, goals).
// The seed is provenance and is not hashed.
inline std::uint64_t map_hash(const MapRecord& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::int64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>(v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  feed(m.size);
  std::vector<Cell> blocked = m.blocked;
  std::sort(blocked.begin(), blocked.end());
  feed(static_cast<std::int64_t>(blocked.size()));
  for (Cell c : blocked) {
    feed(c.row);
    feed(c.col);
  }
  feed(static_cast<std::int64_t>(m.agents.size()));
  for (const auto& a : m.agents) {
    feed(a.start.row);
    feed(a.start.col);
    feed(a.goal.row);
    feed(a.goal.col);
  }
  return h;
}

// Builds the initial state for a map record. Starts must be distinct free
// cells and every goal a free cell reachable from its start.
inline EnvState load_map(const MapRecord& m, int obs_radius, int horizon) {
  if (m.size < 2) throw MapInvalid("size must be >= 2");
  if (m.agents.empty()) throw MapInvalid("map has no agents");
  if (obs_radius < 1 || obs_radius > m.size) throw MapInvalid("obs_radius must lie in [1, size]");
  if (horizon < 1) throw MapInvalid("horizon must be >= 1");
  EnvState state;
  state.grid = GridMap(m.size);
  for (Cell c : m.blocked) {
    if (!state.grid.in_bounds(c)) throw MapInvalid("obstacle outside the grid");
    state.grid.set_blocked(c, true);
  }
  state.horizon = horizon;
  state.obs_radius = obs_radius;
  state.rng = Rng(m.seed);
  std::set<Cell> starts;
  for (const auto& a : m.agents) {
    if (!state.grid.is_free(a.start) || !state.grid.is_free(a.goal)) throw MapInvalid("start or goal not on a free cell");
    if (!starts.insert(a.start).second) throw MapInvalid("two agents share a start cell");
    if (a.start == a.goal) throw MapInvalid("agent starts on its goal");
    AgentState agent;
    agent.pos = a.start;
    agent.goal = a.goal;
    agent.dist_field = bfs_distance_field(state.grid, a.goal);
    if (agent.distance(state.grid) == kUnreachable) throw MapInvalid("goal unreachable from start");
    state.agents.push_back(std::move(agent));
  }
  return state;
}

// A fixed collection of maps plus the environment parameters they are played with.
struct MapSet {
  std::string provenance = "random";  // "random" | "giveway"
  int obs_radius = 5;
  int horizon = 16;
  std::vector<MapRecord> maps;

  std::size_t n_agents() const { return maps.empty() ? 0 : maps.front().agents.size(); }

  // Order-sensitive digest of all map hashes; identifies the set in metrics headers.
  std::uint64_t hash() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(obs_radius) * 1315423911ULL + horizon);
    for (const auto& m : maps) h = mix64(h ^ map_hash(m));
    return h;
  }

  std::set<std::uint64_t> map_hashes() const {
    std::set<std::uint64_t> out;
    for (const auto& m : maps) out.insert(map_hash(m));
    return out;
  }
};

inline void to_json(json& j, const MapSet& s) {
  j = json{{"provenance", s.provenance}, {"obs_radius", s.obs_radius}, {"horizon", s.horizon}, {"maps", s.maps}};
}

inline void from_json(const json& j, MapSet& s) {
  try {
    if (j.is_array()) {
      s.maps = j.get<std::vector<MapRecord>>();
    } else if (j.contains("maps")) {
      s.provenance = j.value("provenance", std::string("random"));
      s.obs_radius = j.value("obs_radius", 5);
      s.horizon = j.value("horizon", 16);
      s.maps = j.at("maps").get<std::vector<MapRecord>>();
    } else {
      s.maps = {j.get<MapRecord>()};
    }
  } catch (const json::exception& e) {
    throw MapInvalid(e.what());
  }
  // Every map must load; the set is rejected as a whole otherwise.
  for (const auto& m : s.maps) (void)load_map(m, s.obs_radius, s.horizon);
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigInvalid(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const json& j, int indent = -1) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot write " + path.string());
  out << j.dump(indent) << '\n';
}

inline MapSet load_mapset(const std::filesystem::path& path) { return read_json_file(path).get<MapSet>(); }
inline void save_mapset(const std::filesystem::path& path, const MapSet& set) { write_json_file(path, set); }

}  // namespace gridmix
