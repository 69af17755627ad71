#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmix/grid_world.hpp"
#include "gridmix/map_io.hpp"
#include "gridmix/qmix.hpp"

namespace gridmix {

struct RunConfig {
  EnvConfig env;
  MixerMode mode = MixerMode::QMIX;
  std::string train_maps = "random";  // "random" | "giveway"

  std::int64_t total_steps = 100'000;
  std::int64_t eval_interval = 10'000;
  std::string eval_maps;              // map-set file; generated from the fields below when empty
  std::string eval_kind = "random";
  int eval_count = 200;
  std::uint64_t eval_seed = 0xe7a15e7ULL;
  int eval_repeats = 1;

  int n_envs = 8;
  int batch_size = 64;
  std::int64_t buffer_capacity = 100'000;
  std::int64_t learning_starts = 1'000;
  int train_every = 8;   // environment steps per train step
  int target_sync = 200; // train steps between target syncs
  double gamma = 0.99;
  double lr = 5e-4;
  double grad_clip = 10.0;
  int embed_dim = 32;
  std::vector<int> hidden{64, 64};
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.1;

  void validate() const {
    env.validate();
    if (total_steps < 0) throw ConfigInvalid("total_steps must be >= 0");
    if (eval_interval < 1) throw ConfigInvalid("eval_interval must be >= 1");
    if (total_steps > 0 && eval_interval > total_steps) throw ConfigInvalid("eval_interval must not exceed total_steps");
    if (train_maps != "random" && train_maps != "giveway") throw ConfigInvalid("train_maps must be random or giveway");
    if (eval_kind != "random" && eval_kind != "giveway") throw ConfigInvalid("eval_kind must be random or giveway");
    if (eval_count < 1 || eval_repeats < 1) throw ConfigInvalid("eval_count and eval_repeats must be >= 1");
    if (n_envs < 1 || batch_size < 1 || train_every < 1 || target_sync < 1)
      throw ConfigInvalid("n_envs, batch_size, train_every and target_sync must be >= 1");
    if (buffer_capacity < batch_size) throw ConfigInvalid("buffer_capacity must be >= batch_size");
    if (learning_starts < batch_size) throw ConfigInvalid("learning_starts must be >= batch_size");
    if (!(eps_start >= 0 && eps_start <= 1 && eps_end >= 0 && eps_end <= 1)) throw ConfigInvalid("epsilon must lie in [0, 1]");
    if (!(eps_fraction >= 0 && eps_fraction <= 1)) throw ConfigInvalid("eps_fraction must lie in [0, 1]");
    if (!(lr > 0)) throw ConfigInvalid("lr must be > 0");
    learner().validate();
  }

  LearnerConfig learner() const {
    LearnerConfig l;
    l.mode = mode;
    l.n_agents = env.n_agents;
    l.obs_radius = env.obs_radius;
    l.grid_size = env.size;
    l.hidden = hidden;
    l.embed_dim = embed_dim;
    l.gamma = gamma;
    l.grad_clip = grad_clip;
    l.adam.lr = lr;
    l.seed = derive_seed(env.seed, {0x1ea4u});
    return l;
  }

  // Linear decay from eps_start to eps_end over the first eps_fraction of the budget.
  double epsilon_at(std::int64_t step) const {
    const double horizon = eps_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return eps_end;
    return eps_start + (eps_end - eps_start) * static_cast<double>(step) / horizon;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"size", c.env.size},
                     {"density", c.env.density},
                     {"n_agents", c.env.n_agents},
                     {"obs_radius", c.env.obs_radius},
                     {"horizon", c.env.horizon},
                     {"goal_dist", c.env.goal_dist ? nlohmann::json(*c.env.goal_dist) : nlohmann::json(nullptr)},
                     {"seed", c.env.seed},
                     {"mode", to_string(c.mode)},
                     {"train_maps", c.train_maps},
                     {"total_steps", c.total_steps},
                     {"eval_interval", c.eval_interval},
                     {"eval_maps", c.eval_maps},
                     {"eval_kind", c.eval_kind},
                     {"eval_count", c.eval_count},
                     {"eval_seed", c.eval_seed},
                     {"eval_repeats", c.eval_repeats},
                     {"n_envs", c.n_envs},
                     {"batch_size", c.batch_size},
                     {"buffer_capacity", c.buffer_capacity},
                     {"learning_starts", c.learning_starts},
                     {"train_every", c.train_every},
                     {"target_sync", c.target_sync},
                     {"gamma", c.gamma},
                     {"lr", c.lr},
                     {"grad_clip", c.grad_clip},
                     {"embed_dim", c.embed_dim},
                     {"hidden", c.hidden},
                     {"eps_start", c.eps_start},
                     {"eps_end", c.eps_end},
                     {"eps_fraction", c.eps_fraction}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  static const std::set<std::string> known{
      "size", "density", "n_agents", "obs_radius", "horizon", "goal_dist", "seed", "mode", "train_maps",
      "total_steps", "eval_interval", "eval_maps", "eval_kind", "eval_count", "eval_seed", "eval_repeats",
      "n_envs", "batch_size", "buffer_capacity", "learning_starts", "train_every", "target_sync", "gamma", "lr",
      "grad_clip", "embed_dim", "hidden", "eps_start", "eps_end", "eps_fraction"};
  if (!j.is_object()) throw ConfigInvalid("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigInvalid("unknown config key '" + key + "'");
  try {
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("size", c.env.size);
    get("density", c.env.density);
    get("n_agents", c.env.n_agents);
    get("obs_radius", c.env.obs_radius);
    get("horizon", c.env.horizon);
    if (j.contains("goal_dist")) {
      if (j.at("goal_dist").is_null())
        c.env.goal_dist.reset();
      else
        c.env.goal_dist = j.at("goal_dist").get<int>();
    }
    get("seed", c.env.seed);
    if (j.contains("mode")) c.mode = mixer_mode_from_string(j.at("mode").get<std::string>());
    get("train_maps", c.train_maps);
    get("total_steps", c.total_steps);
    get("eval_interval", c.eval_interval);
    get("eval_maps", c.eval_maps);
    get("eval_kind", c.eval_kind);
    get("eval_count", c.eval_count);
    get("eval_seed", c.eval_seed);
    get("eval_repeats", c.eval_repeats);
    get("n_envs", c.n_envs);
    get("batch_size", c.batch_size);
    get("buffer_capacity", c.buffer_capacity);
    get("learning_starts", c.learning_starts);
    get("train_every", c.train_every);
    get("target_sync", c.target_sync);
    get("gamma", c.gamma);
    get("lr", c.lr);
    get("grad_clip", c.grad_clip);
    get("embed_dim", c.embed_dim);
    get("hidden", c.hidden);
    get("eps_start", c.eps_start);
    get("eps_end", c.eps_end);
    get("eps_fraction", c.eps_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(e.what());
  }
  c.validate();
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return read_json_file(path).get<RunConfig>(); }

}  // namespace gridmix
