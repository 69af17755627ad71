#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridmix/harness/parallel.hpp"
#include "gridmix/harness/train.hpp"

namespace gridmix {

struct BenchReport {
  double env_agent_steps_per_s = 0.0;    // step + observation encoding, random actions
  double train_env_steps_per_s = 0.0;    // full step + learn loop, evaluation excluded
  std::int64_t env_agent_steps = 0;
  std::int64_t train_env_steps = 0;
  std::size_t threads = 1;
};

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = nlohmann::json{{"env_agent_steps_per_s", r.env_agent_steps_per_s},
                     {"train_env_steps_per_s", r.train_env_steps_per_s},
                     {"env_agent_steps", r.env_agent_steps},
                     {"train_env_steps", r.train_env_steps},
                     {"threads", r.threads}};
}

// Steps `n_envs` environments with uniform random actions for about `seconds`,
// encoding every active agent's observation after each step.
inline double bench_env(const EnvConfig& config, std::size_t n_envs, double seconds, std::int64_t* agent_steps = nullptr) {
  const std::size_t workers = std::min(thread_budget(), n_envs);
  std::vector<std::int64_t> counts(workers, 0);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(workers, [&](std::size_t w) {
    std::vector<EnvState> envs;
    std::vector<std::uint64_t> episodes;
    const std::size_t begin = n_envs * w / workers, end = n_envs * (w + 1) / workers;
    for (std::size_t e = begin; e < end; ++e) {
      EnvConfig c = config;
      c.seed = derive_seed(config.seed, {e, 0});
      envs.push_back(generate(c));
      episodes.push_back(1);
    }
    Rng rng(derive_seed(config.seed, {0xbe7cu, w}));
    const Policy policy = random_policy();
    std::vector<double> obs(observation_size(config.obs_radius));
    std::int64_t done_steps = 0;
    while (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < seconds) {
      for (std::size_t k = 0; k < envs.size(); ++k) {
        EnvState& s = envs[k];
        done_steps += static_cast<std::int64_t>(s.active_count());
        step(s, policy(s, rng));
        for (std::size_t i = 0; i < s.n_agents(); ++i)
          if (s.agents[i].active) observe_into<double>(s, i, obs);
        if (s.episode_over()) {
          EnvConfig c = config;
          c.seed = derive_seed(config.seed, {begin + k, episodes[k]++});
          s = generate(c);
        }
      }
    }
    counts[w] = done_steps;
  }, workers);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::int64_t total = 0;
  for (auto c : counts) total += c;
  if (agent_steps) *agent_steps = total;
  return static_cast<double>(total) / elapsed;
}

// Trains for `cfg.total_steps` and reports loop throughput.
inline double bench_train(RunConfig cfg) {
  cfg.eval_interval = std::max<std::int64_t>(cfg.total_steps, 1);
  Trainer trainer(cfg);
  trainer.run();
  return trainer.loop_steps_per_s();
}

inline RunConfig default_bench_config() {
  RunConfig cfg;
  cfg.env.size = 8;
  cfg.env.density = 0.3;
  cfg.env.n_agents = 2;
  cfg.env.obs_radius = 5;
  cfg.env.horizon = 16;
  cfg.env.goal_dist = 5;
  cfg.env.seed = 12345;
  cfg.mode = MixerMode::QMIX;
  cfg.total_steps = 20'000;
  cfg.eval_count = 10;
  return cfg;
}

inline BenchReport run_benchmark(const RunConfig& cfg, double env_seconds = 2.0) {
  BenchReport r;
  r.threads = thread_budget();
  r.env_agent_steps_per_s = bench_env(cfg.env, 64, env_seconds, &r.env_agent_steps);
  r.train_env_steps_per_s = bench_train(cfg);
  r.train_env_steps = cfg.total_steps;
  return r;
}

}  // namespace gridmix
