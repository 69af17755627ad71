#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gridmix/harness/evaluate.hpp"
#include "gridmix/harness/mapset.hpp"
#include "gridmix/harness/parallel.hpp"
#include "gridmix/harness/run_config.hpp"
#include "gridmix/qmix.hpp"
#include "gridmix/replay_buffer.hpp"

namespace gridmix {

struct MetricsRow {
  std::int64_t steps = 0;
  double loss_mean = std::numeric_limits<double>::quiet_NaN();
  double q_tot_mean = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  double eval_success_mean = 0.0;
  std::vector<double> eval_success_per_map;
  double wall_s = 0.0;
};

// Shortest decimal text that reads back to the same double ("nan" for NaN).
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline constexpr const char* kMetricsColumns =
    "steps,loss_mean,q_tot_mean,grad_norm,eval_success_mean,eval_success_per_map_json";

inline std::string metrics_line(const MetricsRow& r) {
  std::string per_map = "[";
  for (std::size_t k = 0; k < r.eval_success_per_map.size(); ++k) {
    if (k) per_map += ',';
    per_map += format_double(r.eval_success_per_map[k]);
  }
  per_map += ']';
  return std::to_string(r.steps) + ',' + format_double(r.loss_mean) + ',' + format_double(r.q_tot_mean) + ',' +
         format_double(r.grad_norm) + ',' + format_double(r.eval_success_mean) + ",\"" + per_map + '"';
}

inline MapSet resolve_eval_set(const RunConfig& cfg) {
  if (!cfg.eval_maps.empty()) return load_mapset(cfg.eval_maps);
  return gen_mapset(cfg.eval_kind, cfg.env, static_cast<std::size_t>(cfg.eval_count), cfg.eval_seed);
}

// Off-policy training over a vector of environments. Every environment step
// counts toward the budget; one train step runs per `train_every` steps once
// the buffer holds `learning_starts` transitions.
class Trainer {
 public:
  Trainer(RunConfig cfg, MapSet eval_set)
      : cfg_((cfg.validate(), std::move(cfg))),
        eval_set_(std::move(eval_set)),
        eval_hashes_(eval_set_.map_hashes()),
        bundle_(cfg_.learner()),
        buffer_(static_cast<std::size_t>(cfg_.buffer_capacity), static_cast<std::size_t>(cfg_.env.n_agents),
                observation_size(cfg_.env.obs_radius), global_state_size(cfg_.env.size),
                derive_seed(cfg_.env.seed, {0xb0ffu})),
        action_rng_(derive_seed(cfg_.env.seed, {0xac7u})) {
    if (eval_set_.obs_radius != cfg_.env.obs_radius || eval_set_.n_agents() != static_cast<std::size_t>(cfg_.env.n_agents))
      throw TopologyMismatch("evaluation maps do not match the run's obs_radius / n_agents");
    envs_.resize(static_cast<std::size_t>(cfg_.n_envs));
    for (std::size_t e = 0; e < envs_.size(); ++e) reset(e);
  }

  explicit Trainer(const RunConfig& cfg) : Trainer(cfg, resolve_eval_set(cfg)) {}

  const RunConfig& config() const noexcept { return cfg_; }
  const MixerBundle& bundle() const noexcept { return bundle_; }
  const MapSet& eval_set() const noexcept { return eval_set_; }
  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }
  std::int64_t steps() const noexcept { return steps_; }
  std::int64_t rejected_resets() const noexcept { return rejected_resets_; }
  const std::set<std::uint64_t>& training_map_hashes() const noexcept { return train_hashes_; }
  // Environment steps per second of the step+learn loop, evaluation excluded.
  double loop_steps_per_s() const noexcept { return loop_seconds_ > 0 ? static_cast<double>(steps_) / loop_seconds_ : 0.0; }

  // Runs the whole budget. Writes metrics.csv, timing.csv, checkpoint.json and
  // config.json into `out_dir` when it is non-empty.
  void run(const std::filesystem::path& out_dir = {}) {
    std::ofstream metrics, timing;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      metrics.open(out_dir / "metrics.csv");
      timing.open(out_dir / "timing.csv");
      char hash[32];
      std::snprintf(hash, sizeof hash, "0x%016llx", static_cast<unsigned long long>(eval_set_.hash()));
      metrics << "# gridmix metrics v1 mode=" << to_string(cfg_.mode) << " seed=" << cfg_.env.seed
              << " eval_mapset_hash=" << hash << " eval_maps=" << eval_set_.maps.size()
              << " eval_repeats=" << cfg_.eval_repeats << '\n'
              << kMetricsColumns << '\n';
      timing << "steps,wall_s,loop_env_steps_per_s,train_steps\n";
      write_json_file(out_dir / "config.json", cfg_, 2);
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto emit = [&] {
      const MetricsRow& row = evaluate_now(t0);
      if (metrics) metrics << metrics_line(row) << '\n' << std::flush;
      if (timing)
        timing << row.steps << ',' << format_double(row.wall_s) << ',' << format_double(loop_steps_per_s()) << ','
               << bundle_.train_steps() << '\n' << std::flush;
    };

    emit();
    while (steps_ < cfg_.total_steps) {
      const auto loop_start = std::chrono::steady_clock::now();
      const bool eval_due = advance();
      loop_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - loop_start).count();
      if (eval_due) emit();
    }
    if (rows_.back().steps != steps_) emit();
    if (!out_dir.empty()) write_json_file(out_dir / "checkpoint.json", save_checkpoint(bundle_));
  }

 private:
  struct EnvSlot {
    EnvState state;
    Matrix obs;
    std::vector<std::uint8_t> active;
    std::uint64_t episode = 0;
  };

  void reset(std::size_t e) {
    EnvSlot& slot = envs_[e];
    for (;;) {
      const std::uint64_t seed = derive_seed(cfg_.env.seed, {0x7a11u, e, slot.episode++});
      if (cfg_.train_maps == "giveway") {
        slot.state = load_map(gen_giveway_map(cfg_.env.size, cfg_.env.horizon, seed), cfg_.env.obs_radius, cfg_.env.horizon);
      } else {
        EnvConfig c = cfg_.env;
        c.seed = seed;
        slot.state = generate(c);
      }
      const std::uint64_t h = map_hash(record_of(slot.state));
      if (!eval_hashes_.contains(h)) {
        if (train_hashes_.size() < kTrackedHashes) train_hashes_.insert(h);
        break;
      }
      ++rejected_resets_;
    }
    slot.obs = observation_matrix(slot.state, &slot.active);
  }

  // One vectorized step across all environments. Returns true when an
  // evaluation boundary was crossed.
  bool advance() {
    const std::size_t n = static_cast<std::size_t>(cfg_.env.n_agents);
    const std::size_t obs_len = observation_size(cfg_.env.obs_radius);
    const std::size_t n_envs = envs_.size();
    const std::int64_t remaining = cfg_.total_steps - steps_;
    const std::size_t active_envs = static_cast<std::size_t>(std::min<std::int64_t>(remaining, static_cast<std::int64_t>(n_envs)));

    Matrix obs_all(static_cast<Eigen::Index>(obs_len), static_cast<Eigen::Index>(active_envs * n));
    std::vector<std::uint8_t> active_all;
    for (std::size_t e = 0; e < active_envs; ++e) {
      obs_all.middleCols(static_cast<Eigen::Index>(e * n), static_cast<Eigen::Index>(n)) = envs_[e].obs;
      active_all.insert(active_all.end(), envs_[e].active.begin(), envs_[e].active.end());
    }
    const std::vector<Action> actions =
        select_actions(bundle_, obs_all, active_all, cfg_.epsilon_at(steps_), action_rng_);

    std::vector<JointTransition> pending(active_envs);
    std::vector<std::uint8_t> finished(active_envs, 0);
    parallel_for(active_envs, [&](std::size_t e) {
      EnvSlot& slot = envs_[e];
      JointTransition& tr = pending[e];
      tr.obs.assign(slot.obs.data(), slot.obs.data() + slot.obs.size());
      tr.state = global_state_tensor(slot.state);
      tr.active = slot.active;
      tr.actions.assign(actions.begin() + static_cast<std::ptrdiff_t>(e * n), actions.begin() + static_cast<std::ptrdiff_t>((e + 1) * n));
      const StepOutcome out = step(slot.state, tr.actions);
      tr.rewards = out.rewards;
      slot.obs = observation_matrix(slot.state, &slot.active);
      tr.next_obs.assign(slot.obs.data(), slot.obs.data() + slot.obs.size());
      tr.next_state = global_state_tensor(slot.state);
      tr.done.resize(n);
      for (std::size_t i = 0; i < n; ++i) tr.done[i] = slot.state.agents[i].active ? 0 : 1;
      finished[e] = out.episode_over ? 1 : 0;
    }, std::min<std::size_t>(thread_budget(), active_envs));
    for (std::size_t e = 0; e < active_envs; ++e)
      if (finished[e]) reset(e);

    bool eval_due = false;
    for (std::size_t e = 0; e < active_envs; ++e) {
      buffer_.push(pending[e]);
      ++steps_;
      if (steps_ % cfg_.train_every == 0 && static_cast<std::int64_t>(buffer_.size()) >= cfg_.learning_starts) learn();
      if (steps_ % cfg_.eval_interval == 0) eval_due = true;
    }
    return eval_due;
  }

  void learn() {
    buffer_.sample_into(static_cast<std::size_t>(cfg_.batch_size), batch_);
    LossReport report;
    try {
      report = train_step(bundle_, batch_);
    } catch (const NonFiniteGradient& e) {
      throw NonFiniteGradient(std::string(e.what()) + " (env step " + std::to_string(steps_) + ", train step " +
                              std::to_string(bundle_.train_steps()) + ", last loss " + format_double(last_loss_) + ")");
    }
    last_loss_ = report.loss;
    if (bundle_.train_steps() % cfg_.target_sync == 0) bundle_.sync_targets();
    sum_loss_ += report.loss;
    sum_q_ += report.q_tot_mean;
    sum_grad_ += report.grad_norm;
    ++reports_;
  }

  const MetricsRow& evaluate_now(std::chrono::steady_clock::time_point t0) {
    const EvalReport report = evaluate(bundle_, eval_set_, cfg_.eval_repeats, cfg_.eval_seed);
    MetricsRow row;
    row.steps = steps_;
    if (reports_ > 0) {
      row.loss_mean = sum_loss_ / static_cast<double>(reports_);
      row.q_tot_mean = sum_q_ / static_cast<double>(reports_);
      row.grad_norm = sum_grad_ / static_cast<double>(reports_);
    }
    row.eval_success_mean = report.mean;
    row.eval_success_per_map = report.per_map;
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sum_loss_ = sum_q_ = sum_grad_ = 0.0;
    reports_ = 0;
    rows_.push_back(std::move(row));
    return rows_.back();
  }

  static constexpr std::size_t kTrackedHashes = 1u << 20;

  RunConfig cfg_;
  MapSet eval_set_;
  std::set<std::uint64_t> eval_hashes_;
  std::set<std::uint64_t> train_hashes_;
  MixerBundle bundle_;
  ReplayBuffer buffer_;
  TransitionBatch batch_;
  Rng action_rng_;
  std::vector<EnvSlot> envs_;
  std::vector<MetricsRow> rows_;
  std::int64_t steps_ = 0;
  std::int64_t rejected_resets_ = 0;
  double loop_seconds_ = 0.0;
  double sum_loss_ = 0.0, sum_q_ = 0.0, sum_grad_ = 0.0, last_loss_ = std::numeric_limits<double>::quiet_NaN();
  std::int64_t reports_ = 0;
};

inline std::vector<MetricsRow> train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  Trainer trainer(cfg);
  trainer.run(out_dir);
  return trainer.rows();
}

}  // namespace gridmix
