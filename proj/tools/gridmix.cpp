// gridmix: train, evaluate and inspect multi-agent grid pathfinding learners.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gridmix/harness/bench.hpp"
#include "gridmix/harness/evaluate.hpp"
#include "gridmix/harness/mapset.hpp"
#include "gridmix/harness/render.hpp"
#include "gridmix/harness/run_config.hpp"
#include "gridmix/harness/train.hpp"

namespace fs = std::filesystem;
using namespace gridmix;

namespace {

void print_report(const EvalReport& r, const std::string& label) {
  std::cout << label << " success_mean=" << format_double(r.mean) << " maps=" << r.per_map.size()
            << " wall_s=" << format_double(r.wall_s) << '\n';
}

int cmd_train(const fs::path& config_path, const fs::path& out) {
  const RunConfig cfg = load_run_config(config_path);
  Trainer trainer(cfg);
  trainer.run(out);
  const auto& last = trainer.rows().back();
  std::cout << "steps=" << last.steps << " eval_success_mean=" << format_double(last.eval_success_mean)
            << " loop_env_steps_per_s=" << format_double(trainer.loop_steps_per_s()) << '\n'
            << "wrote " << (out / "metrics.csv").string() << " and " << (out / "checkpoint.json").string() << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& baseline, const fs::path& maps_path, int repeats,
             std::uint64_t seed, const std::string& json_out) {
  const MapSet maps = load_mapset(maps_path);
  EvalReport report;
  if (!ckpt.empty()) {
    const MixerBundle bundle = load_checkpoint(read_json_file(ckpt));
    report = evaluate(bundle, maps, repeats, seed);
    print_report(report, std::string("checkpoint(") + to_string(bundle.mode()) + ")");
  } else {
    report = evaluate(baseline_policy(baseline), maps, repeats, seed);
    print_report(report, "baseline(" + baseline + ")");
  }
  if (!json_out.empty())
    write_json_file(json_out, nlohmann::json{{"success_mean", report.mean}, {"per_map", report.per_map}, {"repeats", repeats}});
  return 0;
}

int cmd_gen_maps(const std::string& kind, std::size_t count, const fs::path& config_path, std::uint64_t seed,
                 const fs::path& out) {
  const RunConfig cfg = load_run_config(config_path);
  const MapSet set = gen_mapset(kind, cfg.env, count, seed);
  save_mapset(out, set);
  std::cout << "wrote " << set.maps.size() << " " << kind << " maps to " << out.string() << '\n';
  return 0;
}

int cmd_rollout(const fs::path& maps_path, std::size_t index, const std::string& ckpt, const std::string& baseline,
                std::uint64_t seed, const fs::path& out) {
  const MapSet maps = load_mapset(maps_path);
  if (index >= maps.maps.size()) throw ConfigInvalid("map index out of range");
  std::optional<MixerBundle> bundle;
  Policy policy;
  if (!ckpt.empty()) {
    bundle.emplace(load_checkpoint(read_json_file(ckpt)));
    policy = greedy_q_policy(*bundle);
  } else {
    policy = baseline_policy(baseline);
  }
  Rng rng(derive_seed(seed, {index, 0}));
  const EpisodeResult result = rollout(policy, maps.maps[index], maps.obs_radius, maps.horizon, rng);
  write_json_file(out, result.log);
  std::cout << "episode length=" << result.length << " success=" << format_double(result.success) << " -> "
            << out.string() << '\n';
  return 0;
}

int cmd_render(const fs::path& path) {
  const nlohmann::json j = read_json_file(path);
  if (j.is_object() && j.contains("actions")) {
    print_frames(std::cout, render_frames(j.get<EpisodeLog>()));
    return 0;
  }
  MapSet maps;
  try {
    maps = j.get<MapSet>();
  } catch (const MapInvalid& e) {
    throw MalformedLog(e.what());
  }
  for (std::size_t m = 0; m < maps.maps.size(); ++m)
    std::cout << "map " << m << '\n' << render_state(load_map(maps.maps[m], maps.obs_radius, maps.horizon)) << '\n';
  return 0;
}

int cmd_bench(const std::string& config_path, std::int64_t steps, double env_seconds, const std::string& out) {
  RunConfig cfg = config_path.empty() ? default_bench_config() : load_run_config(config_path);
  if (steps > 0) cfg.total_steps = steps;
  const BenchReport r = run_benchmark(cfg, env_seconds);
  std::cout << "env_agent_steps_per_s=" << format_double(r.env_agent_steps_per_s)
            << " train_env_steps_per_s=" << format_double(r.train_env_steps_per_s) << " threads=" << r.threads << '\n';
  if (!out.empty()) write_json_file(out, r, 2);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridmix: multi-agent grid pathfinding with QMIX / VDN / IQL learners"};
  app.require_subcommand(1);

  fs::path config, out, maps, log;
  std::string ckpt, baseline = "greedy_bfs", kind = "random", json_out, bench_config;
  int repeats = 1;
  std::size_t count = 200, index = 0;
  std::uint64_t seed = 0;
  std::int64_t bench_steps = 0;
  double bench_env_seconds = 2.0;

  auto* train = app.add_subcommand("train", "train a learner and write metrics + checkpoint");
  train->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (or a baseline) on a map set");
  auto* ckpt_opt = eval->add_option("--ckpt", ckpt, "checkpoint file")->check(CLI::ExistingFile);
  eval->add_option("--baseline", baseline, "random | greedy_bfs (used when --ckpt is absent)")->excludes(ckpt_opt);
  eval->add_option("--maps", maps, "map set file")->required()->check(CLI::ExistingFile);
  eval->add_option("--repeats", repeats, "rollouts per map")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--json", json_out, "also write the report as JSON");

  auto* gen = app.add_subcommand("gen-maps", "generate a fixed map set");
  gen->add_option("--kind", kind, "random | giveway")->check(CLI::IsMember({"random", "giveway"}));
  gen->add_option("--count", count, "number of maps")->check(CLI::PositiveNumber);
  gen->add_option("--config", config, "run configuration supplying the environment fields")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--out", out, "output map set file")->required();

  auto* roll = app.add_subcommand("rollout", "play one map and write an episode log");
  roll->add_option("--maps", maps, "map set file")->required()->check(CLI::ExistingFile);
  roll->add_option("--index", index, "map index in the set");
  auto* roll_ckpt = roll->add_option("--ckpt", ckpt, "checkpoint file")->check(CLI::ExistingFile);
  roll->add_option("--baseline", baseline, "random | greedy_bfs (used when --ckpt is absent)")->excludes(roll_ckpt);
  roll->add_option("--seed", seed, "rollout seed");
  roll->add_option("--out", out, "episode log file")->required();

  auto* render = app.add_subcommand("render", "print ASCII frames of an episode log or a map set");
  render->add_option("--log", log, "episode log or map set file")->required()->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "measure environment and training throughput");
  bench->add_option("--config", bench_config, "run configuration (defaults to 8x8, 2 agents, QMIX)");
  bench->add_option("--steps", bench_steps, "training steps to time");
  bench->add_option("--env-seconds", bench_env_seconds, "duration of the environment benchmark");
  bench->add_option("--out", json_out, "write the report as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, out);
    if (*eval) return cmd_eval(ckpt, baseline, maps, repeats, seed, json_out);
    if (*gen) return cmd_gen_maps(kind, count, config, seed, out);
    if (*roll) return cmd_rollout(maps, index, ckpt, baseline, seed, out);
    if (*render) return cmd_render(log);
    if (*bench) return cmd_bench(bench_config, bench_steps, bench_env_seconds, json_out);
  } catch (const gridmix::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
