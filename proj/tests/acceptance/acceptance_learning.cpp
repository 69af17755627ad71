// Learning acceptance checks: three seeds per criterion, majority must pass.
// Set GRIDMIX_LONG=1 to also run the long 15x15 run.

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "acceptance/report.hpp"
#include "gridmix/harness/mapset.hpp"
#include "gridmix/harness/train.hpp"

using namespace gridmix;
using acceptance::fmt;

namespace {

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct RunResult {
  double final_success = 0.0;
  std::int64_t first_reach_step = -1;  // first eval step meeting the bar, -1 if never
  double wall_s = 0.0;
};

RunResult run(const RunConfig& cfg, const MapSet& eval_set, double bar = 2.0) {
  Trainer trainer(cfg, eval_set);
  trainer.run();
  RunResult r;
  for (const auto& row : trainer.rows())
    if (r.first_reach_step < 0 && row.eval_success_mean >= bar) r.first_reach_step = row.steps;
  r.final_success = trainer.rows().back().eval_success_mean;
  r.wall_s = trainer.rows().back().wall_s;
  std::printf("      %s seed=%llu steps=%lld success=%.3f (%.0f s)\n", to_string(cfg.mode),
              static_cast<unsigned long long>(cfg.env.seed), static_cast<long long>(trainer.steps()), r.final_success,
              r.wall_s);
  std::fflush(stdout);
  return r;
}

RunConfig single_agent(std::uint64_t seed) {
  RunConfig c = load_run_config(GRIDMIX_CONFIG_DIR "/iql_single_8x8.json");
  c.env.seed = seed;
  return c;
}

RunConfig giveway(MixerMode mode, std::uint64_t seed) {
  RunConfig c = load_run_config(GRIDMIX_CONFIG_DIR "/giveway_qmix_8x8.json");
  c.mode = mode;
  c.env.seed = seed;
  return c;
}

void single_agent_smoke(acceptance::Report& rep) {
  int passed = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const RunConfig cfg = single_agent(seed);
    const RunResult r = run(cfg, resolve_eval_set(cfg), 0.8);
    const bool ok = r.first_reach_step >= 0 && r.first_reach_step <= 300'000;
    passed += ok;
    detail += fmt("seed %llu: %.3f at end, >=0.8 from step %lld; ", static_cast<unsigned long long>(seed),
                  r.final_success, static_cast<long long>(r.first_reach_step));
  }
  rep.line(9, "single-agent IQL reaches 0.8 within 300k steps", passed >= 2,
           fmt("%d/3 seeds pass; ", passed) + detail);
}

void cooperative(acceptance::Report& rep) {
  const RunConfig base = giveway(MixerMode::QMIX, 1);
  const MapSet eval_set = resolve_eval_set(base);
  const double random_score = evaluate(random_policy(), eval_set, 20, 0x5eed).mean;
  const double greedy_score = evaluate(greedy_bfs_policy(), eval_set, 1).mean;
  std::printf("      give-way set: %zu maps, random=%.3f greedy_bfs=%.3f\n", eval_set.maps.size(), random_score,
              greedy_score);

  int coop_passed = 0, sandwich_passed = 0;
  std::string coop_detail, sandwich_detail;
  for (std::uint64_t seed : kSeeds) {
    const double qmix = run(giveway(MixerMode::QMIX, seed), eval_set).final_success;
    const double iql = run(giveway(MixerMode::IQL, seed), eval_set).final_success;
    const double vdn = run(giveway(MixerMode::VDN, seed), eval_set).final_success;
    const bool coop = qmix >= random_score + 0.2 && qmix >= greedy_score + 0.2 && qmix > iql;
    const bool sandwich = vdn >= iql - 0.05 && vdn <= qmix + 0.05;
    coop_passed += coop;
    sandwich_passed += sandwich;
    coop_detail += fmt("seed %llu: QMIX %.3f IQL %.3f%s; ", static_cast<unsigned long long>(seed), qmix, iql,
                       coop ? "" : " (fail)");
    sandwich_detail += fmt("seed %llu: IQL %.3f <= VDN %.3f <= QMIX %.3f (+-0.05)%s; ",
                           static_cast<unsigned long long>(seed), iql, vdn, qmix, sandwich ? "" : " (fail)");
  }
  rep.line(10, "QMIX beats baselines by 0.2 and IQL on give-way maps", coop_passed >= 2,
           fmt("%d/3 seeds pass; random %.3f, greedy_bfs %.3f; ", coop_passed, random_score, greedy_score) +
               coop_detail);
  rep.line(11, "VDN lies between IQL and QMIX", sandwich_passed >= 2,
           fmt("%d/3 seeds pass; ", sandwich_passed) + sandwich_detail);
}

void long_run(acceptance::Report& rep) {
  const char* flag = std::getenv("GRIDMIX_LONG");
  if (!flag || std::string(flag) != "1") {
    rep.skip(12, "long 15x15 QMIX run", "set GRIDMIX_LONG=1 to run (1.5M steps)");
    return;
  }
  const RunConfig cfg = load_run_config(GRIDMIX_CONFIG_DIR "/long_15x15_qmix.json");
  Trainer trainer(cfg);
  trainer.run();
  // Scored on 8x8 / density 0.3 / 2-agent maps with the same radius and horizon.
  EnvConfig small = cfg.env;
  small.size = 8;
  small.goal_dist.reset();
  const MapSet row = gen_mapset("random", small, 200, cfg.eval_seed);
  const double success = evaluate(trainer.bundle(), row, 1).mean;
  rep.line(12, "long 15x15 QMIX run, 8x8 / 2-agent row", std::abs(success - 0.738) <= 0.15,
           fmt("success %.3f (target 0.738 +- 0.15), 15x15 eval %.3f", success,
               trainer.rows().back().eval_success_mean));
}

}  // namespace

int main() {
  acceptance::Report rep;
  single_agent_smoke(rep);
  cooperative(rep);
  long_run(rep);
  return rep.exit_code();
}
