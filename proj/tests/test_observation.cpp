#include <gtest/gtest.h>

#include "gridmix/observation.hpp"
#include "test_support.hpp"

using namespace gridmix;
using testsupport::make_state;

namespace {

const std::vector<std::string> kOpen5 = {".....", ".....", ".....", ".....", "....."};

}  // namespace

TEST(Observation, ShapeForRadiusFive) {
  EXPECT_EQ(observation_size(5), 484u);
  EXPECT_EQ(window_side(5), 11);
  EnvState s = make_state(kOpen5, {{{2, 2}, {0, 0}}}, 50, 5);
  const Observation o = observe(s, 0);
  EXPECT_EQ(o.data.size(), 4u * 11 * 11);
}

TEST(Observation, CornerAgentSeesOutOfGridAsObstacle) {
  EnvState s = make_state(kOpen5, {{{0, 0}, {4, 4}}}, 50, 2);
  const Observation o = observe(s, 0);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const bool outside = r < 2 || c < 2;
      EXPECT_EQ(o.at(kObsObstacles, r, c), outside ? 1.0 : 0.0) << r << "," << c;
    }
}

TEST(Observation, CenterHoldsInverseDistance) {
  EnvState s = make_state(kOpen5, {{{2, 2}, {2, 3}}}, 50, 2);
  EXPECT_DOUBLE_EQ(observe(s, 0).at(kObsAgents, 2, 2), 1.0);
  s = make_state(kOpen5, {{{0, 0}, {4, 4}}}, 50, 2);
  EXPECT_DOUBLE_EQ(observe(s, 0).at(kObsAgents, 2, 2), 1.0 / 8.0);
  // Distance follows the obstacles, not the Manhattan metric.
  s = make_state({".#...", ".#...", ".#...", ".#...", "....."}, {{{0, 0}, {0, 2}}}, 50, 2);
  EXPECT_DOUBLE_EQ(observe(s, 0).at(kObsAgents, 2, 2), 1.0 / 10.0);
}

TEST(Observation, OtherAgentsAndGoals) {
  EnvState s = make_state(kOpen5, {{{2, 2}, {4, 4}}, {{1, 3}, {3, 1}}}, 50, 1);
  const Observation o = observe(s, 0);
  EXPECT_EQ(o.at(kObsAgents, 0, 2), 1.0);      // agent 1 at offset (-1, +1)
  EXPECT_EQ(o.at(kObsOtherGoals, 2, 0), 1.0);  // its goal at offset (+1, -1)
  EXPECT_EQ(o.at(kObsOwnGoal, 2, 2), 1.0);     // own goal (2,2) away, projected to the corner
  double own = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) own += o.at(kObsOwnGoal, r, c);
  EXPECT_EQ(own, 1.0);
}

TEST(Observation, OthersGoalsOutsideWindowAreNotProjected) {
  EnvState s = make_state(kOpen5, {{{0, 0}, {0, 1}}, {{1, 0}, {4, 4}}}, 50, 1);
  const Observation o = observe(s, 0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(o.at(kObsOtherGoals, r, c), 0.0);
}

TEST(Observation, FinishedAgentsDisappear) {
  EnvState s = make_state(kOpen5, {{{2, 2}, {2, 3}}, {{1, 1}, {0, 1}}}, 50, 2);
  step(s, {Action::Stay, Action::Up});
  ASSERT_FALSE(s.agents[1].active);
  const Observation o = observe(s, 0);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      if (r == 2 && c == 2) continue;
      EXPECT_EQ(o.at(kObsAgents, r, c), 0.0);
      EXPECT_EQ(o.at(kObsOtherGoals, r, c), 0.0);
    }
  EXPECT_THROW(observe(s, 1), InactiveAgent);
}

TEST(Observation, EntriesInUnitIntervalAndCenterFree) {
  EnvConfig c;
  c.size = 8;
  c.density = 0.3;
  c.n_agents = 3;
  c.obs_radius = 3;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    c.seed = seed;
    const EnvState s = generate(c);
    for (std::size_t i = 0; i < s.n_agents(); ++i) {
      const Observation o = observe(s, i);
      for (double v : o.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      EXPECT_EQ(o.at(kObsObstacles, 3, 3), 0.0);
    }
  }
}

TEST(ProjectGoal, Examples) {
  EXPECT_EQ(project_goal(3, -2, 5), std::make_pair(3, -2));
  EXPECT_EQ(project_goal(7, 2, 5), std::make_pair(5, 2));
  EXPECT_EQ(project_goal(9, -8, 5), std::make_pair(5, -5));
}

TEST(ProjectGoal, Idempotent) {
  for (int r = 1; r <= 5; ++r)
    for (int dr = -20; dr <= 20; ++dr)
      for (int dc = -20; dc <= 20; ++dc) {
        const auto p = project_goal(dr, dc, r);
        EXPECT_EQ(project_goal(p.first, p.second, r), p);
      }
}

TEST(ObservationFloat, MatchesDoubleEncoding) {
  EnvState s = make_state(kOpen5, {{{0, 0}, {4, 3}}}, 50, 2);
  const Observation d = observe(s, 0);
  std::vector<float> f(observation_size(2));
  observe_into<float>(s, 0, f);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_FLOAT_EQ(f[k], static_cast<float>(d.data[k]));
  std::vector<float> wrong(3);
  EXPECT_THROW(observe_into<float>(s, 0, wrong), ShapeMismatch);
}
