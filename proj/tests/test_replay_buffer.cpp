#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "gridmix/replay_buffer.hpp"

using namespace gridmix;

namespace {

// Transition whose every field encodes `tag`, so a stored slot can be identified.
JointTransition tagged(int tag, std::size_t n = 2, std::size_t obs_len = 3, std::size_t state_len = 4) {
  JointTransition tr;
  tr.obs.assign(n * obs_len, tag);
  tr.next_obs.assign(n * obs_len, tag + 0.5);
  tr.state.assign(state_len, tag);
  tr.next_state.assign(state_len, -tag);
  tr.actions.assign(n, static_cast<Action>(tag % kNumActions));
  tr.rewards.assign(n, 0.5 * tag);
  tr.done.assign(n, static_cast<std::uint8_t>(tag % 2));
  tr.active.assign(n, 1);
  return tr;
}

}  // namespace

TEST(ReplayBuffer, PushAndRingSemantics) {
  ReplayBuffer buf(3, 2, 3, 4, 0);
  buf.push(tagged(1));
  EXPECT_EQ(buf.size(), 1u);
  buf.push(tagged(2));
  buf.push(tagged(3));
  EXPECT_EQ(buf.cursor(), 0u);
  buf.push(tagged(4));
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.at(0).state[0], 4.0);  // oldest overwritten first
  EXPECT_EQ(buf.at(1).state[0], 2.0);
  EXPECT_EQ(buf.at(2).state[0], 3.0);
  EXPECT_EQ(buf.cursor(), 1u);
}

TEST(ReplayBuffer, StoredTransitionReadsBackWhole) {
  ReplayBuffer buf(4, 2, 3, 4, 0);
  const JointTransition tr = tagged(7);
  buf.push(tr);
  const JointTransition back = buf.at(0);
  EXPECT_EQ(back.obs, tr.obs);
  EXPECT_EQ(back.next_obs, tr.next_obs);
  EXPECT_EQ(back.state, tr.state);
  EXPECT_EQ(back.next_state, tr.next_state);
  EXPECT_EQ(back.actions, tr.actions);
  EXPECT_EQ(back.rewards, tr.rewards);
  EXPECT_EQ(back.done, tr.done);
  EXPECT_EQ(back.active, tr.active);
}

TEST(ReplayBuffer, SingleEntrySample) {
  ReplayBuffer buf(4, 2, 3, 4, 9);
  buf.push(tagged(3));
  const TransitionBatch b = buf.sample(1);
  EXPECT_EQ(b.size, 1u);
  EXPECT_EQ(b.obs(0, 1), 3.0);
  EXPECT_EQ(b.next_state(0, 0), -3.0);
  EXPECT_EQ(b.actions[1], 3);
}

TEST(ReplayBuffer, UnderfilledAndShapeErrors) {
  ReplayBuffer buf(4, 2, 3, 4, 0);
  EXPECT_THROW(buf.sample(1), Underfilled);
  buf.push(tagged(1));
  EXPECT_THROW(buf.sample(2), Underfilled);
  EXPECT_THROW(buf.push(tagged(1, 3)), ShapeMismatch);
  EXPECT_THROW(buf.push(tagged(1, 2, 5)), ShapeMismatch);
}

TEST(ReplayBuffer, SameSeedSameBatches) {
  ReplayBuffer a(8, 2, 3, 4, 17), b(8, 2, 3, 4, 17);
  for (int k = 0; k < 8; ++k) {
    a.push(tagged(k));
    b.push(tagged(k));
  }
  for (int k = 0; k < 5; ++k) EXPECT_EQ(a.sample_indices(6), b.sample_indices(6));
}

TEST(ReplayBuffer, FourEntryFrequenciesWithinFiveSigma) {
  ReplayBuffer buf(4, 1, 1, 1, 123);
  for (int k = 0; k < 4; ++k) buf.push(tagged(k, 1, 1, 1));
  std::vector<int> counts(4, 0);
  const int draws = 100000;
  for (int k = 0; k < draws / 4; ++k)
    for (std::size_t s : buf.sample_indices(4)) ++counts[s];
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (int c : counts) EXPECT_LT(std::abs(c - draws / 4.0), 5.0 * sigma);
}

TEST(ReplayBuffer, ChiSquareUniformOverSixteen) {
  ReplayBuffer buf(16, 1, 1, 1, 2024);
  for (int k = 0; k < 16; ++k) buf.push(tagged(k, 1, 1, 1));
  std::vector<double> counts(16, 0.0);
  TransitionBatch b;
  for (int k = 0; k < 100000 / 16; ++k) {
    buf.sample_into(16, b);
    for (std::size_t s : b.indices) counts[s] += 1.0;
  }
  double stat = 0.0;
  for (double c : counts) stat += (c - 6250.0) * (c - 6250.0) / 6250.0;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(15), stat));
  EXPECT_GT(p, 0.001);
}

TEST(Batch, TeamRewardAndTerminal) {
  JointTransition a = tagged(2);
  a.rewards = {0.5, -1.0};
  a.active = {1, 0};
  a.done = {1, 1};
  JointTransition b = tagged(3);
  b.rewards = {0.5, -0.5};
  b.done = {0, 1};
  const std::vector<JointTransition> items{a, b};
  const TransitionBatch batch = batch_from(items);
  EXPECT_DOUBLE_EQ(batch.team_reward(0), 0.5);  // inactive agent's slot excluded
  EXPECT_DOUBLE_EQ(batch.team_reward(1), 0.0);
  EXPECT_TRUE(batch.terminal(0));
  EXPECT_FALSE(batch.terminal(1));
  EXPECT_EQ(batch.obs.cols(), 4);
  EXPECT_EQ(batch.obs(0, 2), 3.0);  // column b * n_agents + i
}
