#include <gtest/gtest.h>

#include "test_support.hpp"

namespace llamac {
namespace {

using testing::data_path;
using testing::grid_fixture;

TEST(AgentId, NameRoundTrip) {
  for (std::size_t i : {0u, 1u, 9u, 31u, 1000u}) {
    auto back = parse_agent_name(AgentId{i}.name());
    ASSERT_TRUE(back);
    EXPECT_EQ(back->index, i);
  }
  EXPECT_FALSE(parse_agent_name("agent_"));
  EXPECT_FALSE(parse_agent_name("agent_1x"));
  EXPECT_FALSE(parse_agent_name("Agent_1"));
  EXPECT_FALSE(parse_agent_name("agent_-1"));
}

TEST(Reset, GsStartsEmpty) {
  GsEnv env(GsConfig::with_defaults(3));
  auto r = environment_reset(env, 7);
  EXPECT_EQ(r.state.step_index, 0u);
  EXPECT_TRUE(r.state.payload.history.empty());
  ASSERT_EQ(r.observations.size(), 3u);
  for (const auto& [agent, obs] : r.observations) {
    EXPECT_EQ(obs.agent, agent);
    EXPECT_TRUE(obs.payload.own_actions.empty());
  }
}

TEST(Reset, SameSeedSameState) {
  GridEnv env(grid_fixture("easy_2x2.scenario"));
  auto a = environment_reset(env, 99);
  auto b = environment_reset(env, 99);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.observations, b.observations);
}

TEST(Reset, ScenarioPlacementIsExact) {
  GridEnv env(grid_fixture("easy_2x2.scenario"));
  const auto s = environment_reset(env, 0).state;
  ASSERT_EQ(s.payload.objects.size(), 2u);
  const auto* red = s.payload.find_object("object_red_1");
  const auto* blue = s.payload.find_object("object_blue_1");
  ASSERT_TRUE(red && blue);
  EXPECT_EQ(std::tie(red->row, red->col), std::make_tuple(0, 0));
  EXPECT_EQ(std::tie(blue->row, blue->col), std::make_tuple(1, 0));
  EXPECT_EQ(s.text, testing::read_file(data_path("easy_2x2_state.txt")));
}

TEST(Step, GsBroadcastsReward) {
  GsConfig c;
  c.n_agents = 3;
  c.mu = 15;
  c.sigma = 5;
  GsEnv env(c);
  auto s = env.initial_state(0);
  JointAction<GsAction> j;
  for (std::size_t i = 0; i < 3; ++i) j.actions[AgentId{i}] = {5};
  auto out = env.step(s, j);
  ASSERT_EQ(out.rewards.size(), 3u);
  for (const auto& [a, r] : out.rewards) EXPECT_EQ(r, 15.0);
  EXPECT_EQ(out.next_state.step_index, 1u);
}

TEST(Step, EasyLastDeliveryReachesGoal) {
  auto c = testing::grid_config(1, 2, GridMode::Easy, {{"object_red_1", "red", 0, 1}},
                                {{"target_red_1", "red", CellPos{0, 1}}});
  GridEnv env(c);
  auto s = env.initial_state(0);
  JointAction<GridAction> j;
  j.actions[AgentId{0}] = NoOp{};
  j.actions[AgentId{1}] = PlaceInTarget{"object_red_1", "target_red_1"};
  auto out = env.step(s, j);
  EXPECT_TRUE(out.goal_reached);
  EXPECT_TRUE(out.done);
  EXPECT_TRUE(out.next_state.payload.objects.empty());
  EXPECT_EQ(out.rewards.at(AgentId{0}), 1.0);
}

TEST(Observe, GsOwnHistory) {
  GsEnv env(GsConfig::with_defaults(3));
  auto s = env.initial_state(0);
  for (int v : {4, 7}) {
    JointAction<GsAction> j;
    for (std::size_t i = 0; i < 3; ++i) j.actions[AgentId{i}] = {i == 2 ? v : 0};
    s = env.step(s, j).next_state;
  }
  auto obs = env.observe(s, AgentId{2});
  EXPECT_EQ(obs.payload.own_actions, (std::vector<int>{4, 7}));
  EXPECT_EQ(obs.payload.system_rewards.size(), 2u);
  EXPECT_THROW(env.observe(s, AgentId{3}), UnknownAgent);
}

TEST(Observe, GridCellContents) {
  GridEnv env(grid_fixture("easy_2x2.scenario"));
  auto s = env.initial_state(0);
  auto obs = env.observe(s, AgentId{0});
  EXPECT_EQ(obs.payload.cell, (CellPos{0, 0}));
  ASSERT_EQ(obs.payload.objects.size(), 1u);
  EXPECT_EQ(obs.payload.objects[0].id, "object_red_1");
  EXPECT_TRUE(obs.payload.targets.empty());
  EXPECT_THROW(env.observe(s, AgentId{4}), UnknownAgent);
}

// Property: the same seed and joint-action sequence give identical states.
TEST(Property, DeterministicTrajectories) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GridEnv env(generate_grid_scenario(3, 3, seed % 2 ? GridMode::Hard : GridMode::Easy, 3, seed));
    auto run = [&] {
      SplitMix64 rng(seed);
      std::vector<EnvState<GridPayload>> trace{environment_reset(env, seed).state};
      for (int t = 0; t < 12; ++t) {
        auto joint = testing::random_conflict_free_joint(env, trace.back(), rng);
        trace.push_back(env.step(trace.back(), joint).next_state);
      }
      return trace;
    };
    EXPECT_EQ(run(), run());
  }
}

// Property: step_index advances by exactly one and text always renders the payload.
TEST(Property, StepMonotonicityAndTextPurity) {
  SplitMix64 rng(5);
  GridEnv env(generate_grid_scenario(2, 4, GridMode::Hard, 3, 5));
  auto s = env.initial_state(0);
  for (int t = 0; t < 40; ++t) {
    auto next = env.step(s, testing::random_conflict_free_joint(env, s, rng)).next_state;
    EXPECT_EQ(next.step_index, s.step_index + 1);
    EXPECT_EQ(next.text, render_grid_state(next.payload));
    s = next;
  }
  GsEnv gs(GsConfig::with_defaults(4));
  auto g = gs.initial_state(0);
  for (int t = 0; t < 10; ++t) {
    JointAction<GsAction> j;
    for (std::size_t i = 0; i < 4; ++i) j.actions[AgentId{i}] = {static_cast<int>(rng.below(10))};
    auto next = gs.step(g, j).next_state;
    EXPECT_EQ(next.step_index, g.step_index + 1);
    EXPECT_EQ(next.text, render_gs_state(next.payload));
    g = next;
  }
}

// Property: an observation is determined by the state and the agent.
TEST(Property, ObservationConsistency) {
  SplitMix64 rng(11);
  GridEnv env(generate_grid_scenario(3, 4, GridMode::Hard, 4, 11));
  auto s = env.initial_state(0);
  for (int t = 0; t < 10; ++t) {
    auto copy = GridEnv::make_state(s.step_index, s.payload);
    for (std::size_t i = 0; i < env.agent_count(); ++i) {
      EXPECT_EQ(env.observe(s, AgentId{i}), env.observe(copy, AgentId{i}));
    }
    s = env.step(s, testing::random_conflict_free_joint(env, s, rng)).next_state;
  }
}

TEST(Seeds, StreamsAreIndependent) {
  EXPECT_NE(stream_seed(1, "env"), stream_seed(1, "scripted"));
  EXPECT_NE(stream_seed(1, "env"), stream_seed(2, "env"));
  EXPECT_EQ(stream_seed(1, "env"), stream_seed(1, "env"));
}

TEST(Seeds, BelowStaysInRange) {
  SplitMix64 rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.below(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Scenario, RenderParseRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Scenario s = generate_grid_scenario(2, 4, seed % 2 ? GridMode::Hard : GridMode::Easy, 3, seed);
    auto back = parse_scenario(render_scenario(s));
    EXPECT_EQ(render_scenario(back), render_scenario(s));
    EXPECT_EQ(scenario_hash(back), scenario_hash(s));
  }
  Scenario gs = GsConfig::with_defaults(5);
  EXPECT_EQ(std::get<GsConfig>(parse_scenario(render_scenario(gs))), std::get<GsConfig>(gs));
}

TEST(Scenario, ErrorsCarryLineNumbers) {
  EXPECT_THROW(parse_scenario(""), ScenarioError);
  EXPECT_THROW(parse_scenario("env gs\nrows 3\n"), ScenarioError);
  EXPECT_THROW(parse_scenario("env grid-easy\nsize 2x2\nobject a red 5 5\ntarget t red 0 0\n"), ScenarioError);
  EXPECT_THROW(parse_scenario("env grid-easy\nsize 2x2\nobject a red 0 0\n"), ScenarioError);
  try {
    parse_scenario("env gs\nagents 3\nbogus 1\n");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Scenario, SizeParsing) {
  EXPECT_EQ(parse_size("4x8"), (std::pair{4, 8}));
  EXPECT_FALSE(parse_size("4x"));
  EXPECT_FALSE(parse_size("0x3"));
  EXPECT_FALSE(parse_size("4by8"));
}

}  // namespace
}  // namespace llamac
