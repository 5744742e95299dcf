#include <gtest/gtest.h>

#include "test_support.hpp"

namespace llamac {
namespace {

// Written independently of gaussian_squeeze: divide by the growth factor.
double reference_squeeze(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return x / std::exp(z * z);
}

// Independent argmax over sums in extended precision; ties go to the smaller sum.
int reference_argmax(const GsConfig& c) {
  int best = c.n_agents * c.action_min;
  long double best_r = -1;
  for (int x = c.n_agents * c.action_min; x <= c.n_agents * c.action_max; ++x) {
    const long double z = (x - static_cast<long double>(c.mu)) / c.sigma;
    const long double r = x * expl(-z * z);
    if (r > best_r) {
      best_r = r;
      best = x;
    }
  }
  return best;
}

JointAction<GsAction> uniform_joint(std::size_t n, int v) {
  JointAction<GsAction> j;
  for (std::size_t i = 0; i < n; ++i) j.actions[AgentId{i}] = {v};
  return j;
}

TEST(GaussianSqueeze, Examples) {
  EXPECT_EQ(gaussian_squeeze(0, 15, 5), 0.0);
  EXPECT_EQ(gaussian_squeeze(15, 15, 5), 15.0);
  EXPECT_NEAR(gaussian_squeeze(20, 15, 5), 7.357588823428847, 1e-12);
  EXPECT_NEAR(gaussian_squeeze(20, 15, 5), 20.0 / std::exp(1.0), 1e-12);
}

TEST(GaussianSqueeze, RejectsNonPositiveSigma) {
  EXPECT_THROW(gaussian_squeeze(1, 1, 0), NonPositiveSigma);
  EXPECT_THROW(gaussian_squeeze(1, 1, -2), NonPositiveSigma);
}

TEST(GaussianSqueeze, MatchesReferenceOnRandomInputs) {
  SplitMix64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.unit() * 500;
    const double mu = 0.01 + rng.unit() * 400;
    const double sigma = 0.01 + rng.unit() * 200;
    const double want = reference_squeeze(x, mu, sigma);
    const double got = gaussian_squeeze(x, mu, sigma);
    if (want == 0.0) {
      EXPECT_EQ(got, 0.0);
    } else {
      EXPECT_LE(std::abs(got - want) / std::abs(want), 1e-12) << x << " " << mu << " " << sigma;
    }
  }
}

// Property: R >= 0 for x >= 0, and the exponent is symmetric around mu.
TEST(GaussianSqueeze, NonNegativeAndSymmetric) {
  SplitMix64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double mu = 1 + rng.unit() * 50;
    const double sigma = 0.5 + rng.unit() * 20;
    const double d = rng.unit() * mu;
    EXPECT_GE(gaussian_squeeze(mu + d, mu, sigma), 0.0);
    const double left = gaussian_squeeze(mu - d, mu, sigma) / (mu - d);
    const double right = gaussian_squeeze(mu + d, mu, sigma) / (mu + d);
    if (mu - d > 1e-9) {
      EXPECT_NEAR(left, right, 1e-12);
    }
  }
}

TEST(BruteForce, Examples) {
  GsConfig a;
  a.n_agents = 3;
  a.mu = 14;
  a.sigma = 5;
  const auto opt = brute_force_optimum(a);
  EXPECT_EQ(opt.x_star, reference_argmax(a));
  EXPECT_TRUE(opt.x_star == 14 || opt.x_star == 15);

  GsConfig b;
  b.n_agents = 1;
  b.mu = 100;
  b.sigma = 1;
  EXPECT_EQ(brute_force_optimum(b).x_star, 9);
  EXPECT_FALSE(brute_force_optimum(b).root_in_range);

  GsConfig c;
  c.n_agents = 3;
  c.mu = 0.5;
  c.sigma = 0.1;
  const auto small = brute_force_optimum(c);
  EXPECT_EQ(small.x_star, reference_argmax(c));
  EXPECT_LE(small.x_star, 1);
}

TEST(BruteForce, AgreesWithReferenceScan) {
  SplitMix64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto c = testing::random_gs_config(rng);
    const auto opt = brute_force_optimum(c);
    EXPECT_EQ(opt.x_star, reference_argmax(c));
    EXPECT_EQ(opt.r_star, gaussian_squeeze(opt.x_star, c.mu, c.sigma));
  }
}

TEST(BruteForce, StationaryRootSolvesQuadratic) {
  SplitMix64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const double mu = 0.1 + rng.unit() * 100;
    const double sigma = 0.1 + rng.unit() * 50;
    const double x = gs_stationary_root(mu, sigma);
    EXPECT_NEAR(2 * x * x - 2 * mu * x - sigma * sigma, 0.0, 1e-9 * (1 + x * x));
    EXPECT_GT(x, 0);
  }
}

TEST(GreedyAllocation, ReachesTotalWithinRange) {
  SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto c = testing::random_gs_config(rng);
    const int total = c.min_sum() + static_cast<int>(rng.below(static_cast<std::uint64_t>(c.max_sum() - c.min_sum() + 1)));
    const auto alloc = greedy_allocation(c, total);
    ASSERT_EQ(alloc.size(), static_cast<std::size_t>(c.n_agents));
    EXPECT_EQ(std::accumulate(alloc.begin(), alloc.end(), 0), total);
    for (int a : alloc) EXPECT_TRUE(a >= c.action_min && a <= c.action_max);
  }
}

TEST(GsStep, Examples) {
  GsConfig c;
  c.n_agents = 3;
  c.mu = 15;
  c.sigma = 5;
  GsEnv env(c);
  auto s = env.initial_state(0);
  EXPECT_EQ(env.step(s, uniform_joint(3, 0)).rewards.at(AgentId{1}), 0.0);
  EXPECT_EQ(env.step(s, uniform_joint(3, 5)).rewards.at(AgentId{1}), 15.0);

  GsConfig big;
  big.n_agents = 50;
  big.mu = 225;
  big.sigma = 50;
  GsEnv env50(big);
  const double want = 450.0 * std::exp(-(225.0 * 225.0) / 2500.0);
  const auto r = env50.step(env50.initial_state(0), uniform_joint(50, 9)).rewards;
  EXPECT_NEAR(r.at(AgentId{49}), want, 1e-12 * want);
  for (const auto& [a, v] : r) EXPECT_EQ(v, r.at(AgentId{0}));
}

TEST(GsStep, RejectsOutOfRangeAndPartialJoints) {
  GsEnv env(GsConfig::with_defaults(3));
  auto s = env.initial_state(0);
  auto j = uniform_joint(3, 1);
  j.actions[AgentId{1}] = {10};
  EXPECT_THROW(env.step(s, j), IllegalAction);
  j.actions[AgentId{1}] = {-1};
  EXPECT_THROW(env.step(s, j), IllegalAction);
  EXPECT_THROW(env.step(s, uniform_joint(2, 1)), std::invalid_argument);
}

TEST(GsStep, DoneAtMaxRounds) {
  auto c = GsConfig::with_defaults(2);
  c.max_rounds = 3;
  GsEnv env(c);
  auto s = env.initial_state(0);
  for (int t = 1; t <= 3; ++t) {
    auto out = env.step(s, uniform_joint(2, 2));
    EXPECT_EQ(out.done, t == 3);
    EXPECT_FALSE(out.goal_reached);
    s = out.next_state;
  }
  EXPECT_EQ(s.payload.history.size(), 3u);
  EXPECT_EQ(s.payload.history.back().sum_x, 4);
}

TEST(GsEnv, ActionGrammarRoundTrip) {
  GsEnv env(GsConfig::with_defaults(3));
  for (int v = 0; v <= 9; ++v) {
    auto back = env.parse_action(env.format_action({v}));
    ASSERT_TRUE(back);
    EXPECT_EQ(back->value, v);
  }
  EXPECT_FALSE(env.parse_action("3"));
  EXPECT_FALSE(env.parse_action(2.5));
}

TEST(GsConfig, DefaultsAndValidation) {
  auto c = GsConfig::with_defaults(10);
  EXPECT_EQ(c.mu, 25.0);
  EXPECT_EQ(c.sigma, 5.0);
  EXPECT_NO_THROW(c.validate());
  c.sigma = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GsConfig::with_defaults(0);
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace llamac
