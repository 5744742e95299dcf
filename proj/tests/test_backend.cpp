#include <gtest/gtest.h>

#include "test_support.hpp"

namespace llamac {
namespace {

ChatRequest request(RoleTag role, std::string text, json context = json::object()) {
  return {role, {{"system", "sys"}, {"user", std::move(text)}}, default_params(role.kind, 0), std::move(context)};
}

EnvState<GsPayload> gs_after_sums(const GsEnv& env, const std::vector<int>& sums) {
  auto s = env.initial_state(0);
  for (int sum : sums) {
    const auto alloc = greedy_allocation(env.config(), sum);
    JointAction<GsAction> j;
    for (std::size_t i = 0; i < alloc.size(); ++i) j.actions[AgentId{i}] = {alloc[i]};
    s = env.step(s, j).next_state;
  }
  return s;
}

int joint_sum(const JointAction<GsAction>& j) {
  int sum = 0;
  for (const auto& [a, v] : j.actions) sum += v.value;
  return sum;
}

TEST(Tokens, Estimate) {
  EXPECT_EQ(estimate_tokens(""), 0);
  EXPECT_EQ(estimate_tokens("abcd"), 1);
  EXPECT_EQ(estimate_tokens("abcde"), 2);
  EXPECT_EQ(estimate_tokens("a b\n c"), 3);
  EXPECT_EQ(TokenUsage::of(3, 4).total_tokens, 7);
  TokenUsage u;
  u += TokenUsage::of(1, 2);
  u += TokenUsage::of(10, 20);
  EXPECT_EQ(u, TokenUsage::of(11, 22));
}

TEST(RoleTag, RoundTrip) {
  for (RoleTag t : {RoleTag::critic(true), RoleTag::critic(false), RoleTag::assessor(), RoleTag::actor(AgentId{12}),
                    RoleTag::debater(1)}) {
    auto back = RoleTag::parse(t.str());
    ASSERT_TRUE(back) << t.str();
    EXPECT_EQ(*back, t);
  }
  EXPECT_EQ(RoleTag::actor(AgentId{3}).str(), "actor_3");
  EXPECT_FALSE(RoleTag::parse("actor_"));
  EXPECT_FALSE(RoleTag::parse("actor"));
  EXPECT_FALSE(RoleTag::parse("assessor_1"));
  EXPECT_FALSE(RoleTag::parse("critic"));
}

TEST(Gateway, EnforcesContextLimitBeforeCalling) {
  ScriptedBackend scripted;
  testing::CallLog log(scripted);
  Gateway gw(log, 5);
  EXPECT_THROW(gw.complete(request(RoleTag::assessor(), "one two three four five six")), ContextLengthExceeded);
  EXPECT_TRUE(log.roles.empty());
  EXPECT_EQ(gw.calls(), 0u);
  Gateway unlimited(log, 0);
  EXPECT_NO_THROW(unlimited.complete(request(RoleTag::assessor(), std::string(100000, 'x'))));
}

TEST(Gateway, SinkSeesEveryExchangeInOrder) {
  ScriptedBackend scripted;
  std::vector<std::string> seen;
  Gateway gw(scripted, 0, [&](const ChatExchange& ex) { seen.push_back(ex.role.str()); });
  gw.complete(request(RoleTag::critic(true), "a"));
  gw.complete(request(RoleTag::actor(AgentId{2}), "b"));
  gw.complete(request(RoleTag::assessor(), "c"));
  EXPECT_EQ(seen, (std::vector<std::string>{"critic_explore", "actor_2", "assessor"}));
  EXPECT_EQ(gw.calls(), 3u);
}

TEST(Scripted, SameRequestSameResponse) {
  GsEnv env(GsConfig::with_defaults(5));
  ScriptedBackend backend;
  Gateway gw(backend, 0);
  Session<GsEnv> s{env, gw, 42};
  DecisionMemory<GsEnv> mem(20);
  const auto state = gs_after_sums(env, {5, 10});
  auto a = propose(s, Preference::Explore, state, mem, std::nullopt);
  auto b = propose(s, Preference::Explore, state, mem, std::nullopt);
  EXPECT_EQ(a.raw, b.raw);
  const auto ex = backend.complete(request(RoleTag::assessor(), "x"));
  EXPECT_EQ(ex.usage.total_tokens, ex.usage.prompt_tokens + ex.usage.completion_tokens);
  EXPECT_EQ(ex.backend_id, "scripted");
}

TEST(Scripted, GsExplorerStepsPastRisingReward) {
  GsConfig c = GsConfig::with_defaults(3);
  GsEnv env(c);
  ScriptedBackend backend;
  Gateway gw(backend, 0);
  Session<GsEnv> s{env, gw, 0};
  DecisionMemory<GsEnv> mem(20);
  const auto state = gs_after_sums(env, {3, 6});
  ASSERT_GT(state.payload.history[1].reward, state.payload.history[0].reward);
  auto explore = propose(s, Preference::Explore, state, mem, std::nullopt);
  auto exploit = propose(s, Preference::Exploit, state, mem, std::nullopt);
  ASSERT_TRUE(explore.joint && exploit.joint);
  EXPECT_EQ(joint_sum(*explore.joint), 6 + c.n_agents);
  EXPECT_EQ(joint_sum(*exploit.joint), 6);
}

TEST(Scripted, GridProposalsDeliver) {
  GridEnv easy(testing::grid_config(1, 2, GridMode::Easy, {{"object_red_1", "red", 0, 1}},
                                    {{"target_red_1", "red", {0, 1}}}));
  GridEnv hard(testing::grid_config(2, 2, GridMode::Hard, {{"object_red_1", "red", 2, 2}},
                                    {{"target_red_1", "red", {1, 1}}}));
  ScriptedBackend backend;
  Gateway gw(backend, 0);
  {
    Session<GridEnv> s{easy, gw, 0};
    DecisionMemory<GridEnv> mem(5);
    auto p = propose(s, Preference::Exploit, easy.initial_state(0), mem, std::nullopt);
    ASSERT_TRUE(p.joint);
    EXPECT_EQ(p.joint->actions.at(AgentId{1}), GridAction(PlaceInTarget{"object_red_1", "target_red_1"}));
  }
  {
    Session<GridEnv> s{hard, gw, 0};
    DecisionMemory<GridEnv> mem(5);
    auto p = propose(s, Preference::Explore, hard.initial_state(0), mem, std::nullopt);
    ASSERT_TRUE(p.joint);
    EXPECT_EQ(p.joint->actions.at(AgentId{3}), GridAction(MoveToTarget{"object_red_1", "target_red_1"}));
  }
}

TEST(Scripted, AssessorPassesIdenticalProposals) {
  GsEnv env(GsConfig::with_defaults(3));
  ScriptedBackend backend;
  Gateway gw(backend, 0);
  Session<GsEnv> s{env, gw, 0};
  DecisionMemory<GsEnv> mem(20);
  const auto state = env.initial_state(0);
  JointAction<GsAction> j;
  for (std::size_t i = 0; i < 3; ++i) j.actions[AgentId{i}] = {static_cast<int>(i) + 2};
  std::array<Proposal<GsEnv>, 2> proposals{Proposal<GsEnv>{Preference::Explore, j, "", {}, ""},
                                           Proposal<GsEnv>{Preference::Exploit, j, "", {}, ""}};
  auto verdict = veracity_scrutiny(s, state, mem, proposals);
  ASSERT_TRUE(verdict.pass);
  auto suggestions = belief_correction(s, state, mem, proposals, &*verdict.reply);
  EXPECT_EQ(to_joint(suggestions), j);
  EXPECT_EQ(gw.calls(), 1u);
}

// ---------------------------------------------------------------------------
// Parsing

TEST(Parse, WellFormedAndEmbedded) {
  GsEnv env(GsConfig::with_defaults(3));
  const std::string block = R"({"thoughts":"go","actions":{"agent_0":1,"agent_1":2,"agent_2":3}})";
  auto a = parse_action_map(env, block);
  ASSERT_TRUE(ok(a));
  EXPECT_EQ(std::get<ActionMapReply<GsEnv>>(a).joint.actions.at(AgentId{2}).value, 3);
  EXPECT_EQ(std::get<ActionMapReply<GsEnv>>(a).thoughts, "go");

  auto b = parse_action_map(env, "Let me think {about it}.\n```json\n" + block + "\n```\nDone.");
  ASSERT_TRUE(ok(b));
  EXPECT_EQ(std::get<ActionMapReply<GsEnv>>(b).joint, std::get<ActionMapReply<GsEnv>>(a).joint);
}

TEST(Parse, MissingAgentIsAGrammarError) {
  GsEnv env(GsConfig::with_defaults(3));
  auto r = parse_action_map(env, R"({"actions":{"agent_0":1,"agent_1":2}})");
  ASSERT_FALSE(ok(r));
  EXPECT_NE(std::get<GrammarError>(r).reason.find("missing agent agent_2"), std::string::npos);
  auto extra = parse_action_map(env, R"({"actions":{"agent_0":1,"agent_1":2,"agent_2":3,"agent_3":4}})");
  EXPECT_FALSE(ok(extra));
  auto none = parse_action_map(env, "no json here");
  ASSERT_FALSE(ok(none));
  EXPECT_NE(std::get<GrammarError>(none).reason.find("no action_map block"), std::string::npos);
}

TEST(Parse, VerdictAndFeedback) {
  auto v = parse_verdict(R"(ok {"verdict":"pass","note":"n","suggestions":{"agent_0":{"action":1}}})");
  ASSERT_TRUE(ok(v));
  EXPECT_TRUE(std::get<AssessorVerdict>(v).pass);
  EXPECT_EQ(std::get<AssessorVerdict>(v).note, "n");
  EXPECT_TRUE(std::get<AssessorVerdict>(v).suggestions);
  EXPECT_FALSE(ok(parse_verdict(R"({"verdict":"maybe"})")));
  EXPECT_EQ(parse_feedback_text(R"(x {"feedback":"too far"} y)"), "too far");
  EXPECT_EQ(parse_feedback_text("plain words"), "plain words");
}

TEST(Parse, SuggestionMapRequiredAndExact) {
  GsEnv env(GsConfig::with_defaults(3));
  const std::string text = R"({"suggestions":{"agent_1":{"action":4,"rationale":"r"}}})";
  auto partial = parse_suggestion_map(env, text, {AgentId{1}}, true);
  ASSERT_TRUE(ok(partial));
  EXPECT_EQ(std::get<SuggestionReply<GsEnv>>(partial).rationales.at(AgentId{1}), "r");
  EXPECT_FALSE(ok(parse_suggestion_map(env, text, {AgentId{2}}, false)));
  EXPECT_FALSE(ok(parse_suggestion_map(env, text)));
}

// Property: parsing never throws, whatever the input.
TEST(Property, ParserTotality) {
  GsEnv gs(GsConfig::with_defaults(3));
  GridEnv grid(testing::grid_fixture("hard_2x2.scenario"));
  const std::string seed_text =
      R"json(x {"thoughts":"t","actions":{"agent_0":"move(object_red_1, corner(0,0))","agent_1":"noop","agent_2":1,"agent_3":"noop"}} y)json";
  const std::string alphabet = "{}[]\":,\\ agent_0123456789actionsmove()noopcornertarget\n";
  SplitMix64 rng(17);
  for (int i = 0; i < 3000; ++i) {
    std::string text = seed_text;
    const auto edits = 1 + rng.below(6);
    for (std::uint64_t e = 0; e < edits && !text.empty(); ++e) {
      const auto pos = rng.below(text.size());
      switch (rng.below(3)) {
        case 0: text.erase(pos, 1); break;
        case 1: text.insert(pos, 1, alphabet[rng.below(alphabet.size())]); break;
        default: text[pos] = static_cast<char>(rng.below(256)); break;
      }
    }
    EXPECT_NO_THROW({
      (void)parse_action_map(gs, text);
      (void)parse_action_map(grid, text);
      (void)parse_verdict(text);
      (void)parse_suggestion_map(grid, text);
      (void)parse_feedback_text(text);
    });
  }
}

// Property: format then parse gives back the same joint action.
TEST(Property, ActionMapRoundTrip) {
  SplitMix64 rng(21);
  for (int i = 0; i < 100; ++i) {
    GsEnv gs(GsConfig::with_defaults(1 + static_cast<int>(rng.below(20))));
    JointAction<GsAction> j;
    for (std::size_t a = 0; a < gs.agent_count(); ++a) j.actions[AgentId{a}] = {static_cast<int>(rng.below(10))};
    auto back = parse_action_map(gs, format_action_map(gs, j, "why \"quoted\" {braces}"));
    ASSERT_TRUE(ok(back));
    EXPECT_EQ(std::get<ActionMapReply<GsEnv>>(back).joint, j);
  }
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    GridEnv grid(generate_grid_scenario(2, 3, seed % 2 ? GridMode::Hard : GridMode::Easy, 3, seed));
    const auto s = grid.initial_state(0);
    auto j = testing::random_conflict_free_joint(grid, s, rng);
    auto back = parse_action_map(grid, format_action_map(grid, j, ""));
    ASSERT_TRUE(ok(back));
    EXPECT_EQ(std::get<ActionMapReply<GridEnv>>(back).joint, j);
    SuggestionReply<GridEnv> sr{j.actions, {}};
    auto sback = parse_suggestion_map(grid, format_suggestion_map(grid, sr));
    ASSERT_TRUE(ok(sback));
    EXPECT_EQ(std::get<SuggestionReply<GridEnv>>(sback).actions, j.actions);
  }
}

// ---------------------------------------------------------------------------
// Prompts

Bindings critic_bindings() {
  return {{"task", "TASK"},          {"preference", std::string(prompts::explore_clause)},
          {"agents", "agent_0"},     {"action_grammar", "an integer"},
          {"state", "STATE"},        {"memory", "[]"},
          {"notes", "(none)"},       {"feedback", "(none)"}};
}

TEST(Prompts, CriticCarriesPreferenceClause) {
  auto msgs = instantiate_prompt(prompts::critic, critic_bindings());
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].speaker, "system");
  EXPECT_NE(msgs[0].text.find(prompts::explore_clause), std::string::npos);
  EXPECT_EQ(msgs[0].text.find(prompts::exploit_clause), std::string::npos);
  EXPECT_EQ(msgs[0].text.find("# template"), std::string::npos);
  EXPECT_EQ(msgs, instantiate_prompt(prompts::critic, critic_bindings()));
}

TEST(Prompts, UnboundPlaceholderNamesTheKey) {
  auto b = critic_bindings();
  b.erase("memory");
  try {
    instantiate_prompt(prompts::critic, b);
    FAIL();
  } catch (const UnboundPlaceholder& e) {
    EXPECT_EQ(e.name, "memory");
  }
}

TEST(Prompts, ValuesAreNotReExpanded) {
  auto b = critic_bindings();
  b["state"] = "{{notes}} and {\"json\": 1}";
  auto msgs = instantiate_prompt(prompts::critic, b);
  EXPECT_NE(msgs[1].text.find("{{notes}} and {\"json\": 1}"), std::string::npos);
}

TEST(Prompts, ActorFeedbackTemplate) {
  auto msgs = instantiate_prompt(prompts::actor_feedback, {{"agent", "agent_3"},
                                                           {"task", "T"},
                                                           {"observation", "OBS"},
                                                           {"suggestion", "move(o, cell(0,0))"},
                                                           {"issues", "distance: fail"}});
  EXPECT_NE(msgs[0].text.find("agent_3"), std::string::npos);
  EXPECT_NE(msgs[1].text.find("move(o, cell(0,0))"), std::string::npos);
}

TEST(Prompts, ShippedFilesMatchEmbeddedTexts) {
  for (const auto* tpl : prompts::all()) {
    EXPECT_EQ(testing::read_file(std::string(LLAMAC_PROMPT_DIR) + "/" + tpl->name + ".txt"), tpl->body) << tpl->name;
    EXPECT_NE(tpl->body.find("# version: "), std::string::npos) << tpl->name;
  }
}

// ---------------------------------------------------------------------------
// Replay and fault injection

TEST(Replay, ServesRecordedResponsesInOrder) {
  ScriptedBackend scripted;
  std::vector<ChatExchange> recorded;
  std::vector<ChatRequest> requests{request(RoleTag::critic(true), "a"), request(RoleTag::assessor(), "b")};
  for (const auto& r : requests) recorded.push_back(scripted.complete(r));
  ReplayBackend replay(recorded);
  for (std::size_t i = 0; i < requests.size(); ++i) EXPECT_EQ(replay.complete(requests[i]), recorded[i]);
  EXPECT_THROW(replay.complete(requests[0]), ReplayDivergence);

  ReplayBackend wrong_prompt(recorded);
  EXPECT_THROW(wrong_prompt.complete(request(RoleTag::critic(true), "changed")), ReplayDivergence);
  ReplayBackend wrong_role(recorded);
  EXPECT_THROW(wrong_role.complete(request(RoleTag::assessor(), "a")), ReplayDivergence);
}

TEST(FaultInjection, RewritesOnlyTheChosenCalls) {
  ScriptedBackend scripted;
  FaultInjectingBackend faulty(scripted, {{RoleKind::Assessor, 1, 2,
                                           [](const ChatRequest&, const std::string&) { return std::string("garbage here"); }}});
  std::vector<std::string> texts;
  for (int i = 0; i < 4; ++i) texts.push_back(faulty.complete(request(RoleTag::assessor(), "q")).response_text);
  auto critic = faulty.complete(request(RoleTag::critic(false), "q"));
  EXPECT_NE(texts[0], "garbage here");
  EXPECT_EQ(texts[1], "garbage here");
  EXPECT_EQ(texts[2], "garbage here");
  EXPECT_NE(texts[3], "garbage here");
  EXPECT_NE(critic.response_text, "garbage here");
  EXPECT_EQ(faulty.injected(), 2);

  FaultInjectingBackend forever(scripted, {{RoleKind::Actor, 0, -1,
                                            [](const ChatRequest&, const std::string&) { return std::string("abcdefgh"); }}});
  for (int i = 0; i < 5; ++i) {
    auto ex = forever.complete(request(RoleTag::actor(AgentId{0}), "q"));
    EXPECT_EQ(ex.usage.completion_tokens, 2);
  }
  EXPECT_EQ(forever.injected(), 5);
}

}  // namespace
}  // namespace llamac
