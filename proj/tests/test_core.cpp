#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sbm/engine.hpp"
#include "sbm/enumerate.hpp"
#include "sbm/trace_io.hpp"

using namespace sbm;

namespace {

EventInstance ev(std::string label) { return EventInstance{std::move(label), Payload{}}; }

// Requests one fixed event forever; advances (node bump) on its own label.
ScenarioObject requester(std::string id, EventInstance e, double weight = 1.0) {
  EventLabel label = e.label;
  return ScenarioObject(
      id, ScenarioState{},
      [e, weight](const ScenarioState&) {
        SyncStatement s;
        s.request(e, weight);
        return s;
      },
      [label](const ScenarioState& s, const EventInstance& got) {
        ScenarioState next = s;
        if (got.label == label) ++next.node;
        return next;
      });
}

// Blocks the given patterns forever, requests nothing, waits for nothing.
ScenarioObject blocker(std::string id, std::vector<EventPattern> patterns) {
  return ScenarioObject(
      id, ScenarioState{},
      [patterns](const ScenarioState&) {
        SyncStatement s;
        for (const auto& p : patterns) s.block(p);
        return s;
      },
      keep_state);
}

// Requests the entries of `script` one per cycle, then goes quiet.
ScenarioObject script_requester(std::string id, std::vector<EventInstance> script) {
  return ScenarioObject(
      id, ScenarioState{},
      [script](const ScenarioState& s) {
        SyncStatement st;
        auto i = static_cast<std::size_t>(s.node);
        if (i < script.size()) st.request(script[i]);
        return st;
      },
      [script](const ScenarioState& s, const EventInstance& got) {
        ScenarioState next = s;
        auto i = static_cast<std::size_t>(s.node);
        if (i < script.size() && got.label == script[i].label) ++next.node;
        return next;
      });
}

ModifierScenario identity_modifier(std::string id) {
  return ModifierScenario(
      id, ScenarioState{},
      [](const ScenarioState&, const std::vector<RequestEntry>&, const std::vector<EventPattern>&,
         const EventInstance& candidate, RngStream&) { return candidate; },
      keep_state);
}

// Rewrites candidate label `from` to `to`, anything else passes through.
ModifierScenario relabel_modifier(std::string id, EventLabel from, EventLabel to) {
  return ModifierScenario(
      id, ScenarioState{},
      [from, to](const ScenarioState&, const std::vector<RequestEntry>&,
                 const std::vector<EventPattern>&, const EventInstance& candidate, RngStream&) {
        if (candidate.label == from) return EventInstance{to, candidate.payload};
        return candidate;
      },
      keep_state);
}

}  // namespace

TEST_CASE("registration records order and rejects duplicates", "[core][model]") {
  Model m;
  CHECK(m.add_scenario(requester("move_forward", ev("Forward"))) == 0);
  CHECK(m.add_scenario(requester("turn_left", ev("Left"))) == 1);
  CHECK(m.scenarios()[0].id() == "move_forward");
  CHECK(m.scenarios()[1].id() == "turn_left");

  CHECK_THROWS_AS(m.add_scenario(requester("move_forward", ev("Forward"))), RegistrationError);
  // ids are unique across scenario kinds too
  m.add_modifier(identity_modifier("passthrough"));
  CHECK_THROWS_AS(m.add_modifier(identity_modifier("passthrough")), RegistrationError);
  CHECK_THROWS_AS(m.add_scenario(requester("passthrough", ev("x"))), RegistrationError);
}

TEST_CASE("label declarations pin payload kinds", "[core][model]") {
  Model m;
  m.declare_label("rate", PayloadKind::RealScalar);
  m.declare_label("rate", PayloadKind::RealScalar);  // idempotent
  CHECK_THROWS_AS(m.declare_label("rate", PayloadKind::RealVector), RegistrationError);

  // first use pins an undeclared label; a later mismatch is rejected
  m.add_scenario(requester("a", EventInstance{"obs", std::vector<double>{1.0}}));
  m.add_scenario(requester("b", EventInstance{"obs", Payload{2.0}}));
  Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
  CHECK_THROWS_AS(engine.step(), PayloadError);
}

TEST_CASE("statement validation rejects contradictions and bad numbers", "[core][statement]") {
  SECTION("label requested and blocked in one statement") {
    SyncStatement s;
    s.request(ev("a")).block(match_label("a"));
    CHECK_THROWS_AS(validate_statement(s, "self_contradictory"), StatementError);
  }
  SECTION("negative weight") {
    SyncStatement s;
    s.request(ev("a"), -0.5);
    CHECK_THROWS_AS(validate_statement(s, "negative_weight"), PayloadError);
  }
  SECTION("non-finite weight") {
    SyncStatement s;
    s.request(ev("a"), std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(validate_statement(s, "inf_weight"), PayloadError);
  }
  SECTION("NaN payload rejected at injection") {
    Model m;
    m.add_scenario(requester(
        "nan_source", EventInstance{"obs", std::vector<double>{std::nan("")}}));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    CHECK_THROWS_AS(engine.step(), PayloadError);
  }
  SECTION("blocking a protected label") {
    Model m;
    m.forbid_blocking("InputEvent");
    m.add_scenario(requester("src", ev("InputEvent")));
    m.add_scenario(blocker("rogue", {match_label("InputEvent")}));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    CHECK_THROWS_AS(engine.step(), StatementError);
  }
  SECTION("requesting a reserved label from the wrong scenario") {
    Model m;
    m.reserve_requests("OutputEvent", "head");
    m.add_scenario(requester("head", ev("OutputEvent")));
    m.add_scenario(requester("imposter", ev("OutputEvent")));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    CHECK_THROWS_AS(engine.step(), StatementError);
  }
}

TEST_CASE("enabled set is requested minus blocked", "[core][enabled]") {
  SECTION("direct difference") {
    Model m;
    m.add_scenario(requester("ra", ev("a")));
    m.add_scenario(requester("rb", ev("b")));
    m.add_scenario(blocker("nb", {match_label("b")}));
    auto enabled = enabled_events(m, m.initial_states());
    REQUIRE(enabled.size() == 1);
    CHECK(enabled[0].label == "a");
  }
  SECTION("nothing requested") {
    Model m;
    m.add_scenario(blocker("only_blocks", {match_label("a")}));
    CHECK(enabled_events(m, m.initial_states()).empty());
  }
  SECTION("payload-level pattern blocks one action of a shared label") {
    Model m;
    ScenarioObject head(
        "head", ScenarioState{},
        [](const ScenarioState&) {
          SyncStatement s;
          s.request({"OutputEvent", ActionValue{"Forward", 0.2}}, 0.2);
          s.request({"OutputEvent", ActionValue{"Left", 0.5}}, 0.5);
          s.request({"OutputEvent", ActionValue{"Right", 0.3}}, 0.3);
          return s;
        },
        keep_state);
    m.add_scenario(std::move(head));
    m.add_scenario(blocker("guard", {match_action("OutputEvent", "Forward")}));
    auto enabled = enabled_events(m, m.initial_states());
    REQUIRE(enabled.size() == 2);
    CHECK(std::get<ActionValue>(enabled[0].payload).name == "Left");
    CHECK(std::get<ActionValue>(enabled[1].payload).name == "Right");
  }
  SECTION("duplicate requests deduplicate in first-occurrence order") {
    Model m;
    m.add_scenario(requester("r1", ev("a")));
    m.add_scenario(requester("r2", ev("a")));
    auto enabled = enabled_events(m, m.initial_states());
    CHECK(enabled.size() == 1);
  }
}

TEST_CASE("deterministic priority picks by registration then declaration order", "[core][select]") {
  Model m;
  ScenarioObject two(
      "two_requests", ScenarioState{},
      [](const ScenarioState&) {
        SyncStatement s;
        s.request(ev("x"));
        s.request(ev("y"));
        return s;
      },
      keep_state);
  m.add_scenario(std::move(two));
  m.add_scenario(requester("later", ev("z")));

  SECTION("least entry wins") {
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    auto step = engine.step();
    REQUIRE(step);
    CHECK(step->triggered.label == "x");
  }
  SECTION("blocking the leader falls back within the same statement") {
    m.add_scenario(blocker("nx", {match_label("x")}));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    auto step = engine.step();
    REQUIRE(step);
    CHECK(step->triggered.label == "y");
  }
}

TEST_CASE("selection strategies handle singletons and deadlock", "[core][select]") {
  SECTION("uniform random over a singleton returns it without consuming the stream") {
    Model m;
    m.add_scenario(requester("only", ev("a")));
    Engine e1(m, SelectionStrategy::UniformRandom, 1);
    Engine e2(m, SelectionStrategy::UniformRandom, 99);
    auto s1 = e1.step();
    auto s2 = e2.step();
    REQUIRE((s1 && s2));
    CHECK(s1->triggered.label == "a");
    CHECK(step_equal(*s1, *s2));
  }
  SECTION("weighted redraw with every positive-weight request blocked deadlocks") {
    Model m;
    m.add_scenario(requester("ra", ev("a"), 1.0));
    m.add_scenario(requester("rb", ev("b"), 0.0));  // zero weight: never drawable
    m.add_scenario(blocker("na", {match_label("a")}));
    Engine engine(m, SelectionStrategy::WeightedRedraw, 3);
    CHECK_FALSE(engine.step().has_value());
    REQUIRE(engine.finished());
    CHECK(engine.trace().terminal == Terminal::Deadlock);
  }
  SECTION("empty request union deadlocks under every strategy") {
    for (auto strat : {SelectionStrategy::DeterministicPriority, SelectionStrategy::UniformRandom,
                       SelectionStrategy::WeightedRedraw}) {
      Model m;
      m.add_scenario(blocker("mute", {}));
      Engine engine(m, strat, 0);
      CHECK_FALSE(engine.step().has_value());
      CHECK(engine.trace().terminal == Terminal::Deadlock);
    }
  }
}

TEST_CASE("weighted redraw matches the renormalized distribution", "[core][select][redraw]") {
  // Blocking Forward in {(F,.2),(L,.5),(R,.3)} conditions the draw on the
  // complement: expected Left 0.5/0.8 = 0.625, Right 0.3/0.8 = 0.375.
  Model m;
  m.add_scenario(requester("rf", ev("Forward"), 0.2));
  m.add_scenario(requester("rl", ev("Left"), 0.5));
  m.add_scenario(requester("rr", ev("Right"), 0.3));
  m.add_scenario(blocker("nf", {match_label("Forward")}));

  Engine probe(m, SelectionStrategy::WeightedRedraw, 0);
  SyncSnapshot snap = probe.peek();

  const int kDraws = 100000;
  RngStream rng(20240817);
  int left = 0, right = 0;
  for (int i = 0; i < kDraws; ++i) {
    auto picked = select_event(SelectionStrategy::WeightedRedraw, snap, rng);
    REQUIRE(picked);
    if (picked->label == "Left") ++left;
    if (picked->label == "Right") ++right;
    REQUIRE(picked->label != "Forward");
  }
  CHECK(left + right == kDraws);
  CHECK_THAT(static_cast<double>(left) / kDraws,
             Catch::Matchers::WithinAbs(0.625, 0.01));
  CHECK_THAT(static_cast<double>(right) / kDraws,
             Catch::Matchers::WithinAbs(0.375, 0.01));
}

TEST_CASE("uniform random is uniform over the enabled set", "[core][select]") {
  Model m;
  m.add_scenario(requester("ra", ev("a"), 0.9));  // weights ignored by this strategy
  m.add_scenario(requester("rb", ev("b"), 0.1));
  Engine probe(m, SelectionStrategy::UniformRandom, 0);
  SyncSnapshot snap = probe.peek();

  RngStream rng(7);
  int a = 0;
  const int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) {
    auto picked = select_event(SelectionStrategy::UniformRandom, snap, rng);
    REQUIRE(picked);
    if (picked->label == "a") ++a;
  }
  CHECK_THAT(static_cast<double>(a) / kDraws, Catch::Matchers::WithinAbs(0.5, 0.01));
}

TEST_CASE("corridor walk: forward until the opening, then left", "[core][step]") {
  // MoveForward requests Forward each cycle; TurnLeft counts steps and at
  // the opening requests Left while blocking Forward.
  Model m;
  m.add_scenario(requester("move_forward", ev("Forward")));
  ScenarioObject turn_left(
      "turn_left", ScenarioState{},
      [](const ScenarioState& s) {
        SyncStatement st;
        if (s.node == 3) {
          st.request(ev("Left"));
          st.block(match_label("Forward"));
        } else {
          st.wait_for(match_label("Forward"));
        }
        return st;
      },
      [](const ScenarioState& s, const EventInstance&) {
        ScenarioState next = s;
        ++next.node;
        return next;
      });
  m.add_scenario(std::move(turn_left));

  Trace t = run_model(m, SelectionStrategy::DeterministicPriority, 0, 4);
  CHECK(t.labels() == std::vector<EventLabel>{"Forward", "Forward", "Forward", "Left"});

  // soundness: no triggered event matches its own blocked snapshot
  for (const auto& step : t.steps) {
    for (const auto& b : step.blocked) CHECK_FALSE(b.matches(step.triggered));
  }
}

TEST_CASE("wake-up rule: unnoticed events leave a scenario untouched", "[core][step]") {
  Model m;
  m.add_scenario(requester("ra", ev("a")));
  // waits only for "b": must not advance while "a" fires
  ScenarioObject sleeper(
      "sleeper", ScenarioState{},
      [](const ScenarioState&) {
        SyncStatement s;
        s.wait_for(match_label("b"));
        return s;
      },
      [](const ScenarioState& s, const EventInstance&) {
        ScenarioState next = s;
        ++next.node;
        return next;
      });
  m.add_scenario(std::move(sleeper));

  Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
  for (int i = 0; i < 5; ++i) engine.step();
  CHECK(engine.scenario_state(0).node == 5);  // advanced on own label
  CHECK(engine.scenario_state(1).node == 0);  // never noticed "a"
}

TEST_CASE("wake-up rule: requesting a label notices it even when another scenario wins",
          "[core][step]") {
  Model m;
  // both request the same label with different payloads; the triggered
  // instance is the first by priority, yet both advance (shared label)
  m.add_scenario(requester("r1", EventInstance{"tick", Payload{1.0}}));
  m.add_scenario(requester("r2", EventInstance{"tick", Payload{2.0}}));
  Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
  auto step = engine.step();
  REQUIRE(step);
  CHECK(step->triggered.payload == Payload{1.0});
  CHECK(engine.scenario_state(0).node == 1);
  CHECK(engine.scenario_state(1).node == 1);
}

TEST_CASE("componentwise product advance", "[core][step]") {
  // each scenario's post-state equals its own delta applied to the event
  auto probe = [](std::string id, EventLabel watch) {
    return ScenarioObject(
        std::move(id), ScenarioState{},
        [watch](const ScenarioState&) {
          SyncStatement s;
          s.wait_for(match_label(watch));
          return s;
        },
        [](const ScenarioState& s, const EventInstance& e) {
          ScenarioState next = s;
          ++next.node;
          next.memory = e.payload;
          return next;
        });
  };
  Model m;
  m.add_scenario(script_requester("script", {{"a", Payload{1.5}}, {"b", Payload{2.5}}}));
  m.add_scenario(probe("watch_a", "a"));
  m.add_scenario(probe("watch_b", "b"));

  Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
  engine.step();
  CHECK(engine.scenario_state(1).node == 1);
  CHECK(engine.scenario_state(1).memory == Payload{1.5});
  CHECK(engine.scenario_state(2).node == 0);
  engine.step();
  CHECK(engine.scenario_state(2).node == 1);
  CHECK(engine.scenario_state(2).memory == Payload{2.5});
}

TEST_CASE("run bounds and terminals", "[core][run]") {
  Model m;
  m.add_scenario(requester("ra", ev("a")));

  SECTION("max_steps=0 gives an empty MaxSteps trace") {
    Trace t = run_model(m, SelectionStrategy::DeterministicPriority, 0, 0);
    CHECK(t.steps.empty());
    CHECK(t.terminal == Terminal::MaxSteps);
  }
  SECTION("deadlock terminal on a finite script") {
    Model fin;
    fin.add_scenario(script_requester("script", {ev("a"), ev("b")}));
    Trace t = run_model(fin, SelectionStrategy::DeterministicPriority, 0, 10);
    CHECK(t.labels() == std::vector<EventLabel>{"a", "b"});
    CHECK(t.terminal == Terminal::Deadlock);
  }
  SECTION("run_while stop is recorded as HarnessStop") {
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    Trace t = engine.run_while(10, [](const StepRecord& s) { return s.index < 2; });
    CHECK(t.steps.size() == 3);
    CHECK(t.terminal == Terminal::HarnessStop);
  }
  SECTION("stepping after a terminal is an error") {
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    engine.run(1);
    CHECK_THROWS_AS(engine.step(), SbmError);
  }
}

TEST_CASE("determinism: equal configuration, equal traces", "[core][run]") {
  auto build = [] {
    Model m;
    m.add_scenario(requester("rf", ev("Forward"), 0.2));
    m.add_scenario(requester("rl", ev("Left"), 0.5));
    m.add_scenario(requester("rr", ev("Right"), 0.3));
    return m;
  };
  for (auto strat : {SelectionStrategy::DeterministicPriority, SelectionStrategy::UniformRandom,
                     SelectionStrategy::WeightedRedraw}) {
    Trace t1 = run_model(build(), strat, 42, 50);
    Trace t2 = run_model(build(), strat, 42, 50);
    CHECK(trace_equal(t1, t2));
  }
  // different seeds give a different weighted-redraw trace (sanity check
  // that trace_equal can fail)
  Trace t1 = run_model(build(), SelectionStrategy::WeightedRedraw, 1, 50);
  Trace t2 = run_model(build(), SelectionStrategy::WeightedRedraw, 2, 50);
  CHECK_FALSE(trace_equal(t1, t2));
}

TEST_CASE("modifier semantics", "[core][modifier]") {
  SECTION("identity modifier leaves the run unchanged") {
    auto build = [](bool with_modifier) {
      Model m;
      m.add_scenario(requester("rf", ev("Forward"), 0.2));
      m.add_scenario(requester("rl", ev("Left"), 0.5));
      m.add_scenario(requester("rr", ev("Right"), 0.3));
      if (with_modifier) m.add_modifier(identity_modifier("noop"));
      return m;
    };
    Trace plain = run_model(build(false), SelectionStrategy::WeightedRedraw, 11, 40);
    Trace guarded = run_model(build(true), SelectionStrategy::WeightedRedraw, 11, 40);
    CHECK(trace_equal(plain, guarded));
    for (const auto& s : guarded.steps) CHECK_FALSE(s.modifier_fired);
  }
  SECTION("a rewrite is delivered to pattern-matched scenarios and flagged") {
    Model m;
    m.add_scenario(requester("ra", ev("a")));
    // nobody requests "c"; the listener still notices it via waited
    ScenarioObject listener(
        "listener", ScenarioState{},
        [](const ScenarioState&) {
          SyncStatement s;
          s.wait_for(match_label("c"));
          return s;
        },
        [](const ScenarioState& s, const EventInstance&) {
          ScenarioState next = s;
          ++next.node;
          return next;
        });
    m.add_scenario(std::move(listener));
    m.add_modifier(relabel_modifier("flip", "a", "c"));

    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    auto step = engine.step();
    REQUIRE(step);
    CHECK(step->triggered.label == "c");
    CHECK(step->modifier_fired);
    CHECK(engine.scenario_state(1).node == 1);
    CHECK(engine.scenario_state(0).node == 0);  // requester never saw "a" fire
  }
  SECTION("modifiers compose as a pipeline in registration order") {
    Model m;
    m.add_scenario(requester("ra", ev("a")));
    m.add_modifier(relabel_modifier("first", "a", "b"));
    m.add_modifier(relabel_modifier("second", "b", "c"));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    auto step = engine.step();
    REQUIRE(step);
    CHECK(step->triggered.label == "c");
  }
  SECTION("returning a blocked event is a contract violation") {
    Model m;
    m.add_scenario(requester("ra", ev("a")));
    m.add_scenario(requester("rb", ev("b")));
    m.add_scenario(blocker("nb", {match_label("b")}));
    m.add_modifier(relabel_modifier("bad", "a", "b"));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    CHECK_THROWS_AS(engine.step(), ModifierContractError);
  }
  SECTION("deadlock is decided before any modifier runs") {
    Model m;
    m.add_scenario(requester("ra", ev("a")));
    m.add_scenario(blocker("na", {match_label("a")}));
    auto calls = std::make_shared<int>(0);
    ModifierScenario eager(
        "eager", ScenarioState{},
        [calls](const ScenarioState&, const std::vector<RequestEntry>&,
                const std::vector<EventPattern>&, const EventInstance& candidate, RngStream&) {
          ++*calls;
          return candidate;
        },
        keep_state);
    m.add_modifier(std::move(eager));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    CHECK_FALSE(engine.step().has_value());
    CHECK(engine.trace().terminal == Terminal::Deadlock);
    CHECK(*calls == 0);
  }
  SECTION("modifier state advances on every triggered event") {
    Model m;
    m.add_scenario(script_requester("script", {ev("a"), ev("b")}));
    ModifierScenario counter(
        "counter", ScenarioState{},
        [](const ScenarioState&, const std::vector<RequestEntry>&,
           const std::vector<EventPattern>&, const EventInstance& candidate, RngStream&) {
          return candidate;
        },
        [](const ScenarioState& s, const EventInstance&) {
          ScenarioState next = s;
          ++next.node;
          return next;
        });
    m.add_modifier(std::move(counter));
    Engine engine(m, SelectionStrategy::DeterministicPriority, 0);
    engine.step();
    engine.step();
    CHECK(engine.modifier_state(0).node == 2);
  }
}

TEST_CASE("trace export writes one record per step plus the terminal", "[core][io]") {
  Model m;
  m.add_scenario(script_requester("script", {{"obs", std::vector<double>{0.5, 1.0}},
                                             {"act", ActionValue{"Left", 0.625}}}));
  Trace t = run_model(m, SelectionStrategy::DeterministicPriority, 0, 10);
  REQUIRE(t.steps.size() == 2);
  REQUIRE(t.terminal == Terminal::Deadlock);

  std::ostringstream out;
  write_trace_jsonl(t, out);
  std::istringstream in(out.str());
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));

  REQUIRE(lines.size() == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(lines[i]["step"] == i);
    CHECK(lines[i].contains("event"));
    CHECK(lines[i].contains("payload"));
    CHECK(lines[i].contains("requested"));
    CHECK(lines[i].contains("blocked"));
    CHECK(lines[i].contains("modifier_fired"));
  }
  CHECK(lines[0]["event"] == "obs");
  CHECK(lines[0]["payload"]["values"] == std::vector<double>{0.5, 1.0});
  CHECK(lines[1]["payload"]["name"] == "Left");
  CHECK(lines[2]["terminal"] == "deadlock");
}

TEST_CASE("format_double round-trips shortest decimal forms", "[core][io]") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-1.25) == "-1.25");
  // value needing full precision survives a round trip
  double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}
