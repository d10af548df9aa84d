#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "sbm/event.hpp"
#include "sbm/rng.hpp"

namespace sbm {

// Scenario state is an explicit value so runs can be replayed and the
// enumeration oracle can branch: `node` indexes the synchronization point,
// the two payload slots carry data between points (a stored observation,
// a relaxed threshold, ...).
struct ScenarioState {
  int node = 0;
  Payload memory{};
  Payload extra{};

  friend bool operator==(const ScenarioState&, const ScenarioState&) = default;
};

// Optional registration-time description of which labels a scenario may
// request or block.  Builders fill this in so model-level conventions
// (e.g. "guards never block inputs") can be rejected before a run starts.
struct LabelFootprint {
  std::set<EventLabel> may_request;
  std::set<EventLabel> may_block;
};

// A scenario object: a deterministic state machine that declares one
// synchronization statement per state.
//
//  - sync(state) yields the requested / blocked / waited sets at `state`.
//    The engine calls it exactly once per synchronization point.
//  - delta(state, event) is the transition function.  The engine invokes it
//    only when the triggered event matches a waited pattern or shares a
//    label with a requested entry; on every other event the scenario is
//    left untouched, which makes the step function total by construction.
class ScenarioObject {
 public:
  using SyncFn = std::function<SyncStatement(const ScenarioState&)>;
  using DeltaFn = std::function<ScenarioState(const ScenarioState&, const EventInstance&)>;

  ScenarioObject(std::string id, ScenarioState initial, SyncFn sync, DeltaFn delta)
      : id_(std::move(id)),
        initial_(std::move(initial)),
        sync_(std::move(sync)),
        delta_(std::move(delta)) {}

  const std::string& id() const { return id_; }
  const ScenarioState& initial() const { return initial_; }

  SyncStatement sync(const ScenarioState& s) const { return sync_(s); }
  ScenarioState advance(const ScenarioState& s, const EventInstance& e) const {
    return delta_(s, e);
  }

  const std::optional<LabelFootprint>& footprint() const { return footprint_; }
  ScenarioObject& declare_footprint(LabelFootprint f) {
    footprint_ = std::move(f);
    return *this;
  }

 private:
  std::string id_;
  ScenarioState initial_;
  SyncFn sync_;
  DeltaFn delta_;
  std::optional<LabelFootprint> footprint_;
};

// Provenance-tagged entry of the per-step requested union: which scenario
// asked for the event and at which position of its statement.  Selection
// strategies use this for priority ordering.
struct RequestEntry {
  EventInstance event;
  double weight = 1.0;
  std::size_t scenario_index = 0;
  std::size_t declaration_index = 0;

  friend bool operator==(const RequestEntry&, const RequestEntry&) = default;
};

// A modifier scenario: carries its own state machine over triggered events
// (delta is total: modifiers observe everything) plus the modification
// function applied between event selection and event triggering.
//
// modify() receives the step's full requested union and blocked union along
// with the candidate event; it must return the event to trigger instead
// (possibly the candidate itself, possibly an event nobody requested) and
// must never return an event matched by the blocked set.
class ModifierScenario {
 public:
  using DeltaFn = std::function<ScenarioState(const ScenarioState&, const EventInstance&)>;
  using ModifyFn = std::function<EventInstance(
      const ScenarioState&, const std::vector<RequestEntry>&,
      const std::vector<EventPattern>&, const EventInstance&, RngStream&)>;

  ModifierScenario(std::string id, ScenarioState initial, ModifyFn modify, DeltaFn delta)
      : id_(std::move(id)),
        initial_(std::move(initial)),
        modify_(std::move(modify)),
        delta_(std::move(delta)) {}

  const std::string& id() const { return id_; }
  const ScenarioState& initial() const { return initial_; }

  EventInstance modify(const ScenarioState& s, const std::vector<RequestEntry>& requested,
                       const std::vector<EventPattern>& blocked, const EventInstance& candidate,
                       RngStream& rng) const {
    return modify_(s, requested, blocked, candidate, rng);
  }
  ScenarioState advance(const ScenarioState& s, const EventInstance& e) const {
    return delta_(s, e);
  }

 private:
  std::string id_;
  ScenarioState initial_;
  ModifyFn modify_;
  DeltaFn delta_;
};

// Identity transition, for stateless scenarios and modifiers.
inline ScenarioState keep_state(const ScenarioState& s, const EventInstance&) { return s; }

}  // namespace sbm
