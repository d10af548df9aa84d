#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>

#include "sbm/model.hpp"
#include "sbm/trace.hpp"

namespace sbm {

enum class SelectionStrategy { DeterministicPriority, UniformRandom, WeightedRedraw };

const char* strategy_name(SelectionStrategy s);

// Picks the candidate event for one synchronization point.
//
//  - DeterministicPriority: the non-blocked entry least by
//    (scenario registration order, declaration order).  No randomness.
//  - UniformRandom: uniform over the deduplicated enabled set.
//  - WeightedRedraw: draws over the full requested union proportionally to
//    weight and redraws while the draw is blocked.
//
// Selection consumes randomness only when there is a real choice (two or
// more candidates); a sole candidate is returned without touching `rng`.
//
// Returns nullopt to signal deadlock: the enabled set is empty, or (under
// WeightedRedraw) every positive-weight request is blocked.
std::optional<EventInstance> select_event(SelectionStrategy strategy, const SyncSnapshot& snap,
                                          RngStream& rng);

// Executes a model: repeatedly collects statements, selects an event, runs
// the modifier pipeline, triggers, and advances every scenario whose
// statement noticed the event.  Deterministic: identical
// (model, strategy, seed, max_steps) produce bit-identical traces.
class Engine {
 public:
  Engine(Model model, SelectionStrategy strategy, std::uint64_t seed);

  // One synchronization point.  Returns the recorded step, or nullopt when
  // the model deadlocked (terminal set).  Stepping after any terminal is an
  // error.
  std::optional<StepRecord> step();

  // Steps until deadlock or until the trace holds `max_steps` steps
  // (terminal MaxSteps).  Returns a copy of the trace.
  Trace run(std::size_t max_steps);

  // Same, but stops with terminal HarnessStop when `keep_going` returns
  // false for the step just taken.
  Trace run_while(std::size_t max_steps, const std::function<bool(const StepRecord&)>& keep_going);

  bool finished() const { return trace_.terminal.has_value(); }
  const Trace& trace() const { return trace_; }
  void stop(Terminal reason);

  const Model& model() const { return model_; }
  const ScenarioState& scenario_state(std::size_t i) const { return states_.at(i); }
  const ScenarioState& modifier_state(std::size_t i) const { return modifier_states_.at(i); }

  // Statement collection at the current product state, without stepping.
  SyncSnapshot peek();

 private:
  Model model_;
  SelectionStrategy strategy_;
  RngStream rng_;
  std::vector<ScenarioState> states_;
  std::vector<ScenarioState> modifier_states_;
  std::map<EventLabel, PayloadKind> kinds_;
  Trace trace_;
};

// Convenience wrapper: build an engine, run it, hand back the trace.
Trace run_model(Model model, SelectionStrategy strategy, std::uint64_t seed,
                std::size_t max_steps);

}  // namespace sbm
