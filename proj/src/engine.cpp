#include "sbm/engine.hpp"

#include <algorithm>

#include "sbm/errors.hpp"

namespace sbm {

const char* strategy_name(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::DeterministicPriority: return "deterministic_priority";
    case SelectionStrategy::UniformRandom: return "uniform_random";
    case SelectionStrategy::WeightedRedraw: return "weighted_redraw";
  }
  return "?";
}

namespace {

bool is_blocked(const EventInstance& e, const std::vector<EventPattern>& blocked) {
  return std::any_of(blocked.begin(), blocked.end(),
                     [&](const EventPattern& b) { return b.matches(e); });
}

std::optional<EventInstance> select_weighted_redraw(const SyncSnapshot& snap, RngStream& rng) {
  // Positive-weight entries are the drawable pool; zero-weight requests can
  // never be drawn.
  std::vector<const RequestEntry*> pool;
  double total = 0.0;
  for (const RequestEntry& entry : snap.requested) {
    if (entry.weight > 0.0) {
      pool.push_back(&entry);
      total += entry.weight;
    }
  }
  bool any_open = std::any_of(pool.begin(), pool.end(), [&](const RequestEntry* e) {
    return !is_blocked(e->event, snap.blocked);
  });
  if (pool.empty() || !any_open) return std::nullopt;  // deadlock signaled to caller
  if (pool.size() == 1) return pool.front()->event;
  for (;;) {
    double u = rng.uniform() * total;
    const RequestEntry* picked = pool.back();
    for (const RequestEntry* e : pool) {
      u -= e->weight;
      if (u < 0.0) {
        picked = e;
        break;
      }
    }
    if (!is_blocked(picked->event, snap.blocked)) return picked->event;
  }
}

}  // namespace

std::optional<EventInstance> select_event(SelectionStrategy strategy, const SyncSnapshot& snap,
                                          RngStream& rng) {
  std::vector<EventInstance> enabled = enabled_from_snapshot(snap);
  if (enabled.empty()) return std::nullopt;
  switch (strategy) {
    case SelectionStrategy::DeterministicPriority:
      // Entries are collected in (registration, declaration) order, so the
      // first non-blocked one is the priority choice.
      for (const RequestEntry& entry : snap.requested) {
        if (!is_blocked(entry.event, snap.blocked)) return entry.event;
      }
      return std::nullopt;  // unreachable: enabled was non-empty
    case SelectionStrategy::UniformRandom:
      if (enabled.size() == 1) return enabled.front();
      return enabled[rng.uniform_index(enabled.size())];
    case SelectionStrategy::WeightedRedraw:
      return select_weighted_redraw(snap, rng);
  }
  return std::nullopt;
}

Engine::Engine(Model model, SelectionStrategy strategy, std::uint64_t seed)
    : model_(std::move(model)), strategy_(strategy), rng_(seed) {
  if (model_.scenarios().empty()) {
    throw RegistrationError("a model needs at least one scenario object");
  }
  states_ = model_.initial_states();
  modifier_states_ = model_.initial_modifier_states();
  kinds_ = model_.declared_labels();
}

SyncSnapshot Engine::peek() { return collect_statements(model_, states_, kinds_); }

void Engine::stop(Terminal reason) {
  if (!trace_.terminal) trace_.terminal = reason;
}

std::optional<StepRecord> Engine::step() {
  if (trace_.terminal) {
    throw SbmError("step() called after the run ended (" +
                   std::string(terminal_name(*trace_.terminal)) + ")");
  }
  SyncSnapshot snap = collect_statements(model_, states_, kinds_);

  // Deadlock is decided on the enabled set, before any modifier runs.
  std::optional<EventInstance> candidate = select_event(strategy_, snap, rng_);
  if (!candidate) {
    trace_.terminal = Terminal::Deadlock;
    return std::nullopt;
  }

  // Modifier pipeline, registration order; each stage sees the previous
  // stage's output as its candidate.
  EventInstance chosen = *candidate;
  bool fired = false;
  const auto& modifiers = model_.modifiers();
  for (std::size_t i = 0; i < modifiers.size(); ++i) {
    EventInstance out =
        modifiers[i].modify(modifier_states_[i], snap.requested, snap.blocked, chosen, rng_);
    enforce_label_kind(out, kinds_, modifiers[i].id());
    if (is_blocked(out, snap.blocked)) {
      throw ModifierContractError(modifiers[i].id() + " returned blocked event " +
                                  event_to_string(out));
    }
    if (!(out == chosen)) fired = true;
    chosen = out;
  }

  StepRecord record;
  record.index = trace_.steps.size();
  record.triggered = chosen;
  record.requested = snap.requested;
  record.blocked = snap.blocked;
  record.modifier_fired = fired;

  // Componentwise advance: a scenario moves iff its own statement noticed
  // the triggered event; modifiers observe every event.
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (statement_notices(snap.statements[i], chosen)) {
      states_[i] = model_.scenarios()[i].advance(states_[i], chosen);
    }
  }
  for (std::size_t i = 0; i < modifier_states_.size(); ++i) {
    modifier_states_[i] = modifiers[i].advance(modifier_states_[i], chosen);
  }

  trace_.steps.push_back(record);
  return record;
}

Trace Engine::run(std::size_t max_steps) {
  return run_while(max_steps, [](const StepRecord&) { return true; });
}

Trace Engine::run_while(std::size_t max_steps,
                        const std::function<bool(const StepRecord&)>& keep_going) {
  while (!trace_.terminal && trace_.steps.size() < max_steps) {
    std::optional<StepRecord> record = step();
    if (record && !keep_going(*record)) {
      trace_.terminal = Terminal::HarnessStop;
    }
  }
  if (!trace_.terminal) trace_.terminal = Terminal::MaxSteps;
  return trace_;
}

Trace run_model(Model model, SelectionStrategy strategy, std::uint64_t seed,
                std::size_t max_steps) {
  Engine engine(std::move(model), strategy, seed);
  return engine.run(max_steps);
}

}  // namespace sbm
