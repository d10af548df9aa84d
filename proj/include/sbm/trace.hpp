#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sbm/scenario.hpp"

namespace sbm {

enum class Terminal { Deadlock, MaxSteps, HarnessStop };

const char* terminal_name(Terminal t);

// One synchronization point of a run: the triggered event plus snapshots of
// the requested and blocked unions the decision was made from.
// `modifier_fired` is true when some modifier returned an event different
// from the candidate it received.
struct StepRecord {
  std::size_t index = 0;
  EventInstance triggered;
  std::vector<RequestEntry> requested;
  std::vector<EventPattern> blocked;
  bool modifier_fired = false;
};

// A completed run.  Value type: copies are safe to hand elsewhere.
struct Trace {
  std::vector<StepRecord> steps;
  std::optional<Terminal> terminal;

  std::vector<EventLabel> labels() const {
    std::vector<EventLabel> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.triggered.label);
    return out;
  }
};

// Structural equality: triggered events bit-for-bit, snapshot contents by
// (event, weight, provenance) and (label, pattern text), terminals equal.
// This is the determinism contract's notion of "equal traces".
bool trace_equal(const Trace& a, const Trace& b);
bool step_equal(const StepRecord& a, const StepRecord& b);

}  // namespace sbm
