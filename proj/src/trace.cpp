#include "sbm/trace.hpp"

namespace sbm {

const char* terminal_name(Terminal t) {
  switch (t) {
    case Terminal::Deadlock: return "deadlock";
    case Terminal::MaxSteps: return "max_steps";
    case Terminal::HarnessStop: return "harness_stop";
  }
  return "?";
}

namespace {

bool pattern_equal(const EventPattern& a, const EventPattern& b) {
  return a.label == b.label && a.text == b.text;
}

}  // namespace

bool step_equal(const StepRecord& a, const StepRecord& b) {
  if (a.index != b.index || !(a.triggered == b.triggered) ||
      a.modifier_fired != b.modifier_fired) {
    return false;
  }
  if (a.requested != b.requested) return false;
  if (a.blocked.size() != b.blocked.size()) return false;
  for (std::size_t i = 0; i < a.blocked.size(); ++i) {
    if (!pattern_equal(a.blocked[i], b.blocked[i])) return false;
  }
  return true;
}

bool trace_equal(const Trace& a, const Trace& b) {
  if (a.terminal != b.terminal || a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    if (!step_equal(a.steps[i], b.steps[i])) return false;
  }
  return true;
}

}  // namespace sbm
