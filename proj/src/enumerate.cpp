#include "sbm/enumerate.hpp"

#include <algorithm>
#include <deque>

#include "sbm/errors.hpp"

namespace sbm {

namespace {

struct Node {
  std::vector<ScenarioState> states;
  std::vector<EventLabel> labels;
};

std::vector<ScenarioState> advance_all(const Model& model, const std::vector<ScenarioState>& states,
                                       const SyncSnapshot& snap, const EventInstance& e) {
  std::vector<ScenarioState> next = states;
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (statement_notices(snap.statements[i], e)) {
      next[i] = model.scenarios()[i].advance(next[i], e);
    }
  }
  return next;
}

}  // namespace

std::vector<std::vector<EventLabel>> enumerate_runs(const Model& model, std::size_t depth,
                                                    std::size_t node_cap) {
  if (!model.modifiers().empty()) {
    throw SbmError("enumerate_runs covers modifier-free models only");
  }
  std::map<EventLabel, PayloadKind> kinds = model.declared_labels();
  std::vector<std::vector<EventLabel>> runs;
  std::deque<Node> queue;
  queue.push_back({model.initial_states(), {}});
  std::size_t expanded = 0;
  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    if (++expanded > node_cap) {
      throw StateSpaceCapError("enumeration exceeded its node budget of " +
                               std::to_string(node_cap) + " states");
    }
    SyncSnapshot snap = collect_statements(model, node.states, kinds);
    std::vector<EventInstance> enabled = enabled_from_snapshot(snap);
    if (enabled.empty() || node.labels.size() == depth) {
      runs.push_back(node.labels);
      continue;
    }
    for (const EventInstance& e : enabled) {
      Node child;
      child.states = advance_all(model, node.states, snap, e);
      child.labels = node.labels;
      child.labels.push_back(e.label);
      queue.push_back(std::move(child));
    }
  }
  return runs;
}

std::vector<EventLabel> deterministic_priority_path(const Model& model, std::size_t depth) {
  std::map<EventLabel, PayloadKind> kinds = model.declared_labels();
  std::vector<ScenarioState> states = model.initial_states();
  std::vector<EventLabel> path;
  while (path.size() < depth) {
    SyncSnapshot snap = collect_statements(model, states, kinds);
    const RequestEntry* pick = nullptr;
    for (const RequestEntry& entry : snap.requested) {
      bool blocked = std::any_of(snap.blocked.begin(), snap.blocked.end(),
                                 [&](const EventPattern& b) { return b.matches(entry.event); });
      if (!blocked) {
        pick = &entry;
        break;
      }
    }
    if (!pick) break;  // deadlock
    path.push_back(pick->event.label);
    states = advance_all(model, states, snap, pick->event);
  }
  return path;
}

bool is_prefix_of_any(const std::vector<EventLabel>& prefix,
                      const std::vector<std::vector<EventLabel>>& runs) {
  for (const auto& run : runs) {
    if (prefix.size() <= run.size() && std::equal(prefix.begin(), prefix.end(), run.begin())) {
      return true;
    }
  }
  return false;
}

}  // namespace sbm
