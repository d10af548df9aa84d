#include "sbm/model.hpp"

#include <algorithm>

#include "sbm/errors.hpp"

namespace sbm {

Model& Model::declare_label(const EventLabel& label, PayloadKind kind) {
  auto [it, inserted] = labels_.emplace(label, kind);
  if (!inserted && it->second != kind) {
    throw RegistrationError("label " + label + " declared as " +
                            payload_kind_name(it->second) + " and redeclared as " +
                            payload_kind_name(kind));
  }
  return *this;
}

Model& Model::forbid_blocking(const EventLabel& label) {
  unblockable_.insert(label);
  return *this;
}

Model& Model::reserve_requests(const EventLabel& label, const std::string& scenario_id) {
  auto [it, inserted] = reserved_.emplace(label, scenario_id);
  if (!inserted && it->second != scenario_id) {
    throw RegistrationError("label " + label + " already reserved for " + it->second);
  }
  return *this;
}

void Model::check_unique_id(const std::string& id) const {
  for (const auto& s : scenarios_) {
    if (s.id() == id) throw RegistrationError("duplicate scenario id: " + id);
  }
  for (const auto& m : modifiers_) {
    if (m.id() == id) throw RegistrationError("duplicate scenario id: " + id);
  }
}

std::size_t Model::add_scenario(ScenarioObject scenario) {
  check_unique_id(scenario.id());
  scenarios_.push_back(std::move(scenario));
  return scenarios_.size() - 1;
}

std::size_t Model::add_modifier(ModifierScenario modifier) {
  check_unique_id(modifier.id());
  modifiers_.push_back(std::move(modifier));
  return modifiers_.size() - 1;
}

std::optional<std::string> Model::reserved_requester(const EventLabel& label) const {
  auto it = reserved_.find(label);
  if (it == reserved_.end()) return std::nullopt;
  return it->second;
}

std::vector<ScenarioState> Model::initial_states() const {
  std::vector<ScenarioState> states;
  states.reserve(scenarios_.size());
  for (const auto& s : scenarios_) states.push_back(s.initial());
  return states;
}

std::vector<ScenarioState> Model::initial_modifier_states() const {
  std::vector<ScenarioState> states;
  states.reserve(modifiers_.size());
  for (const auto& m : modifiers_) states.push_back(m.initial());
  return states;
}

void enforce_label_kind(const EventInstance& e, std::map<EventLabel, PayloadKind>& kinds,
                        const std::string& context) {
  if (!payload_finite(e.payload)) {
    throw PayloadError(context + ": non-finite payload on " + e.label);
  }
  PayloadKind kind = payload_kind(e.payload);
  auto [it, inserted] = kinds.emplace(e.label, kind);
  if (!inserted && it->second != kind) {
    throw PayloadError(context + ": label " + e.label + " carries " +
                       payload_kind_name(kind) + " but is declared " +
                       payload_kind_name(it->second));
  }
}

SyncSnapshot collect_statements(const Model& model, const std::vector<ScenarioState>& states,
                                std::map<EventLabel, PayloadKind>& kinds) {
  if (states.size() != model.scenarios().size()) {
    throw StatementError("state vector does not match the registered scenarios");
  }
  SyncSnapshot snap;
  snap.statements.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const ScenarioObject& scn = model.scenarios()[i];
    SyncStatement stmt = scn.sync(states[i]);
    validate_statement(stmt, scn.id());
    for (std::size_t d = 0; d < stmt.requested.size(); ++d) {
      const WeightedRequest& req = stmt.requested[d];
      enforce_label_kind(req.event, kinds, scn.id());
      if (auto owner = model.reserved_requester(req.event.label);
          owner && *owner != scn.id()) {
        throw StatementError(scn.id() + ": label " + req.event.label +
                             " may only be requested by " + *owner);
      }
      snap.requested.push_back({req.event, req.weight, i, d});
    }
    for (const EventPattern& b : stmt.blocked) {
      if (model.blocking_forbidden(b.label)) {
        throw StatementError(scn.id() + ": blocking " + b.label + " is not allowed");
      }
      snap.blocked.push_back(b);
    }
    snap.statements.push_back(std::move(stmt));
  }
  return snap;
}

std::vector<EventInstance> enabled_from_snapshot(const SyncSnapshot& snap) {
  std::vector<EventInstance> enabled;
  for (const RequestEntry& entry : snap.requested) {
    bool blocked = std::any_of(snap.blocked.begin(), snap.blocked.end(),
                               [&](const EventPattern& b) { return b.matches(entry.event); });
    if (blocked) continue;
    if (std::find(enabled.begin(), enabled.end(), entry.event) == enabled.end()) {
      enabled.push_back(entry.event);
    }
  }
  return enabled;
}

std::vector<EventInstance> enabled_events(const Model& model,
                                          const std::vector<ScenarioState>& states) {
  std::map<EventLabel, PayloadKind> kinds = model.declared_labels();
  return enabled_from_snapshot(collect_statements(model, states, kinds));
}

bool statement_notices(const SyncStatement& statement, const EventInstance& e) {
  for (const EventPattern& w : statement.waited) {
    if (w.matches(e)) return true;
  }
  for (const WeightedRequest& r : statement.requested) {
    if (r.event.label == e.label) return true;
  }
  return false;
}

}  // namespace sbm
