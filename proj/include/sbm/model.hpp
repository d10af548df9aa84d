#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbm/scenario.hpp"

namespace sbm {

// A model is the registered collection of scenario objects and modifier
// scenarios, plus the label alphabet and the conventions the engine
// enforces while collecting statements.
class Model {
 public:
  // Pins the payload kind carried by a label.  Idempotent; redeclaring a
  // label with a different kind is a registration error.  Labels that are
  // never declared get pinned on first use at run time.
  Model& declare_label(const EventLabel& label, PayloadKind kind);

  // Convention hooks.  A label marked unblockable may not appear in any
  // blocked set (how input events are protected); a label with a reserved
  // requester may only be requested by the scenario with that id.
  Model& forbid_blocking(const EventLabel& label);
  Model& reserve_requests(const EventLabel& label, const std::string& scenario_id);

  // Returns the registration index.  Duplicate ids are rejected.
  std::size_t add_scenario(ScenarioObject scenario);
  std::size_t add_modifier(ModifierScenario modifier);

  const std::vector<ScenarioObject>& scenarios() const { return scenarios_; }
  const std::vector<ModifierScenario>& modifiers() const { return modifiers_; }

  const std::map<EventLabel, PayloadKind>& declared_labels() const { return labels_; }
  bool blocking_forbidden(const EventLabel& label) const {
    return unblockable_.count(label) != 0;
  }
  // Empty optional: anyone may request the label.
  std::optional<std::string> reserved_requester(const EventLabel& label) const;

  // Fresh per-scenario state vector at the initial product state.
  std::vector<ScenarioState> initial_states() const;
  std::vector<ScenarioState> initial_modifier_states() const;

 private:
  void check_unique_id(const std::string& id) const;

  std::vector<ScenarioObject> scenarios_;
  std::vector<ModifierScenario> modifiers_;
  std::map<EventLabel, PayloadKind> labels_;
  std::map<EventLabel, std::string> reserved_;
  std::set<EventLabel> unblockable_;
};

// The per-step view the engine and the enumeration oracle both build: the
// union of all scenarios' statements with request provenance attached.
struct SyncSnapshot {
  std::vector<RequestEntry> requested;
  std::vector<EventPattern> blocked;
  // waited patterns are kept per scenario for the wake-up rule
  std::vector<SyncStatement> statements;  // index-aligned with Model::scenarios()
};

// Collects and validates every scenario's statement at `states`.  Enforces
// statement well-formedness, payload-kind consistency against `kinds`
// (pinning unseen labels), and the model's conventions.  `kinds` is carried
// by the caller so consecutive steps share one registry.
SyncSnapshot collect_statements(const Model& model, const std::vector<ScenarioState>& states,
                                std::map<EventLabel, PayloadKind>& kinds);

// Requested instances not matched by any blocked pattern, deduplicated,
// in first-occurrence order (registration order, then declaration order).
std::vector<EventInstance> enabled_from_snapshot(const SyncSnapshot& snap);

// Spec'd convenience: enabled set of `model` at an explicit product state.
std::vector<EventInstance> enabled_events(const Model& model,
                                          const std::vector<ScenarioState>& states);

// True when the scenario owning `statement` observes `e`: some waited
// pattern matches, or some requested entry shares the label.
bool statement_notices(const SyncStatement& statement, const EventInstance& e);

// Checks payload kind of `e` against the registry, pinning a new label on
// first use.  Throws PayloadError on mismatch or non-finite payload.
void enforce_label_kind(const EventInstance& e, std::map<EventLabel, PayloadKind>& kinds,
                        const std::string& context);

}  // namespace sbm
