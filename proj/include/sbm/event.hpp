#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "sbm/errors.hpp"

namespace sbm {

// Events are identified by a label; the payload kind is fixed per label
// across a model (enforced at statement collection).
using EventLabel = std::string;

enum class PayloadKind { Empty, RealScalar, RealVector, Action };

// A member of a declared finite action set, together with the probability
// the emitting policy assigned to it.
struct ActionValue {
  std::string name;
  double confidence = 1.0;

  friend bool operator==(const ActionValue&, const ActionValue&) = default;
};

// Payload alternatives mirror PayloadKind in declaration order.
using Payload = std::variant<std::monostate, double, std::vector<double>, ActionValue>;

PayloadKind payload_kind(const Payload& p);
const char* payload_kind_name(PayloadKind k);

// True when every numeric component is finite (no NaN, no infinities).
bool payload_finite(const Payload& p);

// Compact printable form used in diagnostics and trace export,
// e.g. "(8.2)", "[0.5,0.1]", "(Forward p=0.62)", "" for Empty.
std::string payload_to_string(const Payload& p);

struct EventInstance {
  EventLabel label;
  Payload payload{};

  friend bool operator==(const EventInstance&, const EventInstance&) = default;
};

std::string event_to_string(const EventInstance& e);

// Label plus an optional payload predicate.  An empty predicate accepts any
// payload of the label.  `text` is the printable form kept in trace
// snapshots; predicates themselves are opaque.
struct EventPattern {
  EventLabel label;
  std::function<bool(const Payload&)> accepts{};
  std::string text;

  bool matches(const EventInstance& e) const {
    if (e.label != label) return false;
    return !accepts || accepts(e.payload);
  }
};

// Convenience constructors for the common pattern shapes.
EventPattern match_label(EventLabel label);
EventPattern match_exact(EventInstance e);
EventPattern match_action(EventLabel label, std::string action_name);

// One requested event with its selection weight (finite, >= 0).
struct WeightedRequest {
  EventInstance event;
  double weight = 1.0;
};

// What a scenario declares at a synchronization point.  Declaration order of
// `requested` is meaningful: it breaks ties under deterministic selection.
struct SyncStatement {
  std::vector<WeightedRequest> requested;
  std::vector<EventPattern> blocked;
  std::vector<EventPattern> waited;

  SyncStatement& request(EventInstance e, double weight = 1.0) {
    requested.push_back({std::move(e), weight});
    return *this;
  }
  SyncStatement& block(EventPattern p) {
    blocked.push_back(std::move(p));
    return *this;
  }
  SyncStatement& wait_for(EventPattern p) {
    waited.push_back(std::move(p));
    return *this;
  }
};

// Rejects self-contradictory or ill-formed statements:
//  - a label appearing in both `requested` and `blocked`,
//  - non-finite or negative weights,
//  - non-finite payloads (NaN / infinity rejected at injection).
// `owner` names the declaring scenario in error messages.
void validate_statement(const SyncStatement& s, const std::string& owner);

}  // namespace sbm
