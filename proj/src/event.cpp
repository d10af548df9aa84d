#include "sbm/event.hpp"

#include <sstream>
#include <unordered_set>

namespace sbm {

PayloadKind payload_kind(const Payload& p) {
  return static_cast<PayloadKind>(p.index());
}

const char* payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::Empty: return "Empty";
    case PayloadKind::RealScalar: return "RealScalar";
    case PayloadKind::RealVector: return "RealVector";
    case PayloadKind::Action: return "Action";
  }
  return "?";
}

bool payload_finite(const Payload& p) {
  switch (payload_kind(p)) {
    case PayloadKind::Empty:
      return true;
    case PayloadKind::RealScalar:
      return std::isfinite(std::get<double>(p));
    case PayloadKind::RealVector: {
      for (double v : std::get<std::vector<double>>(p)) {
        if (!std::isfinite(v)) return false;
      }
      return true;
    }
    case PayloadKind::Action:
      return std::isfinite(std::get<ActionValue>(p).confidence);
  }
  return false;
}

namespace {

void format_double(std::ostringstream& out, double v) {
  out << v;
}

}  // namespace

std::string payload_to_string(const Payload& p) {
  std::ostringstream out;
  switch (payload_kind(p)) {
    case PayloadKind::Empty:
      break;
    case PayloadKind::RealScalar:
      out << '(';
      format_double(out, std::get<double>(p));
      out << ')';
      break;
    case PayloadKind::RealVector: {
      const auto& xs = std::get<std::vector<double>>(p);
      out << '[';
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out << ',';
        format_double(out, xs[i]);
      }
      out << ']';
      break;
    }
    case PayloadKind::Action: {
      const auto& a = std::get<ActionValue>(p);
      out << '(' << a.name << " p=";
      format_double(out, a.confidence);
      out << ')';
      break;
    }
  }
  return out.str();
}

std::string event_to_string(const EventInstance& e) {
  return e.label + payload_to_string(e.payload);
}

EventPattern match_label(EventLabel label) {
  EventPattern p;
  p.text = label;
  p.label = std::move(label);
  return p;
}

EventPattern match_exact(EventInstance e) {
  EventPattern p;
  p.label = e.label;
  p.text = event_to_string(e);
  p.accepts = [payload = e.payload](const Payload& q) { return q == payload; };
  return p;
}

EventPattern match_action(EventLabel label, std::string action_name) {
  EventPattern p;
  p.text = label + "(" + action_name + ")";
  p.label = std::move(label);
  p.accepts = [name = std::move(action_name)](const Payload& q) {
    const auto* a = std::get_if<ActionValue>(&q);
    return a && a->name == name;
  };
  return p;
}

void validate_statement(const SyncStatement& s, const std::string& owner) {
  std::unordered_set<std::string> requested_labels;
  for (const auto& [event, weight] : s.requested) {
    if (!std::isfinite(weight) || weight < 0.0) {
      throw PayloadError(owner + ": request weight for " + event.label +
                         " must be finite and non-negative");
    }
    if (!payload_finite(event.payload)) {
      throw PayloadError(owner + ": non-finite payload requested on " + event.label);
    }
    requested_labels.insert(event.label);
  }
  for (const auto& b : s.blocked) {
    if (requested_labels.count(b.label)) {
      throw StatementError(owner + ": label " + b.label +
                           " both requested and blocked in one statement");
    }
  }
}

}  // namespace sbm
