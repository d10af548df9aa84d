#include "sbm/trace_io.hpp"

#include <charconv>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sbm/errors.hpp"

namespace sbm {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

nlohmann::json payload_to_json(const Payload& p) {
  nlohmann::json j;
  switch (payload_kind(p)) {
    case PayloadKind::Empty:
      j["kind"] = "empty";
      break;
    case PayloadKind::RealScalar:
      j["kind"] = "scalar";
      j["value"] = std::get<double>(p);
      break;
    case PayloadKind::RealVector:
      j["kind"] = "vector";
      j["values"] = std::get<std::vector<double>>(p);
      break;
    case PayloadKind::Action: {
      const auto& a = std::get<ActionValue>(p);
      j["kind"] = "action";
      j["name"] = a.name;
      j["confidence"] = a.confidence;
      break;
    }
  }
  return j;
}

Payload payload_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "empty") return std::monostate{};
  if (kind == "scalar") return j.at("value").get<double>();
  if (kind == "vector") return j.at("values").get<std::vector<double>>();
  if (kind == "action") {
    return ActionValue{j.at("name").get<std::string>(),
                       j.value("confidence", 1.0)};
  }
  throw FormatError("unknown payload kind: " + kind);
}

void write_trace_jsonl(const Trace& trace, std::ostream& out) {
  for (const StepRecord& s : trace.steps) {
    nlohmann::json j;
    j["step"] = s.index;
    j["event"] = s.triggered.label;
    j["payload"] = payload_to_json(s.triggered.payload);
    nlohmann::json requested = nlohmann::json::array();
    for (const RequestEntry& r : s.requested) {
      requested.push_back({{"event", r.event.label},
                           {"payload", payload_to_json(r.event.payload)},
                           {"weight", r.weight}});
    }
    j["requested"] = std::move(requested);
    nlohmann::json blocked = nlohmann::json::array();
    for (const EventPattern& b : s.blocked) blocked.push_back(b.text);
    j["blocked"] = std::move(blocked);
    j["modifier_fired"] = s.modifier_fired;
    out << j.dump() << '\n';
  }
  if (trace.terminal) {
    out << nlohmann::json{{"terminal", terminal_name(*trace.terminal)}}.dump() << '\n';
  }
}

}  // namespace sbm
