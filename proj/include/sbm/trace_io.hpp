#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "sbm/trace.hpp"

namespace sbm {

// Shortest round-trip decimal form (std::to_chars), so repeated runs write
// byte-identical files.
std::string format_double(double v);

nlohmann::json payload_to_json(const Payload& p);
Payload payload_from_json(const nlohmann::json& j);

// One JSON object per step: {"step", "event", "payload", "requested",
// "blocked", "modifier_fired"}, then a final {"terminal": ...} object when
// the trace carries a terminal.
void write_trace_jsonl(const Trace& trace, std::ostream& out);

}  // namespace sbm
