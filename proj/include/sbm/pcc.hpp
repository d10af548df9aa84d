#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sbm/trace.hpp"

namespace sbm::pcc {

// --- link model -------------------------------------------------------------

// Per-monitor-interval statistics of one protocol on the shared link.
struct MiStats {
  double throughput = 0.0;   // delivered rate, MB/s
  double loss_rate = 0.0;    // 1 - delivered/sent, 0 when nothing was sent
  double utilization = 0.0;  // total delivered / capacity (same for both)
};

// Proportional-share bottleneck: when the offered total exceeds capacity,
// each sender keeps the fraction capacity/total of what it sent.
// Returns (guarded, competitor).
std::pair<MiStats, MiStats> compute_mi_stats(double sent_guarded, double sent_competitor,
                                             double capacity);

// Competitor rate update from its own previous MI: inactive senders sit at
// zero, an activating sender starts at start_rate, a loss-free MI grows the
// rate by 1.1x (capped at capacity) and a lossy MI cuts it to 0.7x
// (floored at min_rate).
double competitor_rate_update(double prev_rate, double loss_rate, bool active, double capacity,
                              double start_rate, double min_rate);

// --- scavenger machinery ------------------------------------------------------

enum class ThroughputMode { OverrideOff, Yield, Restore };
const char* mode_name(ThroughputMode m);

struct YieldPolicy {
  enum class Kind { Fixed, Step, ExpDecay };
  Kind kind = Kind::Fixed;
  double rate = 2.0;   // Fixed: the yielded rate
  double delta = 1.0;  // Step: decrement per elapsed MI in the mode
  double alpha = 0.5;  // ExpDecay: per-MI factor
  double floor = 0.5;  // Step / ExpDecay lower bound
};

struct RestorePolicy {
  enum class Kind { Immediate, SlowStart };
  Kind kind = Kind::SlowStart;
};

// ticks_in_mode counts completed MIs since the mode was entered, so the
// first overridden MI sees 0.  entry_rate is the final rate at entry (the
// yield-exit rate seeds SlowStart); current_rate is the previous MI's
// final rate.
struct OverrideState {
  int ticks_in_mode = 0;
  double entry_rate = 0.0;
  double current_rate = 0.0;
};

// The closed forms:
//   OverrideOff            -> dnn_rate
//   Yield/Fixed(r)         -> r
//   Yield/Step(d, f)       -> max(f, entry_rate - d * ticks)
//   Yield/ExpDecay(a, f)   -> max(f, entry_rate * a^ticks)
//   Restore/Immediate      -> dnn_rate
//   Restore/SlowStart      -> min(dnn_rate, 2 * current_rate)
double override_rate(ThroughputMode mode, const YieldPolicy& yield_policy,
                     const RestorePolicy& restore_policy, double dnn_rate,
                     const OverrideState& st);

enum class Signal { OverrideOff, EnterYield, EnterRestore };
const char* signal_label(Signal s);  // the event label carrying the signal

struct DetectorConfig {
  enum class Kind { None, Scripted, LossThreshold };
  Kind kind = Kind::None;
  std::map<int, Signal> script;  // MI index -> signal to emit at that MI's start
  double theta_in = 0.2;         // LossThreshold: enter yield above this loss
  double theta_out = 0.05;       // LossThreshold: leave yield below this loss
  int consecutive = 2;           // LossThreshold: required consecutive MIs
};

// Detector decision at the start of MI number history.size().  The
// LossThreshold detector signals EnterYield after `consecutive` MIs with
// loss above theta_in while the override is off, and EnterRestore after
// `consecutive` MIs with loss below theta_out while yielding.
std::optional<Signal> monitor_network_state(const std::vector<MiStats>& history,
                                            const DetectorConfig& cfg, ThroughputMode mode);

// --- simulation ----------------------------------------------------------------

struct LinkConfig {
  double capacity = 20.0;   // MB/s
  double mi_duration = 1.0; // seconds per monitor interval
  int num_mis = 40;
  std::vector<std::pair<int, int>> competitor_schedule;  // active on [start, end)
  double competitor_start_rate = 1.0;
  double competitor_min_rate = 0.1;
};

// Deterministic stand-in for a learned rate controller: starts at
// initial_rate, probes additively while the previous MI was loss free,
// backs off multiplicatively otherwise.
struct ProbePolicyConfig {
  double initial_rate = 4.0;
  double probe = 0.5;
  double backoff = 0.8;
  double floor = 0.5;
};

// Whether the override is realized as proxy events
// (UpdateSendingRateReduce / UpdateSendingRateRestore requested by two
// extra scenarios) or as one modifier scenario rewriting UpdateSendingRate
// in place.  Both produce the same observable behavior.
enum class GuardStyle { Modifier, Proxy };

struct SimConfig {
  LinkConfig link;
  ProbePolicyConfig policy;
  std::optional<std::string> policy_network;  // weight file instead of the probe policy
  DetectorConfig detector;
  YieldPolicy yield_policy;
  RestorePolicy restore_policy;
  GuardStyle style = GuardStyle::Modifier;
  bool guard_enabled = true;
  std::uint64_t seed = 0;
};

struct PccRow {
  int mi = 0;
  double dnn_rate = 0.0;
  double final_rate = 0.0;
  ThroughputMode mode = ThroughputMode::OverrideOff;
  double thr_guarded = 0.0;
  double thr_competitor = 0.0;
  double loss_rate = 0.0;  // guarded protocol's loss
};

struct PccResult {
  std::vector<PccRow> rows;
  Trace engine_trace;
  // Style-independent projection of the run: inputs, signals, and the
  // final rate event of every MI under its canonical label.
  std::vector<EventInstance> canonical_events;
};

PccResult simulate(const SimConfig& cfg);

// CSV with header mi,dnn_rate,final_rate,mode,thr_guarded,thr_competitor,loss_rate.
void write_csv(const std::vector<PccRow>& rows, std::ostream& out);

SimConfig parse_config(const nlohmann::json& j);
SimConfig load_config(const std::string& path);

}  // namespace sbm::pcc
