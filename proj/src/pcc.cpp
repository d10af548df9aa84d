#include "sbm/pcc.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include <nlohmann/json.hpp>

#include "sbm/engine.hpp"
#include "sbm/errors.hpp"
#include "sbm/guard.hpp"
#include "sbm/nn.hpp"
#include "sbm/trace_io.hpp"

namespace sbm::pcc {

namespace {

const EventLabel kMonitorInterval = "MonitorInterval";
const EventLabel kQuery = "QueryNextSendingRate";
const EventLabel kUpdate = "UpdateSendingRate";
const EventLabel kReduce = "UpdateSendingRateReduce";
const EventLabel kRestoreEv = "UpdateSendingRateRestore";

}  // namespace

const char* mode_name(ThroughputMode m) {
  switch (m) {
    case ThroughputMode::OverrideOff: return "off";
    case ThroughputMode::Yield: return "yield";
    case ThroughputMode::Restore: return "restore";
  }
  return "?";
}

const char* signal_label(Signal s) {
  switch (s) {
    case Signal::OverrideOff: return "OverrideOff";
    case Signal::EnterYield: return "EnterYield";
    case Signal::EnterRestore: return "EnterRestore";
  }
  return "?";
}

std::pair<MiStats, MiStats> compute_mi_stats(double sent_guarded, double sent_competitor,
                                             double capacity) {
  if (!(capacity > 0.0)) throw FormatError("link capacity must be positive");
  if (sent_guarded < 0.0 || sent_competitor < 0.0) {
    throw FormatError("sending rates must be non-negative");
  }
  double total = sent_guarded + sent_competitor;
  double share = total > capacity ? capacity / total : 1.0;
  MiStats guarded;
  MiStats competitor;
  guarded.throughput = sent_guarded * share;
  competitor.throughput = sent_competitor * share;
  guarded.loss_rate = sent_guarded > 0.0 ? 1.0 - share : 0.0;
  competitor.loss_rate = sent_competitor > 0.0 ? 1.0 - share : 0.0;
  double utilization = (guarded.throughput + competitor.throughput) / capacity;
  guarded.utilization = utilization;
  competitor.utilization = utilization;
  return {guarded, competitor};
}

double competitor_rate_update(double prev_rate, double loss_rate, bool active, double capacity,
                              double start_rate, double min_rate) {
  if (!active) return 0.0;
  if (prev_rate <= 0.0) return start_rate;
  if (loss_rate > 0.0) return std::max(min_rate, prev_rate * 0.7);
  return std::min(capacity, prev_rate * 1.1);
}

double override_rate(ThroughputMode mode, const YieldPolicy& yield_policy,
                     const RestorePolicy& restore_policy, double dnn_rate,
                     const OverrideState& st) {
  switch (mode) {
    case ThroughputMode::OverrideOff:
      return dnn_rate;
    case ThroughputMode::Yield:
      switch (yield_policy.kind) {
        case YieldPolicy::Kind::Fixed:
          return yield_policy.rate;
        case YieldPolicy::Kind::Step:
          return std::max(yield_policy.floor,
                          st.entry_rate - yield_policy.delta * st.ticks_in_mode);
        case YieldPolicy::Kind::ExpDecay:
          return std::max(yield_policy.floor,
                          st.entry_rate * std::pow(yield_policy.alpha, st.ticks_in_mode));
      }
      return yield_policy.rate;
    case ThroughputMode::Restore:
      if (restore_policy.kind == RestorePolicy::Kind::Immediate) return dnn_rate;
      return std::min(dnn_rate, 2.0 * st.current_rate);
  }
  return dnn_rate;
}

std::optional<Signal> monitor_network_state(const std::vector<MiStats>& history,
                                            const DetectorConfig& cfg, ThroughputMode mode) {
  switch (cfg.kind) {
    case DetectorConfig::Kind::None:
      return std::nullopt;
    case DetectorConfig::Kind::Scripted: {
      auto it = cfg.script.find(static_cast<int>(history.size()));
      if (it == cfg.script.end()) return std::nullopt;
      return it->second;
    }
    case DetectorConfig::Kind::LossThreshold: {
      int k = cfg.consecutive;
      if (k <= 0 || history.size() < static_cast<std::size_t>(k)) return std::nullopt;
      auto tail_all = [&](auto pred) {
        for (std::size_t i = history.size() - k; i < history.size(); ++i) {
          if (!pred(history[i].loss_rate)) return false;
        }
        return true;
      };
      if (mode == ThroughputMode::OverrideOff &&
          tail_all([&](double l) { return l > cfg.theta_in; })) {
        return Signal::EnterYield;
      }
      if (mode == ThroughputMode::Yield &&
          tail_all([&](double l) { return l < cfg.theta_out; })) {
        return Signal::EnterRestore;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

namespace {

// Mode machine shared by both guard styles so their numerics cannot drift.
// apply() is free of transitions; commit() runs once per MI when the final
// rate event lands at the actuator.  Restore hands control back the moment
// slow start has caught the controller's own rate.
struct ScavengerCore {
  YieldPolicy yield_policy;
  RestorePolicy restore_policy;
  ThroughputMode mode = ThroughputMode::OverrideOff;
  ThroughputMode mode_used = ThroughputMode::OverrideOff;
  OverrideState st;

  double apply(double dnn_rate) {
    mode_used = mode;
    return override_rate(mode, yield_policy, restore_policy, dnn_rate, st);
  }

  void on_signal(Signal s) {
    switch (s) {
      case Signal::OverrideOff: mode = ThroughputMode::OverrideOff; break;
      case Signal::EnterYield: mode = ThroughputMode::Yield; break;
      case Signal::EnterRestore: mode = ThroughputMode::Restore; break;
    }
    st.ticks_in_mode = 0;
    st.entry_rate = st.current_rate;
  }

  void commit(double final_rate, double dnn_rate) {
    st.ticks_in_mode += 1;
    st.current_rate = final_rate;
    if (mode == ThroughputMode::Restore && final_rate == dnn_rate) {
      mode = ThroughputMode::OverrideOff;
      st.ticks_in_mode = 0;
      st.entry_rate = final_rate;
    }
  }
};

struct HarnessCore {
  SimConfig cfg;
  std::vector<MiStats> history;  // guarded protocol, one entry per completed MI
  ScavengerCore scav;
  std::optional<nn::Network> policy_net;
  double policy_rate = 0.0;
  double last_dnn = 0.0;
  std::optional<double> committed;  // final rate of the MI in flight

  std::vector<double> observation() const {
    if (history.empty()) return {0.0, 0.0, 0.0};
    const MiStats& s = history.back();
    return {s.throughput, s.loss_rate, s.utilization};
  }

  double next_policy_rate() {
    if (policy_net) {
      double out = nn::forward(*policy_net, observation()).front();
      policy_rate = std::max(0.1, out);
      return policy_rate;
    }
    const ProbePolicyConfig& p = cfg.policy;
    if (history.empty()) {
      policy_rate = p.initial_rate;
    } else if (history.back().loss_rate > 0.0) {
      policy_rate = std::max(p.floor, policy_rate * p.backoff);
    } else {
      policy_rate += p.probe;
    }
    return policy_rate;
  }
};

double scalar_payload(const EventInstance& e) {
  const double* v = std::get_if<double>(&e.payload);
  if (!v) throw PayloadError(e.label + " must carry a scalar rate");
  return *v;
}

std::vector<EventLabel> signal_labels() {
  return {signal_label(Signal::OverrideOff), signal_label(Signal::EnterYield),
          signal_label(Signal::EnterRestore)};
}

std::optional<Signal> signal_from_label(const EventLabel& l) {
  for (Signal s : {Signal::OverrideOff, Signal::EnterYield, Signal::EnterRestore}) {
    if (l == signal_label(s)) return s;
  }
  return std::nullopt;
}

// Emits the detector's verdict at the start of each MI, before the sensor's
// events; stays quiet for the rest of the cycle.
ScenarioObject make_monitor(std::shared_ptr<HarnessCore> core,
                            std::vector<EventLabel> cycle_end) {
  auto is_cycle_end = [cycle_end](const EventLabel& l) {
    return std::find(cycle_end.begin(), cycle_end.end(), l) != cycle_end.end();
  };
  ScenarioObject scenario(
      "monitor_network_state", ScenarioState{},
      [core, cycle_end](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == 0) {
          auto sig = monitor_network_state(core->history, core->cfg.detector, core->scav.mode);
          if (sig) {
            stmt.request({signal_label(*sig), std::monostate{}});
            return stmt;
          }
        }
        for (const EventLabel& l : cycle_end) stmt.wait_for(match_label(l));
        return stmt;
      },
      [core, is_cycle_end](const ScenarioState& s, const EventInstance& e) {
        if (auto sig = signal_from_label(e.label); sig && s.node == 0) {
          core->scav.on_signal(*sig);
          return ScenarioState{1};  // one signal per MI at most
        }
        if (is_cycle_end(e.label)) return ScenarioState{0};
        return s;
      });
  LabelFootprint fp;
  for (const EventLabel& l : signal_labels()) fp.may_request.insert(l);
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

// The rate controller head: consumes MonitorInterval then
// QueryNextSendingRate, then requests UpdateSendingRate with the policy's
// rate while keeping the cycle free of stray non-input events.
ScenarioObject make_rate_head(std::shared_ptr<HarnessCore> core) {
  std::vector<EventLabel> keep_out = signal_labels();
  ScenarioObject scenario(
      "rate_controller", ScenarioState{},
      [keep_out](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == 0) {
          stmt.wait_for(match_label(kMonitorInterval));
        } else if (s.node == 1) {
          stmt.wait_for(match_label(kQuery));
        } else {
          stmt.request({kUpdate, std::get<double>(s.memory)});
          for (const EventLabel& l : keep_out) stmt.block(match_label(l));
        }
        return stmt;
      },
      [core](const ScenarioState& s, const EventInstance& e) {
        if (e.label == kMonitorInterval) return ScenarioState{1};
        if (e.label == kQuery && s.node == 1) {
          double rate = core->next_policy_rate();
          core->last_dnn = rate;
          return ScenarioState{2, rate};
        }
        if (e.label == kUpdate) return ScenarioState{0};
        return s;
      });
  LabelFootprint fp;
  fp.may_request.insert(kUpdate);
  for (const EventLabel& l : keep_out) fp.may_block.insert(l);
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

// Proxy style: after every UpdateSendingRate, re-requests the rate as
// UpdateSendingRateReduce with the override applied.  In restore mode the
// companion scenario blocks this event and substitutes its own.
ScenarioObject make_reduce_throughput(std::shared_ptr<HarnessCore> core) {
  ScenarioObject scenario(
      "reduce_throughput", ScenarioState{},
      [](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == 0) {
          stmt.wait_for(match_label(kUpdate));
        } else {
          stmt.request({kReduce, std::get<double>(s.memory)});
          stmt.wait_for(match_label(kRestoreEv));
        }
        return stmt;
      },
      [core](const ScenarioState& s, const EventInstance& e) {
        if (e.label == kUpdate && s.node == 0) {
          return ScenarioState{1, core->scav.apply(scalar_payload(e))};
        }
        if (e.label == kReduce || e.label == kRestoreEv) return ScenarioState{0};
        return s;
      });
  scenario.declare_footprint({{kReduce}, {}});
  return scenario;
}

// Proxy style: in restore mode, outbids the reduce proxy by blocking it and
// requesting UpdateSendingRateRestore instead.
ScenarioObject make_restore_throughput(std::shared_ptr<HarnessCore> core) {
  ScenarioObject scenario(
      "restore_throughput", ScenarioState{},
      [](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == 0) {
          stmt.wait_for(match_label(kUpdate));
        } else {
          stmt.request({kRestoreEv, std::get<double>(s.memory)});
          stmt.block(match_label(kReduce));
        }
        return stmt;
      },
      [core](const ScenarioState& s, const EventInstance& e) {
        if (e.label == kUpdate && s.node == 0) {
          if (core->scav.mode != ThroughputMode::Restore) return s;
          return ScenarioState{1, core->scav.apply(scalar_payload(e))};
        }
        if (e.label == kRestoreEv) return ScenarioState{0};
        return s;
      });
  scenario.declare_footprint({{kRestoreEv}, {kReduce}});
  return scenario;
}

// Modifier style: one stage that rewrites UpdateSendingRate in place.
ModifierScenario make_control_throughput(std::shared_ptr<HarnessCore> core) {
  return ModifierScenario(
      "control_throughput", ScenarioState{},
      [core](const ScenarioState&, const std::vector<RequestEntry>&,
             const std::vector<EventPattern>&, const EventInstance& candidate, RngStream&) {
        if (candidate.label != kUpdate) return candidate;
        return EventInstance{kUpdate, core->scav.apply(scalar_payload(candidate))};
      },
      keep_state);
}

bool competitor_active(const LinkConfig& link, int mi) {
  for (const auto& [start, end] : link.competitor_schedule) {
    if (mi >= start && mi < end) return true;
  }
  return false;
}

void validate(const SimConfig& cfg) {
  if (!(cfg.link.capacity > 0.0)) throw FormatError("link capacity must be positive");
  if (!(cfg.link.mi_duration > 0.0)) throw FormatError("mi_duration must be positive");
  if (cfg.link.num_mis < 0) throw FormatError("num_mis must be non-negative");
  for (const auto& [start, end] : cfg.link.competitor_schedule) {
    if (start < 0 || end < start) throw FormatError("bad competitor schedule window");
  }
  if (!(cfg.yield_policy.rate >= 0.0) || !(cfg.yield_policy.floor >= 0.0) ||
      !(cfg.yield_policy.delta >= 0.0) || !(cfg.yield_policy.alpha > 0.0) ||
      !(cfg.yield_policy.alpha <= 1.0)) {
    throw FormatError("bad yield policy parameters");
  }
}

}  // namespace

PccResult simulate(const SimConfig& cfg) {
  validate(cfg);
  auto core = std::make_shared<HarnessCore>();
  core->cfg = cfg;
  core->scav.yield_policy = cfg.yield_policy;
  core->scav.restore_policy = cfg.restore_policy;
  if (!cfg.guard_enabled) core->cfg.detector.kind = DetectorConfig::Kind::None;
  if (cfg.policy_network) core->policy_net = nn::load_network(*cfg.policy_network);

  const bool proxy = cfg.style == GuardStyle::Proxy;
  std::vector<EventLabel> final_labels =
      proxy ? std::vector<EventLabel>{kReduce, kRestoreEv} : std::vector<EventLabel>{kUpdate};

  Model model;
  model.declare_label(kMonitorInterval, PayloadKind::RealVector)
      .declare_label(kQuery, PayloadKind::Empty)
      .declare_label(kUpdate, PayloadKind::RealScalar)
      .declare_label(kReduce, PayloadKind::RealScalar)
      .declare_label(kRestoreEv, PayloadKind::RealScalar);
  for (const EventLabel& l : signal_labels()) model.declare_label(l, PayloadKind::Empty);
  model.forbid_blocking(kMonitorInterval).forbid_blocking(kQuery);
  model.reserve_requests(kUpdate, "rate_controller");

  model.add_scenario(make_monitor(core, final_labels));

  guard::Feed feed = [core]() {
    return std::vector<EventInstance>{{kMonitorInterval, core->observation()},
                                      {kQuery, std::monostate{}}};
  };
  std::vector<EventPattern> resume;
  for (const EventLabel& l : final_labels) resume.push_back(match_label(l));
  model.add_scenario(guard::make_sensor("mi_sensor", feed, resume));

  model.add_scenario(make_rate_head(core));

  if (proxy) {
    model.add_scenario(make_reduce_throughput(core));
    model.add_scenario(make_restore_throughput(core));
  }

  std::vector<EventPattern> actuated;
  for (const EventLabel& l : final_labels) actuated.push_back(match_label(l));
  guard::Sink sink = [core](const EventInstance& e) {
    double rate = scalar_payload(e);
    core->committed = rate;
    core->scav.commit(rate, core->last_dnn);
  };
  model.add_scenario(guard::make_actuator("rate_actuator", sink, actuated));

  if (!proxy) model.add_modifier(make_control_throughput(core));

  Engine engine(std::move(model), SelectionStrategy::DeterministicPriority, cfg.seed);

  PccResult result;
  double competitor_rate = 0.0;
  MiStats competitor_prev;
  for (int mi = 0; mi < cfg.link.num_mis; ++mi) {
    core->committed.reset();
    int spins = 0;
    while (!core->committed) {
      if (++spins > 64) throw SbmError("pcc: synchronization cycle did not converge");
      if (!engine.step()) throw SbmError("pcc: model deadlocked during MI " + std::to_string(mi));
    }
    competitor_rate =
        competitor_rate_update(competitor_rate, competitor_prev.loss_rate,
                               competitor_active(cfg.link, mi), cfg.link.capacity,
                               cfg.link.competitor_start_rate, cfg.link.competitor_min_rate);
    auto [guarded, competitor] = compute_mi_stats(*core->committed, competitor_rate,
                                                  cfg.link.capacity);
    competitor_prev = competitor;
    core->history.push_back(guarded);
    PccRow row;
    row.mi = mi;
    row.dnn_rate = core->last_dnn;
    row.final_rate = *core->committed;
    row.mode = core->scav.mode_used;
    row.thr_guarded = guarded.throughput;
    row.thr_competitor = competitor.throughput;
    row.loss_rate = guarded.loss_rate;
    result.rows.push_back(row);
  }
  engine.stop(Terminal::HarnessStop);
  result.engine_trace = engine.trace();

  for (const StepRecord& s : result.engine_trace.steps) {
    const EventLabel& l = s.triggered.label;
    if (proxy) {
      if (l == kUpdate) continue;  // superseded by the proxy event
      if (l == kReduce || l == kRestoreEv) {
        result.canonical_events.push_back({kUpdate, s.triggered.payload});
        continue;
      }
    }
    result.canonical_events.push_back(s.triggered);
  }
  return result;
}

void write_csv(const std::vector<PccRow>& rows, std::ostream& out) {
  out << "mi,dnn_rate,final_rate,mode,thr_guarded,thr_competitor,loss_rate\n";
  for (const PccRow& r : rows) {
    out << r.mi << ',' << format_double(r.dnn_rate) << ',' << format_double(r.final_rate) << ','
        << mode_name(r.mode) << ',' << format_double(r.thr_guarded) << ','
        << format_double(r.thr_competitor) << ',' << format_double(r.loss_rate) << '\n';
  }
}

namespace {

Signal parse_signal(const std::string& name) {
  if (name == "override_off") return Signal::OverrideOff;
  if (name == "enter_yield") return Signal::EnterYield;
  if (name == "enter_restore") return Signal::EnterRestore;
  throw FormatError("unknown signal: " + name);
}

}  // namespace

SimConfig parse_config(const nlohmann::json& j) {
  SimConfig cfg;
  try {
    if (j.contains("link")) {
      const auto& link = j.at("link");
      cfg.link.capacity = link.value("capacity", cfg.link.capacity);
      cfg.link.mi_duration = link.value("mi_duration", cfg.link.mi_duration);
      cfg.link.num_mis = link.value("num_mis", cfg.link.num_mis);
      if (link.contains("competitor")) {
        const auto& comp = link.at("competitor");
        cfg.link.competitor_schedule =
            comp.value("schedule", std::vector<std::pair<int, int>>{});
        cfg.link.competitor_start_rate = comp.value("start_rate", 1.0);
        cfg.link.competitor_min_rate = comp.value("min_rate", 0.1);
      }
    }
    if (j.contains("policy")) {
      const auto& pol = j.at("policy");
      std::string kind = pol.value("kind", "probe");
      if (kind == "network") {
        cfg.policy_network = pol.at("path").get<std::string>();
      } else if (kind == "probe") {
        cfg.policy.initial_rate = pol.value("initial_rate", cfg.policy.initial_rate);
        cfg.policy.probe = pol.value("probe", cfg.policy.probe);
        cfg.policy.backoff = pol.value("backoff", cfg.policy.backoff);
        cfg.policy.floor = pol.value("floor", cfg.policy.floor);
      } else {
        throw FormatError("unknown policy kind: " + kind);
      }
    }
    if (j.contains("detector")) {
      const auto& det = j.at("detector");
      std::string kind = det.value("kind", "none");
      if (kind == "none") {
        cfg.detector.kind = DetectorConfig::Kind::None;
      } else if (kind == "scripted") {
        cfg.detector.kind = DetectorConfig::Kind::Scripted;
        for (const auto& [key, value] : det.at("script").items()) {
          cfg.detector.script[std::stoi(key)] = parse_signal(value.get<std::string>());
        }
      } else if (kind == "loss_threshold") {
        cfg.detector.kind = DetectorConfig::Kind::LossThreshold;
        cfg.detector.theta_in = det.value("theta_in", cfg.detector.theta_in);
        cfg.detector.theta_out = det.value("theta_out", cfg.detector.theta_out);
        cfg.detector.consecutive = det.value("consecutive", cfg.detector.consecutive);
      } else {
        throw FormatError("unknown detector kind: " + kind);
      }
    }
    if (j.contains("yield")) {
      const auto& y = j.at("yield");
      std::string kind = y.value("kind", "fixed");
      if (kind == "fixed") {
        cfg.yield_policy.kind = YieldPolicy::Kind::Fixed;
        cfg.yield_policy.rate = y.value("rate", cfg.yield_policy.rate);
      } else if (kind == "step") {
        cfg.yield_policy.kind = YieldPolicy::Kind::Step;
        cfg.yield_policy.delta = y.value("delta", cfg.yield_policy.delta);
        cfg.yield_policy.floor = y.value("floor", cfg.yield_policy.floor);
      } else if (kind == "expdecay") {
        cfg.yield_policy.kind = YieldPolicy::Kind::ExpDecay;
        cfg.yield_policy.alpha = y.value("alpha", cfg.yield_policy.alpha);
        cfg.yield_policy.floor = y.value("floor", cfg.yield_policy.floor);
      } else {
        throw FormatError("unknown yield policy: " + kind);
      }
    }
    if (j.contains("restore")) {
      std::string kind = j.at("restore").value("kind", "slowstart");
      if (kind == "immediate") {
        cfg.restore_policy.kind = RestorePolicy::Kind::Immediate;
      } else if (kind == "slowstart") {
        cfg.restore_policy.kind = RestorePolicy::Kind::SlowStart;
      } else {
        throw FormatError("unknown restore policy: " + kind);
      }
    }
    std::string style = j.value("guard_style", "modifier");
    if (style == "modifier") {
      cfg.style = GuardStyle::Modifier;
    } else if (style == "proxy") {
      cfg.style = GuardStyle::Proxy;
    } else {
      throw FormatError("unknown guard style: " + style);
    }
    cfg.guard_enabled = j.value("guard", true);
    cfg.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad pcc config: ") + e.what());
  }
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  SimConfig cfg = parse_config(j);
  if (cfg.policy_network) {
    std::filesystem::path p(*cfg.policy_network);
    if (p.is_relative()) {
      cfg.policy_network = (std::filesystem::path(path).parent_path() / p).string();
    }
  }
  return cfg;
}

}  // namespace sbm::pcc
