#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sbm/engine.hpp"
#include "sbm/enumerate.hpp"
#include "sbm/errors.hpp"
#include "sbm/guard.hpp"
#include "sbm/maze.hpp"
#include "sbm/nn.hpp"
#include "sbm/pcc.hpp"
#include "sbm/trace_io.hpp"

#ifndef SBM_CONFIG_DIR
#define SBM_CONFIG_DIR "."
#endif

namespace {

// The two-layer network used by the demo walkthrough (also shipped as
// fixtures/demo_net.json).
const char* kDemoNet = R"({
  "input_dim": 2,
  "labels": ["y1", "y2"],
  "layers": [
    {"weights": [[1, -1], [2, 0], [0, 3]], "biases": [0, 0, 0], "activation": "relu"},
    {"weights": [[-2, 1, 0], [0, 1, 1]], "biases": [0, 0], "activation": "linear"}
  ]
})";

bool guard_log_enabled() {
  const char* v = std::getenv("SBM_GUARD_LOG");
  return v != nullptr && *v != '\0';
}

void log_trace(const sbm::Trace& trace, const std::string& tag) {
  if (!guard_log_enabled()) return;
  for (const sbm::StepRecord& s : trace.steps) {
    std::cerr << tag << " step " << s.index << ": " << s.triggered.label
              << (s.modifier_fired ? " [modified]" : "")
              << (s.blocked.empty() ? "" : " [" + std::to_string(s.blocked.size()) + " blocked]")
              << '\n';
  }
}

std::filesystem::path output_path(const std::string& out_dir, const std::string& sub,
                                  std::uint64_t seed, const char* ext) {
  return std::filesystem::path(out_dir) / (sub + "-" + std::to_string(seed) + ext);
}

std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw sbm::SbmError("cannot write " + p.string());
  return out;
}

std::string joined(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += sbm::format_double(v[i]);
  }
  return s + ")";
}

// --------------------------------------------------------------------------
// demo

std::string run_head_once(const sbm::nn::Network& net, const std::vector<double>& input,
                          bool with_blocking_rule, bool with_modifier_rule) {
  auto remaining = std::make_shared<int>(1);
  sbm::guard::Feed feed = [remaining, input]() {
    if (*remaining == 0) return std::vector<sbm::EventInstance>{};
    --*remaining;
    return std::vector<sbm::EventInstance>{{"InputEvent", input}};
  };
  auto triggered = std::make_shared<std::string>();
  sbm::guard::Sink sink = [triggered](const sbm::EventInstance& e) { *triggered = e.label; };

  std::vector<sbm::EventLabel> outputs = net.labels;
  sbm::guard::GuardedModel gm("InputEvent", outputs);
  gm.sensor(sbm::guard::make_sensor("sensor", feed, {}));
  gm.head(sbm::guard::make_odnn("net_head", net, "InputEvent", outputs));
  std::vector<sbm::EventPattern> actuated;
  for (const sbm::EventLabel& l : outputs) actuated.push_back(sbm::match_label(l));
  gm.actuator(sbm::guard::make_actuator("actuator", sink, actuated));
  if (with_blocking_rule) {
    sbm::guard::BlockingRule rule;
    rule.precondition = [](const std::vector<double>& x) { return x[0] > x[1]; };
    rule.alpha = "y1";
    gm.add_guard(sbm::guard::compile_blocking_rule("prefer_y1", rule, "InputEvent", outputs));
  }
  if (with_modifier_rule) {
    sbm::guard::ModifierRule rule;
    rule.precondition = [](const std::vector<double>& x) { return x[0] > x[1]; };
    rule.condition = [](const sbm::Payload& p) {
      const auto* scores = std::get_if<std::vector<double>>(&p);
      return scores != nullptr && scores->size() > 1 && (*scores)[1] > 1.0;
    };
    rule.rewrite = sbm::guard::rewrite_to_label("y1");
    gm.add_guard(sbm::guard::compile_modifier_rule("rewrite_to_y1", rule, "InputEvent", outputs));
  }
  sbm::Engine engine(gm.build(), sbm::SelectionStrategy::DeterministicPriority, 0);
  sbm::Trace trace = engine.run(8);
  log_trace(trace, "demo");
  return *triggered;
}

int run_demo() {
  sbm::nn::Network net = sbm::nn::parse_network(nlohmann::json::parse(kDemoNet));
  auto layers_10 = sbm::nn::forward_layers(net, {1.0, 0.0});
  auto out_01 = sbm::nn::forward(net, {0.0, 1.0});
  std::cout << "forward (1,0): hidden " << joined(layers_10[0]) << ", output "
            << joined(layers_10[1]) << '\n';
  std::cout << "forward (0,1): output " << joined(out_01) << '\n';

  std::string unguarded = run_head_once(net, {1.0, 0.0}, false, false);
  std::string guarded = run_head_once(net, {1.0, 0.0}, true, false);
  std::cout << "input (1,0): unguarded " << unguarded << ", guarded " << guarded << '\n';

  std::string modified = run_head_once(net, {1.0, 0.0}, false, true);
  std::string untouched = run_head_once(net, {0.0, 1.0}, false, true);
  std::cout << "modifier rule (x1>x2, y2-score>1 -> y1): input (1,0) now triggers " << modified
            << ", input (0,1) still triggers " << untouched << '\n';
  return 0;
}

// --------------------------------------------------------------------------
// pcc

struct CommonOpts {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> guard;        // registry name(s)
  std::optional<std::string> guard_style;  // proxy | modifier
  std::optional<std::string> policy;
  std::optional<std::string> yield;
  std::optional<std::string> restore;
  std::optional<int> episodes;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw sbm::FormatError(what + ": not a number: " + s);
  }
}

sbm::pcc::YieldPolicy parse_yield_flag(const std::string& s) {
  sbm::pcc::YieldPolicy y;
  auto head_tail = split(s, ':');
  const std::string& kind = head_tail[0];
  std::vector<std::string> args =
      head_tail.size() > 1 ? split(head_tail[1], ',') : std::vector<std::string>{};
  if (kind == "fixed" && args.size() == 1) {
    y.kind = sbm::pcc::YieldPolicy::Kind::Fixed;
    y.rate = parse_real(args[0], "--yield fixed");
  } else if (kind == "step" && args.size() == 2) {
    y.kind = sbm::pcc::YieldPolicy::Kind::Step;
    y.delta = parse_real(args[0], "--yield step");
    y.floor = parse_real(args[1], "--yield step");
  } else if (kind == "expdecay" && args.size() == 2) {
    y.kind = sbm::pcc::YieldPolicy::Kind::ExpDecay;
    y.alpha = parse_real(args[0], "--yield expdecay");
    y.floor = parse_real(args[1], "--yield expdecay");
  } else {
    throw sbm::FormatError("--yield expects fixed:R, step:D,F or expdecay:A,F");
  }
  return y;
}

sbm::pcc::RestorePolicy parse_restore_flag(const std::string& s) {
  sbm::pcc::RestorePolicy r;
  if (s == "immediate") {
    r.kind = sbm::pcc::RestorePolicy::Kind::Immediate;
  } else if (s == "slowstart") {
    r.kind = sbm::pcc::RestorePolicy::Kind::SlowStart;
  } else {
    throw sbm::FormatError("--restore expects immediate or slowstart");
  }
  return r;
}

int run_pcc(const CommonOpts& opts) {
  std::string path =
      opts.config.empty() ? std::string(SBM_CONFIG_DIR) + "/pcc_scripted.json" : opts.config;
  sbm::pcc::SimConfig cfg = sbm::pcc::load_config(path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.guard) {
    if (*opts.guard == "none") {
      cfg.guard_enabled = false;
    } else if (*opts.guard == "scavenger") {
      cfg.guard_enabled = true;
    } else {
      throw sbm::FormatError("pcc guards: none or scavenger, got " + *opts.guard);
    }
  }
  if (opts.guard_style) {
    if (*opts.guard_style == "proxy") {
      cfg.style = sbm::pcc::GuardStyle::Proxy;
    } else if (*opts.guard_style == "modifier") {
      cfg.style = sbm::pcc::GuardStyle::Modifier;
    } else {
      throw sbm::FormatError("--guard-style expects proxy or modifier");
    }
  }
  if (opts.policy) cfg.policy_network = *opts.policy;
  if (opts.yield) cfg.yield_policy = parse_yield_flag(*opts.yield);
  if (opts.restore) cfg.restore_policy = parse_restore_flag(*opts.restore);

  sbm::pcc::PccResult res = sbm::pcc::simulate(cfg);

  auto csv_path = output_path(opts.out_dir, "pcc", cfg.seed, ".csv");
  auto jsonl_path = output_path(opts.out_dir, "pcc", cfg.seed, ".jsonl");
  {
    auto out = open_output(csv_path);
    sbm::pcc::write_csv(res.rows, out);
  }
  {
    auto out = open_output(jsonl_path);
    sbm::write_trace_jsonl(res.engine_trace, out);
  }

  int n_off = 0, n_yield = 0, n_restore = 0;
  double thr_g = 0.0, thr_c = 0.0;
  for (const sbm::pcc::PccRow& r : res.rows) {
    switch (r.mode) {
      case sbm::pcc::ThroughputMode::OverrideOff: ++n_off; break;
      case sbm::pcc::ThroughputMode::Yield: ++n_yield; break;
      case sbm::pcc::ThroughputMode::Restore: ++n_restore; break;
    }
    thr_g += r.thr_guarded;
    thr_c += r.thr_competitor;
    if (guard_log_enabled()) {
      std::cerr << "pcc mi=" << r.mi << " mode=" << sbm::pcc::mode_name(r.mode)
                << " dnn=" << sbm::format_double(r.dnn_rate)
                << " final=" << sbm::format_double(r.final_rate) << '\n';
    }
  }
  std::size_t n = res.rows.empty() ? 1 : res.rows.size();
  std::cout << "pcc: " << res.rows.size() << " monitor intervals, modes off/yield/restore = "
            << n_off << "/" << n_yield << "/" << n_restore
            << ", mean throughput guarded " << sbm::format_double(thr_g / n) << " competitor "
            << sbm::format_double(thr_c / n) << '\n';
  std::cout << "wrote " << csv_path.string() << " and " << jsonl_path.string() << '\n';
  return 0;
}

// --------------------------------------------------------------------------
// maze

int run_maze(const CommonOpts& opts) {
  std::string path =
      opts.config.empty() ? std::string(SBM_CONFIG_DIR) + "/maze_default.json" : opts.config;
  sbm::maze::MazeConfig cfg = sbm::maze::load_config(path);
  if (opts.seed) cfg.batch.seed = *opts.seed;
  if (opts.episodes) cfg.batch.episodes = *opts.episodes;
  if (opts.guard) {
    cfg.guards.obstacle_guard = false;
    cfg.guards.conservative = sbm::maze::ConservativeStyle::Off;
    for (const std::string& name : split(*opts.guard, ',')) {
      if (name == "none") {
        continue;
      } else if (name == "obstacle_ahead") {
        cfg.guards.obstacle_guard = true;
      } else if (name == "conservative") {
        cfg.guards.conservative = sbm::maze::ConservativeStyle::Modifier;
      } else {
        throw sbm::FormatError("maze guards: none, obstacle_ahead or conservative, got " + name);
      }
    }
  }
  if (opts.guard_style && cfg.guards.conservative != sbm::maze::ConservativeStyle::Off) {
    if (*opts.guard_style == "proxy") {
      cfg.guards.conservative = sbm::maze::ConservativeStyle::Proxy;
    } else if (*opts.guard_style == "modifier") {
      cfg.guards.conservative = sbm::maze::ConservativeStyle::Modifier;
    } else {
      throw sbm::FormatError("--guard-style expects proxy or modifier");
    }
  }
  if (opts.policy) {
    if (opts.policy->rfind("heuristic:", 0) == 0) {
      cfg.policy.network_path.reset();
      cfg.policy.temperature = parse_real(opts.policy->substr(10), "--policy heuristic");
    } else {
      cfg.policy.network_path = *opts.policy;
    }
  }

  sbm::guard::Policy policy = sbm::maze::build_policy(cfg.policy);
  std::vector<sbm::maze::BatchRow> rows =
      sbm::maze::run_batch(cfg.world, policy, cfg.guards, cfg.batch);
  std::vector<sbm::maze::EpisodeResult> results;
  results.reserve(rows.size());
  for (const auto& r : rows) results.push_back(r.result);
  sbm::maze::Metrics m = sbm::maze::aggregate_metrics(results);

  auto csv_path = output_path(opts.out_dir, "maze", cfg.batch.seed, ".csv");
  auto jsonl_path = output_path(opts.out_dir, "maze", cfg.batch.seed, ".jsonl");
  {
    auto out = open_output(csv_path);
    sbm::maze::write_csv(rows, out);
  }
  {
    auto out = open_output(jsonl_path);
    for (const sbm::maze::BatchRow& r : rows) {
      nlohmann::json line{{"episode", r.episode},
                          {"outcome", sbm::maze::outcome_name(r.result.outcome)},
                          {"steps", r.result.steps},
                          {"overrides_fired", r.result.overrides_fired},
                          {"seed", r.seed}};
      out << line.dump() << '\n';
      if (guard_log_enabled()) {
        std::cerr << "maze episode " << r.episode << ": "
                  << sbm::maze::outcome_name(r.result.outcome) << " steps=" << r.result.steps
                  << " overrides=" << r.result.overrides_fired << '\n';
      }
    }
    nlohmann::json metrics{{"num_of_solved", m.num_of_solved},
                           {"num_of_collision", m.num_of_collision},
                           {"num_of_timeout", m.num_of_timeout},
                           {"num_of_unknown", m.num_of_unknown}};
    if (m.avg_num_of_steps) metrics["avg_num_of_steps"] = *m.avg_num_of_steps;
    out << nlohmann::json{{"metrics", metrics}}.dump() << '\n';
  }

  std::cout << "maze: episodes=" << rows.size() << " solved=" << m.num_of_solved
            << " collision=" << m.num_of_collision << " timeout=" << m.num_of_timeout
            << " unknown=" << m.num_of_unknown << " avg_steps="
            << (m.avg_num_of_steps ? sbm::format_double(*m.avg_num_of_steps) : std::string("n/a"))
            << '\n';
  std::cout << "wrote " << csv_path.string() << " and " << jsonl_path.string() << '\n';
  return 0;
}

// --------------------------------------------------------------------------
// enumerate

// Bundled exploration model: one hot burst must come first, then two more
// hots interleave with three colds.
sbm::Model bundled_model() {
  auto burst = [](std::string id, sbm::EventLabel label, int times) {
    return sbm::ScenarioObject(
        std::move(id), sbm::ScenarioState{},
        [label, times](const sbm::ScenarioState& s) {
          sbm::SyncStatement stmt;
          if (s.node < times) stmt.request({label, std::monostate{}});
          return stmt;
        },
        [label, times](const sbm::ScenarioState& s, const sbm::EventInstance& e) {
          if (s.node < times && e.label == label) return sbm::ScenarioState{s.node + 1};
          return s;
        });
  };
  sbm::Model model;
  model.declare_label("hot", sbm::PayloadKind::Empty)
      .declare_label("cold", sbm::PayloadKind::Empty);
  model.add_scenario(burst("three_hots", "hot", 3));
  model.add_scenario(burst("three_colds", "cold", 3));
  model.add_scenario(sbm::ScenarioObject(
      "hot_first", sbm::ScenarioState{},
      [](const sbm::ScenarioState& s) {
        sbm::SyncStatement stmt;
        if (s.node == 0) {
          stmt.block(sbm::match_label("cold"));
          stmt.wait_for(sbm::match_label("hot"));
        }
        return stmt;
      },
      [](const sbm::ScenarioState& s, const sbm::EventInstance& e) {
        if (s.node == 0 && e.label == "hot") return sbm::ScenarioState{1};
        return s;
      }));
  return model;
}

int run_enumerate(const CommonOpts& opts) {
  std::size_t depth = 6;
  if (!opts.config.empty()) {
    std::ifstream in(opts.config);
    if (!in) throw sbm::FormatError("cannot open config: " + opts.config);
    nlohmann::json j;
    try {
      in >> j;
      depth = j.value("depth", 6);
    } catch (const nlohmann::json::exception& e) {
      throw sbm::FormatError(opts.config + ": " + e.what());
    }
  }
  std::uint64_t seed = opts.seed.value_or(0);
  auto runs = sbm::enumerate_runs(bundled_model(), depth);
  auto dp = sbm::deterministic_priority_path(bundled_model(), depth);

  auto jsonl_path = output_path(opts.out_dir, "enumerate", seed, ".jsonl");
  {
    auto out = open_output(jsonl_path);
    out << nlohmann::json{{"deterministic_priority", dp}}.dump() << '\n';
    for (const auto& run : runs) {
      out << nlohmann::json{{"run", run}}.dump() << '\n';
    }
  }
  std::cout << "enumerate: " << runs.size() << " runs at depth " << depth << '\n';
  std::cout << "wrote " << jsonl_path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenario-guarded controllers: demos, congestion and maze harnesses"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto add_common = [&](CLI::App* sub, bool with_sim_flags) {
    sub->add_option("--config", opts.config, "run configuration (JSON)");
    sub->add_option("--out", opts.out_dir, "output directory (default .)");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { opts.seed = v; }, "64-bit seed override");
    if (with_sim_flags) {
      sub->add_option_function<std::string>(
          "--guard", [&](const std::string& v) { opts.guard = v; },
          "guard registry names, comma separated");
      sub->add_option_function<std::string>(
          "--guard-style", [&](const std::string& v) { opts.guard_style = v; },
          "proxy | modifier");
      sub->add_option_function<std::string>(
          "--policy", [&](const std::string& v) { opts.policy = v; },
          "network path or heuristic:TEMP");
    }
  };

  CLI::App* demo = app.add_subcommand("demo", "tiny network walkthrough with guard flips");
  CLI::App* pcc = app.add_subcommand("pcc", "congestion-control harness");
  add_common(pcc, true);
  pcc->add_option_function<std::string>(
      "--yield", [&](const std::string& v) { opts.yield = v; },
      "fixed:R | step:D,F | expdecay:A,F");
  pcc->add_option_function<std::string>(
      "--restore", [&](const std::string& v) { opts.restore = v; },
      "immediate | slowstart");
  CLI::App* maze = app.add_subcommand("maze", "lidar maze navigation harness");
  add_common(maze, true);
  maze->add_option_function<int>(
      "--episodes", [&](int v) { opts.episodes = v; }, "number of episodes");
  CLI::App* enumerate = app.add_subcommand("enumerate", "bounded run enumeration oracle");
  add_common(enumerate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(demo)) return run_demo();
    if (app.got_subcommand(pcc)) return run_pcc(opts);
    if (app.got_subcommand(maze)) return run_maze(opts);
    if (app.got_subcommand(enumerate)) return run_enumerate(opts);
  } catch (const sbm::FormatError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const sbm::SbmError& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
