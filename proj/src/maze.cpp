#include "sbm/maze.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sbm/engine.hpp"
#include "sbm/errors.hpp"
#include "sbm/model.hpp"
#include "sbm/nn.hpp"
#include "sbm/trace_io.hpp"

namespace sbm::maze {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
Vec2 sub(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

bool finite(const Vec2& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Parameter t along the ray (unit direction) to the segment hit, if any.
std::optional<double> ray_hit(const Vec2& origin, const Vec2& dir, const Segment& seg) {
  Vec2 edge = sub(seg.b, seg.a);
  double denom = cross(dir, edge);
  if (std::abs(denom) < 1e-12) return std::nullopt;  // parallel: grazing ignored
  Vec2 ao = sub(seg.a, origin);
  double t = cross(ao, edge) / denom;
  double u = cross(ao, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

double point_segment_distance(const Vec2& p, const Segment& seg) {
  Vec2 edge = sub(seg.b, seg.a);
  double len2 = dot(edge, edge);
  if (len2 == 0.0) return norm(sub(p, seg.a));
  double t = std::clamp(dot(sub(p, seg.a), edge) / len2, 0.0, 1.0);
  Vec2 proj{seg.a.x + t * edge.x, seg.a.y + t * edge.y};
  return norm(sub(p, proj));
}

bool segments_intersect(const Vec2& p, const Vec2& q, const Segment& seg) {
  Vec2 d = sub(q, p);
  Vec2 edge = sub(seg.b, seg.a);
  double denom = cross(d, edge);
  if (std::abs(denom) < 1e-12) return false;  // parallel: sliding ignored
  Vec2 ap = sub(seg.a, p);
  double t = cross(ap, edge) / denom;
  double u = cross(ap, d) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

}  // namespace

double Bounds::diagonal() const { return std::hypot(width(), height()); }

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

std::vector<double> cast_lidar(const World& world, const Pose& pose, int k, double fov,
                               double max_range) {
  if (k < 1) throw SbmError("cast_lidar: need at least one ray");
  if (!(fov > 0.0) || fov > 2.0 * kPi + 1e-12) throw SbmError("cast_lidar: fov out of range");
  if (!(max_range > 0.0)) throw SbmError("cast_lidar: max_range must be positive");
  std::vector<double> out;
  out.reserve(k);
  Vec2 origin{pose.x, pose.y};
  for (int i = 0; i < k; ++i) {
    double ang = k == 1 ? pose.heading
                        : pose.heading - fov / 2.0 + fov * static_cast<double>(i) / (k - 1);
    Vec2 dir{std::cos(ang), std::sin(ang)};
    double dist = max_range;
    for (const Segment& wall : world.walls) {
      if (auto t = ray_hit(origin, dir, wall); t && *t < dist) dist = *t;
    }
    out.push_back(std::max(dist, 1e-9));
  }
  return out;
}

double clearance(const World& world, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& wall : world.walls) {
    best = std::min(best, point_segment_distance(p, wall));
  }
  return best;
}

bool path_crosses_wall(const World& world, const Vec2& from, const Vec2& to) {
  return std::any_of(world.walls.begin(), world.walls.end(),
                     [&](const Segment& wall) { return segments_intersect(from, to, wall); });
}

const char* action_name(Action a) {
  switch (a) {
    case Action::Forward: return "Forward";
    case Action::Left: return "Left";
    case Action::Right: return "Right";
  }
  return "?";
}

std::optional<Action> action_from_name(const std::string& name) {
  if (name == "Forward") return Action::Forward;
  if (name == "Left") return Action::Left;
  if (name == "Right") return Action::Right;
  return std::nullopt;
}

Pose apply_action(const Pose& pose, Action a, double step_len, double turn_angle) {
  Pose next = pose;
  switch (a) {
    case Action::Forward:
      next.x += step_len * std::cos(pose.heading);
      next.y += step_len * std::sin(pose.heading);
      break;
    case Action::Left:
      next.heading = wrap_angle(pose.heading + turn_angle);
      break;
    case Action::Right:
      next.heading = wrap_angle(pose.heading - turn_angle);
      break;
  }
  return next;
}

std::vector<double> observe(const World& world, const Pose& pose, int k, double fov,
                            double max_range) {
  std::vector<double> v = cast_lidar(world, pose, k, fov, max_range);
  for (double& d : v) d /= max_range;
  Vec2 to_target = sub(world.target, Vec2{pose.x, pose.y});
  v.push_back(wrap_angle(std::atan2(to_target.y, to_target.x) - pose.heading));
  v.push_back(norm(to_target));
  return v;
}

double front_sector_min(const World& world, const Pose& pose) {
  std::vector<double> rays = cast_lidar(world, pose);
  return std::min({rays[2], rays[3], rays[4]});
}

namespace {

// Sector minima over the normalized lidar part of an observation; the ray
// layout (7 over the front half-plane) pins the indices.
struct Sectors {
  double right, front, left;
};

Sectors sector_minima(const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(kLidarRays) + 2) {
    throw PayloadError("observation must have " + std::to_string(kLidarRays + 2) + " entries");
  }
  return {std::min(v[0], v[1]), std::min({v[2], v[3], v[4]}), std::min(v[5], v[6])};
}

}  // namespace

guard::Policy heuristic_policy(double temperature) {
  if (!(temperature > 0.0)) throw FormatError("temperature must be positive");
  return [temperature](const std::vector<double>& v) {
    Sectors s = sector_minima(v);
    double bearing = v[kLidarRays];
    double score_f = s.front + 0.4 * std::cos(bearing);
    double score_l = s.left + 0.4 * (bearing / kPi);
    double score_r = s.right - 0.4 * (bearing / kPi);
    return nn::to_distribution(
        {score_f / temperature, score_l / temperature, score_r / temperature},
        {"Forward", "Left", "Right"});
  };
}

guard::Policy network_policy(nn::Network net) {
  const std::vector<std::string> expected{"Forward", "Left", "Right"};
  if (net.labels != expected) {
    throw FormatError("a maze policy network must label its outputs Forward, Left, Right");
  }
  if (net.input_dim != kLidarRays + 2) {
    throw FormatError("a maze policy network must take " + std::to_string(kLidarRays + 2) +
                      " inputs");
  }
  return [net = std::move(net)](const std::vector<double>& v) {
    return nn::to_distribution(nn::forward(net, v), net.labels);
  };
}

ScenarioObject obstacle_ahead_guard(double threshold_m, double max_range, EventLabel input_label,
                                    EventLabel output_label) {
  if (!(threshold_m > 0.0)) throw FormatError("guard threshold must be positive");
  ScenarioObject scenario(
      "override_obstacle_ahead", ScenarioState{},
      [input_label, output_label](const ScenarioState& s) {
        SyncStatement stmt;
        stmt.wait_for(match_label(input_label));
        if (s.node == 1) stmt.block(match_action(output_label, "Forward"));
        return stmt;
      },
      [threshold_m, max_range, input_label](const ScenarioState& s, const EventInstance& e) {
        if (e.label != input_label) return s;
        const auto* v = std::get_if<std::vector<double>>(&e.payload);
        if (!v) throw PayloadError(input_label + " must carry the observation vector");
        double front = sector_minima(*v).front * max_range;
        return ScenarioState{front < threshold_m ? 1 : 0};
      });
  LabelFootprint fp;
  fp.may_block.insert(output_label);
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

namespace {

std::optional<double> action_confidence(const EventInstance& e) {
  if (const auto* a = std::get_if<ActionValue>(&e.payload)) return a->confidence;
  return std::nullopt;
}

bool pattern_blocked(const EventInstance& e, const std::vector<EventPattern>& blocked) {
  return std::any_of(blocked.begin(), blocked.end(),
                     [&](const EventPattern& p) { return p.matches(e); });
}

// Halves tau until some qualifying entry exists.  `qualifies` must accept at
// least one positive-weight entry once the threshold is low enough,
// otherwise the ladder cannot terminate and we fail loudly.
double relax_threshold(double tau, const std::function<bool(double)>& any_qualifies) {
  double t = tau;
  for (int i = 0; i <= 200; ++i) {
    if (any_qualifies(t)) return t;
    t /= 2.0;
  }
  throw SbmError("confidence relaxation found no drawable event");
}

}  // namespace

EventInstance conservative_select(const EventInstance& candidate,
                                  const std::vector<RequestEntry>& requested,
                                  const std::vector<EventPattern>& blocked, double tau,
                                  RngStream& rng) {
  if (!(tau > 0.0) || !(tau <= 1.0)) throw SbmError("tau must lie in (0, 1]");
  std::optional<double> cand = action_confidence(candidate);
  if (!cand || *cand >= tau) return candidate;

  double relaxed = relax_threshold(tau, [&](double t) {
    return std::any_of(requested.begin(), requested.end(), [&](const RequestEntry& r) {
      std::optional<double> c = action_confidence(r.event);
      return r.weight > 0.0 && c && *c >= t && !pattern_blocked(r.event, blocked);
    });
  });

  // Rejection over the full positive-weight pool, with the same draw
  // arithmetic as weighted-redraw selection, so this consumes the stream
  // exactly like the replay construction (engine redraw + replay rejection).
  std::vector<const RequestEntry*> pool;
  double total = 0.0;
  for (const RequestEntry& r : requested) {
    if (r.weight > 0.0) {
      pool.push_back(&r);
      total += r.weight;
    }
  }
  if (pool.size() == 1) return pool.front()->event;  // sole candidate, no draw
  for (int spins = 0; spins < 1000000; ++spins) {
    double u = rng.uniform() * total;
    const RequestEntry* picked = pool.back();
    for (const RequestEntry* r : pool) {
      u -= r->weight;
      if (u < 0.0) {
        picked = r;
        break;
      }
    }
    std::optional<double> c = action_confidence(picked->event);
    if (c && *c >= relaxed && !pattern_blocked(picked->event, blocked)) return picked->event;
  }
  throw SbmError("conservative_select: redraw failed to converge");
}

ModifierScenario make_conservative_modifier(double tau, EventLabel output_label,
                                            std::shared_ptr<std::size_t> fires) {
  if (!(tau > 0.0) || !(tau <= 1.0)) throw SbmError("tau must lie in (0, 1]");
  return ModifierScenario(
      "conservative_action", ScenarioState{},
      [tau, output_label, fires](const ScenarioState&, const std::vector<RequestEntry>& requested,
                                 const std::vector<EventPattern>& blocked,
                                 const EventInstance& candidate, RngStream& rng) {
        if (candidate.label != output_label) return candidate;
        std::optional<double> c = action_confidence(candidate);
        if (!c || *c >= tau) return candidate;
        if (fires) ++*fires;
        return conservative_select(candidate, requested, blocked, tau, rng);
      },
      keep_state);
}

ScenarioObject make_conservative_proxy(double tau, guard::Policy policy,
                                       std::shared_ptr<std::size_t> fires,
                                       EventLabel input_label, EventLabel output_label,
                                       EventLabel proxy_label) {
  if (!(tau > 0.0) || !(tau <= 1.0)) throw SbmError("tau must lie in (0, 1]");
  // Nodes: 0 idle (memory = last input vector); 1 propagate (extra = accepted
  // action); 2 replay the input (extra = relaxed threshold); 3 await the
  // redrawn output (extra = relaxed threshold).
  ScenarioObject scenario(
      proxy_label == "OutputEventProxy" ? "conservative_action" : "conservative_action_" + proxy_label,
      ScenarioState{},
      [input_label, output_label, proxy_label](const ScenarioState& s) {
        SyncStatement stmt;
        switch (s.node) {
          case 0:
            stmt.wait_for(match_label(input_label));
            stmt.wait_for(match_label(output_label));
            break;
          case 1:
            stmt.request({proxy_label, s.extra});
            break;
          case 2:
            stmt.request({input_label, s.memory});
            break;
          default:
            stmt.wait_for(match_label(output_label));
            break;
        }
        return stmt;
      },
      [tau, policy, fires, input_label, output_label, proxy_label](const ScenarioState& s,
                                                                   const EventInstance& e) {
        if (s.node == 0 && e.label == input_label) return ScenarioState{0, e.payload};
        if ((s.node == 0 || s.node == 3) && e.label == output_label) {
          double threshold = s.node == 0 ? tau : std::get<double>(s.extra);
          std::optional<double> c = action_confidence(e);
          if (!c) throw PayloadError(output_label + " must carry an action");
          if (*c >= threshold) return ScenarioState{1, s.memory, e.payload};
          if (s.node == 0) {
            // First rejection of the cycle: fix the relaxed threshold from
            // the policy's own distribution (nothing blocked here).
            if (fires) ++*fires;
            const auto* v = std::get_if<std::vector<double>>(&s.memory);
            if (!v) throw SbmError("conservative replay saw no input to re-issue");
            auto dist = policy(*v);
            double relaxed = relax_threshold(tau, [&](double t) {
              return std::any_of(dist.begin(), dist.end(),
                                 [&](const auto& ap) { return ap.second > 0.0 && ap.second >= t; });
            });
            return ScenarioState{2, s.memory, relaxed};
          }
          return ScenarioState{2, s.memory, s.extra};
        }
        if (s.node == 2 && e.label == input_label) return ScenarioState{3, s.memory, s.extra};
        if (s.node == 1 && e.label == proxy_label) return ScenarioState{0, s.memory};
        return s;
      });
  LabelFootprint fp;
  fp.may_request.insert(proxy_label);
  fp.may_request.insert(input_label);
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Collision: return "collision";
    case Outcome::Timeout: return "timeout";
    case Outcome::UnknownFailure: return "unknown_failure";
  }
  return "?";
}

EpisodeOutput episode(const World& world, const guard::Policy& policy, const GuardSetup& guards,
                      const EpisodeConfig& cfg) {
  if (cfg.max_steps < 0) throw SbmError("max_steps must be non-negative");
  if (clearance(world, {cfg.start.x, cfg.start.y}) < kCollisionThreshold ||
      !world.bounds.contains({cfg.start.x, cfg.start.y})) {
    throw SbmError("start pose is not collision-free");
  }

  const EventLabel in = "InputEvent";
  const EventLabel out = "OutputEvent";
  const EventLabel proxy_label = "OutputEventProxy";
  const bool proxy = guards.conservative == ConservativeStyle::Proxy;
  const EventLabel actuated = proxy ? proxy_label : out;

  struct Core {
    Pose pose;
    bool acted = false;
    std::string action;
  };
  auto core = std::make_shared<Core>();
  core->pose = cfg.start;
  auto fires = std::make_shared<std::size_t>(0);

  Model model;
  model.declare_label(in, PayloadKind::RealVector).declare_label(out, PayloadKind::Action);
  if (proxy) model.declare_label(proxy_label, PayloadKind::Action);
  model.forbid_blocking(in);
  model.reserve_requests(out, "policy_head");

  guard::Feed feed = [core, &world]() {
    return std::vector<EventInstance>{{"InputEvent", observe(world, core->pose)}};
  };
  model.add_scenario(guard::make_sensor("lidar_sensor", feed, {match_label(actuated)}));
  model.add_scenario(
      guard::make_distribution_odnn("policy_head", policy, in, out, {"Forward", "Left", "Right"}));
  if (guards.obstacle_guard) {
    model.add_scenario(obstacle_ahead_guard(guards.obstacle_threshold, kLidarMaxRange, in, out));
  }
  if (proxy) {
    model.add_scenario(
        make_conservative_proxy(guards.tau, policy, fires, in, out, proxy_label));
  }
  guard::Sink sink = [core](const EventInstance& e) {
    core->acted = true;
    core->action = std::get<ActionValue>(e.payload).name;
  };
  model.add_scenario(guard::make_actuator("motion_actuator", sink, {match_label(actuated)}));
  if (guards.conservative == ConservativeStyle::Modifier) {
    model.add_modifier(make_conservative_modifier(guards.tau, out, fires));
  }

  Engine engine(std::move(model), SelectionStrategy::WeightedRedraw, cfg.seed);

  EpisodeOutput output;
  output.path.push_back(cfg.start);
  auto target_distance = [&world](const Pose& p) {
    return norm(sub(world.target, Vec2{p.x, p.y}));
  };

  Outcome outcome = Outcome::Timeout;
  int steps = 0;
  if (target_distance(cfg.start) < world.goal_radius) {
    outcome = Outcome::Success;
  } else {
    try {
      while (steps < cfg.max_steps) {
        core->acted = false;
        bool dead = false;
        int spins = 0;
        while (!core->acted && !dead) {
          if (++spins > 1000000) throw SbmError("maze cycle failed to reach the actuator");
          if (!engine.step()) dead = true;
        }
        if (dead) {
          outcome = Outcome::UnknownFailure;
          break;
        }
        Action act = *action_from_name(core->action);
        Pose before = core->pose;
        Pose after = apply_action(before, act);
        bool collided = false;
        if (act == Action::Forward) {
          collided = front_sector_min(world, before) < kCollisionThreshold ||
                     path_crosses_wall(world, {before.x, before.y}, {after.x, after.y});
        }
        core->pose = after;
        output.path.push_back(after);
        ++steps;
        if (collided) {
          outcome = Outcome::Collision;
          break;
        }
        if (target_distance(after) < world.goal_radius) {
          outcome = Outcome::Success;
          break;
        }
      }
    } catch (const PayloadError&) {
      outcome = Outcome::UnknownFailure;  // bad policy distribution
    }
  }
  engine.stop(Terminal::HarnessStop);
  output.trace = engine.trace();

  int blocked_engagements = 0;
  for (const StepRecord& s : output.trace.steps) {
    if (s.triggered.label == actuated && !s.blocked.empty()) ++blocked_engagements;
  }
  output.result.outcome = outcome;
  output.result.steps = steps;
  output.result.overrides_fired = static_cast<int>(*fires) + blocked_engagements;

  for (const StepRecord& s : output.trace.steps) {
    const EventInstance& e = s.triggered;
    if (proxy) {
      if (e.label == out) continue;  // rejected draw, superseded
      if (e.label == proxy_label) {
        output.canonical.push_back({out, e.payload});
        continue;
      }
      if (e.label == in && !output.canonical.empty() && output.canonical.back() == e) {
        continue;  // replayed input
      }
    }
    output.canonical.push_back(e);
  }
  return output;
}

Pose sample_start(const World& world, RngStream& rng, double min_clearance) {
  for (int i = 0; i < 100000; ++i) {
    Vec2 p{world.bounds.xmin + rng.uniform() * world.bounds.width(),
           world.bounds.ymin + rng.uniform() * world.bounds.height()};
    if (clearance(world, p) < min_clearance) continue;
    double heading = wrap_angle(-kPi + rng.uniform() * 2.0 * kPi);
    return {p.x, p.y, heading};
  }
  throw SbmError("could not sample a collision-free start pose");
}

Metrics aggregate_metrics(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw SbmError("no episodes to aggregate");
  Metrics m;
  double step_sum = 0.0;
  for (const EpisodeResult& r : results) {
    switch (r.outcome) {
      case Outcome::Success:
        ++m.num_of_solved;
        step_sum += r.steps;
        break;
      case Outcome::Collision: ++m.num_of_collision; break;
      case Outcome::Timeout: ++m.num_of_timeout; break;
      case Outcome::UnknownFailure: ++m.num_of_unknown; break;
    }
  }
  if (m.num_of_solved > 0) m.avg_num_of_steps = step_sum / m.num_of_solved;
  return m;
}

std::vector<BatchRow> run_batch(const World& world, const guard::Policy& policy,
                                const GuardSetup& guards, const BatchConfig& cfg) {
  if (cfg.episodes < 0) throw SbmError("episodes must be non-negative");
  RngStream master(cfg.seed);
  std::vector<BatchRow> rows;
  rows.reserve(cfg.episodes);
  for (int i = 0; i < cfg.episodes; ++i) {
    std::uint64_t start_seed = master.next_u64();
    std::uint64_t engine_seed = master.next_u64();
    RngStream start_rng(start_seed);
    EpisodeConfig ec;
    ec.start = sample_start(world, start_rng);
    ec.max_steps = cfg.max_steps;
    ec.seed = engine_seed;
    EpisodeOutput out = episode(world, policy, guards, ec);
    rows.push_back({i, out.result, engine_seed});
  }
  return rows;
}

void write_csv(const std::vector<BatchRow>& rows, std::ostream& out) {
  out << "episode,outcome,steps,overrides_fired,seed\n";
  for (const BatchRow& r : rows) {
    out << r.episode << ',' << outcome_name(r.result.outcome) << ',' << r.result.steps << ','
        << r.result.overrides_fired << ',' << r.seed << '\n';
  }
}

guard::Policy build_policy(const PolicySpec& spec) {
  if (spec.network_path) return network_policy(nn::load_network(*spec.network_path));
  return heuristic_policy(spec.temperature);
}

namespace {

Vec2 parse_vec(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw FormatError(std::string(what) + " must be [x, y]");
  Vec2 v{j[0].get<double>(), j[1].get<double>()};
  if (!finite(v)) throw FormatError(std::string(what) + " must be finite");
  return v;
}

}  // namespace

World parse_world(const nlohmann::json& j) {
  World w;
  try {
    const auto& b = j.at("bounds");
    if (!b.is_array() || b.size() != 4) throw FormatError("bounds must be [x0, y0, x1, y1]");
    w.bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (!std::isfinite(w.bounds.xmin) || !std::isfinite(w.bounds.ymin) ||
        !std::isfinite(w.bounds.xmax) || !std::isfinite(w.bounds.ymax) ||
        w.bounds.width() <= 0.0 || w.bounds.height() <= 0.0) {
      throw FormatError("bounds must span a positive area");
    }
    for (const auto& seg : j.value("walls", nlohmann::json::array())) {
      if (!seg.is_array() || seg.size() != 4) {
        throw FormatError("each wall must be [ax, ay, bx, by]");
      }
      Segment s{{seg[0].get<double>(), seg[1].get<double>()},
                {seg[2].get<double>(), seg[3].get<double>()}};
      if (!finite(s.a) || !finite(s.b)) throw FormatError("wall endpoints must be finite");
      w.walls.push_back(s);
    }
    w.target = parse_vec(j.at("target"), "target");
    w.goal_radius = j.value("goal_radius", 0.3);
    if (!(w.goal_radius > 0.0) || !std::isfinite(w.goal_radius)) {
      throw FormatError("goal_radius must be positive");
    }
    if (!w.bounds.contains(w.target)) throw FormatError("target must lie inside the bounds");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad world: ") + e.what());
  }
  const Bounds& b = w.bounds;
  w.walls.push_back({{b.xmin, b.ymin}, {b.xmax, b.ymin}});
  w.walls.push_back({{b.xmax, b.ymin}, {b.xmax, b.ymax}});
  w.walls.push_back({{b.xmax, b.ymax}, {b.xmin, b.ymax}});
  w.walls.push_back({{b.xmin, b.ymax}, {b.xmin, b.ymin}});
  return w;
}

World load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open world: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return parse_world(j);
}

MazeConfig parse_config(const nlohmann::json& j, const std::string& base_dir) {
  MazeConfig cfg;
  auto resolve = [&base_dir](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) {
      return (std::filesystem::path(base_dir) / path).string();
    }
    return p;
  };
  try {
    const auto& world = j.at("world");
    if (world.is_string()) {
      cfg.world = load_world(resolve(world.get<std::string>()));
    } else {
      cfg.world = parse_world(world);
    }
    if (j.contains("policy")) {
      const auto& pol = j.at("policy");
      std::string kind = pol.value("kind", "heuristic");
      if (kind == "network") {
        cfg.policy.network_path = resolve(pol.at("path").get<std::string>());
      } else if (kind == "heuristic") {
        cfg.policy.temperature = pol.value("temperature", cfg.policy.temperature);
      } else {
        throw FormatError("unknown policy kind: " + kind);
      }
    }
    if (j.contains("guards")) {
      const auto& g = j.at("guards");
      cfg.guards.obstacle_guard = g.value("obstacle", false);
      cfg.guards.obstacle_threshold = g.value("threshold", kCollisionThreshold);
      cfg.guards.tau = g.value("tau", 0.35);
      std::string style = g.value("conservative", "off");
      if (style == "off") {
        cfg.guards.conservative = ConservativeStyle::Off;
      } else if (style == "modifier") {
        cfg.guards.conservative = ConservativeStyle::Modifier;
      } else if (style == "proxy") {
        cfg.guards.conservative = ConservativeStyle::Proxy;
      } else {
        throw FormatError("unknown conservative style: " + style);
      }
    }
    cfg.batch.episodes = j.value("episodes", cfg.batch.episodes);
    cfg.batch.max_steps = j.value("max_steps", cfg.batch.max_steps);
    cfg.batch.seed = j.value("seed", cfg.batch.seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad maze config: ") + e.what());
  }
  return cfg;
}

MazeConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace sbm::maze
