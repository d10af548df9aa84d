#pragma once

#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sbm/event.hpp"
#include "sbm/guard.hpp"
#include "sbm/rng.hpp"
#include "sbm/scenario.hpp"
#include "sbm/trace.hpp"

namespace sbm::maze {

// ---------------------------------------------------------------------------
// Geometry

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct Bounds {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double diagonal() const;
  bool contains(const Vec2& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
};

// Walls include the four bounds edges; the loader appends them, JSON lists
// interior walls only.
struct World {
  Bounds bounds;
  std::vector<Segment> walls;
  Vec2 target;
  double goal_radius = 0.3;
};

World parse_world(const nlohmann::json& j);
World load_world(const std::string& path);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians in (-pi, pi]
};

// ---------------------------------------------------------------------------
// Sensing and kinematics

inline constexpr int kLidarRays = 7;
inline constexpr double kLidarFov = std::numbers::pi;  // forward half-plane
inline constexpr double kLidarMaxRange = 3.5;
inline constexpr double kStepLength = 0.2;
inline constexpr double kTurnAngle = std::numbers::pi / 6.0;  // 30 degrees
inline constexpr double kCollisionThreshold = 0.22;

// Normalizes to (-pi, pi].
double wrap_angle(double a);

// Ray distances in meters, clamped to max_range.  Ray 0 points to
// heading - fov/2 (the robot's right), the last ray to heading + fov/2.
std::vector<double> cast_lidar(const World& world, const Pose& pose, int k = kLidarRays,
                               double fov = kLidarFov, double max_range = kLidarMaxRange);

// Distance from p to the nearest wall.
double clearance(const World& world, const Vec2& p);

// Whether the open segment from..to touches any wall.
bool path_crosses_wall(const World& world, const Vec2& from, const Vec2& to);

enum class Action { Forward, Left, Right };

const char* action_name(Action a);
std::optional<Action> action_from_name(const std::string& name);

// Forward translates step_len along the heading; turns rotate in place.
Pose apply_action(const Pose& pose, Action a, double step_len = kStepLength,
                  double turn_angle = kTurnAngle);

// v_t = [k lidar readings normalized by max_range, bearing to target in
// radians (0 = dead ahead, positive = left), distance to target in meters].
std::vector<double> observe(const World& world, const Pose& pose, int k = kLidarRays,
                            double fov = kLidarFov, double max_range = kLidarMaxRange);

// Minimum of the central three rays, in meters — the guard's view of
// "straight ahead".
double front_sector_min(const World& world, const Pose& pose);

// ---------------------------------------------------------------------------
// Policies

// Scores each action by the normalized clearance of its sector plus an
// alignment bonus toward the target, then applies softmax(score /
// temperature).  Low temperature sharpens toward the best action, high
// temperature approaches uniform.
guard::Policy heuristic_policy(double temperature);

// Wraps a 9-input network with output labels Forward/Left/Right; the output
// scores go through a softmax.
guard::Policy network_policy(nn::Network net);

// ---------------------------------------------------------------------------
// Override rules

// Watches InputEvent; while the front sector (de-normalized) is closer than
// threshold_m, blocks OutputEvent(Forward) so the selection falls to a turn.
ScenarioObject obstacle_ahead_guard(double threshold_m = kCollisionThreshold,
                                    double max_range = kLidarMaxRange,
                                    EventLabel input_label = "InputEvent",
                                    EventLabel output_label = "OutputEvent");

// Confidence-threshold redraw.  A candidate at or above tau passes
// unchanged.  Otherwise tau is halved until some enabled positive-weight
// action qualifies, and the result is a weighted draw over the qualifying
// actions (implemented as rejection over the full pool so the consumed
// randomness matches the replay-style construction draw for draw).
EventInstance conservative_select(const EventInstance& candidate,
                                  const std::vector<RequestEntry>& requested,
                                  const std::vector<EventPattern>& blocked, double tau,
                                  RngStream& rng);

// conservative_select packaged as a modifier stage.  `fires` (optional)
// counts the cycles where the candidate was rejected.
ModifierScenario make_conservative_modifier(double tau, EventLabel output_label = "OutputEvent",
                                            std::shared_ptr<std::size_t> fires = nullptr);

// The replay construction of the same rule: waits for InputEvent, replays it
// while the drawn OutputEvent falls below the threshold, and finally
// re-emits the accepted action as `proxy_label` for the actuator.  Assumes
// nothing blocks the outputs (it cannot see the blocked set), so it is only
// exercised without blocking guards.
ScenarioObject make_conservative_proxy(double tau, guard::Policy policy,
                                       std::shared_ptr<std::size_t> fires = nullptr,
                                       EventLabel input_label = "InputEvent",
                                       EventLabel output_label = "OutputEvent",
                                       EventLabel proxy_label = "OutputEventProxy");

// ---------------------------------------------------------------------------
// Episodes

enum class Outcome { Success, Collision, Timeout, UnknownFailure };

const char* outcome_name(Outcome o);

enum class ConservativeStyle { Off, Modifier, Proxy };

struct GuardSetup {
  bool obstacle_guard = false;
  double obstacle_threshold = kCollisionThreshold;
  ConservativeStyle conservative = ConservativeStyle::Off;
  double tau = 0.35;
};

struct EpisodeConfig {
  Pose start;
  int max_steps = 200;
  std::uint64_t seed = 0;
};

struct EpisodeResult {
  Outcome outcome = Outcome::Timeout;
  int steps = 0;            // moves performed, including a colliding one
  int overrides_fired = 0;  // cycles where a rule constrained the selection
};

struct EpisodeOutput {
  EpisodeResult result;
  Trace trace;
  std::vector<EventInstance> canonical;  // style-independent event view
  std::vector<Pose> path;                // start pose, then one pose per move
};

// Runs one navigation session: sensor -> policy head -> overrides ->
// actuator, applying each actuated action to the pose.  Success when the
// target comes within goal_radius; Collision when a Forward move starts
// inside the front threshold or its motion segment touches a wall (turns
// never collide); Timeout at max_steps; UnknownFailure on a bad policy
// distribution or a deadlocked model.
EpisodeOutput episode(const World& world, const guard::Policy& policy, const GuardSetup& guards,
                      const EpisodeConfig& cfg);

// Uniform position with clearance >= min_clearance, uniform heading.
Pose sample_start(const World& world, RngStream& rng,
                  double min_clearance = kCollisionThreshold);

struct Metrics {
  int num_of_solved = 0;
  int num_of_collision = 0;
  int num_of_timeout = 0;
  int num_of_unknown = 0;
  std::optional<double> avg_num_of_steps;  // over successes; absent when none
};

Metrics aggregate_metrics(const std::vector<EpisodeResult>& results);

struct BatchConfig {
  int episodes = 100;
  int max_steps = 200;
  std::uint64_t seed = 7;
};

struct BatchRow {
  int episode = 0;
  EpisodeResult result;
  std::uint64_t seed = 0;  // the per-episode engine seed
};

// Seeds a master stream with cfg.seed and derives (start seed, engine seed)
// per episode, so the start set is identical across guard setups.
std::vector<BatchRow> run_batch(const World& world, const guard::Policy& policy,
                                const GuardSetup& guards, const BatchConfig& cfg);

void write_csv(const std::vector<BatchRow>& rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Run configuration

struct PolicySpec {
  std::optional<std::string> network_path;  // wins over the heuristic when set
  double temperature = 2.0;
};

guard::Policy build_policy(const PolicySpec& spec);

struct MazeConfig {
  World world;
  PolicySpec policy;
  GuardSetup guards;
  BatchConfig batch;
};

// `base_dir` resolves relative world / network paths.
MazeConfig parse_config(const nlohmann::json& j, const std::string& base_dir);
MazeConfig load_config(const std::string& path);

}  // namespace sbm::maze
