#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sbm/model.hpp"
#include "sbm/nn.hpp"

namespace sbm::guard {

// --- network heads -------------------------------------------------------

// Wraps a scored network as a scenario: wait for the input event carrying a
// feature vector, score it, then request one output event per label.  The
// payload of every requested output is the full final-score vector, so
// downstream rules can inspect the computation.
//
// Requests are declared in descending score order (ties keep label order)
// with weight 1 on the leader and 0 elsewhere: under deterministic priority
// the top choice triggers, and when the top choice is blocked the selection
// falls back to the next-to-highest enabled score; under weighted redraw
// the leader is the sole drawable choice.
ScenarioObject make_odnn(std::string id, nn::Network net, EventLabel input_label,
                         std::vector<EventLabel> output_labels);

// Action distribution over a fixed action set, e.g. from a softmax head.
// Must return one (action, probability) pair per declared action, in
// declaration order; probabilities are validated (finite, >= 0, summing to
// one within 1e-6).
using Policy =
    std::function<std::vector<std::pair<std::string, double>>(const std::vector<double>&)>;

// Distribution head: after each input event, requests
// output_label(action, p) with weight p for every action, so weighted
// redraw triggers actions with their policy probabilities.
ScenarioObject make_distribution_odnn(std::string id, Policy policy, EventLabel input_label,
                                      EventLabel output_label, std::vector<std::string> actions);

// --- environment shims ----------------------------------------------------

// Pull-style feed: each cycle yields the events to inject, in order.  An
// empty batch makes the sensor inert from then on.
using Feed = std::function<std::vector<EventInstance>()>;

// Requests the feed's events one per synchronization point, then waits for
// any `resume` pattern before starting the next cycle (immediately, when
// `resume` is empty).
ScenarioObject make_sensor(std::string id, Feed feed, std::vector<EventPattern> resume);

using Sink = std::function<void(const EventInstance&)>;

// Forwards every event matching `outputs` to the sink.  Requests and blocks
// nothing; with no patterns it is inert.
ScenarioObject make_actuator(std::string id, Sink sink, std::vector<EventPattern> outputs);

// --- override rules -------------------------------------------------------

// Blocking form <P, alpha>: while P holds on the latest input vector, every
// output label except `alpha` is blocked, forcing the network head's
// fallback onto `alpha` (or deadlock if alpha is never requested).
struct BlockingRule {
  std::function<bool(const std::vector<double>&)> precondition;  // P over the input
  EventLabel alpha;                                              // sole label left open
};

ScenarioObject compile_blocking_rule(std::string id, BlockingRule rule, EventLabel input_label,
                                     std::vector<EventLabel> output_labels);

// Modifier form <P, Q, f>: armed when P holds on the latest input vector;
// while armed, a candidate output event satisfying Q on its payload is
// replaced by f(candidate, blocked).  Disarms after the next output event.
struct ModifierRule {
  std::function<bool(const std::vector<double>&)> precondition;  // P over the input
  std::function<bool(const Payload&)> condition;                 // Q over the candidate payload
  std::function<EventInstance(const EventInstance&, const std::vector<EventPattern>&)> rewrite;
};

ModifierScenario compile_modifier_rule(std::string id, ModifierRule rule, EventLabel input_label,
                                       std::vector<EventLabel> output_labels);

// Rewrite that retargets the candidate to a fixed label, payload unchanged.
std::function<EventInstance(const EventInstance&, const std::vector<EventPattern>&)>
rewrite_to_label(EventLabel target);

// --- guarded model assembly -----------------------------------------------

// Collects the conventional pieces of a guarded controller and builds the
// model with the conventions installed:
//   - nobody may block the input label,
//   - only the network head may request output labels,
//   - guards whose declared footprint blocks inputs or requests outputs are
//     rejected at registration.
// Pieces are registered in the order they were added.
class GuardedModel {
 public:
  GuardedModel(EventLabel input_label, std::vector<EventLabel> output_labels);

  GuardedModel& sensor(ScenarioObject s);
  GuardedModel& head(ScenarioObject odnn);  // the sole output requester
  GuardedModel& actuator(ScenarioObject s);
  GuardedModel& add_guard(ScenarioObject s);
  GuardedModel& add_guard(ModifierScenario m);

  Model build() const;

 private:
  struct Part {
    enum class Kind { Scenario, Modifier } kind;
    std::shared_ptr<ScenarioObject> scenario;
    std::shared_ptr<ModifierScenario> modifier;
  };

  EventLabel input_label_;
  std::vector<EventLabel> output_labels_;
  std::string head_id_;
  std::vector<Part> parts_;
};

}  // namespace sbm::guard
