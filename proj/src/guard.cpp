#include "sbm/guard.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbm/errors.hpp"

namespace sbm::guard {

namespace {

const std::vector<double>& require_vector(const EventInstance& e, const std::string& who) {
  const auto* xs = std::get_if<std::vector<double>>(&e.payload);
  if (!xs) {
    throw PayloadError(who + ": " + e.label + " must carry a real vector");
  }
  return *xs;
}

bool label_in(const EventLabel& label, const std::vector<EventLabel>& labels) {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

}  // namespace

ScenarioObject make_odnn(std::string id, nn::Network net, EventLabel input_label,
                         std::vector<EventLabel> output_labels) {
  if (output_labels.size() != net.labels.size()) {
    throw RegistrationError(id + ": one output label per network output required");
  }
  auto shared_net = std::make_shared<nn::Network>(std::move(net));
  std::string who = id;

  ScenarioObject scenario(
      std::move(id), ScenarioState{},
      [output_labels, input_label](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == 0) {
          stmt.wait_for(match_label(input_label));
          return stmt;
        }
        const auto& scores = std::get<std::vector<double>>(s.memory);
        std::vector<std::size_t> order(scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
          stmt.request({output_labels[order[rank]], scores}, rank == 0 ? 1.0 : 0.0);
        }
        for (const EventLabel& l : output_labels) stmt.wait_for(match_label(l));
        stmt.wait_for(match_label(input_label));
        return stmt;
      },
      [shared_net, output_labels, input_label, who](const ScenarioState& s,
                                                    const EventInstance& e) {
        if (e.label == input_label) {
          const auto& x = require_vector(e, who);
          return ScenarioState{1, nn::forward(*shared_net, x)};
        }
        if (label_in(e.label, output_labels)) return ScenarioState{};
        return s;
      });
  LabelFootprint fp;
  fp.may_request.insert(output_labels.begin(), output_labels.end());
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

ScenarioObject make_distribution_odnn(std::string id, Policy policy, EventLabel input_label,
                                      EventLabel output_label, std::vector<std::string> actions) {
  if (actions.empty()) throw RegistrationError(id + ": empty action set");
  std::string who = id;
  auto evaluate = [policy, actions, who](const std::vector<double>& x) {
    std::vector<std::pair<std::string, double>> dist = policy(x);
    if (dist.size() != actions.size()) {
      throw PayloadError(who + ": policy returned " + std::to_string(dist.size()) +
                         " entries for " + std::to_string(actions.size()) + " actions");
    }
    double total = 0.0;
    std::vector<double> probs(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) {
      if (dist[i].first != actions[i]) {
        throw PayloadError(who + ": policy order must match the declared action set");
      }
      double p = dist[i].second;
      if (!std::isfinite(p) || p < 0.0) {
        throw PayloadError(who + ": probability for " + actions[i] +
                           " must be finite and non-negative");
      }
      probs[i] = p;
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw PayloadError(who + ": probabilities sum to " + std::to_string(total));
    }
    return probs;
  };

  ScenarioObject scenario(
      std::move(id), ScenarioState{},
      [actions, input_label, output_label](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == 0) {
          stmt.wait_for(match_label(input_label));
          return stmt;
        }
        const auto& probs = std::get<std::vector<double>>(s.memory);
        for (std::size_t i = 0; i < actions.size(); ++i) {
          stmt.request({output_label, ActionValue{actions[i], probs[i]}}, probs[i]);
        }
        stmt.wait_for(match_label(input_label));
        return stmt;
      },
      [evaluate, input_label, output_label, who](const ScenarioState& s,
                                                 const EventInstance& e) {
        if (e.label == input_label) {
          return ScenarioState{1, evaluate(require_vector(e, who))};
        }
        if (e.label == output_label) return ScenarioState{};
        return s;
      });
  LabelFootprint fp;
  fp.may_request.insert(output_label);
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

ScenarioObject make_sensor(std::string id, Feed feed, std::vector<EventPattern> resume) {
  struct Core {
    Feed feed;
    std::vector<EventInstance> batch;
    bool exhausted = false;
  };
  auto core = std::make_shared<Core>(Core{std::move(feed), {}, false});
  constexpr int kAwaitResume = -1;

  ScenarioObject scenario(
      std::move(id), ScenarioState{},
      [core, resume](const ScenarioState& s) {
        SyncStatement stmt;
        if (s.node == kAwaitResume) {
          for (const EventPattern& p : resume) stmt.wait_for(p);
          return stmt;
        }
        if (core->batch.empty() && !core->exhausted) {
          core->batch = core->feed();
          if (core->batch.empty()) core->exhausted = true;
        }
        if (core->exhausted) return stmt;  // inert
        stmt.request(core->batch[static_cast<std::size_t>(s.node)]);
        return stmt;
      },
      [core, resume](const ScenarioState& s, const EventInstance& e) {
        if (s.node == kAwaitResume) {
          for (const EventPattern& p : resume) {
            if (p.matches(e)) return ScenarioState{};
          }
          return s;
        }
        if (core->exhausted) return s;
        std::size_t at = static_cast<std::size_t>(s.node);
        if (at < core->batch.size() && e.label == core->batch[at].label) {
          if (at + 1 == core->batch.size()) {
            core->batch.clear();
            return resume.empty() ? ScenarioState{} : ScenarioState{kAwaitResume};
          }
          return ScenarioState{s.node + 1};
        }
        return s;
      });
  scenario.declare_footprint({{}, {}});  // filled lazily by the feed; blocks nothing
  return scenario;
}

ScenarioObject make_actuator(std::string id, Sink sink, std::vector<EventPattern> outputs) {
  ScenarioObject scenario(
      std::move(id), ScenarioState{},
      [outputs](const ScenarioState&) {
        SyncStatement stmt;
        for (const EventPattern& p : outputs) stmt.wait_for(p);
        return stmt;
      },
      [sink, outputs](const ScenarioState& s, const EventInstance& e) {
        for (const EventPattern& p : outputs) {
          if (p.matches(e)) {
            sink(e);
            break;
          }
        }
        return s;
      });
  scenario.declare_footprint({{}, {}});
  return scenario;
}

ScenarioObject compile_blocking_rule(std::string id, BlockingRule rule, EventLabel input_label,
                                     std::vector<EventLabel> output_labels) {
  if (!label_in(rule.alpha, output_labels)) {
    throw RegistrationError(id + ": rule target " + rule.alpha + " is not an output label");
  }
  std::string who = id;
  ScenarioObject scenario(
      std::move(id), ScenarioState{},
      [rule, input_label, output_labels](const ScenarioState& s) {
        SyncStatement stmt;
        stmt.wait_for(match_label(input_label));
        if (s.node == 1) {
          for (const EventLabel& l : output_labels) {
            if (l != rule.alpha) stmt.block(match_label(l));
            stmt.wait_for(match_label(l));
          }
        }
        return stmt;
      },
      [rule, input_label, output_labels, who](const ScenarioState& s, const EventInstance& e) {
        if (e.label == input_label) {
          return ScenarioState{rule.precondition(require_vector(e, who)) ? 1 : 0};
        }
        if (label_in(e.label, output_labels)) return ScenarioState{};
        return s;
      });
  LabelFootprint fp;
  for (const EventLabel& l : output_labels) {
    if (l != rule.alpha) fp.may_block.insert(l);
  }
  scenario.declare_footprint(std::move(fp));
  return scenario;
}

ModifierScenario compile_modifier_rule(std::string id, ModifierRule rule, EventLabel input_label,
                                       std::vector<EventLabel> output_labels) {
  std::string who = id;
  return ModifierScenario(
      std::move(id), ScenarioState{},
      [rule, output_labels](const ScenarioState& s, const std::vector<RequestEntry>&,
                            const std::vector<EventPattern>& blocked,
                            const EventInstance& candidate, RngStream&) {
        if (s.node == 1 && label_in(candidate.label, output_labels) &&
            rule.condition(candidate.payload)) {
          return rule.rewrite(candidate, blocked);
        }
        return candidate;
      },
      [rule, input_label, output_labels, who](const ScenarioState& s, const EventInstance& e) {
        if (e.label == input_label) {
          return ScenarioState{rule.precondition(require_vector(e, who)) ? 1 : 0};
        }
        if (label_in(e.label, output_labels)) return ScenarioState{};
        return s;
      });
}

std::function<EventInstance(const EventInstance&, const std::vector<EventPattern>&)>
rewrite_to_label(EventLabel target) {
  return [target](const EventInstance& candidate, const std::vector<EventPattern>&) {
    return EventInstance{target, candidate.payload};
  };
}

GuardedModel::GuardedModel(EventLabel input_label, std::vector<EventLabel> output_labels)
    : input_label_(std::move(input_label)), output_labels_(std::move(output_labels)) {}

GuardedModel& GuardedModel::sensor(ScenarioObject s) {
  parts_.push_back({Part::Kind::Scenario, std::make_shared<ScenarioObject>(std::move(s)), nullptr});
  return *this;
}

GuardedModel& GuardedModel::head(ScenarioObject odnn) {
  if (!head_id_.empty()) throw RegistrationError("a guarded model has exactly one network head");
  head_id_ = odnn.id();
  parts_.push_back(
      {Part::Kind::Scenario, std::make_shared<ScenarioObject>(std::move(odnn)), nullptr});
  return *this;
}

GuardedModel& GuardedModel::actuator(ScenarioObject s) { return sensor(std::move(s)); }

GuardedModel& GuardedModel::add_guard(ScenarioObject s) {
  if (const auto& fp = s.footprint()) {
    if (fp->may_block.count(input_label_)) {
      throw RegistrationError(s.id() + ": guards may not block the input event");
    }
    for (const EventLabel& l : output_labels_) {
      if (fp->may_request.count(l)) {
        throw RegistrationError(s.id() + ": guards may not request output events");
      }
    }
  }
  parts_.push_back({Part::Kind::Scenario, std::make_shared<ScenarioObject>(std::move(s)), nullptr});
  return *this;
}

GuardedModel& GuardedModel::add_guard(ModifierScenario m) {
  parts_.push_back(
      {Part::Kind::Modifier, nullptr, std::make_shared<ModifierScenario>(std::move(m))});
  return *this;
}

Model GuardedModel::build() const {
  if (head_id_.empty()) throw RegistrationError("guarded model is missing its network head");
  Model model;
  model.forbid_blocking(input_label_);
  for (const EventLabel& l : output_labels_) model.reserve_requests(l, head_id_);
  for (const Part& part : parts_) {
    if (part.kind == Part::Kind::Scenario) {
      model.add_scenario(*part.scenario);
    } else {
      model.add_modifier(*part.modifier);
    }
  }
  return model;
}

}  // namespace sbm::guard
