#pragma once

#include <vector>

#include "sbm/model.hpp"

namespace sbm {

// Exhaustive breadth-first exploration of a modifier-free model's labeled
// transition system.  Branches on every enabled event at every reached
// product state and returns the maximal run prefixes: every label sequence
// of length `depth`, plus every shorter sequence that ends in a deadlock.
//
// Requires pure scenarios (sync/delta free of side effects): statements may
// be re-evaluated on different branches.  Models with modifiers are
// rejected.  Exploration stops with StateSpaceCapError once `node_cap`
// states have been expanded (default one million).
std::vector<std::vector<EventLabel>> enumerate_runs(const Model& model, std::size_t depth,
                                                    std::size_t node_cap = 1000000);

// The single run obtained by always triggering the least enabled request by
// (registration order, declaration order).  Independent reference walk for
// checking the engine's DeterministicPriority strategy.
std::vector<EventLabel> deterministic_priority_path(const Model& model, std::size_t depth);

// True when `prefix` is a prefix of at least one sequence in `runs`.
bool is_prefix_of_any(const std::vector<EventLabel>& prefix,
                      const std::vector<std::vector<EventLabel>>& runs);

}  // namespace sbm
