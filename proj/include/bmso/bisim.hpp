#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bmso/core.hpp"

namespace bmso {

/// Outcome of a bisimilarity check. On success `relation` is a bisimulation
/// containing the pair of initial states; on failure `distinguishing_depth`
/// is the refinement round at which the initial states were separated
/// (0 = they already disagree on unary predicates).
struct BisimWitness {
  bool related = false;
  std::vector<std::pair<std::string, std::string>> relation;
  int distinguishing_depth = -1;
};

/// Partition refinement on the disjoint sum, keyed by
/// (unary predicates, per-action successor-block sets).
BisimWitness bisimilar(const TransitionSystem& s, const TransitionSystem& t);

/// Greatest-fixpoint oracle on the full product relation. Intentionally
/// naive; used to cross-check `bisimilar`.
BisimWitness naive_bisim(const TransitionSystem& s, const TransitionSystem& t,
                         std::size_t bound = 12);

/// Direct check of the (prop)/(forth)/(back) conditions for a relation.
bool check_bisimulation(const TransitionSystem& s, const TransitionSystem& t,
                        const std::vector<std::pair<std::string, std::string>>& relation);

/// Quotient by bisimilarity; minimal and bisimilar to the input.
TransitionSystem quotient(const TransitionSystem& s);

inline constexpr const char* kFrontierMark = "Frontier";

struct UnravelTree {
  TransitionSystem tree;
  std::size_t depth = 0;
  /// tree state -> underlying state of the source system
  std::map<std::string, std::string> projection;
};

/// Tree of all paths from the initial state of length <= depth; vertices at
/// exactly the bound carry the frontier mark.
UnravelTree unravel(const TransitionSystem& s, std::size_t depth);

}  // namespace bmso
