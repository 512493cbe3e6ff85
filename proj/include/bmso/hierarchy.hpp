#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bmso/core.hpp"
#include "bmso/mso.hpp"
#include "bmso/semigroup.hpp"

namespace bmso {

/// Hierarchical-lasso type: the set of weak types of the branches of the
/// unravelling, taken over the enriched alphabet where every vertex letter
/// carries its colour together with the set of types of the sub-lassos
/// attached there. Comparable only across equal base signatures.
struct NestedType {
  int level = 0;
  int rank = 0;
  std::string base_sig;
  /// Canonical conjugacy-class representative (prefix type, period type)
  /// per branch class, sorted.
  std::vector<std::pair<TypeId, TypeId>> pairs;

  std::string digest() const;
  bool operator==(const NestedType&) const = default;
};

NestedType tp(const KLasso& m, int rank);
NestedType tp(const KLasso& m, int rank, const Signature& base);

/// The whole system of `m` with every vertex colour replaced by its enriched
/// letter (colour plus the set of attachment subtypes at that vertex).
TransitionSystem relabel_tp(const KLasso& m, int rank);
TransitionSystem relabel_tp(const KLasso& m, int rank, const Signature& base);

struct NormalizeResult {
  Lasso result;
  WitnessChain chain;
};

/// Collapse a hierarchical lasso to a plain lasso along the proof of the
/// normalization lemma: sub-lassos on the loop become cycle copies, loop
/// decorations are stripped by bisimilarity, tail decorations are removed
/// last-vertex-first through witness chains.
NormalizeResult normalize_1lasso(const KLasso& m, int rank);

/// Witness chain between hierarchical lassos of equal type (levels <= 2):
/// representative substitution of equal-type sub-lassos, then main-branch
/// alignment through the decorated Lemma-5.4 construction (with a
/// branch-switch step when the main branches differ).
WitnessChain tp_equiv_chain(const KLasso& a, const KLasso& b, int rank);

// -- Cantor-Bendixson rank ---------------------------------------------------

struct CBRank {
  bool infinite = false;
  int value = 0;
  /// infinite case: a state with two distinct cycles through it
  std::string witness_state;
  std::vector<std::string> witness_cycle_a, witness_cycle_b;
  /// finite case: member lists of the cycle components along a longest chain
  std::vector<std::vector<std::string>> witness_chain;
};

CBRank cb_rank(const TransitionSystem& s);

/// Unfold the condensation DAG into a tree of component copies; bisimilar to
/// the input and entry-unique everywhere.
TransitionSystem partial_unravel(const TransitionSystem& s, std::size_t max_states = 4096);

/// Minimal k such that the reachable part is a tree extension of a
/// generalised k-lasso (k = 0 for a cycle-free finite tree); nullopt when the
/// shape is not recognized.
std::optional<int> recognize_tree_ext_glasso(const TransitionSystem& s);

// -- encoding / decoding maps --------------------------------------------------

struct EncodedSystem {
  TransitionSystem skeleton;
  /// vertex -> set of (attachment edge label, type digest)
  std::map<std::string, std::set<std::pair<std::string, std::string>>> labels;
  /// (attachment edge label, type digest) -> representative subsystem
  std::map<std::pair<std::string, std::string>, TransitionSystem> dictionary;
  int rank = 0;
  bool glasso = false;
};

/// Remove all attached finite trees; labels remember their rank-m theories.
EncodedSystem encode_tree_extension(const TransitionSystem& s, int rank);
TransitionSystem decode_tree_extension(const EncodedSystem& e);

/// Remove all hierarchical lassos attached at the leaves of the finite tree
/// part; labels remember their nested types.
EncodedSystem encode_glasso(const TransitionSystem& s, int rank);
TransitionSystem decode_glasso(const EncodedSystem& e);

std::string encoded_report(const EncodedSystem& e);
std::string cb_report(const TransitionSystem& s);

}  // namespace bmso
