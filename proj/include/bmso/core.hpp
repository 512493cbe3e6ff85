#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace bmso {

enum class Errc {
  syntax,
  invalid,
  empty_p,
  color_mismatch,
  not_a_lasso,
  not_a_klasso,
  over_bound,
  unbound_variable,
  rank_too_high,
  structure_too_large,
  guard_exceeded,
  not_composable,
  not_closed,
  not_equivalence,
  precondition,
  verify_failed,
  level_unsupported,
  not_recognized,
  missing_representative,
};

const char* errc_name(Errc c);

/// Error with a stable code, so callers can match on the failure kind.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

struct Edge {
  std::string from;
  std::string label;
  std::string to;
  auto operator<=>(const Edge&) const = default;
};

/// Finite pointed transition system: action-labelled edges, at most one
/// colour per state, plus optional non-exclusive marker sets (used by the
/// disjoint union and fusion constructions).
class TransitionSystem {
public:
  TransitionSystem() = default;
  TransitionSystem(std::vector<std::string> states, std::string initial,
                   std::vector<Edge> edges,
                   std::map<std::string, std::string> colors = {},
                   std::map<std::string, std::set<std::string>> marks = {});

  const std::vector<std::string>& states() const { return states_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::map<std::string, std::string>& colors() const { return colors_; }
  const std::map<std::string, std::set<std::string>>& marks() const { return marks_; }
  const std::string& initial() const { return initial_; }

  std::size_t size() const { return states_.size(); }
  bool has_state(const std::string& s) const;
  int index_of(const std::string& s) const;  // -1 if absent
  /// Colour of a state, empty string if uncoloured.
  std::string color_of(const std::string& s) const;
  bool marked(const std::string& mark, const std::string& s) const;
  std::vector<Edge> out_edges(const std::string& s) const;

  bool operator==(const TransitionSystem&) const = default;

private:
  std::vector<std::string> states_;
  std::vector<Edge> edges_;  // kept sorted and duplicate-free
  std::map<std::string, std::string> colors_;
  std::map<std::string, std::set<std::string>> marks_;
  std::string initial_;
};

/// Finite coloured path with designated end-points. Vertex i carries
/// colors[i] ("" = uncoloured); edge i goes from vertex i to vertex i+1
/// with action labels[i]. A single vertex (no edges) is a legal path.
struct PointedPath {
  std::vector<std::string> colors;
  std::vector<std::string> labels;

  PointedPath() : colors{""} {}
  PointedPath(std::vector<std::string> cs, std::vector<std::string> ls);

  std::size_t length() const { return labels.size(); }
  const std::string& first_color() const { return colors.front(); }
  const std::string& last_color() const { return colors.back(); }
  /// True if the path can be concatenated with itself.
  bool loopable() const { return first_color() == last_color(); }

  bool operator==(const PointedPath&) const = default;
};

PointedPath concat(const PointedPath& a, const PointedPath& b);
PointedPath path_power(const PointedPath& p, std::size_t n);
/// The length-0 path of the given colour (two-sided unit of concatenation).
PointedPath unit_path(const std::string& color);

/// Tail-plus-loop shape; the three glued end-points (end of tail, both ends
/// of the loop) must agree on colour.
struct Lasso {
  PointedPath tail;  // length >= 0
  PointedPath loop;  // length >= 1

  Lasso() = default;
  Lasso(PointedPath t, PointedPath l);

  bool operator==(const Lasso&) const = default;
};

struct KLassoAttachment;

/// Hierarchical lasso: a main lasso whose vertices may carry attached
/// lower-level hierarchical lassos (one connecting edge each).
struct KLasso {
  Lasso main;
  /// Attachments keyed by main-lasso vertex index (tail vertices first,
  /// then loop vertices after the glue point).
  std::vector<KLassoAttachment> attachments;

  int level() const;
  bool operator==(const KLasso&) const = default;
};

struct KLassoAttachment {
  std::size_t vertex;
  std::string label;
  KLasso sub;
  bool operator==(const KLassoAttachment&) const = default;
};

enum class SccKind { singleton_no_loop, cycle, other };

struct SccComponent {
  std::vector<std::string> members;  // in discovery order
  SccKind kind;
};

struct SccReport {
  std::vector<SccComponent> components;            // reverse topological order of discovery
  std::vector<std::pair<int, int>> condensation;   // direct edges between component indices
  std::vector<int> component_of;                   // per reachable-state index; -1 if unreachable
};

// -- parsing and serialization ------------------------------------------

TransitionSystem parse_system(const std::string& document);
std::string serialize_system(const TransitionSystem& s);
Lasso parse_lasso(const std::string& document);
std::string serialize_lasso(const Lasso& l);

// -- structural operations ----------------------------------------------

TransitionSystem disjoint_union(const TransitionSystem& a, const TransitionSystem& b);

/// Merge all states of the marker set (or colour) `p` into one fresh state.
TransitionSystem fuse(const TransitionSystem& a, const std::string& p);

TransitionSystem lasso_to_system(const Lasso& l);
TransitionSystem klasso_to_system(const KLasso& m);

Lasso lasso_decompose(const TransitionSystem& s);
/// Recognize a hierarchical lasso; returns the decomposition of minimal level.
KLasso klasso_recognize(const TransitionSystem& s);

SccReport scc_condensation(const TransitionSystem& s);

// -- isomorphism ---------------------------------------------------------

/// Deterministic relabelling by BFS order from the initial state.
TransitionSystem canonical_form(const TransitionSystem& s);
bool isomorphic(const TransitionSystem& a, const TransitionSystem& b);

/// States reachable from the initial state, in BFS order.
std::vector<std::string> reachable_states(const TransitionSystem& s);
/// Restriction of `s` to the forward closure of `root` (which becomes initial).
TransitionSystem restrict_reachable(const TransitionSystem& s, const std::string& root);

}  // namespace bmso
