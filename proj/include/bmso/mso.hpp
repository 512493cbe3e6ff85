#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "bmso/core.hpp"

namespace bmso {

/// Value-level signature: the atom set of a structure is derived from it.
/// Marks are non-exclusive unary predicates (disjoint-union markers, fusion
/// staging sets); colors are the exclusive ones.
struct Signature {
  std::vector<std::string> actions;
  std::vector<std::string> colors;
  std::vector<std::string> marks;

  std::string fingerprint() const;
  bool operator==(const Signature&) const = default;

  static Signature of(const TransitionSystem& s);
  static Signature of(const PointedPath& p);
  static Signature join(const Signature& a, const Signature& b);
};

/// Finite relational structure as consumed by the type recursion: elements,
/// labelled edges, unary predicates, a tuple of element constants and a tuple
/// of set constants.
struct MsoStructure {
  Signature sig;
  int n = 0;
  std::vector<std::vector<std::pair<int, int>>> edges;  // per action, sorted
  std::vector<int> color;                               // per element, -1 = none
  std::vector<std::vector<bool>> mark;                  // per sig.marks entry
  std::vector<int> constants;
  std::vector<std::vector<bool>> sets;

  std::string cache_key() const;

  /// Transition system as a structure with one constant (the initial state).
  static MsoStructure of(const TransitionSystem& s, const Signature& sig);
  /// Pointed path: two constants (first and last vertex), no initial constant.
  static MsoStructure of(const PointedPath& p, const Signature& sig);
};

/// Canonical rank-m Hintikka type value. Equal TypeIds mean equal m-theories
/// over the shared signature; the digest pair accelerates comparisons and the
/// canonical encoding settles them.
struct TypeId {
  int rank = 0;
  std::string sig_fp;
  std::string canonical;
  std::uint64_t digest0 = 0, digest1 = 0;

  std::string digest_hex() const;
  bool operator==(const TypeId& o) const {
    return rank == o.rank && digest0 == o.digest0 && digest1 == o.digest1 &&
           sig_fp == o.sig_fp && canonical == o.canonical;
  }
  bool operator<(const TypeId& o) const {
    return std::tie(rank, digest0, digest1, sig_fp, canonical) <
           std::tie(o.rank, o.digest0, o.digest1, o.sig_fp, o.canonical);
  }
};

struct TypeLimits {
  int max_rank = 3;
  /// Max structure elements per rank (index clamped to 3).
  std::array<int, 4> max_elements{64, 18, 14, 8};

  void check(int m, int n) const;
};

TypeId hintikka(const MsoStructure& s, int m, const TypeLimits& limits = {});
TypeId hintikka(const TransitionSystem& s, int m, const TypeLimits& limits = {});
TypeId hintikka(const TransitionSystem& s, int m, const Signature& sig,
                const TypeLimits& limits = {});

bool equiv_m(const TransitionSystem& a, const TransitionSystem& b, int m,
             const TypeLimits& limits = {});
bool equiv_m(const TransitionSystem& a, const TransitionSystem& b, int m, const Signature& sig,
             const TypeLimits& limits = {});

TypeId path_theory(const PointedPath& p, int m, const TypeLimits& limits = {});
TypeId path_theory(const PointedPath& p, int m, const Signature& sig,
                   const TypeLimits& limits = {});

/// Instance check of the fusion composition lemma:
/// (a ≡_m a2) implies (fuse_p(a) ≡_m fuse_p(a2)).
bool fuse_equiv_check(const TransitionSystem& a, const TransitionSystem& a2,
                      const std::string& p, int m, const TypeLimits& limits = {});

// -- formulas ---------------------------------------------------------------

/// MSO formula over atoms edge_a(x,y), color_p(x), x = y, x in X, init(x).
/// Element variables start with a lowercase letter, set variables uppercase.
struct Formula {
  enum class Kind {
    edge, color, eq, member, init,
    neg, conj, disj,
    exists_elem, forall_elem, exists_set, forall_set,
  };
  Kind kind = Kind::init;
  std::string name;              // action label or color name
  std::string var1, var2;        // atom arguments / quantified variable
  std::vector<Formula> children;

  int quantifier_rank() const;
  std::string to_string() const;

  static Formula parse(const std::string& text);
};

using MsoValue = std::variant<std::string, std::set<std::string>>;

bool evaluate(const Formula& phi, const TransitionSystem& s,
              const std::map<std::string, MsoValue>& assignment = {});

}  // namespace bmso
