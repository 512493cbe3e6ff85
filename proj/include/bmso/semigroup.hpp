#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bmso/core.hpp"
#include "bmso/mso.hpp"

namespace bmso {

struct AlgebraElement {
  TypeId type;
  PointedPath representative;
  bool is_unit = false;

  const std::string& start_color() const { return representative.first_color(); }
  const std::string& end_color() const { return representative.last_color(); }
};

struct AlgebraLimits {
  int max_rep_length = 24;
  int max_elements = 512;
};

/// The finite partial semigroup of rank-m pointed-path theories over a
/// signature. Elements are discovered by Cayley-graph closure from the
/// length-0 and length-1 paths, so representatives are minimal in the
/// (length, lexicographic) order. The product table is computed from the
/// representatives; a product that produced an unknown type would mean the
/// closure was wrong and throws NOT_CLOSED.
class PathAlgebra {
public:
  static PathAlgebra build(const Signature& sig, int m, const AlgebraLimits& limits = {});

  const Signature& signature() const { return sig_; }
  int rank() const { return rank_; }
  int size() const { return static_cast<int>(elems_.size()); }
  const AlgebraElement& element(int i) const { return elems_.at(static_cast<std::size_t>(i)); }
  const std::vector<AlgebraElement>& elements() const { return elems_; }

  int find(const TypeId& t) const;
  /// Element of an arbitrary path over the signature (throws if the path uses
  /// letters outside the signature).
  int element_of(const PointedPath& p) const;
  int unit_of(const std::string& color) const;

  bool composable(int x, int y) const;
  /// Product, -1 when the endpoint colors do not match.
  int product(int x, int y) const;
  int power(int x, int n) const;

  /// Idempotent power: (e^pi, pi) with pi the least n where (e^n)^2 = e^n.
  std::pair<int, int> idempotent_power(int e) const;
  /// (index, period) of the power sequence e, e^2, e^3, ...
  std::pair<int, int> power_index_period(int e) const;

  std::string dump() const;

private:
  Signature sig_;
  int rank_ = 0;
  std::vector<AlgebraElement> elems_;
  std::vector<std::vector<int>> table_;
  std::map<std::string, int> index_;  // canonical type encoding -> element
  TypeLimits path_limits_;

  friend std::string algebra_dump(const PathAlgebra&);
};

/// Shared, memoized algebra per (signature, rank).
std::shared_ptr<const PathAlgebra> get_algebra(const Signature& sig, int m,
                                               const AlgebraLimits& limits = {});

struct TypePair {
  int alpha = -1;
  int beta = -1;
  auto operator<=>(const TypePair&) const = default;
};

/// Check the TypePair composability invariants against an algebra.
void require_valid_pair(const PathAlgebra& alg, TypePair p);

struct ConjugacyWitness {
  int xi = -1;
  int eta = -1;
  bool uses_unit = false;
};

/// Search for (xi, eta) with  gamma*delta^pi = alpha*beta^pi*xi,
/// beta^pi = xi*eta  and  delta^pi = eta*xi.  Element index order, units
/// last; first hit returned.
std::optional<ConjugacyWitness> conjugate(const PathAlgebra& alg, TypePair p, TypePair q);

/// All composable pairs of the algebra, in lexicographic order.
std::vector<TypePair> composable_pairs(const PathAlgebra& alg);

struct ConjugacyClass {
  TypePair canonical;
  std::vector<TypePair> members;
  bool operator==(const ConjugacyClass&) const = default;
};

/// Partition of the composable pairs; verifies that conjugacy is an
/// equivalence relation and throws NOT_EQUIVALENCE otherwise.
std::vector<ConjugacyClass> conjugacy_classes(const PathAlgebra& alg);

/// Lexicographically least pair conjugate to p.
TypePair canonical_pair(const PathAlgebra& alg, TypePair p);

TypePair strong_type(const PathAlgebra& alg, const Lasso& l);
ConjugacyClass weak_type(const PathAlgebra& alg, const Lasso& l);
/// Factorization type of the ultimately periodic branch u v^omega.
TypePair branch_type(const PathAlgebra& alg, const PointedPath& u, const PointedPath& v);

enum class LinkKind { bisim, equiv };

struct WitnessChain {
  std::vector<TransitionSystem> systems;
  std::vector<LinkKind> links;
  int rank = 0;
};

struct LassoChain {
  std::vector<Lasso> lassos;
  std::vector<LinkKind> links;
  int rank = 0;
};

/// The Lemma-5.4 construction: from equal weak types to the verified chain
/// L0 ~ M0 =_m N0 ~ N1 =_m M1 ~ L1. Throws PRECONDITION when the weak types
/// differ and VERIFY_FAILED when a constructed link does not check out.
LassoChain witness_chain_lassos(const PathAlgebra& alg, const Lasso& l0, const Lasso& l1);
WitnessChain witness_chain(const PathAlgebra& alg, const Lasso& l0, const Lasso& l1);

WitnessChain chain_of_lassos(const LassoChain& lc);
bool verify_chain(const WitnessChain& chain, const TypeLimits& limits = {});

}  // namespace bmso
