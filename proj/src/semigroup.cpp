#include "bmso/semigroup.hpp"

#include <algorithm>
#include <deque>
#include <mutex>
#include <sstream>

#include "bmso/bisim.hpp"

namespace bmso {

namespace {

std::vector<std::string> letter_set(const Signature& sig) {
  std::vector<std::string> letters{""};
  letters.insert(letters.end(), sig.colors.begin(), sig.colors.end());
  return letters;
}

TypeLimits algebra_type_limits(int m) {
  TypeLimits lim;
  lim.max_rank = std::max(m, 3);
  lim.max_elements = {128, 64, 14, 8};
  return lim;
}

}  // namespace

PathAlgebra PathAlgebra::build(const Signature& sig, int m, const AlgebraLimits& limits) {
  PathAlgebra alg;
  alg.sig_ = sig;
  alg.rank_ = m;
  alg.path_limits_ = algebra_type_limits(m);

  auto add = [&](const PointedPath& p, bool unit) -> int {
    TypeId t = path_theory(p, m, sig, alg.path_limits_);
    auto it = alg.index_.find(t.canonical);
    if (it != alg.index_.end()) return -1;  // not new
    if (static_cast<int>(p.length()) > limits.max_rep_length)
      throw Error(Errc::guard_exceeded,
                  "representative length " + std::to_string(p.length()) + " over the bound " +
                      std::to_string(limits.max_rep_length) + " before closure finished");
    if (static_cast<int>(alg.elems_.size()) >= limits.max_elements)
      throw Error(Errc::guard_exceeded, "algebra exceeds " +
                                            std::to_string(limits.max_elements) + " elements");
    alg.index_[t.canonical] = static_cast<int>(alg.elems_.size());
    alg.elems_.push_back(AlgebraElement{std::move(t), p, unit});
    return static_cast<int>(alg.elems_.size()) - 1;
  };

  std::vector<std::string> letters = letter_set(sig);
  // Length 0 (units), then length 1, in lexicographic order.
  for (const auto& c : letters) add(unit_path(c), true);
  std::vector<PointedPath> gens;
  for (const auto& c0 : letters)
    for (const auto& a : sig.actions)
      for (const auto& c1 : letters) {
        PointedPath g({c0, c1}, {a});
        gens.push_back(g);
      }
  std::deque<int> queue;
  for (const auto& g : gens) {
    int i = add(g, false);
    if (i >= 0) queue.push_back(i);
  }
  // Military-order BFS: extending by one edge preserves shortest-first,
  // lexicographic-least representatives.
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    PointedPath rep = alg.elems_[static_cast<std::size_t>(x)].representative;
    for (const auto& g : gens) {
      if (rep.last_color() != g.first_color()) continue;
      int i = add(concat(rep, g), false);
      if (i >= 0) queue.push_back(i);
    }
  }

  // Full product table from representative concatenations.
  const int n = alg.size();
  alg.table_.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), -1));
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      const auto& ex = alg.elems_[static_cast<std::size_t>(x)];
      const auto& ey = alg.elems_[static_cast<std::size_t>(y)];
      if (ex.end_color() != ey.start_color()) continue;
      TypeId t = path_theory(concat(ex.representative, ey.representative), m, sig,
                             alg.path_limits_);
      auto it = alg.index_.find(t.canonical);
      if (it == alg.index_.end())
        throw Error(Errc::not_closed, "product of elements " + std::to_string(x) + " and " +
                                          std::to_string(y) + " left the closure");
      alg.table_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] = it->second;
    }
  }
  return alg;
}

int PathAlgebra::find(const TypeId& t) const {
  auto it = index_.find(t.canonical);
  return it == index_.end() ? -1 : it->second;
}

int PathAlgebra::element_of(const PointedPath& p) const {
  TypeId t = path_theory(p, rank_, sig_, path_limits_);
  int i = find(t);
  if (i < 0) throw Error(Errc::not_closed, "path type missing from the algebra");
  return i;
}

int PathAlgebra::unit_of(const std::string& color) const {
  for (int i = 0; i < size(); ++i)
    if (elems_[static_cast<std::size_t>(i)].is_unit &&
        elems_[static_cast<std::size_t>(i)].start_color() == color)
      return i;
  throw Error(Errc::invalid, "no unit for color '" + color + "'");
}

bool PathAlgebra::composable(int x, int y) const { return product(x, y) >= 0; }

int PathAlgebra::product(int x, int y) const {
  return table_.at(static_cast<std::size_t>(x)).at(static_cast<std::size_t>(y));
}

int PathAlgebra::power(int x, int n) const {
  if (n < 1) throw Error(Errc::invalid, "power must be >= 1");
  int acc = x;
  for (int i = 1; i < n; ++i) {
    acc = product(acc, x);
    if (acc < 0) throw Error(Errc::not_composable, "element is not self-composable");
  }
  return acc;
}

std::pair<int, int> PathAlgebra::idempotent_power(int e) const {
  if (product(e, e) < 0)
    throw Error(Errc::not_composable, "element " + std::to_string(e) + " is not self-composable");
  int acc = e;
  for (int n = 1; n <= size() + 1; ++n) {
    if (product(acc, acc) == acc) return {acc, n};
    acc = product(acc, e);
  }
  throw Error(Errc::not_closed, "no idempotent power found");  // impossible in a finite semigroup
}

std::pair<int, int> PathAlgebra::power_index_period(int e) const {
  if (product(e, e) < 0)
    throw Error(Errc::not_composable, "element is not self-composable");
  std::vector<int> seen;
  int acc = e;
  while (true) {
    auto it = std::find(seen.begin(), seen.end(), acc);
    if (it != seen.end()) {
      int index = static_cast<int>(it - seen.begin());
      int period = static_cast<int>(seen.size()) - index;
      return {index, period};
    }
    seen.push_back(acc);
    acc = product(acc, e);
  }
}

namespace {

std::string render_path(const PointedPath& p) {
  std::string s = "[" + p.colors[0] + "]";
  for (std::size_t i = 0; i < p.labels.size(); ++i)
    s += "-" + p.labels[i] + "-[" + p.colors[i + 1] + "]";
  return s;
}

}  // namespace

std::string PathAlgebra::dump() const {
  std::ostringstream os;
  os << "path-algebra rank=" << rank_ << "\n";
  os << "signature actions=";
  for (std::size_t i = 0; i < sig_.actions.size(); ++i) os << (i ? "," : "") << sig_.actions[i];
  os << " colors=";
  for (std::size_t i = 0; i < sig_.colors.size(); ++i) os << (i ? "," : "") << sig_.colors[i];
  os << "\nelements " << size() << "\n";
  for (int i = 0; i < size(); ++i) {
    const auto& e = elems_[static_cast<std::size_t>(i)];
    os << "  e" << i << (e.is_unit ? " unit" : "") << " rep=" << render_path(e.representative)
       << " type=" << e.type.digest_hex() << "\n";
  }
  os << "table\n";
  for (int x = 0; x < size(); ++x) {
    os << "  e" << x << ":";
    for (int y = 0; y < size(); ++y) {
      int p = product(x, y);
      os << " " << (p < 0 ? std::string("-") : "e" + std::to_string(p));
    }
    os << "\n";
  }
  os << "idempotent-powers\n";
  for (int x = 0; x < size(); ++x) {
    if (product(x, x) < 0) continue;
    auto [e, n] = idempotent_power(x);
    os << "  e" << x << "^pi=e" << e << " pi=" << n << "\n";
  }
  return os.str();
}

namespace {

struct RegistryKey {
  std::string fp;
  int rank;
  bool operator<(const RegistryKey& o) const { return std::tie(fp, rank) < std::tie(o.fp, o.rank); }
};

std::mutex registry_mu;
std::map<RegistryKey, std::shared_ptr<const PathAlgebra>> registry;

}  // namespace

std::shared_ptr<const PathAlgebra> get_algebra(const Signature& sig, int m,
                                               const AlgebraLimits& limits) {
  RegistryKey key{sig.fingerprint(), m};
  {
    std::lock_guard<std::mutex> lock(registry_mu);
    auto it = registry.find(key);
    if (it != registry.end()) return it->second;
  }
  auto built = std::make_shared<const PathAlgebra>(PathAlgebra::build(sig, m, limits));
  std::lock_guard<std::mutex> lock(registry_mu);
  auto [it, fresh] = registry.emplace(key, built);
  return it->second;
}

// -- conjugacy -----------------------------------------------------------------

void require_valid_pair(const PathAlgebra& alg, TypePair p) {
  if (p.alpha < 0 || p.beta < 0 || p.alpha >= alg.size() || p.beta >= alg.size())
    throw Error(Errc::invalid, "type pair indices out of range");
  if (alg.product(p.beta, p.beta) < 0)
    throw Error(Errc::not_composable, "loop component is not self-composable");
  if (alg.product(p.alpha, p.beta) < 0)
    throw Error(Errc::not_composable, "tail component does not compose with the loop");
}

std::optional<ConjugacyWitness> conjugate(const PathAlgebra& alg, TypePair p, TypePair q) {
  require_valid_pair(alg, p);
  require_valid_pair(alg, q);
  int bpi = alg.idempotent_power(p.beta).first;
  int dpi = alg.idempotent_power(q.beta).first;
  int ab = alg.product(p.alpha, bpi);
  int gd = alg.product(q.alpha, dpi);

  std::vector<int> order;
  for (int i = 0; i < alg.size(); ++i)
    if (!alg.element(i).is_unit) order.push_back(i);
  for (int i = 0; i < alg.size(); ++i)
    if (alg.element(i).is_unit) order.push_back(i);

  for (int xi : order) {
    int abxi = alg.product(ab, xi);
    if (abxi != gd) continue;
    for (int eta : order) {
      if (alg.product(xi, eta) != bpi) continue;
      if (alg.product(eta, xi) != dpi) continue;
      ConjugacyWitness w;
      w.xi = xi;
      w.eta = eta;
      w.uses_unit = alg.element(xi).is_unit || alg.element(eta).is_unit;
      return w;
    }
  }
  return std::nullopt;
}

std::vector<TypePair> composable_pairs(const PathAlgebra& alg) {
  std::vector<TypePair> pairs;
  for (int a = 0; a < alg.size(); ++a)
    for (int b = 0; b < alg.size(); ++b)
      if (alg.product(b, b) >= 0 && alg.product(a, b) >= 0) pairs.push_back({a, b});
  return pairs;
}

std::vector<ConjugacyClass> conjugacy_classes(const PathAlgebra& alg) {
  std::vector<TypePair> pairs = composable_pairs(alg);
  const std::size_t n = pairs.size();
  std::vector<std::vector<bool>> rel(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rel[i][j] = conjugate(alg, pairs[i], pairs[j]).has_value();

  for (std::size_t i = 0; i < n; ++i)
    if (!rel[i][i]) throw Error(Errc::not_equivalence, "conjugacy is not reflexive");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (rel[i][j] != rel[j][i]) throw Error(Errc::not_equivalence, "conjugacy is not symmetric");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!rel[i][j]) continue;
      for (std::size_t k = 0; k < n; ++k)
        if (rel[j][k] && !rel[i][k])
          throw Error(Errc::not_equivalence, "conjugacy is not transitive");
    }

  std::vector<ConjugacyClass> classes;
  std::vector<bool> assigned(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    ConjugacyClass c;
    c.canonical = pairs[i];
    for (std::size_t j = 0; j < n; ++j)
      if (rel[i][j]) {
        c.members.push_back(pairs[j]);
        assigned[j] = true;
      }
    classes.push_back(std::move(c));
  }
  return classes;
}

TypePair canonical_pair(const PathAlgebra& alg, TypePair p) {
  for (int a = 0; a < alg.size(); ++a) {
    for (int b = 0; b < alg.size(); ++b) {
      if (alg.product(b, b) < 0 || alg.product(a, b) < 0) continue;
      TypePair q{a, b};
      if (q == p) return q;
      if (conjugate(alg, p, q).has_value()) return q;
    }
  }
  return p;
}

// -- lasso types -----------------------------------------------------------------

TypePair strong_type(const PathAlgebra& alg, const Lasso& l) {
  TypePair p;
  p.alpha = alg.element_of(l.tail);
  p.beta = alg.element_of(l.loop);
  require_valid_pair(alg, p);
  return p;
}

ConjugacyClass weak_type(const PathAlgebra& alg, const Lasso& l) {
  TypePair p = strong_type(alg, l);
  ConjugacyClass c;
  c.canonical = canonical_pair(alg, p);
  for (const TypePair& q : composable_pairs(alg))
    if (q == p || conjugate(alg, p, q).has_value()) c.members.push_back(q);
  return c;
}

TypePair branch_type(const PathAlgebra& alg, const PointedPath& u, const PointedPath& v) {
  if (!v.loopable()) throw Error(Errc::not_composable, "period part is not self-composable");
  if (u.last_color() != v.first_color())
    throw Error(Errc::not_composable, "prefix does not compose with the period");
  TypePair p;
  p.alpha = alg.element_of(u);
  p.beta = alg.element_of(v);
  return p;
}

// -- witness chains ----------------------------------------------------------------

LassoChain witness_chain_lassos(const PathAlgebra& alg, const Lasso& l0, const Lasso& l1) {
  LassoChain chain;
  chain.rank = alg.rank();
  if (l0 == l1) {
    chain.lassos = {l0};
    return chain;
  }
  TypePair p0 = strong_type(alg, l0);
  TypePair p1 = strong_type(alg, l1);
  auto witness = conjugate(alg, p0, p1);
  if (!witness)
    throw Error(Errc::precondition, "the two lassos have different weak types");

  auto [b0pi, k0] = alg.idempotent_power(p0.beta);
  auto [b1pi, k1] = alg.idempotent_power(p1.beta);
  const PointedPath& a0 = l0.tail;
  const PointedPath& b0 = l0.loop;
  const PointedPath& a1 = l1.tail;
  const PointedPath& b1 = l1.loop;
  PointedPath c = alg.element(witness->xi).representative;
  PointedPath d = alg.element(witness->eta).representative;

  PointedPath b0k = path_power(b0, static_cast<std::size_t>(k0));
  PointedPath b1k = path_power(b1, static_cast<std::size_t>(k1));
  Lasso m0(concat(a0, b0k), b0k);
  Lasso m1(concat(a1, b1k), b1k);
  Lasso n0(concat(a0, b0k), concat(c, d));
  Lasso n1(concat(concat(a0, b0k), c), concat(d, c));

  chain.lassos = {l0, m0, n0, n1, m1, l1};
  chain.links = {LinkKind::bisim, LinkKind::equiv, LinkKind::bisim, LinkKind::equiv,
                 LinkKind::bisim};
  return chain;
}

WitnessChain chain_of_lassos(const LassoChain& lc) {
  WitnessChain chain;
  chain.rank = lc.rank;
  chain.links = lc.links;
  for (const auto& l : lc.lassos) chain.systems.push_back(lasso_to_system(l));
  return chain;
}

WitnessChain witness_chain(const PathAlgebra& alg, const Lasso& l0, const Lasso& l1) {
  WitnessChain chain = chain_of_lassos(witness_chain_lassos(alg, l0, l1));
  TypeLimits limits;
  limits.max_rank = std::max(alg.rank(), limits.max_rank);
  limits.max_elements = {256, 128, 14, 8};
  if (!verify_chain(chain, limits))
    throw Error(Errc::verify_failed, "a constructed chain link failed its check");
  return chain;
}

bool verify_chain(const WitnessChain& chain, const TypeLimits& limits) {
  if (chain.systems.empty()) return false;
  if (chain.links.size() + 1 != chain.systems.size()) return false;
  Signature sig;
  for (const auto& s : chain.systems) sig = Signature::join(sig, Signature::of(s));
  for (std::size_t i = 0; i < chain.links.size(); ++i) {
    const auto& a = chain.systems[i];
    const auto& b = chain.systems[i + 1];
    if (chain.links[i] == LinkKind::bisim) {
      if (!bisimilar(a, b).related) return false;
    } else {
      if (!equiv_m(a, b, chain.rank, sig, limits)) return false;
    }
  }
  return true;
}

}  // namespace bmso
