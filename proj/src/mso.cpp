#include "bmso/mso.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace bmso {

// -- signatures ---------------------------------------------------------------

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

std::string Signature::fingerprint() const {
  std::string fp = "A:";
  for (const auto& a : actions) fp += a + ",";
  fp += ";C:";
  for (const auto& c : colors) fp += c + ",";
  fp += ";M:";
  for (const auto& m : marks) fp += m + ",";
  return fp;
}

Signature Signature::of(const TransitionSystem& s) {
  Signature sig;
  for (const auto& e : s.edges()) sig.actions.push_back(e.label);
  for (const auto& [st, c] : s.colors()) sig.colors.push_back(c);
  for (const auto& [m, ss] : s.marks()) sig.marks.push_back(m);
  sig.actions = sorted_unique(std::move(sig.actions));
  sig.colors = sorted_unique(std::move(sig.colors));
  sig.marks = sorted_unique(std::move(sig.marks));
  return sig;
}

Signature Signature::of(const PointedPath& p) {
  Signature sig;
  sig.actions = sorted_unique(p.labels);
  for (const auto& c : p.colors)
    if (!c.empty()) sig.colors.push_back(c);
  sig.colors = sorted_unique(std::move(sig.colors));
  return sig;
}

Signature Signature::join(const Signature& a, const Signature& b) {
  Signature sig;
  sig.actions = a.actions;
  sig.actions.insert(sig.actions.end(), b.actions.begin(), b.actions.end());
  sig.colors = a.colors;
  sig.colors.insert(sig.colors.end(), b.colors.begin(), b.colors.end());
  sig.marks = a.marks;
  sig.marks.insert(sig.marks.end(), b.marks.begin(), b.marks.end());
  sig.actions = sorted_unique(std::move(sig.actions));
  sig.colors = sorted_unique(std::move(sig.colors));
  sig.marks = sorted_unique(std::move(sig.marks));
  return sig;
}

// -- structures ---------------------------------------------------------------

namespace {

int index_in(const std::vector<std::string>& v, const std::string& s) {
  auto it = std::find(v.begin(), v.end(), s);
  return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

}  // namespace

MsoStructure MsoStructure::of(const TransitionSystem& s, const Signature& sig) {
  MsoStructure st;
  st.sig = sig;
  st.n = static_cast<int>(s.states().size());
  st.edges.resize(sig.actions.size());
  for (const auto& e : s.edges()) {
    int a = index_in(sig.actions, e.label);
    if (a < 0) throw Error(Errc::invalid, "edge label '" + e.label + "' outside the signature");
    st.edges[a].push_back({s.index_of(e.from), s.index_of(e.to)});
  }
  for (auto& es : st.edges) std::sort(es.begin(), es.end());
  st.color.assign(st.n, -1);
  for (const auto& [state, c] : s.colors()) {
    int ci = index_in(sig.colors, c);
    if (ci < 0) throw Error(Errc::invalid, "color '" + c + "' outside the signature");
    st.color[s.index_of(state)] = ci;
  }
  st.mark.assign(sig.marks.size(), std::vector<bool>(st.n, false));
  for (const auto& [m, ss] : s.marks()) {
    int mi = index_in(sig.marks, m);
    if (mi < 0) throw Error(Errc::invalid, "mark '" + m + "' outside the signature");
    for (const auto& state : ss) st.mark[mi][s.index_of(state)] = true;
  }
  st.constants = {s.index_of(s.initial())};
  return st;
}

MsoStructure MsoStructure::of(const PointedPath& p, const Signature& sig) {
  MsoStructure st;
  st.sig = sig;
  st.n = static_cast<int>(p.colors.size());
  st.edges.resize(sig.actions.size());
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    int a = index_in(sig.actions, p.labels[i]);
    if (a < 0) throw Error(Errc::invalid, "path label '" + p.labels[i] + "' outside the signature");
    st.edges[a].push_back({static_cast<int>(i), static_cast<int>(i + 1)});
  }
  for (auto& es : st.edges) std::sort(es.begin(), es.end());
  st.color.assign(st.n, -1);
  for (int i = 0; i < st.n; ++i) {
    if (p.colors[i].empty()) continue;
    int ci = index_in(sig.colors, p.colors[i]);
    if (ci < 0) throw Error(Errc::invalid, "path color '" + p.colors[i] + "' outside the signature");
    st.color[i] = ci;
  }
  st.mark.assign(sig.marks.size(), std::vector<bool>(st.n, false));
  st.constants = {0, st.n - 1};
  return st;
}

std::string MsoStructure::cache_key() const {
  std::ostringstream os;
  os << sig.fingerprint() << "#n" << n << "#";
  for (const auto& es : edges) {
    for (auto [u, v] : es) os << u << ">" << v << ",";
    os << "|";
  }
  os << "#c";
  for (int c : color) os << c << ",";
  os << "#m";
  for (const auto& mv : mark) {
    for (bool b : mv) os << (b ? '1' : '0');
    os << "|";
  }
  os << "#k";
  for (int c : constants) os << c << ",";
  os << "#s";
  for (const auto& sv : sets) {
    for (bool b : sv) os << (b ? '1' : '0');
    os << "|";
  }
  return os.str();
}

// -- hintikka types -------------------------------------------------------------

void TypeLimits::check(int m, int n) const {
  if (m > max_rank)
    throw Error(Errc::rank_too_high, "rank " + std::to_string(m) + " exceeds the bound " +
                                         std::to_string(max_rank));
  int cap = max_elements[static_cast<std::size_t>(std::min(m, 3))];
  if (n > cap)
    throw Error(Errc::structure_too_large,
                std::to_string(n) + " elements exceed the rank-" + std::to_string(m) +
                    " guard of " + std::to_string(cap));
}

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Cache {
  std::mutex mu;
  std::unordered_map<std::string, std::string> memo;
};

Cache& global_cache() {
  static Cache c;
  return c;
}

bool edge_between(const MsoStructure& s, int a, int u, int v) {
  const auto& es = s.edges[a];
  return std::binary_search(es.begin(), es.end(), std::make_pair(u, v));
}

/// Rank-0 type: the atoms over the constants, as a bit string.
std::string rank0(const MsoStructure& s) {
  std::string bits;
  const auto& cs = s.constants;
  bits.reserve(64);
  for (std::size_t a = 0; a < s.edges.size(); ++a)
    for (int ci : cs)
      for (int cj : cs) bits += edge_between(s, static_cast<int>(a), ci, cj) ? '1' : '0';
  for (std::size_t p = 0; p < s.sig.colors.size(); ++p)
    for (int ci : cs) bits += s.color[ci] == static_cast<int>(p) ? '1' : '0';
  for (const auto& mv : s.mark)
    for (int ci : cs) bits += mv[ci] ? '1' : '0';
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i + 1; j < cs.size(); ++j) bits += cs[i] == cs[j] ? '1' : '0';
  for (const auto& sv : s.sets)
    for (int ci : cs) bits += sv[ci] ? '1' : '0';
  return "0[" + std::to_string(cs.size()) + "," + std::to_string(s.sets.size()) + "]" + bits;
}

std::string type_rec(const MsoStructure& s, int m) {
  if (m == 0) return rank0(s);

  std::string key = s.cache_key() + "@" + std::to_string(m);
  {
    std::lock_guard<std::mutex> lock(global_cache().mu);
    auto it = global_cache().memo.find(key);
    if (it != global_cache().memo.end()) return it->second;
  }

  std::set<std::string> elem_types;
  for (int e = 0; e < s.n; ++e) {
    MsoStructure child = s;
    child.constants.push_back(e);
    elem_types.insert(type_rec(child, m - 1));
  }

  std::set<std::string> set_types;
  if (m == 1) {
    // At rank 1 the extension set is only observable through the membership
    // atoms of the constants, so one representative subset per membership
    // pattern of the constant elements covers all cases.
    std::vector<int> celems = s.constants;
    std::sort(celems.begin(), celems.end());
    celems.erase(std::unique(celems.begin(), celems.end()), celems.end());
    const std::size_t k = celems.size();
    for (std::uint64_t pat = 0; pat < (1ULL << k); ++pat) {
      MsoStructure child = s;
      std::vector<bool> x(s.n, false);
      for (std::size_t i = 0; i < k; ++i)
        if (pat & (1ULL << i)) x[celems[i]] = true;
      child.sets.push_back(std::move(x));
      set_types.insert(rank0(child));
    }
  } else {
    if (s.n > 24)
      throw Error(Errc::structure_too_large, "set extension would enumerate 2^" +
                                                 std::to_string(s.n) + " subsets");
    for (std::uint64_t mask = 0; mask < (1ULL << s.n); ++mask) {
      MsoStructure child = s;
      std::vector<bool> x(s.n, false);
      for (int i = 0; i < s.n; ++i)
        if (mask & (1ULL << i)) x[i] = true;
      child.sets.push_back(std::move(x));
      set_types.insert(type_rec(child, m - 1));
    }
  }

  std::string result = "E{";
  for (const auto& t : elem_types) result += t + ";";
  result += "}S{";
  for (const auto& t : set_types) result += t + ";";
  result += "}";

  {
    std::lock_guard<std::mutex> lock(global_cache().mu);
    global_cache().memo.emplace(std::move(key), result);
  }
  return result;
}

TypeId make_type(const Signature& sig, int m, std::string canonical) {
  TypeId t;
  t.rank = m;
  t.sig_fp = sig.fingerprint();
  t.digest0 = fnv1a(canonical, 14695981039346656037ULL);
  t.digest1 = fnv1a(canonical, 88172645463325252ULL);
  t.canonical = std::move(canonical);
  return t;
}

}  // namespace

std::string TypeId::digest_hex() const {
  char buf[36];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(digest0),
                static_cast<unsigned long long>(digest1));
  return buf;
}

TypeId hintikka(const MsoStructure& s, int m, const TypeLimits& limits) {
  limits.check(m, s.n);
  return make_type(s.sig, m, type_rec(s, m));
}

TypeId hintikka(const TransitionSystem& s, int m, const TypeLimits& limits) {
  return hintikka(s, m, Signature::of(s), limits);
}

TypeId hintikka(const TransitionSystem& s, int m, const Signature& sig,
                const TypeLimits& limits) {
  return hintikka(MsoStructure::of(s, sig), m, limits);
}

bool equiv_m(const TransitionSystem& a, const TransitionSystem& b, int m,
             const TypeLimits& limits) {
  return equiv_m(a, b, m, Signature::join(Signature::of(a), Signature::of(b)), limits);
}

bool equiv_m(const TransitionSystem& a, const TransitionSystem& b, int m, const Signature& sig,
             const TypeLimits& limits) {
  return hintikka(a, m, sig, limits) == hintikka(b, m, sig, limits);
}

TypeId path_theory(const PointedPath& p, int m, const TypeLimits& limits) {
  return path_theory(p, m, Signature::of(p), limits);
}

TypeId path_theory(const PointedPath& p, int m, const Signature& sig, const TypeLimits& limits) {
  return hintikka(MsoStructure::of(p, sig), m, limits);
}

bool fuse_equiv_check(const TransitionSystem& a, const TransitionSystem& a2,
                      const std::string& p, int m, const TypeLimits& limits) {
  Signature sig = Signature::join(Signature::of(a), Signature::of(a2));
  if (!equiv_m(a, a2, m, sig, limits)) return true;  // vacuously
  TransitionSystem fa = fuse(a, p), fa2 = fuse(a2, p);
  Signature fsig = Signature::join(Signature::of(fa), Signature::of(fa2));
  return equiv_m(fa, fa2, m, fsig, limits);
}

// -- formulas ----------------------------------------------------------------

int Formula::quantifier_rank() const {
  int sub = 0;
  for (const auto& c : children) sub = std::max(sub, c.quantifier_rank());
  switch (kind) {
    case Kind::exists_elem:
    case Kind::forall_elem:
    case Kind::exists_set:
    case Kind::forall_set:
      return 1 + sub;
    default:
      return sub;
  }
}

std::string Formula::to_string() const {
  switch (kind) {
    case Kind::edge: return "(edge " + name + " " + var1 + " " + var2 + ")";
    case Kind::color: return "(color " + name + " " + var1 + ")";
    case Kind::eq: return "(= " + var1 + " " + var2 + ")";
    case Kind::member: return "(in " + var1 + " " + var2 + ")";
    case Kind::init: return "(init " + var1 + ")";
    case Kind::neg: return "(not " + children[0].to_string() + ")";
    case Kind::conj: {
      std::string s = "(and";
      for (const auto& c : children) s += " " + c.to_string();
      return s + ")";
    }
    case Kind::disj: {
      std::string s = "(or";
      for (const auto& c : children) s += " " + c.to_string();
      return s + ")";
    }
    case Kind::exists_elem:
    case Kind::exists_set:
      return "(exists " + var1 + " " + children[0].to_string() + ")";
    case Kind::forall_elem:
    case Kind::forall_set:
      return "(forall " + var1 + " " + children[0].to_string() + ")";
  }
  return "?";
}

namespace {

struct Sexp {
  std::string atom;
  std::vector<Sexp> list;
  bool is_atom = false;
};

Sexp parse_sexp(const std::string& text, std::size_t& pos) {
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  skip();
  if (pos >= text.size()) throw Error(Errc::syntax, "unexpected end of formula");
  if (text[pos] == '(') {
    ++pos;
    Sexp s;
    skip();
    while (pos < text.size() && text[pos] != ')') {
      s.list.push_back(parse_sexp(text, pos));
      skip();
    }
    if (pos >= text.size()) throw Error(Errc::syntax, "missing ')'");
    ++pos;
    return s;
  }
  Sexp s;
  s.is_atom = true;
  while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
         text[pos] != '(' && text[pos] != ')')
    s.atom += text[pos++];
  return s;
}

bool is_set_var(const std::string& v) {
  return !v.empty() && std::isupper(static_cast<unsigned char>(v[0]));
}

Formula from_sexp(const Sexp& s) {
  if (s.is_atom) throw Error(Errc::syntax, "bare atom '" + s.atom + "' is not a formula");
  if (s.list.empty() || !s.list[0].is_atom) throw Error(Errc::syntax, "expected an operator");
  const std::string& op = s.list[0].atom;
  auto arity = [&](std::size_t k) {
    if (s.list.size() != k + 1)
      throw Error(Errc::syntax, "'" + op + "' expects " + std::to_string(k) + " arguments");
  };
  auto atom_arg = [&](std::size_t i) -> const std::string& {
    if (!s.list[i].is_atom) throw Error(Errc::syntax, "'" + op + "' expects a name argument");
    return s.list[i].atom;
  };
  Formula f;
  if (op == "edge") {
    arity(3);
    f.kind = Formula::Kind::edge;
    f.name = atom_arg(1);
    f.var1 = atom_arg(2);
    f.var2 = atom_arg(3);
  } else if (op == "color") {
    arity(2);
    f.kind = Formula::Kind::color;
    f.name = atom_arg(1);
    f.var1 = atom_arg(2);
  } else if (op == "=") {
    arity(2);
    f.kind = Formula::Kind::eq;
    f.var1 = atom_arg(1);
    f.var2 = atom_arg(2);
  } else if (op == "in") {
    arity(2);
    f.kind = Formula::Kind::member;
    f.var1 = atom_arg(1);
    f.var2 = atom_arg(2);
    if (!is_set_var(f.var2)) throw Error(Errc::syntax, "'in' needs a set variable on the right");
  } else if (op == "init") {
    arity(1);
    f.kind = Formula::Kind::init;
    f.var1 = atom_arg(1);
  } else if (op == "not") {
    arity(1);
    f.kind = Formula::Kind::neg;
    f.children.push_back(from_sexp(s.list[1]));
  } else if (op == "and" || op == "or") {
    if (s.list.size() < 3) throw Error(Errc::syntax, "'" + op + "' expects >= 2 arguments");
    f.kind = op == "and" ? Formula::Kind::conj : Formula::Kind::disj;
    for (std::size_t i = 1; i < s.list.size(); ++i) f.children.push_back(from_sexp(s.list[i]));
  } else if (op == "exists" || op == "forall") {
    arity(2);
    f.var1 = atom_arg(1);
    bool set_var = is_set_var(f.var1);
    if (op == "exists")
      f.kind = set_var ? Formula::Kind::exists_set : Formula::Kind::exists_elem;
    else
      f.kind = set_var ? Formula::Kind::forall_set : Formula::Kind::forall_elem;
    f.children.push_back(from_sexp(s.list[2]));
  } else {
    throw Error(Errc::syntax, "unknown operator '" + op + "'");
  }
  return f;
}

}  // namespace

Formula Formula::parse(const std::string& text) {
  std::size_t pos = 0;
  Sexp s = parse_sexp(text, pos);
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos != text.size()) throw Error(Errc::syntax, "trailing input after formula");
  return from_sexp(s);
}

namespace {

const std::string& elem_of(const std::map<std::string, MsoValue>& env, const std::string& v) {
  auto it = env.find(v);
  if (it == env.end()) throw Error(Errc::unbound_variable, "element variable '" + v + "'");
  const std::string* s = std::get_if<std::string>(&it->second);
  if (!s) throw Error(Errc::unbound_variable, "'" + v + "' is bound to a set");
  return *s;
}

const std::set<std::string>& set_of(const std::map<std::string, MsoValue>& env,
                                    const std::string& v) {
  auto it = env.find(v);
  if (it == env.end()) throw Error(Errc::unbound_variable, "set variable '" + v + "'");
  const std::set<std::string>* s = std::get_if<std::set<std::string>>(&it->second);
  if (!s) throw Error(Errc::unbound_variable, "'" + v + "' is bound to an element");
  return *s;
}

bool eval_rec(const Formula& phi, const TransitionSystem& s,
              std::map<std::string, MsoValue>& env) {
  using K = Formula::Kind;
  switch (phi.kind) {
    case K::edge: {
      Edge e{elem_of(env, phi.var1), phi.name, elem_of(env, phi.var2)};
      return std::binary_search(s.edges().begin(), s.edges().end(), e);
    }
    case K::color:
      return s.color_of(elem_of(env, phi.var1)) == phi.name;
    case K::eq:
      return elem_of(env, phi.var1) == elem_of(env, phi.var2);
    case K::member:
      return set_of(env, phi.var2).count(elem_of(env, phi.var1)) > 0;
    case K::init:
      return elem_of(env, phi.var1) == s.initial();
    case K::neg:
      return !eval_rec(phi.children[0], s, env);
    case K::conj:
      for (const auto& c : phi.children)
        if (!eval_rec(c, s, env)) return false;
      return true;
    case K::disj:
      for (const auto& c : phi.children)
        if (eval_rec(c, s, env)) return true;
      return false;
    case K::exists_elem:
    case K::forall_elem: {
      bool exists = phi.kind == K::exists_elem;
      auto saved = env.find(phi.var1) != env.end() ? std::optional<MsoValue>(env[phi.var1])
                                                   : std::nullopt;
      for (const auto& st : s.states()) {
        env[phi.var1] = st;
        bool v = eval_rec(phi.children[0], s, env);
        if (exists == v) {
          if (saved) env[phi.var1] = *saved; else env.erase(phi.var1);
          return exists;
        }
      }
      if (saved) env[phi.var1] = *saved; else env.erase(phi.var1);
      return !exists;
    }
    case K::exists_set:
    case K::forall_set: {
      bool exists = phi.kind == K::exists_set;
      if (s.states().size() > 20)
        throw Error(Errc::structure_too_large, "set quantifier over > 20 states");
      auto saved = env.find(phi.var1) != env.end() ? std::optional<MsoValue>(env[phi.var1])
                                                   : std::nullopt;
      const std::size_t n = s.states().size();
      for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        std::set<std::string> x;
        for (std::size_t i = 0; i < n; ++i)
          if (mask & (1ULL << i)) x.insert(s.states()[i]);
        env[phi.var1] = std::move(x);
        bool v = eval_rec(phi.children[0], s, env);
        if (exists == v) {
          if (saved) env[phi.var1] = *saved; else env.erase(phi.var1);
          return exists;
        }
      }
      if (saved) env[phi.var1] = *saved; else env.erase(phi.var1);
      return !exists;
    }
  }
  return false;
}

}  // namespace

bool evaluate(const Formula& phi, const TransitionSystem& s,
              const std::map<std::string, MsoValue>& assignment) {
  std::map<std::string, MsoValue> env = assignment;
  return eval_rec(phi, s, env);
}

}  // namespace bmso
