#include "bmso/bisim.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace bmso {

namespace {

struct SumState {
  int sys;  // 0 = left, 1 = right
  std::string name;
};

std::string unary_key(const TransitionSystem& s, const std::string& st) {
  std::string key = s.color_of(st) + "\x1f";
  for (const auto& [m, ss] : s.marks())
    if (ss.count(st)) key += m + "\x1f";
  return key;
}

/// Coarsest partition of the disjoint sum stable under
/// (label -> successor block set). Returns blocks and the round at which the
/// two initial states were first separated (-1 = never).
struct Refinement {
  std::vector<int> block;  // per sum-state index
  int split_round = -1;
  int rounds = 0;
};

Refinement refine_sum(const TransitionSystem& a, const TransitionSystem& b) {
  std::vector<SumState> states;
  for (const auto& st : a.states()) states.push_back({0, st});
  for (const auto& st : b.states()) states.push_back({1, st});
  const int n = static_cast<int>(states.size());
  const int init_a = a.index_of(a.initial());
  const int init_b = static_cast<int>(a.states().size()) + b.index_of(b.initial());

  std::vector<std::vector<std::pair<std::string, int>>> out(n);
  std::map<std::pair<int, std::string>, int> sidx;
  for (int i = 0; i < n; ++i) sidx[{states[i].sys, states[i].name}] = i;
  for (const auto& e : a.edges()) out[sidx[{0, e.from}]].push_back({e.label, sidx[{0, e.to}]});
  for (const auto& e : b.edges()) out[sidx[{1, e.from}]].push_back({e.label, sidx[{1, e.to}]});

  Refinement r;
  r.block.resize(n);
  {
    std::map<std::string, int> ids;
    for (int i = 0; i < n; ++i) {
      std::string key =
          states[i].sys == 0 ? unary_key(a, states[i].name) : unary_key(b, states[i].name);
      auto [it, fresh] = ids.emplace(key, static_cast<int>(ids.size()));
      r.block[i] = it->second;
    }
  }
  if (r.block[init_a] != r.block[init_b]) r.split_round = 0;

  while (true) {
    ++r.rounds;
    std::map<std::pair<int, std::set<std::pair<std::string, int>>>, int> ids;
    std::vector<int> next(n);
    for (int i = 0; i < n; ++i) {
      std::set<std::pair<std::string, int>> succ;
      for (const auto& [l, j] : out[i]) succ.insert({l, r.block[j]});
      auto [it, fresh] = ids.emplace(std::make_pair(r.block[i], std::move(succ)),
                                     static_cast<int>(ids.size()));
      next[i] = it->second;
    }
    bool changed = next != r.block;
    r.block = std::move(next);
    if (r.split_round == -1 && r.block[init_a] != r.block[init_b]) r.split_round = r.rounds;
    if (!changed) break;
  }
  return r;
}

}  // namespace

BisimWitness bisimilar(const TransitionSystem& a, const TransitionSystem& b) {
  Refinement r = refine_sum(a, b);
  const int na = static_cast<int>(a.states().size());
  const int init_a = a.index_of(a.initial());
  const int init_b = na + b.index_of(b.initial());

  BisimWitness w;
  w.related = r.block[init_a] == r.block[init_b];
  if (!w.related) {
    w.distinguishing_depth = r.split_round;
    return w;
  }
  for (int i = 0; i < na; ++i)
    for (std::size_t j = 0; j < b.states().size(); ++j)
      if (r.block[i] == r.block[na + static_cast<int>(j)])
        w.relation.push_back({a.states()[i], b.states()[j]});
  return w;
}

BisimWitness naive_bisim(const TransitionSystem& a, const TransitionSystem& b,
                         std::size_t bound) {
  if (a.size() > bound || b.size() > bound)
    throw Error(Errc::over_bound, "oracle bound is " + std::to_string(bound) + " states");
  const auto& sa = a.states();
  const auto& sb = b.states();
  std::vector<std::vector<bool>> rel(sa.size(), std::vector<bool>(sb.size(), false));
  for (std::size_t i = 0; i < sa.size(); ++i)
    for (std::size_t j = 0; j < sb.size(); ++j)
      rel[i][j] = unary_key(a, sa[i]) == unary_key(b, sb[j]);

  auto holds = [&](const std::vector<std::vector<bool>>& z, std::size_t i, std::size_t j) {
    for (const auto& e : a.out_edges(sa[i])) {
      bool matched = false;
      for (const auto& f : b.out_edges(sb[j])) {
        if (f.label != e.label) continue;
        if (z[a.index_of(e.to)][b.index_of(f.to)]) { matched = true; break; }
      }
      if (!matched) return false;
    }
    for (const auto& f : b.out_edges(sb[j])) {
      bool matched = false;
      for (const auto& e : a.out_edges(sa[i])) {
        if (e.label != f.label) continue;
        if (z[a.index_of(e.to)][b.index_of(f.to)]) { matched = true; break; }
      }
      if (!matched) return false;
    }
    return true;
  };

  int round = 0;
  int init_dropped = -1;
  const std::size_t ia = static_cast<std::size_t>(a.index_of(a.initial()));
  const std::size_t ib = static_cast<std::size_t>(b.index_of(b.initial()));
  if (!rel[ia][ib]) init_dropped = 0;
  while (true) {
    ++round;
    bool changed = false;
    auto prev = rel;
    for (std::size_t i = 0; i < sa.size(); ++i)
      for (std::size_t j = 0; j < sb.size(); ++j)
        if (prev[i][j] && !holds(prev, i, j)) {
          rel[i][j] = false;
          changed = true;
        }
    if (init_dropped == -1 && !rel[ia][ib]) init_dropped = round;
    if (!changed) break;
  }

  BisimWitness w;
  w.related = rel[ia][ib];
  if (!w.related) {
    w.distinguishing_depth = init_dropped;
    return w;
  }
  for (std::size_t i = 0; i < sa.size(); ++i)
    for (std::size_t j = 0; j < sb.size(); ++j)
      if (rel[i][j]) w.relation.push_back({sa[i], sb[j]});
  return w;
}

bool check_bisimulation(const TransitionSystem& a, const TransitionSystem& b,
                        const std::vector<std::pair<std::string, std::string>>& relation) {
  std::set<std::pair<std::string, std::string>> z(relation.begin(), relation.end());
  if (!z.count({a.initial(), b.initial()})) return false;
  for (const auto& [s, t] : z) {
    if (unary_key(a, s) != unary_key(b, t)) return false;
    for (const auto& e : a.out_edges(s)) {
      bool matched = false;
      for (const auto& f : b.out_edges(t))
        if (f.label == e.label && z.count({e.to, f.to})) { matched = true; break; }
      if (!matched) return false;
    }
    for (const auto& f : b.out_edges(t)) {
      bool matched = false;
      for (const auto& e : a.out_edges(s))
        if (e.label == f.label && z.count({e.to, f.to})) { matched = true; break; }
      if (!matched) return false;
    }
  }
  return true;
}

TransitionSystem quotient(const TransitionSystem& s) {
  Refinement r = refine_sum(s, s);
  const int n = static_cast<int>(s.states().size());
  // Renumber blocks by first occurrence so names are deterministic.
  std::map<int, int> renumber;
  for (int i = 0; i < n; ++i)
    renumber.emplace(r.block[i], static_cast<int>(renumber.size()));
  auto cls = [&](const std::string& st) { return renumber.at(r.block[s.index_of(st)]); };
  auto name = [](int c) { return "c" + std::to_string(c); };

  std::vector<std::string> states;
  for (int c = 0; c < static_cast<int>(renumber.size()); ++c) states.push_back(name(c));
  std::vector<Edge> edges;
  for (const auto& e : s.edges()) edges.push_back({name(cls(e.from)), e.label, name(cls(e.to))});
  std::map<std::string, std::string> colors;
  std::map<std::string, std::set<std::string>> marks;
  for (const auto& st : s.states()) {
    std::string c = s.color_of(st);
    if (!c.empty()) colors[name(cls(st))] = c;
    for (const auto& [m, ss] : s.marks())
      if (ss.count(st)) marks[m].insert(name(cls(st)));
  }
  return TransitionSystem(std::move(states), name(cls(s.initial())), std::move(edges),
                          std::move(colors), std::move(marks));
}

UnravelTree unravel(const TransitionSystem& s, std::size_t depth) {
  UnravelTree result;
  result.depth = depth;

  struct Node {
    std::string state;
    std::size_t level;
  };
  std::vector<Node> nodes{{s.initial(), 0}};
  std::vector<Edge> edges;
  std::deque<std::size_t> queue{0};
  auto name = [](std::size_t i) { return "t" + std::to_string(i); };
  while (!queue.empty()) {
    std::size_t cur = queue.front();
    queue.pop_front();
    if (nodes[cur].level == depth) continue;
    for (const auto& e : s.out_edges(nodes[cur].state)) {
      std::size_t child = nodes.size();
      if (child > (1u << 20))
        throw Error(Errc::over_bound, "unravelling exceeds the size cap");
      nodes.push_back({e.to, nodes[cur].level + 1});
      edges.push_back({name(cur), e.label, name(child)});
      queue.push_back(child);
    }
  }
  std::vector<std::string> states;
  std::map<std::string, std::string> colors;
  std::map<std::string, std::set<std::string>> marks;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    states.push_back(name(i));
    std::string c = s.color_of(nodes[i].state);
    if (!c.empty()) colors[name(i)] = c;
    for (const auto& [m, ss] : s.marks())
      if (ss.count(nodes[i].state)) marks[m].insert(name(i));
    if (nodes[i].level == depth) marks[kFrontierMark].insert(name(i));
    result.projection[name(i)] = nodes[i].state;
  }
  result.tree = TransitionSystem(std::move(states), name(0), std::move(edges), std::move(colors),
                                 std::move(marks));
  return result;
}

}  // namespace bmso
