#include "bmso/core.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace bmso {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::syntax: return "SYNTAX";
    case Errc::invalid: return "INVALID";
    case Errc::empty_p: return "EMPTY_P";
    case Errc::color_mismatch: return "COLOR_MISMATCH";
    case Errc::not_a_lasso: return "NOT_A_LASSO";
    case Errc::not_a_klasso: return "NOT_A_KLASSO";
    case Errc::over_bound: return "OVER_BOUND";
    case Errc::unbound_variable: return "UNBOUND_VARIABLE";
    case Errc::rank_too_high: return "RANK_TOO_HIGH";
    case Errc::structure_too_large: return "STRUCTURE_TOO_LARGE";
    case Errc::guard_exceeded: return "GUARD_EXCEEDED";
    case Errc::not_composable: return "NOT_COMPOSABLE";
    case Errc::not_closed: return "NOT_CLOSED";
    case Errc::not_equivalence: return "NOT_EQUIVALENCE";
    case Errc::precondition: return "PRECONDITION";
    case Errc::verify_failed: return "VERIFY_FAILED";
    case Errc::level_unsupported: return "LEVEL_UNSUPPORTED";
    case Errc::not_recognized: return "NOT_RECOGNIZED";
    case Errc::missing_representative: return "MISSING_REPRESENTATIVE";
  }
  return "UNKNOWN";
}

// -- TransitionSystem ------------------------------------------------------

TransitionSystem::TransitionSystem(std::vector<std::string> states, std::string initial,
                                   std::vector<Edge> edges,
                                   std::map<std::string, std::string> colors,
                                   std::map<std::string, std::set<std::string>> marks)
    : states_(std::move(states)),
      edges_(std::move(edges)),
      colors_(std::move(colors)),
      marks_(std::move(marks)),
      initial_(std::move(initial)) {
  std::set<std::string> seen;
  for (const auto& s : states_) {
    if (!seen.insert(s).second)
      throw Error(Errc::invalid, "duplicate state '" + s + "'");
  }
  if (!seen.count(initial_))
    throw Error(Errc::invalid, "initial state '" + initial_ + "' not declared");
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& e : edges_) {
    if (!seen.count(e.from) || !seen.count(e.to))
      throw Error(Errc::invalid, "edge " + e.from + " -" + e.label + "-> " + e.to +
                                     " references an undeclared state");
  }
  for (const auto& [s, c] : colors_) {
    if (!seen.count(s)) throw Error(Errc::invalid, "colored state '" + s + "' not declared");
    if (c.empty()) throw Error(Errc::invalid, "empty color name on state '" + s + "'");
  }
  for (const auto& [m, ss] : marks_) {
    if (m.empty()) throw Error(Errc::invalid, "empty mark name");
    for (const auto& s : ss)
      if (!seen.count(s)) throw Error(Errc::invalid, "marked state '" + s + "' not declared");
  }
}

bool TransitionSystem::has_state(const std::string& s) const {
  return std::find(states_.begin(), states_.end(), s) != states_.end();
}

int TransitionSystem::index_of(const std::string& s) const {
  auto it = std::find(states_.begin(), states_.end(), s);
  return it == states_.end() ? -1 : static_cast<int>(it - states_.begin());
}

std::string TransitionSystem::color_of(const std::string& s) const {
  auto it = colors_.find(s);
  return it == colors_.end() ? std::string() : it->second;
}

bool TransitionSystem::marked(const std::string& mark, const std::string& s) const {
  auto it = marks_.find(mark);
  return it != marks_.end() && it->second.count(s) > 0;
}

std::vector<Edge> TransitionSystem::out_edges(const std::string& s) const {
  std::vector<Edge> out;
  for (const auto& e : edges_)
    if (e.from == s) out.push_back(e);
  return out;  // already sorted, edges_ is sorted
}

// -- paths ------------------------------------------------------------------

PointedPath::PointedPath(std::vector<std::string> cs, std::vector<std::string> ls)
    : colors(std::move(cs)), labels(std::move(ls)) {
  if (colors.empty() || labels.size() + 1 != colors.size())
    throw Error(Errc::invalid, "path needs exactly one more vertex color than edge labels");
}

PointedPath concat(const PointedPath& a, const PointedPath& b) {
  if (a.last_color() != b.first_color())
    throw Error(Errc::color_mismatch, "cannot glue '" + a.last_color() + "' onto '" +
                                          b.first_color() + "'");
  PointedPath r = a;
  r.colors.insert(r.colors.end(), b.colors.begin() + 1, b.colors.end());
  r.labels.insert(r.labels.end(), b.labels.begin(), b.labels.end());
  return r;
}

PointedPath path_power(const PointedPath& p, std::size_t n) {
  if (!p.loopable())
    throw Error(Errc::color_mismatch, "path is not self-composable");
  if (n == 0) return unit_path(p.first_color());
  PointedPath r = p;
  for (std::size_t i = 1; i < n; ++i) r = concat(r, p);
  return r;
}

PointedPath unit_path(const std::string& color) {
  PointedPath p;
  p.colors = {color};
  return p;
}

// -- lassos -------------------------------------------------------------------

Lasso::Lasso(PointedPath t, PointedPath l) : tail(std::move(t)), loop(std::move(l)) {
  if (loop.length() < 1) throw Error(Errc::invalid, "lasso loop must have length >= 1");
  if (tail.last_color() != loop.first_color() || loop.first_color() != loop.last_color())
    throw Error(Errc::color_mismatch, "glued lasso end-points disagree on color");
}

int KLasso::level() const {
  int sub = 0;
  for (const auto& a : attachments) sub = std::max(sub, a.sub.level());
  return attachments.empty() ? 1 : 1 + sub;
}

// -- serialization ------------------------------------------------------------

using nlohmann::json;

TransitionSystem parse_system(const std::string& document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, e.what());
  }
  try {
    if (!j.is_object() || !j.contains("states") || !j.contains("initial") || !j.contains("edges"))
      throw Error(Errc::syntax, "expected object with states/initial/edges");
    std::vector<std::string> states = j.at("states").get<std::vector<std::string>>();
    std::string initial = j.at("initial").get<std::string>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      edges.push_back(Edge{e.at("from").get<std::string>(), e.at("label").get<std::string>(),
                           e.at("to").get<std::string>()});
    }
    std::map<std::string, std::string> colors;
    if (j.contains("colors")) colors = j.at("colors").get<std::map<std::string, std::string>>();
    std::map<std::string, std::set<std::string>> marks;
    if (j.contains("marks"))
      marks = j.at("marks").get<std::map<std::string, std::set<std::string>>>();
    return TransitionSystem(std::move(states), std::move(initial), std::move(edges),
                            std::move(colors), std::move(marks));
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, e.what());
  }
}

std::string serialize_system(const TransitionSystem& s) {
  json j;
  j["colors"] = json::object();
  for (const auto& [st, c] : s.colors()) j["colors"][st] = c;
  j["edges"] = json::array();
  for (const auto& e : s.edges())
    j["edges"].push_back({{"from", e.from}, {"label", e.label}, {"to", e.to}});
  j["initial"] = s.initial();
  if (!s.marks().empty()) {
    j["marks"] = json::object();
    for (const auto& [m, ss] : s.marks()) j["marks"][m] = ss;
  }
  j["states"] = s.states();
  return j.dump(2) + "\n";
}

namespace {

PointedPath path_from_json(const json& j) {
  std::vector<std::string> colors;
  for (const auto& c : j.at("colors")) colors.push_back(c.is_null() ? "" : c.get<std::string>());
  std::vector<std::string> labels = j.at("labels").get<std::vector<std::string>>();
  return PointedPath(std::move(colors), std::move(labels));
}

json path_to_json(const PointedPath& p) {
  return json{{"colors", p.colors}, {"labels", p.labels}};
}

}  // namespace

Lasso parse_lasso(const std::string& document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, e.what());
  }
  try {
    return Lasso(path_from_json(j.at("tail")), path_from_json(j.at("loop")));
  } catch (const json::exception& e) {
    throw Error(Errc::syntax, e.what());
  }
}

std::string serialize_lasso(const Lasso& l) {
  json j;
  j["loop"] = path_to_json(l.loop);
  j["tail"] = path_to_json(l.tail);
  return j.dump(2) + "\n";
}

// -- structural operations -----------------------------------------------------

TransitionSystem disjoint_union(const TransitionSystem& a, const TransitionSystem& b) {
  auto left = [](const std::string& s) { return "L." + s; };
  auto right = [](const std::string& s) { return "R." + s; };
  std::vector<std::string> states;
  std::vector<Edge> edges;
  std::map<std::string, std::string> colors;
  std::map<std::string, std::set<std::string>> marks;
  for (const auto& s : a.states()) states.push_back(left(s));
  for (const auto& s : b.states()) states.push_back(right(s));
  for (const auto& e : a.edges()) edges.push_back({left(e.from), e.label, left(e.to)});
  for (const auto& e : b.edges()) edges.push_back({right(e.from), e.label, right(e.to)});
  for (const auto& [s, c] : a.colors()) colors[left(s)] = c;
  for (const auto& [s, c] : b.colors()) colors[right(s)] = c;
  for (const auto& [m, ss] : a.marks())
    for (const auto& s : ss) marks[m].insert(left(s));
  for (const auto& [m, ss] : b.marks())
    for (const auto& s : ss) marks[m].insert(right(s));
  for (const auto& s : a.states()) marks["Left"].insert(left(s));
  for (const auto& s : b.states()) marks["Right"].insert(right(s));
  return TransitionSystem(std::move(states), left(a.initial()), std::move(edges),
                          std::move(colors), std::move(marks));
}

TransitionSystem fuse(const TransitionSystem& a, const std::string& p) {
  std::set<std::string> merged;
  auto mit = a.marks().find(p);
  if (mit != a.marks().end()) {
    merged = mit->second;
  } else {
    for (const auto& [s, c] : a.colors())
      if (c == p) merged.insert(s);
  }
  if (merged.empty()) throw Error(Errc::empty_p, "no state carries '" + p + "'");

  std::string common_color;
  bool first = true;
  for (const auto& s : merged) {
    std::string c = a.color_of(s);
    if (first) {
      common_color = c;
      first = false;
    } else if (c != common_color) {
      throw Error(Errc::color_mismatch, "fused states disagree on color");
    }
  }

  std::string fresh = "fuse";
  while (a.has_state(fresh)) fresh += "_";
  auto rename = [&](const std::string& s) { return merged.count(s) ? fresh : s; };

  std::vector<std::string> states;
  bool placed = false;
  for (const auto& s : a.states()) {
    if (merged.count(s)) {
      if (!placed) {
        states.push_back(fresh);
        placed = true;
      }
    } else {
      states.push_back(s);
    }
  }
  std::vector<Edge> edges;
  for (const auto& e : a.edges()) edges.push_back({rename(e.from), e.label, rename(e.to)});
  std::map<std::string, std::string> colors;
  for (const auto& [s, c] : a.colors())
    if (!merged.count(s)) colors[s] = c;
  if (!common_color.empty()) colors[fresh] = common_color;
  std::map<std::string, std::set<std::string>> marks;
  for (const auto& [m, ss] : a.marks()) {
    if (m == p) continue;  // the staging set is consumed by the operation
    for (const auto& s : ss) marks[m].insert(rename(s));
  }
  return TransitionSystem(std::move(states), rename(a.initial()), std::move(edges),
                          std::move(colors), std::move(marks));
}

TransitionSystem lasso_to_system(const Lasso& l) {
  const std::size_t t = l.tail.length();
  const std::size_t c = l.loop.length();
  const std::size_t n = t + c;
  auto name = [](std::size_t i) { return "v" + std::to_string(i); };

  std::vector<std::string> states;
  std::map<std::string, std::string> colors;
  for (std::size_t i = 0; i < n; ++i) {
    states.push_back(name(i));
    std::string col = i <= t ? l.tail.colors[i] : l.loop.colors[i - t];
    if (i == t) col = l.loop.colors[0];
    if (!col.empty()) colors[name(i)] = col;
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < t; ++i) edges.push_back({name(i), l.tail.labels[i], name(i + 1)});
  for (std::size_t i = 0; i < c; ++i) {
    std::size_t from = t + i;
    std::size_t to = (i + 1 == c) ? t : t + i + 1;
    edges.push_back({name(from), l.loop.labels[i], name(to)});
  }
  return TransitionSystem(std::move(states), name(0), std::move(edges), std::move(colors));
}

namespace {

void append_klasso(const KLasso& m, const std::string& prefix, std::vector<std::string>& states,
                   std::vector<Edge>& edges, std::map<std::string, std::string>& colors,
                   std::string& initial_out) {
  TransitionSystem host = lasso_to_system(m.main);
  auto name = [&](const std::string& s) { return prefix + s; };
  for (const auto& s : host.states()) states.push_back(name(s));
  for (const auto& e : host.edges()) edges.push_back({name(e.from), e.label, name(e.to)});
  for (const auto& [s, c] : host.colors()) colors[name(s)] = c;
  initial_out = name(host.initial());

  std::size_t ordinal = 0;
  for (const auto& att : m.attachments) {
    if (att.vertex >= host.size())
      throw Error(Errc::invalid, "attachment vertex out of range");
    std::string sub_prefix = prefix + "v" + std::to_string(att.vertex) + "a" +
                             std::to_string(ordinal++) + ".";
    std::string sub_initial;
    append_klasso(att.sub, sub_prefix, states, edges, colors, sub_initial);
    edges.push_back({name("v" + std::to_string(att.vertex)), att.label, sub_initial});
  }
}

}  // namespace

TransitionSystem klasso_to_system(const KLasso& m) {
  std::vector<std::string> states;
  std::vector<Edge> edges;
  std::map<std::string, std::string> colors;
  std::string initial;
  append_klasso(m, "", states, edges, colors, initial);
  return TransitionSystem(std::move(states), initial, std::move(edges), std::move(colors));
}

std::vector<std::string> reachable_states(const TransitionSystem& s) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  std::deque<std::string> queue{s.initial()};
  seen.insert(s.initial());
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    order.push_back(cur);
    for (const auto& e : s.out_edges(cur)) {
      if (seen.insert(e.to).second) queue.push_back(e.to);
    }
  }
  return order;
}

TransitionSystem restrict_reachable(const TransitionSystem& s, const std::string& root) {
  if (!s.has_state(root)) throw Error(Errc::invalid, "unknown state '" + root + "'");
  TransitionSystem rooted(s.states(), root, s.edges(), s.colors(), s.marks());
  std::vector<std::string> keep = reachable_states(rooted);
  std::set<std::string> keep_set(keep.begin(), keep.end());
  std::vector<Edge> edges;
  for (const auto& e : s.edges())
    if (keep_set.count(e.from) && keep_set.count(e.to)) edges.push_back(e);
  std::map<std::string, std::string> colors;
  for (const auto& [st, c] : s.colors())
    if (keep_set.count(st)) colors[st] = c;
  std::map<std::string, std::set<std::string>> marks;
  for (const auto& [m, ss] : s.marks()) {
    std::set<std::string> kept;
    for (const auto& st : ss)
      if (keep_set.count(st)) kept.insert(st);
    if (!kept.empty()) marks[m] = kept;
  }
  return TransitionSystem(std::move(keep), root, std::move(edges), std::move(colors),
                          std::move(marks));
}

Lasso lasso_decompose(const TransitionSystem& s) {
  std::vector<std::string> reach = reachable_states(s);
  if (reach.size() != s.size())
    throw Error(Errc::not_a_lasso, "unreachable states");
  for (const auto& st : s.states()) {
    if (s.out_edges(st).size() != 1)
      throw Error(Errc::not_a_lasso, "state '" + st + "' has out-degree != 1");
  }
  std::vector<std::string> walk;
  std::map<std::string, std::size_t> pos;
  std::string cur = s.initial();
  while (!pos.count(cur)) {
    pos[cur] = walk.size();
    walk.push_back(cur);
    cur = s.out_edges(cur)[0].to;
  }
  std::size_t j = pos[cur];
  auto label_after = [&](std::size_t i) { return s.out_edges(walk[i])[0].label; };

  std::vector<std::string> tail_colors, tail_labels, loop_colors, loop_labels;
  for (std::size_t i = 0; i <= j; ++i) tail_colors.push_back(s.color_of(walk[i]));
  for (std::size_t i = 0; i < j; ++i) tail_labels.push_back(label_after(i));
  for (std::size_t i = j; i < walk.size(); ++i) loop_colors.push_back(s.color_of(walk[i]));
  loop_colors.push_back(s.color_of(walk[j]));
  for (std::size_t i = j; i < walk.size(); ++i) loop_labels.push_back(label_after(i));
  return Lasso(PointedPath(std::move(tail_colors), std::move(tail_labels)),
               PointedPath(std::move(loop_colors), std::move(loop_labels)));
}

// -- hierarchical lasso recognition ----------------------------------------------

namespace {

/// Recognition works on the forward closure of each candidate root. An edge
/// (cur,a,t) can carry an attachment iff cur is outside the closure of t and
/// that closure has exactly one incoming edge from outside it.
class KlassoRecognizer {
public:
  explicit KlassoRecognizer(const TransitionSystem& s) : s_(s) {
    const auto& states = s.states();
    for (std::size_t i = 0; i < states.size(); ++i) idx_[states[i]] = static_cast<int>(i);
    out_.resize(states.size());
    for (const auto& e : s.edges()) out_[idx_[e.from]].push_back(e);
  }

  std::optional<KLasso> recognize(const std::string& root) { return recognize(idx_.at(root)); }

private:
  const std::set<int>& closure(int v) {
    auto it = closure_.find(v);
    if (it != closure_.end()) return it->second;
    std::set<int> seen{v};
    std::deque<int> queue{v};
    while (!queue.empty()) {
      int cur = queue.front();
      queue.pop_front();
      for (const auto& e : out_[cur]) {
        int t = idx_[e.to];
        if (seen.insert(t).second) queue.push_back(t);
      }
    }
    return closure_.emplace(v, std::move(seen)).first->second;
  }

  int entries_into(const std::set<int>& region) {
    int count = 0;
    for (const auto& e : s_.edges())
      if (region.count(idx_[e.to]) && !region.count(idx_[e.from])) ++count;
    return count;
  }

  bool attachable(int cur, int target) {
    const std::set<int>& r = closure(target);
    if (r.count(cur)) return false;
    auto eit = entry_memo_.find(target);
    int entries = eit != entry_memo_.end() ? eit->second : entries_into(r);
    entry_memo_[target] = entries;
    if (entries != 1) return false;
    return recognize(target).has_value();
  }

  std::optional<KLasso> recognize(int root) {
    auto it = memo_.find(root);
    if (it != memo_.end()) return it->second;
    memo_[root] = std::nullopt;  // guards against re-entry; regions never contain their host
    std::vector<int> spine{root};
    std::map<int, std::size_t> pos{{root, 0}};
    std::vector<std::string> labels;
    std::vector<KLassoAttachment> atts;
    std::optional<KLasso> best;
    walk(spine, pos, labels, atts, best);
    memo_[root] = best;
    return best;
  }

  void consider(const std::vector<int>& spine, const std::vector<std::string>& labels,
                std::size_t close_at, const std::string& close_label,
                std::vector<KLassoAttachment> atts, std::optional<KLasso>& best) {
    auto color = [&](int v) { return s_.color_of(s_.states()[v]); };
    std::vector<std::string> tail_colors, loop_colors, tail_labels, loop_labels;
    for (std::size_t i = 0; i <= close_at; ++i) tail_colors.push_back(color(spine[i]));
    for (std::size_t i = 0; i < close_at; ++i) tail_labels.push_back(labels[i]);
    for (std::size_t i = close_at; i < spine.size(); ++i) loop_colors.push_back(color(spine[i]));
    loop_colors.push_back(color(spine[close_at]));
    for (std::size_t i = close_at; i + 1 < spine.size(); ++i) loop_labels.push_back(labels[i]);
    loop_labels.push_back(close_label);
    KLasso cand;
    cand.main = Lasso(PointedPath(std::move(tail_colors), std::move(tail_labels)),
                      PointedPath(std::move(loop_colors), std::move(loop_labels)));
    std::stable_sort(atts.begin(), atts.end(), [](const KLassoAttachment& a, const KLassoAttachment& b) {
      return std::tie(a.vertex, a.label) < std::tie(b.vertex, b.label);
    });
    cand.attachments = std::move(atts);
    if (!best || cand.level() < best->level()) best = std::move(cand);
  }

  void walk(std::vector<int>& spine, std::map<int, std::size_t>& pos,
            std::vector<std::string>& labels, std::vector<KLassoAttachment>& atts,
            std::optional<KLasso>& best) {
    int cur = spine.back();
    const auto& outE = out_[cur];
    if (outE.empty()) return;

    std::vector<const Edge*> closing, forced, free_edges;
    for (const auto& e : outE) {
      int t = idx_[e.to];
      if (pos.count(t))
        closing.push_back(&e);
      else if (!attachable(cur, t))
        forced.push_back(&e);
      else
        free_edges.push_back(&e);
    }
    if (closing.size() + forced.size() > 1) return;

    auto attach_rest = [&](const Edge* spine_edge, std::vector<KLassoAttachment>& acc) {
      for (const auto& e : outE) {
        if (&e == spine_edge) continue;
        auto sub = recognize(idx_[e.to]);
        if (!sub) return false;  // cannot happen: only free edges remain
        acc.push_back({pos.at(cur), e.label, *sub});
      }
      return true;
    };

    if (closing.size() == 1) {
      std::vector<KLassoAttachment> acc = atts;
      if (!attach_rest(closing[0], acc)) return;
      consider(spine, labels, pos.at(idx_[closing[0]->to]), closing[0]->label, std::move(acc), best);
      return;
    }
    std::vector<const Edge*> spine_candidates = forced.empty() ? free_edges : forced;
    for (const Edge* se : spine_candidates) {
      std::vector<KLassoAttachment> acc = atts;
      bool ok = true;
      for (const auto& e : outE) {
        if (&e == se) continue;
        if (!attachable(cur, idx_[e.to])) { ok = false; break; }
        acc.push_back({pos.at(cur), e.label, *recognize(idx_[e.to])});
      }
      if (!ok) continue;
      int t = idx_[se->to];
      spine.push_back(t);
      pos[t] = spine.size() - 1;
      labels.push_back(se->label);
      std::vector<KLassoAttachment> saved = std::move(atts);
      atts = std::move(acc);
      walk(spine, pos, labels, atts, best);
      atts = std::move(saved);
      labels.pop_back();
      pos.erase(t);
      spine.pop_back();
    }
  }

  const TransitionSystem& s_;
  std::unordered_map<std::string, int> idx_;
  std::vector<std::vector<Edge>> out_;
  std::map<int, std::set<int>> closure_;
  std::map<int, int> entry_memo_;
  std::map<int, std::optional<KLasso>> memo_;
};

}  // namespace

KLasso klasso_recognize(const TransitionSystem& s) {
  std::vector<std::string> reach = reachable_states(s);
  if (reach.size() != s.size()) throw Error(Errc::not_a_klasso, "unreachable states");
  SccReport scc = scc_condensation(s);
  for (const auto& c : scc.components)
    if (c.kind == SccKind::other)
      throw Error(Errc::not_a_klasso, "a strongly connected component is neither a singleton nor a cycle");
  KlassoRecognizer rec(s);
  auto result = rec.recognize(s.initial());
  if (!result) throw Error(Errc::not_a_klasso, "no hierarchical lasso decomposition exists");
  return *result;
}

// -- SCC analysis ---------------------------------------------------------------

SccReport scc_condensation(const TransitionSystem& s) {
  std::vector<std::string> reach = reachable_states(s);
  std::unordered_map<std::string, int> idx;
  for (std::size_t i = 0; i < reach.size(); ++i) idx[reach[i]] = static_cast<int>(i);
  const int n = static_cast<int>(reach.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : s.edges()) {
    auto fi = idx.find(e.from);
    auto ti = idx.find(e.to);
    if (fi != idx.end() && ti != idx.end()) adj[fi->second].push_back(ti->second);
  }

  // Tarjan, iterative.
  std::vector<int> low(n, -1), num(n, -1), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0;
  std::vector<std::vector<int>> comps;
  struct Frame {
    int v;
    std::size_t ei;
  };
  for (int root = 0; root < n; ++root) {
    if (num[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    num[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.ei < adj[f.v].size()) {
        int w = adj[f.v][f.ei++];
        if (num[w] == -1) {
          num[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], num[w]);
        }
      } else {
        if (low[f.v] == num[f.v]) {
          std::vector<int> members;
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp[w] = static_cast<int>(comps.size());
            members.push_back(w);
            if (w == f.v) break;
          }
          std::sort(members.begin(), members.end());
          comps.push_back(std::move(members));
        }
        int v = f.v;
        frames.pop_back();
        if (!frames.empty()) frames.back().ei, low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }

  SccReport report;
  report.component_of = comp;
  std::set<std::pair<int, int>> cond;
  for (int v = 0; v < n; ++v)
    for (int w : adj[v])
      if (comp[v] != comp[w]) cond.insert({comp[v], comp[w]});
  report.condensation.assign(cond.begin(), cond.end());

  for (std::size_t ci = 0; ci < comps.size(); ++ci) {
    SccComponent c;
    for (int v : comps[ci]) c.members.push_back(reach[v]);
    std::set<int> inside(comps[ci].begin(), comps[ci].end());
    bool has_inner_edge = false;
    bool functional = true;  // exactly one inside successor per member
    for (int v : comps[ci]) {
      int inner = 0;
      for (int w : adj[v])
        if (inside.count(w)) ++inner;
      if (inner > 0) has_inner_edge = true;
      if (inner != 1) functional = false;
    }
    if (comps[ci].size() == 1 && !has_inner_edge)
      c.kind = SccKind::singleton_no_loop;
    else if (functional)
      c.kind = SccKind::cycle;
    else
      c.kind = SccKind::other;
    report.components.push_back(std::move(c));
  }
  return report;
}

// -- canonical form and isomorphism ------------------------------------------------

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

uint64_t str_hash(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Iterated neighbourhood refinement; a label-independent vertex invariant.
std::vector<uint64_t> wl_signatures(const TransitionSystem& s) {
  const auto& states = s.states();
  const int n = static_cast<int>(states.size());
  std::unordered_map<std::string, int> idx;
  for (int i = 0; i < n; ++i) idx[states[i]] = i;
  std::vector<std::vector<std::pair<uint64_t, int>>> out(n), in(n);
  for (const auto& e : s.edges()) {
    out[idx[e.from]].push_back({str_hash(e.label), idx[e.to]});
    in[idx[e.to]].push_back({str_hash(e.label), idx[e.from]});
  }
  std::vector<uint64_t> sig(n);
  for (int i = 0; i < n; ++i) {
    uint64_t h = str_hash(s.color_of(states[i]));
    for (const auto& [m, ss] : s.marks())
      if (ss.count(states[i])) h = mix(h, str_hash(m));
    h = mix(h, states[i] == s.initial() ? 7 : 3);
    sig[i] = h;
  }
  for (int round = 0; round < n; ++round) {
    std::vector<uint64_t> next(n);
    for (int i = 0; i < n; ++i) {
      std::vector<uint64_t> parts;
      for (auto [lh, j] : out[i]) parts.push_back(mix(mix(11, lh), sig[j]));
      std::sort(parts.begin(), parts.end());
      uint64_t h = mix(sig[i], 13);
      for (uint64_t p : parts) h = mix(h, p);
      parts.clear();
      for (auto [lh, j] : in[i]) parts.push_back(mix(mix(17, lh), sig[j]));
      std::sort(parts.begin(), parts.end());
      for (uint64_t p : parts) h = mix(h, p);
      next[i] = h;
    }
    sig = std::move(next);
  }
  return sig;
}

}  // namespace

TransitionSystem canonical_form(const TransitionSystem& s) {
  std::vector<std::string> reach = reachable_states(s);
  std::vector<uint64_t> wl = wl_signatures(s);
  std::unordered_map<std::string, int> sidx;
  for (std::size_t i = 0; i < s.states().size(); ++i) sidx[s.states()[i]] = static_cast<int>(i);

  std::map<std::string, int> rank;
  std::vector<std::string> order;
  std::deque<std::string> queue{s.initial()};
  rank[s.initial()] = 0;
  order.push_back(s.initial());
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    auto out = s.out_edges(cur);
    std::stable_sort(out.begin(), out.end(), [&](const Edge& a, const Edge& b) {
      if (a.label != b.label) return a.label < b.label;
      auto ra = rank.count(a.to) ? rank[a.to] : INT32_MAX;
      auto rb = rank.count(b.to) ? rank[b.to] : INT32_MAX;
      if (ra != rb) return ra < rb;
      std::string ca = s.color_of(a.to), cb = s.color_of(b.to);
      if (ca != cb) return ca < cb;
      uint64_t wa = wl[sidx[a.to]], wb = wl[sidx[b.to]];
      if (wa != wb) return wa < wb;
      return a.to < b.to;
    });
    for (const auto& e : out) {
      if (!rank.count(e.to)) {
        rank[e.to] = static_cast<int>(order.size());
        order.push_back(e.to);
        queue.push_back(e.to);
      }
    }
  }
  // Unreachable states are dropped; canonical forms compare reachable parts.
  auto name = [&](const std::string& st) { return "s" + std::to_string(rank[st]); };
  std::vector<std::string> states;
  for (const auto& st : order) states.push_back(name(st));
  std::vector<Edge> edges;
  for (const auto& e : s.edges())
    if (rank.count(e.from) && rank.count(e.to)) edges.push_back({name(e.from), e.label, name(e.to)});
  std::map<std::string, std::string> colors;
  for (const auto& st : order) {
    std::string c = s.color_of(st);
    if (!c.empty()) colors[name(st)] = c;
  }
  std::map<std::string, std::set<std::string>> marks;
  for (const auto& [m, ss] : s.marks()) {
    std::set<std::string> kept;
    for (const auto& st : ss)
      if (rank.count(st)) kept.insert(name(st));
    if (!kept.empty()) marks[m] = kept;
  }
  return TransitionSystem(std::move(states), name(s.initial()), std::move(edges),
                          std::move(colors), std::move(marks));
}

namespace {

/// Exact backtracking isomorphism on the reachable parts; fallback for the
/// rare shapes where BFS relabelling has unresolved ties.
bool exact_isomorphic(const TransitionSystem& a, const TransitionSystem& b) {
  std::vector<std::string> ra = reachable_states(a), rb = reachable_states(b);
  const int n = static_cast<int>(ra.size());
  if (n != static_cast<int>(rb.size())) return false;
  std::unordered_map<std::string, int> ia, ib;
  for (int i = 0; i < n; ++i) ia[ra[i]] = i;
  for (int i = 0; i < n; ++i) ib[rb[i]] = i;

  auto edge_key = [](const TransitionSystem& s, const std::unordered_map<std::string, int>& id) {
    std::set<std::tuple<int, std::string, int>> es;
    for (const auto& e : s.edges())
      if (id.count(e.from) && id.count(e.to))
        es.insert({id.at(e.from), e.label, id.at(e.to)});
    return es;
  };
  auto ea = edge_key(a, ia), eb = edge_key(b, ib);
  if (ea.size() != eb.size()) return false;

  std::vector<std::vector<std::pair<std::string, int>>> outa(n), outb(n), ina(n), inb(n);
  for (const auto& [f, l, t] : ea) {
    outa[f].push_back({l, t});
    ina[t].push_back({l, f});
  }
  for (const auto& [f, l, t] : eb) {
    outb[f].push_back({l, t});
    inb[t].push_back({l, f});
  }

  auto node_tag = [&](const TransitionSystem& s, const std::vector<std::string>& names, int i) {
    std::string tag = s.color_of(names[i]) + "|";
    for (const auto& [m, ss] : s.marks())
      if (ss.count(names[i])) tag += m + ",";
    return tag;
  };

  std::vector<int> map_ab(n, -1), map_ba(n, -1);
  std::function<bool(int)> extend = [&](int i) -> bool {
    if (i == n) return true;
    for (int j = 0; j < n; ++j) {
      if (map_ba[j] != -1) continue;
      if (i == 0 && rb[j] != b.initial()) continue;
      if (ra[i] == a.initial() && rb[j] != b.initial()) continue;
      if (node_tag(a, ra, i) != node_tag(b, rb, j)) continue;
      if (outa[i].size() != outb[j].size() || ina[i].size() != inb[j].size()) continue;
      bool ok = true;
      for (const auto& [l, t] : outa[i]) {
        if (map_ab[t] != -1 && !eb.count({j, l, map_ab[t]})) { ok = false; break; }
      }
      if (ok)
        for (const auto& [l, f] : ina[i]) {
          if (map_ab[f] != -1 && !eb.count({map_ab[f], l, j})) { ok = false; break; }
        }
      // also ensure no spurious b-edges between mapped nodes
      if (ok)
        for (const auto& [l, t] : outb[j]) {
          if (map_ba[t] != -1 && !ea.count({i, l, map_ba[t]})) { ok = false; break; }
        }
      if (ok)
        for (const auto& [l, f] : inb[j]) {
          if (map_ba[f] != -1 && !ea.count({map_ba[f], l, i})) { ok = false; break; }
        }
      if (!ok) continue;
      map_ab[i] = j;
      map_ba[j] = i;
      if (extend(i + 1)) return true;
      map_ab[i] = -1;
      map_ba[j] = -1;
    }
    return false;
  };
  return extend(0);
}

}  // namespace

bool isomorphic(const TransitionSystem& a, const TransitionSystem& b) {
  TransitionSystem ca = canonical_form(a), cb = canonical_form(b);
  if (ca == cb) return true;
  if (ca.size() != cb.size() || ca.edges().size() != cb.edges().size()) return false;
  return exact_isomorphic(a, b);
}

}  // namespace bmso
