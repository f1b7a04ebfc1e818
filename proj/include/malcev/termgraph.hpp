#pragma once

// Labelled directed graphs encoding plus-free relation terms. The graph of a
// term is grown from a single edge y1 -> y2 labelled by the whole term:
// an intersection splits an edge into two parallel edges, a composition
// splits it into two serial edges through a fresh vertex. Expansion is
// leftmost-outermost (root connective first, then the left subterm fully,
// then the right), and fresh vertices are numbered in creation order, so the
// construction is canonical.

#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "binrel.hpp"
#include "relterm.hpp"

namespace malcev {

// ============================================================================
// Graph type
// ============================================================================

struct LabelledEdge {
    int from = 0;  // vertices are 1-based
    int to = 0;
    VarId label;

    friend bool operator==(const LabelledEdge& a, const LabelledEdge& b) {
        return a.from == b.from && a.to == b.to && a.label == b.label;
    }
};

class LabelledGraph {
public:
    explicit LabelledGraph(int vertex_count = 2) : vertex_count_(vertex_count) {
        if (vertex_count < 2) throw std::invalid_argument("LabelledGraph: needs at least the two endpoints");
    }

    int vertex_count() const { return vertex_count_; }
    int add_vertex() { return ++vertex_count_; }

    void add_edge(int from, int to, VarId label) {
        check_vertex(from);
        check_vertex(to);
        edges_.push_back(LabelledEdge{from, to, std::move(label)});
    }

    const std::vector<LabelledEdge>& edges() const { return edges_; }

    std::vector<VarId> labels() const {
        std::map<int, VarId> seen;
        for (const LabelledEdge& e : edges_) seen.emplace(e.label.index, e.label);
        std::vector<VarId> out;
        out.reserve(seen.size());
        for (auto& [_, v] : seen) out.push_back(v);
        return out;
    }

private:
    void check_vertex(int v) const {
        if (v < 1 || v > vertex_count_) throw std::out_of_range("LabelledGraph: vertex out of range");
    }

    int vertex_count_;
    std::vector<LabelledEdge> edges_;
};

// ============================================================================
// Construction from terms
// ============================================================================

namespace detail {

inline void expand_edge(const RelTerm& t, int from, int to, LabelledGraph& g) {
    switch (t.kind()) {
        case TermKind::variable:
            g.add_edge(from, to, t.var());
            return;
        case TermKind::meet:
            expand_edge(t.left(), from, to, g);
            expand_edge(t.right(), from, to, g);
            return;
        case TermKind::compose: {
            int mid = g.add_vertex();
            expand_edge(t.left(), from, mid, g);
            expand_edge(t.right(), mid, to, g);
            return;
        }
        case TermKind::plus:
            throw std::invalid_argument("build_graph: term contains '+'");
    }
}

} // namespace detail

inline LabelledGraph build_graph(const RelTerm& t) {
    LabelledGraph g(2);
    detail::expand_edge(t, 1, 2, g);
    return g;
}

// ============================================================================
// Edge pairs per label
// ============================================================================

// For each label, the (from, to) vertex pairs of its edges in edge-creation
// order. Labels are listed in ascending variable-index order.
class EdgePairs {
public:
    explicit EdgePairs(const LabelledGraph& g) {
        std::map<int, std::size_t> pos;
        for (const LabelledEdge& e : g.edges()) {
            auto it = pos.find(e.label.index);
            if (it == pos.end()) {
                it = pos.emplace(e.label.index, groups_.size()).first;
                groups_.emplace_back(e.label, std::vector<std::pair<int, int>>{});
            }
            groups_[it->second].second.emplace_back(e.from, e.to);
        }
        std::sort(groups_.begin(), groups_.end(),
                  [](const auto& a, const auto& b) { return a.first.index < b.first.index; });
    }

    const std::vector<std::pair<VarId, std::vector<std::pair<int, int>>>>& groups() const {
        return groups_;
    }

    const std::vector<std::pair<int, int>>* find(const VarId& v) const {
        for (const auto& [label, pairs] : groups_)
            if (label == v) return &pairs;
        return nullptr;
    }

    // Number of edges carrying this label (0 when absent).
    int cardinality(const VarId& v) const {
        const auto* p = find(v);
        return p ? static_cast<int>(p->size()) : 0;
    }

private:
    std::vector<std::pair<VarId, std::vector<std::pair<int, int>>>> groups_;
};

inline EdgePairs edge_pairs(const LabelledGraph& g) { return EdgePairs(g); }

// ============================================================================
// Vertex partitions
// ============================================================================

// Partition of {1, ..., size} into the equivalence classes generated by a
// pair list; each class is represented by its smallest member.
class VertexPartition {
public:
    VertexPartition(int size, const std::vector<std::pair<int, int>>& pairs) : parent_(size + 1) {
        if (size < 1) throw std::invalid_argument("VertexPartition: empty domain");
        std::iota(parent_.begin(), parent_.end(), 0);
        for (auto [a, b] : pairs) {
            check(a, size);
            check(b, size);
            unite(a, b);
        }
        // Canonicalize: representative = smallest member of the class.
        std::vector<int> smallest(size + 1, 0);
        for (int v = 1; v <= size; ++v) {
            int r = find(v);
            if (smallest[r] == 0) smallest[r] = v;
        }
        rep_.assign(size + 1, 0);
        for (int v = 1; v <= size; ++v) rep_[v] = smallest[find(v)];
    }

    int size() const { return static_cast<int>(rep_.size()) - 1; }
    int representative(int v) const {
        if (v < 1 || v > size()) throw std::out_of_range("VertexPartition: element out of range");
        return rep_[v];
    }
    bool same_class(int a, int b) const { return representative(a) == representative(b); }

    // Classes sorted by representative; members ascending.
    std::vector<std::vector<int>> classes() const {
        std::map<int, std::vector<int>> by_rep;
        for (int v = 1; v <= size(); ++v) by_rep[rep_[v]].push_back(v);
        std::vector<std::vector<int>> out;
        out.reserve(by_rep.size());
        for (auto& [_, members] : by_rep) out.push_back(std::move(members));
        return out;
    }

    std::size_t max_class_size() const {
        std::size_t best = 0;
        for (const auto& c : classes()) best = std::max(best, c.size());
        return best;
    }

private:
    static void check(int v, int size) {
        if (v < 1 || v > size) throw std::out_of_range("VertexPartition: pair element out of range");
    }
    int find(int v) {
        while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
        return v;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

    std::vector<int> parent_;
    std::vector<int> rep_;
};

inline VertexPartition vertex_partition(const LabelledGraph& g, const VarId& label) {
    const auto* pairs = edge_pairs(g).find(label);
    static const std::vector<std::pair<int, int>> none;
    return VertexPartition(g.vertex_count(), pairs ? *pairs : none);
}

// ============================================================================
// Graph regularity
// ============================================================================

// A graph is regular when no vertex has two incident edges (in either
// direction) with the same label.
inline bool graph_is_regular(const LabelledGraph& g) {
    std::vector<std::map<int, int>> incident(g.vertex_count() + 1);
    for (std::size_t idx = 0; idx < g.edges().size(); ++idx) {
        const LabelledEdge& e = g.edges()[idx];
        for (int v : {e.from, e.to}) {
            auto [it, inserted] = incident[v].emplace(e.label.index, static_cast<int>(idx));
            if (!inserted && it->second != static_cast<int>(idx)) return false;
        }
    }
    return true;
}

// ============================================================================
// Assignments
// ============================================================================

using RelEnv = std::map<VarId, BinRel>;

namespace detail {

inline const BinRel& env_lookup(const RelEnv& env, const VarId& v) {
    auto it = env.find(v);
    if (it == env.end()) throw std::invalid_argument("no relation bound to variable " + v.display());
    return it->second;
}

inline int env_universe(const RelEnv& env) {
    if (env.empty()) throw std::invalid_argument("empty relation environment");
    int n = env.begin()->second.universe();
    for (const auto& [v, r] : env)
        if (r.universe() != n) throw std::invalid_argument("relation environment mixes universe sizes");
    return n;
}

} // namespace detail

// True when assigning assign[v-1] to vertex v puts every edge's endpoint pair
// into the relation bound to its label.
inline bool check_assignment(const LabelledGraph& g, const RelEnv& env, const std::vector<int>& assign) {
    if (static_cast<int>(assign.size()) != g.vertex_count())
        throw std::invalid_argument("check_assignment: assignment length mismatch");
    const int n = detail::env_universe(env);
    for (int a : assign)
        if (a < 0 || a >= n) throw std::out_of_range("check_assignment: element out of range");
    for (const LabelledEdge& e : g.edges()) {
        const BinRel& r = detail::env_lookup(env, e.label);
        if (!r.test(assign[e.from - 1], assign[e.to - 1])) return false;
    }
    return true;
}

// Searches for an assignment fixing y1 = a1 and y2 = a2. Interior vertices are
// tried in ascending vertex order with ascending element values, so the first
// solution found is deterministic.
inline std::optional<std::vector<int>> find_assignment(const LabelledGraph& g, const RelEnv& env,
                                                       int a1, int a2) {
    const int n = detail::env_universe(env);
    if (a1 < 0 || a1 >= n || a2 < 0 || a2 >= n)
        throw std::out_of_range("find_assignment: element out of range");
    const int m = g.vertex_count();
    std::vector<int> assign(m, -1);
    assign[0] = a1;
    assign[1] = a2;

    // Edges become checkable once their later-assigned endpoint is placed.
    std::vector<std::vector<const LabelledEdge*>> ready(m + 1);
    for (const LabelledEdge& e : g.edges()) ready[std::max(e.from, e.to)].push_back(&e);

    auto edges_ok = [&](int upto) {
        for (const LabelledEdge* e : ready[upto]) {
            const BinRel& r = detail::env_lookup(env, e->label);
            if (!r.test(assign[e->from - 1], assign[e->to - 1])) return false;
        }
        return true;
    };

    if (!edges_ok(1) || !edges_ok(2)) return std::nullopt;

    int v = 3;
    if (v > m) return assign;
    assign[v - 1] = 0;
    while (true) {
        if (assign[v - 1] >= n) {
            assign[v - 1] = -1;
            --v;
            if (v < 3) return std::nullopt;
            ++assign[v - 1];
            continue;
        }
        if (!edges_ok(v)) {
            ++assign[v - 1];
            continue;
        }
        if (v == m) return assign;
        ++v;
        assign[v - 1] = 0;
    }
}

// ============================================================================
// DOT export
// ============================================================================

inline std::string to_dot(const LabelledGraph& g) {
    std::ostringstream out;
    out << "digraph G {\n";
    for (int v = 1; v <= g.vertex_count(); ++v) out << "  y" << v << ";\n";
    for (const LabelledEdge& e : g.edges())
        out << "  y" << e.from << " -> y" << e.to << " [label=\"" << e.label.display() << "\"];\n";
    out << "}\n";
    return out.str();
}

} // namespace malcev
