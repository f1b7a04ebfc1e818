#pragma once

// Mal'cev condition generation from relational inequalities p <= q.
//
// The classic route introduces one m-ary symbol per vertex of G(q) (m = the
// vertex count of G(p)) and one identity per edge, with argument vectors
// collapsed by the equivalence the edge's label induces on G(p). The
// compatible-reflexive-relation route introduces a fresh (m + c(s))-ary
// symbol per edge of G(q) and a linking identity pair per symbol. Both are
// pure syntax: satisfiability questions live in decide.hpp.

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relterm.hpp"
#include "termgraph.hpp"

namespace malcev {

// ============================================================================
// Condition data model
// ============================================================================

struct TermSymbol {
    std::string name;
    int arity = 0;
    std::optional<int> projection;  // 1-based coordinate when the symbol is pinned to x_i
};

// A symbol applied to variables from the shared pool x_1..x_m.
struct SymbolApp {
    int symbol = 0;  // index into MalcevCondition::symbols
    std::vector<int> args;

    bool operator==(const SymbolApp& o) const { return symbol == o.symbol && args == o.args; }
};

struct FormalIdentity {
    SymbolApp lhs;
    SymbolApp rhs;
};

struct MalcevCondition {
    std::string source;     // the inequality the condition was generated from
    std::string algorithm;  // "classic" or "crr"
    std::optional<int> k;   // expansion index when part of a family
    int m = 0;              // variable pool size = vertex count of G(p)
    std::vector<std::pair<std::string, int>> edge_counts;  // (variable, c(s)), ascending
    std::vector<TermSymbol> symbols;
    std::vector<FormalIdentity> identities;

    // A side reduces to a variable when its symbol is a pinned projection.
    std::optional<int> reduce_to_variable(const SymbolApp& app) const {
        const TermSymbol& s = symbols[app.symbol];
        if (!s.projection) return std::nullopt;
        return app.args[static_cast<std::size_t>(*s.projection) - 1];
    }

    bool is_trivial(const FormalIdentity& id) const {
        if (id.lhs == id.rhs) return true;
        auto l = reduce_to_variable(id.lhs);
        auto r = reduce_to_variable(id.rhs);
        return l && r && *l == *r;
    }
};

namespace detail {

inline void require_plus_free(const RelTerm& t, const char* who) {
    if (t.count_kind(TermKind::plus) > 0)
        throw std::invalid_argument(std::string(who) + ": term contains '+'; expand it first");
}

// Vertex symbols for G(q): t_1 = pi_1, t_2 = pi_2, the rest fresh m-ary.
inline std::vector<TermSymbol> vertex_symbols(int q_vertices, int m) {
    std::vector<TermSymbol> out;
    out.push_back({"pi_1", m, 1});
    out.push_back({"pi_2", m, 2});
    for (int v = 3; v <= q_vertices; ++v) out.push_back({"t_" + std::to_string(v), m, std::nullopt});
    return out;
}

inline std::vector<int> identity_args(int m) {
    std::vector<int> args(static_cast<std::size_t>(m));
    for (int d = 1; d <= m; ++d) args[static_cast<std::size_t>(d) - 1] = d;
    return args;
}

inline std::vector<std::pair<std::string, int>> edge_count_table(const Inequality& ineq,
                                                                 const EdgePairs& tp) {
    std::vector<std::pair<std::string, int>> out;
    for (const VarId& v : ineq.variables()) out.emplace_back(v.display(), tp.cardinality(v));
    return out;
}

} // namespace detail

// ============================================================================
// Classic generator (congruence version)
// ============================================================================

inline MalcevCondition gen_eq(const RelTerm& p, const RelTerm& q) {
    detail::require_plus_free(p, "gen_eq");
    detail::require_plus_free(q, "gen_eq");
    LabelledGraph gp = build_graph(p);
    LabelledGraph gq = build_graph(q);
    const int m = gp.vertex_count();
    EdgePairs tp = edge_pairs(gp);

    MalcevCondition cond;
    cond.source = render(Inequality{p, q});
    cond.algorithm = "classic";
    cond.m = m;
    cond.edge_counts = detail::edge_count_table(Inequality{p, q}, tp);
    cond.symbols = detail::vertex_symbols(gq.vertex_count(), m);

    static const std::vector<std::pair<int, int>> none;
    for (const LabelledEdge& e : gq.edges()) {
        const auto* pairs = tp.find(e.label);
        VertexPartition part(m, pairs ? *pairs : none);
        std::vector<int> args(static_cast<std::size_t>(m));
        for (int d = 1; d <= m; ++d) args[static_cast<std::size_t>(d) - 1] = part.representative(d);
        FormalIdentity id;
        id.lhs = {e.from - 1, args};
        id.rhs = {e.to - 1, args};
        cond.identities.push_back(std::move(id));
    }
    return cond;
}

inline MalcevCondition gen_eq(const Inequality& ineq) { return gen_eq(ineq.lhs, ineq.rhs); }

// ============================================================================
// Compatible-reflexive-relation generator
// ============================================================================

inline MalcevCondition gen_eqr(const RelTerm& p, const RelTerm& q) {
    detail::require_plus_free(p, "gen_eqr");
    detail::require_plus_free(q, "gen_eqr");
    LabelledGraph gp = build_graph(p);
    LabelledGraph gq = build_graph(q);
    const int m = gp.vertex_count();
    EdgePairs tp = edge_pairs(gp);

    MalcevCondition cond;
    cond.source = render(Inequality{p, q});
    cond.algorithm = "crr";
    cond.m = m;
    cond.edge_counts = detail::edge_count_table(Inequality{p, q}, tp);
    cond.symbols = detail::vertex_symbols(gq.vertex_count(), m);

    std::set<std::string> used;
    for (const TermSymbol& s : cond.symbols) used.insert(s.name);

    const std::vector<int> pool = detail::identity_args(m);
    static const std::vector<std::pair<int, int>> none;
    for (const LabelledEdge& e : gq.edges()) {
        const auto* ts = tp.find(e.label);
        const auto& pairs = ts ? *ts : none;
        const int c = static_cast<int>(pairs.size());

        std::string base = "t_(" + std::to_string(e.from) + "," + std::to_string(e.to) + "," +
                           e.label.display() + ")";
        std::string name = base;
        for (int suffix = 2; used.count(name); ++suffix) name = base + "_" + std::to_string(suffix);
        used.insert(name);

        cond.symbols.push_back({name, m + c, std::nullopt});
        const int fresh = static_cast<int>(cond.symbols.size()) - 1;

        std::vector<int> args_i = pool, args_j = pool;
        for (const auto& [a, b] : pairs) {
            args_i.push_back(a);
            args_j.push_back(b);
        }
        cond.identities.push_back({SymbolApp{fresh, std::move(args_i)}, SymbolApp{e.from - 1, pool}});
        cond.identities.push_back({SymbolApp{fresh, std::move(args_j)}, SymbolApp{e.to - 1, pool}});
    }
    return cond;
}

inline MalcevCondition gen_eqr(const Inequality& ineq) { return gen_eqr(ineq.lhs, ineq.rhs); }

// The k-indexed family for q containing +: member k is gen_eqr(p, q^(k)).
inline std::vector<MalcevCondition> gen_eqr_family(const RelTerm& p, const RelTerm& q, int k_min,
                                                   int k_max) {
    detail::require_plus_free(p, "gen_eqr_family");
    if (k_min < 2) throw std::invalid_argument("gen_eqr_family: k_min must be at least 2");
    if (k_max < k_min) throw std::invalid_argument("gen_eqr_family: empty k range");
    std::vector<MalcevCondition> out;
    for (int k = k_min; k <= k_max; ++k) {
        MalcevCondition c = gen_eqr(p, expand_plus(q, k));
        c.k = k;
        c.source = render(Inequality{p, q});
        out.push_back(std::move(c));
    }
    return out;
}

// ============================================================================
// Left/right consequence identities
// ============================================================================

// For regular p, every label's equivalence on G(p) has classes of at most two
// vertices, so "replace both members of each pair" is well defined. For each
// edge (z_i, z_j, s) of G(q) this emits t_i(v) ~ t_j(v) for the l-vector
// (both positions of a pair (a, b) in T_s(p) become x_a) and the r-vector
// (both become x_b). Symbol indices refer to gen_eq(p, q).symbols.
inline std::vector<FormalIdentity> lr_consequences(const RelTerm& p, const RelTerm& q) {
    detail::require_plus_free(p, "lr_consequences");
    detail::require_plus_free(q, "lr_consequences");
    if (!is_regular(p))
        throw std::invalid_argument("lr_consequences: p is not regular, substitution vectors are ill-defined");
    LabelledGraph gp = build_graph(p);
    LabelledGraph gq = build_graph(q);
    const int m = gp.vertex_count();
    EdgePairs tp = edge_pairs(gp);
    EdgePairs tq = edge_pairs(gq);

    std::vector<FormalIdentity> out;
    for (const auto& [label, qpairs] : tq.groups()) {
        const auto* ts = tp.find(label);
        static const std::vector<std::pair<int, int>> none;
        const auto& ppairs = ts ? *ts : none;
        // Regularity keeps the pairs disjoint; verify instead of trusting.
        {
            std::set<int> seen;
            for (const auto& [a, b] : ppairs)
                if (!seen.insert(a).second || !seen.insert(b).second)
                    throw std::invalid_argument("lr_consequences: a class of Eqv(T_s(p)) exceeds two elements");
        }
        for (const auto& [i, j] : qpairs) {
            for (int variant = 0; variant < 2; ++variant) {
                std::vector<int> vec = detail::identity_args(m);
                for (const auto& [a, b] : ppairs) {
                    int target = variant == 0 ? a : b;
                    vec[static_cast<std::size_t>(a) - 1] = target;
                    vec[static_cast<std::size_t>(b) - 1] = target;
                }
                out.push_back({SymbolApp{i - 1, vec}, SymbolApp{j - 1, vec}});
            }
        }
    }
    return out;
}

// ============================================================================
// Rendering
// ============================================================================

enum class ConditionFormat { text, latex, json };

namespace detail {

inline std::string variable_token(int v, ConditionFormat f) {
    if (f == ConditionFormat::latex)
        return v < 10 ? "x_" + std::to_string(v) : "x_{" + std::to_string(v) + "}";
    return "x" + std::to_string(v);
}

inline std::string symbol_token(const std::string& name, ConditionFormat f) {
    if (f != ConditionFormat::latex) return name;
    if (name == "pi_1") return "\\pi_1";
    if (name == "pi_2") return "\\pi_2";
    if (name.rfind("t_(", 0) == 0) return "t_{" + name.substr(2) + "}";
    return name;
}

inline std::string render_app(const MalcevCondition& c, const SymbolApp& app, ConditionFormat f,
                              const std::string* alias) {
    if (auto v = c.reduce_to_variable(app)) return variable_token(*v, f);
    const TermSymbol& s = c.symbols[app.symbol];
    std::string out = alias && !s.projection ? *alias : symbol_token(s.name, f);
    out += '(';
    for (std::size_t i = 0; i < app.args.size(); ++i) {
        if (i) out += ',';
        out += variable_token(app.args[i], f);
    }
    out += ')';
    return out;
}

} // namespace detail

inline std::string render_condition(const MalcevCondition& c, ConditionFormat format,
                                    bool prune_trivial = false) {
    if (format == ConditionFormat::json) {
        if (c.symbols.empty() && c.identities.empty()) return "[]";
        nlohmann::ordered_json j;
        j["source"] = c.source;
        j["algorithm"] = c.algorithm;
        if (c.k)
            j["k"] = *c.k;
        else
            j["k"] = nullptr;
        j["m"] = c.m;
        auto syms = nlohmann::ordered_json::array();
        for (const TermSymbol& s : c.symbols) {
            nlohmann::ordered_json sj;
            sj["name"] = s.name;
            sj["arity"] = s.arity;
            if (s.projection)
                sj["projection"] = *s.projection;
            else
                sj["projection"] = nullptr;
            syms.push_back(std::move(sj));
        }
        j["symbols"] = std::move(syms);
        auto ids = nlohmann::ordered_json::array();
        for (const FormalIdentity& id : c.identities) {
            if (prune_trivial && c.is_trivial(id)) continue;
            nlohmann::ordered_json ij;
            for (const char* side : {"lhs", "rhs"}) {
                const SymbolApp& app = side[0] == 'l' ? id.lhs : id.rhs;
                nlohmann::ordered_json aj;
                aj["symbol"] = c.symbols[app.symbol].name;
                aj["args"] = app.args;
                ij[side] = std::move(aj);
            }
            ids.push_back(std::move(ij));
        }
        j["identities"] = std::move(ids);
        return j.dump(2);
    }

    // Human formats alias the sole unpinned symbol to a bare "t".
    int unpinned = 0;
    for (const TermSymbol& s : c.symbols)
        if (!s.projection) ++unpinned;
    static const std::string t_alias = "t";
    const std::string* alias = unpinned == 1 ? &t_alias : nullptr;

    const char* eq = format == ConditionFormat::latex ? " \\approx " : " = ";
    std::string out;
    for (const FormalIdentity& id : c.identities) {
        if (prune_trivial && c.is_trivial(id)) continue;
        out += detail::render_app(c, id.lhs, format, alias);
        out += eq;
        out += detail::render_app(c, id.rhs, format, alias);
        out += '\n';
    }
    return out;
}

} // namespace malcev
