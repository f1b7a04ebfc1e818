#pragma once

// Decision procedures connecting conditions to semantics.
//
// check_algebra: exhaustive quantification over enumerated compatible
// reflexive relations (or congruences) of one finite algebra.
// check_variety: the generic-relation test in the free algebra on the
// vertices of G(p), with variables instantiated by generated relations.
// synthesize_terms: constraint search over free-algebra elements realizing
// the symbols of a Mal'cev condition, with provenance terms as witnesses.

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "binrel.hpp"
#include "finalg.hpp"
#include "malcevgen.hpp"
#include "relterm.hpp"
#include "termgraph.hpp"

namespace malcev {

struct CheckOptions {
    int enum_bound = 12;                    // off-diagonal cell budget for enumeration
    int threads = 1;                        // tuple-parallel evaluation in check_algebra
    std::size_t free_cap = kDefaultFreeCap; // free-algebra element cap
    std::size_t universe_bound = 2048;      // max free-algebra size usable as a relation universe
    int k_max = 8;                          // symbolic family horizon (not a semantic bound)
    int max_symbol_arity = 8;               // synthesis guard
};

enum class RelMode { crr, con };

inline const char* mode_name(RelMode m) { return m == RelMode::crr ? "crr" : "con"; }

struct Counterexample {
    std::vector<std::pair<std::string, BinRel>> relations;  // per variable, ascending
    std::pair<int, int> pair{0, 0};                         // in lhs but not rhs
};

struct VarietyFailure {
    int m = 0;
    std::size_t free_size = 0;
    std::vector<std::pair<std::string, std::size_t>> relation_sizes;
};

struct CheckVerdict {
    std::string mode;   // "crr" | "con"
    std::string level;  // "algebra" | "variety"
    bool holds = false;
    std::optional<int> witness_k;
    std::optional<Counterexample> counterexample;
    std::optional<VarietyFailure> variety_failure;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = mode;
        j["level"] = level;
        j["holds"] = holds;
        if (witness_k)
            j["witness_k"] = *witness_k;
        else
            j["witness_k"] = nullptr;
        if (counterexample) {
            nlohmann::ordered_json cj;
            nlohmann::ordered_json rels;
            for (const auto& [name, rel] : counterexample->relations) {
                nlohmann::ordered_json rj;
                rj["size"] = rel.universe();
                auto pl = nlohmann::ordered_json::array();
                for (auto [x, y] : rel.pairs()) pl.push_back({x, y});
                rj["pairs"] = std::move(pl);
                rels[name] = std::move(rj);
            }
            cj["relations"] = std::move(rels);
            cj["pair"] = {counterexample->pair.first, counterexample->pair.second};
            j["counterexample"] = std::move(cj);
        } else if (variety_failure) {
            nlohmann::ordered_json cj;
            cj["m"] = variety_failure->m;
            cj["free_algebra_size"] = variety_failure->free_size;
            nlohmann::ordered_json rs;
            for (const auto& [name, count] : variety_failure->relation_sizes) rs[name] = count;
            cj["relation_sizes"] = std::move(rs);
            j["counterexample"] = std::move(cj);
        } else {
            j["counterexample"] = nullptr;
        }
        return j;
    }
};

// ============================================================================
// Shared free-algebra cache
// ============================================================================

namespace detail {

// Free algebras are expensive to build and read-only afterwards; share them
// across checks keyed by the algebra's full structure.
inline std::shared_ptr<const FreeAlgebra> shared_free_algebra(const FiniteAlgebra& a, int m,
                                                              std::size_t cap) {
    static std::map<std::string, std::shared_ptr<const FreeAlgebra>> cache;
    static std::mutex mu;
    std::string key = a.to_json().dump() + "#" + std::to_string(m);
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) {
            if (it->second->size() > cap)
                throw resource_limit_error("free algebra exceeds the element cap of " +
                                           std::to_string(cap));
            return it->second;
        }
    }
    auto built = std::make_shared<const FreeAlgebra>(a, m, cap);
    std::lock_guard<std::mutex> lock(mu);
    return cache.emplace(key, std::move(built)).first->second;
}

// Materialized operation tables over the free algebra's element set.
inline std::shared_ptr<const FiniteAlgebra> shared_free_carrier(
    const std::shared_ptr<const FreeAlgebra>& f, std::size_t universe_bound) {
    static std::map<const FreeAlgebra*, std::shared_ptr<const FiniteAlgebra>> cache;
    static std::mutex mu;
    if (f->size() > universe_bound)
        throw resource_limit_error("free algebra with " + std::to_string(f->size()) +
                                   " elements exceeds the relation-universe bound " +
                                   std::to_string(universe_bound));
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(f.get());
        if (it != cache.end()) return it->second;
    }
    auto built = std::make_shared<const FiniteAlgebra>(f->as_algebra(universe_bound));
    std::lock_guard<std::mutex> lock(mu);
    return cache.emplace(f.get(), std::move(built)).first->second;
}

// Generated relations over a shared carrier recur across checks (the seed
// sets come from T_s(p) on small graphs, of which there are few); memoize
// them per carrier and mode.
inline const BinRel& shared_generated_relation(const std::shared_ptr<const FiniteAlgebra>& carrier,
                                               RelMode mode,
                                               const std::vector<std::pair<int, int>>& seeds) {
    static std::map<std::string, BinRel> cache;
    static std::mutex mu;
    std::string key = std::to_string(reinterpret_cast<std::uintptr_t>(carrier.get()));
    key += mode == RelMode::crr ? "R" : "C";
    for (auto [x, y] : seeds) {
        key += std::to_string(x);
        key += ',';
        key += std::to_string(y);
        key += ';';
    }
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) {
        BinRel rel = mode == RelMode::crr ? crg(*carrier, seeds) : cg(*carrier, seeds);
        it = cache.emplace(std::move(key), std::move(rel)).first;
    }
    return it->second;
}

inline std::pair<int, int> first_violation(const BinRel& p, const BinRel& q) {
    const int n = p.universe();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (p.test(i, j) && !q.test(i, j)) return {i, j};
    throw std::logic_error("first_violation: no violating pair");
}

// Smallest k >= 2 with eval(q^(k)) covering target; relations must be
// reflexive so coverage is monotone in k.
inline int minimal_expansion_k(const BinRel& target, const RelTerm& q, const RelEnv& env,
                               int hard_cap) {
    for (int k = 2; k <= hard_cap; ++k)
        if (target.subset_of(eval_term(expand_plus(q, k), env))) return k;
    throw std::logic_error("minimal_expansion_k: no k within the stabilization bound");
}

} // namespace detail

// ============================================================================
// Per-algebra check
// ============================================================================

inline CheckVerdict check_algebra(const FiniteAlgebra& a, const Inequality& ineq, RelMode mode,
                                  const CheckOptions& opts = {}) {
    std::vector<BinRel> rels =
        mode == RelMode::crr ? enumerate_crr(a, opts.enum_bound) : enumerate_con(a, opts.enum_bound);
    const std::vector<VarId> vars = ineq.variables();
    const std::size_t C = rels.size();
    const std::size_t V = vars.size();

    unsigned __int128 wide = 1;
    for (std::size_t i = 0; i < V; ++i) wide *= C;
    if (wide > static_cast<unsigned __int128>(1) << 32)
        throw resource_limit_error("check_algebra: relation tuple space too large");
    const std::size_t total = static_cast<std::size_t>(wide);

    const bool q_has_plus = ineq.rhs.count_kind(TermKind::plus) > 0;
    const int k_cap = 4 + a.size() * a.size();

    auto env_at = [&](std::size_t idx) {
        RelEnv env;
        std::size_t rest = idx;
        for (std::size_t i = V; i-- > 0;) {
            env.emplace(vars[i], rels[rest % C]);
            rest /= C;
        }
        return env;
    };

    struct Partial {
        std::size_t fail_idx = SIZE_MAX;
        int max_k = 0;
    };

    auto scan = [&](std::size_t lo, std::size_t hi) {
        Partial out;
        for (std::size_t idx = lo; idx < hi; ++idx) {
            RelEnv env = env_at(idx);
            BinRel lhs = eval_term(ineq.lhs, env);
            BinRel rhs = eval_term(ineq.rhs, env);
            if (!lhs.subset_of(rhs)) {
                out.fail_idx = idx;
                return out;
            }
            if (q_has_plus)
                out.max_k = std::max(out.max_k, detail::minimal_expansion_k(lhs, ineq.rhs, env, k_cap));
        }
        return out;
    };

    Partial merged;
    const int threads = std::max(1, opts.threads);
    if (threads == 1 || total < 256) {
        merged = scan(0, total);
    } else {
        std::vector<Partial> parts(static_cast<std::size_t>(threads));
        std::vector<std::thread> pool;
        const std::size_t chunk = (total + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const std::size_t lo = std::min(total, static_cast<std::size_t>(t) * chunk);
            const std::size_t hi = std::min(total, lo + chunk);
            pool.emplace_back([&, t, lo, hi] { parts[static_cast<std::size_t>(t)] = scan(lo, hi); });
        }
        for (auto& th : pool) th.join();
        for (const Partial& p : parts) {
            merged.fail_idx = std::min(merged.fail_idx, p.fail_idx);
            merged.max_k = std::max(merged.max_k, p.max_k);
        }
    }

    CheckVerdict v;
    v.mode = mode_name(mode);
    v.level = "algebra";
    if (merged.fail_idx == SIZE_MAX) {
        v.holds = true;
        if (q_has_plus) v.witness_k = merged.max_k;
        return v;
    }
    v.holds = false;
    RelEnv env = env_at(merged.fail_idx);
    Counterexample ce;
    for (const VarId& var : vars) ce.relations.emplace_back(var.display(), env.at(var));
    ce.pair = detail::first_violation(eval_term(ineq.lhs, env), eval_term(ineq.rhs, env));
    v.counterexample = std::move(ce);
    return v;
}

// ============================================================================
// Variety-level generic test
// ============================================================================

inline CheckVerdict check_variety(const FiniteAlgebra& a, const Inequality& ineq, RelMode mode,
                                  const CheckOptions& opts = {}) {
    if (ineq.lhs.count_kind(TermKind::plus) > 0)
        throw std::invalid_argument("check_variety: left side must be +-free");
    LabelledGraph gp = build_graph(ineq.lhs);
    const int m = gp.vertex_count();
    EdgePairs tp = edge_pairs(gp);

    auto f = detail::shared_free_algebra(a, m, opts.free_cap);
    auto carrier = detail::shared_free_carrier(f, opts.universe_bound);

    RelEnv env;
    std::vector<std::pair<std::string, std::size_t>> sizes;
    for (const VarId& var : ineq.variables()) {
        std::vector<std::pair<int, int>> seeds;
        if (const auto* pairs = tp.find(var))
            for (auto [x, y] : *pairs)
                seeds.emplace_back(static_cast<int>(f->generator_id(x)),
                                   static_cast<int>(f->generator_id(y)));
        BinRel rel = detail::shared_generated_relation(carrier, mode, seeds);
        sizes.emplace_back(var.display(), rel.pair_count());
        env.emplace(var, std::move(rel));
    }

    const int g1 = static_cast<int>(f->generator_id(1));
    const int g2 = static_cast<int>(f->generator_id(2));
    const bool q_has_plus = ineq.rhs.count_kind(TermKind::plus) > 0;

    CheckVerdict v;
    v.mode = mode_name(mode);
    v.level = "variety";
    v.holds = eval_term(ineq.rhs, env).test(g1, g2);
    if (v.holds && q_has_plus) {
        BinRel target(static_cast<int>(f->size()));
        target.set(g1, g2);
        v.witness_k = detail::minimal_expansion_k(target, ineq.rhs, env, 4096);
    }
    if (!v.holds) {
        VarietyFailure vf;
        vf.m = m;
        vf.free_size = f->size();
        vf.relation_sizes = std::move(sizes);
        v.variety_failure = std::move(vf);
    }
    return v;
}

// ============================================================================
// Witness-term synthesis
// ============================================================================

struct TermWitness {
    std::string symbol;
    int arity = 0;
    std::string term;                 // provenance term over the base operations
    std::vector<std::uint8_t> table;  // row-major function table on A^arity
};

// Pointwise verification of a condition's identities against explicit
// operation tables (one per symbol, row-major on A^arity).
inline bool identities_hold(const FiniteAlgebra& a, const MalcevCondition& cond,
                            const std::vector<std::vector<std::uint8_t>>& tables) {
    if (tables.size() != cond.symbols.size())
        throw std::invalid_argument("identities_hold: one table per symbol required");
    const std::size_t n = static_cast<std::size_t>(a.size());
    for (std::size_t i = 0; i < tables.size(); ++i) {
        std::size_t expect = 1;
        for (int t = 0; t < cond.symbols[i].arity; ++t) expect *= n;
        if (tables[i].size() != expect)
            throw std::invalid_argument("identities_hold: table size mismatch for " +
                                        cond.symbols[i].name);
    }
    std::size_t points = 1;
    for (int i = 0; i < cond.m; ++i) points *= n;
    std::vector<int> digits(static_cast<std::size_t>(cond.m));
    for (std::size_t pt = 0; pt < points; ++pt) {
        std::size_t rest = pt;
        for (int i = cond.m; i-- > 0;) {
            digits[static_cast<std::size_t>(i)] = static_cast<int>(rest % n);
            rest /= n;
        }
        auto value = [&](const SymbolApp& app) {
            std::size_t idx = 0;
            for (int arg : app.args) idx = idx * n + static_cast<std::size_t>(digits[arg - 1]);
            return tables[app.symbol][idx];
        };
        for (const FormalIdentity& id : cond.identities)
            if (value(id.lhs) != value(id.rhs)) return false;
    }
    return true;
}

namespace detail {

// One side of an identity: a symbol plus the reindex table mapping inputs of
// A^m to positions in the symbol's own function table.
struct SynthPattern {
    int symbol = 0;
    std::vector<std::size_t> ridx;
    std::vector<std::string> keys;  // per element id of the symbol's free algebra, lazily built
};

inline void build_keys(SynthPattern& pat, const FreeAlgebra& f) {
    if (!pat.keys.empty()) return;
    pat.keys.resize(f.size());
    for (std::size_t id = 0; id < f.size(); ++id) {
        std::string key(pat.ridx.size(), '\0');
        for (std::size_t t = 0; t < pat.ridx.size(); ++t)
            key[t] = static_cast<char>(f.value(id, pat.ridx[t]));
        pat.keys[id] = std::move(key);
    }
}

} // namespace detail

inline std::optional<std::vector<TermWitness>> synthesize_terms(const FiniteAlgebra& a,
                                                                const MalcevCondition& cond,
                                                                const CheckOptions& opts = {}) {
    const std::size_t n = static_cast<std::size_t>(a.size());
    const int S = static_cast<int>(cond.symbols.size());
    for (const TermSymbol& s : cond.symbols)
        if (s.arity > opts.max_symbol_arity)
            throw resource_limit_error("synthesize_terms: symbol " + s.name + " has arity " +
                                       std::to_string(s.arity) + " above the cap " +
                                       std::to_string(opts.max_symbol_arity));

    std::vector<std::shared_ptr<const FreeAlgebra>> frees(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i)
        frees[static_cast<std::size_t>(i)] =
            detail::shared_free_algebra(a, cond.symbols[static_cast<std::size_t>(i)].arity,
                                        opts.free_cap);

    std::size_t points = 1;
    for (int i = 0; i < cond.m; ++i) points *= n;

    // Deduplicated patterns; constraints are pattern pairs.
    std::vector<detail::SynthPattern> patterns;
    std::map<std::pair<int, std::vector<int>>, int> pattern_ids;
    auto pattern_of = [&](const SymbolApp& app) {
        auto key = std::make_pair(app.symbol, app.args);
        auto it = pattern_ids.find(key);
        if (it != pattern_ids.end()) return it->second;
        detail::SynthPattern pat;
        pat.symbol = app.symbol;
        pat.ridx.resize(points);
        std::vector<std::size_t> digits(static_cast<std::size_t>(cond.m));
        for (std::size_t pt = 0; pt < points; ++pt) {
            std::size_t rest = pt;
            for (int i = cond.m; i-- > 0;) {
                digits[static_cast<std::size_t>(i)] = rest % n;
                rest /= n;
            }
            std::size_t idx = 0;
            for (int arg : app.args) idx = idx * n + digits[static_cast<std::size_t>(arg) - 1];
            pat.ridx[pt] = idx;
        }
        patterns.push_back(std::move(pat));
        int id = static_cast<int>(patterns.size()) - 1;
        pattern_ids.emplace(std::move(key), id);
        return id;
    };

    std::vector<std::pair<int, int>> constraints;
    for (const FormalIdentity& id : cond.identities)
        constraints.emplace_back(pattern_of(id.lhs), pattern_of(id.rhs));

    // Initial domains: ascending element ids = shortest provenance first.
    std::vector<std::vector<std::size_t>> domains(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
        const auto& f = *frees[static_cast<std::size_t>(i)];
        if (cond.symbols[static_cast<std::size_t>(i)].projection) {
            domains[static_cast<std::size_t>(i)] = {
                f.generator_id(*cond.symbols[static_cast<std::size_t>(i)].projection)};
        } else {
            domains[static_cast<std::size_t>(i)].resize(f.size());
            for (std::size_t e = 0; e < f.size(); ++e) domains[static_cast<std::size_t>(i)][e] = e;
        }
    }

    auto keys_of = [&](int pat_id) -> const std::vector<std::string>& {
        detail::SynthPattern& pat = patterns[static_cast<std::size_t>(pat_id)];
        detail::build_keys(pat, *frees[static_cast<std::size_t>(pat.symbol)]);
        return pat.keys;
    };

    // Arc consistency on the constraint graph; returns false on a wipeout.
    auto propagate = [&](std::vector<std::vector<std::size_t>>& dom) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [pa, pb] : constraints) {
                const int sa = patterns[static_cast<std::size_t>(pa)].symbol;
                const int sb = patterns[static_cast<std::size_t>(pb)].symbol;
                if (sa == sb) {
                    // Unary: both sides must induce the same function.
                    const auto& ka = keys_of(pa);
                    const auto& kb = keys_of(pb);
                    auto& d = dom[static_cast<std::size_t>(sa)];
                    std::size_t before = d.size();
                    d.erase(std::remove_if(d.begin(), d.end(),
                                           [&](std::size_t e) { return ka[e] != kb[e]; }),
                            d.end());
                    if (d.size() != before) changed = true;
                    if (d.empty()) return false;
                    continue;
                }
                for (int dir = 0; dir < 2; ++dir) {
                    const int keep_pat = dir == 0 ? pa : pb;
                    const int against_pat = dir == 0 ? pb : pa;
                    const int keep_sym = patterns[static_cast<std::size_t>(keep_pat)].symbol;
                    const int against_sym = patterns[static_cast<std::size_t>(against_pat)].symbol;
                    const auto& kk = keys_of(keep_pat);
                    const auto& ka = keys_of(against_pat);
                    std::unordered_set<std::string> allowed;
                    for (std::size_t e : dom[static_cast<std::size_t>(against_sym)])
                        allowed.insert(ka[e]);
                    auto& d = dom[static_cast<std::size_t>(keep_sym)];
                    std::size_t before = d.size();
                    d.erase(std::remove_if(d.begin(), d.end(),
                                           [&](std::size_t e) { return !allowed.count(kk[e]); }),
                            d.end());
                    if (d.size() != before) changed = true;
                    if (d.empty()) return false;
                }
            }
        }
        return true;
    };

    std::optional<std::vector<std::size_t>> solution;
    auto solve = [&](auto&& self, std::vector<std::vector<std::size_t>> dom) -> bool {
        if (!propagate(dom)) return false;
        int pick = -1;
        std::size_t best = SIZE_MAX;
        for (int i = 0; i < S; ++i) {
            std::size_t sz = dom[static_cast<std::size_t>(i)].size();
            if (sz > 1 && sz < best) {
                best = sz;
                pick = i;
            }
        }
        if (pick < 0) {
            std::vector<std::size_t> assign(static_cast<std::size_t>(S));
            for (int i = 0; i < S; ++i) assign[static_cast<std::size_t>(i)] = dom[static_cast<std::size_t>(i)][0];
            solution = std::move(assign);
            return true;
        }
        std::vector<std::size_t> candidates = dom[static_cast<std::size_t>(pick)];
        for (std::size_t cand : candidates) {
            std::vector<std::vector<std::size_t>> next = dom;
            next[static_cast<std::size_t>(pick)] = {cand};
            if (self(self, std::move(next))) return true;
        }
        return false;
    };

    if (!solve(solve, domains)) return std::nullopt;

    std::vector<std::vector<std::uint8_t>> tables;
    tables.reserve(static_cast<std::size_t>(S));
    std::vector<TermWitness> out;
    for (int i = 0; i < S; ++i) {
        const auto& f = *frees[static_cast<std::size_t>(i)];
        const std::size_t e = (*solution)[static_cast<std::size_t>(i)];
        TermWitness w;
        w.symbol = cond.symbols[static_cast<std::size_t>(i)].name;
        w.arity = cond.symbols[static_cast<std::size_t>(i)].arity;
        w.term = f.term_string(e);
        w.table = f.table_of(e);
        tables.push_back(w.table);
        out.push_back(std::move(w));
    }
    if (!identities_hold(a, cond, tables))
        throw std::logic_error("synthesize_terms: solution failed verification");
    return out;
}

// ============================================================================
// Theorem harnesses
// ============================================================================

struct EquivalenceReport {
    CheckVerdict crr;
    CheckVerdict con;
    bool theq_applicable = false;  // p regular, rhs has at most one composition
    bool agree = false;
    bool discrepancy = false;  // applicable yet disagreeing: implementation falsified
};

inline EquivalenceReport equivalence_report(const FiniteAlgebra& a, const Inequality& ineq,
                                            const CheckOptions& opts = {}) {
    if (ineq.lhs.count_kind(TermKind::plus) > 0 || ineq.rhs.count_kind(TermKind::plus) > 0)
        throw std::invalid_argument("equivalence_report: inequality must be +-free");
    EquivalenceReport r;
    r.crr = check_variety(a, ineq, RelMode::crr, opts);
    r.con = check_variety(a, ineq, RelMode::con, opts);
    r.theq_applicable =
        is_regular(ineq.lhs) && ineq.rhs.count_kind(TermKind::compose) <= 1;
    r.agree = r.crr.holds == r.con.holds;
    r.discrepancy = r.theq_applicable && !r.agree;
    return r;
}

// Agreement of the two right-hand shapes of the pair theorem on one algebra:
// R&(SoT) <= (R&S)oT holds exactly when R&(SoT) <= (R&S)o(R&T) does.
inline bool thr_pair_check(const FiniteAlgebra& a, const CheckOptions& opts = {}) {
    const Inequality one = parse_inequality("R & (S o T) <= (R & S) o T");
    const Inequality two = parse_inequality("R & (S o T) <= (R & S) o (R & T)");
    return check_algebra(a, one, RelMode::crr, opts).holds ==
           check_algebra(a, two, RelMode::crr, opts).holds;
}

} // namespace malcev
