#pragma once

// Finite algebras with explicitly tabulated operations, the relation
// operators over them (term evaluation, compatibility, generated compatible
// reflexive relations and congruences, exhaustive enumeration), and free
// algebras on m generators realized as the closure of the m projections
// inside A^(A^m), with term provenance for every element.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "binrel.hpp"
#include "relterm.hpp"
#include "termgraph.hpp"

namespace malcev {

class resource_limit_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Finite algebras
// ============================================================================

// Operation table in row-major order: the value on (a_0, ..., a_{k-1}) sits at
// index a_0 * n^(k-1) + a_1 * n^(k-2) + ... + a_{k-1}.
struct Operation {
    std::string name;
    int arity = 0;
    std::vector<std::uint16_t> table;
};

class FiniteAlgebra {
public:
    FiniteAlgebra(std::string name, int size, std::vector<Operation> ops)
        : name_(std::move(name)), size_(size), ops_(std::move(ops)) {
        if (size_ < 1) throw std::invalid_argument("algebra size must be positive");
        if (size_ > 65535) throw std::invalid_argument("algebra size above 65535 is not supported");
        std::map<std::string, int> seen;
        for (const Operation& op : ops_) {
            if (op.name.empty()) throw std::invalid_argument("operation with empty name");
            if (!seen.emplace(op.name, 1).second)
                throw std::invalid_argument("duplicate operation name: " + op.name);
            if (op.arity < 0) throw std::invalid_argument("negative arity for operation " + op.name);
            std::size_t expect = 1;
            for (int i = 0; i < op.arity; ++i) expect *= static_cast<std::size_t>(size_);
            if (op.table.size() != expect)
                throw std::invalid_argument("operation " + op.name + ": table size mismatch");
            for (std::uint16_t v : op.table)
                if (v >= size_) throw std::invalid_argument("operation " + op.name + ": value out of range");
        }
    }

    const std::string& name() const { return name_; }
    int size() const { return size_; }
    const std::vector<Operation>& operations() const { return ops_; }

    int apply(const Operation& op, const std::vector<int>& args) const {
        if (static_cast<int>(args.size()) != op.arity)
            throw std::invalid_argument("operation " + op.name + ": argument count mismatch");
        std::size_t idx = 0;
        for (int a : args) {
            if (a < 0 || a >= size_) throw std::out_of_range("operation argument out of range");
            idx = idx * static_cast<std::size_t>(size_) + static_cast<std::size_t>(a);
        }
        return op.table[idx];
    }

    static FiniteAlgebra from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw std::invalid_argument("algebra json: expected an object");
        if (!j.contains("size") || !j["size"].is_number_integer())
            throw std::invalid_argument("algebra json: missing integer \"size\"");
        std::string name = j.value("name", std::string{});
        int size = j["size"].get<int>();
        std::vector<Operation> ops;
        if (j.contains("operations")) {
            if (!j["operations"].is_array()) throw std::invalid_argument("algebra json: \"operations\" must be an array");
            for (const auto& oj : j["operations"]) {
                Operation op;
                if (!oj.contains("name") || !oj["name"].is_string())
                    throw std::invalid_argument("algebra json: operation missing \"name\"");
                op.name = oj["name"].get<std::string>();
                if (!oj.contains("arity") || !oj["arity"].is_number_integer())
                    throw std::invalid_argument("algebra json: operation " + op.name + " missing \"arity\"");
                op.arity = oj["arity"].get<int>();
                if (!oj.contains("table") || !oj["table"].is_array())
                    throw std::invalid_argument("algebra json: operation " + op.name + " missing \"table\"");
                for (const auto& v : oj["table"]) {
                    if (!v.is_number_integer())
                        throw std::invalid_argument("algebra json: operation " + op.name + ": table entries must be integers");
                    int x = v.get<int>();
                    if (x < 0 || x > 65535)
                        throw std::invalid_argument("algebra json: operation " + op.name + ": table entry out of range");
                    op.table.push_back(static_cast<std::uint16_t>(x));
                }
                ops.push_back(std::move(op));
            }
        }
        return FiniteAlgebra(std::move(name), size, std::move(ops));
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["name"] = name_;
        j["size"] = size_;
        auto ops = nlohmann::ordered_json::array();
        for (const Operation& op : ops_) {
            nlohmann::ordered_json oj;
            oj["name"] = op.name;
            oj["arity"] = op.arity;
            oj["table"] = std::vector<int>(op.table.begin(), op.table.end());
            ops.push_back(std::move(oj));
        }
        j["operations"] = std::move(ops);
        return j;
    }

private:
    std::string name_;
    int size_;
    std::vector<Operation> ops_;
};

// ============================================================================
// Built-in algebras
// ============================================================================

inline std::vector<std::string> catalog_names() {
    return {"bare2", "bare3", "z2", "lat2", "slat2", "bool2"};
}

inline std::optional<FiniteAlgebra> make_catalog_algebra(const std::string& name) {
    auto op = [](std::string n, int arity, std::vector<std::uint16_t> t) {
        return Operation{std::move(n), arity, std::move(t)};
    };
    if (name == "bare2") return FiniteAlgebra("bare2", 2, {});
    if (name == "bare3") return FiniteAlgebra("bare3", 3, {});
    if (name == "z2") return FiniteAlgebra("z2", 2, {op("+", 2, {0, 1, 1, 0})});
    if (name == "lat2")
        return FiniteAlgebra("lat2", 2, {op("meet", 2, {0, 0, 0, 1}), op("join", 2, {0, 1, 1, 1})});
    if (name == "slat2") return FiniteAlgebra("slat2", 2, {op("meet", 2, {0, 0, 0, 1})});
    if (name == "bool2")
        return FiniteAlgebra("bool2", 2,
                             {op("and", 2, {0, 0, 0, 1}), op("or", 2, {0, 1, 1, 1}),
                              op("not", 1, {1, 0}), op("zero", 0, {0}), op("one", 0, {1})});
    return std::nullopt;
}

// ============================================================================
// Term evaluation over relations
// ============================================================================

inline BinRel eval_term(const RelTerm& t, const RelEnv& env) {
    switch (t.kind()) {
        case TermKind::variable:
            return detail::env_lookup(env, t.var());
        case TermKind::meet:
            return eval_term(t.left(), env) & eval_term(t.right(), env);
        case TermKind::compose:
            return compose(eval_term(t.left(), env), eval_term(t.right(), env));
        case TermKind::plus:
            return plus(eval_term(t.left(), env), eval_term(t.right(), env));
    }
    throw std::logic_error("eval_term: unreachable");
}

// ============================================================================
// Compatibility and generated relations
// ============================================================================

inline bool is_compatible(const FiniteAlgebra& a, const BinRel& rel) {
    if (rel.universe() != a.size()) throw std::invalid_argument("is_compatible: universe size mismatch");
    const auto prs = rel.pairs();
    for (const Operation& op : a.operations()) {
        if (op.arity == 0) {
            if (!rel.test(op.table[0], op.table[0])) return false;
            continue;
        }
        std::vector<std::size_t> idx(op.arity, 0);
        if (prs.empty()) continue;
        while (true) {
            std::size_t ti = 0, tj = 0;
            for (int t = 0; t < op.arity; ++t) {
                ti = ti * a.size() + prs[idx[t]].first;
                tj = tj * a.size() + prs[idx[t]].second;
            }
            if (!rel.test(op.table[ti], op.table[tj])) return false;
            int t = op.arity - 1;
            while (t >= 0 && ++idx[t] == prs.size()) idx[t--] = 0;
            if (t < 0) break;
        }
    }
    return true;
}

namespace detail {

// Closes a pair set under coordinatewise application of all operations.
// Worklist subuniverse generation in A x A: each pair, once reached, is
// combined with every pair of smaller-or-equal worklist index.
inline void compat_close(const FiniteAlgebra& a, BinRel& rel) {
    const int n = a.size();
    const std::size_t fullc = static_cast<std::size_t>(n) * n;
    std::vector<std::pair<int, int>> list = rel.pairs();
    auto push = [&](int x, int y) {
        if (!rel.test(x, y)) {
            rel.set(x, y);
            list.emplace_back(x, y);
        }
    };
    for (const Operation& op : a.operations())
        if (op.arity == 0) push(op.table[0], op.table[0]);
    for (std::size_t i = 0; i < list.size() && list.size() < fullc; ++i) {
        for (const Operation& op : a.operations()) {
            if (op.arity == 0) continue;
            if (op.arity == 1) {
                auto [x, y] = list[i];
                push(op.table[x], op.table[y]);
                continue;
            }
            if (op.arity == 2) {
                const auto [xi, yi] = list[i];
                const std::uint16_t* tbl = op.table.data();
                for (std::size_t j = 0; j <= i; ++j) {
                    const auto [xj, yj] = list[j];
                    push(tbl[static_cast<std::size_t>(xi) * n + xj], tbl[static_cast<std::size_t>(yi) * n + yj]);
                    push(tbl[static_cast<std::size_t>(xj) * n + xi], tbl[static_cast<std::size_t>(yj) * n + yi]);
                }
                continue;
            }
            // General arity: tuples over worklist indices {0..i} containing i.
            std::vector<std::size_t> idx(op.arity, 0);
            while (true) {
                bool uses_i = false;
                for (std::size_t v : idx)
                    if (v == i) { uses_i = true; break; }
                if (uses_i) {
                    std::size_t ti = 0, tj = 0;
                    for (int t = 0; t < op.arity; ++t) {
                        ti = ti * n + list[idx[t]].first;
                        tj = tj * n + list[idx[t]].second;
                    }
                    push(op.table[ti], op.table[tj]);
                }
                int t = op.arity - 1;
                while (t >= 0 && ++idx[t] > i) idx[t--] = 0;
                if (t < 0) break;
            }
        }
    }
}

inline void symmetric_close(BinRel& rel) {
    const int n = rel.universe();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (rel.test(i, j) && !rel.test(j, i)) rel.set(j, i);
}

inline void transitive_close(BinRel& rel) {
    const int n = rel.universe();
    const int words = rel.row_words();
    for (int k = 0; k < n; ++k) {
        const std::uint64_t* rk = rel.row(k);
        for (int i = 0; i < n; ++i) {
            if (!rel.test(i, k)) continue;
            std::uint64_t* ri = rel.row(i);
            for (int w = 0; w < words; ++w) ri[w] |= rk[w];
        }
    }
}

} // namespace detail

// Least reflexive compatible relation containing the given pairs.
inline BinRel crg(const FiniteAlgebra& a, const std::vector<std::pair<int, int>>& pairs) {
    BinRel rel = BinRel::diagonal(a.size());
    for (auto [x, y] : pairs) rel.set(x, y);
    detail::compat_close(a, rel);
    return rel;
}

// Least congruence containing the given pairs: alternates compatibility
// closure with symmetric-transitive closure until the set stops growing.
inline BinRel cg(const FiniteAlgebra& a, const std::vector<std::pair<int, int>>& pairs) {
    BinRel rel = BinRel::diagonal(a.size());
    for (auto [x, y] : pairs) rel.set(x, y);
    while (true) {
        std::size_t before = rel.pair_count();
        detail::symmetric_close(rel);
        detail::transitive_close(rel);
        detail::compat_close(a, rel);
        if (rel.pair_count() == before) break;
    }
    return rel;
}

// Equivalence classes on {1..domain_size} generated by a pair list.
inline VertexPartition eqv(const std::vector<std::pair<int, int>>& pairs, int domain_size) {
    return VertexPartition(domain_size, pairs);
}

// ============================================================================
// Exhaustive enumeration
// ============================================================================

// All compatible reflexive relations, enumerated by off-diagonal bit pattern:
// cells (i, j), i != j, in row-major order form a binary counter, lowest cell
// = least significant bit.
inline std::vector<BinRel> enumerate_crr(const FiniteAlgebra& a, int bound = 12) {
    const int n = a.size();
    const int cells = n * (n - 1);
    if (cells > bound)
        throw resource_limit_error("enumerate_crr: " + std::to_string(cells) +
                                   " off-diagonal cells exceed the enumeration bound " +
                                   std::to_string(bound) + "; use the variety-level check instead");
    std::vector<std::pair<int, int>> cell;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) cell.emplace_back(i, j);
    std::vector<BinRel> out;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cells); ++mask) {
        BinRel rel = BinRel::diagonal(n);
        for (int t = 0; t < cells; ++t)
            if ((mask >> t) & 1) rel.set(cell[t].first, cell[t].second);
        if (is_compatible(a, rel)) out.push_back(std::move(rel));
    }
    return out;
}

// All congruences, enumerated via restricted-growth strings (lexicographic),
// filtered for compatibility.
inline std::vector<BinRel> enumerate_con(const FiniteAlgebra& a, int bound = 12) {
    const int n = a.size();
    if (n * (n - 1) > bound)
        throw resource_limit_error("enumerate_con: universe too large for the enumeration bound " +
                                   std::to_string(bound) + "; use the variety-level check instead");
    std::vector<BinRel> out;
    std::vector<int> rgs(n, 0);
    while (true) {
        BinRel rel(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (rgs[i] == rgs[j]) rel.set(i, j);
        if (is_compatible(a, rel)) out.push_back(std::move(rel));
        // Next restricted-growth string.
        int i = n - 1;
        for (; i > 0; --i) {
            int maxp = 0;
            for (int j = 0; j < i; ++j) maxp = std::max(maxp, rgs[j]);
            if (rgs[i] <= maxp) break;
        }
        if (i == 0) break;
        ++rgs[i];
        for (int j = i + 1; j < n; ++j) rgs[j] = 0;
    }
    return out;
}

// ============================================================================
// Free algebras
// ============================================================================

// The free algebra of the variety generated by A, on m generators: the
// subalgebra of A^(A^m) generated by the m projections. Elements are value
// vectors indexed by input tuples in row-major order (first generator most
// significant) and carry the first term found for them during closure.
class FreeAlgebra {
public:
    struct Provenance {
        int op = -1;                        // index into base().operations(); -1 for a generator
        int generator = 0;                  // 1-based, when op == -1
        std::vector<std::size_t> children;  // element ids, when op >= 0
    };

    FreeAlgebra(FiniteAlgebra base, int m, std::size_t size_cap)
        : base_(std::move(base)), m_(m) {
        if (m_ < 1) throw std::invalid_argument("free_algebra: at least one generator required");
        if (base_.size() > 255)
            throw std::invalid_argument("free_algebra: base algebra size above 255 is not supported");
        const int n = base_.size();
        inputs_ = 1;
        for (int i = 0; i < m_; ++i) {
            if (inputs_ > (std::size_t{1} << 24) / static_cast<std::size_t>(n))
                throw resource_limit_error("free_algebra: input space too large");
            inputs_ *= static_cast<std::size_t>(n);
        }
        packed_ = (n == 2 && inputs_ <= 64);
        total_functions_ = compute_total_functions(n, inputs_);
        build(size_cap);
    }

    const FiniteAlgebra& base() const { return base_; }
    int generator_count() const { return m_; }
    std::size_t input_count() const { return inputs_; }
    std::size_t size() const { return packed_ ? packed_elems_.size() : vec_elems_.size(); }

    std::size_t generator_id(int i) const {
        if (i < 1 || i > m_) throw std::out_of_range("free_algebra: generator index out of range");
        return gens_[static_cast<std::size_t>(i) - 1];
    }

    int value(std::size_t elem, std::size_t input) const {
        if (packed_) return static_cast<int>((packed_elems_[elem] >> input) & 1u);
        return vec_elems_[elem][input];
    }

    std::vector<std::uint8_t> table_of(std::size_t elem) const {
        if (!packed_) return vec_elems_[elem];
        std::vector<std::uint8_t> out(inputs_);
        for (std::size_t i = 0; i < inputs_; ++i) out[i] = static_cast<std::uint8_t>((packed_elems_[elem] >> i) & 1u);
        return out;
    }

    std::optional<std::size_t> find(const std::vector<std::uint8_t>& vec) const {
        if (vec.size() != inputs_) return std::nullopt;
        if (packed_) {
            std::uint64_t w = 0;
            for (std::size_t i = 0; i < inputs_; ++i)
                if (vec[i]) w |= std::uint64_t{1} << i;
            return lookup_packed(w);
        }
        auto it = vec_index_.find(vec);
        if (it == vec_index_.end()) return std::nullopt;
        return it->second;
    }

    const Provenance& provenance(std::size_t elem) const { return prov_[elem]; }

    std::string term_string(std::size_t elem) const {
        const Provenance& p = prov_[elem];
        if (p.op < 0) return "x" + std::to_string(p.generator);
        std::string out = base_.operations()[p.op].name;
        out += '(';
        for (std::size_t i = 0; i < p.children.size(); ++i) {
            if (i) out += ',';
            out += term_string(p.children[i]);
        }
        out += ')';
        return out;
    }

    // Materializes the element set as a finite algebra with the same
    // operation names, for use as the carrier of generated relations.
    FiniteAlgebra as_algebra(std::size_t universe_bound) const {
        const std::size_t count = size();
        if (count > universe_bound)
            throw resource_limit_error("free algebra with " + std::to_string(count) +
                                       " elements exceeds the relation-universe bound " +
                                       std::to_string(universe_bound));
        std::vector<Operation> ops;
        for (std::size_t oi = 0; oi < base_.operations().size(); ++oi) {
            const Operation& op = base_.operations()[oi];
            Operation out{op.name, op.arity, {}};
            std::size_t entries = 1;
            for (int i = 0; i < op.arity; ++i) entries *= count;
            out.table.resize(entries);
            std::vector<std::size_t> idx(op.arity, 0);
            for (std::size_t e = 0; e < entries; ++e) {
                out.table[e] = static_cast<std::uint16_t>(apply_ids(oi, idx));
                for (int t = op.arity - 1; t >= 0; --t) {
                    if (++idx[t] < count) break;
                    idx[t] = 0;
                }
            }
            ops.push_back(std::move(out));
        }
        return FiniteAlgebra(base_.name() + "^free" + std::to_string(m_), static_cast<int>(count),
                             std::move(ops));
    }

private:
    static std::size_t compute_total_functions(int n, std::size_t inputs) {
        // n^inputs, saturated: an upper bound on the closure size.
        std::size_t total = 1;
        for (std::size_t i = 0; i < inputs; ++i) {
            if (total > (std::size_t{1} << 62) / static_cast<std::size_t>(n)) return SIZE_MAX;
            total *= static_cast<std::size_t>(n);
        }
        return total;
    }

    std::optional<std::size_t> lookup_packed(std::uint64_t w) const {
        if (!direct_index_.empty()) {
            std::int32_t id = direct_index_[w];
            if (id < 0) return std::nullopt;
            return static_cast<std::size_t>(id);
        }
        auto it = packed_index_.find(w);
        if (it == packed_index_.end()) return std::nullopt;
        return it->second;
    }

    // Insert if new; returns false when the cap would be exceeded.
    bool contains_packed(std::uint64_t w) const {
        if (!direct_index_.empty()) return direct_index_[w] >= 0;
        return packed_index_.count(w) != 0;
    }

    bool push_packed(std::uint64_t w, Provenance p, std::size_t cap) {
        if (!direct_index_.empty()) {
            if (direct_index_[w] >= 0) return true;
            if (packed_elems_.size() >= cap)
                throw resource_limit_error(cap_message());
            direct_index_[w] = static_cast<std::int32_t>(packed_elems_.size());
        } else {
            auto [it, inserted] = packed_index_.emplace(w, packed_elems_.size());
            if (!inserted) return true;
            if (packed_elems_.size() >= cap) {
                packed_index_.erase(it);
                throw resource_limit_error(cap_message());
            }
        }
        packed_elems_.push_back(w);
        prov_.push_back(std::move(p));
        return true;
    }

    void push_vec(std::vector<std::uint8_t> v, Provenance p, std::size_t cap) {
        auto it = vec_index_.find(v);
        if (it != vec_index_.end()) return;
        if (vec_elems_.size() >= cap) throw resource_limit_error(cap_message());
        vec_index_.emplace(v, vec_elems_.size());
        vec_elems_.push_back(std::move(v));
        prov_.push_back(std::move(p));
    }

    std::string cap_message() const {
        return "free algebra on " + std::to_string(m_) + " generators over " + base_.name() +
               " exceeds the element cap (" + std::to_string(size()) + " elements so far)";
    }

    std::uint64_t apply_packed_op(const Operation& op, const std::vector<std::uint64_t>& args) const {
        const std::uint64_t mask = inputs_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << inputs_) - 1);
        std::uint64_t result = 0;
        const int k = op.arity;
        for (std::size_t e = 0; e < op.table.size(); ++e) {
            if (!op.table[e]) continue;
            std::uint64_t m = mask;
            for (int t = 0; t < k; ++t) {
                bool bit = (e >> (k - 1 - t)) & 1u;
                m &= bit ? args[t] : ~args[t];
            }
            result |= m;
        }
        return result & mask;
    }

    std::size_t apply_ids(std::size_t op_index, const std::vector<std::size_t>& arg_ids) const {
        const Operation& op = base_.operations()[op_index];
        if (packed_) {
            std::vector<std::uint64_t> args;
            args.reserve(arg_ids.size());
            for (std::size_t id : arg_ids) args.push_back(packed_elems_[id]);
            std::uint64_t w = apply_packed_op(op, args);
            auto found = lookup_packed(w);
            if (!found) throw std::logic_error("free algebra: not closed under " + op.name);
            return *found;
        }
        std::vector<std::uint8_t> out(inputs_);
        std::vector<int> point(op.arity);
        for (std::size_t i = 0; i < inputs_; ++i) {
            for (int t = 0; t < op.arity; ++t) point[t] = vec_elems_[arg_ids[t]][i];
            std::size_t idx = 0;
            for (int t = 0; t < op.arity; ++t) idx = idx * base_.size() + static_cast<std::size_t>(point[t]);
            out[i] = static_cast<std::uint8_t>(op.table[idx]);
        }
        auto it = vec_index_.find(out);
        if (it == vec_index_.end()) throw std::logic_error("free algebra: not closed under " + op.name);
        return it->second;
    }

    void build(std::size_t cap) {
        const int n = base_.size();
        if (packed_ && inputs_ <= 20) direct_index_.assign(std::size_t{1} << inputs_, -1);

        // Generators: the m projections.
        for (int g = 1; g <= m_; ++g) {
            Provenance p;
            p.op = -1;
            p.generator = g;
            if (packed_) {
                std::uint64_t w = 0;
                for (std::size_t i = 0; i < inputs_; ++i)
                    if ((i >> (m_ - g)) & 1u) w |= std::uint64_t{1} << i;
                auto existing = lookup_packed(w);
                if (existing) {
                    gens_.push_back(*existing);
                } else {
                    push_packed(w, std::move(p), cap);
                    gens_.push_back(packed_elems_.size() - 1);
                }
            } else {
                std::vector<std::uint8_t> v(inputs_);
                for (std::size_t i = 0; i < inputs_; ++i) {
                    std::size_t rest = i;
                    for (int d = m_; d > g; --d) rest /= static_cast<std::size_t>(n);
                    v[i] = static_cast<std::uint8_t>(rest % static_cast<std::size_t>(n));
                }
                auto it = vec_index_.find(v);
                if (it != vec_index_.end()) {
                    gens_.push_back(it->second);
                } else {
                    push_vec(std::move(v), std::move(p), cap);
                    gens_.push_back(vec_elems_.size() - 1);
                }
            }
        }

        // Constants join the pool up front.
        for (std::size_t oi = 0; oi < base_.operations().size(); ++oi) {
            const Operation& op = base_.operations()[oi];
            if (op.arity != 0) continue;
            Provenance p;
            p.op = static_cast<int>(oi);
            if (packed_) {
                std::uint64_t w = apply_packed_op(op, {});
                push_packed(w, std::move(p), cap);
            } else {
                std::vector<std::uint8_t> v(inputs_, static_cast<std::uint8_t>(op.table[0]));
                push_vec(std::move(v), std::move(p), cap);
            }
        }

        // Closure: element i is combined with all elements of index <= i.
        for (std::size_t i = 0; i < size() && size() < total_functions_; ++i) {
            for (std::size_t oi = 0; oi < base_.operations().size(); ++oi) {
                const Operation& op = base_.operations()[oi];
                if (op.arity == 0) continue;
                if (op.arity == 1) {
                    emit(oi, {i}, cap);
                    continue;
                }
                if (op.arity == 2 && packed_) {
                    // Hot path: bit-parallel application against the whole pool.
                    const std::uint64_t mask = inputs_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << inputs_) - 1);
                    const std::uint64_t a = packed_elems_[i];
                    const std::uint8_t t00 = op.table[0], t01 = op.table[1], t10 = op.table[2], t11 = op.table[3];
                    const bool commutative = t01 == t10;
                    for (std::size_t j = 0; j <= i; ++j) {
                        const std::uint64_t b = packed_elems_[j];
                        std::uint64_t w1 = ((t00 ? (~a & ~b) : 0) | (t01 ? (~a & b) : 0) |
                                            (t10 ? (a & ~b) : 0) | (t11 ? (a & b) : 0)) & mask;
                        if (!contains_packed(w1)) push_packed(w1, make_prov(oi, {i, j}), cap);
                        if (j < i && !commutative) {
                            std::uint64_t w2 = ((t00 ? (~b & ~a) : 0) | (t01 ? (~b & a) : 0) |
                                                (t10 ? (b & ~a) : 0) | (t11 ? (b & a) : 0)) & mask;
                            if (!contains_packed(w2)) push_packed(w2, make_prov(oi, {j, i}), cap);
                        }
                        if (size() >= total_functions_) break;
                    }
                    continue;
                }
                // General arity: tuples over {0..i} containing i, lexicographic.
                std::vector<std::size_t> idx(op.arity, 0);
                while (true) {
                    bool uses_i = false;
                    for (std::size_t v : idx)
                        if (v == i) { uses_i = true; break; }
                    if (uses_i) emit(oi, idx, cap);
                    int t = op.arity - 1;
                    while (t >= 0 && ++idx[t] > i) idx[t--] = 0;
                    if (t < 0) break;
                    if (size() >= total_functions_) break;
                }
            }
        }
    }

    static Provenance make_prov(std::size_t oi, std::vector<std::size_t> children) {
        Provenance p;
        p.op = static_cast<int>(oi);
        p.children = std::move(children);
        return p;
    }

    void emit(std::size_t oi, const std::vector<std::size_t>& arg_ids, std::size_t cap) {
        const Operation& op = base_.operations()[oi];
        if (packed_) {
            std::vector<std::uint64_t> args;
            args.reserve(arg_ids.size());
            for (std::size_t id : arg_ids) args.push_back(packed_elems_[id]);
            push_packed(apply_packed_op(op, args), make_prov(oi, arg_ids), cap);
            return;
        }
        std::vector<std::uint8_t> out(inputs_);
        std::size_t nsz = static_cast<std::size_t>(base_.size());
        for (std::size_t i = 0; i < inputs_; ++i) {
            std::size_t idx = 0;
            for (std::size_t t = 0; t < arg_ids.size(); ++t)
                idx = idx * nsz + static_cast<std::size_t>(vec_elems_[arg_ids[t]][i]);
            out[i] = static_cast<std::uint8_t>(op.table[idx]);
        }
        push_vec(std::move(out), make_prov(oi, arg_ids), cap);
    }

    FiniteAlgebra base_;
    int m_;
    std::size_t inputs_ = 0;
    bool packed_ = false;
    std::size_t total_functions_ = SIZE_MAX;

    std::vector<std::uint64_t> packed_elems_;
    std::vector<std::vector<std::uint8_t>> vec_elems_;
    std::vector<Provenance> prov_;
    std::vector<std::size_t> gens_;

    std::vector<std::int32_t> direct_index_;
    std::unordered_map<std::uint64_t, std::size_t> packed_index_;
    std::map<std::vector<std::uint8_t>, std::size_t> vec_index_;
};

inline constexpr std::size_t kDefaultFreeCap = 200000;

inline FreeAlgebra free_algebra(const FiniteAlgebra& a, int m, std::size_t size_cap = kDefaultFreeCap) {
    return FreeAlgebra(a, m, size_cap);
}

} // namespace malcev
