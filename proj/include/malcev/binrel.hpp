#pragma once

// Binary relations over a finite universe {0, ..., n-1}, stored as n x n bit
// matrices (row-major, 64-bit words). Composition is boolean matrix product;
// the alternating-product operator accumulates the union of all alternating
// compositions R, RoT, RoToR, ... until the union stabilizes.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace malcev {

class BinRel {
public:
    explicit BinRel(int n) : n_(check_size(n)), words_(words_per_row(n)), bits_(static_cast<std::size_t>(n) * words_, 0) {}

    static BinRel diagonal(int n) {
        BinRel r(n);
        for (int i = 0; i < n; ++i) r.set(i, i);
        return r;
    }

    static BinRel full(int n) {
        BinRel r(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) r.set(i, j);
        return r;
    }

    static BinRel from_pairs(int n, const std::vector<std::pair<int, int>>& pairs) {
        BinRel r(n);
        for (auto [a, b] : pairs) r.set(a, b);
        return r;
    }

    int universe() const { return n_; }

    bool test(int a, int b) const {
        check_index(a);
        check_index(b);
        return (bits_[row_word(a, b)] >> (b & 63)) & 1u;
    }

    void set(int a, int b) {
        check_index(a);
        check_index(b);
        bits_[row_word(a, b)] |= std::uint64_t{1} << (b & 63);
    }

    void clear(int a, int b) {
        check_index(a);
        check_index(b);
        bits_[row_word(a, b)] &= ~(std::uint64_t{1} << (b & 63));
    }

    friend bool operator==(const BinRel& a, const BinRel& b) {
        return a.n_ == b.n_ && a.bits_ == b.bits_;
    }
    friend bool operator!=(const BinRel& a, const BinRel& b) { return !(a == b); }

    BinRel operator&(const BinRel& o) const {
        check_same(o);
        BinRel r(n_);
        for (std::size_t w = 0; w < bits_.size(); ++w) r.bits_[w] = bits_[w] & o.bits_[w];
        return r;
    }

    BinRel operator|(const BinRel& o) const {
        check_same(o);
        BinRel r(n_);
        for (std::size_t w = 0; w < bits_.size(); ++w) r.bits_[w] = bits_[w] | o.bits_[w];
        return r;
    }

    BinRel& operator|=(const BinRel& o) {
        check_same(o);
        for (std::size_t w = 0; w < bits_.size(); ++w) bits_[w] |= o.bits_[w];
        return *this;
    }

    bool subset_of(const BinRel& o) const {
        check_same(o);
        for (std::size_t w = 0; w < bits_.size(); ++w)
            if (bits_[w] & ~o.bits_[w]) return false;
        return true;
    }

    bool is_reflexive() const {
        for (int i = 0; i < n_; ++i)
            if (!test(i, i)) return false;
        return true;
    }

    bool is_symmetric() const {
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j)
                if (test(i, j) != test(j, i)) return false;
        return true;
    }

    bool is_transitive() const;

    std::size_t pair_count() const {
        std::size_t c = 0;
        for (std::uint64_t w : bits_) c += static_cast<std::size_t>(__builtin_popcountll(w));
        return c;
    }

    // Row-major order.
    std::vector<std::pair<int, int>> pairs() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(pair_count());
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (test(i, j)) out.emplace_back(i, j);
        return out;
    }

    const std::uint64_t* row(int i) const { return bits_.data() + static_cast<std::size_t>(i) * words_; }
    std::uint64_t* row(int i) { return bits_.data() + static_cast<std::size_t>(i) * words_; }
    int row_words() const { return words_; }

private:
    static int check_size(int n) {
        if (n <= 0) throw std::invalid_argument("BinRel: universe size must be positive");
        return n;
    }
    static int words_per_row(int n) { return (n + 63) / 64; }

    void check_index(int a) const {
        if (a < 0 || a >= n_) throw std::out_of_range("BinRel: element out of range");
    }
    void check_same(const BinRel& o) const {
        if (n_ != o.n_) throw std::invalid_argument("BinRel: universe size mismatch");
    }
    std::size_t row_word(int a, int b) const {
        return static_cast<std::size_t>(a) * words_ + static_cast<std::size_t>(b >> 6);
    }

    int n_;
    int words_;
    std::vector<std::uint64_t> bits_;
};

// Relational composition: (a, c) whenever (a, b) in r and (b, c) in t.
inline BinRel compose(const BinRel& r, const BinRel& t) {
    if (r.universe() != t.universe()) throw std::invalid_argument("compose: universe size mismatch");
    const int n = r.universe();
    const int words = r.row_words();
    BinRel out(n);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t* ri = r.row(i);
        std::uint64_t* oi = out.row(i);
        for (int jw = 0; jw < words; ++jw) {
            std::uint64_t bitsw = ri[jw];
            while (bitsw) {
                int j = jw * 64 + __builtin_ctzll(bitsw);
                bitsw &= bitsw - 1;
                const std::uint64_t* tj = t.row(j);
                for (int w = 0; w < words; ++w) oi[w] |= tj[w];
            }
        }
    }
    return out;
}

inline bool BinRel::is_transitive() const {
    return compose(*this, *this).subset_of(*this);
}

// k-fold alternating composition: factors alternate r, t, r, ... (k of them,
// k >= 1), so kfold(r, t, 1) = r and kfold(r, t, 2) = r o t.
inline BinRel kfold(const BinRel& r, const BinRel& t, int k) {
    if (k < 1) throw std::invalid_argument("kfold: k must be at least 1");
    BinRel acc = r;
    for (int i = 2; i <= k; ++i) acc = compose(acc, i % 2 == 0 ? t : r);
    return acc;
}

struct PlusResult {
    BinRel rel;
    // Smallest k such that the union of the first k alternating compositions
    // already equals the full union.
    int stabilized_at;
};

// Union of all k-fold alternating compositions, k >= 1. For reflexive inputs
// the k-folds form an increasing chain; the chain is final once it absorbs
// both factors, i.e. after two consecutive steps without change (a single
// stall is not enough, the alternation may still grow on the other factor).
// For general inputs the (matrix, parity) state sequence is detected for
// cycles.
inline PlusResult plus_with_index(const BinRel& r, const BinRel& t) {
    if (r.universe() != t.universe()) throw std::invalid_argument("plus: universe size mismatch");
    BinRel acc = r;
    BinRel cur = r;
    int last_growth = 1;
    int stalls = 0;
    const bool reflexive = r.is_reflexive() && t.is_reflexive();
    std::vector<std::pair<BinRel, int>> seen;  // (k-fold value, factor-count parity)
    if (!reflexive) seen.emplace_back(cur, 1);
    for (int k = 2;; ++k) {
        BinRel next = compose(cur, k % 2 == 0 ? t : r);
        if (reflexive) {
            stalls = next == cur ? stalls + 1 : 0;
            if (stalls == 2) break;
        } else {
            bool repeated = false;
            for (const auto& [m, parity] : seen)
                if (parity == k % 2 && m == next) {
                    repeated = true;
                    break;
                }
            if (repeated) break;
            seen.emplace_back(next, k % 2);
        }
        cur = std::move(next);
        BinRel grown = acc | cur;
        if (grown != acc) {
            acc = std::move(grown);
            last_growth = k;
        }
    }
    return PlusResult{std::move(acc), last_growth};
}

inline BinRel plus(const BinRel& r, const BinRel& t) { return plus_with_index(r, t).rel; }

} // namespace malcev
