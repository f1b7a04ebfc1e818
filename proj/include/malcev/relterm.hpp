#pragma once

// Terms over binary-relation variables built from intersection (&, U+2227),
// relational composition (o, U+2218) and the alternating-product operator (+).
// Grammar, with precedence & > o > + and every operator left-associative:
//
//   inequality := term "<=" term
//   term       := compose ("+" compose)*
//   compose    := meet ("o" meet)*
//   meet       := atom ("&" atom)*
//   atom       := IDENT | "(" term ")"
//
// IDENT is [A-Za-z_][A-Za-z0-9_]* except the reserved operator spelling "o".
// Variables are interned in first-occurrence order; an inequality shares one
// variable table across both sides.

#include <algorithm>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace malcev {

// ============================================================================
// Variables
// ============================================================================

// Identity is the 1-based index; the name is display-only.
struct VarId {
    int index = 0;
    std::string name;

    std::string display() const {
        return name.empty() ? "X" + std::to_string(index) : name;
    }

    friend bool operator==(const VarId& a, const VarId& b) { return a.index == b.index; }
    friend bool operator!=(const VarId& a, const VarId& b) { return a.index != b.index; }
    friend bool operator<(const VarId& a, const VarId& b) { return a.index < b.index; }
};

// ============================================================================
// Term AST
// ============================================================================

enum class TermKind { variable, meet, compose, plus };

class RelTerm {
public:
    RelTerm() = default;

    static RelTerm variable(VarId v);
    static RelTerm meet(RelTerm l, RelTerm r) { return binary(TermKind::meet, std::move(l), std::move(r)); }
    static RelTerm compose(RelTerm l, RelTerm r) { return binary(TermKind::compose, std::move(l), std::move(r)); }
    static RelTerm plus(RelTerm l, RelTerm r) { return binary(TermKind::plus, std::move(l), std::move(r)); }

    bool valid() const { return node_ != nullptr; }
    TermKind kind() const;
    bool is_variable() const { return kind() == TermKind::variable; }

    const VarId& var() const;
    const RelTerm& left() const;
    const RelTerm& right() const;

    bool is_plus_free() const;

    // Distinct variables, ascending index.
    std::vector<VarId> variables() const {
        std::set<VarId> s;
        collect_vars(s);
        return {s.begin(), s.end()};
    }

    int arity() const { return static_cast<int>(variables().size()); }

    int occurrence_count() const;
    int count_kind(TermKind k) const;

    friend bool operator==(const RelTerm& a, const RelTerm& b);
    friend bool operator!=(const RelTerm& a, const RelTerm& b) { return !(a == b); }

private:
    struct Node;  // defined after the class; holds RelTerm children

    static RelTerm binary(TermKind k, RelTerm l, RelTerm r);
    const Node& require() const;
    void collect_vars(std::set<VarId>& s) const;

    std::shared_ptr<const Node> node_;
};

struct RelTerm::Node {
    TermKind kind;
    VarId var;       // variable nodes only
    RelTerm left;    // binary nodes only
    RelTerm right;
    Node(TermKind k, VarId v) : kind(k), var(std::move(v)) {}
    Node(TermKind k, RelTerm l, RelTerm r) : kind(k), left(std::move(l)), right(std::move(r)) {}
};

inline RelTerm RelTerm::variable(VarId v) {
    RelTerm t;
    t.node_ = std::make_shared<Node>(TermKind::variable, std::move(v));
    return t;
}

inline RelTerm RelTerm::binary(TermKind k, RelTerm l, RelTerm r) {
    if (!l.valid() || !r.valid()) throw std::logic_error("RelTerm: invalid operand");
    RelTerm t;
    t.node_ = std::make_shared<Node>(k, std::move(l), std::move(r));
    return t;
}

inline const RelTerm::Node& RelTerm::require() const {
    if (!node_) throw std::logic_error("RelTerm: empty term");
    return *node_;
}

inline TermKind RelTerm::kind() const { return require().kind; }

inline const VarId& RelTerm::var() const {
    if (kind() != TermKind::variable) throw std::logic_error("RelTerm::var: not a variable node");
    return require().var;
}

inline const RelTerm& RelTerm::left() const {
    if (kind() == TermKind::variable) throw std::logic_error("RelTerm::left: variable node");
    return require().left;
}

inline const RelTerm& RelTerm::right() const {
    if (kind() == TermKind::variable) throw std::logic_error("RelTerm::right: variable node");
    return require().right;
}

inline bool RelTerm::is_plus_free() const {
    const Node& n = require();
    if (n.kind == TermKind::plus) return false;
    if (n.kind == TermKind::variable) return true;
    return n.left.is_plus_free() && n.right.is_plus_free();
}

inline int RelTerm::occurrence_count() const {
    const Node& n = require();
    if (n.kind == TermKind::variable) return 1;
    return n.left.occurrence_count() + n.right.occurrence_count();
}

inline int RelTerm::count_kind(TermKind k) const {
    const Node& n = require();
    int self = n.kind == k ? 1 : 0;
    if (n.kind == TermKind::variable) return self;
    return self + n.left.count_kind(k) + n.right.count_kind(k);
}

inline void RelTerm::collect_vars(std::set<VarId>& s) const {
    const Node& n = require();
    if (n.kind == TermKind::variable) {
        s.insert(n.var);
        return;
    }
    n.left.collect_vars(s);
    n.right.collect_vars(s);
}

inline bool operator==(const RelTerm& a, const RelTerm& b) {
    const RelTerm::Node& x = a.require();
    const RelTerm::Node& y = b.require();
    if (x.kind != y.kind) return false;
    if (x.kind == TermKind::variable) return x.var == y.var;
    return x.left == y.left && x.right == y.right;
}

struct Inequality {
    RelTerm lhs;
    RelTerm rhs;

    std::vector<VarId> variables() const {
        std::set<VarId> s;
        for (const VarId& v : lhs.variables()) s.insert(v);
        for (const VarId& v : rhs.variables()) s.insert(v);
        return {s.begin(), s.end()};
    }
};

// ============================================================================
// Errors
// ============================================================================

class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& what, std::size_t position)
        : std::runtime_error(what + " (at position " + std::to_string(position) + ")"),
          position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

// ============================================================================
// Parser
// ============================================================================

namespace detail {

enum class Tok { ident, amp, circ, plus, le, lparen, rparen, end };

class Lexer {
public:
    explicit Lexer(std::string_view s) : src_(s) { advance(); }

    Tok tok() const { return tok_; }
    const std::string& ident() const { return ident_; }
    std::size_t pos() const { return tok_pos_; }

    void advance() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' ||
                                      src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
        tok_pos_ = pos_;
        if (pos_ >= src_.size()) {
            tok_ = Tok::end;
            return;
        }
        char c = src_[pos_];
        if (c == '&') { tok_ = Tok::amp; ++pos_; return; }
        if (c == '+') { tok_ = Tok::plus; ++pos_; return; }
        if (c == '(') { tok_ = Tok::lparen; ++pos_; return; }
        if (c == ')') { tok_ = Tok::rparen; ++pos_; return; }
        if (c == '<') {
            if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
                tok_ = Tok::le;
                pos_ += 2;
                return;
            }
            throw parse_error("unexpected '<'", pos_);
        }
        if (match_utf8("\xe2\x88\xa7")) { tok_ = Tok::amp; return; }   // wedge
        if (match_utf8("\xe2\x88\x98")) { tok_ = Tok::circ; return; }  // ring
        if (is_ident_start(c)) {
            std::size_t start = pos_;
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            ident_.assign(src_.substr(start, pos_ - start));
            if (ident_ == "o") {
                tok_ = Tok::circ;
            } else {
                tok_ = Tok::ident;
            }
            return;
        }
        throw parse_error("unexpected character", pos_);
    }

private:
    static bool is_ident_start(char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
    }
    static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

    bool match_utf8(std::string_view bytes) {
        if (src_.substr(pos_, bytes.size()) == bytes) {
            pos_ += bytes.size();
            return true;
        }
        return false;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t tok_pos_ = 0;
    Tok tok_ = Tok::end;
    std::string ident_;
};

class Parser {
public:
    explicit Parser(std::string_view s) : lex_(s) {}

    RelTerm parse_full_term() {
        RelTerm t = term();
        expect_end();
        return t;
    }

    Inequality parse_full_inequality() {
        RelTerm l = term();
        if (lex_.tok() != Tok::le) throw parse_error("expected '<='", lex_.pos());
        lex_.advance();
        RelTerm r = term();
        expect_end();
        return Inequality{std::move(l), std::move(r)};
    }

private:
    RelTerm term() {
        RelTerm t = compose();
        while (lex_.tok() == Tok::plus) {
            lex_.advance();
            t = RelTerm::plus(std::move(t), compose());
        }
        return t;
    }

    RelTerm compose() {
        RelTerm t = meet();
        while (lex_.tok() == Tok::circ) {
            lex_.advance();
            t = RelTerm::compose(std::move(t), meet());
        }
        return t;
    }

    RelTerm meet() {
        RelTerm t = atom();
        while (lex_.tok() == Tok::amp) {
            lex_.advance();
            t = RelTerm::meet(std::move(t), atom());
        }
        return t;
    }

    RelTerm atom() {
        if (lex_.tok() == Tok::lparen) {
            lex_.advance();
            RelTerm t = term();
            if (lex_.tok() != Tok::rparen) throw parse_error("expected ')'", lex_.pos());
            lex_.advance();
            return t;
        }
        if (lex_.tok() == Tok::ident) {
            std::string name = lex_.ident();
            lex_.advance();
            return RelTerm::variable(intern(name));
        }
        throw parse_error("expected a variable or '('", lex_.pos());
    }

    void expect_end() {
        if (lex_.tok() != Tok::end) throw parse_error("unexpected trailing input", lex_.pos());
    }

    VarId intern(const std::string& name) {
        auto it = indices_.find(name);
        if (it == indices_.end()) it = indices_.emplace(name, static_cast<int>(indices_.size()) + 1).first;
        return VarId{it->second, name};
    }

    Lexer lex_;
    std::unordered_map<std::string, int> indices_;
};

} // namespace detail

inline RelTerm parse_term(std::string_view text) {
    return detail::Parser(text).parse_full_term();
}

inline Inequality parse_inequality(std::string_view text) {
    return detail::Parser(text).parse_full_inequality();
}

// ============================================================================
// Rendering
// ============================================================================

enum class TermFormat { text, latex };

namespace detail {

inline int precedence(TermKind k) {
    switch (k) {
        case TermKind::variable: return 4;
        case TermKind::meet: return 3;
        case TermKind::compose: return 2;
        case TermKind::plus: return 1;
    }
    return 0;
}

inline const char* op_spelling(TermKind k, TermFormat f) {
    switch (k) {
        case TermKind::meet: return f == TermFormat::text ? " & " : " \\wedge ";
        case TermKind::compose: return f == TermFormat::text ? " o " : " \\circ ";
        case TermKind::plus: return " + ";
        default: return "";
    }
}

inline void render_into(const RelTerm& t, TermFormat f, std::string& out) {
    if (t.kind() == TermKind::variable) {
        out += t.var().display();
        return;
    }
    int p = precedence(t.kind());
    auto child = [&](const RelTerm& c, bool needs_paren) {
        if (needs_paren) out += '(';
        render_into(c, f, out);
        if (needs_paren) out += ')';
    };
    // Left-associative: the left child may share this precedence level,
    // the right child needs parentheses at equal precedence.
    child(t.left(), precedence(t.left().kind()) < p);
    out += op_spelling(t.kind(), f);
    child(t.right(), precedence(t.right().kind()) <= p);
}

} // namespace detail

inline std::string render(const RelTerm& t, TermFormat f = TermFormat::text) {
    std::string out;
    detail::render_into(t, f, out);
    return out;
}

inline std::string render(const Inequality& ineq, TermFormat f = TermFormat::text) {
    return render(ineq.lhs, f) + (f == TermFormat::text ? " <= " : " \\leq ") + render(ineq.rhs, f);
}

// ============================================================================
// Variable-flow sets and regularity
// ============================================================================

namespace detail {

struct VarFlow {
    std::set<VarId> left;
    std::set<VarId> right;
    bool regular;
};

inline bool disjoint(const std::set<VarId>& a, const std::set<VarId>& b) {
    for (const VarId& v : a)
        if (b.count(v)) return false;
    return true;
}

// Computes the left/right variable sets and the regularity flag in one pass.
// left(X) = right(X) = {X}; composition chains left of the head and right of
// the tail; intersection merges both sides.
inline VarFlow var_flow(const RelTerm& t) {
    switch (t.kind()) {
        case TermKind::variable:
            return {{t.var()}, {t.var()}, true};
        case TermKind::compose: {
            VarFlow a = var_flow(t.left());
            VarFlow b = var_flow(t.right());
            bool reg = a.regular && b.regular && disjoint(a.right, b.left);
            return {std::move(a.left), std::move(b.right), reg};
        }
        case TermKind::meet: {
            VarFlow a = var_flow(t.left());
            VarFlow b = var_flow(t.right());
            bool reg = a.regular && b.regular && disjoint(a.left, b.left) && disjoint(a.right, b.right);
            VarFlow out;
            out.left = std::move(a.left);
            out.left.insert(b.left.begin(), b.left.end());
            out.right = std::move(a.right);
            out.right.insert(b.right.begin(), b.right.end());
            out.regular = reg;
            return out;
        }
        case TermKind::plus:
            throw std::invalid_argument("term contains '+'");
    }
    throw std::logic_error("var_flow: unreachable");
}

} // namespace detail

inline std::set<VarId> left_vars(const RelTerm& t) { return detail::var_flow(t).left; }
inline std::set<VarId> right_vars(const RelTerm& t) { return detail::var_flow(t).right; }
inline bool is_regular(const RelTerm& t) { return detail::var_flow(t).regular; }

// ============================================================================
// Plus expansion
// ============================================================================

// Replaces every u + v by the alternating composition u o v o u o ... with
// exactly k factors (k >= 2), processed innermost-first.
inline RelTerm expand_plus(const RelTerm& t, int k) {
    if (k < 2) throw std::invalid_argument("expand_plus: k must be at least 2");
    switch (t.kind()) {
        case TermKind::variable:
            return t;
        case TermKind::meet:
            return RelTerm::meet(expand_plus(t.left(), k), expand_plus(t.right(), k));
        case TermKind::compose:
            return RelTerm::compose(expand_plus(t.left(), k), expand_plus(t.right(), k));
        case TermKind::plus: {
            RelTerm u = expand_plus(t.left(), k);
            RelTerm v = expand_plus(t.right(), k);
            RelTerm acc = u;
            for (int i = 2; i <= k; ++i) acc = RelTerm::compose(std::move(acc), i % 2 == 0 ? v : u);
            return acc;
        }
    }
    throw std::logic_error("expand_plus: unreachable");
}

inline Inequality expand_plus(const Inequality& ineq, int k) {
    return Inequality{expand_plus(ineq.lhs, k), expand_plus(ineq.rhs, k)};
}

} // namespace malcev
