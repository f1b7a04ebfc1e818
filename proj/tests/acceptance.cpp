// Acceptance gate: ten end-to-end checks, each with a wall-clock budget.
// Prints one [PASS]/[FAIL] line per criterion; the exit code is the number
// of failures.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "support/test_support.hpp"

using namespace malcev;

namespace {

struct Criterion {
    std::string label;
    double limit_seconds;
    std::function<void()> body;  // throws std::runtime_error on failure
};

void expect(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
}

FiniteAlgebra catalog(const std::string& name) {
    auto a = make_catalog_algebra(name);
    expect(a.has_value(), "catalog algebra missing: " + name);
    return *a;
}

std::string slurp(const std::string& name) {
    std::ifstream in(std::string(GOLDEN_DIR) + "/" + name, std::ios::binary);
    expect(in.good(), "cannot open golden file " + name);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// --------------------------------------------------------------------------

void criterion_regularity() {
    struct Example {
        const char* text;
        bool regular;
    };
    const Example examples[] = {
        {"X & (Y o Z)", true},
        {"X & (Y o X o Y)", true},
        {"X o X", false},
        {"X & (Y o Z o X)", false},
    };
    for (const Example& e : examples) {
        RelTerm t = parse_term(e.text);
        expect(is_regular(t) == e.regular, std::string("classification of ") + e.text);
        expect(graph_is_regular(build_graph(t)) == e.regular,
               std::string("graph classification of ") + e.text);
    }
    std::mt19937 g(101u);
    auto pool = testsup::var_pool({"X", "Y", "Z", "W"});
    for (int i = 0; i < 1000; ++i) {
        RelTerm t = testsup::random_plus_free_term(g, pool, 6);
        expect(is_regular(t) == graph_is_regular(build_graph(t)),
               "syntactic/graph regularity disagree on " + render(t));
    }
}

void criterion_class_sizes() {
    std::mt19937 g(202u);
    auto pool = testsup::var_pool({"X", "Y", "Z"});
    for (int i = 0; i < 500; ++i) {
        RelTerm t = testsup::random_regular_term(g, pool, 5);
        LabelledGraph gr = build_graph(t);
        EdgePairs tp = edge_pairs(gr);
        for (const auto& [label, pairs] : tp.groups()) {
            VertexPartition part(gr.vertex_count(), pairs);
            expect(part.max_class_size() <= 2,
                   "class of size > 2 in regular term " + render(t));
        }
    }
    LabelledGraph xx = build_graph(parse_term("X o X"));
    EdgePairs xp = edge_pairs(xx);
    const auto* pairs = xp.find(VarId{1, "X"});
    expect(pairs != nullptr, "X o X pair system missing");
    expect(VertexPartition(xx.vertex_count(), *pairs).max_class_size() == 3,
           "X o X should fuse all three vertices");
}

void criterion_assignment_oracle() {
    std::mt19937 g(303u);
    auto pool = testsup::var_pool({"X", "Y", "Z"});
    for (int i = 0; i < 1000; ++i) {
        RelTerm t = testsup::random_plus_free_term(g, pool, 4);
        int n = std::uniform_int_distribution<int>(2, 3)(g);
        RelEnv env = testsup::random_env(g, t, n, false);
        BinRel value = eval_term(t, env);
        LabelledGraph gr = build_graph(t);
        int a = std::uniform_int_distribution<int>(0, n - 1)(g);
        int b = std::uniform_int_distribution<int>(0, n - 1)(g);
        auto asg = find_assignment(gr, env, a, b);
        expect(value.test(a, b) == asg.has_value(),
               "membership/assignment mismatch for " + render(t));
        if (asg)
            expect(check_assignment(gr, env, *asg),
                   "returned assignment fails verification for " + render(t));
    }
}

void criterion_permutability_condition() {
    MalcevCondition cond = gen_eq(parse_inequality("A o B <= B o A"));
    int nontrivial = 0;
    for (const FormalIdentity& id : cond.identities)
        if (!cond.is_trivial(id)) ++nontrivial;
    expect(nontrivial == 2, "expected exactly two nontrivial identities");
    expect(cond.identities.size() == 2, "expected exactly two identities");
    int unpinned = 0;
    for (const TermSymbol& s : cond.symbols) {
        expect(s.arity == 3, "all symbols should be ternary");
        if (!s.projection) ++unpinned;
    }
    expect(unpinned == 1, "expected one unpinned ternary symbol");

    auto witnesses = synthesize_terms(catalog("z2"), cond);
    expect(witnesses.has_value(), "no witness over z2");
    const std::vector<std::uint8_t> want{0, 1, 1, 0, 1, 0, 0, 1};
    expect((*witnesses)[2].table == want, "z2 witness is not x + y + z");
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z)
                expect((*witnesses)[2].table[static_cast<std::size_t>(4 * x + 2 * y + z)] ==
                           (x ^ y ^ z),
                       "witness value mismatch at a point");

    expect(!synthesize_terms(catalog("slat2"), cond).has_value(),
           "slat2 unexpectedly admits a permutability witness");
}

void criterion_transitivity_modes() {
    Inequality ineq = parse_inequality("X o X <= X");
    expect(check_variety(catalog("z2"), ineq, RelMode::crr).holds,
           "z2 should pass the crr test");
    expect(!check_variety(catalog("lat2"), ineq, RelMode::crr).holds,
           "lat2 should fail the crr test");
    expect(check_variety(catalog("z2"), ineq, RelMode::con).holds,
           "z2 should pass the con test");
    expect(check_variety(catalog("lat2"), ineq, RelMode::con).holds,
           "lat2 should pass the con test");
}

void criterion_majority() {
    Inequality ineq = parse_inequality("R & (S o T) <= (R & S) o T");
    for (const std::string& name : catalog_names()) {
        FiniteAlgebra a = catalog(name);
        if (a.size() > 3) continue;
        CheckVerdict crr = check_variety(a, ineq, RelMode::crr);
        CheckVerdict con = check_variety(a, ineq, RelMode::con);
        expect(crr.holds == con.holds, "crr/con disagree on " + name);
        if (name == "lat2" || name == "bool2")
            expect(crr.holds, name + " should satisfy the majority inequality");
        if (name == "slat2" || name == "bare2")
            expect(!crr.holds, name + " should fail the majority inequality");
    }
    auto witnesses = synthesize_terms(catalog("bool2"), gen_eq(ineq));
    expect(witnesses.has_value(), "no majority witness over bool2");
    const std::vector<std::uint8_t> median{0, 0, 0, 1, 0, 1, 1, 1};
    expect((*witnesses)[2].table == median, "bool2 witness is not the median");
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z) {
                int maj = (x + y + z) >= 2 ? 1 : 0;
                expect((*witnesses)[2].table[static_cast<std::size_t>(4 * x + 2 * y + z)] == maj,
                       "median value mismatch at a point");
            }
}

void criterion_pair_shapes() {
    for (const std::string& name : catalog_names()) {
        FiniteAlgebra a = catalog(name);
        if (a.size() > 3) continue;
        expect(thr_pair_check(a), "pair-shape agreement fails on " + name);
    }
    std::mt19937 g(7707u);
    for (int i = 0; i < 50; ++i) {
        FiniteAlgebra a = testsup::random_two_element_binary(g);
        expect(thr_pair_check(a), "pair-shape agreement fails on a random algebra");
    }
}

void criterion_two_sided_consistency() {
    std::mt19937 g(8801u);
    const char* names[] = {"z2", "lat2", "slat2", "bool2"};
    for (int i = 0; i < 20; ++i) {
        Inequality ineq = testsup::random_consistency_inequality(g);
        for (const char* name : names) {
            FiniteAlgebra a = catalog(name);
            bool generic = check_variety(a, ineq, RelMode::crr).holds;
            bool witnessed = synthesize_terms(a, gen_eqr(ineq)).has_value();
            expect(generic == witnessed,
                   std::string(name) + " two routes disagree on " + render(ineq));
        }
    }
}

void criterion_application_family() {
    const std::string base = "R & (S o T) <= T o S o (R & S) o (R & T)";
    for (int n = 2; n <= 3; ++n) {
        std::string text = base;
        for (int extra = 2; extra < n; ++extra) text += " o (R & S)";
        MalcevCondition cond = gen_eqr(parse_inequality(text));
        std::string got = render_condition(cond, ConditionFormat::json) + "\n";
        std::string golden = slurp("app-n" + std::to_string(n) + ".json");
        expect(got == golden, "generated condition differs from golden n=" + std::to_string(n));

        int arity4 = 0, arity3 = 0;
        for (const TermSymbol& s : cond.symbols) {
            if (s.arity == 4) ++arity4;
            if (s.arity == 3) ++arity3;
        }
        expect(arity4 == 2 * n + 2,
               "expected " + std::to_string(2 * n + 2) + " symbols of arity 4");
        expect(arity3 == n + 3, "expected " + std::to_string(n + 3) + " ternary symbols");
        expect(cond.m == 3, "variable pool should have three members");
    }
}

void criterion_plus_semantics() {
    std::mt19937 g(404u);
    auto pool = testsup::var_pool({"R", "T"});
    RelTerm sum = RelTerm::plus(RelTerm::variable(pool[0]), RelTerm::variable(pool[1]));
    for (int i = 0; i < 200; ++i) {
        int n = std::uniform_int_distribution<int>(1, 4)(g);
        BinRel r = testsup::random_reflexive(g, n);
        BinRel t = testsup::random_reflexive(g, n);
        PlusResult pr = plus_with_index(r, t);
        BinRel acc(n);
        for (int k = 1; k <= pr.stabilized_at; ++k) acc |= kfold(r, t, k);
        expect(acc == pr.rel, "sum is not the union of its products");
        expect(pr.rel == testsup::transitive_closure_oracle(r | t),
               "sum differs from the transitive closure of the union");

        RelEnv env;
        env.emplace(pool[0], r);
        env.emplace(pool[1], t);
        int k = pr.stabilized_at < 2 ? 2 : pr.stabilized_at;
        expect(eval_term(sum, env) == eval_term(expand_plus(sum, k), env),
               "expanded evaluation differs at the stabilization index");
    }
}

}  // namespace

int main() {
    std::vector<Criterion> criteria{
        {"regularity classification", 5.0, criterion_regularity},
        {"pair-system class sizes", 5.0, criterion_class_sizes},
        {"assignment oracle", 30.0, criterion_assignment_oracle},
        {"permutability condition", 10.0, criterion_permutability_condition},
        {"transitivity mode split", 30.0, criterion_transitivity_modes},
        {"majority harness", 60.0, criterion_majority},
        {"pair-shape harness", 120.0, criterion_pair_shapes},
        {"two-sided consistency", 300.0, criterion_two_sided_consistency},
        {"application family", 5.0, criterion_application_family},
        {"+ semantics", 10.0, criterion_plus_semantics},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        auto start = std::chrono::steady_clock::now();
        std::string failure;
        try {
            c.body();
        } catch (const std::exception& e) {
            failure = e.what();
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (failure.empty() && elapsed > c.limit_seconds) {
            std::ostringstream over;
            over << "exceeded the " << c.limit_seconds << " s budget";
            failure = over.str();
        }
        std::ostringstream line;
        line.setf(std::ios::fixed);
        line.precision(2);
        line << (failure.empty() ? "[PASS]" : "[FAIL]") << " criterion " << (i + 1) << ": "
             << c.label << " (" << elapsed << " s)";
        if (!failure.empty()) line << " -- " << failure;
        std::cout << line.str() << std::endl;
        if (!failure.empty()) ++failures;
    }
    return failures;
}
