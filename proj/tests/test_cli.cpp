#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include <malcev/cli.hpp>
#include <malcev/malcev.hpp>

using namespace malcev;

namespace {

struct RunResult {
    int code = 0;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    RunResult r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

struct EnvGuard {
    explicit EnvGuard(const char* name, const char* value) : name_(name) {
        if (value)
            setenv(name, value, 1);
        else
            unsetenv(name);
    }
    ~EnvGuard() { unsetenv(name_); }
    const char* name_;
};

std::string slurp_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    std::filesystem::path p = std::filesystem::path("cli_scratch") / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("term subcommand reports structure") {
    RunResult r = run_cli({"term", "R & (S o T)"});
    REQUIRE(r.code == 0);
    REQUIRE(r.out ==
            "term: R & (S o T)\n"
            "variables: R, S, T\n");

    RunResult v = run_cli({"term", "R & (S o T)", "--vars", "--regular"});
    REQUIRE(v.code == 0);
    REQUIRE(v.out ==
            "term: R & (S o T)\n"
            "variables: R, S, T\n"
            "left: {R, S}\n"
            "right: {R, T}\n"
            "regular: true\n");

    RunResult l = run_cli({"term", "A + B o C", "--latex"});
    REQUIRE(l.code == 0);
    REQUIRE(l.out ==
            "term: A + B o C\n"
            "variables: A, B, C\n"
            "latex: A + B \\circ C\n");

    RunResult bad = run_cli({"term", "X + Y", "--regular"});
    REQUIRE(bad.code == 2);
    REQUIRE(bad.err ==
            "error: left/right sets and regularity are defined for +-free terms only\n");

    RunResult parse = run_cli({"term", "S o <= T"});
    REQUIRE(parse.code == 2);
    REQUIRE(parse.err == "error: expected a variable or '(' (at position 4)\n");
}

TEST_CASE("graph subcommand summarizes, expands, and exports") {
    RunResult r = run_cli({"graph", "R & (S o T)"});
    REQUIRE(r.code == 0);
    REQUIRE(r.out ==
            "vertices: 3\n"
            "y1 -> y2 [R]\n"
            "y1 -> y3 [S]\n"
            "y3 -> y2 [T]\n");

    RunResult dot = run_cli({"graph", "S o T", "--dot"});
    REQUIRE(dot.code == 0);
    REQUIRE(dot.out ==
            "digraph G {\n"
            "  y1;\n"
            "  y2;\n"
            "  y3;\n"
            "  y1 -> y3 [label=\"S\"];\n"
            "  y3 -> y2 [label=\"T\"];\n"
            "}\n");

    RunResult plus = run_cli({"graph", "X + Y"});
    REQUIRE(plus.code == 2);
    REQUIRE(plus.err == "error: term contains '+'; pass --k to expand it first\n");

    RunResult expanded = run_cli({"graph", "X + Y", "--k", "3"});
    REQUIRE(expanded.code == 0);
    REQUIRE(expanded.out ==
            "vertices: 4\n"
            "y1 -> y4 [X]\n"
            "y4 -> y3 [Y]\n"
            "y3 -> y2 [X]\n");
}

TEST_CASE("gen writes slug-named files and echoes their paths") {
    auto dir = fresh_dir("gen_basic");
    RunResult r = run_cli({"gen", "A o B <= B o A", "--algorithm", "classic", "--out",
                           dir.string()});
    REQUIRE(r.code == 0);
    std::filesystem::path file = dir / "a-o-b-le-b-o-a.json";
    REQUIRE(r.out == file.string() + "\n");
    REQUIRE(std::filesystem::exists(file));
    std::string expect =
        render_condition(gen_eq(parse_inequality("A o B <= B o A")), ConditionFormat::json) +
        "\n";
    REQUIRE(slurp_file(file) == expect);
}

TEST_CASE("gen formats, pruning, and unicode slugs") {
    auto dir = fresh_dir("gen_formats");
    RunResult text = run_cli({"gen", "X <= X", "--format", "text", "--out", dir.string()});
    REQUIRE(text.code == 0);
    REQUIRE(slurp_file(dir / "x-le-x.txt") == "t(x1,x2,x1) = x1\nt(x1,x2,x2) = x2\n");

    RunResult latex = run_cli({"gen", "A o B <= B o A", "--algorithm", "classic", "--format",
                               "latex", "--out", dir.string()});
    REQUIRE(latex.code == 0);
    REQUIRE(slurp_file(dir / "a-o-b-le-b-o-a.tex") ==
            "x_1 \\approx t(x_1,x_2,x_2)\nt(x_1,x_2,x_1) \\approx x_2\n");

    RunResult pruned = run_cli({"gen", "A & B <= B", "--algorithm", "classic", "--format",
                                "text", "--prune-trivial", "--out", dir.string()});
    REQUIRE(pruned.code == 0);
    // the sole identity is trivial, leaving an empty body padded to one newline
    REQUIRE(slurp_file(dir / "a-and-b-le-b.txt") == "\n");

    RunResult uni = run_cli({"gen", "A ∧ B ∘ C <= A", "--format", "text", "--out",
                             dir.string()});
    REQUIRE(uni.code == 0);
    REQUIRE(std::filesystem::exists(dir / "a-and-b-o-c-le-a.txt"));
}

TEST_CASE("gen expands + into a family of files") {
    auto dir = fresh_dir("gen_family");
    RunResult r = run_cli({"gen", "X & Y o Z <= X & Y + X & Z", "--k-range", "2..3", "--out",
                           dir.string()});
    REQUIRE(r.code == 0);
    std::filesystem::path k2 = dir / "x-and-y-o-z-le-x-and-y-plus-x-and-z-k2.json";
    std::filesystem::path k3 = dir / "x-and-y-o-z-le-x-and-y-plus-x-and-z-k3.json";
    REQUIRE(r.out == k2.string() + "\n" + k3.string() + "\n");
    auto j2 = nlohmann::json::parse(slurp_file(k2));
    REQUIRE(j2["k"] == 2);
    REQUIRE(j2["source"] == "X & Y o Z <= X & Y + X & Z");
    auto j3 = nlohmann::json::parse(slurp_file(k3));
    REQUIRE(j3["k"] == 3);

    auto all = fresh_dir("gen_family_default");
    RunResult d = run_cli({"gen", "X <= X + Y", "--out", all.string()});
    REQUIRE(d.code == 0);
    int files = 0;
    for (auto& entry : std::filesystem::directory_iterator(all)) {
        (void)entry;
        ++files;
    }
    REQUIRE(files == 7);  // default family runs k = 2..8
}

TEST_CASE("gen rejects misuse") {
    auto dir = fresh_dir("gen_errors");
    RunResult lhs = run_cli({"gen", "X + Y <= Y", "--out", dir.string()});
    REQUIRE(lhs.code == 2);
    REQUIRE(lhs.err == "error: the left side must be +-free\n");

    RunResult range = run_cli({"gen", "X <= X", "--k-range", "2..5", "--out", dir.string()});
    REQUIRE(range.code == 2);
    REQUIRE(range.err == "error: --k-range requires '+' on the right side\n");

    RunResult classic = run_cli({"gen", "X <= X + Y", "--algorithm", "classic", "--out",
                                 dir.string()});
    REQUIRE(classic.code == 2);
    REQUIRE(classic.err == "error: the classic algorithm needs a +-free right side\n");
}

TEST_CASE("check emits the verdict json and mirrors it in the exit code") {
    RunResult r = run_cli({"check", "X o X <= X", "--algebra", "z2"});
    REQUIRE(r.code == 0);
    CheckVerdict direct =
        check_variety(*make_catalog_algebra("z2"), parse_inequality("X o X <= X"), RelMode::crr);
    REQUIRE(r.out == direct.to_json().dump(2) + "\n");
    auto j = nlohmann::json::parse(r.out);
    REQUIRE(j["mode"] == "crr");
    REQUIRE(j["level"] == "variety");
    REQUIRE(j["holds"] == true);

    RunResult fail = run_cli({"check", "X o X <= X", "--algebra", "slat2"});
    REQUIRE(fail.code == 1);
    auto fj = nlohmann::json::parse(fail.out);
    REQUIRE(fj["holds"] == false);
    REQUIRE(fj["counterexample"]["m"] == 3);
    REQUIRE(fj["counterexample"]["free_algebra_size"] == 7);
    REQUIRE(fj["counterexample"]["relation_sizes"]["X"] == 20);

    RunResult algebra = run_cli({"check", "X o X <= X", "--algebra", "lat2", "--level",
                                 "algebra", "--mode", "con"});
    REQUIRE(algebra.code == 0);
    auto aj = nlohmann::json::parse(algebra.out);
    REQUIRE(aj["level"] == "algebra");
    REQUIRE(aj["mode"] == "con");

    RunResult plus = run_cli({"check", "X & Y <= X + Y", "--algebra", "lat2", "--level",
                              "algebra"});
    REQUIRE(plus.code == 0);
    REQUIRE(nlohmann::json::parse(plus.out)["witness_k"] == 2);
}

TEST_CASE("check reads algebras from json files") {
    auto dir = fresh_dir("check_files");
    std::filesystem::path file = dir / "pair.json";
    {
        std::ofstream out(file);
        out << R"({"name":"pair","size":2,"operations":[]})";
    }
    RunResult r = run_cli({"check", "X o X <= X", "--algebra", file.string(), "--level",
                           "algebra"});
    REQUIRE(r.code == 0);

    std::filesystem::path big = dir / "four.json";
    {
        std::ofstream out(big);
        out << R"({"name":"four","size":4,"operations":[]})";
    }
    RunResult capped = run_cli({"check", "X o X <= X", "--algebra", big.string(), "--level",
                                "algebra", "--enum-bound", "5"});
    REQUIRE(capped.code == 3);
    REQUIRE(capped.err.rfind("error: enumerate_crr", 0) == 0);

    RunResult missing = run_cli({"check", "X o X <= X", "--algebra", "no_such_file.json"});
    REQUIRE(missing.code == 2);
    REQUIRE(missing.err.find("not a catalog name and not a readable file") !=
            std::string::npos);

    std::filesystem::path broken = dir / "broken.json";
    {
        std::ofstream out(broken);
        out << "{not json";
    }
    RunResult bad = run_cli({"check", "X o X <= X", "--algebra", broken.string()});
    REQUIRE(bad.code == 2);
}

TEST_CASE("synthesize prints witnesses or reports their absence") {
    RunResult r = run_cli({"synthesize", "X o X <= X", "--algebra", "z2"});
    REQUIRE(r.code == 0);
    REQUIRE(r.out == "pi_1 = x1\npi_2 = x2\nt_(1,2,X) = +(+(x4,x3),x5)\n");

    RunResult none = run_cli({"synthesize", "X o X <= X", "--algebra", "slat2"});
    REQUIRE(none.code == 1);
    REQUIRE(none.out == "no witness\n");

    RunResult json = run_cli({"synthesize", "X o X <= X", "--algebra", "z2", "--format",
                              "json"});
    REQUIRE(json.code == 0);
    auto j = nlohmann::json::parse(json.out);
    REQUIRE(j["found"] == true);
    REQUIRE(j["witnesses"].size() == 3);
    REQUIRE(j["witnesses"][0]["symbol"] == "pi_1");
    REQUIRE(j["witnesses"][0]["term"] == "x1");
    REQUIRE(j["witnesses"][2]["arity"] == 5);
    REQUIRE(j["witnesses"][2]["table"].size() == 32);

    RunResult jnone = run_cli({"synthesize", "X o X <= X", "--algebra", "slat2", "--format",
                               "json"});
    REQUIRE(jnone.code == 1);
    auto nj = nlohmann::json::parse(jnone.out);
    REQUIRE(nj["found"] == false);
    REQUIRE(nj["witnesses"].is_null());

    RunResult plus = run_cli({"synthesize", "S o R <= R + S", "--algebra", "z2"});
    REQUIRE(plus.code == 2);
    REQUIRE(plus.err == "error: the right side contains '+'; pass --k to pick a family member\n");

    RunResult k2 = run_cli({"synthesize", "S o R <= R + S", "--algebra", "z2", "--k", "2"});
    REQUIRE(k2.code == 0);

    RunResult classic = run_cli({"synthesize", "A o B <= B o A", "--algebra", "z2",
                                 "--algorithm", "classic"});
    REQUIRE(classic.code == 0);
    REQUIRE(classic.out.find("t_3 = ") != std::string::npos);
}

TEST_CASE("the cap environment variable gates free algebras unless overridden") {
    {
        EnvGuard guard("MALCEV_CAP", "5");
        RunResult r = run_cli({"check", "X o X <= X", "--algebra", "z2"});
        REQUIRE(r.code == 3);
        REQUIRE(r.err.find("exceeds the element cap") != std::string::npos);

        RunResult lifted = run_cli({"check", "X o X <= X", "--algebra", "z2", "--free-cap",
                                    "100000"});
        REQUIRE(lifted.code == 0);
    }
    {
        EnvGuard guard("MALCEV_CAP", "abc");
        RunResult r = run_cli({"check", "X o X <= X", "--algebra", "z2"});
        REQUIRE(r.code == 2);
        REQUIRE(r.err == "error: MALCEV_CAP must be a positive integer, got 'abc'\n");
    }
    {
        EnvGuard guard("MALCEV_CAP", nullptr);
        RunResult r = run_cli({"check", "X o X <= X", "--algebra", "z2"});
        REQUIRE(r.code == 0);
    }
}

TEST_CASE("usage errors and help") {
    REQUIRE(run_cli({"--help"}).code == 0);
    REQUIRE(run_cli({}).code == 2);
    REQUIRE(run_cli({"frobnicate"}).code == 2);
    REQUIRE(run_cli({"check", "X o X <= X"}).code == 2);          // missing --algebra
    REQUIRE(run_cli({"check", "--algebra", "z2"}).code == 2);     // missing inequality
    REQUIRE(run_cli({"gen", "X <= X", "--format", "yaml"}).code == 2);
    REQUIRE(run_cli({"graph", "X + Y", "--k", "1"}).code == 2);   // expansion needs k >= 2
}

TEST_CASE("repeated invocations are byte-identical") {
    RunResult a = run_cli({"check", "R & (S o T) <= (R & S) o (R & T)", "--algebra", "bool2"});
    RunResult b = run_cli({"check", "R & (S o T) <= (R & S) o (R & T)", "--algebra", "bool2"});
    REQUIRE(a.code == b.code);
    REQUIRE(a.out == b.out);

    auto d1 = fresh_dir("det_1");
    auto d2 = fresh_dir("det_2");
    RunResult g1 = run_cli({"gen", "A o B <= B o A", "--out", d1.string()});
    RunResult g2 = run_cli({"gen", "A o B <= B o A", "--out", d2.string()});
    REQUIRE(g1.code == 0);
    REQUIRE(g2.code == 0);
    REQUIRE(slurp_file(d1 / "a-o-b-le-b-o-a.json") == slurp_file(d2 / "a-o-b-le-b-o-a.json"));
}
