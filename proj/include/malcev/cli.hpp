#pragma once

// Command-line surface. All subcommands are thin wrappers over the library;
// run() is stream-parameterized so the whole surface is testable in-process.
//
// Exit codes: 0 success/holds, 1 semantic failure (inequality fails, no
// witness), 2 usage or parse error, 3 resource cap exceeded.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "decide.hpp"
#include "finalg.hpp"
#include "malcevgen.hpp"
#include "relterm.hpp"
#include "termgraph.hpp"

namespace malcev {
namespace cli {

namespace detail {

inline FiniteAlgebra load_algebra(const std::string& source) {
    if (auto cat = make_catalog_algebra(source)) return *cat;
    std::ifstream in(source);
    if (!in)
        throw std::invalid_argument("algebra '" + source +
                                    "': not a catalog name and not a readable file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("algebra file " + source + ": " + e.what());
    }
    return FiniteAlgebra::from_json(j);
}

inline std::string slug_of(const std::string& text) {
    std::string out;
    auto sep = [&] {
        if (!out.empty() && out.back() != '-') out += '-';
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
        } else if (c == '&') {
            sep();
            out += "and";
            sep();
        } else if (c == '+') {
            sep();
            out += "plus";
            sep();
        } else if (c == '<' && i + 1 < text.size() && text[i + 1] == '=') {
            sep();
            out += "le";
            sep();
            ++i;
        } else if (c == 0xe2 && i + 2 < text.size()) {
            // UTF-8 wedge and ring operators
            unsigned char c1 = static_cast<unsigned char>(text[i + 1]);
            unsigned char c2 = static_cast<unsigned char>(text[i + 2]);
            if (c1 == 0x88 && c2 == 0xa7) {
                sep();
                out += "and";
                sep();
                i += 2;
            } else if (c1 == 0x88 && c2 == 0x98) {
                sep();
                out += "o";
                sep();
                i += 2;
            } else {
                sep();
                i += 2;
            }
        } else {
            sep();
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "condition" : out;
}

inline std::string var_set(const std::set<VarId>& s) {
    std::string out = "{";
    bool first = true;
    for (const VarId& v : s) {
        if (!first) out += ", ";
        out += v.display();
        first = false;
    }
    out += "}";
    return out;
}

inline std::size_t default_free_cap(std::ostream& err, bool& bad) {
    if (const char* env = std::getenv("MALCEV_CAP")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0' || v == 0) {
            err << "error: MALCEV_CAP must be a positive integer, got '" << env << "'\n";
            bad = true;
            return kDefaultFreeCap;
        }
        return static_cast<std::size_t>(v);
    }
    return kDefaultFreeCap;
}

inline ConditionFormat parse_format(const std::string& f) {
    if (f == "json") return ConditionFormat::json;
    if (f == "text") return ConditionFormat::text;
    return ConditionFormat::latex;
}

inline const char* format_extension(ConditionFormat f) {
    switch (f) {
        case ConditionFormat::json: return ".json";
        case ConditionFormat::text: return ".txt";
        case ConditionFormat::latex: return ".tex";
    }
    return ".json";
}

inline std::string payload(const MalcevCondition& c, ConditionFormat f, bool prune) {
    std::string body = render_condition(c, f, prune);
    if (body.empty() || body.back() != '\n') body += '\n';
    return body;
}

} // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Relational inequalities over {&, o, +}: graphs, Mal'cev conditions, checks"};
    app.require_subcommand(1);

    bool bad_env = false;
    const std::size_t env_cap = detail::default_free_cap(err, bad_env);
    if (bad_env) return 2;

    // term
    auto* c_term = app.add_subcommand("term", "Parse a term and report its structure");
    std::string term_text;
    bool term_regular = false, term_vars = false, term_latex = false;
    c_term->add_option("term", term_text, "term over variables, & o +")->required();
    c_term->add_flag("--regular", term_regular, "report regularity (term must be +-free)");
    c_term->add_flag("--vars", term_vars, "report left/right variable sets (term must be +-free)");
    c_term->add_flag("--latex", term_latex, "also print the LaTeX rendering");

    // graph
    auto* c_graph = app.add_subcommand("graph", "Build the labelled graph of a +-free term");
    std::string graph_text;
    bool graph_dot = false;
    int graph_k = 0;
    c_graph->add_option("term", graph_text, "term over variables, & o +")->required();
    c_graph->add_flag("--dot", graph_dot, "emit DOT instead of a summary");
    c_graph->add_option("--k", graph_k, "expand + into the k-fold alternation first (k >= 2)");

    // gen
    auto* c_gen = app.add_subcommand("gen", "Generate a Mal'cev condition from p <= q");
    std::string gen_ineq, gen_algorithm = "crr", gen_format = "json", gen_out = ".";
    std::string gen_krange;
    bool gen_prune = false;
    c_gen->add_option("inequality", gen_ineq, "inequality p <= q")->required();
    c_gen->add_option("--algorithm", gen_algorithm, "condition algorithm (default crr)")
        ->check(CLI::IsMember({"classic", "crr"}));
    c_gen->add_option("--k-range", gen_krange, "k range a..b for + on the right (crr only)");
    c_gen->add_option("--format", gen_format, "output format (default json)")
        ->check(CLI::IsMember({"json", "text", "latex"}));
    c_gen->add_option("--out", gen_out, "output directory (default .)");
    c_gen->add_flag("--prune-trivial", gen_prune, "drop identities of the form x_i = x_i");

    // check
    auto* c_check = app.add_subcommand("check", "Check p <= q on an algebra or its variety");
    std::string check_ineq, check_algebra_src, check_level = "variety", check_mode = "crr";
    CheckOptions check_opts;
    check_opts.free_cap = env_cap;
    c_check->add_option("inequality", check_ineq, "inequality p <= q")->required();
    c_check->add_option("--algebra", check_algebra_src, "catalog name or JSON file")->required();
    c_check->add_option("--level", check_level, "algebra (enumeration) or variety (generic test)")
        ->check(CLI::IsMember({"algebra", "variety"}));
    c_check->add_option("--mode", check_mode, "relation class: crr or con")
        ->check(CLI::IsMember({"crr", "con"}));
    c_check->add_option("--enum-bound", check_opts.enum_bound, "off-diagonal cell budget (default 12)");
    c_check->add_option("--free-cap", check_opts.free_cap, "free-algebra element cap");
    c_check->add_option("--universe-bound", check_opts.universe_bound,
                        "max free-algebra size used as a relation universe (default 2048)");
    c_check->add_option("--k-max", check_opts.k_max, "family horizon for + (default 8)");
    c_check->add_option("--threads", check_opts.threads, "worker threads for enumeration checks");

    // synthesize
    auto* c_syn = app.add_subcommand("synthesize", "Find witness terms for a condition over an algebra");
    std::string syn_ineq, syn_algebra_src, syn_algorithm = "crr", syn_format = "text";
    int syn_k = 0;
    CheckOptions syn_opts;
    syn_opts.free_cap = env_cap;
    c_syn->add_option("inequality", syn_ineq, "inequality p <= q")->required();
    c_syn->add_option("--algebra", syn_algebra_src, "catalog name or JSON file")->required();
    c_syn->add_option("--algorithm", syn_algorithm, "condition algorithm (default crr)")
        ->check(CLI::IsMember({"classic", "crr"}));
    c_syn->add_option("--k", syn_k, "expand + on the right before generating (k >= 2)");
    c_syn->add_option("--format", syn_format, "output format (default text)")
        ->check(CLI::IsMember({"text", "json"}));
    c_syn->add_option("--arity-cap", syn_opts.max_symbol_arity, "symbol arity guard (default 8)");
    c_syn->add_option("--free-cap", syn_opts.free_cap, "free-algebra element cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (c_term->parsed()) {
            RelTerm t = parse_term(term_text);
            out << "term: " << render(t) << "\n";
            std::string vars;
            for (const VarId& v : t.variables()) {
                if (!vars.empty()) vars += ", ";
                vars += v.display();
            }
            out << "variables: " << vars << "\n";
            if (term_latex) out << "latex: " << render(t, TermFormat::latex) << "\n";
            if (term_regular || term_vars) {
                if (t.count_kind(TermKind::plus) > 0) {
                    err << "error: left/right sets and regularity are defined for +-free terms only\n";
                    return 2;
                }
                if (term_vars) {
                    out << "left: " << detail::var_set(left_vars(t)) << "\n";
                    out << "right: " << detail::var_set(right_vars(t)) << "\n";
                }
                if (term_regular) out << "regular: " << (is_regular(t) ? "true" : "false") << "\n";
            }
            return 0;
        }

        if (c_graph->parsed()) {
            RelTerm t = parse_term(graph_text);
            if (t.count_kind(TermKind::plus) > 0) {
                if (graph_k == 0) {
                    err << "error: term contains '+'; pass --k to expand it first\n";
                    return 2;
                }
                t = expand_plus(t, graph_k);
            }
            LabelledGraph g = build_graph(t);
            if (graph_dot) {
                out << to_dot(g);
            } else {
                out << "vertices: " << g.vertex_count() << "\n";
                for (const LabelledEdge& e : g.edges())
                    out << "y" << e.from << " -> y" << e.to << " [" << e.label.display() << "]\n";
            }
            return 0;
        }

        if (c_gen->parsed()) {
            Inequality ineq = parse_inequality(gen_ineq);
            if (ineq.lhs.count_kind(TermKind::plus) > 0) {
                err << "error: the left side must be +-free\n";
                return 2;
            }
            const bool q_plus = ineq.rhs.count_kind(TermKind::plus) > 0;
            ConditionFormat fmt = detail::parse_format(gen_format);
            std::filesystem::create_directories(gen_out);
            const std::string slug = detail::slug_of(gen_ineq);

            std::vector<MalcevCondition> conditions;
            if (!q_plus) {
                if (!gen_krange.empty()) {
                    err << "error: --k-range requires '+' on the right side\n";
                    return 2;
                }
                conditions.push_back(gen_algorithm == "classic" ? gen_eq(ineq) : gen_eqr(ineq));
            } else {
                if (gen_algorithm == "classic") {
                    err << "error: the classic algorithm needs a +-free right side\n";
                    return 2;
                }
                int k_min = 2, k_max = 8;
                if (!gen_krange.empty()) {
                    auto dots = gen_krange.find("..");
                    if (dots == std::string::npos)
                        throw std::invalid_argument("--k-range must look like 2..5");
                    k_min = std::stoi(gen_krange.substr(0, dots));
                    k_max = std::stoi(gen_krange.substr(dots + 2));
                }
                conditions = gen_eqr_family(ineq.lhs, ineq.rhs, k_min, k_max);
            }

            for (const MalcevCondition& c : conditions) {
                std::string name = slug;
                if (c.k) name += "-k" + std::to_string(*c.k);
                name += detail::format_extension(fmt);
                std::filesystem::path path = std::filesystem::path(gen_out) / name;
                std::ofstream file(path);
                if (!file) throw std::invalid_argument("cannot write " + path.string());
                file << detail::payload(c, fmt, gen_prune);
                out << path.string() << "\n";
            }
            return 0;
        }

        if (c_check->parsed()) {
            Inequality ineq = parse_inequality(check_ineq);
            FiniteAlgebra a = detail::load_algebra(check_algebra_src);
            RelMode mode = check_mode == "crr" ? RelMode::crr : RelMode::con;
            CheckVerdict v = check_level == "algebra" ? check_algebra(a, ineq, mode, check_opts)
                                                      : check_variety(a, ineq, mode, check_opts);
            out << v.to_json().dump(2) << "\n";
            return v.holds ? 0 : 1;
        }

        if (c_syn->parsed()) {
            Inequality ineq = parse_inequality(syn_ineq);
            if (ineq.lhs.count_kind(TermKind::plus) > 0) {
                err << "error: the left side must be +-free\n";
                return 2;
            }
            if (ineq.rhs.count_kind(TermKind::plus) > 0) {
                if (syn_k == 0) {
                    err << "error: the right side contains '+'; pass --k to pick a family member\n";
                    return 2;
                }
                ineq.rhs = expand_plus(ineq.rhs, syn_k);
            }
            FiniteAlgebra a = detail::load_algebra(syn_algebra_src);
            MalcevCondition cond = syn_algorithm == "classic" ? gen_eq(ineq) : gen_eqr(ineq);
            auto witnesses = synthesize_terms(a, cond, syn_opts);
            if (syn_format == "json") {
                nlohmann::ordered_json j;
                j["found"] = witnesses.has_value();
                if (witnesses) {
                    auto arr = nlohmann::ordered_json::array();
                    for (const TermWitness& w : *witnesses) {
                        nlohmann::ordered_json wj;
                        wj["symbol"] = w.symbol;
                        wj["arity"] = w.arity;
                        wj["term"] = w.term;
                        wj["table"] = std::vector<int>(w.table.begin(), w.table.end());
                        arr.push_back(std::move(wj));
                    }
                    j["witnesses"] = std::move(arr);
                } else {
                    j["witnesses"] = nullptr;
                }
                out << j.dump(2) << "\n";
            } else if (witnesses) {
                for (const TermWitness& w : *witnesses) out << w.symbol << " = " << w.term << "\n";
            } else {
                out << "no witness\n";
            }
            return witnesses ? 0 : 1;
        }
    } catch (const parse_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const resource_limit_error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("malcev");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

inline int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

} // namespace cli
} // namespace malcev
