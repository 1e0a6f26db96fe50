#pragma once

// Shared generators for the property tests and the acceptance runner.

#include "lpdecomp/grounder.hpp"
#include "lpdecomp/parser.hpp"
#include "lpdecomp/printer.hpp"
#include "lpdecomp/rewriter.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace lpdecomp::testing {

inline const char* kR1 = "p(X,Y,Z,S) :- s(S), a(X,Y,S-1), c(D,Y,Z), f(X,P,S-1), P >= D.";

inline Rule parse_rule(const std::string& text) { return parse_program(text).statements.at(0); }

/// Random safe rule with a multi-node preferred decomposition. Besides plain
/// atoms it may contain arithmetic arguments, comparisons, negated atoms,
/// constants and anonymous variables. Body predicates are b0..b4 (arity fixed
/// per name) and n0 for negation; the head predicate is h.
inline Rule random_rule(std::mt19937_64& rng) {
    static const std::size_t arity[] = {1, 2, 2, 3, 3};
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    for (;;) {
        std::size_t nvars = 3 + pick(4);
        auto var = [&](std::size_t i) { return std::string(1, static_cast<char>('A' + i)); };
        std::string text;
        std::vector<std::string> body;
        std::set<std::string> plain;
        std::size_t natoms = 2 + pick(4);
        for (std::size_t a = 0; a < natoms; ++a) {
            std::size_t p = pick(5);
            std::string atom = "b" + std::to_string(p) + "(";
            for (std::size_t k = 0; k < arity[p]; ++k) {
                if (k)
                    atom += ',';
                auto roll = pick(10);
                if (roll == 0) {
                    atom += std::to_string(pick(3));
                } else if (roll == 1) {
                    atom += "_";
                } else {
                    auto v = var(pick(nvars));
                    plain.insert(v);
                    atom += v;
                }
            }
            body.push_back(atom + ")");
        }
        if (plain.size() < 2)
            continue;
        std::vector<std::string> bound(plain.begin(), plain.end());
        auto some = [&] { return bound[pick(bound.size())]; };
        if (pick(3) == 0) {
            std::size_t p = 1 + pick(2);
            body.push_back("b" + std::to_string(p) + "(" + some() + (pick(2) ? "-1" : "+1") + "," + some() + ")");
        }
        if (pick(2) == 0) {
            static const char* ops[] = {"<", "<=", ">", ">=", "=", "!="};
            body.push_back(some() + ops[pick(6)] + some());
        }
        if (pick(4) == 0)
            body.push_back("not n0(" + some() + ")");
        if (pick(5) == 0)
            body.push_back(some() + " = " + some() + " + 1");

        std::vector<std::string> head;
        for (const auto& v : bound)
            if (pick(3) == 0)
                head.push_back(v);
        text = "h";
        if (!head.empty()) {
            text += "(";
            for (std::size_t i = 0; i < head.size(); ++i)
                text += (i ? "," : "") + head[i];
            text += ")";
        }
        text += " :- ";
        for (std::size_t i = 0; i < body.size(); ++i)
            text += (i ? ", " : "") + body[i];
        text += ".";

        Rule r;
        try {
            r = parse_rule(text);
        } catch (const UnsafeRuleError&) {
            continue;
        }
        auto h = build_hypergraph(r);
        if (h.empty() || select_decomposition(h).size() <= 1)
            continue;
        return r;
    }
}

/// Between max_facts/2 and max_facts facts (before duplicates) over the
/// constants 0..constants-1, spread over the predicates of the rule body.
inline std::vector<Rule> random_facts(std::mt19937_64& rng, const Rule& r, std::size_t constants,
                                      std::size_t max_facts) {
    std::vector<Signature> preds;
    for (const auto& l : r.body)
        if (l.is_atom() && std::find(preds.begin(), preds.end(), l.signature()) == preds.end())
            preds.push_back(l.signature());
    std::vector<Rule> out;
    std::size_t n = max_facts / 2 + rng() % (max_facts - max_facts / 2 + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sig = preds[rng() % preds.size()];
        std::vector<Term> args;
        for (std::size_t k = 0; k < sig.arity; ++k)
            args.push_back(Term::integer(static_cast<std::int64_t>(rng() % constants)));
        Rule f;
        f.head.push_back(Literal::atom(sig.name, std::move(args)));
        out.push_back(std::move(f));
    }
    return out;
}

inline Program with_facts(const std::vector<Rule>& rules, const std::vector<Rule>& facts) {
    Program p;
    p.statements = facts;
    p.statements.insert(p.statements.end(), rules.begin(), rules.end());
    return p;
}

/// Derived atoms over the given predicates.
inline std::set<std::string> derived(const Program& p, const std::set<Signature>& only) {
    return ground(p).atom_strings(only);
}

} // namespace lpdecomp::testing
