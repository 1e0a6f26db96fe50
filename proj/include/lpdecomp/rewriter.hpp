#pragma once

// Rule decomposition: one rule per tree-decomposition node, linked by fresh
// predicates over bag intersections, plus safety repair.

#include "lpdecomp/ast.hpp"
#include "lpdecomp/hypergraph.hpp"
#include "lpdecomp/tree_decomposition.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lpdecomp {

enum class SafetyMode {
    Auxiliary, ///< emit a domain rule per unsafe variable and link it
    Inline,    ///< copy the binding literals into the unsafe rule
};

/// Global source of fresh predicate names, numbered from 1 in request order.
class FreshNames {
public:
    FreshNames() = default;
    explicit FreshNames(std::size_t next) : next_(next) {}

    /// A source that skips every fresh name already used by `p`.
    static FreshNames after(const Program& p) {
        std::size_t max = 0;
        for (const auto& s : p.statements)
            for (const auto* part : {&s.head, &s.body})
                for (const auto& l : *part) {
                    if (!l.is_atom() || !l.predicate.starts_with(kFreshPrefix))
                        continue;
                    auto digits = std::string_view(l.predicate).substr(kFreshPrefix.size());
                    std::size_t n = 0;
                    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
                    if (ec == std::errc{} && ptr == digits.data() + digits.size())
                        max = std::max(max, n);
                }
        return FreshNames(max + 1);
    }

    std::string take() { return std::string(kFreshPrefix) + std::to_string(next_++); }
    std::size_t peek() const { return next_; }

private:
    std::size_t next_ = 1;
};

struct RuleDecomposition {
    Rule original;
    std::vector<Rule> rules;
    std::set<std::string> fresh_predicates;
    /// TD node each rule was generated for; safety rules map to none.
    std::vector<std::optional<std::size_t>> node_of_rule;

    bool is_identity() const { return rules.size() == 1 && fresh_predicates.empty(); }
};

struct SafetyRepair {
    Rule rule;
    std::vector<Rule> auxiliary;
    std::set<std::string> fresh_predicates;
};

namespace detail {

inline void arith_vars(const Term& t, bool inside, VarSet& out) {
    if (t.is_variable() && inside)
        out.insert(t.name);
    else if (t.is_arith()) {
        arith_vars(t.lhs(), true, out);
        arith_vars(t.rhs(), true, out);
    }
}

/// Origin body indices whose literals bind `v`, closed under the variables
/// their arithmetic needs.
inline std::vector<std::size_t> binding_closure(const Rule& origin, const std::string& v) {
    std::set<std::size_t> chosen;
    for (std::size_t i = 0; i < origin.body.size(); ++i)
        if (binding_vars(origin.body[i]).contains(v))
            chosen.insert(i);
    if (chosen.empty())
        throw UnrepairableError("no positive body literal of the rule at line " + std::to_string(origin.line) +
                                " binds " + v);
    for (;;) {
        VarSet bound, needed;
        for (auto i : chosen) {
            auto b = binding_vars(origin.body[i]);
            bound.insert(b.begin(), b.end());
            for (const auto& t : origin.body[i].args)
                arith_vars(t, false, needed);
        }
        auto missing = std::find_if(needed.begin(), needed.end(), [&](const auto& w) { return !bound.contains(w); });
        if (missing == needed.end())
            break;
        std::optional<std::size_t> binder;
        for (std::size_t i = 0; i < origin.body.size() && !binder; ++i)
            if (binding_vars(origin.body[i]).contains(*missing))
                binder = i;
        if (!binder)
            throw UnrepairableError("no positive body literal of the rule at line " + std::to_string(origin.line) +
                                    " binds " + *missing);
        chosen.insert(*binder);
    }
    return {chosen.begin(), chosen.end()};
}

inline void count_occurrences(const Term& t, std::map<std::string, std::size_t>& counts) {
    if (t.is_variable())
        ++counts[t.name];
    else if (t.is_arith()) {
        count_occurrences(t.lhs(), counts);
        count_occurrences(t.rhs(), counts);
    }
}

/// Copies the closure literals, replacing plain variable arguments that occur
/// once and are not in `keep` by anonymous terms.
inline std::vector<Literal> project_closure(const Rule& origin, const std::vector<std::size_t>& closure,
                                            const VarSet& keep) {
    std::map<std::string, std::size_t> counts;
    for (auto i : closure)
        for (const auto& t : origin.body[i].args)
            count_occurrences(t, counts);
    std::vector<Literal> out;
    for (auto i : closure) {
        auto l = origin.body[i];
        for (auto& t : l.args)
            if (t.is_variable() && counts[t.name] == 1 && !keep.contains(t.name))
                t = Term::anonymous();
        out.push_back(std::move(l));
    }
    return out;
}

inline Literal fresh_atom(const std::string& name, const VarSet& vars) {
    std::vector<Term> args;
    for (const auto& v : vars)
        args.push_back(Term::variable(v));
    return Literal::atom(name, std::move(args));
}

} // namespace detail

/// Makes `candidate` safe using binding literals taken from `origin`.
inline SafetyRepair repair_safety(Rule candidate, const Rule& origin, FreshNames& names,
                                  SafetyMode mode = SafetyMode::Auxiliary) {
    SafetyRepair out;
    for (auto unsafe = unsafe_vars(candidate); !unsafe.empty(); unsafe = unsafe_vars(candidate)) {
        const std::string v = *unsafe.begin();
        auto closure = detail::binding_closure(origin, v);
        if (mode == SafetyMode::Auxiliary) {
            Rule aux;
            aux.line = origin.line;
            auto name = names.take();
            aux.head.push_back(detail::fresh_atom(name, {v}));
            aux.body = detail::project_closure(origin, closure, {v});
            candidate.body.push_back(detail::fresh_atom(name, {v}));
            out.fresh_predicates.insert(name);
            out.auxiliary.push_back(std::move(aux));
        } else {
            auto keep = rule_vars(candidate);
            for (auto& l : detail::project_closure(origin, closure, keep))
                if (std::find(candidate.body.begin(), candidate.body.end(), l) == candidate.body.end())
                    candidate.body.push_back(std::move(l));
        }
    }
    out.rule = std::move(candidate);
    return out;
}

/// Rewrites `r` along `td`. Each body literal goes to exactly one covering
/// node: the deepest one, ties by smallest node id. Variable-free literals go
/// to the root.
inline RuleDecomposition decompose_rule(const Rule& r, const TreeDecomposition& td, FreshNames& names,
                                        SafetyMode mode = SafetyMode::Auxiliary) {
    RuleDecomposition rd;
    rd.original = r;
    auto h = build_hypergraph(r);
    if (td.size() <= 1) {
        rd.rules.push_back(r);
        rd.node_of_rule.emplace_back(0);
        return rd;
    }
    if (auto bad = validate_decomposition(h, td))
        throw std::invalid_argument("decomposition does not fit the rule: " + bad->message);
    auto head = head_vars(r);
    const auto& root_bag = td.bags[td.root];
    if (!std::includes(root_bag.begin(), root_bag.end(), head.begin(), head.end()))
        throw HeadNotCoveredError("root bag does not cover the head variables of the rule at line " +
                                  std::to_string(r.line));

    auto parent = td.parents();
    auto order = td.preorder();
    std::vector<std::size_t> depth(td.size(), 0);
    for (auto t : order)
        if (t != td.root)
            depth[t] = depth[parent[t]] + 1;

    std::vector<std::vector<std::size_t>> assigned(td.size());
    for (std::size_t i = 0; i < r.body.size(); ++i) {
        auto vars = literal_vars(r.body[i]);
        std::size_t best = td.root;
        if (!vars.empty()) {
            std::optional<std::size_t> pick;
            for (std::size_t t = 0; t < td.size(); ++t) {
                const auto& bag = td.bags[t];
                if (!std::includes(bag.begin(), bag.end(), vars.begin(), vars.end()))
                    continue;
                if (!pick || depth[t] > depth[*pick])
                    pick = t;
            }
            best = *pick;
        }
        assigned[best].push_back(i);
    }

    std::vector<std::string> link_name(td.size());
    std::vector<VarSet> link_vars(td.size());
    std::vector<std::vector<std::size_t>> children(td.size());
    for (auto t : order) {
        if (t == td.root)
            continue;
        children[parent[t]].push_back(t);
        link_name[t] = names.take();
        rd.fresh_predicates.insert(link_name[t]);
        const auto& a = td.bags[t];
        const auto& b = td.bags[parent[t]];
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                              std::inserter(link_vars[t], link_vars[t].end()));
    }
    for (auto& c : children)
        std::sort(c.begin(), c.end());

    for (auto t : order) {
        Rule node_rule;
        node_rule.line = r.line;
        if (t == td.root)
            node_rule.head = r.head;
        else
            node_rule.head.push_back(detail::fresh_atom(link_name[t], link_vars[t]));
        for (auto i : assigned[t])
            node_rule.body.push_back(r.body[i]);
        for (auto c : children[t])
            node_rule.body.push_back(detail::fresh_atom(link_name[c], link_vars[c]));

        auto repaired = repair_safety(std::move(node_rule), r, names, mode);
        rd.rules.push_back(std::move(repaired.rule));
        rd.node_of_rule.emplace_back(t);
        for (auto& aux : repaired.auxiliary) {
            rd.rules.push_back(std::move(aux));
            rd.node_of_rule.emplace_back(std::nullopt);
        }
        rd.fresh_predicates.insert(repaired.fresh_predicates.begin(), repaired.fresh_predicates.end());
    }
    return rd;
}

struct RewriteOptions {
    SafetyMode safety = SafetyMode::Auxiliary;
    std::size_t candidates = kCandidatesPerHeuristic;
};

/// Decomposition of `r` along its preferred tree decomposition; the identity
/// when the rule has no variables or the decomposition has a single node.
inline RuleDecomposition decompose_preferred(const Rule& r, FreshNames& names, const RewriteOptions& opts = {}) {
    auto h = build_hypergraph(r);
    if (h.empty()) {
        RuleDecomposition rd;
        rd.original = r;
        rd.rules.push_back(r);
        rd.node_of_rule.emplace_back(0);
        return rd;
    }
    return decompose_rule(r, select_decomposition(h, opts.candidates), names, opts.safety);
}

/// Per-rule decision: `rule_index` counts non-fact statements from 0.
using RewritePolicy = std::function<bool(const Rule& rule, std::size_t rule_index)>;

inline RewritePolicy never_decompose() {
    return [](const Rule&, std::size_t) { return false; };
}
inline RewritePolicy always_decompose() {
    return [](const Rule&, std::size_t) { return true; };
}

inline Program rewrite_program(const Program& p, const RewritePolicy& policy, const RewriteOptions& opts = {}) {
    Program out;
    auto names = FreshNames::after(p);
    std::size_t rule_index = 0;
    for (const auto& s : p.statements) {
        if (s.is_fact()) {
            out.statements.push_back(s);
            continue;
        }
        if (!policy(s, rule_index++)) {
            out.statements.push_back(s);
            continue;
        }
        auto rd = decompose_preferred(s, names, opts);
        for (auto& r : rd.rules)
            out.statements.push_back(std::move(r));
    }
    return out;
}

} // namespace lpdecomp
