#pragma once

#include "lpdecomp/error.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lpdecomp {

using VarSet = std::set<std::string>;

/// Reserved prefix for predicates invented by the rewriter.
inline constexpr std::string_view kFreshPrefix = "fresh_pred_";

enum class ArithOp : char { Add = '+', Sub = '-', Mul = '*', Div = '/' };

enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };

inline std::string_view to_string(CmpOp op) {
    switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    }
    return "?";
}

/// A term of the accepted fragment. Arithmetic terms own their two operands.
struct Term {
    enum class Kind : std::uint8_t { Variable, Symbol, Integer, Anonymous, Arith };

    Kind kind = Kind::Anonymous;
    std::string name;       // Variable / Symbol
    std::int64_t value = 0; // Integer
    ArithOp op = ArithOp::Add;
    std::vector<Term> operands; // Arith: exactly two

    static Term variable(std::string n) { Term t; t.kind = Kind::Variable; t.name = std::move(n); return t; }
    static Term symbol(std::string n) { Term t; t.kind = Kind::Symbol; t.name = std::move(n); return t; }
    static Term integer(std::int64_t v) { Term t; t.kind = Kind::Integer; t.value = v; return t; }
    static Term anonymous() { return Term{}; }
    static Term arith(ArithOp o, Term lhs, Term rhs) {
        Term t;
        t.kind = Kind::Arith;
        t.op = o;
        t.operands.reserve(2);
        t.operands.push_back(std::move(lhs));
        t.operands.push_back(std::move(rhs));
        return t;
    }

    bool is_variable() const { return kind == Kind::Variable; }
    bool is_anonymous() const { return kind == Kind::Anonymous; }
    bool is_arith() const { return kind == Kind::Arith; }
    bool is_constant() const { return kind == Kind::Symbol || kind == Kind::Integer; }

    const Term& lhs() const { return operands[0]; }
    const Term& rhs() const { return operands[1]; }

    friend bool operator==(const Term&, const Term&) = default;
};

inline void collect_vars(const Term& t, VarSet& out) {
    if (t.is_variable()) {
        out.insert(t.name);
    } else if (t.is_arith()) {
        collect_vars(t.lhs(), out);
        collect_vars(t.rhs(), out);
    }
}

inline bool is_ground(const Term& t) {
    switch (t.kind) {
    case Term::Kind::Symbol:
    case Term::Kind::Integer: return true;
    case Term::Kind::Arith: return is_ground(t.lhs()) && is_ground(t.rhs());
    default: return false;
    }
}

struct Signature {
    std::string name;
    std::size_t arity = 0;

    friend auto operator<=>(const Signature&, const Signature&) = default;
};

inline std::string to_string(const Signature& s) { return s.name + "/" + std::to_string(s.arity); }

/// Either a (possibly default-negated) predicate atom or a comparison builtin.
/// For builtins `args` holds exactly the left and right operand.
struct Literal {
    enum class Kind : std::uint8_t { Atom, Builtin };

    Kind kind = Kind::Atom;
    std::string predicate;
    std::vector<Term> args;
    bool naf = false;
    CmpOp rel = CmpOp::Eq;

    static Literal atom(std::string pred, std::vector<Term> args, bool naf = false) {
        Literal l;
        l.predicate = std::move(pred);
        l.args = std::move(args);
        l.naf = naf;
        return l;
    }
    static Literal builtin(CmpOp rel, Term lhs, Term rhs) {
        Literal l;
        l.kind = Kind::Builtin;
        l.rel = rel;
        l.args.push_back(std::move(lhs));
        l.args.push_back(std::move(rhs));
        return l;
    }

    bool is_atom() const { return kind == Kind::Atom; }
    bool is_builtin() const { return kind == Kind::Builtin; }
    /// Positive predicate atoms are the only literals that bind variables.
    bool is_positive_atom() const { return is_atom() && !naf; }

    Signature signature() const { return {predicate, args.size()}; }

    friend bool operator==(const Literal& a, const Literal& b) {
        if (a.kind != b.kind || a.args != b.args)
            return false;
        if (a.is_builtin())
            return a.rel == b.rel;
        return a.predicate == b.predicate && a.naf == b.naf;
    }
};

/// Variables of a literal, arithmetic descended, anonymous terms excluded.
inline VarSet literal_vars(const Literal& l) {
    VarSet out;
    for (const auto& t : l.args)
        collect_vars(t, out);
    return out;
}

/// Variables a literal binds: plain variable arguments of a positive atom.
/// Variables that occur only inside arithmetic are not bound by matching.
inline VarSet binding_vars(const Literal& l) {
    VarSet out;
    if (!l.is_positive_atom())
        return out;
    for (const auto& t : l.args)
        if (t.is_variable())
            out.insert(t.name);
    return out;
}

inline bool is_ground(const Literal& l) {
    return std::all_of(l.args.begin(), l.args.end(), [](const Term& t) { return is_ground(t); });
}

struct Rule {
    std::vector<Literal> head; // 0 = constraint, 1 = normal, >1 = disjunctive
    std::vector<Literal> body;
    std::size_t line = 0;      // source line, 0 when synthesized

    bool is_fact() const { return body.empty() && head.size() == 1 && is_ground(head.front()); }
    bool is_constraint() const { return head.empty(); }

    /// Structural equality; the source line is not part of the structure.
    friend bool operator==(const Rule& a, const Rule& b) { return a.head == b.head && a.body == b.body; }
};

inline VarSet rule_vars(const Rule& r) {
    VarSet out;
    for (const auto* part : {&r.head, &r.body})
        for (const auto& l : *part)
            for (const auto& t : l.args)
                collect_vars(t, out);
    return out;
}

inline VarSet head_vars(const Rule& r) {
    VarSet out;
    for (const auto& l : r.head)
        for (const auto& t : l.args)
            collect_vars(t, out);
    return out;
}

/// Variables of `r` that no positive body atom binds.
inline VarSet unsafe_vars(const Rule& r) {
    VarSet bound;
    for (const auto& l : r.body) {
        auto b = binding_vars(l);
        bound.insert(b.begin(), b.end());
    }
    VarSet out;
    for (const auto& v : rule_vars(r))
        if (!bound.contains(v))
            out.insert(v);
    return out;
}

inline bool is_safe(const Rule& r) { return unsafe_vars(r).empty(); }

/// Sum over unordered body-literal pairs of the number of shared variables.
inline std::size_t count_joins(const Rule& r) {
    std::vector<VarSet> vars;
    vars.reserve(r.body.size());
    for (const auto& l : r.body)
        vars.push_back(literal_vars(l));
    std::size_t joins = 0;
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (std::size_t j = i + 1; j < vars.size(); ++j)
            for (const auto& v : vars[i])
                joins += vars[j].contains(v) ? 1 : 0;
    return joins;
}

/// Statements in input order. Facts are rules with a single ground head and
/// an empty body; everything else is a rule proper.
struct Program {
    std::vector<Rule> statements;

    friend bool operator==(const Program&, const Program&) = default;

    std::vector<const Rule*> rules() const {
        std::vector<const Rule*> out;
        for (const auto& s : statements)
            if (!s.is_fact())
                out.push_back(&s);
        return out;
    }

    std::vector<const Rule*> facts() const {
        std::vector<const Rule*> out;
        for (const auto& s : statements)
            if (s.is_fact())
                out.push_back(&s);
        return out;
    }

    /// Distinct input facts.
    std::size_t num_input_facts() const {
        std::set<std::pair<std::string, std::vector<std::string>>> seen;
        for (const auto* f : facts()) {
            const auto& a = f->head.front();
            std::vector<std::string> key;
            key.reserve(a.args.size());
            for (const auto& t : a.args)
                key.push_back(ground_key(t));
            seen.emplace(a.predicate, std::move(key));
        }
        return seen.size();
    }

    /// Predicates heading at least one non-fact rule.
    std::set<Signature> idb() const {
        std::set<Signature> out;
        for (const auto& s : statements)
            if (!s.is_fact())
                for (const auto& h : s.head)
                    out.insert(h.signature());
        return out;
    }

    /// Every other predicate mentioned by the program.
    std::set<Signature> edb() const {
        auto intensional = idb();
        std::set<Signature> out;
        for (const auto& s : statements)
            for (const auto* part : {&s.head, &s.body})
                for (const auto& l : *part)
                    if (l.is_atom() && !intensional.contains(l.signature()))
                        out.insert(l.signature());
        return out;
    }

private:
    static std::string ground_key(const Term& t) {
        switch (t.kind) {
        case Term::Kind::Symbol: return t.name;
        case Term::Kind::Integer: return "#" + std::to_string(t.value);
        case Term::Kind::Arith:
            return "(" + ground_key(t.lhs()) + static_cast<char>(t.op) + ground_key(t.rhs()) + ")";
        default: return "?";
        }
    }
};

} // namespace lpdecomp
