#pragma once

#include "lpdecomp/ast.hpp"

#include <ostream>
#include <sstream>
#include <string>

namespace lpdecomp {

namespace detail {

inline int precedence(ArithOp op) { return op == ArithOp::Add || op == ArithOp::Sub ? 1 : 2; }

inline void print_term(std::ostream& os, const Term& t) {
    switch (t.kind) {
    case Term::Kind::Variable:
    case Term::Kind::Symbol: os << t.name; break;
    case Term::Kind::Integer: os << t.value; break;
    case Term::Kind::Anonymous: os << '_'; break;
    case Term::Kind::Arith: {
        int prec = precedence(t.op);
        bool wrap_l = t.lhs().is_arith() && precedence(t.lhs().op) < prec;
        bool wrap_r = (t.rhs().is_arith() && precedence(t.rhs().op) <= prec) ||
                      (t.rhs().kind == Term::Kind::Integer && t.rhs().value < 0);
        if (wrap_l) os << '(';
        print_term(os, t.lhs());
        if (wrap_l) os << ')';
        os << static_cast<char>(t.op);
        if (wrap_r) os << '(';
        print_term(os, t.rhs());
        if (wrap_r) os << ')';
        break;
    }
    }
}

} // namespace detail

inline std::ostream& operator<<(std::ostream& os, const Term& t) {
    detail::print_term(os, t);
    return os;
}

inline std::ostream& operator<<(std::ostream& os, const Literal& l) {
    if (l.is_builtin())
        return os << l.args[0] << to_string(l.rel) << l.args[1];
    if (l.naf)
        os << "not ";
    os << l.predicate;
    if (!l.args.empty()) {
        os << '(';
        for (std::size_t i = 0; i < l.args.size(); ++i)
            os << (i ? "," : "") << l.args[i];
        os << ')';
    }
    return os;
}

inline std::ostream& operator<<(std::ostream& os, const Rule& r) {
    for (std::size_t i = 0; i < r.head.size(); ++i)
        os << (i ? " | " : "") << r.head[i];
    if (!r.body.empty()) {
        os << (r.head.empty() ? ":- " : " :- ");
        for (std::size_t i = 0; i < r.body.size(); ++i)
            os << (i ? ", " : "") << r.body[i];
    }
    return os << '.';
}

/// One statement per line, input order.
inline std::ostream& operator<<(std::ostream& os, const Program& p) {
    for (const auto& s : p.statements)
        os << s << '\n';
    return os;
}

template <typename T>
std::string to_text(const T& value) {
    std::ostringstream os;
    os << value;
    return os.str();
}

inline std::string print_program(const Program& p) { return to_text(p); }

} // namespace lpdecomp
