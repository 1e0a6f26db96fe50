#pragma once

// Recursive-descent parser for the rule fragment: facts, normal and
// disjunctive rules, constraints, default negation, comparison builtins and
// integer arithmetic. Aggregates, choice rules, weak constraints and
// directives are rejected.

#include "lpdecomp/ast.hpp"

#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lpdecomp {

struct ParseOptions {
    /// Accept predicates in the reserved fresh namespace, e.g. when reading
    /// back the output of a rewrite.
    bool allow_reserved = false;
};

namespace detail {

enum class Tok {
    End, Ident, Variable, Anonymous, Integer, If, Dot, Comma, LParen, RParen, Bar,
    Plus, Minus, Star, Slash, Lt, Le, Gt, Ge, Eq, Ne, Not, Unsupported,
};

inline std::string_view describe(Tok t) {
    switch (t) {
    case Tok::End: return "end of input";
    case Tok::Ident: return "identifier";
    case Tok::Variable: return "variable";
    case Tok::Anonymous: return "'_'";
    case Tok::Integer: return "integer";
    case Tok::If: return "':-'";
    case Tok::Dot: return "'.'";
    case Tok::Comma: return "','";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Bar: return "'|'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::Eq: return "'='";
    case Tok::Ne: return "'!='";
    case Tok::Not: return "'not'";
    case Tok::Unsupported: return "unsupported construct";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_blank();
        Token t;
        t.line = line_;
        t.column = column();
        if (pos_ >= src_.size())
            return t;
        char c = src_[pos_];
        auto take = [&](Tok k, std::size_t n) {
            t.kind = k;
            t.text = std::string(src_.substr(pos_, n));
            pos_ += n;
            return t;
        };
        auto peek = [&](std::size_t off) { return pos_ + off < src_.size() ? src_[pos_ + off] : '\0'; };
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t n = 1;
            while (std::isalnum(static_cast<unsigned char>(peek(n))) || peek(n) == '_')
                ++n;
            auto word = src_.substr(pos_, n);
            if (word == "_")
                return take(Tok::Anonymous, n);
            if (word == "not")
                return take(Tok::Not, n);
            if (std::isupper(static_cast<unsigned char>(c)))
                return take(Tok::Variable, n);
            if (c == '_')
                return take(Tok::Unsupported, n);
            return take(Tok::Ident, n);
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t n = 1;
            while (std::isdigit(static_cast<unsigned char>(peek(n))))
                ++n;
            return take(Tok::Integer, n);
        }
        switch (c) {
        case ':':
            if (peek(1) == '-') return take(Tok::If, 2);
            return take(Tok::Unsupported, peek(1) == '~' ? 2 : 1);
        case '.': return take(Tok::Dot, 1);
        case ',': return take(Tok::Comma, 1);
        case '(': return take(Tok::LParen, 1);
        case ')': return take(Tok::RParen, 1);
        case '|': return take(Tok::Bar, 1);
        case '+': return take(Tok::Plus, 1);
        case '-': return take(Tok::Minus, 1);
        case '*': return take(Tok::Star, 1);
        case '/': return take(Tok::Slash, 1);
        case '<':
            if (peek(1) == '=') return take(Tok::Le, 2);
            if (peek(1) == '>') return take(Tok::Ne, 2);
            return take(Tok::Lt, 1);
        case '>': return peek(1) == '=' ? take(Tok::Ge, 2) : take(Tok::Gt, 1);
        case '=': return peek(1) == '=' ? take(Tok::Eq, 2) : take(Tok::Eq, 1);
        case '!':
            if (peek(1) == '=') return take(Tok::Ne, 2);
            break;
        default: break;
        }
        return take(Tok::Unsupported, 1);
    }

private:
    std::size_t column() const { return pos_ - line_start_ + 1; }

    void skip_blank() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                ++line_;
                line_start_ = ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '%') {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t line_start_ = 0;
};

class Parser {
public:
    Parser(std::string_view src, ParseOptions opts) : lexer_(src), opts_(opts) {
        cur_ = lexer_.next();
        ahead_ = lexer_.next();
    }

    Program program() {
        Program p;
        while (cur_.kind != Tok::End)
            p.statements.push_back(statement());
        return p;
    }

private:
    [[noreturn]] void fail(std::initializer_list<std::string_view> expected) const {
        std::string msg = std::to_string(cur_.line) + ":" + std::to_string(cur_.column) + ": expected ";
        bool first = true;
        for (auto e : expected) {
            msg += first ? "" : ", ";
            msg += e;
            first = false;
        }
        msg += "; got ";
        msg += cur_.kind == Tok::End ? std::string("end of input") : "'" + cur_.text + "'";
        if (cur_.kind == Tok::Unsupported)
            msg += " (aggregates, choice rules, weak constraints and directives are not supported)";
        throw SyntaxError(msg);
    }

    void advance() {
        cur_ = std::move(ahead_);
        ahead_ = lexer_.next();
    }

    bool accept(Tok k) {
        if (cur_.kind != k)
            return false;
        advance();
        return true;
    }

    void expect(Tok k) {
        if (!accept(k))
            fail({describe(k)});
    }

    Rule statement() {
        Rule r;
        r.line = cur_.line;
        if (cur_.kind != Tok::If) {
            r.head.push_back(head_atom());
            while (accept(Tok::Bar))
                r.head.push_back(head_atom());
        }
        if (accept(Tok::If)) {
            r.body.push_back(body_literal());
            while (accept(Tok::Comma))
                r.body.push_back(body_literal());
        } else if (r.head.empty()) {
            fail({describe(Tok::If)});
        }
        if (cur_.kind != Tok::Dot) {
            if (r.body.empty())
                fail({"'.'", "':-'", "'|'"});
            fail({"'.'", "','"});
        }
        advance();
        check_safety(r);
        return r;
    }

    Literal head_atom() {
        if (cur_.kind != Tok::Ident)
            fail({"predicate name"});
        auto l = atom();
        for (const auto& t : l.args)
            if (contains_anonymous(t))
                throw SyntaxError(std::to_string(cur_.line) + ": anonymous variable in rule head");
        return l;
    }

    Literal atom() {
        std::string name = cur_.text;
        if (!opts_.allow_reserved && name.starts_with(kFreshPrefix))
            throw SyntaxError(std::to_string(cur_.line) + ":" + std::to_string(cur_.column) +
                              ": predicate prefix '" + std::string(kFreshPrefix) + "' is reserved");
        advance();
        std::vector<Term> args;
        if (accept(Tok::LParen)) {
            args.push_back(term());
            while (accept(Tok::Comma))
                args.push_back(term());
            expect(Tok::RParen);
        }
        return Literal::atom(std::move(name), std::move(args));
    }

    Literal body_literal() {
        if (accept(Tok::Not)) {
            if (cur_.kind != Tok::Ident)
                fail({"predicate name"});
            auto l = atom();
            l.naf = true;
            return l;
        }
        if (cur_.kind == Tok::Ident && ahead_.kind == Tok::LParen)
            return atom();
        if (cur_.kind == Tok::Ident && !is_relation(ahead_.kind) && !is_arith(ahead_.kind))
            return atom();
        auto lhs = term();
        auto rel = relation();
        if (!rel)
            fail({"comparison operator"});
        auto rhs = term();
        if (contains_anonymous(lhs) || contains_anonymous(rhs))
            throw SyntaxError(std::to_string(cur_.line) + ": anonymous variable in builtin");
        return Literal::builtin(*rel, std::move(lhs), std::move(rhs));
    }

    static bool is_relation(Tok k) {
        return k == Tok::Lt || k == Tok::Le || k == Tok::Gt || k == Tok::Ge || k == Tok::Eq || k == Tok::Ne;
    }
    static bool is_arith(Tok k) { return k == Tok::Plus || k == Tok::Minus || k == Tok::Star || k == Tok::Slash; }

    std::optional<CmpOp> relation() {
        std::optional<CmpOp> op;
        switch (cur_.kind) {
        case Tok::Lt: op = CmpOp::Lt; break;
        case Tok::Le: op = CmpOp::Le; break;
        case Tok::Gt: op = CmpOp::Gt; break;
        case Tok::Ge: op = CmpOp::Ge; break;
        case Tok::Eq: op = CmpOp::Eq; break;
        case Tok::Ne: op = CmpOp::Ne; break;
        default: return std::nullopt;
        }
        advance();
        return op;
    }

    Term term() {
        Term t = product();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            auto op = cur_.kind == Tok::Plus ? ArithOp::Add : ArithOp::Sub;
            advance();
            t = Term::arith(op, std::move(t), product());
        }
        return t;
    }

    Term product() {
        Term t = unary();
        while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
            auto op = cur_.kind == Tok::Star ? ArithOp::Mul : ArithOp::Div;
            advance();
            t = Term::arith(op, std::move(t), unary());
        }
        return t;
    }

    Term unary() {
        if (accept(Tok::Minus)) {
            if (cur_.kind == Tok::Integer)
                return Term::integer(-integer());
            return Term::arith(ArithOp::Sub, Term::integer(0), unary());
        }
        return primary();
    }

    std::int64_t integer() {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), v);
        if (ec != std::errc{})
            throw SyntaxError(std::to_string(cur_.line) + ":" + std::to_string(cur_.column) +
                              ": integer out of range '" + cur_.text + "'");
        advance();
        return v;
    }

    Term primary() {
        switch (cur_.kind) {
        case Tok::Integer: return Term::integer(integer());
        case Tok::Variable: {
            auto t = Term::variable(cur_.text);
            advance();
            return t;
        }
        case Tok::Anonymous: advance(); return Term::anonymous();
        case Tok::Ident: {
            if (ahead_.kind == Tok::LParen) {
                advance();
                throw SyntaxError(std::to_string(cur_.line) + ":" + std::to_string(cur_.column) +
                                  ": function terms are not supported");
            }
            auto t = Term::symbol(cur_.text);
            advance();
            return t;
        }
        case Tok::LParen: {
            advance();
            auto t = term();
            expect(Tok::RParen);
            return t;
        }
        default: fail({"term"});
        }
    }

    static bool contains_anonymous(const Term& t) {
        if (t.is_anonymous())
            return true;
        return t.is_arith() && (contains_anonymous(t.lhs()) || contains_anonymous(t.rhs()));
    }

    static void check_safety(const Rule& r) {
        for (const auto& l : r.body)
            if (l.is_atom())
                for (const auto& t : l.args)
                    if (t.is_arith() && contains_anonymous(t))
                        throw SyntaxError(std::to_string(r.line) + ": anonymous variable inside arithmetic");
        auto unsafe = unsafe_vars(r);
        if (!unsafe.empty())
            throw UnsafeRuleError("rule at line " + std::to_string(r.line) + " is unsafe: variable " +
                                  *unsafe.begin() + " is not bound by a positive body atom");
    }

    Lexer lexer_;
    ParseOptions opts_;
    Token cur_;
    Token ahead_;
};

} // namespace detail

/// Parses program text. Every returned rule is safe.
inline Program parse_program(std::string_view text, ParseOptions opts = {}) {
    return detail::Parser(text, opts).program();
}

} // namespace lpdecomp
