#pragma once

// Bottom-up grounder for the accepted fragment. Semi-naive evaluation per
// stratum with hash indexes on bound argument positions. Positive body atoms
// are joined in the order written; comparisons and negated atoms run as soon
// as their variables are bound.

#include "lpdecomp/ast.hpp"
#include "lpdecomp/printer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace lpdecomp {

/// Ground constant. Integers order before symbols.
using GroundValue = std::variant<std::int64_t, std::string>;
using GroundTuple = std::vector<GroundValue>;

struct GroundResult {
    std::map<Signature, std::set<GroundTuple>> atoms;
    std::uint64_t ground_rules = 0; ///< satisfied rule instantiations
    std::uint64_t work = 0;         ///< tuples inspected while joining
    std::chrono::nanoseconds elapsed{0};

    std::size_t num_atoms() const {
        std::size_t n = 0;
        for (const auto& [sig, tuples] : atoms)
            n += tuples.size();
        return n;
    }

    /// Textual atoms for the given predicates (all predicates when empty).
    std::set<std::string> atom_strings(const std::set<Signature>& only = {}) const {
        std::set<std::string> out;
        for (const auto& [sig, tuples] : atoms) {
            if (!only.empty() && !only.contains(sig))
                continue;
            for (const auto& t : tuples) {
                std::string s = sig.name;
                if (!t.empty()) {
                    s += '(';
                    for (std::size_t i = 0; i < t.size(); ++i) {
                        if (i)
                            s += ',';
                        if (auto* v = std::get_if<std::int64_t>(&t[i]))
                            s += std::to_string(*v);
                        else
                            s += std::get<std::string>(t[i]);
                    }
                    s += ')';
                }
                out.insert(std::move(s));
            }
        }
        return out;
    }
};

struct GroundOptions {
    /// Abort with TimeoutError once this wall-clock budget is spent.
    std::optional<std::chrono::duration<double>> timeout;
    /// Abort with TimeoutError once this many tuples have been inspected.
    std::optional<std::uint64_t> work_budget;
};

namespace detail {

// Symbols are interned; a value is an integer or a symbol id.
struct Value {
    std::int64_t raw = 0;
    bool sym = false;
    friend bool operator==(const Value&, const Value&) = default;
};

using Tuple = std::vector<Value>;

struct TupleHash {
    std::size_t operator()(const Tuple& t) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (const auto& v : t) {
            h ^= static_cast<std::uint64_t>(v.raw) * 2 + (v.sym ? 1 : 0);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

class Relation {
public:
    std::size_t size() const { return tuples_.size(); }
    const Tuple& operator[](std::size_t i) const { return tuples_[i]; }
    bool contains(const Tuple& t) const { return set_.contains(t); }

    bool insert(const Tuple& t) {
        if (!set_.insert(t).second)
            return false;
        for (auto& [mask, index] : indexes_)
            index[project(t, mask)].push_back(tuples_.size());
        tuples_.push_back(t);
        return true;
    }

    /// Tuple ids whose values at the positions in `mask` equal `key`.
    const std::vector<std::size_t>* lookup(std::uint64_t mask, const Tuple& key) {
        auto [it, fresh] = indexes_.try_emplace(mask);
        if (fresh)
            for (std::size_t i = 0; i < tuples_.size(); ++i)
                it->second[project(tuples_[i], mask)].push_back(i);
        auto hit = it->second.find(key);
        return hit == it->second.end() ? nullptr : &hit->second;
    }

private:
    static Tuple project(const Tuple& t, std::uint64_t mask) {
        Tuple key;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (mask & (1ull << i))
                key.push_back(t[i]);
        return key;
    }

    std::vector<Tuple> tuples_;
    std::unordered_set<Tuple, TupleHash> set_;
    std::unordered_map<std::uint64_t, std::unordered_map<Tuple, std::vector<std::size_t>, TupleHash>> indexes_;
};

// Compiled term: variables are slot numbers.
struct CTerm {
    enum class Kind : std::uint8_t { Const, Slot, Anonymous, Arith };
    Kind kind = Kind::Anonymous;
    Value value;
    std::size_t slot = 0;
    ArithOp op = ArithOp::Add;
    std::vector<CTerm> operands;
};

struct Check {
    enum class Kind : std::uint8_t { Compare, Negated };
    Kind kind = Kind::Compare;
    CmpOp rel = CmpOp::Eq;
    CTerm lhs, rhs;
    std::size_t pred = 0;      // Negated
    std::vector<CTerm> args;   // Negated
};

struct Step {
    std::size_t pred = 0;
    bool recursive = false;
    // Per argument: what to do with the matched tuple value.
    enum class Mode : std::uint8_t { Key, Bind, Store, Ignore };
    std::vector<Mode> modes;
    std::vector<CTerm> args; // Key: term to evaluate; Bind/Store: Slot term
    std::uint64_t mask = 0;
    std::vector<Check> checks; // run after this step binds its variables
};

struct CompiledRule {
    std::vector<Check> initial_checks;
    std::vector<Step> steps;
    std::vector<std::pair<std::size_t, std::vector<CTerm>>> heads;
    std::size_t slots = 0;
};

class Engine {
public:
    Engine(const Program& p, const GroundOptions& opts) : program_(p), opts_(opts) {}

    GroundResult run() {
        auto start = std::chrono::steady_clock::now();
        deadline_start_ = start;
        collect_predicates();
        auto strata = stratify();

        for (const auto& s : program_.statements)
            if (s.is_fact()) {
                const auto& a = s.head.front();
                Tuple t;
                std::vector<Value> none;
                bool ok = true;
                for (const auto& arg : a.args) {
                    auto v = eval(compile_term(arg, nullptr), none);
                    if (!v) { ok = false; break; }
                    t.push_back(*v);
                }
                if (ok)
                    relations_[pred_id(a.signature())].insert(t);
            }

        for (const auto& stratum : strata)
            evaluate_stratum(stratum);

        GroundResult out;
        for (std::size_t i = 0; i < preds_.size(); ++i) {
            auto& tuples = out.atoms[preds_[i]];
            for (std::size_t k = 0; k < relations_[i].size(); ++k) {
                GroundTuple g;
                for (const auto& v : relations_[i][k])
                    g.push_back(v.sym ? GroundValue(symbols_[static_cast<std::size_t>(v.raw)]) : GroundValue(v.raw));
                tuples.insert(std::move(g));
            }
        }
        out.ground_rules = ground_rules_;
        out.work = work_;
        out.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
        if (out.elapsed.count() == 0)
            out.elapsed = std::chrono::nanoseconds(1);
        return out;
    }

private:
    // ---- predicates and stratification ----

    std::size_t pred_id(const Signature& s) {
        auto [it, fresh] = pred_ids_.try_emplace(s, preds_.size());
        if (fresh) {
            preds_.push_back(s);
            relations_.emplace_back();
        }
        return it->second;
    }

    void collect_predicates() {
        for (const auto& s : program_.statements)
            for (const auto* part : {&s.head, &s.body})
                for (const auto& l : *part)
                    if (l.is_atom())
                        pred_id(l.signature());
    }

    // Strongly connected components of the dependency graph in evaluation order.
    std::vector<std::vector<std::size_t>> stratify() {
        const std::size_t n = preds_.size();
        std::vector<std::vector<std::pair<std::size_t, bool>>> deps(n); // head -> (body, negative)
        for (const auto& s : program_.statements) {
            if (s.is_fact())
                continue;
            for (const auto& h : s.head)
                for (const auto& b : s.body)
                    if (b.is_atom())
                        deps[pred_ids_.at(h.signature())].emplace_back(pred_ids_.at(b.signature()), b.naf);
        }
        // Tarjan; components come out dependencies-first.
        std::vector<int> index(n, -1), low(n, 0);
        std::vector<bool> on_stack(n, false);
        std::vector<std::size_t> stack;
        std::vector<std::size_t> comp_of(n, 0);
        std::vector<std::vector<std::size_t>> comps;
        int counter = 0;
        std::function<void(std::size_t)> visit = [&](std::size_t v) {
            index[v] = low[v] = counter++;
            stack.push_back(v);
            on_stack[v] = true;
            for (auto [w, neg] : deps[v]) {
                if (index[w] < 0) {
                    visit(w);
                    low[v] = std::min(low[v], low[w]);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
            }
            if (low[v] == index[v]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp_of[w] = comps.size();
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                comps.push_back(std::move(comp));
            }
        };
        for (std::size_t v = 0; v < n; ++v)
            if (index[v] < 0)
                visit(v);
        for (std::size_t v = 0; v < n; ++v)
            for (auto [w, neg] : deps[v])
                if (neg && comp_of[v] == comp_of[w])
                    throw UnstratifiedError("predicate " + to_string(preds_[v]) +
                                            " depends negatively on " + to_string(preds_[w]) +
                                            " within a recursive component");
        stratum_of_ = comp_of;
        return comps;
    }

    // ---- compilation ----

    CTerm compile_term(const Term& t, std::map<std::string, std::size_t>* slots) {
        CTerm c;
        switch (t.kind) {
        case Term::Kind::Integer:
            c.kind = CTerm::Kind::Const;
            c.value = {t.value, false};
            break;
        case Term::Kind::Symbol:
            c.kind = CTerm::Kind::Const;
            c.value = {intern(t.name), true};
            break;
        case Term::Kind::Variable:
            c.kind = CTerm::Kind::Slot;
            c.slot = slots->try_emplace(t.name, slots->size()).first->second;
            break;
        case Term::Kind::Anonymous: c.kind = CTerm::Kind::Anonymous; break;
        case Term::Kind::Arith:
            c.kind = CTerm::Kind::Arith;
            c.op = t.op;
            c.operands.push_back(compile_term(t.lhs(), slots));
            c.operands.push_back(compile_term(t.rhs(), slots));
            break;
        }
        return c;
    }

    std::int64_t intern(const std::string& s) {
        auto [it, fresh] = symbol_ids_.try_emplace(s, static_cast<std::int64_t>(symbols_.size()));
        if (fresh)
            symbols_.push_back(s);
        return it->second;
    }

    static void slots_of(const CTerm& t, std::set<std::size_t>& out) {
        if (t.kind == CTerm::Kind::Slot)
            out.insert(t.slot);
        for (const auto& o : t.operands)
            slots_of(o, out);
    }

    CompiledRule compile(const Rule& r, std::size_t stratum) {
        CompiledRule cr;
        std::map<std::string, std::size_t> slots;
        std::set<std::size_t> bound;

        struct Pending {
            Check check;
            std::set<std::size_t> needs;
        };
        std::vector<Pending> pending;
        auto add_pending = [&](Check c) {
            Pending p{std::move(c), {}};
            slots_of(p.check.lhs, p.needs);
            slots_of(p.check.rhs, p.needs);
            for (const auto& a : p.check.args)
                slots_of(a, p.needs);
            pending.push_back(std::move(p));
        };
        auto flush = [&](std::vector<Check>& into) {
            for (auto it = pending.begin(); it != pending.end();) {
                if (std::includes(bound.begin(), bound.end(), it->needs.begin(), it->needs.end())) {
                    into.push_back(std::move(it->check));
                    it = pending.erase(it);
                } else {
                    ++it;
                }
            }
        };

        // Compile all terms first so slot numbering is stable.
        std::vector<std::vector<CTerm>> body_terms;
        for (const auto& l : r.body) {
            std::vector<CTerm> ts;
            for (const auto& a : l.args)
                ts.push_back(compile_term(a, &slots));
            body_terms.push_back(std::move(ts));
        }
        for (const auto& h : r.head) {
            std::vector<CTerm> ts;
            for (const auto& a : h.args)
                ts.push_back(compile_term(a, &slots));
            cr.heads.emplace_back(pred_id(h.signature()), std::move(ts));
        }
        std::size_t next_slot = slots.size();

        for (std::size_t i = 0; i < r.body.size(); ++i) {
            const auto& l = r.body[i];
            if (l.is_builtin()) {
                Check c;
                c.rel = l.rel;
                c.lhs = body_terms[i][0];
                c.rhs = body_terms[i][1];
                add_pending(std::move(c));
            } else if (l.naf) {
                Check c;
                c.kind = Check::Kind::Negated;
                c.pred = pred_id(l.signature());
                c.args = body_terms[i];
                add_pending(std::move(c));
            }
        }
        flush(cr.initial_checks);

        for (std::size_t i = 0; i < r.body.size(); ++i) {
            const auto& l = r.body[i];
            if (!l.is_positive_atom())
                continue;
            Step s;
            s.pred = pred_id(l.signature());
            s.recursive = stratum_of_[s.pred] == stratum;
            std::set<std::size_t> newly;
            for (std::size_t k = 0; k < body_terms[i].size(); ++k) {
                const auto& t = body_terms[i][k];
                std::set<std::size_t> needs;
                slots_of(t, needs);
                if (t.kind == CTerm::Kind::Anonymous) {
                    s.modes.push_back(Step::Mode::Ignore);
                    s.args.push_back(t);
                } else if (t.kind == CTerm::Kind::Slot && !bound.contains(t.slot) && !newly.contains(t.slot)) {
                    s.modes.push_back(Step::Mode::Bind);
                    s.args.push_back(t);
                    newly.insert(t.slot);
                } else if (std::includes(bound.begin(), bound.end(), needs.begin(), needs.end())) {
                    s.modes.push_back(Step::Mode::Key);
                    s.args.push_back(t);
                    s.mask |= 1ull << k;
                } else if (t.kind == CTerm::Kind::Slot) {
                    // Repeated variable within this atom: compare after binding.
                    CTerm store;
                    store.kind = CTerm::Kind::Slot;
                    store.slot = next_slot++;
                    s.modes.push_back(Step::Mode::Store);
                    s.args.push_back(store);
                    Check c;
                    c.lhs = store;
                    c.rhs = t;
                    add_pending(std::move(c));
                    newly.insert(store.slot);
                } else {
                    // Arithmetic over variables bound later: remember the value.
                    CTerm store;
                    store.kind = CTerm::Kind::Slot;
                    store.slot = next_slot++;
                    s.modes.push_back(Step::Mode::Store);
                    s.args.push_back(store);
                    Check c;
                    c.lhs = store;
                    c.rhs = t;
                    add_pending(std::move(c));
                    newly.insert(store.slot);
                }
            }
            bound.insert(newly.begin(), newly.end());
            flush(s.checks);
            cr.steps.push_back(std::move(s));
        }
        if (!pending.empty())
            throw UnsafeRuleError("rule at line " + std::to_string(r.line) + " has variables no positive atom binds");
        cr.slots = next_slot;
        return cr;
    }

    // ---- evaluation ----

    std::optional<Value> eval(const CTerm& t, const std::vector<Value>& env) const {
        switch (t.kind) {
        case CTerm::Kind::Const: return t.value;
        case CTerm::Kind::Slot: return env[t.slot];
        case CTerm::Kind::Anonymous: return std::nullopt;
        case CTerm::Kind::Arith: {
            auto a = eval(t.operands[0], env);
            auto b = eval(t.operands[1], env);
            if (!a || !b)
                return std::nullopt;
            if (a->sym || b->sym)
                throw ArithmeticError("arithmetic on symbolic constant");
            switch (t.op) {
            case ArithOp::Add: return Value{a->raw + b->raw, false};
            case ArithOp::Sub: return Value{a->raw - b->raw, false};
            case ArithOp::Mul: return Value{a->raw * b->raw, false};
            case ArithOp::Div:
                if (b->raw == 0)
                    return std::nullopt; // instantiation discarded
                return Value{a->raw / b->raw, false};
            }
        }
        }
        return std::nullopt;
    }

    int compare(const Value& a, const Value& b) const {
        if (a.sym != b.sym)
            return a.sym ? 1 : -1;
        if (!a.sym)
            return a.raw < b.raw ? -1 : (a.raw > b.raw ? 1 : 0);
        return symbols_[static_cast<std::size_t>(a.raw)].compare(symbols_[static_cast<std::size_t>(b.raw)]);
    }

    bool run_checks(const std::vector<Check>& checks, const std::vector<Value>& env) {
        for (const auto& c : checks) {
            if (c.kind == Check::Kind::Compare) {
                auto a = eval(c.lhs, env);
                auto b = eval(c.rhs, env);
                if (!a || !b)
                    return false;
                int cmp = compare(*a, *b);
                bool ok = false;
                switch (c.rel) {
                case CmpOp::Lt: ok = cmp < 0; break;
                case CmpOp::Le: ok = cmp <= 0; break;
                case CmpOp::Gt: ok = cmp > 0; break;
                case CmpOp::Ge: ok = cmp >= 0; break;
                case CmpOp::Eq: ok = cmp == 0; break;
                case CmpOp::Ne: ok = cmp != 0; break;
                }
                if (!ok)
                    return false;
            } else {
                std::uint64_t mask = 0;
                Tuple key;
                for (std::size_t k = 0; k < c.args.size(); ++k) {
                    if (c.args[k].kind == CTerm::Kind::Anonymous)
                        continue;
                    auto v = eval(c.args[k], env);
                    if (!v)
                        return false;
                    mask |= 1ull << k;
                    key.push_back(*v);
                }
                tick();
                auto& rel = relations_[c.pred];
                bool found = mask == (c.args.empty() ? 0 : (1ull << c.args.size()) - 1)
                                 ? rel.contains(key)
                                 : (rel.lookup(mask, key) != nullptr);
                if (found)
                    return false;
            }
        }
        return true;
    }

    void tick() {
        ++work_;
        if (opts_.work_budget && work_ > *opts_.work_budget)
            throw TimeoutError("work budget of " + std::to_string(*opts_.work_budget) + " exceeded");
        if (opts_.timeout && (work_ & 0xfff) == 0 &&
            std::chrono::steady_clock::now() - deadline_start_ > *opts_.timeout)
            throw TimeoutError("grounding time limit exceeded");
    }

    struct Range {
        std::size_t lo, hi;
    };

    void join(const CompiledRule& cr, std::size_t step, std::vector<Value>& env, std::size_t delta_step,
              const std::vector<Range>& full, const std::vector<Range>& delta,
              std::vector<std::pair<std::size_t, Tuple>>& derived) {
        if (step == cr.steps.size()) {
            ++ground_rules_;
            for (const auto& [pred, args] : cr.heads) {
                Tuple t;
                bool ok = true;
                for (const auto& a : args) {
                    auto v = eval(a, env);
                    if (!v) { ok = false; break; }
                    t.push_back(*v);
                }
                if (ok)
                    derived.emplace_back(pred, std::move(t));
            }
            return;
        }
        const Step& s = cr.steps[step];
        auto& rel = relations_[s.pred];
        Range range = step == delta_step ? delta[s.pred] : full[s.pred];
        if (range.lo >= range.hi)
            return;

        auto visit = [&](std::size_t id) {
            tick();
            const Tuple& tuple = rel[id];
            for (std::size_t k = 0; k < s.modes.size(); ++k)
                if (s.modes[k] == Step::Mode::Bind || s.modes[k] == Step::Mode::Store)
                    env[s.args[k].slot] = tuple[k];
            if (run_checks(s.checks, env))
                join(cr, step + 1, env, delta_step, full, delta, derived);
        };

        if (s.mask == 0) {
            for (std::size_t id = range.lo; id < range.hi; ++id)
                visit(id);
            return;
        }
        Tuple key;
        for (std::size_t k = 0; k < s.modes.size(); ++k)
            if (s.modes[k] == Step::Mode::Key) {
                auto v = eval(s.args[k], env);
                if (!v)
                    return;
                key.push_back(*v);
            }
        const auto* ids = rel.lookup(s.mask, key);
        if (!ids)
            return;
        // Bucket ids ascend. Buckets are stable: nothing is inserted while joining.
        auto first = std::lower_bound(ids->begin(), ids->end(), range.lo);
        auto last = std::lower_bound(first, ids->end(), range.hi);
        for (auto it = first; it != last; ++it)
            visit(*it);
    }

    void evaluate_stratum(const std::vector<std::size_t>& stratum) {
        std::size_t sid = stratum_of_[stratum.front()];
        std::set<std::size_t> members(stratum.begin(), stratum.end());
        std::vector<CompiledRule> rules;
        for (const auto& s : program_.statements) {
            if (s.is_fact())
                continue;
            bool mine = s.head.empty() ? sid == constraint_stratum() : false;
            for (const auto& h : s.head)
                mine = mine || members.contains(pred_ids_.at(h.signature()));
            if (mine)
                rules.push_back(compile(s, sid));
        }
        if (rules.empty())
            return;

        std::vector<Range> full(relations_.size()), delta(relations_.size());
        auto snapshot = [&] {
            for (std::size_t i = 0; i < relations_.size(); ++i)
                full[i] = {0, relations_[i].size()};
        };
        std::vector<std::pair<std::size_t, Tuple>> derived;
        std::vector<Value> env;

        snapshot();
        for (const auto& cr : rules) {
            env.assign(cr.slots, Value{});
            if (run_checks(cr.initial_checks, env))
                join(cr, 0, env, cr.steps.size(), full, delta, derived);
        }
        for (;;) {
            std::vector<std::size_t> before(relations_.size());
            for (std::size_t i = 0; i < relations_.size(); ++i)
                before[i] = relations_[i].size();
            bool grew = false;
            for (auto& [pred, t] : derived)
                grew = relations_[pred].insert(t) || grew;
            derived.clear();
            if (!grew)
                break;
            for (std::size_t i = 0; i < relations_.size(); ++i)
                delta[i] = {before[i], relations_[i].size()};
            snapshot();
            for (const auto& cr : rules)
                for (std::size_t k = 0; k < cr.steps.size(); ++k) {
                    if (!cr.steps[k].recursive || delta[cr.steps[k].pred].lo >= delta[cr.steps[k].pred].hi)
                        continue;
                    env.assign(cr.slots, Value{});
                    if (run_checks(cr.initial_checks, env))
                        join(cr, 0, env, k, full, delta, derived);
                }
        }
    }

    // Constraints derive nothing; evaluate them once, with the last stratum.
    std::size_t constraint_stratum() const {
        return stratum_of_.empty() ? 0 : *std::max_element(stratum_of_.begin(), stratum_of_.end());
    }

    const Program& program_;
    GroundOptions opts_;
    std::chrono::steady_clock::time_point deadline_start_;
    std::map<Signature, std::size_t> pred_ids_;
    std::vector<Signature> preds_;
    std::vector<Relation> relations_;
    std::vector<std::size_t> stratum_of_;
    std::map<std::string, std::int64_t> symbol_ids_;
    std::vector<std::string> symbols_;
    std::uint64_t ground_rules_ = 0;
    std::uint64_t work_ = 0;
};

} // namespace detail

/// Least model of the positive part, negation by stratum order. Disjunctive
/// heads derive every disjunct, i.e. the atoms that may become true.
inline GroundResult ground(const Program& p, const GroundOptions& opts = {}) {
    return detail::Engine(p, opts).run();
}

struct GroundingTime {
    std::chrono::nanoseconds median{0};
    std::uint64_t work = 0;
};

/// Median wall-clock time over `repetitions` runs after one warm-up run.
inline GroundingTime time_grounding(const Program& p, std::size_t repetitions = 3, const GroundOptions& opts = {}) {
    repetitions = std::max<std::size_t>(repetitions, 1);
    auto warm = ground(p, opts);
    std::vector<std::chrono::nanoseconds> samples;
    for (std::size_t i = 0; i < repetitions; ++i)
        samples.push_back(ground(p, opts).elapsed);
    std::sort(samples.begin(), samples.end());
    return {samples[samples.size() / 2], warm.work};
}

} // namespace lpdecomp
