#pragma once

// Dataset creation: example programs, grounding oracles and the labeling rule.

#include "lpdecomp/ast.hpp"
#include "lpdecomp/dataset.hpp"
#include "lpdecomp/error.hpp"
#include "lpdecomp/features.hpp"
#include "lpdecomp/grounder.hpp"
#include "lpdecomp/printer.hpp"
#include "lpdecomp/rewriter.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <csignal>
#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

namespace lpdecomp {

inline constexpr double kIndifferenceThreshold = 0.10;

/// Compares the cost of the original (`never`) and decomposed (`always`)
/// example programs. An empty cost means that side timed out; when both did,
/// there is no label.
inline std::optional<Label> label_from_times(std::optional<double> t_never, std::optional<double> t_always,
                                             double threshold = kIndifferenceThreshold) {
    if (!t_never && !t_always)
        return std::nullopt;
    if (!t_never)
        return Label::Decomp;
    if (!t_always)
        return Label::DoNotDecomp;
    double hi = std::max(*t_never, *t_always);
    if (hi <= 0 || std::abs(*t_never - *t_always) / hi < threshold)
        return Label::Indifferent;
    return *t_always < *t_never ? Label::Decomp : Label::DoNotDecomp;
}

/// splitmix64 step; per-example seeds are derived from the command seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Random input facts for every predicate in a rule body: per predicate,
/// n tuples (duplicates dropped) over the integers [0, domain), with n drawn
/// log-uniformly from [min_facts, max_facts].
struct FactGenSpec {
    std::size_t min_facts = 100;
    std::size_t max_facts = 100;
    std::int64_t domain = 20;
};

inline std::vector<Rule> generate_facts(const Rule& r, const FactGenSpec& spec, std::uint64_t seed,
                                        std::size_t* facts_per_predicate = nullptr) {
    std::mt19937_64 rng(seed);
    std::size_t n = spec.min_facts;
    if (spec.max_facts > spec.min_facts) {
        // log-uniform over [min, max]
        double lo = std::log(static_cast<double>(std::max<std::size_t>(spec.min_facts, 1)));
        double hi = std::log(static_cast<double>(spec.max_facts) + 1.0);
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        n = std::clamp(static_cast<std::size_t>(std::exp(lo + u * (hi - lo))), spec.min_facts, spec.max_facts);
    }
    if (facts_per_predicate)
        *facts_per_predicate = n;
    const auto k = static_cast<std::uint64_t>(std::max<std::int64_t>(spec.domain, 1));

    std::set<Signature> preds;
    for (const auto& l : r.body)
        if (l.is_atom())
            preds.insert(l.signature());
    std::vector<Rule> out;
    for (const auto& sig : preds) {
        std::set<std::vector<std::int64_t>> seen;
        std::size_t wanted = sig.arity == 0 ? 1 : n;
        for (std::size_t i = 0; i < wanted; ++i) {
            std::vector<std::int64_t> tuple(sig.arity);
            for (auto& v : tuple)
                v = static_cast<std::int64_t>(rng() % k);
            if (!seen.insert(tuple).second)
                continue;
            Rule f;
            std::vector<Term> args;
            for (auto v : tuple)
                args.push_back(Term::integer(v));
            f.head.push_back(Literal::atom(sig.name, std::move(args)));
            out.push_back(std::move(f));
        }
    }
    return out;
}

/// The rule together with its generated input facts.
inline Program example_program(const Rule& r, const std::vector<Rule>& facts) {
    Program p;
    p.statements = facts;
    p.statements.push_back(r);
    return p;
}

// ---- oracles ----

/// Measures the cost of grounding a program; empty on timeout.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual std::optional<double> measure(const Program& p) const = 0;
    virtual std::string identity() const = 0;
};

enum class CostMode {
    Time, ///< median wall-clock seconds
    Work  ///< tuples inspected by the built-in grounder; deterministic
};

class InternalOracle : public Oracle {
public:
    struct Options {
        CostMode cost = CostMode::Time;
        std::size_t reps = 3;
        std::optional<double> timeout_seconds = 600.0;
        std::optional<std::uint64_t> work_budget;
    };

    explicit InternalOracle(Options o) : o_(o) {}

    std::optional<double> measure(const Program& p) const override {
        GroundOptions g;
        if (o_.timeout_seconds)
            g.timeout = std::chrono::duration<double>(*o_.timeout_seconds);
        g.work_budget = o_.work_budget;
        try {
            if (o_.cost == CostMode::Work)
                return static_cast<double>(ground(p, g).work);
            auto t = time_grounding(p, o_.reps, g);
            return std::chrono::duration<double>(t.median).count();
        } catch (const TimeoutError&) {
            return std::nullopt;
        }
    }

    std::string identity() const override {
        std::string s = "internal cost=";
        s += o_.cost == CostMode::Work ? "work" : "time";
        if (o_.cost == CostMode::Time)
            s += " reps=" + std::to_string(o_.reps);
        if (o_.timeout_seconds)
            s += " timeout=" + format_real(*o_.timeout_seconds);
        if (o_.work_budget)
            s += " work_budget=" + std::to_string(*o_.work_budget);
        return s;
    }

private:
    Options o_;
};

/// Runs an external grounder on the printed program; `{file}` in the command
/// template is replaced by the program's path. Cost is the child's wall-clock
/// time; the child must exit with status 0.
class ExternalOracle : public Oracle {
public:
    ExternalOracle(std::string command_template, std::size_t reps, std::optional<double> timeout_seconds)
        : template_(std::move(command_template)), reps_(std::max<std::size_t>(reps, 1)), timeout_(timeout_seconds) {
        if (template_.find("{file}") == std::string::npos)
            throw OracleError("external oracle template lacks a {file} placeholder");
    }

    std::optional<double> measure(const Program& p) const override {
        std::string path = write_temp(p);
        std::string cmd = template_;
        for (auto pos = cmd.find("{file}"); pos != std::string::npos; pos = cmd.find("{file}", pos + path.size()))
            cmd.replace(pos, 6, shell_quote(path));
        std::vector<double> samples;
        try {
            for (std::size_t i = 0; i < reps_; ++i) {
                auto t = run_once(cmd);
                if (!t) {
                    ::unlink(path.c_str());
                    return std::nullopt;
                }
                samples.push_back(*t);
            }
        } catch (...) {
            ::unlink(path.c_str());
            throw;
        }
        ::unlink(path.c_str());
        std::sort(samples.begin(), samples.end());
        return samples[samples.size() / 2];
    }

    std::string identity() const override { return "exec:" + template_ + " reps=" + std::to_string(reps_); }

private:
    static std::string shell_quote(const std::string& s) {
        std::string out = "'";
        for (char c : s) {
            if (c == '\'')
                out += "'\\''";
            else
                out += c;
        }
        return out + "'";
    }

    static std::string write_temp(const Program& p) {
        const char* dir = std::getenv("TMPDIR");
        std::string pattern = std::string(dir && *dir ? dir : "/tmp") + "/lpdecomp-XXXXXX.lp";
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        int fd = ::mkstemps(buf.data(), 3);
        if (fd < 0)
            throw OracleError("cannot create temporary program file");
        ::close(fd);
        std::string path(buf.data());
        std::ofstream os(path);
        os << p;
        if (!os)
            throw OracleError("cannot write " + path);
        return path;
    }

    std::optional<double> run_once(const std::string& cmd) const {
        auto start = std::chrono::steady_clock::now();
        pid_t pid = ::fork();
        if (pid < 0)
            throw OracleError("fork failed");
        if (pid == 0) {
            int null = ::open("/dev/null", O_RDWR);
            if (null >= 0) {
                ::dup2(null, 0);
                ::dup2(null, 1);
                ::dup2(null, 2);
            }
            ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        int status = 0;
        for (;;) {
            pid_t r = ::waitpid(pid, &status, WNOHANG);
            if (r == pid)
                break;
            if (r < 0)
                throw OracleError("waitpid failed");
            if (timeout_ && std::chrono::steady_clock::now() - start > std::chrono::duration<double>(*timeout_)) {
                ::kill(pid, SIGKILL);
                ::waitpid(pid, &status, 0);
                return std::nullopt;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
            throw OracleError("external grounder failed: " + cmd);
        return secs;
    }

    std::string template_;
    std::size_t reps_;
    std::optional<double> timeout_;
};

// ---- labeling ----

struct LabelRecord {
    std::string source;
    std::size_t line = 0;
    std::uint64_t seed = 0;
    std::size_t facts_per_predicate = 0;
    FeatureVector features;
    std::optional<double> t_never;
    std::optional<double> t_always;
    std::optional<Label> label;
    std::string note; ///< why the example was skipped, if it was
};

/// Labels one rule: builds its example program, measures the never and
/// always versions with the oracle and applies the indifference rule.
inline LabelRecord label_rule(const Rule& r, const FactGenSpec& spec, std::uint64_t seed, const Oracle& oracle,
                              const RewriteOptions& ropts = {}) {
    LabelRecord rec;
    rec.line = r.line;
    rec.seed = seed;
    if (r.head.empty()) {
        rec.note = "constraint";
        return rec;
    }
    auto facts = generate_facts(r, spec, seed, &rec.facts_per_predicate);
    auto never = example_program(r, facts);

    auto names = FreshNames::after(never);
    auto rd = decompose_preferred(r, names, ropts);
    if (rd.is_identity()) {
        rec.note = "not decomposable";
        return rec;
    }
    rec.features = extract_features(r, never, rd);

    Program always;
    always.statements = facts;
    always.statements.insert(always.statements.end(), rd.rules.begin(), rd.rules.end());

    rec.t_never = oracle.measure(never);
    rec.t_always = oracle.measure(always);
    rec.label = label_from_times(rec.t_never, rec.t_always);
    if (!rec.label)
        rec.note = "both versions timed out";
    return rec;
}

struct LabelJob {
    Rule rule;
    std::string source;
};

/// Labels every job, `jobs` at a time. Record i always corresponds to job i
/// and uses seed derive_seed(seed, i), so results do not depend on `jobs`.
inline std::vector<LabelRecord> label_all(const std::vector<LabelJob>& work, const FactGenSpec& spec,
                                          std::uint64_t seed, const Oracle& oracle, std::size_t jobs,
                                          const RewriteOptions& ropts = {}) {
    std::vector<LabelRecord> out(work.size());
    std::vector<std::exception_ptr> errors(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            try {
                out[i] = label_rule(work[i].rule, spec, derive_seed(seed, i), oracle, ropts);
                out[i].source = work[i].source;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(work.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

inline Dataset dataset_from_records(const std::vector<LabelRecord>& records) {
    Dataset ds;
    for (const auto& r : records)
        if (r.label)
            ds.examples.push_back({r.features.as_array(), *r.label, r.t_never, r.t_always});
    return ds;
}

// ---- synthetic corpus ----

struct CorpusSpec {
    std::size_t rules = 500;
    std::size_t min_body = 3;
    std::size_t max_body = 7;
    std::size_t max_arity = 3;
    std::size_t max_vars = 8;
    double builtin_probability = 0.3;
    bool distinct_args = true; ///< no variable repeated inside one atom
};

/// Random safe rule whose preferred decomposition has more than one node.
/// Body predicates are `e0`, `e1`, ... and the head predicate is `head`.
inline Rule random_decomposable_rule(std::mt19937_64& rng, const CorpusSpec& spec, const std::string& head) {
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };
    for (;;) {
        Rule r;
        std::size_t nvars = pick(3, std::max<std::size_t>(spec.max_vars, 3));
        std::size_t nbody = pick(spec.min_body, spec.max_body);
        auto var = [](std::size_t i) { return Term::variable(std::string(1, static_cast<char>('A' + i))); };
        VarSet used;
        for (std::size_t b = 0; b < nbody; ++b) {
            std::size_t arity = pick(1, std::min(spec.max_arity, nvars));
            std::vector<Term> args;
            while (args.size() < arity) {
                auto v = var(pick(0, nvars - 1));
                if (spec.distinct_args && std::count(args.begin(), args.end(), v))
                    continue;
                used.insert(v.name);
                args.push_back(std::move(v));
            }
            r.body.push_back(Literal::atom("e" + std::to_string(b), std::move(args)));
        }
        std::vector<std::string> vars(used.begin(), used.end());
        if (vars.size() >= 2 && static_cast<double>(rng() % 1000) < spec.builtin_probability * 1000) {
            auto a = vars[pick(0, vars.size() - 1)], b = vars[pick(0, vars.size() - 1)];
            if (a != b)
                r.body.push_back(Literal::builtin(rng() % 2 ? CmpOp::Le : CmpOp::Ne, Term::variable(a),
                                                  Term::variable(b)));
        }
        std::vector<Term> hargs;
        auto keep = 1 + rng() % 10; // out of 10
        for (const auto& v : vars)
            if (rng() % 10 < keep)
                hargs.push_back(Term::variable(v));
        if (hargs.empty())
            hargs.push_back(Term::variable(vars.front()));
        r.head.push_back(Literal::atom(head, std::move(hargs)));

        auto h = build_hypergraph(r);
        if (h.empty() || select_decomposition(h).size() <= 1)
            continue;
        return r;
    }
}

inline Program synthetic_corpus(const CorpusSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Program p;
    for (std::size_t i = 0; i < spec.rules; ++i) {
        auto r = random_decomposable_rule(rng, spec, "h" + std::to_string(i));
        r.line = i + 1;
        p.statements.push_back(std::move(r));
    }
    return p;
}

} // namespace lpdecomp
