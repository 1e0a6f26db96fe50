#include "support.hpp"

#include "lpdecomp/labeling.hpp"
#include "lpdecomp/printer.hpp"

#include <catch_amalgamated.hpp>

using namespace lpdecomp;
using namespace lpdecomp::testing;

namespace {

InternalOracle work_oracle() {
    InternalOracle::Options o;
    o.cost = CostMode::Work;
    o.work_budget = 20'000'000;
    return InternalOracle(o);
}

std::vector<LabelJob> corpus_jobs(std::size_t n, std::uint64_t seed) {
    CorpusSpec cs;
    cs.rules = n;
    std::vector<LabelJob> jobs;
    auto corpus = synthetic_corpus(cs, seed);
    for (const auto* r : corpus.rules())
        jobs.push_back({*r, "corpus"});
    return jobs;
}

} // namespace

TEST_CASE("labels from timings") {
    CHECK(label_from_times(34.86, 18.92) == Label::Decomp);
    CHECK(label_from_times(18.92, 34.86) == Label::DoNotDecomp);
    CHECK(label_from_times(4.11, 4.09) == Label::Indifferent);
    CHECK(label_from_times(2.0, 2.0) == Label::Indifferent);
    CHECK(label_from_times(0.0, 0.0) == Label::Indifferent);
    CHECK(label_from_times(10.0, 9.5) == Label::Indifferent);
    CHECK(label_from_times(10.0, 9.0) == Label::Decomp);
    CHECK(label_from_times(9.0, 10.0) == Label::DoNotDecomp);
}

TEST_CASE("timeouts count as the slower side") {
    CHECK(label_from_times(std::nullopt, 3.0) == Label::Decomp);
    CHECK(label_from_times(3.0, std::nullopt) == Label::DoNotDecomp);
    CHECK_FALSE(label_from_times(std::nullopt, std::nullopt));
}

TEST_CASE("labels do not depend on the time unit") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> t(0.001, 100.0);
    for (int i = 0; i < 1000; ++i) {
        double a = t(rng), b = i % 5 == 0 ? a * 1.05 : t(rng);
        auto base = label_from_times(a, b);
        for (double k : {0.001, 1000.0, 60.0})
            CHECK(label_from_times(a * k, b * k) == base);
    }
}

TEST_CASE("derived seeds") {
    CHECK(derive_seed(0, 0) == derive_seed(0, 0));
    CHECK(derive_seed(0, 0) != derive_seed(0, 1));
    CHECK(derive_seed(0, 1) != derive_seed(1, 1));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i)
        seen.insert(derive_seed(42, i));
    CHECK(seen.size() == 1000);
}

TEST_CASE("fact generation") {
    auto r = parse_rule(kR1);
    FactGenSpec spec{30, 30, 5};
    std::size_t n = 0;
    auto facts = generate_facts(r, spec, 7, &n);
    CHECK(n == 30);
    std::map<std::string, std::size_t> per;
    std::set<std::string> distinct;
    for (const auto& f : facts) {
        CHECK(f.is_fact());
        ++per[f.head[0].predicate];
        CHECK(distinct.insert(to_text(f)).second);
        for (const auto& t : f.head[0].args) {
            CHECK(t.kind == Term::Kind::Integer);
            CHECK(t.value >= 0);
            CHECK(t.value < 5);
        }
    }
    CHECK(per.size() == 4);
    CHECK(per["s"] == 5); // only 5 unary tuples exist
    CHECK(per["a"] <= 30);
    CHECK(per["a"] >= 20);

    auto text = [&](std::uint64_t seed) { return print_program(with_facts({}, generate_facts(r, spec, seed))); };
    CHECK(text(7) == text(7));
    CHECK(text(7) != text(8));

    FactGenSpec range{2, 300, 10};
    std::set<std::size_t> sizes;
    for (std::uint64_t s = 0; s < 200; ++s) {
        std::size_t m = 0;
        generate_facts(r, range, s, &m);
        CHECK(m >= 2);
        CHECK(m <= 300);
        sizes.insert(m);
    }
    CHECK(*sizes.begin() < 10);
    CHECK(*sizes.rbegin() > 100);

    auto zero = generate_facts(parse_rule("p(X) :- q, a(X)."), spec, 1);
    CHECK(std::count_if(zero.begin(), zero.end(), [](const Rule& f) { return f.head[0].predicate == "q"; }) == 1);
}

TEST_CASE("label_rule on r1") {
    auto r = parse_rule(kR1);
    auto oracle = work_oracle();
    auto rec = label_rule(r, {40, 40, 6}, 1, oracle);
    REQUIRE(rec.label);
    REQUIRE(rec.t_never);
    REQUIRE(rec.t_always);
    CHECK(rec.label == label_from_times(rec.t_never, rec.t_always));
    CHECK(rec.features.body_len == 5);
    CHECK(rec.features.num_decomp_rules == 3);
    CHECK(rec.facts_per_predicate == 40);
    CHECK(rec.note.empty());

    auto again = label_rule(r, {40, 40, 6}, 1, oracle);
    CHECK(again.t_never == rec.t_never);
    CHECK(again.t_always == rec.t_always);
}

TEST_CASE("label_rule skips constraints and undecomposable rules") {
    auto oracle = work_oracle();
    auto c = label_rule(parse_rule(":- a(X), b(X)."), {}, 0, oracle);
    CHECK_FALSE(c.label);
    CHECK(c.note == "constraint");
    auto simple = label_rule(parse_rule("p(X) :- a(X,Y)."), {}, 0, oracle);
    CHECK_FALSE(simple.label);
    CHECK(simple.note == "not decomposable");
}

TEST_CASE("work budget exhaustion on both sides drops the example") {
    InternalOracle::Options o;
    o.cost = CostMode::Work;
    o.work_budget = 10;
    InternalOracle tight(o);
    auto rec = label_rule(parse_rule(kR1), {50, 50, 5}, 0, tight);
    CHECK_FALSE(rec.t_never);
    CHECK_FALSE(rec.t_always);
    CHECK_FALSE(rec.label);
    CHECK(rec.note == "both versions timed out");
    CHECK(dataset_from_records({rec}).size() == 0);
}

TEST_CASE("label_all does not depend on the number of jobs") {
    auto jobs = corpus_jobs(40, 3);
    auto oracle = work_oracle();
    FactGenSpec spec{2, 60, 8};
    auto one = label_all(jobs, spec, 5, oracle, 1);
    auto four = label_all(jobs, spec, 5, oracle, 4);
    REQUIRE(one.size() == 40);
    REQUIRE(four.size() == 40);
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].seed == derive_seed(5, i));
        CHECK(four[i].seed == one[i].seed);
        CHECK(four[i].t_never == one[i].t_never);
        CHECK(four[i].t_always == one[i].t_always);
        CHECK(four[i].label == one[i].label);
        CHECK(four[i].features == one[i].features);
        CHECK(four[i].source == "corpus");
    }
    auto ds = dataset_from_records(one);
    CHECK(ds.size() == static_cast<std::size_t>(std::count_if(one.begin(), one.end(), [](const auto& r) { return r.label.has_value(); })));
}

TEST_CASE("synthetic corpus") {
    CorpusSpec cs;
    cs.rules = 60;
    auto a = synthetic_corpus(cs, 11);
    CHECK(print_program(a) == print_program(synthetic_corpus(cs, 11)));
    CHECK(print_program(a) != print_program(synthetic_corpus(cs, 12)));
    REQUIRE(a.rules().size() == 60);
    for (const auto* r : a.rules()) {
        CHECK(is_safe(*r));
        CHECK(r->body.size() >= cs.min_body);
        CHECK(r->body.size() <= cs.max_body + 1); // plus at most one builtin
        CHECK(select_decomposition(build_hypergraph(*r)).size() > 1);
        for (const auto& l : r->body)
            if (l.is_atom()) {
                CHECK(l.args.size() <= cs.max_arity);
                std::set<std::string> vs;
                for (const auto& t : l.args)
                    if (t.kind == Term::Kind::Variable)
                        CHECK(vs.insert(t.name).second);
            }
        CHECK(rule_vars(*r).size() <= cs.max_vars);
    }
    // parses back from its printed form
    CHECK(parse_program(print_program(a)) == a);
}

TEST_CASE("external oracle") {
    auto p = parse_program("e(1,2). t(X,Y) :- e(X,Y).");
    CHECK_THROWS_AS(ExternalOracle("true", 1, 5.0), OracleError);

    ExternalOracle ok("true {file}", 3, 5.0);
    auto t = ok.measure(p);
    REQUIRE(t);
    CHECK(*t >= 0);
    CHECK(ok.identity() == "exec:true {file} reps=3");

    ExternalOracle reads("grep -q 't(X,Y) :- e(X,Y).' {file}", 1, 5.0);
    CHECK(reads.measure(p));

    ExternalOracle fails("false {file}", 1, 5.0);
    CHECK_THROWS_AS(fails.measure(p), OracleError);

    ExternalOracle slow("sleep 5; true {file}", 1, 0.2);
    auto start = std::chrono::steady_clock::now();
    CHECK_FALSE(slow.measure(p));
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));
}

TEST_CASE("internal oracle identity") {
    CHECK(work_oracle().identity() == "internal cost=work timeout=600.0 work_budget=20000000");
    InternalOracle t(InternalOracle::Options{});
    CHECK(t.identity() == "internal cost=time reps=3 timeout=600.0");
    auto v = t.measure(parse_program("e(1,2). t(X,Y) :- e(X,Y)."));
    REQUIRE(v);
    CHECK(*v > 0);
}
