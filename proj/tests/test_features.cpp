#include "support.hpp"

#include "lpdecomp/dataset.hpp"
#include "lpdecomp/features.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace lpdecomp;
using namespace lpdecomp::testing;

namespace {

Program r1_with_facts(std::size_t n) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i)
        text += "s(" + std::to_string(i) + ").\n";
    return parse_program(text + kR1);
}

FeatureVector features_of(const Program& p, std::size_t rule, const FeatureOptions& fopts = {}) {
    const auto& r = *p.rules().at(rule);
    auto names = FreshNames::after(p);
    auto rd = decompose_preferred(r, names);
    return extract_features(r, p, rd, fopts);
}

} // namespace

TEST_CASE("Rational stays reduced") {
    CHECK(Rational(6, 4) == Rational(3, 2));
    CHECK(Rational(9, 3).den() == 1);
    CHECK(Rational(0, 5) == Rational(0));
    CHECK(Rational(8, 3).value() == Catch::Approx(8.0 / 3.0));
    CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("features of r1 with 100 facts") {
    auto f = features_of(r1_with_facts(100), 0);
    CHECK(f.num_input_facts == 100);
    CHECK(f.body_len == 5);
    CHECK(f.num_decomp_rules == 3);
    CHECK(f.avg_decomp_body_len == Rational(3));
    CHECK(f.total_decomp_joins == 9);
    CHECK(f.avg_idb_arity == Rational(4));
    CHECK(f.as_array() == FeatureArray{100, 5, 3, 3.0, 9, 4.0});

    std::vector<FeatureRow> rows{to_row(f)};
    CHECK(features_csv(rows) == "f1,f2,f3,f4,f5,f6\n100,5,3,3.0,9,4.0\n");
}

TEST_CASE("second decomposition gives a fractional average body length") {
    auto p = r1_with_facts(100);
    auto r = *p.rules()[0];
    FreshNames names;
    TreeDecomposition td{{{"X", "Y", "Z", "S", "D"}, {"D", "P", "S", "X"}}, {{0, 1}}, 0};
    auto f = extract_features(r, p, decompose_rule(r, td, names));
    CHECK(f.avg_decomp_body_len == Rational(8, 3));
    CHECK(features_csv(std::vector<FeatureRow>{to_row(f)}) ==
          "f1,f2,f3,f4,f5,f6\n100,5,3,2.6666666666666665,7,4.0\n");
}

TEST_CASE("identity decomposition") {
    auto p = parse_program("e(1,2). e(2,3). q(X,Y) :- e(X,Y), e(Y,X).");
    auto f = features_of(p, 0);
    CHECK(f.num_decomp_rules == 1);
    CHECK(f.body_len == 2);
    CHECK(f.avg_decomp_body_len == Rational(2));
    CHECK(f.total_decomp_joins == count_joins(*p.rules()[0]));
    CHECK(f.avg_idb_arity == Rational(2));
    CHECK(f.num_input_facts == 2);
}

TEST_CASE("average IDB arity over several predicates") {
    auto p = parse_program("e(1,2). a(X) :- e(X,Y). b(X,Y,Z) :- e(X,Y), e(Y,Z). c :- e(1,2).");
    auto f = features_of(p, 0);
    CHECK(f.avg_idb_arity == Rational(4, 3));
}

TEST_CASE("fresh predicates count as IDB only when asked") {
    auto p = r1_with_facts(3);
    CHECK(features_of(p, 0).avg_idb_arity == Rational(4));
    // p/4, fresh_pred_1/3, fresh_pred_2/1
    CHECK(features_of(p, 0, {true}).avg_idb_arity == Rational(8, 3));
}

TEST_CASE("f4 times f3 is the total decomposed body length") {
    std::mt19937_64 rng(21);
    for (int iter = 0; iter < 200; ++iter) {
        auto r = random_rule(rng);
        auto p = with_facts({r}, random_facts(rng, r, 3, 10));
        FreshNames names;
        auto rd = decompose_preferred(r, names);
        auto f = extract_features(r, p, rd);
        std::uint64_t total = 0;
        for (const auto& ri : rd.rules)
            total += ri.body.size();
        CHECK(f.avg_decomp_body_len.value() * static_cast<double>(f.num_decomp_rules) == Catch::Approx(total));
        CHECK(f.num_decomp_rules >= 2);
        CHECK(f.body_len == r.body.size());
    }
}

TEST_CASE("constraint-only program has no IDB") {
    auto p = parse_program("a(1). :- a(X), a(Y), X < Y.");
    CHECK_THROWS_AS(features_of(p, 0), NoIdbError);
}

TEST_CASE("CSV layout") {
    CHECK(features_csv(std::vector<FeatureRow>{}) == "f1,f2,f3,f4,f5,f6\n");
    std::vector<FeatureRow> rows{{{1, 2, 3, 1.5, 4, 2}, Label::Decomp}, {{7, 2, 1, 2, 0, 1}, Label::Indifferent}};
    CHECK(features_csv(rows) == "f1,f2,f3,f4,f5,f6,label\n1,2,3,1.5,4,2.0,decomp\n7,2,1,2.0,0,1.0,indifferent\n");
}

TEST_CASE("labels") {
    for (auto l : kLabels)
        CHECK(parse_label(to_string(l)) == l);
    CHECK(to_string(Label::DoNotDecomp) == "do-not-decomp");
    CHECK_FALSE(parse_label("maybe"));
}

TEST_CASE("dataset CSV round trip") {
    Dataset ds;
    ds.examples.push_back({{100, 5, 3, 3.0, 9, 4.0}, Label::Decomp, 1.0, 0.5});
    ds.examples.push_back({{2, 3, 2, 8.0 / 3.0, 4, 1.5}, Label::DoNotDecomp, {}, {}});
    std::ostringstream os;
    write_dataset_csv(os, ds);
    std::istringstream is(os.str());
    auto back = read_dataset_csv(is);
    REQUIRE(back.size() == 2);
    CHECK(back.examples[0].features == ds.examples[0].features);
    CHECK(back.examples[1].features == ds.examples[1].features);
    CHECK(back.examples[1].label == Label::DoNotDecomp);
    CHECK(back.class_counts() == ClassCounts{1, 1, 0});
    CHECK_FALSE(back.has_every_class());

    std::istringstream bad("f1,f2,f3,f4,f5,f6,label\n1,2,3,x,5,6,decomp\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), DatasetFormatError);
    std::istringstream unlabeled("f1,f2,f3,f4,f5,f6\n1,2,3,4,5,6\n");
    CHECK_THROWS_AS(read_dataset_csv(unlabeled), DatasetFormatError);
    std::istringstream wrong("a,b\n1,2\n");
    CHECK_THROWS_AS(read_features_csv(wrong, false), DatasetFormatError);
}

TEST_CASE("class distribution lines") {
    std::ostringstream os;
    write_class_distribution(os, {329, 3000, 523});
    CHECK(os.str() == "decomp: 329 (8.54%)\ndo-not-decomp: 3000 (77.88%)\nindifferent: 523 (13.58%)\ntotal: 3852\n");
}
