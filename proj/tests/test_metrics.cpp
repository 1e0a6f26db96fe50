#include "lpdecomp/metrics.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace lpdecomp;
using Catch::Approx;

namespace {

const std::vector<std::string> kNames{"decomp", "do-not-decomp", "indifferent"};

} // namespace

TEST_CASE("binary confusion matrix") {
    ConfusionMatrix cm(2, {8, 2, 1, 9});
    auto r = scores_from_confusion(cm);
    CHECK(r.per_class[0].precision == Approx(8.0 / 9.0));
    CHECK(r.per_class[0].recall == Approx(0.8));
    CHECK(r.per_class[0].f1 == Approx(0.8421).margin(1e-4));
    CHECK(r.per_class[0].support == 10);
    CHECK(r.per_class[1].precision == Approx(9.0 / 11.0));
    CHECK(r.per_class[1].recall == Approx(0.9));
    CHECK(r.accuracy == Approx(0.85));
    CHECK(r.macro.f1 == Approx((r.per_class[0].f1 + r.per_class[1].f1) / 2));
}

TEST_CASE("hand-computed three-class matrices") {
    SECTION("diagonal") {
        auto r = scores_from_confusion(ConfusionMatrix(3, {5, 0, 0, 0, 3, 0, 0, 0, 2}));
        for (const auto& s : r.per_class) {
            CHECK(s.precision == 1.0);
            CHECK(s.recall == 1.0);
            CHECK(s.f1 == 1.0);
        }
        CHECK(r.macro.f1 == 1.0);
        CHECK(r.accuracy == 1.0);
    }
    SECTION("everything predicted as class 0") {
        auto r = scores_from_confusion(ConfusionMatrix(3, {6, 0, 0, 3, 0, 0, 1, 0, 0}));
        CHECK(r.per_class[0].precision == Approx(0.6));
        CHECK(r.per_class[0].recall == 1.0);
        CHECK(r.per_class[0].f1 == Approx(0.75));
        CHECK(r.per_class[1].f1 == 0.0);
        CHECK(r.per_class[2].f1 == 0.0);
        CHECK(r.macro.f1 == Approx(0.25));
        CHECK(r.weighted.f1 == Approx(0.45));
        CHECK(r.accuracy == Approx(0.6));
    }
    SECTION("mixed") {
        // rows: truth, cols: predicted
        auto r = scores_from_confusion(ConfusionMatrix(3, {4, 1, 0, 2, 3, 1, 0, 1, 3}));
        CHECK(r.per_class[0].precision == Approx(4.0 / 6.0));
        CHECK(r.per_class[0].recall == Approx(4.0 / 5.0));
        CHECK(r.per_class[1].precision == Approx(3.0 / 5.0));
        CHECK(r.per_class[1].recall == Approx(3.0 / 6.0));
        CHECK(r.per_class[2].precision == Approx(3.0 / 4.0));
        CHECK(r.per_class[2].recall == Approx(3.0 / 4.0));
        CHECK(r.per_class[2].f1 == Approx(0.75));
        CHECK(r.accuracy == Approx(10.0 / 15.0));
        double p0 = 4.0 / 6.0, r0 = 0.8, p1 = 0.6, r1 = 0.5;
        double f0 = 2 * p0 * r0 / (p0 + r0), f1 = 2 * p1 * r1 / (p1 + r1);
        CHECK(r.macro.f1 == Approx((f0 + f1 + 0.75) / 3));
        CHECK(r.weighted.f1 == Approx((5 * f0 + 6 * f1 + 4 * 0.75) / 15));
    }
    SECTION("absent class has zero support and zero scores") {
        auto r = scores_from_confusion(ConfusionMatrix(3, {2, 1, 0, 1, 2, 0, 0, 0, 0}));
        CHECK(r.per_class[2].support == 0);
        CHECK(r.per_class[2].precision == 0.0);
        CHECK(r.per_class[2].recall == 0.0);
        CHECK(r.per_class[0].f1 == Approx(2.0 / 3.0));
    }
    SECTION("empty matrix") {
        auto r = scores_from_confusion(ConfusionMatrix(3));
        CHECK(r.accuracy == 0.0);
        CHECK(r.macro.f1 == 0.0);
    }
}

TEST_CASE("f1 of zero precision and recall") {
    CHECK(f1_score(0, 0) == 0.0);
    CHECK(f1_score(1, 1) == 1.0);
    CHECK(f1_score(0.5, 1) == Approx(2.0 / 3.0));
}

TEST_CASE("roc auc") {
    std::vector<double> perfect{0.1, 0.2, 0.8, 0.9};
    std::vector<std::uint8_t> pos{0, 0, 1, 1};
    CHECK(*roc_auc(perfect, pos) == 1.0);
    std::vector<double> reversed{0.9, 0.8, 0.2, 0.1};
    CHECK(*roc_auc(reversed, pos) == 0.0);
    std::vector<double> constant(4, 0.5);
    CHECK(*roc_auc(constant, pos) == 0.5);
    std::vector<double> partial{0.1, 0.4, 0.35, 0.8};
    CHECK(*roc_auc(partial, pos) == Approx(0.75));
    std::vector<std::uint8_t> all_pos(4, 1);
    CHECK_FALSE(roc_auc(perfect, all_pos));
    CHECK_FALSE(roc_auc(std::span<const double>{}, std::span<const std::uint8_t>{}));
}

TEST_CASE("roc auc equals the pairwise win rate") {
    std::mt19937_64 rng(4);
    for (int iter = 0; iter < 100; ++iter) {
        std::size_t n = 2 + rng() % 30;
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % 5);
            y[i] = rng() % 2;
        }
        double wins = 0, pairs = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (y[i] && !y[j]) {
                    pairs += 1;
                    wins += s[i] > s[j] ? 1 : s[i] == s[j] ? 0.5 : 0;
                }
        auto auc = roc_auc(s, y);
        if (pairs == 0) {
            CHECK_FALSE(auc);
        } else {
            REQUIRE(auc);
            CHECK(*auc == Approx(wins / pairs));
        }
    }
}

TEST_CASE("evaluate_predictions on a perfect classifier") {
    std::vector<std::size_t> truth{0, 1, 2, 0, 1, 2};
    std::vector<double> scores;
    for (auto t : truth)
        for (std::size_t c = 0; c < 3; ++c)
            scores.push_back(c == t ? 0.9 : 0.05);
    auto r = evaluate_predictions(3, truth, truth, scores);
    CHECK(r.macro.f1 == 1.0);
    for (const auto& a : r.auc)
        CHECK(*a == 1.0);
    CHECK(*r.macro_auc == 1.0);
    CHECK(*r.micro_auc == 1.0);

    std::vector<double> flat(truth.size() * 3, 1.0 / 3.0);
    std::vector<std::size_t> zeros(truth.size(), 0);
    auto c = evaluate_predictions(3, truth, zeros, flat);
    CHECK(*c.macro_auc == 0.5);
    CHECK(*c.micro_auc == 0.5);
}

TEST_CASE("missing class leaves its auc undefined") {
    std::vector<std::size_t> truth{0, 1, 0, 1};
    std::vector<double> scores{0.7, 0.2, 0.1, 0.3, 0.6, 0.1, 0.6, 0.3, 0.1, 0.2, 0.7, 0.1};
    auto r = evaluate_predictions(3, truth, truth, scores);
    CHECK_FALSE(r.auc[2]);
    CHECK(*r.macro_auc == 1.0);
}

TEST_CASE("report output") {
    auto r = scores_from_confusion(ConfusionMatrix(3, {4, 1, 0, 2, 3, 1, 0, 1, 3}));
    r.auc.assign(3, std::nullopt);
    std::ostringstream table;
    write_report_table(table, r, kNames);
    auto t = table.str();
    CHECK(t.find("class          precision") == 0);
    CHECK(t.find("indifferent       0.7500     0.7500     0.7500        4  n/a") != std::string::npos);
    CHECK(t.find("accuracy 0.6667") != std::string::npos);
    CHECK(t.find("  do-not-decomp      2      3      1") != std::string::npos);

    std::ostringstream kv;
    write_report_kv(kv, r, kNames);
    auto k = kv.str();
    CHECK(k.find("class.indifferent.f1=0.750000\n") != std::string::npos);
    CHECK(k.find("class.decomp.support=5\n") != std::string::npos);
    CHECK(k.find("accuracy=0.666667\n") != std::string::npos);
    CHECK(k.find("auc.macro=n/a\n") != std::string::npos);
    CHECK(k.find("confusion.decomp=4,1,0\n") != std::string::npos);
}
