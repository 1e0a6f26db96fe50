#pragma once

#include "lpdecomp/ast.hpp"
#include "lpdecomp/rewriter.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace lpdecomp {

/// Non-negative exact fraction, kept reduced.
class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::uint64_t num, std::uint64_t den = 1) : num_(num), den_(den) {
        if (den_ == 0)
            throw std::domain_error("zero denominator");
        auto g = std::gcd(num_, den_);
        num_ /= g;
        den_ /= g;
    }

    constexpr std::uint64_t num() const { return num_; }
    constexpr std::uint64_t den() const { return den_; }
    constexpr double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend constexpr bool operator==(const Rational&, const Rational&) = default;

private:
    std::uint64_t num_ = 0;
    std::uint64_t den_ = 1;
};

inline constexpr std::size_t kNumFeatures = 6;
using FeatureArray = std::array<double, kNumFeatures>;

struct FeatureVector {
    std::uint64_t num_input_facts = 0;  // f1: |Facts^I(P)|
    std::uint64_t body_len = 0;         // f2: |B(r)|
    std::uint64_t num_decomp_rules = 0; // f3: rules in the decomposition
    Rational avg_decomp_body_len;       // f4: mean body length over the decomposition
    std::uint64_t total_decomp_joins = 0; // f5
    Rational avg_idb_arity;             // f6: mean arity over IDB predicates

    FeatureArray as_array() const {
        return {static_cast<double>(num_input_facts), static_cast<double>(body_len),
                static_cast<double>(num_decomp_rules), avg_decomp_body_len.value(),
                static_cast<double>(total_decomp_joins), avg_idb_arity.value()};
    }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureOptions {
    /// Count the fresh predicates of the decomposition as IDB predicates.
    bool idb_after_rewrite = false;
};

inline FeatureVector extract_features(const Rule& r, const Program& p, const RuleDecomposition& rd,
                                      const FeatureOptions& opts = {}) {
    FeatureVector f;
    f.num_input_facts = p.num_input_facts();
    f.body_len = r.body.size();
    f.num_decomp_rules = rd.rules.size();
    std::uint64_t body_total = 0;
    for (const auto& ri : rd.rules) {
        body_total += ri.body.size();
        f.total_decomp_joins += count_joins(ri);
    }
    f.avg_decomp_body_len = Rational(body_total, std::max<std::uint64_t>(f.num_decomp_rules, 1));

    auto idb = p.idb();
    if (opts.idb_after_rewrite)
        for (const auto& ri : rd.rules)
            for (const auto& h : ri.head)
                if (rd.fresh_predicates.contains(h.predicate))
                    idb.insert(h.signature());
    if (idb.empty())
        throw NoIdbError("program has no IDB predicates; average IDB arity is undefined");
    std::uint64_t arity_total = 0;
    for (const auto& s : idb)
        arity_total += s.arity;
    f.avg_idb_arity = Rational(arity_total, idb.size());
    return f;
}

enum class Label : std::uint8_t { Decomp = 0, DoNotDecomp = 1, Indifferent = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kLabels{Label::Decomp, Label::DoNotDecomp, Label::Indifferent};

inline std::string_view to_string(Label l) {
    switch (l) {
    case Label::Decomp: return "decomp";
    case Label::DoNotDecomp: return "do-not-decomp";
    case Label::Indifferent: return "indifferent";
    }
    return "?";
}

inline std::optional<Label> parse_label(std::string_view s) {
    for (auto l : kLabels)
        if (to_string(l) == s)
            return l;
    return std::nullopt;
}

/// Shortest round-tripping decimal, always with a fractional part or exponent.
inline std::string format_real(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    std::string s(buf.data(), ptr);
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

struct FeatureRow {
    FeatureArray values{};
    std::optional<Label> label;
};

inline FeatureRow to_row(const FeatureVector& f, std::optional<Label> label = std::nullopt) {
    return {f.as_array(), label};
}

inline constexpr std::string_view kCsvHeader = "f1,f2,f3,f4,f5,f6";

/// Counts (f1, f2, f3, f5) print as integers, f4 and f6 as reals.
inline void write_features_csv(std::ostream& os, std::span<const FeatureRow> rows) {
    bool labelled = std::any_of(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.label.has_value(); });
    os << kCsvHeader << (labelled ? ",label" : "") << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            if (i)
                os << ',';
            double v = row.values[i];
            bool count = i != 3 && i != 5 && v >= 0 && v < 1e15 && v == std::floor(v);
            if (count)
                os << static_cast<std::uint64_t>(v);
            else
                os << format_real(v);
        }
        if (labelled)
            os << ',' << (row.label ? to_string(*row.label) : "");
        os << '\n';
    }
}

inline std::string features_csv(std::span<const FeatureRow> rows) {
    std::ostringstream os;
    write_features_csv(os, rows);
    return os.str();
}

} // namespace lpdecomp
