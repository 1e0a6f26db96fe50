#pragma once

// Labelled feature rows: the CSV written by `label` and read by `train`,
// `eval` and `predict`.

#include "lpdecomp/error.hpp"
#include "lpdecomp/features.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace lpdecomp {

struct LabeledExample {
    FeatureArray features{};
    Label label = Label::Indifferent;
    /// Oracle cost of each version; empty when it timed out or was not measured.
    std::optional<double> t_never;
    std::optional<double> t_always;
};

using ClassCounts = std::array<std::size_t, kNumClasses>;

struct Dataset {
    std::vector<LabeledExample> examples;

    std::size_t size() const { return examples.size(); }

    ClassCounts class_counts() const {
        ClassCounts c{};
        for (const auto& e : examples)
            ++c[static_cast<std::size_t>(e.label)];
        return c;
    }

    bool has_every_class() const {
        auto c = class_counts();
        return std::all_of(c.begin(), c.end(), [](std::size_t n) { return n > 0; });
    }
};

/// `decomp: 329 (8.54%)`-style lines, one per class in class-index order,
/// followed by the total.
inline void write_class_distribution(std::ostream& os, const ClassCounts& counts) {
    std::size_t total = 0;
    for (auto c : counts)
        total += c;
    for (auto l : kLabels) {
        auto n = counts[static_cast<std::size_t>(l)];
        double pct = total ? 100.0 * static_cast<double>(n) / static_cast<double>(total) : 0.0;
        std::ostringstream p;
        p.setf(std::ios::fixed);
        p.precision(2);
        p << pct;
        os << to_string(l) << ": " << n << " (" << p.str() << "%)\n";
    }
    os << "total: " << total << '\n';
}

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
    std::vector<FeatureRow> rows;
    rows.reserve(ds.size());
    for (const auto& e : ds.examples)
        rows.push_back({e.features, e.label});
    if (rows.empty()) {
        os << kCsvHeader << ",label\n";
        return;
    }
    write_features_csv(os, rows);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

inline double parse_number(const std::string& s, std::size_t line) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw DatasetFormatError("line " + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

} // namespace detail

/// Reads feature rows; when `require_label` the label column must be present.
inline std::vector<FeatureRow> read_features_csv(std::istream& is, bool require_label) {
    std::string line;
    if (!std::getline(is, line))
        throw DatasetFormatError("empty dataset file");
    auto header = detail::split_csv_line(line);
    const std::vector<std::string> names{"f1", "f2", "f3", "f4", "f5", "f6"};
    bool labelled = header.size() == kNumFeatures + 1 && header.back() == "label";
    bool known = header.size() >= kNumFeatures && std::equal(names.begin(), names.end(), header.begin());
    if (!known || (header.size() != kNumFeatures && !labelled))
        throw DatasetFormatError("unexpected header '" + line + "'");
    if (require_label && !labelled)
        throw DatasetFormatError("dataset has no label column");

    std::vector<FeatureRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DatasetFormatError("line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(header.size()) + " columns");
        FeatureRow row;
        for (std::size_t i = 0; i < kNumFeatures; ++i)
            row.values[i] = detail::parse_number(cells[i], lineno);
        if (labelled) {
            row.label = parse_label(cells.back());
            if (!row.label && require_label)
                throw DatasetFormatError("line " + std::to_string(lineno) + ": unknown label '" + cells.back() + "'");
        }
        rows.push_back(row);
    }
    return rows;
}

inline Dataset read_dataset_csv(std::istream& is) {
    Dataset ds;
    for (const auto& row : read_features_csv(is, true))
        ds.examples.push_back({row.values, *row.label, std::nullopt, std::nullopt});
    return ds;
}

} // namespace lpdecomp
