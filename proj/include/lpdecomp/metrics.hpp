#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpdecomp {

/// Square confusion matrix; rows are true classes, columns predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 0) : n_(classes), counts_(classes * classes, 0) {}

    ConfusionMatrix(std::size_t classes, std::initializer_list<std::uint64_t> row_major)
        : n_(classes), counts_(row_major) {
        if (counts_.size() != n_ * n_)
            throw std::invalid_argument("confusion matrix needs classes^2 entries");
    }

    std::size_t classes() const { return n_; }
    std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * n_ + predicted]; }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }

    std::uint64_t row_sum(std::size_t truth) const {
        std::uint64_t s = 0;
        for (std::size_t j = 0; j < n_; ++j)
            s += at(truth, j);
        return s;
    }
    std::uint64_t column_sum(std::size_t predicted) const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < n_; ++i)
            s += at(i, predicted);
        return s;
    }
    std::uint64_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

struct ClassScores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::uint64_t support = 0;
};

struct AveragedScores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct EvalReport {
    ConfusionMatrix confusion;
    std::vector<ClassScores> per_class;
    AveragedScores macro;
    AveragedScores weighted;
    double accuracy = 0;
    /// One-vs-rest AUC; empty when a class has no positives or no negatives.
    std::vector<std::optional<double>> auc;
    std::optional<double> macro_auc;
    std::optional<double> micro_auc;
};

/// F1 = 2PR / (P + R), zero when both are zero.
inline double f1_score(double precision, double recall) {
    return precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
}

/// Precision, recall and F1 per class plus their macro and support-weighted means.
inline EvalReport scores_from_confusion(const ConfusionMatrix& cm) {
    EvalReport r;
    r.confusion = cm;
    const std::size_t n = cm.classes();
    const auto total = cm.total();
    std::uint64_t correct = 0;
    for (std::size_t c = 0; c < n; ++c) {
        ClassScores s;
        auto tp = cm.at(c, c);
        auto predicted = cm.column_sum(c);
        s.support = cm.row_sum(c);
        s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        s.recall = s.support ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
        s.f1 = f1_score(s.precision, s.recall);
        correct += tp;
        r.per_class.push_back(s);
    }
    for (const auto& s : r.per_class) {
        r.macro.precision += s.precision / static_cast<double>(n);
        r.macro.recall += s.recall / static_cast<double>(n);
        r.macro.f1 += s.f1 / static_cast<double>(n);
        if (total) {
            double w = static_cast<double>(s.support) / static_cast<double>(total);
            r.weighted.precision += w * s.precision;
            r.weighted.recall += w * s.recall;
            r.weighted.f1 += w * s.f1;
        }
    }
    r.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return r;
}

/// Area under the ROC curve via the Mann-Whitney rank statistic, ties
/// receiving their average rank.
/// `positive[i]` is nonzero for positive examples.
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0;
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]])
            ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (positive[order[k]]) {
                rank_sum += avg_rank;
                ++pos;
            }
        i = j;
    }
    const std::uint64_t neg = n - pos;
    if (pos == 0 || neg == 0)
        return std::nullopt;
    double p = static_cast<double>(pos), q = static_cast<double>(neg);
    return (rank_sum - p * (p + 1) / 2.0) / (p * q);
}

/// Full report from true classes, predicted classes and per-class scores
/// (`scores[i * classes + c]`).
inline EvalReport evaluate_predictions(std::size_t classes, std::span<const std::size_t> truth,
                                       std::span<const std::size_t> predicted, std::span<const double> scores) {
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++cm.at(truth[i], predicted[i]);
    auto r = scores_from_confusion(cm);

    const std::size_t n = truth.size();
    std::vector<double> column(n);
    std::vector<std::uint8_t> is_pos(n);
    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_pos;
    double sum = 0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = scores[i * classes + c];
            is_pos[i] = truth[i] == c;
        }
        pooled_scores.insert(pooled_scores.end(), column.begin(), column.end());
        pooled_pos.insert(pooled_pos.end(), is_pos.begin(), is_pos.end());
        auto auc = roc_auc(column, is_pos);
        r.auc.push_back(auc);
        if (auc) {
            sum += *auc;
            ++defined;
        }
    }
    if (defined)
        r.macro_auc = sum / static_cast<double>(defined);
    r.micro_auc = roc_auc(pooled_scores, pooled_pos);
    return r;
}

namespace detail {
inline std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}
inline std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : "n/a"; }
} // namespace detail

/// Aligned human-readable report.
inline void write_report_table(std::ostream& os, const EvalReport& r, std::span<const std::string> names) {
    std::size_t width = 9;
    for (const auto& n : names)
        width = std::max(width, n.size());
    auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
    os << pad("class") << "  precision  recall     f1-score   support  auc\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& s = r.per_class[c];
        os << pad(names[c]) << "  " << std::setw(9) << detail::fixed(s.precision) << "  " << std::setw(9)
           << detail::fixed(s.recall) << "  " << std::setw(9) << detail::fixed(s.f1) << "  " << std::setw(7)
           << s.support << "  " << detail::fixed(r.auc[c]) << '\n';
    }
    os << pad("macro") << "  " << std::setw(9) << detail::fixed(r.macro.precision) << "  " << std::setw(9)
       << detail::fixed(r.macro.recall) << "  " << std::setw(9) << detail::fixed(r.macro.f1) << "  "
       << std::setw(7) << r.confusion.total() << "  " << detail::fixed(r.macro_auc) << '\n';
    os << pad("weighted") << "  " << std::setw(9) << detail::fixed(r.weighted.precision) << "  " << std::setw(9)
       << detail::fixed(r.weighted.recall) << "  " << std::setw(9) << detail::fixed(r.weighted.f1) << "  "
       << std::setw(7) << r.confusion.total() << "  " << detail::fixed(r.micro_auc) << " (micro)\n";
    os << "accuracy " << detail::fixed(r.accuracy) << '\n';
    os << "confusion (rows = true):\n";
    for (std::size_t i = 0; i < r.confusion.classes(); ++i) {
        os << "  " << pad(names[i]);
        for (std::size_t j = 0; j < r.confusion.classes(); ++j)
            os << ' ' << std::setw(6) << r.confusion.at(i, j);
        os << '\n';
    }
}

/// Machine-readable `key=value` lines.
inline void write_report_kv(std::ostream& os, const EvalReport& r, std::span<const std::string> names) {
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& s = r.per_class[c];
        os << "class." << names[c] << ".precision=" << detail::fixed(s.precision, 6) << '\n';
        os << "class." << names[c] << ".recall=" << detail::fixed(s.recall, 6) << '\n';
        os << "class." << names[c] << ".f1=" << detail::fixed(s.f1, 6) << '\n';
        os << "class." << names[c] << ".support=" << s.support << '\n';
        os << "class." << names[c] << ".auc=" << (r.auc[c] ? detail::fixed(*r.auc[c], 6) : "n/a") << '\n';
    }
    os << "macro.precision=" << detail::fixed(r.macro.precision, 6) << '\n';
    os << "macro.recall=" << detail::fixed(r.macro.recall, 6) << '\n';
    os << "macro.f1=" << detail::fixed(r.macro.f1, 6) << '\n';
    os << "weighted.precision=" << detail::fixed(r.weighted.precision, 6) << '\n';
    os << "weighted.recall=" << detail::fixed(r.weighted.recall, 6) << '\n';
    os << "weighted.f1=" << detail::fixed(r.weighted.f1, 6) << '\n';
    os << "accuracy=" << detail::fixed(r.accuracy, 6) << '\n';
    os << "auc.macro=" << (r.macro_auc ? detail::fixed(*r.macro_auc, 6) : "n/a") << '\n';
    os << "auc.micro=" << (r.micro_auc ? detail::fixed(*r.micro_auc, 6) : "n/a") << '\n';
    for (std::size_t i = 0; i < r.confusion.classes(); ++i) {
        os << "confusion." << names[i] << '=';
        for (std::size_t j = 0; j < r.confusion.classes(); ++j)
            os << (j ? "," : "") << r.confusion.at(i, j);
        os << '\n';
    }
}

} // namespace lpdecomp
