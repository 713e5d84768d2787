#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "modechoice/csv.hpp"
#include "modechoice/datamodel.hpp"
#include "modechoice/errors.hpp"

namespace modechoice::eval {

using Confusion = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;  // [true][predicted]

inline Confusion confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) {
        throw DataError("confusion_matrix: label vectors differ in length");
    }
    Confusion m{};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
            throw DataError("confusion_matrix: label out of range 0..11");
        }
        m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
    }
    return m;
}

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2PR/(P+R);
/// zero denominators yield 0.
inline ClassScore precision_recall_f1(const Confusion& m, int label) {
    const auto k = static_cast<std::size_t>(label);
    std::int64_t tp = m[k][k], fp = 0, fn = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
        if (j == k) continue;
        fp += m[j][k];
        fn += m[k][j];
    }
    ClassScore s;
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

struct EvalReport {
    Confusion confusion{};
    std::array<double, kNumClasses> sample_ratio{};  // true-instance weights
    std::array<ClassScore, kNumClasses> per_class{};
    double weighted_f1 = 0.0;
    std::size_t n = 0;
};

/// Full report over all 12 labels. exclude_no_click drops pairs whose true
/// label is 0 before scoring.
inline EvalReport evaluate(const std::vector<int>& truth, const std::vector<int>& predicted,
                           bool exclude_no_click = false) {
    std::vector<int> t = truth, p = predicted;
    if (exclude_no_click) {
        if (truth.size() != predicted.size()) throw DataError("evaluate: label vectors differ in length");
        t.clear();
        p.clear();
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != 0) {
                t.push_back(truth[i]);
                p.push_back(predicted[i]);
            }
        }
    }
    if (t.empty()) throw DataError("evaluate: no samples to score");

    EvalReport r;
    r.n = t.size();
    r.confusion = confusion_matrix(t, p);
    for (int c = 0; c < kNumClasses; ++c) {
        const auto k = static_cast<std::size_t>(c);
        std::int64_t support = 0;
        for (std::size_t j = 0; j < kNumClasses; ++j) support += r.confusion[k][j];
        r.sample_ratio[k] = static_cast<double>(support) / static_cast<double>(r.n);
        r.per_class[k] = precision_recall_f1(r.confusion, c);
        r.weighted_f1 += r.sample_ratio[k] * r.per_class[k].f1;
    }
    return r;
}

/// Class-support-weighted mean of per-class F1 scores.
inline double weighted_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
    return evaluate(truth, predicted).weighted_f1;
}

/// Mean recall over a subset of classes (only classes with true instances
/// count toward the mean).
inline double mean_recall(const EvalReport& r, const std::vector<int>& classes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int c : classes) {
        if (r.sample_ratio[static_cast<std::size_t>(c)] > 0) {
            sum += r.per_class[static_cast<std::size_t>(c)].recall;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

/// Per-mode breakdown ordered label 0..11 with semantic names, one line per
/// class, then the weighted F1 footer.
inline void write_report(const EvalReport& r, const std::string& path) {
    CsvWriter out(path);
    out.raw_line("mode_name,sample_ratio,f1,precision,recall");
    for (int c = 0; c < kNumClasses; ++c) {
        const auto k = static_cast<std::size_t>(c);
        out.row({ModeCatalog::name(c), format_double(r.sample_ratio[k]), format_double(r.per_class[k].f1),
                 format_double(r.per_class[k].precision), format_double(r.per_class[k].recall)});
    }
    out.row({"weighted_f1", format_double(r.weighted_f1)});
    out.close();
}

} // namespace modechoice::eval
