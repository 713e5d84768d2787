#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "modechoice/errors.hpp"
#include "modechoice/features.hpp"
#include "modechoice/rng.hpp"

namespace modechoice::resample {

using features::FeatureTable;

struct ResampleConfig {
    enum class Strategy { none, random, smote };
    Strategy strategy = Strategy::smote;
    int k_neighbors = 5;
    // every class is raised to at least target_ratio * majority count
    double target_ratio = 0.3;
    std::uint64_t seed = 0;

    void validate() const {
        if (k_neighbors < 1) throw ConfigError("k_neighbors must be >= 1");
        if (target_ratio <= 0.0 || target_ratio > 1.0) throw ConfigError("target_ratio must be in (0,1]");
    }

    static Strategy parse_strategy(const std::string& s) {
        if (s == "none") return Strategy::none;
        if (s == "random") return Strategy::random;
        if (s == "smote") return Strategy::smote;
        throw ConfigError("unknown resample strategy '" + s + "' (expected none|random|smote)");
    }
};

namespace detail {

inline std::map<int, std::vector<std::size_t>> rows_by_class(const FeatureTable& t) {
    if (t.n_rows == 0) throw DataError("resample: empty feature table");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t r = 0; r < t.n_rows; ++r) by_class[t.labels[r]].push_back(r);
    return by_class;
}

inline std::size_t majority_count(const std::map<int, std::vector<std::size_t>>& by_class) {
    std::size_t mx = 0;
    for (const auto& [label, rows] : by_class) mx = std::max(mx, rows.size());
    return mx;
}

inline void append_row(FeatureTable& t, const double* row, int label, const std::string& id) {
    t.values.insert(t.values.end(), row, row + t.n_cols);
    t.labels.push_back(label);
    t.session_ids.push_back(id);
    t.n_rows += 1;
}

// Squared Euclidean distance over the columns where both rows are present;
// missing entries carry no information about proximity.
inline double shared_sq_distance(const FeatureTable& t, std::size_t a, std::size_t b) {
    const double* ra = t.row(a);
    const double* rb = t.row(b);
    double d = 0.0;
    for (std::size_t c = 0; c < t.n_cols; ++c) {
        if (features::is_missing(ra[c]) || features::is_missing(rb[c])) continue;
        const double diff = ra[c] - rb[c];
        d += diff * diff;
    }
    return d;
}

} // namespace detail

/// Duplicates minority rows uniformly at random until every class reaches
/// ceil(target_ratio * majority). Original rows are untouched; synthetic
/// copies are appended after them.
inline FeatureTable random_oversample(const FeatureTable& table, const ResampleConfig& cfg) {
    cfg.validate();
    FeatureTable out = table;
    const auto by_class = detail::rows_by_class(table);
    const auto target = static_cast<std::size_t>(std::ceil(cfg.target_ratio * static_cast<double>(
                                                               detail::majority_count(by_class))));
    Rng rng(cfg.seed);
    for (const auto& [label, rows] : by_class) {
        if (rows.empty()) throw DataError("random_oversample: class " + format_int(label) + " has no rows");
        for (std::size_t n = rows.size(); n < target; ++n) {
            const std::size_t src = rows[rng.uniform_index(rows.size())];
            detail::append_row(out, table.row(src), label, table.session_ids[src] + "#dup");
        }
    }
    return out;
}

/// SMOTE: each synthetic row interpolates between a seed row and one of its
/// k nearest same-class neighbours, x_new = x_i + u (x_nn - x_i) with
/// u ~ Uniform[0,1). Columns missing in either endpoint are copied from the
/// seed. Classes of size 1 fall back to duplication with a warning.
inline FeatureTable smote_oversample(const FeatureTable& table, const ResampleConfig& cfg) {
    cfg.validate();
    FeatureTable out = table;
    const auto by_class = detail::rows_by_class(table);
    const auto target = static_cast<std::size_t>(std::ceil(cfg.target_ratio * static_cast<double>(
                                                               detail::majority_count(by_class))));
    Rng rng(cfg.seed);
    std::vector<double> synth(table.n_cols);
    for (const auto& [label, rows] : by_class) {
        if (rows.empty()) throw DataError("smote_oversample: class " + format_int(label) + " has no rows");
        if (rows.size() >= target) continue;

        if (rows.size() == 1) {
            std::cerr << "warning: class " << label << " has a single row; SMOTE falls back to duplication\n";
            for (std::size_t n = rows.size(); n < target; ++n) {
                detail::append_row(out, table.row(rows[0]), label, table.session_ids[rows[0]] + "#dup");
            }
            continue;
        }

        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k_neighbors), rows.size() - 1);
        // neighbour lists once per class member; ties resolved by row order
        std::vector<std::vector<std::size_t>> neighbours(rows.size());
        std::vector<std::pair<double, std::size_t>> dist(rows.size() - 1);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            dist.clear();
            for (std::size_t j = 0; j < rows.size(); ++j) {
                if (j == i) continue;
                dist.push_back({detail::shared_sq_distance(table, rows[i], rows[j]), j});
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
            neighbours[i].reserve(k);
            for (std::size_t j = 0; j < k; ++j) neighbours[i].push_back(dist[j].second);
        }

        for (std::size_t n = rows.size(); n < target; ++n) {
            const std::size_t i = rng.uniform_index(rows.size());
            const std::size_t j = neighbours[i][rng.uniform_index(neighbours[i].size())];
            const double u = rng.uniform();
            const double* seed_row = table.row(rows[i]);
            const double* nn_row = table.row(rows[j]);
            for (std::size_t c = 0; c < table.n_cols; ++c) {
                if (features::is_missing(seed_row[c]) || features::is_missing(nn_row[c])) {
                    synth[c] = seed_row[c];
                } else {
                    synth[c] = seed_row[c] + u * (nn_row[c] - seed_row[c]);
                }
            }
            detail::append_row(out, synth.data(), label, table.session_ids[rows[i]] + "#smote");
        }
    }
    return out;
}

/// Strategy dispatch; none returns the input unchanged.
inline FeatureTable apply(const FeatureTable& table, const ResampleConfig& cfg) {
    switch (cfg.strategy) {
        case ResampleConfig::Strategy::none: return table;
        case ResampleConfig::Strategy::random: return random_oversample(table, cfg);
        case ResampleConfig::Strategy::smote: return smote_oversample(table, cfg);
    }
    throw ConfigError("unknown resample strategy");
}

} // namespace modechoice::resample
