#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "modechoice/csv.hpp"
#include "modechoice/errors.hpp"
#include "modechoice/eval.hpp"
#include "modechoice/features.hpp"
#include "modechoice/rng.hpp"

namespace modechoice::gbdt {

using features::FeatureTable;

struct GbdtConfig {
    int num_leaves = 40;
    int max_depth = 8;
    double learning_rate = 0.1;
    double subsample = 0.8;         // row sampling per boosting round
    double feature_fraction = 0.8;  // column sampling per tree
    int min_child_samples = 60;
    double l2_lambda = 1.0;
    int max_bins = 255;
    int max_rounds = 1000;
    int early_stopping_patience = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_leaves < 2) throw ConfigError("num_leaves must be >= 2");
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (learning_rate <= 0.0 || learning_rate > 1.0) throw ConfigError("learning_rate must be in (0,1]");
        if (subsample <= 0.0 || subsample > 1.0) throw ConfigError("subsample must be in (0,1]");
        if (feature_fraction <= 0.0 || feature_fraction > 1.0) throw ConfigError("feature_fraction must be in (0,1]");
        if (min_child_samples < 1) throw ConfigError("min_child_samples must be >= 1");
        if (l2_lambda < 0.0) throw ConfigError("l2_lambda must be >= 0");
        if (max_bins < 1 || max_bins > 255) throw ConfigError("max_bins must be in 1..255");
        if (max_rounds < 0) throw ConfigError("max_rounds must be >= 0");
        if (early_stopping_patience < 1) throw ConfigError("early_stopping_patience must be >= 1");
    }
};

/// Feature values quantized to uint8 bin ids, column-major. Bin 0 is
/// reserved for missing; real bins are 1..n_bins[f]. Binning is monotone:
/// x <= y implies bin(x) <= bin(y).
struct BinnedMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::uint8_t> bins;          // bins[f * n_rows + r]
    std::vector<std::vector<double>> edges;  // per feature, ascending upper thresholds
    std::vector<int> n_bins;                 // real bin count per feature

    std::uint8_t at(std::size_t row, std::size_t feature) const { return bins[feature * n_rows + row]; }
};

/// bin(v) = 1 + number of edges below v; bin b holds (edges[b-2], edges[b-1]].
inline std::uint8_t bin_value(const std::vector<double>& edges, double v) {
    if (features::is_missing(v)) return 0;
    const auto it = std::lower_bound(edges.begin(), edges.end(), v);
    return static_cast<std::uint8_t>(1 + (it - edges.begin()));
}

namespace detail {

inline std::vector<double> quantile_edges(std::vector<double>& finite, int max_bins) {
    std::sort(finite.begin(), finite.end());
    std::vector<double> distinct;
    std::vector<std::size_t> counts;
    for (const double v : finite) {
        if (distinct.empty() || v != distinct.back()) {
            distinct.push_back(v);
            counts.push_back(1);
        } else {
            counts.back() += 1;
        }
    }
    std::vector<double> edges;
    if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
            edges.push_back((distinct[i] + distinct[i + 1]) / 2.0);
        }
        return edges;
    }
    // equal-frequency cuts between distinct values
    const double step = static_cast<double>(finite.size()) / static_cast<double>(max_bins);
    std::size_t cum = 0;
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
        cum += counts[i];
        if (edges.size() + 1 < static_cast<std::size_t>(max_bins) &&
            static_cast<double>(cum) >= step * static_cast<double>(edges.size() + 1)) {
            edges.push_back((distinct[i] + distinct[i + 1]) / 2.0);
        }
    }
    return edges;
}

} // namespace detail

/// Per-feature quantile binning. A constant column gets a single bin and is
/// never splittable.
inline BinnedMatrix bin_features(const FeatureTable& table, int max_bins) {
    if (table.n_rows == 0) throw DataError("bin_features: empty table");
    if (max_bins < 1 || max_bins > 255) throw ConfigError("max_bins must be in 1..255");
    BinnedMatrix m;
    m.n_rows = table.n_rows;
    m.n_cols = table.n_cols;
    m.bins.assign(m.n_rows * m.n_cols, 0);
    m.edges.resize(m.n_cols);
    m.n_bins.assign(m.n_cols, 1);

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(m.n_cols); ++f) {
        const auto fc = static_cast<std::size_t>(f);
        std::vector<double> finite;
        finite.reserve(table.n_rows);
        for (std::size_t r = 0; r < table.n_rows; ++r) {
            const double v = table.at(r, fc);
            if (!features::is_missing(v)) finite.push_back(v);
        }
        if (!finite.empty()) {
            m.edges[fc] = detail::quantile_edges(finite, max_bins);
            m.n_bins[fc] = static_cast<int>(m.edges[fc].size()) + 1;
        }
        for (std::size_t r = 0; r < table.n_rows; ++r) {
            m.bins[fc * m.n_rows + r] = bin_value(m.edges[fc], table.at(r, fc));
        }
    }
    return m;
}

/// Quantizes a table with edges learned elsewhere (validation/test data).
inline BinnedMatrix bin_with_edges(const FeatureTable& table, const std::vector<std::vector<double>>& edges) {
    if (table.n_cols != edges.size()) throw DataError("bin_with_edges: column count mismatch");
    BinnedMatrix m;
    m.n_rows = table.n_rows;
    m.n_cols = table.n_cols;
    m.bins.assign(m.n_rows * m.n_cols, 0);
    m.edges = edges;
    m.n_bins.resize(m.n_cols);
    for (std::size_t f = 0; f < m.n_cols; ++f) {
        m.n_bins[f] = static_cast<int>(edges[f].size()) + 1;
        for (std::size_t r = 0; r < table.n_rows; ++r) {
            m.bins[f * m.n_rows + r] = bin_value(edges[f], table.at(r, f));
        }
    }
    return m;
}

/// Row-major class probabilities from row-major logits, log-sum-exp
/// stabilized.
inline void softmax_rows(const std::vector<double>& logits, std::size_t n_rows, int n_classes,
                         std::vector<double>& probs) {
    probs.resize(logits.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n_rows); ++r) {
        const double* in = logits.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(n_classes);
        double* out = probs.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(n_classes);
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < n_classes; ++c) mx = std::max(mx, in[c]);
        double z = 0.0;
        for (int c = 0; c < n_classes; ++c) {
            out[c] = std::exp(in[c] - mx);
            z += out[c];
        }
        for (int c = 0; c < n_classes; ++c) out[c] /= z;
    }
}

struct Gradients {
    std::vector<double> g;  // row-major n x n_classes, g = p - y
    std::vector<double> h;  // h = p (1 - p)
};

/// Multiclass log-loss gradients: per row sum_c g_c = 0 and h_c in (0, 1/4].
inline Gradients softmax_gradients(const std::vector<double>& logits, const std::vector<int>& labels,
                                   int n_classes = kNumClasses) {
    const std::size_t n = labels.size();
    if (logits.size() != n * static_cast<std::size_t>(n_classes)) {
        throw DataError("softmax_gradients: logits size does not match labels");
    }
    Gradients out;
    std::vector<double> probs;
    softmax_rows(logits, n, n_classes, probs);
    out.g.resize(logits.size());
    out.h.resize(logits.size());
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] < 0 || labels[r] >= n_classes) throw DataError("softmax_gradients: label out of range");
        for (int c = 0; c < n_classes; ++c) {
            const std::size_t i = r * static_cast<std::size_t>(n_classes) + static_cast<std::size_t>(c);
            const double p = probs[i];
            out.g[i] = p - (labels[r] == c ? 1.0 : 0.0);
            out.h[i] = p * (1.0 - p);
        }
    }
    return out;
}

struct TreeNode {
    int feature = -1;  // -1 = leaf
    int threshold_bin = 0;
    bool default_left = true;  // routing for missing values (bin 0)
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, learning rate already applied
    double gain = 0.0;   // split gain for internal nodes

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_binned(const BinnedMatrix& m, std::size_t row) const {
        int id = 0;
        while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<std::size_t>(id)];
            const std::uint8_t b = m.at(row, static_cast<std::size_t>(n.feature));
            const bool left = b == 0 ? n.default_left : b <= n.threshold_bin;
            id = left ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(id)].value;
    }

    /// Routes raw feature values by comparing against the learned bin edges.
    double predict_values(const double* row, const std::vector<std::vector<double>>& edges) const {
        int id = 0;
        while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<std::size_t>(id)];
            const double v = row[n.feature];
            bool left;
            if (features::is_missing(v)) {
                left = n.default_left;
            } else {
                // bin(v) <= t  <=>  v <= edges[t-1]
                left = v <= edges[static_cast<std::size_t>(n.feature)][static_cast<std::size_t>(n.threshold_bin - 1)];
            }
            id = left ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(id)].value;
    }

    int leaf_count() const {
        int n = 0;
        for (const auto& node : nodes) n += node.is_leaf() ? 1 : 0;
        return n;
    }

    int depth() const {
        if (nodes.empty()) return 0;
        int mx = 0;
        std::vector<std::pair<int, int>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [id, d] = stack.back();
            stack.pop_back();
            const TreeNode& n = nodes[static_cast<std::size_t>(id)];
            if (n.is_leaf()) {
                mx = std::max(mx, d);
            } else {
                stack.push_back({n.left, d + 1});
                stack.push_back({n.right, d + 1});
            }
        }
        return mx;
    }
};

namespace detail {

struct SplitInfo {
    double gain = 0.0;
    int feature = -1;
    int bin = 0;
    bool default_left = true;
    double left_g = 0.0, left_h = 0.0;
    std::uint32_t left_count = 0;

    bool valid() const { return feature >= 0 && gain > 0.0; }
};

// deterministic tie-breaking: higher gain, then lower feature, lower bin,
// missing routed left
inline bool better(const SplitInfo& a, const SplitInfo& b) {
    if (a.gain != b.gain) return a.gain > b.gain;
    if (a.feature != b.feature) return a.feature < b.feature;
    if (a.bin != b.bin) return a.bin < b.bin;
    return a.default_left && !b.default_left;
}

inline double leaf_score(double g, double h, double lambda) {
    const double denom = h + lambda;
    return denom > 0.0 ? g * g / denom : 0.0;
}

struct Histogram {
    std::vector<double> g;
    std::vector<double> h;
    std::vector<std::uint32_t> c;

    void resize(std::size_t n) {
        g.assign(n, 0.0);
        h.assign(n, 0.0);
        c.assign(n, 0);
    }
    void subtract_from(const Histogram& parent) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = parent.g[i] - g[i];
            h[i] = parent.h[i] - h[i];
            c[i] = parent.c[i] - c[i];
        }
    }
};

struct LeafState {
    int node = 0;
    std::uint32_t begin = 0, end = 0;  // range in the positions array
    int depth = 0;
    double sum_g = 0.0, sum_h = 0.0;
    Histogram hist;
    SplitInfo best;
    bool open = true;

    std::uint32_t count() const { return end - begin; }
};

class TreeGrower {
public:
    TreeGrower(const double* g, const double* h, const BinnedMatrix& data, const GbdtConfig& cfg,
               const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& feats)
        : g_(g), h_(h), data_(data), cfg_(cfg), positions_(rows), features_(feats) {
        offsets_.resize(features_.size() + 1, 0);
        for (std::size_t j = 0; j < features_.size(); ++j) {
            offsets_[j + 1] = offsets_[j] + static_cast<std::size_t>(data_.n_bins[features_[j]]) + 1;
        }
    }

    DecisionTree grow() {
        DecisionTree tree;
        tree.nodes.push_back(TreeNode{});
        leaves_.clear();

        LeafState root;
        root.node = 0;
        root.begin = 0;
        root.end = static_cast<std::uint32_t>(positions_.size());
        for (const std::uint32_t r : positions_) {
            root.sum_g += g_[r];
            root.sum_h += h_[r];
        }
        build_histogram(root);
        find_best_split(root);
        leaves_.push_back(std::move(root));

        int n_leaves = 1;
        while (n_leaves < cfg_.num_leaves) {
            int pick = -1;
            for (std::size_t i = 0; i < leaves_.size(); ++i) {
                if (!leaves_[i].open || !leaves_[i].best.valid()) continue;
                if (pick < 0 || better(leaves_[i].best, leaves_[static_cast<std::size_t>(pick)].best)) {
                    pick = static_cast<int>(i);
                }
            }
            if (pick < 0) break;
            apply_split(tree, static_cast<std::size_t>(pick));
            ++n_leaves;
        }

        for (const auto& leaf : leaves_) {
            if (!leaf.open) continue;
            TreeNode& n = tree.nodes[static_cast<std::size_t>(leaf.node)];
            const double denom = leaf.sum_h + cfg_.l2_lambda;
            n.value = denom > 0.0 ? -leaf.sum_g / denom * cfg_.learning_rate : 0.0;
        }
        return tree;
    }

private:
    void build_histogram(LeafState& leaf) {
        leaf.hist.resize(offsets_.back());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(features_.size()); ++j) {
            const std::uint32_t f = features_[static_cast<std::size_t>(j)];
            const std::uint8_t* col = data_.bins.data() + static_cast<std::size_t>(f) * data_.n_rows;
            const std::size_t off = offsets_[static_cast<std::size_t>(j)];
            for (std::uint32_t i = leaf.begin; i < leaf.end; ++i) {
                const std::uint32_t r = positions_[i];
                const std::size_t slot = off + col[r];
                leaf.hist.g[slot] += g_[r];
                leaf.hist.h[slot] += h_[r];
                leaf.hist.c[slot] += 1;
            }
        }
    }

    void find_best_split(LeafState& leaf) {
        leaf.best = SplitInfo{};
        if (leaf.depth >= cfg_.max_depth) return;
        if (leaf.count() < 2 * static_cast<std::uint32_t>(cfg_.min_child_samples)) return;
        const double lambda = cfg_.l2_lambda;
        const double parent_score = leaf_score(leaf.sum_g, leaf.sum_h, lambda);

        std::vector<SplitInfo> per_feature(features_.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(features_.size()); ++j) {
            const auto js = static_cast<std::size_t>(j);
            const std::uint32_t f = features_[js];
            const int nb = data_.n_bins[f];
            if (nb < 2) continue;
            const std::size_t off = offsets_[js];
            const double miss_g = leaf.hist.g[off];
            const double miss_h = leaf.hist.h[off];
            const std::uint32_t miss_c = leaf.hist.c[off];

            SplitInfo best;
            double gl = 0.0, hl = 0.0;
            std::uint32_t cl = 0;
            for (int b = 1; b < nb; ++b) {
                gl += leaf.hist.g[off + static_cast<std::size_t>(b)];
                hl += leaf.hist.h[off + static_cast<std::size_t>(b)];
                cl += leaf.hist.c[off + static_cast<std::size_t>(b)];
                // missing routed right, then routed left
                for (const bool miss_left : {false, true}) {
                    const double lg = miss_left ? gl + miss_g : gl;
                    const double lh = miss_left ? hl + miss_h : hl;
                    const std::uint32_t lc = miss_left ? cl + miss_c : cl;
                    const std::uint32_t rc = leaf.count() - lc;
                    if (lc < static_cast<std::uint32_t>(cfg_.min_child_samples) ||
                        rc < static_cast<std::uint32_t>(cfg_.min_child_samples)) {
                        continue;
                    }
                    const double rg = leaf.sum_g - lg;
                    const double rh = leaf.sum_h - lh;
                    SplitInfo cand;
                    cand.gain = leaf_score(lg, lh, lambda) + leaf_score(rg, rh, lambda) - parent_score;
                    cand.feature = static_cast<int>(f);
                    cand.bin = b;
                    cand.default_left = miss_left;
                    cand.left_g = lg;
                    cand.left_h = lh;
                    cand.left_count = lc;
                    if (cand.gain > 0.0 && (!best.valid() || better(cand, best))) best = cand;
                }
            }
            per_feature[js] = best;
        }
        for (const auto& cand : per_feature) {
            if (cand.valid() && (!leaf.best.valid() || better(cand, leaf.best))) leaf.best = cand;
        }
    }

    void apply_split(DecisionTree& tree, std::size_t li) {
        const SplitInfo split = leaves_[li].best;
        const int node_id = leaves_[li].node;
        const int depth = leaves_[li].depth;
        const std::uint32_t begin = leaves_[li].begin;
        const std::uint32_t end = leaves_[li].end;

        const std::uint8_t* col = data_.bins.data() + static_cast<std::size_t>(split.feature) * data_.n_rows;
        const auto mid_it = std::stable_partition(
            positions_.begin() + begin, positions_.begin() + end, [&](std::uint32_t r) {
                const std::uint8_t b = col[r];
                return b == 0 ? split.default_left : b <= split.bin;
            });
        const auto mid = static_cast<std::uint32_t>(mid_it - positions_.begin());
        if (mid - begin != split.left_count) throw NumericError("tree growth: partition/count mismatch");

        const int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        const int right_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        TreeNode& n = tree.nodes[static_cast<std::size_t>(node_id)];
        n.feature = split.feature;
        n.threshold_bin = split.bin;
        n.default_left = split.default_left;
        n.left = left_id;
        n.right = right_id;
        n.gain = split.gain;

        LeafState left;
        left.node = left_id;
        left.begin = begin;
        left.end = mid;
        left.depth = depth + 1;
        left.sum_g = split.left_g;
        left.sum_h = split.left_h;
        LeafState right;
        right.node = right_id;
        right.begin = mid;
        right.end = end;
        right.depth = depth + 1;
        right.sum_g = leaves_[li].sum_g - split.left_g;
        right.sum_h = leaves_[li].sum_h - split.left_h;

        // scan the smaller child, derive the larger by subtraction
        LeafState& small = left.count() <= right.count() ? left : right;
        LeafState& large = left.count() <= right.count() ? right : left;
        build_histogram(small);
        large.hist = std::move(leaves_[li].hist);
        for (std::size_t i = 0; i < large.hist.g.size(); ++i) {
            large.hist.g[i] -= small.hist.g[i];
            large.hist.h[i] -= small.hist.h[i];
            large.hist.c[i] -= small.hist.c[i];
        }
        leaves_[li].open = false;
        leaves_[li].hist = Histogram{};

        find_best_split(left);
        find_best_split(right);
        leaves_.push_back(std::move(left));
        leaves_.push_back(std::move(right));
    }

    const double* g_;
    const double* h_;
    const BinnedMatrix& data_;
    const GbdtConfig& cfg_;
    std::vector<std::uint32_t> positions_;
    std::vector<std::uint32_t> features_;
    std::vector<std::size_t> offsets_;
    std::vector<LeafState> leaves_;
};

} // namespace detail

/// Best-first (leaf-wise) tree over one class's gradients. g/h are indexed
/// by matrix row; rows/features restrict the fit when given.
inline DecisionTree grow_tree(const std::vector<double>& gradients, const std::vector<double>& hessians,
                              const BinnedMatrix& data, const GbdtConfig& cfg,
                              const std::vector<std::uint32_t>* row_subset = nullptr,
                              const std::vector<std::uint32_t>* feature_subset = nullptr) {
    cfg.validate();
    if (gradients.size() != data.n_rows || hessians.size() != data.n_rows) {
        throw DataError("grow_tree: gradient length does not match matrix rows");
    }
    std::vector<std::uint32_t> rows;
    if (row_subset) {
        rows = *row_subset;
    } else {
        rows.resize(data.n_rows);
        for (std::size_t i = 0; i < data.n_rows; ++i) rows[i] = static_cast<std::uint32_t>(i);
    }
    std::vector<std::uint32_t> feats;
    if (feature_subset) {
        feats = *feature_subset;
    } else {
        feats.resize(data.n_cols);
        for (std::size_t i = 0; i < data.n_cols; ++i) feats[i] = static_cast<std::uint32_t>(i);
    }
    detail::TreeGrower grower(gradients.data(), hessians.data(), data, cfg, rows, feats);
    return grower.grow();
}

struct RoundLog {
    double train_logloss = 0.0;
    double valid_weighted_f1 = std::numeric_limits<double>::quiet_NaN();
};

struct BoostedEnsemble {
    GbdtConfig config;
    std::vector<std::string> schema;  // feature column names, training order
    std::uint64_t schema_hash = 0;
    std::array<double, kNumClasses> base_scores{};  // log class priors
    std::vector<std::vector<double>> bin_edges;
    std::vector<DecisionTree> trees;  // round-major, kNumClasses per round
    std::vector<RoundLog> training_log;  // entry r = state after r rounds
    int best_round = 0;

    std::size_t n_rounds() const { return trees.size() / kNumClasses; }
};

inline std::uint64_t schema_hash(const std::vector<std::string>& names) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (const auto& n : names) {
        for (const char c : n) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= static_cast<std::uint8_t>('\n');
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

inline void check_schema(const BoostedEnsemble& ens, const FeatureTable& table, const char* what) {
    if (table.column_names == ens.schema) return;
    if (table.column_names.size() != ens.schema.size()) {
        throw DataError(std::string(what) + ": expected " + format_int(static_cast<std::int64_t>(ens.schema.size())) +
                        " feature columns, got " + format_int(static_cast<std::int64_t>(table.column_names.size())));
    }
    for (std::size_t i = 0; i < ens.schema.size(); ++i) {
        if (table.column_names[i] != ens.schema[i]) {
            throw DataError(std::string(what) + ": column " + format_int(static_cast<std::int64_t>(i)) +
                            " is '" + table.column_names[i] + "', expected '" + ens.schema[i] + "'");
        }
    }
}

inline double train_logloss(const std::vector<double>& logits, const std::vector<int>& labels) {
    std::vector<double> probs;
    softmax_rows(logits, labels.size(), kNumClasses, probs);
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double p = probs[r * kNumClasses + static_cast<std::size_t>(labels[r])];
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / static_cast<double>(labels.size());
}

inline std::vector<int> argmax_labels(const std::vector<double>& logits, std::size_t n_rows) {
    std::vector<int> out(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* row = logits.data() + r * kNumClasses;
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c) {
            if (row[c] > row[best]) best = c;  // ties keep the lowest class
        }
        out[r] = best;
    }
    return out;
}

} // namespace detail

/// Boosts kNumClasses trees per round on the softmax objective. Base scores
/// are the log class priors. With validation data, stops once the weighted
/// F1 has not improved for `early_stopping_patience` rounds and truncates to
/// the best round.
inline BoostedEnsemble train(const FeatureTable& train_table, const FeatureTable& valid_table,
                             const GbdtConfig& cfg) {
    cfg.validate();
    if (train_table.n_rows == 0) throw DataError("gbdt::train: empty training table");
    const bool has_valid = valid_table.n_rows > 0;
    if (has_valid && valid_table.column_names != train_table.column_names) {
        throw DataError("gbdt::train: train and validation tables have different schemas");
    }

    BoostedEnsemble ens;
    ens.config = cfg;
    ens.schema = train_table.column_names;
    ens.schema_hash = schema_hash(ens.schema);

    const std::size_t n = train_table.n_rows;
    std::array<std::size_t, kNumClasses> counts{};
    for (const int y : train_table.labels) {
        if (y < 0 || y >= kNumClasses) throw DataError("gbdt::train: label out of range 0..11");
        counts[static_cast<std::size_t>(y)] += 1;
    }
    int present = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto k = static_cast<std::size_t>(c);
        ens.base_scores[k] = counts[k] > 0
                                 ? std::log(static_cast<double>(counts[k]) / static_cast<double>(n))
                                 : -std::numeric_limits<double>::infinity();
        present += counts[k] > 0 ? 1 : 0;
    }

    BinnedMatrix binned = bin_features(train_table, cfg.max_bins);
    ens.bin_edges = binned.edges;

    std::vector<double> logits(n * kNumClasses);
    for (std::size_t r = 0; r < n; ++r) {
        for (int c = 0; c < kNumClasses; ++c) logits[r * kNumClasses + static_cast<std::size_t>(c)] = ens.base_scores[static_cast<std::size_t>(c)];
    }
    BinnedMatrix valid_binned;
    std::vector<double> valid_logits;
    if (has_valid) {
        valid_binned = bin_with_edges(valid_table, ens.bin_edges);
        valid_logits.resize(valid_table.n_rows * kNumClasses);
        for (std::size_t r = 0; r < valid_table.n_rows; ++r) {
            for (int c = 0; c < kNumClasses; ++c) {
                valid_logits[r * kNumClasses + static_cast<std::size_t>(c)] = ens.base_scores[static_cast<std::size_t>(c)];
            }
        }
    }

    auto log_state = [&]() {
        RoundLog log;
        log.train_logloss = detail::train_logloss(logits, train_table.labels);
        if (has_valid) {
            log.valid_weighted_f1 =
                eval::weighted_f1(valid_table.labels, detail::argmax_labels(valid_logits, valid_table.n_rows));
        }
        ens.training_log.push_back(log);
    };
    log_state();

    if (present <= 1) {
        std::cerr << "warning: training data contains a single class; returning the prior-only model\n";
        return ens;
    }

    Rng rng(cfg.seed);
    const auto n_sampled = static_cast<std::size_t>(std::floor(cfg.subsample * static_cast<double>(n)));
    const auto n_feats =
        static_cast<std::size_t>(std::ceil(cfg.feature_fraction * static_cast<double>(binned.n_cols)));

    double best_metric = -std::numeric_limits<double>::infinity();
    int rounds_since_best = 0;

    std::vector<double> class_g(n), class_h(n);
    for (int round = 0; round < cfg.max_rounds; ++round) {
        Gradients grads = softmax_gradients(logits, train_table.labels, kNumClasses);

        std::vector<std::uint32_t> rows;
        if (cfg.subsample < 1.0) {
            rows = rng.sample_indices(n, std::max<std::size_t>(1, n_sampled));
        } else {
            rows.resize(n);
            for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
        }
        // feature subsets drawn sequentially so the stream is stable
        std::vector<std::vector<std::uint32_t>> feats(kNumClasses);
        for (int c = 0; c < kNumClasses; ++c) {
            feats[static_cast<std::size_t>(c)] =
                cfg.feature_fraction < 1.0 ? rng.sample_indices(binned.n_cols, std::max<std::size_t>(1, n_feats))
                                           : std::vector<std::uint32_t>();
        }

        std::vector<DecisionTree> round_trees(kNumClasses);
        for (int c = 0; c < kNumClasses; ++c) {
            const auto k = static_cast<std::size_t>(c);
            for (std::size_t r = 0; r < n; ++r) {
                class_g[r] = grads.g[r * kNumClasses + k];
                class_h[r] = grads.h[r * kNumClasses + k];
            }
            round_trees[k] = grow_tree(class_g, class_h, binned, cfg, &rows,
                                       feats[k].empty() ? nullptr : &feats[k]);

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(n); ++r) {
                logits[static_cast<std::size_t>(r) * kNumClasses + k] +=
                    round_trees[k].predict_binned(binned, static_cast<std::size_t>(r));
            }
            if (has_valid) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(valid_table.n_rows); ++r) {
                    valid_logits[static_cast<std::size_t>(r) * kNumClasses + k] +=
                        round_trees[k].predict_binned(valid_binned, static_cast<std::size_t>(r));
                }
            }
        }
        for (auto& t : round_trees) ens.trees.push_back(std::move(t));
        log_state();

        if (has_valid) {
            const double metric = ens.training_log.back().valid_weighted_f1;
            if (metric > best_metric + 1e-12) {
                best_metric = metric;
                ens.best_round = round + 1;
                rounds_since_best = 0;
            } else if (++rounds_since_best >= cfg.early_stopping_patience) {
                break;
            }
        } else {
            ens.best_round = round + 1;
        }
    }

    ens.trees.resize(static_cast<std::size_t>(ens.best_round) * kNumClasses);
    return ens;
}

/// n x 12 class probabilities; each row sums to 1.
inline std::vector<double> predict_proba(const BoostedEnsemble& ens, const FeatureTable& table) {
    detail::check_schema(ens, table, "predict");
    std::vector<double> logits(table.n_rows * kNumClasses);
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        for (int c = 0; c < kNumClasses; ++c) {
            logits[r * kNumClasses + static_cast<std::size_t>(c)] = ens.base_scores[static_cast<std::size_t>(c)];
        }
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(table.n_rows); ++r) {
        const double* row = table.row(static_cast<std::size_t>(r));
        for (std::size_t t = 0; t < ens.trees.size(); ++t) {
            const auto c = t % kNumClasses;
            logits[static_cast<std::size_t>(r) * kNumClasses + c] += ens.trees[t].predict_values(row, ens.bin_edges);
        }
    }
    std::vector<double> probs;
    softmax_rows(logits, table.n_rows, kNumClasses, probs);
    return probs;
}

/// Argmax class per row, ties to the lowest class index.
inline std::vector<int> predict_label(const BoostedEnsemble& ens, const FeatureTable& table) {
    const std::vector<double> probs = predict_proba(ens, table);
    std::vector<int> out(table.n_rows);
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        const double* row = probs.data() + r * kNumClasses;
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[r] = best;
    }
    return out;
}

struct ImportanceEntry {
    std::string name;
    std::int64_t split_count = 0;
    double total_gain = 0.0;
};

/// Split counts and total gain per feature over the kept trees, descending
/// by gain (ties by split count, then name).
inline std::vector<ImportanceEntry> feature_importance(const BoostedEnsemble& ens, std::size_t top_k) {
    std::vector<ImportanceEntry> all(ens.schema.size());
    for (std::size_t f = 0; f < ens.schema.size(); ++f) all[f].name = ens.schema[f];
    for (const auto& tree : ens.trees) {
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) continue;
            all[static_cast<std::size_t>(node.feature)].split_count += 1;
            all[static_cast<std::size_t>(node.feature)].total_gain += node.gain;
        }
    }
    std::vector<ImportanceEntry> used;
    for (auto& e : all) {
        if (e.split_count > 0) used.push_back(std::move(e));
    }
    std::sort(used.begin(), used.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        if (a.total_gain != b.total_gain) return a.total_gain > b.total_gain;
        if (a.split_count != b.split_count) return a.split_count > b.split_count;
        return a.name < b.name;
    });
    if (used.size() > top_k) used.resize(top_k);
    return used;
}

// ---------------------------------------------------------------------------
// model file: versioned, self-describing text; numbers in shortest
// round-trip notation so save/load/save is bit-exact
// ---------------------------------------------------------------------------

inline void save_model(const BoostedEnsemble& ens, const std::string& path) {
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    char hash_buf[17];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx", static_cast<unsigned long long>(ens.schema_hash));

    out << "modechoice_gbdt_model 1\n";
    out << "schema_hash " << hash_buf << "\n";
    out << "n_features " << ens.schema.size() << "\n";
    for (std::size_t i = 0; i < ens.schema.size(); ++i) {
        out << "column " << i << " " << ens.schema[i] << "\n";
    }
    const GbdtConfig& c = ens.config;
    out << "config num_leaves=" << c.num_leaves << " max_depth=" << c.max_depth
        << " learning_rate=" << format_double(c.learning_rate) << " subsample=" << format_double(c.subsample)
        << " feature_fraction=" << format_double(c.feature_fraction)
        << " min_child_samples=" << c.min_child_samples << " l2_lambda=" << format_double(c.l2_lambda)
        << " max_bins=" << c.max_bins << " max_rounds=" << c.max_rounds
        << " early_stopping_patience=" << c.early_stopping_patience << " seed=" << c.seed << "\n";
    out << "best_round " << ens.best_round << "\n";
    out << "base_scores";
    for (const double v : ens.base_scores) out << " " << format_double(v);
    out << "\n";
    for (std::size_t f = 0; f < ens.bin_edges.size(); ++f) {
        out << "bins " << f << " " << ens.bin_edges[f].size();
        for (const double e : ens.bin_edges[f]) out << " " << format_double(e);
        out << "\n";
    }
    out << "n_trees " << ens.trees.size() << "\n";
    for (std::size_t t = 0; t < ens.trees.size(); ++t) {
        out << "tree " << t << " " << ens.trees[t].nodes.size() << "\n";
        for (const auto& n : ens.trees[t].nodes) {
            out << "node " << n.feature << " " << n.threshold_bin << " " << (n.default_left ? 1 : 0) << " "
                << n.left << " " << n.right << " " << format_double(n.value) << " " << format_double(n.gain)
                << "\n";
        }
    }
    out << "end\n";
    out.close();
    if (out.fail()) throw DataError("write failed: " + path);
}

namespace detail {

struct LineReader {
    std::ifstream in;
    std::string path;
    std::size_t line_no = 0;

    explicit LineReader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataError("cannot open model file: " + p);
    }

    std::vector<std::string> next(const std::string& expected_tag) {
        std::string line;
        if (!std::getline(in, line)) throw DataError(path + ": unexpected end of file");
        ++line_no;
        auto tokens = split(line, ' ');
        if (tokens.empty() || tokens[0] != expected_tag) {
            throw DataError(path + ":" + format_int(static_cast<std::int64_t>(line_no)) + ": expected '" +
                            expected_tag + "' record");
        }
        return tokens;
    }

    std::string context() const { return path + ":" + format_int(static_cast<std::int64_t>(line_no)); }
};

} // namespace detail

inline BoostedEnsemble load_model(const std::string& path) {
    detail::LineReader r(path);
    BoostedEnsemble ens;
    {
        const auto t = r.next("modechoice_gbdt_model");
        if (t.size() != 2 || t[1] != "1") throw DataError(r.context() + ": unsupported model version");
    }
    {
        const auto t = r.next("schema_hash");
        if (t.size() != 2) throw DataError(r.context() + ": malformed schema_hash");
        ens.schema_hash = std::stoull(t[1], nullptr, 16);
    }
    const auto nf = static_cast<std::size_t>(parse_int(r.next("n_features").at(1), r.context()));
    ens.schema.resize(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        const auto t = r.next("column");
        if (t.size() != 3) throw DataError(r.context() + ": malformed column record");
        ens.schema[static_cast<std::size_t>(parse_int(t[1], r.context()))] = t[2];
    }
    {
        const auto t = r.next("config");
        GbdtConfig& c = ens.config;
        for (std::size_t i = 1; i < t.size(); ++i) {
            const auto kv = split(t[i], '=');
            if (kv.size() != 2) throw DataError(r.context() + ": malformed config entry '" + t[i] + "'");
            const std::string& k = kv[0];
            const std::string& v = kv[1];
            if (k == "num_leaves") c.num_leaves = static_cast<int>(parse_int(v, r.context()));
            else if (k == "max_depth") c.max_depth = static_cast<int>(parse_int(v, r.context()));
            else if (k == "learning_rate") c.learning_rate = parse_double(v, r.context());
            else if (k == "subsample") c.subsample = parse_double(v, r.context());
            else if (k == "feature_fraction") c.feature_fraction = parse_double(v, r.context());
            else if (k == "min_child_samples") c.min_child_samples = static_cast<int>(parse_int(v, r.context()));
            else if (k == "l2_lambda") c.l2_lambda = parse_double(v, r.context());
            else if (k == "max_bins") c.max_bins = static_cast<int>(parse_int(v, r.context()));
            else if (k == "max_rounds") c.max_rounds = static_cast<int>(parse_int(v, r.context()));
            else if (k == "early_stopping_patience") c.early_stopping_patience = static_cast<int>(parse_int(v, r.context()));
            else if (k == "seed") c.seed = std::stoull(v);
            else throw DataError(r.context() + ": unknown config key '" + k + "'");
        }
    }
    ens.best_round = static_cast<int>(parse_int(r.next("best_round").at(1), r.context()));
    {
        const auto t = r.next("base_scores");
        if (t.size() != 1 + kNumClasses) throw DataError(r.context() + ": expected 12 base scores");
        for (int c = 0; c < kNumClasses; ++c) {
            ens.base_scores[static_cast<std::size_t>(c)] = parse_double(t[static_cast<std::size_t>(c) + 1], r.context());
        }
    }
    ens.bin_edges.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto t = r.next("bins");
        const auto idx = static_cast<std::size_t>(parse_int(t.at(1), r.context()));
        const auto ne = static_cast<std::size_t>(parse_int(t.at(2), r.context()));
        if (t.size() != 3 + ne) throw DataError(r.context() + ": malformed bins record");
        ens.bin_edges[idx].resize(ne);
        for (std::size_t e = 0; e < ne; ++e) ens.bin_edges[idx][e] = parse_double(t[3 + e], r.context());
    }
    const auto nt = static_cast<std::size_t>(parse_int(r.next("n_trees").at(1), r.context()));
    ens.trees.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto th = r.next("tree");
        const auto ti = static_cast<std::size_t>(parse_int(th.at(1), r.context()));
        const auto nn = static_cast<std::size_t>(parse_int(th.at(2), r.context()));
        ens.trees[ti].nodes.resize(nn);
        for (std::size_t n = 0; n < nn; ++n) {
            const auto tok = r.next("node");
            if (tok.size() != 8) throw DataError(r.context() + ": malformed node record");
            TreeNode& node = ens.trees[ti].nodes[n];
            node.feature = static_cast<int>(parse_int(tok[1], r.context()));
            node.threshold_bin = static_cast<int>(parse_int(tok[2], r.context()));
            node.default_left = parse_int(tok[3], r.context()) != 0;
            node.left = static_cast<int>(parse_int(tok[4], r.context()));
            node.right = static_cast<int>(parse_int(tok[5], r.context()));
            node.value = parse_double(tok[6], r.context());
            node.gain = parse_double(tok[7], r.context());
        }
    }
    r.next("end");
    return ens;
}

} // namespace modechoice::gbdt
