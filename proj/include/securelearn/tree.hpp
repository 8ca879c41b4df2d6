// CART decision trees (Gini impurity) and bagged random forests.
#pragma once

#include "securelearn/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace securelearn {

/// 1 - sum_c p_c^2, equivalently sum_c p_c (1 - p_c).
inline double gini_impurity(std::span<const double> class_counts) {
    double total = 0.0;
    for (double c : class_counts) total += c;
    if (total <= 0.0) return 0.0;
    double sq = 0.0;
    for (double c : class_counts) sq += (c / total) * (c / total);
    return 1.0 - sq;
}

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> proportions;  // class distribution of the training rows reaching the node

    bool is_leaf() const noexcept { return feature < 0; }
};

struct TreeParams {
    int max_depth = 16;
    std::size_t min_samples_split = 2;
    std::size_t max_features = 0;  // 0: consider every feature at each split
};

class DecisionTree {
public:
    DecisionTree() = default;

    /// Grows a tree on the rows `sample` of x (duplicates act as weights).
    void fit(const Matrix& x, const std::vector<Label>& y, int class_count, std::vector<Index> sample,
             const TreeParams& params, Rng& rng) {
        class_count_ = class_count;
        feature_count_ = static_cast<std::size_t>(x.cols());
        nodes_.clear();
        importance_.assign(feature_count_, 0.0);
        total_ = static_cast<double>(sample.size());
        grow(x, y, sample, 0, params, rng);
    }

    int class_count() const noexcept { return class_count_; }
    std::size_t feature_count() const noexcept { return feature_count_; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    /// Leaf class distribution for one row.
    template <typename Row>
    const std::vector<double>& leaf_proportions(const Row& row) const {
        int id = 0;
        while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
            const auto& nd = nodes_[static_cast<std::size_t>(id)];
            id = row(nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        return nodes_[static_cast<std::size_t>(id)].proportions;
    }

    int depth() const {
        std::vector<std::pair<int, int>> stack{{0, 0}};
        int deepest = 0;
        while (!stack.empty()) {
            auto [id, d] = stack.back();
            stack.pop_back();
            deepest = std::max(deepest, d);
            const auto& nd = nodes_[static_cast<std::size_t>(id)];
            if (!nd.is_leaf()) {
                stack.emplace_back(nd.left, d + 1);
                stack.emplace_back(nd.right, d + 1);
            }
        }
        return deepest;
    }

    /// Total weighted impurity decrease per feature (unnormalized).
    const std::vector<double>& raw_importance() const noexcept { return importance_; }

    /// Restores a tree from serialized nodes.
    static DecisionTree from_nodes(std::vector<TreeNode> nodes, int class_count, std::size_t feature_count,
                                   std::vector<double> importance) {
        DecisionTree t;
        t.nodes_ = std::move(nodes);
        t.class_count_ = class_count;
        t.feature_count_ = feature_count;
        t.importance_ = std::move(importance);
        return t;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double child_impurity = 0.0;
    };

    int grow(const Matrix& x, const std::vector<Label>& y, std::vector<Index>& sample, int depth,
             const TreeParams& params, Rng& rng) {
        const auto C = static_cast<std::size_t>(class_count_);
        std::vector<double> counts(C, 0.0);
        for (auto i : sample) counts[static_cast<std::size_t>(y[i])] += 1.0;
        const double n = static_cast<double>(sample.size());

        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_.back().proportions.resize(C);
        for (std::size_t c = 0; c < C; ++c) nodes_.back().proportions[c] = n > 0 ? counts[c] / n : 0.0;

        const double impurity = gini_impurity(counts);
        if (depth >= params.max_depth || sample.size() < params.min_samples_split || impurity <= 0.0) return id;

        const auto split = best_split(x, y, sample, impurity, params, rng);
        if (split.feature < 0) return id;
        const double decrease = impurity - split.child_impurity;
        importance_[static_cast<std::size_t>(split.feature)] += (n / total_) * decrease;

        std::vector<Index> left, right;
        for (auto i : sample)
            (x(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? left : right).push_back(i);
        sample.clear();
        sample.shrink_to_fit();

        nodes_[static_cast<std::size_t>(id)].feature = split.feature;
        nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
        const int l = grow(x, y, left, depth + 1, params, rng);
        nodes_[static_cast<std::size_t>(id)].left = l;
        const int r = grow(x, y, right, depth + 1, params, rng);
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    Split best_split(const Matrix& x, const std::vector<Label>& y, const std::vector<Index>& sample,
                     double parent_impurity, const TreeParams& params, Rng& rng) const {
        const auto C = static_cast<std::size_t>(class_count_);
        const auto d = feature_count_;
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const bool subsample = params.max_features > 0 && params.max_features < d;
        if (subsample) rng.shuffle(order);
        const std::size_t budget = subsample ? params.max_features : d;

        Split best;
        double best_impurity = parent_impurity;
        std::size_t visited = 0;
        std::vector<std::pair<double, Label>> column(sample.size());
        std::vector<double> left(C), right(C);
        const double n = static_cast<double>(sample.size());
        for (auto f : order) {
            if (visited >= budget) break;
            double lo = x(static_cast<Eigen::Index>(sample[0]), static_cast<Eigen::Index>(f)), hi = lo;
            for (std::size_t t = 0; t < sample.size(); ++t) {
                const double v = x(static_cast<Eigen::Index>(sample[t]), static_cast<Eigen::Index>(f));
                column[t] = {v, y[sample[t]]};
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (lo == hi) continue;  // constant here; does not use up the feature budget
            ++visited;
            std::sort(column.begin(), column.end());
            std::fill(left.begin(), left.end(), 0.0);
            std::fill(right.begin(), right.end(), 0.0);
            for (const auto& [v, l] : column) right[static_cast<std::size_t>(l)] += 1.0;
            for (std::size_t t = 0; t + 1 < column.size(); ++t) {
                const auto l = static_cast<std::size_t>(column[t].second);
                left[l] += 1.0;
                right[l] -= 1.0;
                if (column[t].first == column[t + 1].first) continue;
                const double nl = static_cast<double>(t + 1);
                const double weighted = (nl * gini_impurity(left) + (n - nl) * gini_impurity(right)) / n;
                if (weighted < best_impurity - 1e-12) {
                    best_impurity = weighted;
                    double mid = 0.5 * (column[t].first + column[t + 1].first);
                    if (!(mid < column[t + 1].first)) mid = column[t].first;
                    best = {static_cast<int>(f), mid, weighted};
                }
            }
        }
        return best;
    }

    std::vector<TreeNode> nodes_;
    std::vector<double> importance_;
    int class_count_ = 0;
    std::size_t feature_count_ = 0;
    double total_ = 0.0;
};

/// Normalizes to unit sum; an all-zero vector is returned unchanged.
inline std::vector<double> normalized(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (s > 0.0)
        for (double& x : v) x /= s;
    return v;
}

struct ForestParams {
    std::size_t n_trees = 100;
    TreeParams tree{16, 2, 0};  // max_features 0 here means round(sqrt(d))
};

class RandomForest {
public:
    void fit(const Matrix& x, const std::vector<Label>& y, int class_count, const ForestParams& params,
             std::uint64_t seed) {
        const auto n = static_cast<std::size_t>(x.rows());
        const auto d = static_cast<std::size_t>(x.cols());
        TreeParams tp = params.tree;
        if (tp.max_features == 0)
            tp.max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d)))));
        trees_.assign(params.n_trees, DecisionTree{});
        class_count_ = class_count;
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            // Each tree owns a stream derived from (seed, t): results do not
            // depend on the order trees are grown in.
            Rng rng(derive_seed(seed, "tree", t));
            std::vector<Index> boot(n);
            for (auto& b : boot) b = static_cast<Index>(rng.uniform_index(n));
            trees_[t].fit(x, y, class_count, std::move(boot), tp, rng);
        }
    }

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    int class_count() const noexcept { return class_count_; }

    static RandomForest from_trees(std::vector<DecisionTree> trees, int class_count) {
        RandomForest f;
        f.trees_ = std::move(trees);
        f.class_count_ = class_count;
        return f;
    }

private:
    std::vector<DecisionTree> trees_;
    int class_count_ = 0;
};

}  // namespace securelearn
