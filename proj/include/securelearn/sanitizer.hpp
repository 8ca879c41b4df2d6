// First defense layer: k-NN confidence relabeling followed by z-score
// anomaly removal.
#pragma once

#include "securelearn/common.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/zscore.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace securelearn {

enum class DistanceMetric { Euclidean, Manhattan };

/// How a row's deviation is scored against the limit g.
///  - FeatureMax: max over features of the per-feature |z| (the default).
///  - RowNorm: |z| of the row's distance from the feature means, taken across
///    rows. Sparse high-dimensional inputs (image pixels) put most rows above
///    g under FeatureMax.
enum class ZScoreMode { FeatureMax, RowNorm };

inline std::string to_string(DistanceMetric m) { return m == DistanceMetric::Euclidean ? "euclidean" : "manhattan"; }
inline std::string to_string(ZScoreMode m) { return m == ZScoreMode::FeatureMax ? "feature_max" : "row_norm"; }

inline DistanceMetric parse_distance_metric(std::string_view s) {
    if (s == "euclidean") return DistanceMetric::Euclidean;
    if (s == "manhattan") return DistanceMetric::Manhattan;
    throw InvalidArgument("unknown distance metric '" + std::string(s) + "'");
}

inline ZScoreMode parse_zscore_mode(std::string_view s) {
    if (s == "feature_max" || s == "feature-max") return ZScoreMode::FeatureMax;
    if (s == "row_norm" || s == "row-norm") return ZScoreMode::RowNorm;
    throw InvalidArgument("unknown z-score mode '" + std::string(s) + "'");
}

struct SanitizerConfig {
    std::size_t k = 7;
    double gamma = 0.40;
    double g = 3.0;
    DistanceMetric distance = DistanceMetric::Euclidean;
    ZScoreMode zscore = ZScoreMode::FeatureMax;

    void validate() const {
        if (k < 1) throw InvalidArgument("sanitizer: k must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("sanitizer: gamma must lie in (0, 1]");
        if (!(g > 0.0)) throw InvalidArgument("sanitizer: g must be positive");
    }
    bool operator==(const SanitizerConfig&) const = default;
};

struct Relabel {
    Index row;
    Label old_label;
    Label new_label;
    double confidence;
    bool operator==(const Relabel&) const = default;
};

struct Removal {
    Index row;
    double score;
    bool operator==(const Removal&) const = default;
};

struct Vote {
    Label label;
    double confidence;
};

/// Sanitized data plus audit logs. Row indices in the logs refer to the
/// input dataset; kept_rows maps each sanitized row back to its input row.
struct SanitizationOutcome {
    Dataset sanitized;
    std::vector<Relabel> relabeled;
    std::vector<Removal> removed;
    std::vector<Index> kept_rows;
    SanitizerConfig config;
};

// ---------------------------------------------------------------------------

namespace detail {

inline double row_distance(const Matrix& x, Eigen::Index a, Eigen::Index b, DistanceMetric metric) {
    double s = 0.0;
    if (metric == DistanceMetric::Euclidean) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double d = x(a, j) - x(b, j);
            s += d * d;
        }
        return s;  // squared; monotone in the Euclidean distance
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) s += std::abs(x(a, j) - x(b, j));
    return s;
}

/// k nearest rows to `i` (self excluded), by distance then row index.
inline std::vector<Index> nearest_rows(const Matrix& x, Index i, std::size_t k, DistanceMetric metric,
                                       const std::vector<double>* precomputed = nullptr) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(n - 1);
    for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = precomputed ? (*precomputed)[j]
                                     : row_distance(x, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), metric);
        cand.emplace_back(d, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    std::vector<Index> out(k);
    for (std::size_t t = 0; t < k; ++t) out[t] = cand[t].second;
    return out;
}

inline Vote vote(const std::vector<Index>& neighbours, const std::vector<Label>& labels, int class_count) {
    std::vector<std::size_t> votes(static_cast<std::size_t>(class_count), 0);
    for (auto j : neighbours) ++votes[static_cast<std::size_t>(labels[j])];
    const auto best = argmax_first(votes);
    return {static_cast<Label>(best), static_cast<double>(votes[best]) / static_cast<double>(neighbours.size())};
}

inline void check_knn_preconditions(const Dataset& ds, const SanitizerConfig& cfg) {
    cfg.validate();
    if (ds.rows() <= cfg.k)
        throw InvalidArgument("sanitizer: need more rows (" + std::to_string(ds.rows()) + ") than k (" +
                              std::to_string(cfg.k) + ")");
}

}  // namespace detail

/// Majority label among the k nearest neighbours of row i (current labels,
/// self excluded) and its vote fraction. Distance ties go to the smaller row
/// index, vote ties to the smaller class id.
inline Vote knn_confidence(Index i, const Dataset& ds, const SanitizerConfig& cfg) {
    detail::check_knn_preconditions(ds, cfg);
    if (i >= ds.rows()) throw InvalidArgument("knn_confidence: row out of range");
    auto nb = detail::nearest_rows(ds.features, i, cfg.k, cfg.distance);
    return detail::vote(nb, ds.labels, ds.class_count);
}

/// Votes for every row against the same label snapshot.
inline std::vector<Vote> knn_confidence_all(const Dataset& ds, const SanitizerConfig& cfg) {
    detail::check_knn_preconditions(ds, cfg);
    const auto n = ds.rows();
    std::vector<Vote> out(n);
    // A full distance table halves the work (symmetry) while it fits in memory.
    constexpr std::size_t kTableLimit = 6000;
    if (n <= kTableLimit) {
        std::vector<double> table(n * n, 0.0);
        for (Index a = 0; a < n; ++a)
            for (Index b = a + 1; b < n; ++b)
                table[a * n + b] = table[b * n + a] = detail::row_distance(
                    ds.features, static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b), cfg.distance);
        std::vector<double> row(n);
        for (Index a = 0; a < n; ++a) {
            std::copy(table.begin() + static_cast<std::ptrdiff_t>(a * n),
                      table.begin() + static_cast<std::ptrdiff_t>((a + 1) * n), row.begin());
            out[a] = detail::vote(detail::nearest_rows(ds.features, a, cfg.k, cfg.distance, &row), ds.labels,
                                  ds.class_count);
        }
    } else {
        for (Index a = 0; a < n; ++a)
            out[a] = detail::vote(detail::nearest_rows(ds.features, a, cfg.k, cfg.distance), ds.labels, ds.class_count);
    }
    return out;
}

/// Snapshot relabeling: every vote is taken against the input labels, then
/// all rows with confidence >= gamma adopt the majority label at once.
inline std::pair<Dataset, std::vector<Relabel>> relabel(const Dataset& ds, const SanitizerConfig& cfg) {
    const auto votes = knn_confidence_all(ds, cfg);
    Dataset out = ds;
    std::vector<Relabel> log;
    for (Index i = 0; i < ds.rows(); ++i) {
        if (votes[i].confidence >= cfg.gamma && votes[i].label != ds.labels[i]) {
            out.labels[i] = votes[i].label;
            log.push_back({i, ds.labels[i], votes[i].label, votes[i].confidence});
        }
    }
    return {std::move(out), std::move(log)};
}

/// Per-row, per-feature z-scores (population sigma; constant columns give 0).
inline Matrix zscore_stats(const Dataset& ds) {
    if (ds.rows() < 2) throw InvalidArgument("zscore_stats: need at least 2 rows");
    return zscore_matrix(ds.features);
}

/// Deviation score of every row under the configured mode.
inline std::vector<double> outlier_scores(const Dataset& ds, ZScoreMode mode) {
    if (mode == ZScoreMode::FeatureMax) return max_abs_zscore(ds.features);
    auto z = row_norm_zscore(ds.features);
    for (double& v : z) v = std::abs(v);
    return z;
}

struct RemovalResult {
    Dataset kept;
    std::vector<Removal> removed;
    std::vector<Index> kept_rows;
};

/// Single-pass filter: a row is dropped iff its score exceeds g, with the
/// statistics computed once on the input.
inline RemovalResult remove_outliers(const Dataset& ds, const SanitizerConfig& cfg) {
    cfg.validate();
    if (ds.rows() < 2) throw InvalidArgument("remove_outliers: need at least 2 rows");
    const auto scores = outlier_scores(ds, cfg.zscore);
    RemovalResult out;
    for (Index i = 0; i < ds.rows(); ++i) {
        if (scores[i] > cfg.g)
            out.removed.push_back({i, scores[i]});
        else
            out.kept_rows.push_back(i);
    }
    if (out.kept_rows.empty()) throw Error("degenerate dataset after sanitization");
    out.kept = select_rows(ds, out.kept_rows);
    return out;
}

/// Relabel, then remove outliers from the relabeled set.
inline SanitizationOutcome sanitize(const Dataset& ds, const SanitizerConfig& cfg) {
    auto [relabeled, relabel_log] = relabel(ds, cfg);
    auto removal = remove_outliers(relabeled, cfg);
    return {std::move(removal.kept), std::move(relabel_log), std::move(removal.removed),
            std::move(removal.kept_rows), cfg};
}

}  // namespace securelearn
