// Training-set poisoning: random label flips, subpopulation flips, and
// outlier-oriented flips. Each attack returns the poisoned set together with
// a PoisonRecord that is a complete diff against the clean input.
#pragma once

#include "securelearn/common.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/kmeans.hpp"
#include "securelearn/zscore.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace securelearn {

enum class AttackKind { None, RLPA, SubP, OOP };

inline std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "none";
        case AttackKind::RLPA: return "rlpa";
        case AttackKind::SubP: return "subp";
        case AttackKind::OOP: return "oop";
    }
    return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
    if (s == "none" || s == "clean") return AttackKind::None;
    if (s == "rlpa" || s == "rlp" || s == "RLPA") return AttackKind::RLPA;
    if (s == "subp" || s == "SubP") return AttackKind::SubP;
    if (s == "oop" || s == "OOP") return AttackKind::OOP;
    throw InvalidArgument("unknown attack '" + std::string(s) + "'");
}

struct LabelFlip {
    Index row;
    Label original;
    Label poisoned;
    bool operator==(const LabelFlip&) const = default;
};

/// A row appended by the attack: a copy of `source` carrying `label`.
struct Injection {
    Index row;
    Index source;
    Label label;
    bool operator==(const Injection&) const = default;
};

struct PoisonRecord {
    AttackKind attack_kind = AttackKind::None;
    double delta_l = 0.0;
    std::uint64_t seed = 0;
    std::vector<LabelFlip> flipped;
    std::vector<Injection> injected;
    std::string note;

    std::size_t poisoned_count() const noexcept { return flipped.size() + injected.size(); }
    bool operator==(const PoisonRecord&) const = default;
};

struct PoisonResult {
    Dataset poisoned;
    PoisonRecord record;
};

/// Attack budget m = round_half_up(delta_l * n).
inline std::size_t poison_budget(double delta_l, std::size_t n) {
    if (!(delta_l > 0.0 && delta_l < 1.0)) throw InvalidArgument("delta_l must lie in (0, 1)");
    const auto m = round_half_up(delta_l, n);
    if (m == 0) throw InvalidArgument("budget too small for dataset");
    return m;
}

/// Re-creates the poisoned set from the clean set and its record.
inline Dataset apply_record(const Dataset& clean, const PoisonRecord& record) {
    Dataset out = clean;
    for (const auto& f : record.flipped) {
        if (f.row >= clean.rows() || clean.labels[f.row] != f.original)
            throw InvalidArgument("apply_record: record does not match the clean dataset");
        out.labels[f.row] = f.poisoned;
    }
    if (!record.injected.empty()) {
        const auto base = static_cast<Eigen::Index>(clean.rows());
        out.features.conservativeResize(base + static_cast<Eigen::Index>(record.injected.size()), Eigen::NoChange);
        for (std::size_t k = 0; k < record.injected.size(); ++k) {
            const auto& inj = record.injected[k];
            if (inj.row != clean.rows() + k || inj.source >= clean.rows())
                throw InvalidArgument("apply_record: injected rows must follow the clean rows in order");
            out.features.row(base + static_cast<Eigen::Index>(k)) = clean.features.row(static_cast<Eigen::Index>(inj.source));
            out.labels.push_back(inj.label);
        }
    }
    out.validate();
    return out;
}

/// Restores the clean set from a poisoned set and its record.
inline Dataset invert_record(const Dataset& poisoned, const PoisonRecord& record) {
    if (record.injected.size() > poisoned.rows())
        throw InvalidArgument("invert_record: record has more injections than the dataset has rows");
    const auto n = poisoned.rows() - record.injected.size();
    Dataset out = poisoned;
    out.features.conservativeResize(static_cast<Eigen::Index>(n), Eigen::NoChange);
    out.labels.resize(n);
    for (const auto& f : record.flipped) {
        if (f.row >= n || poisoned.labels[f.row] != f.poisoned)
            throw InvalidArgument("invert_record: record does not match the poisoned dataset");
        out.labels[f.row] = f.original;
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Random label poisoning: m distinct rows get a label drawn uniformly from
/// the other C - 1 classes.
inline PoisonResult poison_random_labels(const Dataset& train, double delta_l, std::uint64_t seed) {
    if (train.class_count < 2) throw InvalidArgument("poison_random_labels: need at least 2 classes");
    const auto m = poison_budget(delta_l, train.rows());
    Rng rng(seed);
    PoisonResult out{train, {AttackKind::RLPA, delta_l, seed, {}, {}, {}}};
    auto rows = rng.sample_without_replacement(train.rows(), m);
    std::sort(rows.begin(), rows.end());
    for (auto r : rows) {
        const Label old = train.labels[r];
        auto draw = static_cast<Label>(rng.uniform_index(static_cast<std::uint64_t>(train.class_count - 1)));
        const Label now = draw < old ? draw : draw + 1;
        out.poisoned.labels[r] = now;
        out.record.flipped.push_back({r, old, now});
    }
    return out;
}

namespace detail {

inline Label majority_label(const std::vector<Label>& labels, int class_count) {
    std::vector<std::size_t> votes(static_cast<std::size_t>(class_count), 0);
    for (Label l : labels) ++votes[static_cast<std::size_t>(l)];
    return static_cast<Label>(argmax_first(votes));
}

}  // namespace detail

/// Subpopulation poisoning. k-means splits the training features; the cluster
/// whose size is closest to the budget m from below is selected and its
/// members are relabeled to the majority label of the nearest other cluster
/// with a different majority. If flips fall short of m, duplicates of flipped
/// members carrying the target label are appended until m is spent.
inline PoisonResult poison_subpopulation(const Dataset& train, double delta_l, std::uint64_t seed,
                                         std::optional<std::size_t> k_clusters = std::nullopt) {
    const auto m = poison_budget(delta_l, train.rows());
    const auto k = k_clusters.value_or(static_cast<std::size_t>(train.class_count));
    if (train.rows() < k) throw InvalidArgument("poison_subpopulation: fewer rows than clusters");
    const auto km = kmeans(train.features, k, derive_seed(seed, "kmeans"), 50);

    std::vector<std::vector<Index>> members(k);
    for (Index i = 0; i < train.rows(); ++i) members[km.assignment[i]].push_back(i);

    PoisonResult out{train, {AttackKind::SubP, delta_l, seed, {}, {}, {}}};
    std::optional<std::size_t> chosen;
    for (std::size_t c = 0; c < k; ++c) {
        const auto size = members[c].size();
        if (size == 0 || size > m) continue;
        if (!chosen || size > members[*chosen].size()) chosen = c;
    }
    if (!chosen) {
        std::size_t largest = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (members[c].size() > members[largest].size()) largest = c;
        chosen = largest;
        out.record.note = "degenerate clustering: no non-empty cluster within budget, fell back to the largest cluster";
    }
    const auto sel = *chosen;

    auto cluster_majority = [&](std::size_t c) {
        std::vector<Label> ls;
        for (auto i : members[c]) ls.push_back(train.labels[i]);
        return detail::majority_label(ls, train.class_count);
    };
    const Label own_majority = cluster_majority(sel);
    std::vector<std::pair<double, std::size_t>> others;
    for (std::size_t c = 0; c < k; ++c) {
        if (c == sel || members[c].empty()) continue;
        others.emplace_back((km.centers.row(static_cast<Eigen::Index>(c)) - km.centers.row(static_cast<Eigen::Index>(sel))).squaredNorm(), c);
    }
    std::sort(others.begin(), others.end());
    std::optional<Label> target;
    for (const auto& [dist, c] : others) {
        const Label maj = cluster_majority(c);
        if (maj != own_majority) {
            target = maj;
            break;
        }
    }
    if (!target) {
        target = (own_majority + 1) % train.class_count;
        if (!out.record.note.empty()) out.record.note += "; ";
        out.record.note += "no neighbouring cluster with a different majority, target is the next class id";
    }

    // Members ordered by distance to their centroid so an oversized cluster
    // gives up its core first.
    auto ordered = members[sel];
    std::stable_sort(ordered.begin(), ordered.end(), [&](Index a, Index b) {
        const auto ca = static_cast<Eigen::Index>(sel);
        return detail::squared_distance(train.features, static_cast<Eigen::Index>(a), km.centers, ca) <
               detail::squared_distance(train.features, static_cast<Eigen::Index>(b), km.centers, ca);
    });
    std::vector<Index> flipped_rows;
    for (auto i : ordered) {
        if (flipped_rows.size() == m) break;
        if (train.labels[i] == *target) continue;
        flipped_rows.push_back(i);
    }
    std::sort(flipped_rows.begin(), flipped_rows.end());
    for (auto i : flipped_rows) {
        out.poisoned.labels[i] = *target;
        out.record.flipped.push_back({i, train.labels[i], *target});
    }
    if (flipped_rows.empty()) {
        // Every member already carries the target; duplicate the cluster
        // under the target label anyway so the budget is spent.
        flipped_rows = members[sel];
        std::sort(flipped_rows.begin(), flipped_rows.end());
    }
    const auto remaining = m - out.record.flipped.size();
    if (remaining > 0) {
        out.poisoned.features.conservativeResize(static_cast<Eigen::Index>(train.rows() + remaining), Eigen::NoChange);
        for (std::size_t k2 = 0; k2 < remaining; ++k2) {
            const auto src = flipped_rows[k2 % flipped_rows.size()];
            const auto row = train.rows() + k2;
            out.poisoned.features.row(static_cast<Eigen::Index>(row)) = train.features.row(static_cast<Eigen::Index>(src));
            out.poisoned.labels.push_back(*target);
            out.record.injected.push_back({row, src, *target});
        }
    }
    return out;
}

/// Outlier-oriented poisoning: the m rows with the largest max-|z| score
/// (ties: smaller index first) are relabeled to the class whose feature-mean
/// centroid lies farthest from the row, excluding the row's own class.
inline PoisonResult poison_outliers(const Dataset& train, double delta_l, std::uint64_t seed) {
    const auto m = poison_budget(delta_l, train.rows());
    if (train.rows() < m) throw InvalidArgument("poison_outliers: budget exceeds dataset size");
    const auto scores = max_abs_zscore(train.features);
    std::vector<Index> order(train.rows());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });

    const auto C = static_cast<std::size_t>(train.class_count);
    Matrix centroids = Matrix::Zero(static_cast<Eigen::Index>(C), train.features.cols());
    std::vector<std::size_t> counts(C, 0);
    for (Index i = 0; i < train.rows(); ++i) {
        centroids.row(train.labels[i]) += train.features.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(train.labels[i])];
    }
    for (std::size_t c = 0; c < C; ++c)
        if (counts[c] > 0) centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);

    PoisonResult out{train, {AttackKind::OOP, delta_l, seed, {}, {}, {}}};
    std::vector<Index> rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(rows.begin(), rows.end());
    for (auto i : rows) {
        const Label own = train.labels[i];
        Label target = -1;
        double best = -1.0;
        for (std::size_t c = 0; c < C; ++c) {
            if (static_cast<Label>(c) == own || counts[c] == 0) continue;
            const double dd = detail::squared_distance(train.features, static_cast<Eigen::Index>(i), centroids,
                                                       static_cast<Eigen::Index>(c));
            if (dd > best) {
                best = dd;
                target = static_cast<Label>(c);
            }
        }
        if (target < 0) target = (own + 1) % train.class_count;
        out.poisoned.labels[i] = target;
        out.record.flipped.push_back({i, own, target});
    }
    return out;
}

inline PoisonResult poison(AttackKind kind, const Dataset& train, double delta_l, std::uint64_t seed) {
    switch (kind) {
        case AttackKind::RLPA: return poison_random_labels(train, delta_l, seed);
        case AttackKind::SubP: return poison_subpopulation(train, delta_l, seed);
        case AttackKind::OOP: return poison_outliers(train, delta_l, seed);
        case AttackKind::None: return {train, {AttackKind::None, 0.0, seed, {}, {}, {}}};
    }
    throw InvalidArgument("unknown attack");
}

}  // namespace securelearn
