// Feature-oriented adversarial training (FORT): augment the training set with
// sign perturbations of boundary-proximal, importance-heavy rows and refit.
#pragma once

#include "securelearn/common.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/models.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace securelearn {

struct FortConfig {
    double c = 0.01;     // perturbation size per coordinate
    double b = 0.001;    // offset inside the sign
    double tau = 0.3;    // rows with margin <= tau are boundary candidates
    double q = 0.10;     // selection budget as a fraction of the training rows
    std::size_t importance_rows = 2000;  // cap on the permutation-importance reference set

    void validate() const {
        if (!(c > 0.0)) throw InvalidArgument("fort: c must be positive");
        if (b == 0.0) throw InvalidArgument("fort: b must be non-zero");
        if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("fort: tau must lie in (0, 1]");
        if (!(q > 0.0 && q <= 1.0)) throw InvalidArgument("fort: q must lie in (0, 1]");
        if (importance_rows == 0) throw InvalidArgument("fort: importance_rows must be positive");
    }
    bool operator==(const FortConfig&) const = default;
};

/// Gap between the two largest class probabilities of each row.
inline std::vector<double> margins(const Matrix& proba) {
    std::vector<double> out(static_cast<std::size_t>(proba.rows()), 0.0);
    for (Eigen::Index i = 0; i < proba.rows(); ++i) {
        double top = -1.0, second = -1.0;
        for (Eigen::Index c = 0; c < proba.cols(); ++c) {
            const double p = proba(i, c);
            if (p > top) {
                second = top;
                top = p;
            } else if (p > second) {
                second = p;
            }
        }
        out[static_cast<std::size_t>(i)] = proba.cols() > 1 ? top - second : top;
    }
    return out;
}

inline std::vector<double> margins(const TrainedModel& model, const Dataset& ds) {
    return margins(predict_proba(model, ds.features));
}

/// Rows with margin <= tau ranked by sum_j F_j |x_ij| (descending, ties to the
/// smaller index); at most round(q * n) are returned.
inline std::vector<Index> select_augmentation_points(const Dataset& ds, const std::vector<double>& row_margins,
                                                     const FeatureImportance& importance, const FortConfig& cfg) {
    cfg.validate();
    if (importance.scores.size() != ds.cols()) throw InvalidArgument("select_augmentation_points: importance size mismatch");
    std::vector<Index> candidates;
    for (Index i = 0; i < ds.rows(); ++i)
        if (row_margins[i] <= cfg.tau) candidates.push_back(i);
    std::vector<double> score(ds.rows(), 0.0);
    for (auto i : candidates)
        for (std::size_t j = 0; j < ds.cols(); ++j)
            score[i] += importance.scores[j] * std::abs(ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    std::stable_sort(candidates.begin(), candidates.end(), [&](Index a, Index b) { return score[a] > score[b]; });
    const auto budget = round_half_up(cfg.q, ds.rows());
    if (candidates.size() > budget) candidates.resize(budget);
    return candidates;
}

inline std::vector<Index> select_augmentation_points(const Dataset& ds, const TrainedModel& model,
                                                     const FeatureImportance& importance, const FortConfig& cfg) {
    return select_augmentation_points(ds, margins(model, ds), importance, cfg);
}

/// x_j + c * sign(F_j * x_j + b), with sign(0) = +1.
template <typename Row>
RowVector perturb(const Row& x, std::span<const double> importance, const FortConfig& cfg) {
    if (importance.size() != static_cast<std::size_t>(x.size())) throw InvalidArgument("perturb: importance size mismatch");
    RowVector out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double arg = importance[static_cast<std::size_t>(j)] * x(j) + cfg.b;
        out(j) = x(j) + cfg.c * (arg >= 0.0 ? 1.0 : -1.0);
    }
    return out;
}

struct AdversarialRow {
    Index source;
    RowVector features;
    Label label;
};

struct FortResult {
    TrainedModel model;
    TrainedModel preliminary;
    FeatureImportance importance;
    std::vector<AdversarialRow> adversarial;

    std::size_t adversarial_count() const noexcept { return adversarial.size(); }
};

/// Preliminary fit on d_san, importance, selection, perturbed copies with the
/// source labels, and a final fit on d_san + d_adv with the same seed. An
/// empty selection leaves the final model equal to the preliminary one.
inline FortResult fort_fit(ModelKind kind, const Dataset& d_san, const Hyperparams& hp, const FortConfig& cfg,
                           std::uint64_t seed) {
    cfg.validate();
    FortResult out;
    out.preliminary = fit(kind, d_san, hp, seed);
    const Dataset reference = d_san.rows() > cfg.importance_rows
                                  ? select_rows(d_san, Rng(derive_seed(seed, "importance-ref"))
                                                           .sample_without_replacement(d_san.rows(), cfg.importance_rows))
                                  : d_san;
    out.importance = feature_importance(out.preliminary, reference, derive_seed(seed, "importance"));
    const auto chosen = select_augmentation_points(d_san, out.preliminary, out.importance, cfg);
    if (chosen.empty()) {
        out.model = out.preliminary;
        return out;
    }
    Dataset adv;
    adv.class_count = d_san.class_count;
    adv.features.resize(static_cast<Eigen::Index>(chosen.size()), d_san.features.cols());
    for (std::size_t t = 0; t < chosen.size(); ++t) {
        const auto src = chosen[t];
        auto row = perturb(d_san.features.row(static_cast<Eigen::Index>(src)), out.importance.scores, cfg);
        adv.features.row(static_cast<Eigen::Index>(t)) = row;
        adv.labels.push_back(d_san.labels[src]);
        out.adversarial.push_back({src, std::move(row), d_san.labels[src]});
    }
    out.model = fit(kind, concat_rows(d_san, adv), hp, seed);
    return out;
}

}  // namespace securelearn
