// Uniform learner contract: fit, predict, class probabilities, and feature
// importance for decision trees, random forests, Gaussian naive Bayes and the
// MLP.
#pragma once

#include "securelearn/common.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/mlp.hpp"
#include "securelearn/naive_bayes.hpp"
#include "securelearn/tree.hpp"

#include <string>
#include <variant>
#include <vector>

namespace securelearn {

enum class ModelKind { DT, RF, GNB, MLP };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::DT: return "dt";
        case ModelKind::RF: return "rf";
        case ModelKind::GNB: return "gnb";
        case ModelKind::MLP: return "mlp";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "dt" || s == "DT") return ModelKind::DT;
    if (s == "rf" || s == "RF") return ModelKind::RF;
    if (s == "gnb" || s == "GNB") return ModelKind::GNB;
    if (s == "mlp" || s == "MLP" || s == "nn") return ModelKind::MLP;
    throw InvalidArgument("unknown model kind '" + std::string(s) + "'");
}

/// Hyperparameters for every kind; each learner reads the fields it needs.
/// Zero-valued "auto" fields resolve against the feature count: inputs with
/// at least kImageFeatureThreshold features use the image MLP profile.
struct Hyperparams {
    int max_depth = 16;
    std::size_t min_samples_split = 2;
    std::size_t n_trees = 100;
    std::size_t max_features = 0;  // 0: all features (DT) / round(sqrt(d)) (RF)
    double var_smoothing = 1e-9;
    std::size_t hidden_units = 0;  // 0: 64 tabular / 128 image
    std::size_t epochs = 0;        // 0: 200 tabular / 30 image
    double learning_rate = 0.01;
    std::size_t batch_size = 32;

    static constexpr std::size_t kImageFeatureThreshold = 100;

    MlpParams mlp_for(std::size_t d) const {
        const bool image = d >= kImageFeatureThreshold;
        return {hidden_units ? hidden_units : (image ? 128u : 64u), epochs ? epochs : (image ? 30u : 200u),
                learning_rate, batch_size};
    }
    bool operator==(const Hyperparams&) const = default;
};

using ModelState = std::variant<DecisionTree, RandomForest, GaussianNB, Mlp>;

struct TrainedModel {
    ModelKind kind = ModelKind::DT;
    Hyperparams hyperparams;
    int class_count = 0;
    std::size_t feature_count = 0;
    std::uint64_t seed = 0;
    ModelState state;
};

/// Deterministic in (kind, data, hyperparams, seed).
inline TrainedModel fit(ModelKind kind, const Dataset& train, const Hyperparams& hp, std::uint64_t seed) {
    if (train.rows() < 2) throw InvalidArgument("fit: need at least 2 rows");
    if (train.classes_present() < 2) throw InvalidArgument("fit: training data contains a single class");
    TrainedModel m;
    m.kind = kind;
    m.hyperparams = hp;
    m.class_count = train.class_count;
    m.feature_count = train.cols();
    m.seed = seed;
    switch (kind) {
        case ModelKind::DT: {
            DecisionTree t;
            std::vector<Index> all(train.rows());
            std::iota(all.begin(), all.end(), Index{0});
            Rng rng(derive_seed(seed, "dt"));
            t.fit(train.features, train.labels, train.class_count, std::move(all),
                  {hp.max_depth, hp.min_samples_split, hp.max_features}, rng);
            m.state = std::move(t);
            break;
        }
        case ModelKind::RF: {
            RandomForest f;
            f.fit(train.features, train.labels, train.class_count,
                  {hp.n_trees, {hp.max_depth, hp.min_samples_split, hp.max_features}}, seed);
            m.state = std::move(f);
            break;
        }
        case ModelKind::GNB: {
            GaussianNB g;
            g.fit(train.features, train.labels, train.class_count, hp.var_smoothing);
            m.state = std::move(g);
            break;
        }
        case ModelKind::MLP: {
            Mlp net;
            net.fit(train.features, train.labels, train.class_count, hp.mlp_for(train.cols()), seed);
            m.state = std::move(net);
            break;
        }
    }
    return m;
}

/// n x C matrix of class probabilities.
inline Matrix predict_proba(const TrainedModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.feature_count)
        throw InvalidArgument("predict: expected " + std::to_string(model.feature_count) + " features, got " +
                              std::to_string(x.cols()));
    return std::visit(
        [&](const auto& s) -> Matrix {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DecisionTree>) {
                Matrix p(x.rows(), model.class_count);
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    const auto& leaf = s.leaf_proportions(x.row(i));
                    for (Eigen::Index c = 0; c < p.cols(); ++c) p(i, c) = leaf[static_cast<std::size_t>(c)];
                }
                return p;
            } else if constexpr (std::is_same_v<T, RandomForest>) {
                Matrix p = Matrix::Zero(x.rows(), model.class_count);
                for (const auto& t : s.trees())
                    for (Eigen::Index i = 0; i < x.rows(); ++i) {
                        const auto& leaf = t.leaf_proportions(x.row(i));
                        for (Eigen::Index c = 0; c < p.cols(); ++c) p(i, c) += leaf[static_cast<std::size_t>(c)];
                    }
                p /= static_cast<double>(s.trees().size());
                return p;
            } else {
                return s.predict_proba(x);
            }
        },
        model.state);
}

/// Row-wise argmax with ties to the smallest class id.
inline std::vector<Label> argmax_rows(const Matrix& scores) {
    std::vector<Label> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<Label>(best);
    }
    return out;
}

inline std::vector<Label> predict(const TrainedModel& model, const Matrix& x) {
    return argmax_rows(predict_proba(model, x));
}

inline double accuracy_on(const TrainedModel& model, const Dataset& ds) {
    const auto pred = predict(model, ds.features);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == ds.labels[i] ? 1 : 0;
    return ds.rows() ? static_cast<double>(hit) / static_cast<double>(ds.rows()) : 0.0;
}

// ---------------------------------------------------------------------------
// Feature importance

/// Per-feature scores, non-negative, summing to 1 (or all zero when no
/// feature matters).
struct FeatureImportance {
    std::vector<double> scores;
};

inline constexpr std::size_t kPermutationRepeats = 5;

/// Column permutation used for (feature, repeat); shared by every evaluator
/// so the fast and reference paths see identical shuffles.
inline std::vector<Index> importance_permutation(std::uint64_t seed, std::size_t feature, std::size_t repeat,
                                                 std::size_t n) {
    Rng rng(derive_seed(seed, "perm", feature, repeat));
    return rng.permutation(n);
}

namespace detail {

inline double fraction_correct(const std::vector<Label>& pred, const std::vector<Label>& truth) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

inline std::vector<double> clamp_and_normalize(std::vector<double> drops) {
    for (double& v : drops) v = std::max(0.0, v);
    return normalized(std::move(drops));
}

/// Accuracy drops for GNB, updating one feature's likelihood term at a time.
inline std::vector<double> gnb_permutation_drops(const GaussianNB& g, const Dataset& ref, std::uint64_t seed) {
    const Matrix base = g.joint_log_likelihood(ref.features);
    const double base_acc = fraction_correct(argmax_rows(base), ref.labels);
    const auto n = ref.rows();
    std::vector<double> drops(ref.cols(), 0.0);
    Matrix work(base.rows(), base.cols());
    for (std::size_t j = 0; j < ref.cols(); ++j) {
        const auto fj = static_cast<Eigen::Index>(j);
        for (std::size_t r = 0; r < kPermutationRepeats; ++r) {
            const auto perm = importance_permutation(seed, j, r, n);
            for (Eigen::Index i = 0; i < base.rows(); ++i) {
                const double old_v = ref.features(i, fj);
                const double new_v = ref.features(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), fj);
                for (Eigen::Index c = 0; c < base.cols(); ++c)
                    work(i, c) = base(i, c) - g.feature_term(c, fj, old_v) + g.feature_term(c, fj, new_v);
            }
            drops[j] += base_acc - fraction_correct(argmax_rows(work), ref.labels);
        }
        drops[j] /= static_cast<double>(kPermutationRepeats);
    }
    return drops;
}

/// Accuracy drops for the MLP via rank-one updates of the hidden
/// pre-activations.
inline std::vector<double> mlp_permutation_drops(const Mlp& net, const Dataset& ref, std::uint64_t seed) {
    const Matrix z = net.hidden_preactivation(ref.features);
    const double base_acc = fraction_correct(argmax_rows(net.logits_from_hidden(z)), ref.labels);
    const auto n = ref.rows();
    const auto& w1 = net.weights().w1;
    std::vector<double> drops(ref.cols(), 0.0);
    Matrix work(z.rows(), z.cols());
    Vector delta(z.rows());
    for (std::size_t j = 0; j < ref.cols(); ++j) {
        const auto fj = static_cast<Eigen::Index>(j);
        if (w1.row(fj).isZero(0.0)) continue;
        for (std::size_t r = 0; r < kPermutationRepeats; ++r) {
            const auto perm = importance_permutation(seed, j, r, n);
            bool any = false;
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                delta(i) = ref.features(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), fj) - ref.features(i, fj);
                any = any || delta(i) != 0.0;
            }
            if (!any) continue;  // constant column: permutation is a no-op
            work.noalias() = z + delta * w1.row(fj);
            drops[j] += base_acc - fraction_correct(argmax_rows(net.logits_from_hidden(work)), ref.labels);
        }
        drops[j] /= static_cast<double>(kPermutationRepeats);
    }
    return drops;
}

}  // namespace detail

/// Permutation importance by full re-prediction for every shuffled column.
/// Model-agnostic and slow; the reference the fast paths are checked against.
inline FeatureImportance permutation_importance_reference(const TrainedModel& model, const Dataset& ref,
                                                          std::uint64_t seed) {
    const double base = detail::fraction_correct(predict(model, ref.features), ref.labels);
    std::vector<double> drops(ref.cols(), 0.0);
    for (std::size_t j = 0; j < ref.cols(); ++j) {
        for (std::size_t r = 0; r < kPermutationRepeats; ++r) {
            const auto perm = importance_permutation(seed, j, r, ref.rows());
            Matrix x = ref.features;
            for (std::size_t i = 0; i < ref.rows(); ++i)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    ref.features(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(j));
            drops[j] += base - detail::fraction_correct(predict(model, x), ref.labels);
        }
        drops[j] /= static_cast<double>(kPermutationRepeats);
    }
    return {detail::clamp_and_normalize(std::move(drops))};
}

/// Trees: normalized total Gini decrease per split feature (forests average
/// the per-tree normalized vectors). GNB/MLP: permutation importance on
/// `reference`, mean accuracy drop over five seeded shuffles per feature,
/// clamped at 0 and normalized.
inline FeatureImportance feature_importance(const TrainedModel& model, const Dataset& reference, std::uint64_t seed) {
    if (reference.rows() == 0) throw InvalidArgument("feature_importance: empty reference set");
    if (reference.cols() != model.feature_count) throw InvalidArgument("feature_importance: feature count mismatch");
    return std::visit(
        [&](const auto& s) -> FeatureImportance {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DecisionTree>) {
                return {normalized(s.raw_importance())};
            } else if constexpr (std::is_same_v<T, RandomForest>) {
                std::vector<double> acc(model.feature_count, 0.0);
                for (const auto& t : s.trees()) {
                    const auto v = normalized(t.raw_importance());
                    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += v[j];
                }
                return {normalized(std::move(acc))};
            } else if constexpr (std::is_same_v<T, GaussianNB>) {
                return {detail::clamp_and_normalize(detail::gnb_permutation_drops(s, reference, seed))};
            } else {
                return {detail::clamp_and_normalize(detail::mlp_permutation_drops(s, reference, seed))};
            }
        },
        model.state);
}

}  // namespace securelearn
