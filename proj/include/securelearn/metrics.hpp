// Classification metrics (accuracy, macro recall/F1, macro FDR) and the
// sanitizer's detection and correction rates.
#pragma once

#include "securelearn/attacks.hpp"
#include "securelearn/common.hpp"
#include "securelearn/sanitizer.hpp"

#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace securelearn {

/// C x C counts; entry (t, p) is the number of rows with truth t predicted p.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline ConfusionMatrix confusion(std::span<const Label> y_true, std::span<const Label> y_pred, int class_count) {
    if (y_true.size() != y_pred.size()) throw InvalidArgument("confusion: length mismatch");
    if (y_true.empty()) throw InvalidArgument("confusion: empty input");
    if (class_count < 1) throw InvalidArgument("confusion: class_count must be positive");
    ConfusionMatrix m = ConfusionMatrix::Zero(class_count, class_count);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= class_count || y_pred[i] < 0 || y_pred[i] >= class_count)
            throw InvalidArgument("confusion: label out of range at position " + std::to_string(i));
        ++m(y_true[i], y_pred[i]);
    }
    return m;
}

inline double accuracy(const ConfusionMatrix& m) {
    const auto total = m.sum();
    if (total == 0) throw InvalidArgument("accuracy: empty confusion matrix");
    return static_cast<double>(m.trace()) / static_cast<double>(total);
}

/// Mean per-class recall over classes present in the ground truth.
inline double recall_macro(const ConfusionMatrix& m) {
    double sum = 0.0;
    int present = 0;
    for (Eigen::Index c = 0; c < m.rows(); ++c) {
        const auto positives = m.row(c).sum();
        if (positives == 0) continue;
        sum += static_cast<double>(m(c, c)) / static_cast<double>(positives);
        ++present;
    }
    if (present == 0) throw InvalidArgument("recall_macro: empty confusion matrix");
    return sum / present;
}

/// Mean per-class F1 over classes present in the ground truth; a class with
/// P + R = 0 contributes 0.
inline double f1_macro(const ConfusionMatrix& m) {
    double sum = 0.0;
    int present = 0;
    for (Eigen::Index c = 0; c < m.rows(); ++c) {
        const auto positives = m.row(c).sum();
        if (positives == 0) continue;
        ++present;
        const auto predicted = m.col(c).sum();
        const double recall = static_cast<double>(m(c, c)) / static_cast<double>(positives);
        const double precision = predicted ? static_cast<double>(m(c, c)) / static_cast<double>(predicted) : 0.0;
        sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    if (present == 0) throw InvalidArgument("f1_macro: empty confusion matrix");
    return sum / present;
}

/// Mean of FP_c / (FP_c + TP_c) over classes predicted at least once.
inline double fdr(const ConfusionMatrix& m) {
    double sum = 0.0;
    int predicted_classes = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto predicted = m.col(c).sum();
        if (predicted == 0) continue;
        sum += static_cast<double>(predicted - m(c, c)) / static_cast<double>(predicted);
        ++predicted_classes;
    }
    if (predicted_classes == 0) throw InvalidArgument("fdr: no predictions");
    return sum / predicted_classes;
}

namespace detail {

struct PoisonedRows {
    std::vector<Index> flipped;
    std::vector<Index> injected;
};

inline PoisonedRows poisoned_rows(const PoisonRecord& record) {
    PoisonedRows out;
    for (const auto& f : record.flipped) out.flipped.push_back(f.row);
    for (const auto& i : record.injected) out.injected.push_back(i.row);
    return out;
}

}  // namespace detail

/// Fraction of poisoned rows that were relabeled or removed; absent when the
/// record holds no poisoned rows.
inline std::optional<double> detection_rate(const PoisonRecord& record, const SanitizationOutcome& outcome) {
    const auto total = record.poisoned_count();
    if (total == 0) return std::nullopt;
    std::unordered_set<Index> touched;
    for (const auto& r : outcome.relabeled) touched.insert(r.row);
    for (const auto& r : outcome.removed) touched.insert(r.row);
    std::size_t detected = 0;
    for (const auto& f : record.flipped) detected += touched.count(f.row);
    for (const auto& i : record.injected) detected += touched.count(i.row);
    return static_cast<double>(detected) / static_cast<double>(total);
}

/// Fraction of poisoned rows repaired: a flipped row that survives with its
/// original label, or an injected row that was removed.
inline std::optional<double> correction_rate(const PoisonRecord& record, const SanitizationOutcome& outcome) {
    const auto total = record.poisoned_count();
    if (total == 0) return std::nullopt;
    std::unordered_set<Index> removed;
    for (const auto& r : outcome.removed) removed.insert(r.row);
    std::unordered_map<Index, Label> relabeled;
    for (const auto& r : outcome.relabeled) relabeled[r.row] = r.new_label;
    std::size_t corrected = 0;
    for (const auto& f : record.flipped) {
        if (removed.count(f.row)) continue;
        const auto it = relabeled.find(f.row);
        const Label final_label = it == relabeled.end() ? f.poisoned : it->second;
        corrected += final_label == f.original ? 1 : 0;
    }
    for (const auto& i : record.injected) corrected += removed.count(i.row);
    return static_cast<double>(corrected) / static_cast<double>(total);
}

struct MetricsBundle {
    double accuracy = 0.0;
    double recall_macro = 0.0;
    double f1_macro = 0.0;
    std::optional<double> detection_rate;
    std::optional<double> correction_rate;
    double fdr = 0.0;
    bool operator==(const MetricsBundle&) const = default;
};

inline MetricsBundle evaluate(std::span<const Label> y_true, std::span<const Label> y_pred, int class_count,
                              const PoisonRecord* record = nullptr, const SanitizationOutcome* outcome = nullptr) {
    const auto m = confusion(y_true, y_pred, class_count);
    MetricsBundle b{accuracy(m), recall_macro(m), f1_macro(m), std::nullopt, std::nullopt, fdr(m)};
    if (record && outcome) {
        b.detection_rate = detection_rate(*record, *outcome);
        b.correction_rate = correction_rate(*record, *outcome);
    }
    return b;
}

}  // namespace securelearn
