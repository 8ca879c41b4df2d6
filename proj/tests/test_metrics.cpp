#include "securelearn/metrics.hpp"

#include <gtest/gtest.h>

using namespace securelearn;

namespace {

PoisonRecord flips(std::vector<LabelFlip> f, std::vector<Injection> inj = {}) {
    PoisonRecord r;
    r.attack_kind = AttackKind::RLPA;
    r.flipped = std::move(f);
    r.injected = std::move(inj);
    return r;
}

}  // namespace

TEST(Confusion, CountsAndErrors) {
    const std::vector<Label> t{0, 0, 1, 1}, p{0, 1, 1, 1};
    const auto m = confusion(t, p, 2);
    EXPECT_EQ(m(0, 0), 1);
    EXPECT_EQ(m(0, 1), 1);
    EXPECT_EQ(m(1, 1), 2);
    EXPECT_THROW(confusion(t, std::vector<Label>{0}, 2), InvalidArgument);
    EXPECT_THROW(confusion(std::vector<Label>{}, std::vector<Label>{}, 2), InvalidArgument);
    EXPECT_THROW(confusion(t, std::vector<Label>{0, 0, 0, 2}, 2), InvalidArgument);
}

TEST(Metrics, TwoByTwoHandExample) {
    ConfusionMatrix m(2, 2);
    m << 1, 1,
         0, 2;
    EXPECT_DOUBLE_EQ(accuracy(m), 0.75);
    EXPECT_DOUBLE_EQ(recall_macro(m), 0.75);
    // Column 0: 0 FP of 1; column 1: 1 FP of 3.
    EXPECT_DOUBLE_EQ(fdr(m), (0.0 + 1.0 / 3.0) / 2.0);
    // F1: class 0 P=1 R=.5 -> 2/3; class 1 P=2/3 R=1 -> 0.8.
    EXPECT_NEAR(f1_macro(m), (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
}

TEST(Metrics, FdrSingleColumn) {
    ConfusionMatrix m(2, 2);
    m << 18, 0,
         2, 0;
    EXPECT_DOUBLE_EQ(fdr(m), 0.1);
}

TEST(Metrics, AbsentClassesSkipped) {
    ConfusionMatrix m = ConfusionMatrix::Zero(3, 3);
    m(0, 0) = 3;
    m(1, 0) = 1;
    m(1, 1) = 1;
    EXPECT_DOUBLE_EQ(recall_macro(m), (1.0 + 0.5) / 2.0);
    EXPECT_DOUBLE_EQ(fdr(m), (0.25 + 0.0) / 2.0);
}

TEST(Metrics, EvaluateBundle) {
    const std::vector<Label> t{0, 1, 2, 2}, p{0, 1, 2, 1};
    const auto b = evaluate(t, p, 3);
    EXPECT_DOUBLE_EQ(b.accuracy, 0.75);
    EXPECT_FALSE(b.detection_rate.has_value());
    EXPECT_FALSE(b.correction_rate.has_value());
}

TEST(DetectionRate, CountsRelabeledAndRemoved) {
    std::vector<LabelFlip> f;
    for (Index r = 0; r < 10; ++r) f.push_back({r, 0, 1});
    const auto rec = flips(f);
    SanitizationOutcome o;
    for (Index r = 0; r < 6; ++r) o.relabeled.push_back({r, 1, 0, 1.0});
    o.removed = {{6, 9.0}, {7, 8.0}, {40, 7.0}};
    o.relabeled.push_back({30, 0, 1, 1.0});  // clean rows do not count
    EXPECT_DOUBLE_EQ(*detection_rate(rec, o), 0.8);
}

TEST(CorrectionRate, RightLabelOrRemovedInjection) {
    const auto rec = flips({{0, 0, 1}, {1, 0, 1}, {2, 0, 1}}, {{3, 0, 2}});
    SanitizationOutcome o;
    o.relabeled = {{0, 1, 0, 1.0}, {1, 1, 2, 1.0}};  // row 0 repaired, row 1 moved to a third class
    o.removed = {{2, 9.0}, {3, 9.0}};                 // removing a flip detects but does not repair
    EXPECT_DOUBLE_EQ(*correction_rate(rec, o), 0.5);
    EXPECT_DOUBLE_EQ(*detection_rate(rec, o), 1.0);
}

TEST(DetectionRate, UndefinedWithoutPoison) {
    PoisonRecord none;
    SanitizationOutcome o;
    EXPECT_FALSE(detection_rate(none, o).has_value());
    EXPECT_FALSE(correction_rate(none, o).has_value());
}

TEST(DetectionRate, SanitizerThatDoesNothing) {
    const auto rec = flips({{0, 0, 1}, {5, 1, 0}});
    SanitizationOutcome o;
    EXPECT_DOUBLE_EQ(*detection_rate(rec, o), 0.0);
    EXPECT_DOUBLE_EQ(*correction_rate(rec, o), 0.0);
}
