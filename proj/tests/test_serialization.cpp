#include "securelearn/serialization.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace securelearn;

namespace {

template <typename T, typename FromJson>
T round_trip(const T& v, FromJson from) {
    return from(Json::parse(to_json(v).dump()));
}

}  // namespace

TEST(Serialization, DatasetBitExact) {
    auto ds = synth_blobs(3, 5, 4, 1.0, 2);
    ds.features(0, 0) = 0.1 + 0.2;  // needs all 17 digits
    ds.feature_names = {"a", "b", "c", "d"};
    ds.provenance = "blobs";
    const auto back = round_trip(ds, dataset_from_json);
    EXPECT_EQ(back.features, ds.features);
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.class_count, 3);
    EXPECT_EQ(back.feature_names, ds.feature_names);
    EXPECT_EQ(back.provenance, "blobs");
}

TEST(Serialization, EmptyDatasetKeepsWidth) {
    Dataset ds;
    ds.class_count = 2;
    ds.features.resize(0, 7);
    EXPECT_EQ(round_trip(ds, dataset_from_json).cols(), 7u);
}

TEST(Serialization, PoisonRecord) {
    const auto ds = synth_blobs(3, 20, 2, 1.0, 4);
    for (auto k : {AttackKind::RLPA, AttackKind::SubP, AttackKind::OOP}) {
        const auto rec = poison(k, ds, 0.15, 3).record;
        EXPECT_EQ(round_trip(rec, poison_record_from_json), rec) << to_string(k);
    }
}

TEST(Serialization, SanitizationOutcome) {
    const auto ds = synth_blobs(3, 20, 2, 1.0, 4);
    const auto o = sanitize(poison(AttackKind::RLPA, ds, 0.2, 1).poisoned, SanitizerConfig{});
    const auto back = round_trip(o, sanitization_outcome_from_json);
    EXPECT_EQ(back.relabeled, o.relabeled);
    EXPECT_EQ(back.removed, o.removed);
    EXPECT_EQ(back.kept_rows, o.kept_rows);
    EXPECT_EQ(back.config, o.config);
}

TEST(Serialization, MetricsWithAndWithoutRates) {
    MetricsBundle b{0.9, 0.8, 0.7, 0.6, std::nullopt, 0.1};
    EXPECT_EQ(round_trip(b, metrics_from_json), b);
    b.correction_rate = 0.25;
    EXPECT_EQ(round_trip(b, metrics_from_json), b);
}

TEST(Serialization, ModelsPredictIdentically) {
    const auto ds = synth_blobs(3, 30, 3, 2.0, 7);
    Hyperparams hp;
    hp.n_trees = 15;
    hp.epochs = 20;
    hp.learning_rate = 0.1;
    for (auto k : {ModelKind::DT, ModelKind::RF, ModelKind::GNB, ModelKind::MLP}) {
        const auto m = fit(k, ds, hp, 3);
        const auto back = round_trip(m, model_from_json);
        EXPECT_EQ(back.kind, k);
        EXPECT_EQ(back.hyperparams, hp);
        EXPECT_EQ(predict_proba(back, ds.features), predict_proba(m, ds.features)) << to_string(k);
    }
}

TEST(Serialization, RejectsForeignVersionAndBadShapes) {
    const auto m = fit(ModelKind::GNB, synth_blobs(2, 10, 2, 1.0, 1), {}, 0);
    auto j = to_json(m);
    j["format_version"] = kModelFormatVersion + 1;
    EXPECT_THROW(model_from_json(j), SchemaError);
    auto d = to_json(synth_blobs(2, 3, 2, 1.0, 1));
    d["features"][0].push_back(1.0);
    EXPECT_THROW(dataset_from_json(d), SchemaError);
}

TEST(Serialization, FileRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "securelearn_ser_test.json").string();
    const Json j = {{"x", 0.1}, {"y", {1, 2, 3}}};
    write_json_file(path, j, 2);
    EXPECT_EQ(read_json_file(path), j);
    std::filesystem::remove(path);
    EXPECT_THROW(read_json_file(path), LoadError);
}
