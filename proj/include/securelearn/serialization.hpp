// JSON documents for every pipeline artifact (datasets, poison records,
// sanitization outcomes, models, metrics, configs).
#pragma once

#include "securelearn/attacks.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/fort.hpp"
#include "securelearn/metrics.hpp"
#include "securelearn/models.hpp"
#include "securelearn/sanitizer.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace securelearn {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index expected_cols = -1) {
    if (!j.is_array()) throw SchemaError("expected a matrix (array of rows)");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : std::max<Eigen::Index>(expected_cols, 0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw SchemaError("ragged matrix rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline Json row_to_json(const RowVector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline RowVector row_from_json(const Json& j) {
    RowVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

inline Json tree_to_json(const DecisionTree& t) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes())
        nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"p", n.proportions}});
    return {{"nodes", nodes}, {"importance", t.raw_importance()}};
}

inline DecisionTree tree_from_json(const Json& j, int class_count, std::size_t feature_count) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j.at("nodes"))
        nodes.push_back({n.at("f").get<int>(), n.at("t").get<double>(), n.at("l").get<int>(), n.at("r").get<int>(),
                         n.at("p").get<std::vector<double>>()});
    if (nodes.empty()) throw SchemaError("tree without nodes");
    return DecisionTree::from_nodes(std::move(nodes), class_count, feature_count,
                                    j.at("importance").get<std::vector<double>>());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset

inline Json to_json(const Dataset& ds) {
    return {{"class_count", ds.class_count},
            {"feature_count", ds.cols()},
            {"features", detail::matrix_to_json(ds.features)},
            {"labels", ds.labels},
            {"feature_names", ds.feature_names},
            {"provenance", ds.provenance}};
}

inline Dataset dataset_from_json(const Json& j) {
    Dataset ds;
    ds.class_count = j.at("class_count").get<int>();
    const Eigen::Index cols = j.contains("feature_count") ? j.at("feature_count").get<Eigen::Index>() : -1;
    ds.features = detail::matrix_from_json(j.at("features"), cols);
    ds.labels = j.at("labels").get<std::vector<Label>>();
    if (j.contains("feature_names")) ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (j.contains("provenance")) ds.provenance = j.at("provenance").get<std::string>();
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Poison record

inline Json to_json(const PoisonRecord& r) {
    Json flipped = Json::array();
    for (const auto& f : r.flipped) flipped.push_back({{"row", f.row}, {"original", f.original}, {"poisoned", f.poisoned}});
    Json injected = Json::array();
    for (const auto& i : r.injected) injected.push_back({{"row", i.row}, {"source", i.source}, {"label", i.label}});
    Json j = {{"attack_kind", to_string(r.attack_kind)},
              {"delta_l", r.delta_l},
              {"seed", r.seed},
              {"flipped", flipped},
              {"injected", injected}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline PoisonRecord poison_record_from_json(const Json& j) {
    PoisonRecord r;
    r.attack_kind = parse_attack_kind(j.at("attack_kind").get<std::string>());
    r.delta_l = j.at("delta_l").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("flipped"))
        r.flipped.push_back({f.at("row").get<Index>(), f.at("original").get<Label>(), f.at("poisoned").get<Label>()});
    for (const auto& i : j.at("injected"))
        r.injected.push_back({i.at("row").get<Index>(), i.at("source").get<Index>(), i.at("label").get<Label>()});
    if (j.contains("note")) r.note = j.at("note").get<std::string>();
    return r;
}

// ---------------------------------------------------------------------------
// Sanitizer

inline Json to_json(const SanitizerConfig& c) {
    return {{"k", c.k}, {"gamma", c.gamma}, {"g", c.g}, {"distance", to_string(c.distance)}, {"zscore", to_string(c.zscore)}};
}

inline SanitizerConfig sanitizer_config_from_json(const Json& j) {
    SanitizerConfig c;
    if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
    if (j.contains("g")) c.g = j.at("g").get<double>();
    if (j.contains("distance")) c.distance = parse_distance_metric(j.at("distance").get<std::string>());
    if (j.contains("zscore")) c.zscore = parse_zscore_mode(j.at("zscore").get<std::string>());
    c.validate();
    return c;
}

/// Audit document: logs and config. The sanitized rows themselves travel as a
/// separate dataset document.
inline Json to_json(const SanitizationOutcome& o) {
    Json relabeled = Json::array();
    for (const auto& r : o.relabeled)
        relabeled.push_back({{"row", r.row}, {"old_label", r.old_label}, {"new_label", r.new_label}, {"confidence", r.confidence}});
    Json removed = Json::array();
    for (const auto& r : o.removed) removed.push_back({{"row", r.row}, {"score", r.score}});
    return {{"config", to_json(o.config)},
            {"relabeled", relabeled},
            {"removed", removed},
            {"kept_rows", o.kept_rows},
            {"sanitized_rows", o.sanitized.rows()}};
}

/// Restores the logs; `sanitized` is left empty.
inline SanitizationOutcome sanitization_outcome_from_json(const Json& j) {
    SanitizationOutcome o;
    o.config = sanitizer_config_from_json(j.at("config"));
    for (const auto& r : j.at("relabeled"))
        o.relabeled.push_back({r.at("row").get<Index>(), r.at("old_label").get<Label>(), r.at("new_label").get<Label>(),
                               r.at("confidence").get<double>()});
    for (const auto& r : j.at("removed")) o.removed.push_back({r.at("row").get<Index>(), r.at("score").get<double>()});
    if (j.contains("kept_rows")) o.kept_rows = j.at("kept_rows").get<std::vector<Index>>();
    return o;
}

// ---------------------------------------------------------------------------
// FORT

inline Json to_json(const FortConfig& c) {
    return {{"c", c.c}, {"b", c.b}, {"tau", c.tau}, {"q", c.q}, {"importance_rows", c.importance_rows}};
}

inline FortConfig fort_config_from_json(const Json& j) {
    FortConfig c;
    if (j.contains("c")) c.c = j.at("c").get<double>();
    if (j.contains("b")) c.b = j.at("b").get<double>();
    if (j.contains("tau")) c.tau = j.at("tau").get<double>();
    if (j.contains("q")) c.q = j.at("q").get<double>();
    if (j.contains("importance_rows")) c.importance_rows = j.at("importance_rows").get<std::size_t>();
    c.validate();
    return c;
}

inline Json adversarial_rows_to_json(const std::vector<AdversarialRow>& rows) {
    Json a = Json::array();
    for (const auto& r : rows)
        a.push_back({{"source", r.source}, {"label", r.label}, {"features", detail::row_to_json(r.features)}});
    return a;
}

// ---------------------------------------------------------------------------
// Models

inline Json to_json(const Hyperparams& h) {
    return {{"max_depth", h.max_depth},     {"min_samples_split", h.min_samples_split},
            {"n_trees", h.n_trees},         {"max_features", h.max_features},
            {"var_smoothing", h.var_smoothing}, {"hidden_units", h.hidden_units},
            {"epochs", h.epochs},           {"learning_rate", h.learning_rate},
            {"batch_size", h.batch_size}};
}

inline Hyperparams hyperparams_from_json(const Json& j) {
    Hyperparams h;
    for (const auto& [key, value] : j.items()) {
        if (key == "max_depth") h.max_depth = value.get<int>();
        else if (key == "min_samples_split") h.min_samples_split = value.get<std::size_t>();
        else if (key == "n_trees") h.n_trees = value.get<std::size_t>();
        else if (key == "max_features") h.max_features = value.get<std::size_t>();
        else if (key == "var_smoothing") h.var_smoothing = value.get<double>();
        else if (key == "hidden_units") h.hidden_units = value.get<std::size_t>();
        else if (key == "epochs") h.epochs = value.get<std::size_t>();
        else if (key == "learning_rate") h.learning_rate = value.get<double>();
        else if (key == "batch_size") h.batch_size = value.get<std::size_t>();
        else throw SchemaError("unknown hyperparameter '" + key + "'");
    }
    return h;
}

inline Json to_json(const TrainedModel& m) {
    Json params = std::visit(
        [](const auto& s) -> Json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DecisionTree>) {
                return detail::tree_to_json(s);
            } else if constexpr (std::is_same_v<T, RandomForest>) {
                Json trees = Json::array();
                for (const auto& t : s.trees()) trees.push_back(detail::tree_to_json(t));
                return {{"trees", trees}};
            } else if constexpr (std::is_same_v<T, GaussianNB>) {
                Json prior = Json::array();
                for (double v : s.log_prior()) prior.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
                return {{"means", detail::matrix_to_json(s.means())},
                        {"variances", detail::matrix_to_json(s.variances())},
                        {"log_prior", prior},
                        {"epsilon", s.epsilon()}};
            } else {
                const auto& w = s.weights();
                return {{"w1", detail::matrix_to_json(w.w1)},
                        {"b1", detail::row_to_json(w.b1)},
                        {"w2", detail::matrix_to_json(w.w2)},
                        {"b2", detail::row_to_json(w.b2)}};
            }
        },
        m.state);
    return {{"format_version", kModelFormatVersion},
            {"kind", to_string(m.kind)},
            {"class_count", m.class_count},
            {"feature_count", m.feature_count},
            {"seed", m.seed},
            {"hyperparams", to_json(m.hyperparams)},
            {"params", params}};
}

inline TrainedModel model_from_json(const Json& j) {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw SchemaError("unsupported model format_version " + j.at("format_version").dump());
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.class_count = j.at("class_count").get<int>();
    m.feature_count = j.at("feature_count").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    const auto& p = j.at("params");
    switch (m.kind) {
        case ModelKind::DT: m.state = detail::tree_from_json(p, m.class_count, m.feature_count); break;
        case ModelKind::RF: {
            std::vector<DecisionTree> trees;
            for (const auto& t : p.at("trees")) trees.push_back(detail::tree_from_json(t, m.class_count, m.feature_count));
            m.state = RandomForest::from_trees(std::move(trees), m.class_count);
            break;
        }
        case ModelKind::GNB: {
            std::vector<double> prior;
            for (const auto& v : p.at("log_prior"))
                prior.push_back(v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>());
            m.state = GaussianNB::from_parts(detail::matrix_from_json(p.at("means")),
                                             detail::matrix_from_json(p.at("variances")), std::move(prior),
                                             p.at("epsilon").get<double>());
            break;
        }
        case ModelKind::MLP:
            m.state = Mlp::from_weights({detail::matrix_from_json(p.at("w1")), detail::row_from_json(p.at("b1")),
                                         detail::matrix_from_json(p.at("w2")), detail::row_from_json(p.at("b2"))});
            break;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Metrics (flat object, fixed keys; DR/CR omitted when absent)

inline Json to_json(const MetricsBundle& b) {
    Json j = {{"accuracy", b.accuracy}, {"recall_macro", b.recall_macro}, {"f1_macro", b.f1_macro}};
    if (b.detection_rate) j["detection_rate"] = *b.detection_rate;
    if (b.correction_rate) j["correction_rate"] = *b.correction_rate;
    j["fdr"] = b.fdr;
    return j;
}

inline MetricsBundle metrics_from_json(const Json& j) {
    MetricsBundle b;
    b.accuracy = j.at("accuracy").get<double>();
    b.recall_macro = j.at("recall_macro").get<double>();
    b.f1_macro = j.at("f1_macro").get<double>();
    if (j.contains("detection_rate")) b.detection_rate = j.at("detection_rate").get<double>();
    if (j.contains("correction_rate")) b.correction_rate = j.at("correction_rate").get<double>();
    b.fdr = j.at("fdr").get<double>();
    return b;
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const Json& j, int indent = -1) {
    std::ofstream out(path);
    if (!out) throw LoadError(LoadError::Kind::Io, "cannot write " + path);
    out << j.dump(indent) << '\n';
    if (!out) throw LoadError(LoadError::Kind::Io, "write failed for " + path);
}

}  // namespace securelearn
