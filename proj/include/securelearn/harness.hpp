// Evaluation matrix: datasets x models x attacks x poisoning levels x seeds x
// pipeline variants, with per-cell derived seeds, a resumable JSON-lines
// result log, and aggregate tables.
#pragma once

#include "securelearn/attacks.hpp"
#include "securelearn/dataset.hpp"
#include "securelearn/fort.hpp"
#include "securelearn/metrics.hpp"
#include "securelearn/models.hpp"
#include "securelearn/sanitizer.hpp"
#include "securelearn/serialization.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace securelearn {

inline constexpr std::string_view kCodeVersion = "securelearn-1.0";
inline constexpr int kExperimentSpecVersion = 1;

enum class Variant { PoisonedBaseline, SanitizeOnly, FortOnly, SecureLearnFull };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::PoisonedBaseline: return "poisoned_baseline";
        case Variant::SanitizeOnly: return "sanitize_only";
        case Variant::FortOnly: return "fort_only";
        case Variant::SecureLearnFull: return "securelearn_full";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    if (s == "poisoned_baseline" || s == "baseline") return Variant::PoisonedBaseline;
    if (s == "sanitize_only" || s == "ds1") return Variant::SanitizeOnly;
    if (s == "fort_only" || s == "ds2") return Variant::FortOnly;
    if (s == "securelearn_full" || s == "ds3") return Variant::SecureLearnFull;
    throw InvalidArgument("unknown variant '" + std::string(s) + "'");
}

inline bool runs_sanitizer(Variant v) { return v == Variant::SanitizeOnly || v == Variant::SecureLearnFull; }
inline bool runs_fort(Variant v) { return v == Variant::FortOnly || v == Variant::SecureLearnFull; }

/// Where a dataset comes from. kind: iris | mnist | usps | synth | json.
struct DatasetSpec {
    std::string name;
    std::string kind;
    std::string path;
    std::string labels_path;     // mnist only
    std::size_t per_class = 0;   // stratified subsample size; 0 keeps every row
    bool standardize = true;
    // synth only
    int synth_classes = 3;
    std::size_t synth_per_class = 50;
    std::size_t synth_features = 2;
    double synth_spread = 0.5;
    std::uint64_t synth_seed = 0;
};

struct ModelSpec {
    ModelKind kind = ModelKind::DT;
    Hyperparams hyperparams;
    std::string name;  // defaults to the kind

    std::string key() const { return name.empty() ? to_string(kind) : name; }
};

struct ExperimentSpec {
    int spec_version = kExperimentSpecVersion;
    std::uint64_t master_seed = 0;
    std::vector<DatasetSpec> datasets;
    std::vector<ModelSpec> models;
    std::vector<AttackKind> attacks{AttackKind::RLPA, AttackKind::SubP, AttackKind::OOP};
    std::vector<double> levels{0.10, 0.15, 0.20};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<Variant> variants{Variant::PoisonedBaseline, Variant::SanitizeOnly, Variant::FortOnly,
                                  Variant::SecureLearnFull};
    SanitizerConfig sanitizer;
    FortConfig fort;
    double train_fraction = 0.75;
    bool unrestricted_levels = false;  // lift the 10%-20% poisoning-level window
    std::filesystem::path base_dir;    // relative dataset paths resolve here

    void validate() const {
        if (spec_version != kExperimentSpecVersion)
            throw SchemaError("unsupported spec_version " + std::to_string(spec_version));
        if (datasets.empty() || models.empty() || attacks.empty() || levels.empty() || seeds.empty() || variants.empty())
            throw InvalidArgument("experiment spec: every dimension must be non-empty");
        auto no_dupes = [](auto values, const char* what) {
            std::sort(values.begin(), values.end());
            if (std::adjacent_find(values.begin(), values.end()) != values.end())
                throw InvalidArgument(std::string("experiment spec: duplicate ") + what);
        };
        std::vector<std::string> dn, mn;
        for (const auto& d : datasets) dn.push_back(d.name);
        for (const auto& m : models) mn.push_back(m.key());
        no_dupes(dn, "dataset names");
        no_dupes(mn, "model names");
        no_dupes(attacks, "attacks");
        no_dupes(levels, "levels");
        no_dupes(seeds, "seeds");
        no_dupes(variants, "variants");
        for (double l : levels) {
            if (!(l > 0.0 && l < 1.0)) throw InvalidArgument("experiment spec: levels must lie in (0, 1)");
            if (!unrestricted_levels && (l < 0.10 - 1e-9 || l > 0.20 + 1e-9))
                throw InvalidArgument("experiment spec: poisoning level " + std::to_string(l) +
                                      " outside [0.10, 0.20] (set unrestricted_levels to allow)");
        }
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("experiment spec: bad train_fraction");
        sanitizer.validate();
        fort.validate();
    }
};

struct Cell {
    std::string dataset;
    std::string model;
    AttackKind attack = AttackKind::None;
    double delta_l = 0.0;
    std::uint64_t seed = 0;
    Variant variant = Variant::PoisonedBaseline;
    std::uint64_t cell_seed = 0;

    auto coordinates() const { return std::tie(dataset, model, attack, delta_l, seed, variant); }
    bool operator==(const Cell& o) const { return coordinates() == o.coordinates() && cell_seed == o.cell_seed; }
};

struct CellCounts {
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t poisoned_rows = 0;
    std::size_t relabeled = 0;
    std::size_t removed = 0;
    std::size_t adversarial = 0;
};

struct CellResult {
    Cell cell;
    std::string hash;
    std::optional<MetricsBundle> metrics;
    std::optional<std::string> error;
    CellCounts counts;
    double wall_time_seconds = 0.0;
};

/// Result plus the audit artifacts the cell produced.
struct CellRun {
    CellResult result;
    std::optional<PoisonRecord> record;
    std::optional<SanitizationOutcome> sanitization;
    std::vector<AdversarialRow> adversarial;
};

// ---------------------------------------------------------------------------
// Spec (de)serialization

inline std::string level_key(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", level);
    return buf;
}

inline Json to_json(const DatasetSpec& d) {
    Json j = {{"name", d.name}, {"kind", d.kind}, {"per_class", d.per_class}, {"standardize", d.standardize}};
    if (!d.path.empty()) j["path"] = d.path;
    if (!d.labels_path.empty()) j["labels_path"] = d.labels_path;
    if (d.kind == "synth")
        j["synth"] = {{"classes", d.synth_classes}, {"per_class", d.synth_per_class}, {"features", d.synth_features},
                      {"spread", d.synth_spread}, {"seed", d.synth_seed}};
    return j;
}

inline DatasetSpec dataset_spec_from_json(const Json& j) {
    DatasetSpec d;
    d.kind = j.at("kind").get<std::string>();
    d.name = j.value("name", d.kind);
    d.path = j.value("path", std::string{});
    d.labels_path = j.value("labels_path", std::string{});
    d.per_class = j.value("per_class", std::size_t{0});
    d.standardize = j.value("standardize", true);
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        d.synth_classes = s.value("classes", d.synth_classes);
        d.synth_per_class = s.value("per_class", d.synth_per_class);
        d.synth_features = s.value("features", d.synth_features);
        d.synth_spread = s.value("spread", d.synth_spread);
        d.synth_seed = s.value("seed", d.synth_seed);
    }
    static const std::set<std::string> kinds{"iris", "mnist", "usps", "synth", "json"};
    if (!kinds.count(d.kind)) throw SchemaError("unknown dataset kind '" + d.kind + "'");
    return d;
}

inline Json to_json(const ModelSpec& m) {
    return {{"kind", to_string(m.kind)}, {"name", m.key()}, {"hyperparams", to_json(m.hyperparams)}};
}

inline ModelSpec model_spec_from_json(const Json& j) {
    if (j.is_string()) return {parse_model_kind(j.get<std::string>()), {}, {}};
    ModelSpec m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    if (j.contains("hyperparams")) m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    m.name = j.value("name", std::string{});
    return m;
}

inline Json to_json(const ExperimentSpec& s) {
    Json datasets = Json::array(), models = Json::array(), attacks = Json::array(), variants = Json::array();
    for (const auto& d : s.datasets) datasets.push_back(to_json(d));
    for (const auto& m : s.models) models.push_back(to_json(m));
    for (auto a : s.attacks) attacks.push_back(to_string(a));
    for (auto v : s.variants) variants.push_back(to_string(v));
    return {{"spec_version", s.spec_version}, {"master_seed", s.master_seed}, {"datasets", datasets},
            {"models", models}, {"attacks", attacks}, {"levels", s.levels}, {"seeds", s.seeds},
            {"variants", variants}, {"sanitizer", to_json(s.sanitizer)}, {"fort", to_json(s.fort)},
            {"train_fraction", s.train_fraction}, {"unrestricted_levels", s.unrestricted_levels}};
}

inline ExperimentSpec experiment_spec_from_json(const Json& j, std::filesystem::path base_dir = {}) {
    ExperimentSpec s;
    s.spec_version = j.at("spec_version").get<int>();
    s.master_seed = j.value("master_seed", std::uint64_t{0});
    for (const auto& d : j.at("datasets")) s.datasets.push_back(dataset_spec_from_json(d));
    for (const auto& m : j.at("models")) s.models.push_back(model_spec_from_json(m));
    if (j.contains("attacks")) {
        s.attacks.clear();
        for (const auto& a : j.at("attacks")) s.attacks.push_back(parse_attack_kind(a.get<std::string>()));
    }
    if (j.contains("levels")) s.levels = j.at("levels").get<std::vector<double>>();
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("variants")) {
        s.variants.clear();
        for (const auto& v : j.at("variants")) s.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (j.contains("sanitizer")) s.sanitizer = sanitizer_config_from_json(j.at("sanitizer"));
    if (j.contains("fort")) s.fort = fort_config_from_json(j.at("fort"));
    s.train_fraction = j.value("train_fraction", 0.75);
    s.unrestricted_levels = j.value("unrestricted_levels", false);
    s.base_dir = std::move(base_dir);
    s.validate();
    return s;
}

inline ExperimentSpec load_experiment_spec(const std::string& path) {
    return experiment_spec_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Planning

inline const DatasetSpec& find_dataset(const ExperimentSpec& s, const std::string& name) {
    for (const auto& d : s.datasets)
        if (d.name == name) return d;
    throw InvalidArgument("no dataset named '" + name + "'");
}

inline const ModelSpec& find_model(const ExperimentSpec& s, const std::string& key) {
    for (const auto& m : s.models)
        if (m.key() == key) return m;
    throw InvalidArgument("no model named '" + key + "'");
}

/// Cartesian product in lexicographic coordinate order. The clean ("none")
/// attack contributes a single level 0. Each cell's seed is derived from the
/// master seed and the cell's coordinates only.
inline std::vector<Cell> plan_cells(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<std::string> datasets, models;
    for (const auto& d : spec.datasets) datasets.push_back(d.name);
    for (const auto& m : spec.models) models.push_back(m.key());
    std::sort(datasets.begin(), datasets.end());
    std::sort(models.begin(), models.end());
    auto attacks = spec.attacks;
    auto levels = spec.levels;
    auto seeds = spec.seeds;
    auto variants = spec.variants;
    std::sort(attacks.begin(), attacks.end());
    std::sort(levels.begin(), levels.end());
    std::sort(seeds.begin(), seeds.end());
    std::sort(variants.begin(), variants.end());

    std::vector<Cell> cells;
    for (const auto& d : datasets)
        for (const auto& m : models)
            for (auto a : attacks) {
                const std::vector<double> lv = a == AttackKind::None ? std::vector<double>{0.0} : levels;
                for (double l : lv)
                    for (auto s : seeds)
                        for (auto v : variants) {
                            Cell c{d, m, a, l, s, v, 0};
                            c.cell_seed = derive_seed(spec.master_seed, d, m, to_string(a), level_key(l), s, to_string(v));
                            cells.push_back(std::move(c));
                        }
            }
    if (cells.empty()) throw InvalidArgument("experiment spec produced no cells");
    return cells;
}

/// Hash of everything that determines the cell's output.
inline std::string cell_hash(const ExperimentSpec& spec, const Cell& cell) {
    const Json key = {{"code", kCodeVersion},
                      {"master_seed", spec.master_seed},
                      {"dataset", to_json(find_dataset(spec, cell.dataset))},
                      {"model", to_json(find_model(spec, cell.model))},
                      {"attack", to_string(cell.attack)},
                      {"delta_l", level_key(cell.delta_l)},
                      {"seed", cell.seed},
                      {"variant", to_string(cell.variant)},
                      {"sanitizer", to_json(spec.sanitizer)},
                      {"fort", to_json(spec.fort)},
                      {"train_fraction", spec.train_fraction}};
    return hex64(fnv1a64(key.dump()));
}

// ---------------------------------------------------------------------------
// Shared stage cache
//
// Poisoned and sanitized training sets do not depend on the model or the
// variant, so cells share them. Values are immutable once published.

template <typename T>
class MemoCache {
public:
    std::shared_ptr<const T> get(const std::string& key, const std::function<T()>& compute) {
        std::shared_future<std::shared_ptr<const T>> fut;
        std::promise<std::shared_ptr<const T>> promise;
        bool owner = false;
        {
            std::lock_guard lock(mu_);
            auto it = entries_.find(key);
            if (it == entries_.end()) {
                fut = promise.get_future().share();
                entries_.emplace(key, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (owner) {
            try {
                promise.set_value(std::make_shared<const T>(compute()));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

    void clear() {
        std::lock_guard lock(mu_);
        entries_.clear();
    }

private:
    std::mutex mu_;
    std::map<std::string, std::shared_future<std::shared_ptr<const T>>> entries_;
};

struct PreparedSplit {
    Dataset train;
    Dataset test;
};

struct PoisonedSplit {
    std::shared_ptr<const PreparedSplit> split;
    PoisonResult poisoned;
};

class StageCache {
public:
    MemoCache<Dataset> datasets;
    MemoCache<PreparedSplit> splits;
    MemoCache<PoisonedSplit> poisoned;
    MemoCache<SanitizationOutcome> sanitized;
};

inline std::filesystem::path resolve_path(const ExperimentSpec& spec, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !spec.base_dir.empty()) return spec.base_dir / path;
    return path;
}

/// Loads (and optionally subsamples) the full dataset named by `d`.
inline Dataset load_dataset(const ExperimentSpec& spec, const DatasetSpec& d) {
    Dataset ds;
    if (d.kind == "iris") ds = load_iris_csv(resolve_path(spec, d.path).string());
    else if (d.kind == "mnist") ds = load_idx_pair(resolve_path(spec, d.path).string(), resolve_path(spec, d.labels_path).string());
    else if (d.kind == "usps") ds = load_usps_text(resolve_path(spec, d.path).string());
    else if (d.kind == "json") ds = dataset_from_json(read_json_file(resolve_path(spec, d.path).string()));
    else if (d.kind == "synth") ds = synth_blobs(d.synth_classes, d.synth_per_class, d.synth_features, d.synth_spread, d.synth_seed);
    else throw SchemaError("unknown dataset kind '" + d.kind + "'");
    if (d.per_class > 0) ds = stratified_subsample(ds, d.per_class, derive_seed(spec.master_seed, "subsample", d.name));
    return ds;
}

namespace detail {

inline std::shared_ptr<const PoisonedSplit> poisoned_split(const ExperimentSpec& spec, const Cell& cell, StageCache& cache) {
    const auto& dspec = find_dataset(spec, cell.dataset);
    const std::string split_key = cell.dataset + "/" + std::to_string(cell.seed);
    const std::string poison_key = split_key + "/" + to_string(cell.attack) + "/" + level_key(cell.delta_l);
    return cache.poisoned.get(poison_key, [&] {
        auto prepared = cache.splits.get(split_key, [&] {
            auto full = cache.datasets.get(cell.dataset, [&] { return load_dataset(spec, dspec); });
            auto [train, test] = securelearn::split(*full, spec.train_fraction, derive_seed(spec.master_seed, "split", cell.dataset, cell.seed));
            if (dspec.standardize) {
                const auto params = standardize_fit(train);
                train = standardize_apply(train, params);
                test = standardize_apply(test, params);
            }
            return PreparedSplit{std::move(train), std::move(test)};
        });
        const auto attack_seed =
            derive_seed(spec.master_seed, "attack", cell.dataset, to_string(cell.attack), level_key(cell.delta_l), cell.seed);
        return PoisonedSplit{prepared, poison(cell.attack, prepared->train, cell.delta_l, attack_seed)};
    });
}

}  // namespace detail

/// Runs one cell: load, split, standardize, poison, variant-specific defense,
/// fit, and evaluation on the clean test split. Stage failures are reported
/// in the result's error field.
inline CellRun run_cell(const ExperimentSpec& spec, const Cell& cell, StageCache& cache) {
    const auto start = std::chrono::steady_clock::now();
    CellRun run;
    run.result.cell = cell;
    run.result.hash = cell_hash(spec, cell);
    try {
        const auto prepared = detail::poisoned_split(spec, cell, cache);
        const auto& train = prepared->poisoned.poisoned;
        const auto& test = prepared->split->test;
        run.result.counts.train_rows = train.rows();
        run.result.counts.test_rows = test.rows();
        run.result.counts.poisoned_rows = prepared->poisoned.record.poisoned_count();
        if (cell.attack != AttackKind::None) run.record = prepared->poisoned.record;

        const Dataset* fit_on = &train;
        std::shared_ptr<const SanitizationOutcome> outcome;
        if (runs_sanitizer(cell.variant)) {
            const std::string key = cell.dataset + "/" + std::to_string(cell.seed) + "/" + to_string(cell.attack) + "/" +
                                    level_key(cell.delta_l);
            outcome = cache.sanitized.get(key, [&] { return sanitize(train, spec.sanitizer); });
            fit_on = &outcome->sanitized;
            run.result.counts.relabeled = outcome->relabeled.size();
            run.result.counts.removed = outcome->removed.size();
            run.sanitization = *outcome;
        }

        const auto& mspec = find_model(spec, cell.model);
        const auto model_seed = derive_seed(spec.master_seed, "model", cell.dataset, cell.model, cell.seed);
        TrainedModel model;
        if (runs_fort(cell.variant)) {
            auto fr = fort_fit(mspec.kind, *fit_on, mspec.hyperparams, spec.fort, model_seed);
            run.result.counts.adversarial = fr.adversarial_count();
            run.adversarial = std::move(fr.adversarial);
            model = std::move(fr.model);
        } else {
            model = fit(mspec.kind, *fit_on, mspec.hyperparams, model_seed);
        }
        const auto pred = predict(model, test.features);
        const bool with_rates = outcome && cell.attack != AttackKind::None;
        run.result.metrics = evaluate(test.labels, pred, test.class_count, with_rates ? &*run.record : nullptr,
                                      with_rates ? outcome.get() : nullptr);
    } catch (const std::exception& e) {
        run.result.error = e.what();
        run.result.metrics.reset();
    }
    run.result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

inline CellRun run_cell(const ExperimentSpec& spec, const Cell& cell) {
    StageCache cache;
    return run_cell(spec, cell, cache);
}

// ---------------------------------------------------------------------------
// Result lines

inline Json to_json(const CellResult& r) {
    Json j = {{"dataset", r.cell.dataset},
              {"model", r.cell.model},
              {"attack", to_string(r.cell.attack)},
              {"delta_l", r.cell.delta_l},
              {"seed", r.cell.seed},
              {"variant", to_string(r.cell.variant)},
              {"cell_seed", r.cell.cell_seed},
              {"hash", r.hash},
              {"metrics", r.metrics ? to_json(*r.metrics) : Json(nullptr)},
              {"error", r.error ? Json(*r.error) : Json(nullptr)},
              {"counts",
               {{"train_rows", r.counts.train_rows},
                {"test_rows", r.counts.test_rows},
                {"poisoned_rows", r.counts.poisoned_rows},
                {"relabeled", r.counts.relabeled},
                {"removed", r.counts.removed},
                {"adversarial", r.counts.adversarial}}},
              {"wall_time_seconds", r.wall_time_seconds}};
    return j;
}

inline CellResult cell_result_from_json(const Json& j) {
    CellResult r;
    r.cell.dataset = j.at("dataset").get<std::string>();
    r.cell.model = j.at("model").get<std::string>();
    r.cell.attack = parse_attack_kind(j.at("attack").get<std::string>());
    r.cell.delta_l = j.at("delta_l").get<double>();
    r.cell.seed = j.at("seed").get<std::uint64_t>();
    r.cell.variant = parse_variant(j.at("variant").get<std::string>());
    r.cell.cell_seed = j.at("cell_seed").get<std::uint64_t>();
    r.hash = j.at("hash").get<std::string>();
    if (!j.at("metrics").is_null()) r.metrics = metrics_from_json(j.at("metrics"));
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    const auto& c = j.at("counts");
    r.counts = {c.at("train_rows").get<std::size_t>(), c.at("test_rows").get<std::size_t>(),
                c.at("poisoned_rows").get<std::size_t>(), c.at("relabeled").get<std::size_t>(),
                c.at("removed").get<std::size_t>(), c.at("adversarial").get<std::size_t>()};
    r.wall_time_seconds = j.value("wall_time_seconds", 0.0);
    return r;
}

inline Json artifacts_to_json(const CellRun& run) {
    Json j = {{"hash", run.result.hash}, {"result", to_json(run.result)}};
    j["poison_record"] = run.record ? to_json(*run.record) : Json(nullptr);
    j["sanitization"] = run.sanitization ? to_json(*run.sanitization) : Json(nullptr);
    j["adversarial"] = adversarial_rows_to_json(run.adversarial);
    return j;
}

// ---------------------------------------------------------------------------
// Matrix runner

struct MatrixOptions {
    std::size_t workers = 1;
    /// Stop after computing this many new cells (0: no limit). Simulates an
    /// interrupted run.
    std::size_t max_new_cells = 0;
    bool write_artifacts = true;
    std::function<void(const CellResult&, std::size_t done, std::size_t total)> on_cell;
};

struct MatrixReport {
    std::vector<CellResult> results;  // plan order; cells not yet run are absent
    std::size_t cached = 0;
    std::size_t computed = 0;
    std::vector<std::string> warnings;  // corrupt or stale cache entries
    bool complete = false;
};

inline constexpr std::string_view kResultsFile = "results.jsonl";

/// Executes every cell without a cached result (matched by content hash) on a
/// bounded worker pool. Finished cells are appended to results.jsonl as they
/// complete; at the end the file is rewritten in plan order. Safe to
/// interrupt and rerun.
inline MatrixReport run_matrix(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                               const MatrixOptions& opts = {}) {
    namespace fs = std::filesystem;
    const auto cells = plan_cells(spec);
    std::error_code ec;
    fs::create_directories(out_dir / "artifacts", ec);
    if (ec) throw LoadError(LoadError::Kind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    const auto results_path = out_dir / kResultsFile;

    MatrixReport report;
    std::map<std::string, CellResult> cached;
    if (fs::exists(results_path)) {
        std::ifstream in(results_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                auto r = cell_result_from_json(Json::parse(line));
                cached.insert_or_assign(r.hash, std::move(r));
            } catch (const std::exception& e) {
                report.warnings.push_back("results.jsonl line " + std::to_string(line_no) + " is corrupt (" + e.what() +
                                          "); the cell will be recomputed");
            }
        }
    }

    std::vector<std::optional<CellResult>> slots(cells.size());
    std::vector<std::size_t> pending;
    std::set<std::string> planned;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto h = cell_hash(spec, cells[i]);
        planned.insert(h);
        auto it = cached.find(h);
        if (it != cached.end() && it->second.cell.coordinates() == cells[i].coordinates()) {
            slots[i] = it->second;
            ++report.cached;
        } else {
            pending.push_back(i);
        }
    }
    for (const auto& [h, r] : cached)
        if (!planned.count(h)) report.warnings.push_back("dropping stale result " + h + " (not in the current plan)");

    if (opts.max_new_cells > 0 && pending.size() > opts.max_new_cells) pending.resize(opts.max_new_cells);

    std::ofstream log(results_path, std::ios::app);
    if (!log) throw LoadError(LoadError::Kind::Io, "cannot write " + results_path.string());
    std::mutex write_mu;
    std::atomic<std::size_t> next{0};
    std::size_t done = report.cached;
    StageCache cache;
    auto worker = [&] {
        while (true) {
            const auto k = next.fetch_add(1);
            if (k >= pending.size()) return;
            const auto idx = pending[k];
            auto run = run_cell(spec, cells[idx], cache);
            if (opts.write_artifacts) {
                try {
                    write_json_file((out_dir / "artifacts" / (run.result.hash + ".json")).string(), artifacts_to_json(run));
                } catch (const std::exception& e) {
                    std::lock_guard lock(write_mu);
                    report.warnings.push_back(std::string("artifact write failed: ") + e.what());
                }
            }
            std::lock_guard lock(write_mu);
            log << to_json(run.result).dump() << '\n' << std::flush;
            ++done;
            if (opts.on_cell) opts.on_cell(run.result, done, cells.size());
            slots[idx] = std::move(run.result);
        }
    };
    const auto n_workers = std::max<std::size_t>(1, std::min(opts.workers, std::max<std::size_t>(1, pending.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    log.close();
    report.computed = pending.size();

    // Canonical rewrite: plan order, current plan only.
    const auto tmp = out_dir / "results.jsonl.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw LoadError(LoadError::Kind::Io, "cannot write " + tmp.string());
        for (const auto& s : slots)
            if (s) out << to_json(*s).dump() << '\n';
    }
    fs::rename(tmp, results_path);

    for (auto& s : slots)
        if (s) report.results.push_back(std::move(*s));
    report.complete = report.results.size() == cells.size();
    return report;
}

/// Reads a results file (corrupt lines are skipped).
inline std::vector<CellResult> load_results(const std::filesystem::path& path_or_dir) {
    auto path = path_or_dir;
    if (std::filesystem::is_directory(path)) path /= kResultsFile;
    std::ifstream in(path);
    if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path.string());
    std::vector<CellResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(cell_result_from_json(Json::parse(line)));
        } catch (const std::exception&) {
        }
    }
    return out;
}

/// A result line with the wall-clock field removed, for determinism checks.
inline std::string deterministic_line(const CellResult& r) {
    auto j = to_json(r);
    j.erase("wall_time_seconds");
    return j.dump();
}

// ---------------------------------------------------------------------------
// Aggregation

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"accuracy", "recall_macro", "f1_macro", "detection_rate", "correction_rate", "fdr"};
    return names;
}

inline std::optional<double> metric_value(const MetricsBundle& b, std::string_view name) {
    if (name == "accuracy") return b.accuracy;
    if (name == "recall_macro") return b.recall_macro;
    if (name == "f1_macro") return b.f1_macro;
    if (name == "detection_rate") return b.detection_rate;
    if (name == "correction_rate") return b.correction_rate;
    if (name == "fdr") return b.fdr;
    throw InvalidArgument("unknown metric '" + std::string(name) + "'");
}

struct SummaryRow {
    std::string dataset;
    std::string model;
    AttackKind attack = AttackKind::None;
    double delta_l = 0.0;
    Variant variant = Variant::PoisonedBaseline;
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single seed
    std::size_t n_seeds = 0;
    bool flagged = false;  // the group contained errored cells, which are excluded
};

/// Mean and standard deviation across seeds for each
/// (dataset, model, attack, level, variant, metric).
inline std::vector<SummaryRow> summarize(const std::vector<CellResult>& results) {
    if (results.empty()) throw InvalidArgument("summarize: no results");
    using Key = std::tuple<std::string, std::string, AttackKind, double, Variant>;
    std::map<Key, std::vector<const CellResult*>> groups;
    for (const auto& r : results)
        groups[{r.cell.dataset, r.cell.model, r.cell.attack, r.cell.delta_l, r.cell.variant}].push_back(&r);
    std::vector<SummaryRow> rows;
    for (const auto& [key, members] : groups) {
        const bool flagged = std::any_of(members.begin(), members.end(), [](const CellResult* r) { return r->error.has_value(); });
        for (const auto& name : metric_names()) {
            std::vector<double> values;
            for (const auto* r : members)
                if (r->metrics)
                    if (auto v = metric_value(*r->metrics, name)) values.push_back(*v);
            if (values.empty()) continue;
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
            rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), std::get<4>(key), name,
                            mean, sd, values.size(), flagged});
        }
    }
    return rows;
}

struct BoundsRow {
    std::string model;
    std::string dataset;
    AttackKind attack = AttackKind::None;
    double dr_lb = 0.0, dr_ub = 0.0;
    double cr_lb = 0.0, cr_ub = 0.0;
    std::size_t cells = 0;
};

/// Lower and upper bounds of DR and CR across poisoning levels and seeds for
/// every (model, dataset, attack).
inline std::vector<BoundsRow> bounds_table(const std::vector<CellResult>& results) {
    if (results.empty()) throw InvalidArgument("bounds_table: no results");
    using Key = std::tuple<std::string, std::string, AttackKind>;
    std::map<Key, BoundsRow> rows;
    for (const auto& r : results) {
        if (!r.metrics || !r.metrics->detection_rate || !r.metrics->correction_rate) continue;
        const Key key{r.cell.model, r.cell.dataset, r.cell.attack};
        const double dr = *r.metrics->detection_rate, cr = *r.metrics->correction_rate;
        auto it = rows.find(key);
        if (it == rows.end()) {
            rows.emplace(key, BoundsRow{r.cell.model, r.cell.dataset, r.cell.attack, dr, dr, cr, cr, 1});
        } else {
            auto& b = it->second;
            b.dr_lb = std::min(b.dr_lb, dr);
            b.dr_ub = std::max(b.dr_ub, dr);
            b.cr_lb = std::min(b.cr_lb, cr);
            b.cr_ub = std::max(b.cr_ub, cr);
            ++b.cells;
        }
    }
    std::vector<BoundsRow> out;
    for (auto& [k, v] : rows) out.push_back(v);
    return out;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "dataset,model,attack,delta_l,variant,metric,mean,std,n_seeds\n";
    for (const auto& r : rows)
        out << r.dataset << ',' << r.model << ',' << to_string(r.attack) << ',' << level_key(r.delta_l) << ','
            << to_string(r.variant) << ',' << r.metric << ',' << format_number(r.mean) << ',' << format_number(r.stddev)
            << ',' << r.n_seeds << '\n';
    return out.str();
}

inline std::string summary_markdown(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "| dataset | model | attack | delta_l | variant | metric | mean | std | n_seeds |\n";
    out << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows)
        out << "| " << r.dataset << " | " << r.model << " | " << to_string(r.attack) << " | " << level_key(r.delta_l)
            << " | " << to_string(r.variant) << " | " << r.metric << " | " << format_number(r.mean) << " | "
            << format_number(r.stddev) << " | " << r.n_seeds << (r.flagged ? " (errors excluded)" : "") << " |\n";
    return out.str();
}

inline std::string bounds_csv(const std::vector<BoundsRow>& rows) {
    std::ostringstream out;
    out << "model,dataset,attack,dr_lb,dr_ub,cr_lb,cr_ub,cells\n";
    for (const auto& r : rows)
        out << r.model << ',' << r.dataset << ',' << to_string(r.attack) << ',' << format_number(r.dr_lb) << ','
            << format_number(r.dr_ub) << ',' << format_number(r.cr_lb) << ',' << format_number(r.cr_ub) << ',' << r.cells
            << '\n';
    return out.str();
}

/// Detection/correction bounds laid out with one DR row and one CR row per
/// (model, dataset) and an LB/UB column pair per attack, in percent.
inline std::string bounds_markdown(const std::vector<BoundsRow>& rows) {
    std::set<AttackKind> attacks;
    std::set<std::pair<std::string, std::string>> groups;
    std::map<std::tuple<std::string, std::string, AttackKind>, const BoundsRow*> index;
    for (const auto& r : rows) {
        attacks.insert(r.attack);
        groups.insert({r.model, r.dataset});
        index[{r.model, r.dataset, r.attack}] = &r;
    }
    std::ostringstream out;
    out << "| model | dataset | rate |";
    for (auto a : attacks) out << ' ' << to_string(a) << " LB | " << to_string(a) << " UB |";
    out << "\n|---|---|---|";
    for (std::size_t i = 0; i < attacks.size(); ++i) out << "---|---|";
    out << '\n';
    auto pct = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
        return std::string(buf);
    };
    for (const auto& [model, dataset] : groups) {
        for (int rate = 0; rate < 2; ++rate) {
            out << "| " << model << " | " << dataset << " | " << (rate == 0 ? "DR" : "CR") << " |";
            for (auto a : attacks) {
                auto it = index.find({model, dataset, a});
                if (it == index.end()) {
                    out << " - | - |";
                    continue;
                }
                const auto* b = it->second;
                out << ' ' << pct(rate == 0 ? b->dr_lb : b->cr_lb) << " | " << pct(rate == 0 ? b->dr_ub : b->cr_ub) << " |";
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace securelearn
