// securelearn command-line front end. Every subcommand is a thin wrapper over
// the library. Exit codes: 0 success, 1 usage error, 2 runtime error.
#include "securelearn/securelearn.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace sl = securelearn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw sl::LoadError(sl::LoadError::Kind::Io, "cannot write " + out_path);
    out << text;
}

sl::Dataset load_source(const std::string& kind, const std::string& path, const std::string& labels) {
    if (kind == "iris") return sl::load_iris_csv(path);
    if (kind == "mnist") {
        if (labels.empty()) throw UsageError("--labels is required for --dataset mnist");
        return sl::load_idx_pair(path, labels);
    }
    if (kind == "usps") return sl::load_usps_text(path);
    if (kind == "json") return sl::dataset_from_json(sl::read_json_file(path));
    throw UsageError("unknown dataset kind '" + kind + "'");
}

sl::Json describe(const sl::Dataset& ds) {
    const auto counts = ds.class_counts();
    return {{"rows", ds.rows()}, {"features", ds.cols()}, {"classes", ds.class_count},
            {"class_counts", counts}, {"provenance", ds.provenance}};
}

std::string pretty(const sl::Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"securelearn: poisoning attacks, k-NN/z-score sanitization, feature-oriented adversarial training"};
    app.footer(
        "Defaults: k=7, gamma=0.4, g=3, c=0.01, b=0.001, tau=0.3, q=0.1; "
        "poisoning levels delta_l in {0.10, 0.15, 0.20}.\n"
        "Exit codes: 0 success, 1 usage error, 2 runtime error.");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // data ------------------------------------------------------------------
    auto* data = app.add_subcommand("data", "Inspect, split or synthesize datasets");
    data->require_subcommand(1);

    std::string ds_kind, ds_path, ds_labels, out_path;
    auto* inspect = data->add_subcommand("inspect", "Print row, feature and class counts");
    inspect->add_option("--dataset", ds_kind, "iris | mnist | usps | json")->required();
    inspect->add_option("--path", ds_path, "Data file (IDX images for mnist)")->required();
    inspect->add_option("--labels", ds_labels, "IDX labels file (mnist)");

    std::string train_out, test_out;
    double fraction = 0.75;
    std::uint64_t seed = 0;
    std::size_t per_class = 0;
    bool standardize = false;
    auto* dsplit = data->add_subcommand("split", "Subsample, split and optionally standardize into train/test JSON");
    dsplit->add_option("--dataset", ds_kind, "iris | mnist | usps | json")->required();
    dsplit->add_option("--path", ds_path, "Data file")->required();
    dsplit->add_option("--labels", ds_labels, "IDX labels file (mnist)");
    dsplit->add_option("--fraction", fraction, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    dsplit->add_option("--per-class", per_class, "Stratified subsample size per class (0: all rows)")->capture_default_str();
    dsplit->add_option("--seed", seed, "Seed")->capture_default_str();
    dsplit->add_flag("--standardize", standardize, "Standardize both sides with training statistics");
    dsplit->add_option("--train-out", train_out, "Training split JSON")->required();
    dsplit->add_option("--test-out", test_out, "Test split JSON")->required();

    int synth_classes = 3;
    std::size_t synth_per_class = 50, synth_features = 2;
    double synth_spread = 0.5;
    auto* dsynth = data->add_subcommand("synth", "Write Gaussian blobs as dataset JSON");
    dsynth->add_option("--classes", synth_classes, "Class count")->capture_default_str()->check(CLI::Range(2, 1000));
    dsynth->add_option("--per-class", synth_per_class, "Rows per class")->capture_default_str();
    dsynth->add_option("--features", synth_features, "Feature count")->capture_default_str();
    dsynth->add_option("--spread", synth_spread, "Standard deviation around each center")->capture_default_str();
    dsynth->add_option("--seed", seed, "Seed")->capture_default_str();
    dsynth->add_option("--out", out_path, "Output JSON")->required();

    // poison ----------------------------------------------------------------
    std::string attack, in_path, record_path;
    double delta_l = 0.15;
    auto* poison = app.add_subcommand("poison", "Poison a training set and write the ground-truth record");
    poison->add_option("--attack", attack, "rlpa | subp | oop")->required()->check(CLI::IsMember({"rlpa", "subp", "oop"}));
    poison->add_option("--delta-l", delta_l, "Poisoning level; experiments use 0.10, 0.15, 0.20")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    poison->add_option("--seed", seed, "Seed")->capture_default_str();
    poison->add_option("--in", in_path, "Training set JSON")->required();
    poison->add_option("--out", out_path, "Poisoned set JSON")->required();
    poison->add_option("--record", record_path, "Poison record JSON")->required();

    // sanitize --------------------------------------------------------------
    sl::SanitizerConfig scfg;
    std::string distance = "euclidean", zscore = "feature_max", log_path;
    auto* sanitize = app.add_subcommand("sanitize", "k-NN relabeling followed by z-score outlier removal");
    sanitize->add_option("--in", in_path, "Dataset JSON")->required();
    sanitize->add_option("--k", scfg.k, "Neighbours")->capture_default_str()->check(CLI::PositiveNumber);
    sanitize->add_option("--gamma", scfg.gamma, "Vote-fraction threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    sanitize->add_option("--g", scfg.g, "Deviation limit")->capture_default_str()->check(CLI::PositiveNumber);
    sanitize->add_option("--distance", distance, "euclidean | manhattan")
        ->capture_default_str()
        ->check(CLI::IsMember({"euclidean", "manhattan"}));
    sanitize->add_option("--zscore", zscore, "feature_max | row_norm")
        ->capture_default_str()
        ->check(CLI::IsMember({"feature_max", "row_norm"}));
    sanitize->add_option("--out", out_path, "Sanitized dataset JSON")->required();
    sanitize->add_option("--log", log_path, "Sanitization outcome JSON");

    // train -----------------------------------------------------------------
    std::string model_kind;
    sl::Hyperparams hp;
    sl::FortConfig fcfg;
    bool use_fort = false;
    auto* train = app.add_subcommand("train", "Fit a model, optionally with feature-oriented adversarial training");
    train->add_option("--model", model_kind, "dt | rf | gnb | mlp")->required()->check(CLI::IsMember({"dt", "rf", "gnb", "mlp", "nn"}));
    train->add_option("--in", in_path, "Training set JSON")->required();
    train->add_option("--seed", seed, "Seed")->capture_default_str();
    train->add_option("--out", out_path, "Model JSON")->required();
    train->add_flag("--fort", use_fort, "Augment with perturbed boundary rows and refit");
    train->add_option("--c", fcfg.c, "Perturbation size")->capture_default_str()->check(CLI::PositiveNumber);
    train->add_option("--b", fcfg.b, "Offset inside the sign")->capture_default_str();
    train->add_option("--tau", fcfg.tau, "Margin threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    train->add_option("--q", fcfg.q, "Augmentation budget fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    train->add_option("--max-depth", hp.max_depth, "Tree depth limit")->capture_default_str();
    train->add_option("--trees", hp.n_trees, "Forest size")->capture_default_str();
    train->add_option("--hidden", hp.hidden_units, "MLP hidden units (0: 64, or 128 for d >= 100)")->capture_default_str();
    train->add_option("--epochs", hp.epochs, "MLP epochs (0: 200, or 30 for d >= 100)")->capture_default_str();
    train->add_option("--lr", hp.learning_rate, "MLP learning rate")->capture_default_str();
    train->add_option("--batch", hp.batch_size, "MLP batch size")->capture_default_str();

    // eval ------------------------------------------------------------------
    std::string model_path, test_path, sanitize_log;
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a test set");
    eval->add_option("--model", model_path, "Model JSON")->required();
    eval->add_option("--test", test_path, "Test set JSON")->required();
    eval->add_option("--record", record_path, "Poison record JSON (enables DR/CR with --sanitize-log)");
    eval->add_option("--sanitize-log", sanitize_log, "Sanitization outcome JSON");
    eval->add_option("--out", out_path, "Metrics JSON (default: stdout)");

    // matrix ----------------------------------------------------------------
    std::string config_path, out_dir;
    std::size_t workers = 1;
    auto* matrix = app.add_subcommand("matrix", "Run the evaluation matrix");
    matrix->require_subcommand(1);
    auto add_matrix_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Experiment JSON")->required();
        sub->add_option("--out", out_dir, "Output directory")->required();
        sub->add_option("--workers", workers, "Worker threads")->capture_default_str()->check(CLI::Range(1, 256));
    };
    auto* mrun = matrix->add_subcommand("run", "Run every cell without a cached result");
    auto* mresume = matrix->add_subcommand("resume", "Continue an interrupted run in an existing output directory");
    add_matrix_opts(mrun);
    add_matrix_opts(mresume);

    // report ----------------------------------------------------------------
    std::string format = "csv";
    bool bounds = false;
    auto* report = app.add_subcommand("report", "Aggregate a results directory");
    report->add_option("--in", in_path, "Results directory or results.jsonl")->required();
    report->add_option("--format", format, "csv | md")->capture_default_str()->check(CLI::IsMember({"csv", "md"}));
    report->add_flag("--bounds", bounds, "Detection/correction LB/UB per (model, dataset, attack)");
    report->add_option("--out", out_path, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (inspect->parsed()) {
            std::cout << pretty(describe(load_source(ds_kind, ds_path, ds_labels)));
        } else if (dsplit->parsed()) {
            auto ds = load_source(ds_kind, ds_path, ds_labels);
            if (per_class > 0) ds = sl::stratified_subsample(ds, per_class, sl::derive_seed(seed, "subsample"));
            auto [tr, te] = sl::split(ds, fraction, seed);
            if (standardize) {
                const auto params = sl::standardize_fit(tr);
                tr = sl::standardize_apply(tr, params);
                te = sl::standardize_apply(te, params);
            }
            sl::write_json_file(train_out, sl::to_json(tr));
            sl::write_json_file(test_out, sl::to_json(te));
            std::cout << pretty({{"train", describe(tr)}, {"test", describe(te)}});
        } else if (dsynth->parsed()) {
            const auto ds = sl::synth_blobs(synth_classes, synth_per_class, synth_features, synth_spread, seed);
            sl::write_json_file(out_path, sl::to_json(ds));
            std::cout << pretty(describe(ds));
        } else if (poison->parsed()) {
            const auto ds = sl::dataset_from_json(sl::read_json_file(in_path));
            const auto result = sl::poison(sl::parse_attack_kind(attack), ds, delta_l, seed);
            sl::write_json_file(out_path, sl::to_json(result.poisoned));
            sl::write_json_file(record_path, sl::to_json(result.record), 2);
            std::cout << "flipped " << result.record.flipped.size() << ", injected " << result.record.injected.size() << "\n";
        } else if (sanitize->parsed()) {
            scfg.distance = sl::parse_distance_metric(distance);
            scfg.zscore = sl::parse_zscore_mode(zscore);
            const auto ds = sl::dataset_from_json(sl::read_json_file(in_path));
            const auto outcome = sl::sanitize(ds, scfg);
            sl::write_json_file(out_path, sl::to_json(outcome.sanitized));
            if (!log_path.empty()) sl::write_json_file(log_path, sl::to_json(outcome), 2);
            std::cout << "relabeled " << outcome.relabeled.size() << ", removed " << outcome.removed.size() << ", kept "
                      << outcome.sanitized.rows() << "\n";
        } else if (train->parsed()) {
            const auto ds = sl::dataset_from_json(sl::read_json_file(in_path));
            const auto kind = sl::parse_model_kind(model_kind);
            sl::TrainedModel model;
            if (use_fort) {
                auto fr = sl::fort_fit(kind, ds, hp, fcfg, seed);
                std::cout << "adversarial rows " << fr.adversarial_count() << "\n";
                model = std::move(fr.model);
            } else {
                model = sl::fit(kind, ds, hp, seed);
            }
            sl::write_json_file(out_path, sl::to_json(model));
            std::cout << "training accuracy " << sl::accuracy_on(model, ds) << "\n";
        } else if (eval->parsed()) {
            const auto model = sl::model_from_json(sl::read_json_file(model_path));
            const auto test = sl::dataset_from_json(sl::read_json_file(test_path));
            if (record_path.empty() != sanitize_log.empty())
                throw UsageError("--record and --sanitize-log must be given together");
            std::optional<sl::PoisonRecord> record;
            std::optional<sl::SanitizationOutcome> outcome;
            if (!record_path.empty()) {
                record = sl::poison_record_from_json(sl::read_json_file(record_path));
                outcome = sl::sanitization_outcome_from_json(sl::read_json_file(sanitize_log));
            }
            const auto metrics = sl::evaluate(test.labels, sl::predict(model, test.features), test.class_count,
                                              record ? &*record : nullptr, outcome ? &*outcome : nullptr);
            emit(pretty(sl::to_json(metrics)), out_path);
        } else if (mrun->parsed() || mresume->parsed()) {
            const auto spec = sl::load_experiment_spec(config_path);
            if (mresume->parsed() && !std::filesystem::exists(std::filesystem::path(out_dir) / sl::kResultsFile))
                throw UsageError("nothing to resume: " + out_dir + " has no results file");
            sl::MatrixOptions opts;
            opts.workers = workers;
            opts.on_cell = [](const sl::CellResult& r, std::size_t done, std::size_t total) {
                std::cerr << "[" << done << "/" << total << "] " << r.cell.dataset << " " << r.cell.model << " "
                          << sl::to_string(r.cell.attack) << " " << sl::level_key(r.cell.delta_l) << " seed "
                          << r.cell.seed << " " << sl::to_string(r.cell.variant)
                          << (r.error ? " ERROR: " + *r.error : std::string{}) << "\n";
            };
            const auto rep = sl::run_matrix(spec, out_dir, opts);
            for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
            std::size_t errors = 0;
            for (const auto& r : rep.results) errors += r.error ? 1 : 0;
            std::cout << "cells " << rep.results.size() << " (cached " << rep.cached << ", computed " << rep.computed
                      << ", errors " << errors << ")\n";
        } else if (report->parsed()) {
            const auto results = sl::load_results(in_path);
            std::string text;
            if (bounds) {
                const auto rows = sl::bounds_table(results);
                text = format == "md" ? sl::bounds_markdown(rows) : sl::bounds_csv(rows);
            } else {
                const auto rows = sl::summarize(results);
                text = format == "md" ? sl::summary_markdown(rows) : sl::summary_csv(rows);
            }
            emit(text, out_path);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
