// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include "securelearn/securelearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace securelearn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::string kData = SECURELEARN_DATA_DIR;

// ---------------------------------------------------------------------------
// Shared IRIS experiment

ModelSpec model(ModelKind k) {
    ModelSpec m;
    m.kind = k;
    if (k == ModelKind::MLP) m.hyperparams.learning_rate = 0.1;
    return m;
}

DatasetSpec iris_dataset() {
    DatasetSpec d;
    d.name = "iris";
    d.kind = "iris";
    d.path = kData + "/iris.csv";
    return d;
}

ExperimentSpec iris_spec() {
    ExperimentSpec s;
    s.master_seed = 20240101;
    s.datasets = {iris_dataset()};
    for (auto k : {ModelKind::DT, ModelKind::RF, ModelKind::GNB, ModelKind::MLP}) s.models.push_back(model(k));
    return s;
}

using ResultIndex = std::map<std::tuple<std::string, AttackKind, std::string, std::uint64_t, Variant>, CellResult>;

ResultIndex index_results(const std::vector<CellResult>& rs) {
    ResultIndex idx;
    for (const auto& r : rs) idx[{r.cell.model, r.cell.attack, level_key(r.cell.delta_l), r.cell.seed, r.cell.variant}] = r;
    return idx;
}

const MetricsBundle& metrics_of(const ResultIndex& idx, const std::string& m, AttackKind a, double l, std::uint64_t s,
                                Variant v) {
    const auto it = idx.find({m, a, level_key(l), s, v});
    if (it == idx.end()) throw Error("missing cell " + m + "/" + to_string(a) + "/" + level_key(l));
    if (!it->second.metrics) throw Error("cell errored: " + it->second.error.value_or("?"));
    return *it->second.metrics;
}

struct IrisMatrix {
    ResultIndex idx;
    double seconds = 0.0;
};

const IrisMatrix& iris_matrix() {
    static const IrisMatrix m = [] {
        IrisMatrix out;
        const auto t0 = std::chrono::steady_clock::now();
        StageCache cache;
        const auto spec = iris_spec();
        std::vector<CellResult> rs;
        for (const auto& c : plan_cells(spec)) rs.push_back(run_cell(spec, c, cache).result);
        out.idx = index_results(rs);
        out.seconds = seconds_since(t0);
        return out;
    }();
    return m;
}

const std::vector<AttackKind> kAttacks{AttackKind::RLPA, AttackKind::SubP, AttackKind::OOP};
const std::vector<double> kLevels{0.10, 0.15, 0.20};
const std::vector<std::string> kModels{"dt", "rf", "gnb", "mlp"};

// ---------------------------------------------------------------------------
// 1. Sanitizer oracles

std::vector<Label> oracle_relabel(const Matrix& x, const std::vector<Label>& y, int classes, std::size_t k, double gamma) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<Label> out = y;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dist(n);
        for (std::size_t j = 0; j < n; ++j)
            dist[j] = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        std::vector<int> votes(static_cast<std::size_t>(classes), 0);
        for (std::size_t t = 0; t < k; ++t) ++votes[static_cast<std::size_t>(y[order[t]])];
        int best = 0;
        for (int c = 1; c < classes; ++c)
            if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
        if (static_cast<double>(votes[static_cast<std::size_t>(best)]) / static_cast<double>(k) >= gamma) out[i] = best;
    }
    return out;
}

std::vector<bool> oracle_outliers(const Matrix& x, double g, bool row_norm) {
    const auto n = x.rows(), d = x.cols();
    std::vector<bool> out(static_cast<std::size_t>(n), false);
    if (row_norm) {
        std::vector<double> dist(static_cast<std::size_t>(n));
        const RowVector mu = x.colwise().sum() / static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = (x.row(i) - mu).norm();
        const double m = std::accumulate(dist.begin(), dist.end(), 0.0) / static_cast<double>(n);
        double v = 0.0;
        for (double q : dist) v += (q - m) * (q - m);
        const double sd = std::sqrt(v / static_cast<double>(n));
        for (std::size_t i = 0; i < dist.size(); ++i) out[i] = sd > 0 && std::abs((dist[i] - m) / sd) > g;
        return out;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        const double m = x.col(j).sum() / static_cast<double>(n);
        const double sd = std::sqrt((x.col(j).array() - m).square().sum() / static_cast<double>(n));
        if (sd == 0.0) continue;
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs((x(i, j) - m) / sd) > g) out[static_cast<std::size_t>(i)] = true;
    }
    return out;
}

Outcome criterion_sanitizer_oracle() {
    std::mt19937_64 gen(101);
    std::size_t relabel_mismatch = 0, removal_mismatch = 0, relabels = 0, removals = 0;
    for (int t = 0; t < 50; ++t) {
        const auto n = std::uniform_int_distribution<int>(20, 200)(gen);
        const auto d = std::uniform_int_distribution<int>(1, 8)(gen);
        const int classes = std::uniform_int_distribution<int>(2, 4)(gen);
        const bool integer_grid = t % 2 == 0;  // forces distance ties
        Matrix x(n, d);
        std::vector<Label> y(static_cast<std::size_t>(n));
        std::normal_distribution<double> nd(0.0, 1.0);
        std::uniform_int_distribution<int> grid(-3, 3), lab(0, classes - 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = lab(gen);
            for (Eigen::Index j = 0; j < d; ++j)
                x(i, j) = integer_grid ? grid(gen) : nd(gen) + y[static_cast<std::size_t>(i)];
            if (!integer_grid && i % 37 == 0) x(i, 0) += 8.0;  // plant outliers
        }
        SanitizerConfig cfg;
        cfg.k = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 9)(gen));
        cfg.gamma = std::uniform_real_distribution<double>(0.2, 1.0)(gen);
        cfg.g = std::uniform_real_distribution<double>(1.5, 3.5)(gen);
        cfg.zscore = t % 4 == 1 ? ZScoreMode::RowNorm : ZScoreMode::FeatureMax;
        const auto ds = make_dataset(x, y, classes);

        const auto [relabeled, log] = relabel(ds, cfg);
        const auto expect = oracle_relabel(x, y, classes, cfg.k, cfg.gamma);
        for (std::size_t i = 0; i < y.size(); ++i) relabel_mismatch += relabeled.labels[i] != expect[i];
        std::size_t changed = 0;
        for (std::size_t i = 0; i < y.size(); ++i) changed += expect[i] != y[i];
        relabel_mismatch += changed != log.size();
        relabels += log.size();

        const auto oracle = oracle_outliers(x, cfg.g, cfg.zscore == ZScoreMode::RowNorm);
        if (std::all_of(oracle.begin(), oracle.end(), [](bool b) { return b; })) continue;
        const auto removal = remove_outliers(ds, cfg);
        std::vector<bool> got(oracle.size(), false);
        for (const auto& r : removal.removed) got[r.row] = true;
        for (std::size_t i = 0; i < oracle.size(); ++i) removal_mismatch += got[i] != oracle[i];
        removals += removal.removed.size();
    }
    return {relabel_mismatch == 0 && removal_mismatch == 0,
            "relabel mismatches " + std::to_string(relabel_mismatch) + " (of " + std::to_string(relabels) +
                " relabels), removal mismatches " + std::to_string(removal_mismatch) + " (of " +
                std::to_string(removals) + " removals)"};
}

// ---------------------------------------------------------------------------
// 2. Perturbation

Outcome criterion_perturbation() {
    std::mt19937_64 gen(202);
    FortConfig cfg;
    std::size_t wrong = 0, coords = 0;
    double worst_norm_gap = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int d = std::uniform_int_distribution<int>(1, 16)(gen);
        RowVector x(d);
        std::vector<double> f(static_cast<std::size_t>(d));
        std::normal_distribution<double> nd(0.0, 2.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int j = 0; j < d; ++j) {
            x(j) = t % 10 == 0 && j == 0 ? 0.0 : nd(gen);
            f[static_cast<std::size_t>(j)] = u(gen);
        }
        const auto out = perturb(x, f, cfg);
        double inf_norm = 0.0;
        for (int j = 0; j < d; ++j) {
            const double arg = f[static_cast<std::size_t>(j)] * x(j) + cfg.b;
            const double step = arg > 0.0 ? cfg.c : arg < 0.0 ? -cfg.c : cfg.c;
            wrong += out(j) != x(j) + step;
            inf_norm = std::max(inf_norm, std::abs(out(j) - x(j)));
            ++coords;
        }
        // Subtraction re-rounds; allow the representable error of |x| + c.
        worst_norm_gap = std::max(worst_norm_gap, std::abs(inf_norm - cfg.c) / (std::abs(x.cwiseAbs().maxCoeff()) + cfg.c));
    }
    const bool norm_ok = worst_norm_gap <= 4.0 * std::numeric_limits<double>::epsilon();
    return {wrong == 0 && norm_ok, std::to_string(wrong) + " of " + std::to_string(coords) +
                                       " coordinates differ from x + c*sign; max relative |inf-norm - c| " +
                                       fmt("%.2e", worst_norm_gap)};
}

// ---------------------------------------------------------------------------
// 3. MLP gradient check

double oracle_loss(const MlpWeights& w, const Matrix& x, const std::vector<Label>& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<double> hidden(static_cast<std::size_t>(w.w1.cols()));
        for (Eigen::Index h = 0; h < w.w1.cols(); ++h) {
            double s = w.b1(h);
            for (Eigen::Index j = 0; j < x.cols(); ++j) s += x(i, j) * w.w1(j, h);
            hidden[static_cast<std::size_t>(h)] = s > 0 ? s : 0;
        }
        std::vector<double> logit(static_cast<std::size_t>(w.w2.cols()));
        for (Eigen::Index c = 0; c < w.w2.cols(); ++c) {
            double s = w.b2(c);
            for (Eigen::Index h = 0; h < w.w2.rows(); ++h) s += hidden[static_cast<std::size_t>(h)] * w.w2(h, c);
            logit[static_cast<std::size_t>(c)] = s;
        }
        double z = 0.0;
        for (double l : logit) z += std::exp(l);
        loss += std::log(z) - logit[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
    }
    return loss / static_cast<double>(x.rows());
}

Outcome criterion_gradient() {
    std::mt19937_64 gen(303);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MlpWeights w{Matrix(4, 6), RowVector(6), Matrix(6, 3), RowVector(3)};
    for (Eigen::Index i = 0; i < w.w1.size(); ++i) w.w1.data()[i] = u(gen);
    for (Eigen::Index i = 0; i < w.w2.size(); ++i) w.w2.data()[i] = u(gen);
    for (Eigen::Index i = 0; i < w.b1.size(); ++i) w.b1(i) = 0.3 * u(gen);
    for (Eigen::Index i = 0; i < w.b2.size(); ++i) w.b2(i) = 0.3 * u(gen);
    Matrix x(5, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2.0 * u(gen);
    const std::vector<Label> y{0, 1, 2, 2, 1};
    const auto g = mlp_loss_and_gradient(w, x, y);
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t params = 0;
    auto sweep = [&](double* p, const double* grad, Eigen::Index size) {
        for (Eigen::Index i = 0; i < size; ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            const double up = oracle_loss(w, x, y);
            p[i] = keep - h;
            const double down = oracle_loss(w, x, y);
            p[i] = keep;
            const double num = (up - down) / (2 * h);
            const double denom = std::max({std::abs(num), std::abs(grad[i]), 1e-7});
            worst = std::max(worst, std::abs(num - grad[i]) / denom);
            ++params;
        }
    };
    sweep(w.w1.data(), g.grad.w1.data(), w.w1.size());
    sweep(w.b1.data(), g.grad.b1.data(), w.b1.size());
    sweep(w.w2.data(), g.grad.w2.data(), w.w2.size());
    sweep(w.b2.data(), g.grad.b2.data(), w.b2.size());
    const bool loss_ok = std::abs(g.loss - oracle_loss(w, x, y)) <= 1e-12;
    return {worst <= 1e-4 && loss_ok, std::to_string(params) + " parameters, max relative error " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 4. GNB / IRIS / OOP detection and correction band

Outcome criterion_gnb_oop_band() {
    const auto t0 = std::chrono::steady_clock::now();
    auto spec = iris_spec();
    spec.models = {model(ModelKind::GNB)};
    spec.attacks = {AttackKind::OOP};
    spec.variants = {Variant::SanitizeOnly};
    StageCache cache;
    double dr_min = 1.0, cr_min = 1.0, dr_max = 0.0, cr_max = 0.0;
    for (const auto& c : plan_cells(spec)) {
        const auto r = run_cell(spec, c, cache).result;
        if (!r.metrics) return {false, "cell error: " + r.error.value_or("?")};
        dr_min = std::min(dr_min, *r.metrics->detection_rate);
        dr_max = std::max(dr_max, *r.metrics->detection_rate);
        cr_min = std::min(cr_min, *r.metrics->correction_rate);
        cr_max = std::max(cr_max, *r.metrics->correction_rate);
    }
    const double secs = seconds_since(t0);
    return {dr_min >= 0.95 && cr_min >= 0.85 && secs < 10.0,
            "DR [" + fmt("%.3f", dr_min) + ", " + fmt("%.3f", dr_max) + "] need >= 0.95; CR [" + fmt("%.3f", cr_min) +
                ", " + fmt("%.3f", cr_max) + "] need >= 0.85; " + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------
// 5. Accuracy above 0.90 with the full pipeline

Outcome criterion_full_accuracy() {
    const auto t0 = std::chrono::steady_clock::now();
    auto spec = iris_spec();
    spec.levels = {0.15};
    spec.variants = {Variant::SecureLearnFull};
    StageCache cache;
    std::map<std::pair<std::string, AttackKind>, int> good;
    std::map<std::pair<std::string, AttackKind>, double> mean;
    for (const auto& c : plan_cells(spec)) {
        const auto r = run_cell(spec, c, cache).result;
        if (!r.metrics) return {false, "cell error: " + r.error.value_or("?")};
        good[{c.model, c.attack}] += r.metrics->accuracy >= 0.90;
        mean[{c.model, c.attack}] += r.metrics->accuracy / 5.0;
    }
    const double secs = seconds_since(t0);
    std::ostringstream failing;
    int bad = 0;
    for (const auto& [key, n] : good)
        if (n < 4) {
            ++bad;
            failing << ' ' << key.first << '/' << to_string(key.second) << '=' << n << "/5(mean " << fmt("%.3f", mean[key])
                    << ')';
        }
    return {bad == 0 && secs < 120.0, std::to_string(good.size() - static_cast<std::size_t>(bad)) + " of " +
                                          std::to_string(good.size()) + " cells pass" +
                                          (bad ? "; failing:" + failing.str() : std::string{}) + "; " +
                                          fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------
// 6. MLP recall / F1

Outcome criterion_mlp_recall_f1() {
    const auto& m = iris_matrix();
    double worst_recall = 1.0, worst_f1 = 1.0;
    std::string worst_cell;
    for (auto a : kAttacks)
        for (double l : kLevels) {
            double recall = 0.0, f1 = 0.0;
            for (std::uint64_t s = 0; s < 5; ++s) {
                const auto& b = metrics_of(m.idx, "mlp", a, l, s, Variant::SecureLearnFull);
                recall += b.recall_macro / 5.0;
                f1 += b.f1_macro / 5.0;
            }
            if (std::min(recall, f1) < std::min(worst_recall, worst_f1)) worst_cell = to_string(a) + "@" + level_key(l);
            worst_recall = std::min(worst_recall, recall);
            worst_f1 = std::min(worst_f1, f1);
        }
    return {worst_recall >= 0.95 && worst_f1 >= 0.95, "min mean recall " + fmt("%.3f", worst_recall) +
                                                          ", min mean F1 " + fmt("%.3f", worst_f1) + " (worst " +
                                                          worst_cell + ")"};
}

// ---------------------------------------------------------------------------
// 7. FORT lowers FDR

Outcome criterion_fort_fdr() {
    const auto& m = iris_matrix();
    double base = 0.0, fort = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        base += metrics_of(m.idx, "mlp", AttackKind::RLPA, 0.20, s, Variant::PoisonedBaseline).fdr / 5.0;
        fort += metrics_of(m.idx, "mlp", AttackKind::RLPA, 0.20, s, Variant::FortOnly).fdr / 5.0;
    }
    std::size_t cells = 0, not_worse = 0;
    for (const auto& name : kModels)
        for (auto a : kAttacks)
            for (double l : kLevels)
                for (std::uint64_t s = 0; s < 5; ++s) {
                    ++cells;
                    not_worse += metrics_of(m.idx, name, a, l, s, Variant::FortOnly).fdr <=
                                 metrics_of(m.idx, name, a, l, s, Variant::PoisonedBaseline).fdr;
                }
    const double share = static_cast<double>(not_worse) / static_cast<double>(cells);
    return {fort <= base - 0.10 && share >= 0.80,
            "MLP/RLPA@0.2 mean FDR " + fmt("%.3f", base) + " -> " + fmt("%.3f", fort) + " (need drop >= 0.10); " +
                std::to_string(not_worse) + "/" + std::to_string(cells) + " cells not worse (" + fmt("%.1f%%", 100 * share) +
                ", need >= 80%)"};
}

// ---------------------------------------------------------------------------
// 8. Clean-accuracy cost of FORT

Outcome criterion_clean_tradeoff() {
    auto spec = iris_spec();
    DatasetSpec blobs;
    blobs.name = "blobs";
    blobs.kind = "synth";
    blobs.synth_classes = 4;
    blobs.synth_per_class = 60;
    blobs.synth_features = 4;
    blobs.synth_spread = 1.5;
    blobs.synth_seed = 7;
    spec.datasets.push_back(blobs);
    spec.attacks = {AttackKind::None};
    spec.variants = {Variant::PoisonedBaseline, Variant::FortOnly};
    StageCache cache;
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> acc;  // plain, fort
    for (const auto& c : plan_cells(spec)) {
        const auto r = run_cell(spec, c, cache).result;
        if (!r.metrics) return {false, "cell error: " + r.error.value_or("?")};
        auto& slot = acc[{c.dataset, c.model}];
        (c.variant == Variant::FortOnly ? slot.second : slot.first) += r.metrics->accuracy / 5.0;
    }
    double worst = 1.0;
    std::string worst_key;
    for (const auto& [key, v] : acc)
        if (v.second - v.first < worst) {
            worst = v.second - v.first;
            worst_key = key.first + "/" + key.second;
        }
    return {worst >= -0.05, "worst mean change fort - plain " + fmt("%+.3f", worst) + " (" + worst_key + ")"};
}

// ---------------------------------------------------------------------------
// 9. MNIST direction

Outcome criterion_mnist() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec spec;
    spec.master_seed = 20240101;
    DatasetSpec d;
    d.name = "mnist";
    d.kind = "mnist";
    d.path = kData + "/mnist-subset/images-idx3-ubyte";
    d.labels_path = kData + "/mnist-subset/labels-idx1-ubyte";
    d.per_class = 500;
    spec.datasets = {d};
    spec.models = {model(ModelKind::RF), ModelSpec{}};
    spec.models[1].kind = ModelKind::MLP;  // image profile defaults
    spec.levels = {0.20};
    spec.seeds = {0, 1, 2};
    spec.variants = {Variant::PoisonedBaseline, Variant::SanitizeOnly, Variant::SecureLearnFull};
    spec.sanitizer.zscore = ZScoreMode::RowNorm;
    StageCache cache;
    std::map<std::pair<std::string, AttackKind>, std::map<Variant, double>> acc;
    for (const auto& c : plan_cells(spec)) {
        const auto r = run_cell(spec, c, cache).result;
        if (!r.metrics) return {false, "cell error: " + r.error.value_or("?")};
        acc[{c.model, c.attack}][c.variant] += r.metrics->accuracy / 3.0;
    }
    const double secs = seconds_since(t0);
    bool ok = secs < 1800.0;
    std::ostringstream detail;
    for (const auto& [key, v] : acc) {
        const double base = v.at(Variant::PoisonedBaseline), san = v.at(Variant::SanitizeOnly),
                     full = v.at(Variant::SecureLearnFull);
        const bool cell_ok = san >= base && full >= base + 0.02;
        ok = ok && cell_ok;
        detail << ' ' << key.first << '/' << to_string(key.second) << ' ' << fmt("%.3f", base) << '/' << fmt("%.3f", san)
               << '/' << fmt("%.3f", full) << (cell_ok ? "" : "*");
    }
    return {ok, "base/sanitize/full:" + detail.str() + "; " + fmt("%.0f s", secs)};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::vector<std::string> stripped_lines(const fs::path& file) {
    std::ifstream in(file);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto j = Json::parse(line);
        j.erase("wall_time_seconds");
        out.push_back(j.dump());
    }
    return out;
}

Outcome criterion_determinism() {
    auto spec = iris_spec();
    spec.levels = {0.10};
    spec.seeds = {0, 1};
    const auto root = fs::temp_directory_path() / ("securelearn_accept_" + std::to_string(std::random_device{}()));
    MatrixOptions one, eight;
    eight.workers = 8;
    run_matrix(spec, root / "a", one);
    run_matrix(spec, root / "b", one);
    run_matrix(spec, root / "c", eight);
    const auto a = stripped_lines(root / "a" / kResultsFile);
    const auto b = stripped_lines(root / "b" / kResultsFile);
    const auto c = stripped_lines(root / "c" / kResultsFile);
    std::error_code ec;
    fs::remove_all(root, ec);
    const bool ok = !a.empty() && a == b && a == c;
    return {ok, std::to_string(a.size()) + " lines; repeat " + (a == b ? "identical" : "DIFFERS") + ", workers 1 vs 8 " +
                    (a == c ? "identical" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// 11. Metric oracles

Outcome criterion_metric_oracles() {
    std::mt19937_64 gen(1111);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const int classes = std::uniform_int_distribution<int>(2, 6)(gen);
        const int n = std::uniform_int_distribution<int>(1, 80)(gen);
        const int used = std::uniform_int_distribution<int>(1, classes)(gen);  // leaves classes absent
        std::uniform_int_distribution<int> lab(0, used - 1), any(0, classes - 1);
        std::vector<Label> yt(static_cast<std::size_t>(n)), yp(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            yt[static_cast<std::size_t>(i)] = lab(gen);
            yp[static_cast<std::size_t>(i)] = gen() % 3 == 0 ? any(gen) : yt[static_cast<std::size_t>(i)];
        }
        const auto got = evaluate(yt, yp, classes);
        double correct = 0, rec = 0, f1 = 0, fdr_sum = 0;
        int in_truth = 0, in_pred = 0;
        for (int i = 0; i < n; ++i) correct += yt[static_cast<std::size_t>(i)] == yp[static_cast<std::size_t>(i)];
        for (int c = 0; c < classes; ++c) {
            double tp = 0, t_count = 0, p_count = 0;
            for (int i = 0; i < n; ++i) {
                const bool is_t = yt[static_cast<std::size_t>(i)] == c, is_p = yp[static_cast<std::size_t>(i)] == c;
                tp += is_t && is_p;
                t_count += is_t;
                p_count += is_p;
            }
            if (t_count > 0) {
                ++in_truth;
                const double r = tp / t_count, p = p_count > 0 ? tp / p_count : 0.0;
                rec += r;
                f1 += r + p > 0 ? 2 * p * r / (p + r) : 0.0;
            }
            if (p_count > 0) {
                ++in_pred;
                fdr_sum += (p_count - tp) / p_count;
            }
        }
        worst = std::max({worst, std::abs(got.accuracy - correct / n), std::abs(got.recall_macro - rec / in_truth),
                          std::abs(got.f1_macro - f1 / in_truth), std::abs(got.fdr - fdr_sum / in_pred)});
    }

    std::size_t cr_above_dr = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(10, 120)(gen);
        const int classes = std::uniform_int_distribution<int>(2, 5)(gen);
        PoisonRecord rec;
        std::map<Index, Label> original, poisoned;
        std::set<Index> injected;
        for (Index r = 0; r < n; ++r) {
            const auto roll = gen() % 10;
            if (roll < 2) {
                const Label o = static_cast<Label>(gen() % classes);
                const Label p = static_cast<Label>((o + 1 + gen() % (classes - 1)) % classes);
                rec.flipped.push_back({r, o, p});
                original[r] = o;
                poisoned[r] = p;
            } else if (roll == 2) {
                rec.injected.push_back({r, 0, static_cast<Label>(gen() % classes)});
                injected.insert(r);
            }
        }
        SanitizationOutcome out;
        std::map<Index, Label> final_label;
        std::set<Index> removed;
        for (Index r = 0; r < n; ++r) {
            const auto roll = gen() % 6;
            const Label current = poisoned.count(r) ? poisoned[r] : static_cast<Label>(0);
            if (roll == 0) {
                Label nl = static_cast<Label>(gen() % classes);
                if (nl == current) nl = static_cast<Label>((nl + 1) % classes);
                out.relabeled.push_back({r, current, nl, 1.0});
                final_label[r] = nl;
            }
            if (roll == 1 || (roll == 0 && gen() % 4 == 0)) {
                out.removed.push_back({r, 4.0});
                removed.insert(r);
            }
        }
        const double total = static_cast<double>(rec.flipped.size() + rec.injected.size());
        const auto dr = detection_rate(rec, out);
        const auto cr = correction_rate(rec, out);
        if (total == 0) {
            if (dr || cr) return {false, "rates defined without poisoned rows"};
            continue;
        }
        double det = 0, cor = 0;
        for (const auto& [r, o] : original) {
            const bool touched = final_label.count(r) || removed.count(r);
            det += touched;
            const Label fin = final_label.count(r) ? final_label[r] : poisoned[r];
            cor += !removed.count(r) && fin == o;
        }
        for (auto r : injected) {
            det += final_label.count(r) || removed.count(r);
            cor += removed.count(r) > 0;
        }
        worst = std::max({worst, std::abs(*dr - det / total), std::abs(*cr - cor / total)});
        cr_above_dr += *cr > *dr;
    }
    return {worst <= 1e-12 && cr_above_dr == 0,
            "max deviation " + fmt("%.1e", worst) + "; CR > DR in " + std::to_string(cr_above_dr) + " of 100 pairs"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"01 sanitizer matches brute-force oracles", criterion_sanitizer_oracle},
        {"02 perturbation is x + c*sign(F*x + b)", criterion_perturbation},
        {"03 MLP gradient matches finite differences", criterion_gradient},
        {"04 GNB/IRIS/OOP DR >= 0.95 and CR >= 0.85", criterion_gnb_oop_band},
        {"05 IRIS full pipeline accuracy >= 0.90 at 0.15", criterion_full_accuracy},
        {"06 IRIS MLP full pipeline recall and F1 >= 0.95", criterion_mlp_recall_f1},
        {"07 FORT lowers FDR on IRIS", criterion_fort_fdr},
        {"08 FORT clean-accuracy cost <= 0.05", criterion_clean_tradeoff},
        {"09 MNIST subset: sanitize and full beat baseline", criterion_mnist},
        {"10 matrix runs are deterministic", criterion_determinism},
        {"11 metrics match oracles, CR <= DR", criterion_metric_oracles},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s | %s | %.1fs\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
