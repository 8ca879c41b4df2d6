// Multiclass tabular datasets: loaders, splitting, standardization, synthesis.
#pragma once

#include "securelearn/common.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace securelearn {

/// Feature matrix plus integer class labels in [0, class_count).
///
/// class_count is declared rather than inferred from the labels, so a
/// transformation that drops every row of some class keeps the label space.
struct Dataset {
    Matrix features;
    std::vector<Label> labels;
    int class_count = 0;
    std::vector<std::string> feature_names;
    std::string provenance;

    std::size_t rows() const noexcept { return labels.size(); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(features.cols()); }

    /// Throws SchemaError on any invariant violation.
    void validate() const {
        if (class_count < 2) throw SchemaError("class_count must be at least 2");
        if (static_cast<std::size_t>(features.rows()) != labels.size())
            throw SchemaError("feature rows and label count differ");
        if (!feature_names.empty() && feature_names.size() != cols())
            throw SchemaError("feature_names length differs from feature count");
        for (Label l : labels) {
            if (l < 0 || l >= class_count)
                throw SchemaError("label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(class_count) + ")");
        }
        if (!features.allFinite()) throw SchemaError("features contain NaN or infinite values");
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
        for (Label l : labels) ++counts[static_cast<std::size_t>(l)];
        return counts;
    }

    /// Number of distinct labels that actually occur.
    int classes_present() const {
        int present = 0;
        for (auto c : class_counts()) present += c > 0 ? 1 : 0;
        return present;
    }
};

inline Dataset make_dataset(Matrix features, std::vector<Label> labels, int class_count,
                            std::string provenance = {}) {
    Dataset ds{std::move(features), std::move(labels), class_count, {}, std::move(provenance)};
    ds.validate();
    return ds;
}

/// Rows of `ds` at `indices`, in that order (duplicates allowed).
inline Dataset select_rows(const Dataset& ds, std::span<const Index> indices) {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.features.cols());
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= ds.rows()) throw InvalidArgument("select_rows: index out of range");
        out.features.row(static_cast<Eigen::Index>(r)) =
            ds.features.row(static_cast<Eigen::Index>(indices[r]));
        out.labels.push_back(ds.labels[indices[r]]);
    }
    out.class_count = ds.class_count;
    out.feature_names = ds.feature_names;
    out.provenance = ds.provenance;
    return out;
}

/// `a` followed by the rows of `b`.
inline Dataset concat_rows(const Dataset& a, const Dataset& b) {
    if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols())
        throw InvalidArgument("concat_rows: feature count mismatch");
    if (a.class_count != b.class_count) throw InvalidArgument("concat_rows: class_count mismatch");
    Dataset out = a;
    const auto cols = a.rows() > 0 ? a.features.cols() : b.features.cols();
    out.features.resize(static_cast<Eigen::Index>(a.rows() + b.rows()), cols);
    if (a.rows() > 0) out.features.topRows(static_cast<Eigen::Index>(a.rows())) = a.features;
    if (b.rows() > 0) out.features.bottomRows(static_cast<Eigen::Index>(b.rows())) = b.features;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

// ---------------------------------------------------------------------------
// Loaders

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(LoadError::Kind::Io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

inline std::uint32_t read_be32(const std::string& bytes, std::size_t offset) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3]));
}

}  // namespace detail

/// Canonical species names accepted by the IRIS loader, with or without an
/// "Iris-" prefix.
inline constexpr std::array<std::string_view, 3> kIrisSpecies = {"setosa", "versicolor", "virginica"};

/// Parses IRIS CSV text: four numeric fields and a species name per row.
/// Class ids follow lexicographic order of the species present.
inline Dataset parse_iris_csv(std::string_view text, std::string provenance = "iris") {
    std::vector<std::array<double, 4>> rows;
    std::vector<std::string> species;
    std::size_t line_no = 0;
    for (auto raw : detail::split_lines(text)) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? line.size() - start
                                                                                 : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 5)
            throw ParseError(line_no, "expected 5 comma-separated fields, found " +
                                          std::to_string(fields.size()));
        std::array<double, 4> values{};
        for (std::size_t j = 0; j < 4; ++j) {
            auto v = detail::parse_double(fields[j]);
            if (!v) throw ParseError(line_no, "field " + std::to_string(j + 1) + " is not a number");
            values[j] = *v;
        }
        std::string name(detail::trim(fields[4]));
        std::string bare = name.starts_with("Iris-") ? name.substr(5) : name;
        if (std::find(kIrisSpecies.begin(), kIrisSpecies.end(), bare) == kIrisSpecies.end())
            throw SchemaError("line " + std::to_string(line_no) + ": unknown species '" + name + "'");
        rows.push_back(values);
        species.push_back(std::move(bare));
    }
    std::map<std::string, Label> ids;
    for (const auto& s : species) ids.emplace(s, 0);
    if (ids.size() < 2)
        throw SchemaError("IRIS data must contain at least 2 species, found " + std::to_string(ids.size()));
    Label next = 0;
    for (auto& [name, id] : ids) id = next++;

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < 4; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    for (const auto& s : species) ds.labels.push_back(ids.at(s));
    ds.class_count = static_cast<int>(ids.size());
    ds.feature_names = {"sepal_length", "sepal_width", "petal_length", "petal_width"};
    ds.provenance = std::move(provenance);
    ds.validate();
    return ds;
}

inline Dataset load_iris_csv(const std::string& path) {
    return parse_iris_csv(detail::read_file(path), "iris:" + path);
}

/// Parses an IDX image/label pair (magic 0x00000803 / 0x00000801, big-endian).
/// Pixels are divided by 255; the label space is the ten digits.
inline Dataset parse_idx_pair(const std::string& images, const std::string& labels,
                              std::string provenance = "idx") {
    using K = LoadError::Kind;
    if (images.size() < 16) throw LoadError(K::Truncated, "image file shorter than its header");
    if (labels.size() < 8) throw LoadError(K::Truncated, "label file shorter than its header");
    if (detail::read_be32(images, 0) != 0x00000803)
        throw LoadError(K::MagicMismatch, "image file magic is not 0x00000803");
    if (detail::read_be32(labels, 0) != 0x00000801)
        throw LoadError(K::MagicMismatch, "label file magic is not 0x00000801");
    const std::size_t n_images = detail::read_be32(images, 4);
    const std::size_t n_rows = detail::read_be32(images, 8);
    const std::size_t n_cols = detail::read_be32(images, 12);
    const std::size_t n_labels = detail::read_be32(labels, 4);
    const std::size_t d = n_rows * n_cols;
    if (images.size() - 16 < n_images * d)
        throw LoadError(K::Truncated, "image payload shorter than header declares");
    if (labels.size() - 8 < n_labels) throw LoadError(K::Truncated, "label payload shorter than header declares");
    if (n_images != n_labels)
        throw LoadError(K::CountMismatch, "image count " + std::to_string(n_images) +
                                              " differs from label count " + std::to_string(n_labels));
    Dataset ds;
    ds.class_count = 10;
    ds.features.resize(static_cast<Eigen::Index>(n_images), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n_images; ++i)
        for (std::size_t j = 0; j < d; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<unsigned char>(images[16 + i * d + j]) / 255.0;
    ds.labels.resize(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) {
        const int l = static_cast<unsigned char>(labels[8 + i]);
        if (l >= 10) throw SchemaError("label " + std::to_string(l) + " at index " + std::to_string(i) + " is not a digit");
        ds.labels[i] = l;
    }
    ds.provenance = std::move(provenance);
    ds.validate();
    return ds;
}

inline Dataset load_idx_pair(const std::string& images_path, const std::string& labels_path) {
    return parse_idx_pair(detail::read_file(images_path), detail::read_file(labels_path),
                          "idx:" + images_path);
}

/// Parses USPS text: an integer label then 256 reals in [-1, 1] per line.
/// Values are mapped linearly onto [0, 1].
inline Dataset parse_usps_text(std::string_view text, std::string provenance = "usps") {
    constexpr std::size_t kPixels = 256;
    std::vector<double> values;
    std::vector<Label> labels;
    std::size_t line_no = 0;
    for (auto raw : detail::split_lines(text)) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            const std::size_t start = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
            if (i > start) fields.push_back(line.substr(start, i - start));
        }
        if (fields.size() != kPixels + 1)
            throw ParseError(line_no, "expected label plus 256 values, found " +
                                          std::to_string(fields.size()) + " fields");
        auto label = detail::parse_double(fields[0]);
        if (!label || *label != std::floor(*label) || *label < 0 || *label > 9)
            throw ParseError(line_no, "label is not an integer digit");
        labels.push_back(static_cast<Label>(*label));
        for (std::size_t j = 1; j <= kPixels; ++j) {
            auto v = detail::parse_double(fields[j]);
            if (!v) throw ParseError(line_no, "value " + std::to_string(j) + " is not a number");
            values.push_back((*v + 1.0) / 2.0);
        }
    }
    Dataset ds;
    ds.class_count = 10;
    ds.features = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(labels.size()),
                                           static_cast<Eigen::Index>(kPixels));
    ds.labels = std::move(labels);
    ds.provenance = std::move(provenance);
    ds.validate();
    return ds;
}

inline Dataset load_usps_text(const std::string& path) {
    return parse_usps_text(detail::read_file(path), "usps:" + path);
}

// ---------------------------------------------------------------------------
// Sampling and splitting

/// Row indices of a stratified subsample: min(per_class, available) rows per
/// class, drawn without replacement, returned in a seeded random order.
inline std::vector<Index> stratified_subsample_indices(const Dataset& ds, std::size_t per_class,
                                                       std::uint64_t seed) {
    if (per_class < 1) throw InvalidArgument("stratified_subsample: per_class must be >= 1");
    Rng rng(seed);
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(ds.class_count));
    for (Index i = 0; i < ds.rows(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    std::vector<Index> chosen;
    for (auto& members : by_class) {
        const auto take = std::min(per_class, members.size());
        for (auto pick : rng.sample_without_replacement(members.size(), take)) chosen.push_back(members[pick]);
    }
    rng.shuffle(chosen);
    return chosen;
}

inline Dataset stratified_subsample(const Dataset& ds, std::size_t per_class, std::uint64_t seed) {
    auto idx = stratified_subsample_indices(ds, per_class, seed);
    return select_rows(ds, idx);
}

struct SplitIndices {
    std::vector<Index> train;
    std::vector<Index> test;
};

/// Uniform random partition; |train| = round_half_up(train_fraction * n).
inline SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidArgument("split: train_fraction must lie in (0, 1)");
    const auto n_train = round_half_up(train_fraction, n);
    if (n_train == 0 || n_train >= n)
        throw InvalidArgument("split: fraction " + std::to_string(train_fraction) + " of " +
                              std::to_string(n) + " rows leaves one side empty");
    Rng rng(seed);
    auto perm = rng.permutation(n);
    SplitIndices out;
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    auto idx = split_indices(ds.rows(), train_fraction, seed);
    return {select_rows(ds, idx.train), select_rows(ds, idx.test)};
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature mean and population standard deviation (0 for constant columns).
struct StandardizationParams {
    Vector mean;
    Vector stddev;
};

inline StandardizationParams standardize_fit(const Dataset& train) {
    const auto n = static_cast<double>(train.rows());
    if (train.rows() == 0) throw InvalidArgument("standardize_fit: empty dataset");
    StandardizationParams p;
    p.mean = train.features.colwise().sum().transpose() / n;
    p.stddev.resize(train.features.cols());
    for (Eigen::Index j = 0; j < train.features.cols(); ++j) {
        double ss = 0.0;
        for (Eigen::Index i = 0; i < train.features.rows(); ++i) {
            const double dlt = train.features(i, j) - p.mean(j);
            ss += dlt * dlt;
        }
        p.stddev(j) = std::sqrt(ss / n);
    }
    return p;
}

inline Dataset standardize_apply(const Dataset& ds, const StandardizationParams& params) {
    if (static_cast<Eigen::Index>(ds.cols()) != params.mean.size() ||
        params.mean.size() != params.stddev.size())
        throw InvalidArgument("standardize_apply: dimension mismatch (" + std::to_string(ds.cols()) +
                              " features vs " + std::to_string(params.mean.size()) + " parameters)");
    Dataset out = ds;
    for (Eigen::Index j = 0; j < out.features.cols(); ++j) {
        const double sd = params.stddev(j);
        for (Eigen::Index i = 0; i < out.features.rows(); ++i)
            out.features(i, j) = sd > 0.0 ? (ds.features(i, j) - params.mean(j)) / sd : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Isotropic Gaussian clusters, one per class, `per_class` rows each.
/// Centers are drawn in [-5, 5]^d and rejected until pairwise at least 2 apart
/// (bounded number of attempts).
inline Dataset synth_blobs(int class_count, std::size_t per_class, std::size_t d, double spread,
                           std::uint64_t seed) {
    if (class_count < 2) throw InvalidArgument("synth_blobs: class_count must be >= 2");
    if (d == 0) throw InvalidArgument("synth_blobs: d must be >= 1");
    Rng rng(seed);
    const auto C = static_cast<std::size_t>(class_count);
    Matrix centers(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < C; ++c) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            for (std::size_t j = 0; j < d; ++j)
                centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = rng.uniform(-5.0, 5.0);
            bool far = true;
            for (std::size_t o = 0; o < c && far; ++o)
                far = (centers.row(static_cast<Eigen::Index>(c)) - centers.row(static_cast<Eigen::Index>(o))).norm() >= 2.0;
            if (far) break;
        }
    }
    Dataset ds;
    ds.class_count = class_count;
    ds.features.resize(static_cast<Eigen::Index>(C * per_class), static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < per_class; ++r) {
            const auto row = static_cast<Eigen::Index>(c * per_class + r);
            for (std::size_t j = 0; j < d; ++j)
                ds.features(row, static_cast<Eigen::Index>(j)) =
                    centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + spread * rng.normal();
            ds.labels.push_back(static_cast<Label>(c));
        }
    }
    ds.provenance = "synth_blobs";
    ds.validate();
    return ds;
}

}  // namespace securelearn
