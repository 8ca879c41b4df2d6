// Per-feature z-scores with population standard deviation.
#pragma once

#include "securelearn/common.hpp"

#include <cmath>
#include <vector>

namespace securelearn {

/// delta(i, j) = (x(i, j) - mean_j) / sigma_j; a column with sigma_j = 0 maps to 0.
inline Matrix zscore_matrix(const Matrix& x) {
    const auto n = x.rows();
    Matrix z(n, x.cols());
    if (n == 0) return z;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) sum += x(i, j);
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        for (Eigen::Index i = 0; i < n; ++i) z(i, j) = sd > 0.0 ? (x(i, j) - mean) / sd : 0.0;
    }
    return z;
}

/// max_j |delta(i, j)| for every row.
inline std::vector<double> max_abs_zscore(const Matrix& x) {
    const Matrix z = zscore_matrix(x);
    std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            out[static_cast<std::size_t>(i)] = std::max(out[static_cast<std::size_t>(i)], std::abs(z(i, j)));
    return out;
}

/// z-score, across rows, of each row's Euclidean distance from the column means.
inline std::vector<double> row_norm_zscore(const Matrix& x) {
    const auto n = x.rows();
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    if (n == 0) return dist;
    const RowVector mean = x.colwise().mean();
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) s += (x(i, j) - mean(j)) * (x(i, j) - mean(j));
        dist[static_cast<std::size_t>(i)] = std::sqrt(s);
    }
    double mu = 0.0;
    for (double v : dist) mu += v;
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : dist) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    for (double& v : dist) v = sd > 0.0 ? (v - mu) / sd : 0.0;
    return dist;
}

}  // namespace securelearn
