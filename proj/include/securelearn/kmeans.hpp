// Seeded Lloyd k-means with k-means++ (D^2-weighted) seeding.
#pragma once

#include "securelearn/common.hpp"

#include <limits>
#include <vector>

namespace securelearn {

struct KMeansResult {
    Matrix centers;
    std::vector<std::size_t> assignment;
    std::vector<std::size_t> sizes;
    int iterations = 0;
};

namespace detail {

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index f = 0; f < a.cols(); ++f) {
        const double d = a(i, f) - b(j, f);
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// The first center is a uniformly drawn row; each further center is a row
/// drawn with probability proportional to its squared distance from the
/// nearest chosen center.
/// Assignment ties go to the smallest center index; an emptied cluster keeps
/// its previous center.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iterations = 50) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (k == 0 || n < k) throw InvalidArgument("kmeans: need 1 <= k <= n");
    Rng rng(seed);
    KMeansResult out;
    out.centers.resize(static_cast<Eigen::Index>(k), x.cols());
    out.centers.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(n)));
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], detail::squared_distance(x, static_cast<Eigen::Index>(i), out.centers,
                                                                       static_cast<Eigen::Index>(c - 1)));
            total += nearest[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = rng.uniform01() * total;
            double acc = 0.0;
            pick = n;
            for (std::size_t i = 0; i < n && pick == n; ++i) {
                acc += nearest[i];
                if (r < acc) pick = i;
            }
            // Rounding can leave r at the very top of the range.
            if (pick == n)
                for (std::size_t i = n; i-- > 0;)
                    if (nearest[i] > 0.0) {
                        pick = i;
                        break;
                    }
        }
        out.centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    }

    out.assignment.assign(n, k);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = detail::squared_distance(x, static_cast<Eigen::Index>(i), out.centers,
                                                           static_cast<Eigen::Index>(c));
                if (dd < best_d) {
                    best_d = dd;
                    best = c;
                }
            }
            if (out.assignment[i] != best) {
                out.assignment[i] = best;
                changed = true;
            }
        }
        out.iterations = it + 1;
        if (!changed) break;
        Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(out.assignment[i])) += x.row(static_cast<Eigen::Index>(i));
            ++counts[out.assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                out.centers.row(static_cast<Eigen::Index>(c)) =
                    sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
    }
    out.sizes.assign(k, 0);
    for (auto a : out.assignment) ++out.sizes[a];
    return out;
}

}  // namespace securelearn
