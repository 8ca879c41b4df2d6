// Gaussian naive Bayes.
#pragma once

#include "securelearn/common.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace securelearn {

class GaussianNB {
public:
    /// Per-class means and population variances; every variance is raised by
    /// var_smoothing times the largest per-feature variance of x.
    void fit(const Matrix& x, const std::vector<Label>& y, int class_count, double var_smoothing = 1e-9) {
        const auto C = class_count;
        const auto d = x.cols();
        const auto n = x.rows();
        means_ = Matrix::Zero(C, d);
        variances_ = Matrix::Zero(C, d);
        log_prior_.assign(static_cast<std::size_t>(C), -std::numeric_limits<double>::infinity());
        std::vector<double> counts(static_cast<std::size_t>(C), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            means_.row(y[static_cast<std::size_t>(i)]) += x.row(i);
            counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
        }
        for (int c = 0; c < C; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0) means_.row(c) /= counts[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = y[static_cast<std::size_t>(i)];
            variances_.row(c) += (x.row(i) - means_.row(c)).array().square().matrix();
        }
        double max_var = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double mu = x.col(j).mean();
            max_var = std::max(max_var, (x.col(j).array() - mu).square().sum() / static_cast<double>(n));
        }
        double epsilon = var_smoothing * max_var;
        if (!(epsilon > 0.0)) epsilon = var_smoothing;
        for (int c = 0; c < C; ++c) {
            const double cnt = counts[static_cast<std::size_t>(c)];
            if (cnt > 0) {
                variances_.row(c) /= cnt;
                log_prior_[static_cast<std::size_t>(c)] = std::log(cnt / static_cast<double>(n));
            }
            variances_.row(c).array() += epsilon;
        }
        epsilon_ = epsilon;
    }

    /// log P(c) + sum_j log N(x_j; mean_cj, var_cj)
    Matrix joint_log_likelihood(const Matrix& x) const {
        const auto C = means_.rows();
        Matrix out(x.rows(), C);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index c = 0; c < C; ++c) {
                double s = log_prior_[static_cast<std::size_t>(c)];
                for (Eigen::Index j = 0; j < x.cols(); ++j) s += feature_term(c, j, x(i, j));
                out(i, c) = s;
            }
        return out;
    }

    double feature_term(Eigen::Index c, Eigen::Index j, double v) const {
        const double var = variances_(c, j);
        const double dv = v - means_(c, j);
        return -0.5 * (std::log(2.0 * std::numbers::pi * var) + dv * dv / var);
    }

    Matrix predict_proba(const Matrix& x) const {
        Matrix p = joint_log_likelihood(x);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double mx = p.row(i).maxCoeff();
            double s = 0.0;
            for (Eigen::Index c = 0; c < p.cols(); ++c) {
                p(i, c) = std::exp(p(i, c) - mx);
                s += p(i, c);
            }
            p.row(i) /= s;
        }
        return p;
    }

    const Matrix& means() const noexcept { return means_; }
    const Matrix& variances() const noexcept { return variances_; }
    const std::vector<double>& log_prior() const noexcept { return log_prior_; }
    double epsilon() const noexcept { return epsilon_; }

    static GaussianNB from_parts(Matrix means, Matrix variances, std::vector<double> log_prior, double epsilon) {
        GaussianNB g;
        g.means_ = std::move(means);
        g.variances_ = std::move(variances);
        g.log_prior_ = std::move(log_prior);
        g.epsilon_ = epsilon;
        return g;
    }

private:
    Matrix means_;
    Matrix variances_;
    std::vector<double> log_prior_;
    double epsilon_ = 0.0;
};

}  // namespace securelearn
