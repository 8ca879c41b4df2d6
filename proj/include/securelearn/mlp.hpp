// Single-hidden-layer perceptron: ReLU hidden units, softmax output,
// cross-entropy loss, plain mini-batch gradient descent.
#pragma once

#include "securelearn/common.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace securelearn {

struct MlpWeights {
    Matrix w1;  // d x H
    RowVector b1;
    Matrix w2;  // H x C
    RowVector b2;
};

struct MlpGradient {
    double loss = 0.0;
    MlpWeights grad;
};

struct MlpParams {
    std::size_t hidden_units = 64;
    std::size_t epochs = 200;
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
};

namespace detail {

inline void softmax_rows(Matrix& logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - mx).exp().matrix();
        logits.row(i) /= logits.row(i).sum();
    }
}

}  // namespace detail

/// Mean cross-entropy over the rows of x and its gradient with respect to
/// every weight.
inline MlpGradient mlp_loss_and_gradient(const MlpWeights& w, const Matrix& x, std::span<const Label> y) {
    const auto n = x.rows();
    Matrix z = x * w.w1;
    z.rowwise() += w.b1;
    Matrix a = z.cwiseMax(0.0);
    Matrix p = a * w.w2;
    p.rowwise() += w.b2;
    detail::softmax_rows(p);

    MlpGradient g;
    for (Eigen::Index i = 0; i < n; ++i) g.loss -= std::log(std::max(p(i, y[static_cast<std::size_t>(i)]), 1e-300));
    g.loss /= static_cast<double>(n);

    Matrix delta = p;  // d loss / d logits
    for (Eigen::Index i = 0; i < n; ++i) delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(n);
    g.grad.w2 = a.transpose() * delta;
    g.grad.b2 = delta.colwise().sum();
    Matrix back = delta * w.w2.transpose();
    back = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    g.grad.w1 = x.transpose() * back;
    g.grad.b1 = back.colwise().sum();
    return g;
}

class Mlp {
public:
    /// Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases 0.
    void fit(const Matrix& x, const std::vector<Label>& y, int class_count, const MlpParams& params,
             std::uint64_t seed) {
        if (params.batch_size == 0 || params.hidden_units == 0)
            throw InvalidArgument("mlp: batch_size and hidden_units must be positive");
        const auto d = x.cols();
        const auto H = static_cast<Eigen::Index>(params.hidden_units);
        const auto C = static_cast<Eigen::Index>(class_count);
        Rng rng(seed);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
        w_.w1.resize(d, H);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < H; ++j) w_.w1(i, j) = rng.uniform(-s1, s1);
        w_.b1 = RowVector::Zero(H);
        w_.w2.resize(H, C);
        for (Eigen::Index i = 0; i < H; ++i)
            for (Eigen::Index j = 0; j < C; ++j) w_.w2(i, j) = rng.uniform(-s2, s2);
        w_.b2 = RowVector::Zero(C);

        const auto n = static_cast<std::size_t>(x.rows());
        Matrix xb;
        std::vector<Label> yb;
        for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
            const auto order = rng.permutation(n);
            double loss_sum = 0.0;
            for (std::size_t start = 0; start < n; start += params.batch_size) {
                const auto stop = std::min(n, start + params.batch_size);
                const auto m = static_cast<Eigen::Index>(stop - start);
                xb.resize(m, d);
                yb.resize(static_cast<std::size_t>(m));
                for (std::size_t t = start; t < stop; ++t) {
                    xb.row(static_cast<Eigen::Index>(t - start)) = x.row(static_cast<Eigen::Index>(order[t]));
                    yb[t - start] = y[order[t]];
                }
                const auto g = mlp_loss_and_gradient(w_, xb, yb);
                if (!std::isfinite(g.loss))
                    throw TrainingError("mlp: non-finite loss at epoch " + std::to_string(epoch));
                loss_sum += g.loss * static_cast<double>(m);
                w_.w1 -= params.learning_rate * g.grad.w1;
                w_.b1 -= params.learning_rate * g.grad.b1;
                w_.w2 -= params.learning_rate * g.grad.w2;
                w_.b2 -= params.learning_rate * g.grad.b2;
            }
            last_loss_ = loss_sum / static_cast<double>(n);
        }
    }

    /// Hidden pre-activations x * w1 + b1.
    Matrix hidden_preactivation(const Matrix& x) const {
        Matrix z = x * w_.w1;
        z.rowwise() += w_.b1;
        return z;
    }

    /// Output logits from hidden pre-activations.
    Matrix logits_from_hidden(const Matrix& z) const {
        Matrix o = z.cwiseMax(0.0) * w_.w2;
        o.rowwise() += w_.b2;
        return o;
    }

    Matrix predict_proba(const Matrix& x) const {
        Matrix o = logits_from_hidden(hidden_preactivation(x));
        detail::softmax_rows(o);
        return o;
    }

    const MlpWeights& weights() const noexcept { return w_; }
    double last_epoch_loss() const noexcept { return last_loss_; }

    static Mlp from_weights(MlpWeights w) {
        Mlp m;
        m.w_ = std::move(w);
        return m;
    }

private:
    MlpWeights w_;
    double last_loss_ = 0.0;
};

}  // namespace securelearn
