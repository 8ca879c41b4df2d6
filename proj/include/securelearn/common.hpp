// Shared primitives: error types, deterministic RNG, seed derivation, rounding.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace securelearn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Label = int;
using Index = std::size_t;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input whose content violates the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Binary container problems (IDX files).
class LoadError : public Error {
public:
    enum class Kind { MagicMismatch, Truncated, CountMismatch, Io };
    LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Numerical failure while fitting a model.
class TrainingError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Seeds and hashing

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Combines a base seed with any number of integer or string coordinates.
/// The result depends only on the values, never on call order elsewhere.
class SeedBuilder {
public:
    explicit SeedBuilder(std::uint64_t base) : state_(splitmix64(base)) {}

    SeedBuilder& add(std::uint64_t v) {
        state_ = splitmix64(state_ ^ splitmix64(v + 0x632be59bd9b4e019ULL));
        return *this;
    }
    SeedBuilder& add(std::string_view s) { return add(fnv1a64(s)); }

    std::uint64_t seed() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, const Parts&... parts) {
    SeedBuilder b(base);
    (b.add(parts), ...);
    return b.seed();
}

// ---------------------------------------------------------------------------
// RNG
//
// std::mt19937_64 output is fully specified by the standard, but the
// distributions are not, so every draw below is built from raw engine bits.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, bound); unbiased (Lemire's method with rejection).
    std::uint64_t uniform_index(std::uint64_t bound) {
        if (bound == 0) throw InvalidArgument("uniform_index: bound must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(engine_()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0, v = 0.0, s = 0.0;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        shuffle(std::span<T>(items));
    }

    std::vector<Index> permutation(std::size_t n) {
        std::vector<Index> p(n);
        std::iota(p.begin(), p.end(), Index{0});
        shuffle(p);
        return p;
    }

    /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<Index> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw InvalidArgument("sample_without_replacement: k > n");
        std::vector<Index> p(n);
        std::iota(p.begin(), p.end(), Index{0});
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_index(n - i));
            std::swap(p[i], p[j]);
        }
        p.resize(k);
        return p;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------

/// Round-half-up of fraction * n, used for every budget and split size.
inline std::size_t round_half_up(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

/// Index of the largest element; ties go to the smallest index.
template <typename Range>
std::size_t argmax_first(const Range& values) {
    std::size_t best = 0;
    std::size_t i = 0;
    double best_value = 0.0;
    for (const auto& v : values) {
        if (i == 0 || v > best_value) {
            best = i;
            best_value = static_cast<double>(v);
        }
        ++i;
    }
    return best;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace securelearn
