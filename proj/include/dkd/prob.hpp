#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkd {

/// A discrete probability distribution over C classes. Entries are in [0, 1]
/// and sum to 1. A vector whose sum is within 1e-6 of 1 is renormalized on
/// construction; anything further off is rejected, so a misbehaving
/// probability source fails loudly instead of being silently fixed up.
class ProbVector {
public:
    static constexpr double kSumTolerance = 1e-6;

    explicit ProbVector(std::vector<double> values) : v_(std::move(values)) {
        if (v_.empty())
            throw std::invalid_argument("ProbVector: empty");
        double sum = 0.0;
        for (double x : v_) {
            if (!std::isfinite(x))
                throw std::invalid_argument("ProbVector: non-finite entry");
            if (x < 0.0)
                throw std::invalid_argument("ProbVector: negative entry " + std::to_string(x));
            if (x > 1.0 + kSumTolerance)
                throw std::invalid_argument("ProbVector: entry above 1: " + std::to_string(x));
            sum += x;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw std::invalid_argument("ProbVector: entries sum to " + std::to_string(sum) +
                                        ", expected 1 within 1e-6");
        if (sum != 1.0)
            for (double& x : v_) x /= sum;
    }

    /// Wraps values already known to be a normalized distribution (e.g. a
    /// softmax output). Skips the renormalization pass so downstream
    /// arithmetic sees the exact computed values.
    static ProbVector from_normalized(std::vector<double> values) {
        return ProbVector(std::move(values), NormalizedTag{});
    }

    static ProbVector one_hot(std::size_t classes, std::size_t cls) {
        if (classes == 0 || cls >= classes)
            throw std::invalid_argument("ProbVector::one_hot: class index out of range");
        std::vector<double> v(classes, 0.0);
        v[cls] = 1.0;
        return from_normalized(std::move(v));
    }

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }

    /// Index of the largest entry; ties resolve to the lowest index.
    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v_.size(); ++i)
            if (v_[i] > v_[best]) best = i;
        return best;
    }

    bool operator==(const ProbVector& other) const = default;

private:
    struct NormalizedTag {};
    ProbVector(std::vector<double> values, NormalizedTag) : v_(std::move(values)) {
        if (v_.empty())
            throw std::invalid_argument("ProbVector: empty");
    }

    std::vector<double> v_;
};

/// Unconstrained pre-softmax scores. All entries must be finite.
class LogitVector {
public:
    explicit LogitVector(std::vector<double> values) : v_(std::move(values)) {
        if (v_.empty())
            throw std::invalid_argument("LogitVector: empty");
        for (double x : v_)
            if (!std::isfinite(x))
                throw std::invalid_argument("LogitVector: non-finite entry");
    }

    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }

    bool operator==(const LogitVector& other) const = default;

private:
    std::vector<double> v_;
};

} // namespace dkd
