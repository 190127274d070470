#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "dkd/distill.hpp"
#include "dkd/errors.hpp"
#include "dkd/matrix.hpp"
#include "dkd/model.hpp"
#include "dkd/prob.hpp"

namespace dkd {

/// A black-box source of predicted probabilities. The interface is the whole
/// observable surface: per-instance probabilities and the class count.
/// Nothing else about the underlying model (parameters, logits, gradients)
/// is reachable through it. Implementations must be deterministic: identical
/// inputs yield identical outputs.
class SourceHypothesis {
public:
    virtual ~SourceHypothesis() = default;

    virtual ProbVector predict(std::span<const double> features) const = 0;

    /// Elementwise predict over the rows of a feature matrix, order
    /// preserved. Any per-row failure aborts the whole batch.
    virtual std::vector<ProbVector> predict_batch(const Matrix& features) const {
        std::vector<ProbVector> out;
        out.reserve(features.rows());
        for (std::size_t i = 0; i < features.rows(); ++i) out.push_back(predict(features.row(i)));
        return out;
    }

    virtual std::size_t num_classes() const = 0;
};

/// Checks that a hypothesis answers identically when asked twice.
/// Stochastic sources are rejected up front because prediction caching (and
/// reproducible training) depends on a fixed teacher.
inline void verify_deterministic(const SourceHypothesis& h, const Matrix& probes) {
    for (std::size_t i = 0; i < probes.rows(); ++i) {
        const auto a = h.predict(probes.row(i));
        const auto b = h.predict(probes.row(i));
        if (a.values() != b.values())
            throw std::invalid_argument(
                "source hypothesis is not deterministic; stochastic teachers are rejected");
    }
}

/// Serves a trained network behind the black-box interface:
/// predict(x) = plain softmax of its logits.
class InProcessHypothesis final : public SourceHypothesis {
public:
    explicit InProcessHypothesis(TargetNetwork net) : net_(std::move(net)) {}

    ProbVector predict(std::span<const double> features) const override {
        return soften_logits(forward(net_, features), 1.0);
    }

    std::size_t num_classes() const override { return net_.output_size(); }

private:
    TargetNetwork net_;
};

/// Keyed store of recorded predictions. Keys are a stable 64-bit FNV-1a hash
/// of the raw feature bytes, so lookups cost nothing per epoch while the
/// teacher stays fixed. Readers share, inserts are exclusive.
///
/// File format (plain text, entries sorted by key):
///   dkdcache 1
///   classes <C>
///   entries <N>
///   <hex key> <p0> ... <pC-1>     (probabilities at 17 significant digits)
class PredictionCache {
public:
    PredictionCache() = default;

    static std::uint64_t key_of(std::span<const double> features) {
        std::uint64_t h = 1469598103934665603ull;
        for (double v : features) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof bytes);
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ull;
            }
        }
        return h;
    }

    std::optional<ProbVector> lookup(std::span<const double> features) const {
        std::shared_lock lock(mu_);
        const auto it = entries_.find(key_of(features));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void insert(std::span<const double> features, const ProbVector& probs) {
        std::unique_lock lock(mu_);
        if (classes_ == 0) classes_ = probs.size();
        entries_.emplace(key_of(features), probs);
    }

    std::size_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

    std::size_t classes() const {
        std::shared_lock lock(mu_);
        return classes_;
    }

    void save(const std::string& path) const {
        std::shared_lock lock(mu_);
        std::ofstream os(path);
        if (!os) throw DataError("PredictionCache: cannot open " + path);
        os << "dkdcache 1\n";
        os << "classes " << classes_ << "\n";
        os << "entries " << entries_.size() << "\n";
        char buf[40];
        for (const auto& [key, probs] : entries_) { // std::map: already key-sorted
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(key));
            os << buf;
            for (std::size_t j = 0; j < probs.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", probs[j]);
                os << ' ' << buf;
            }
            os << "\n";
        }
        if (!os) throw DataError("PredictionCache: write failed for " + path);
    }

    void load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw DataError("PredictionCache: cannot open " + path);
        std::string magic;
        int version = 0;
        if (!(is >> magic >> version) || magic != "dkdcache" || version != 1)
            throw FormatError(path + ": bad cache header");
        std::string kw;
        std::size_t classes = 0, count = 0;
        if (!(is >> kw >> classes) || kw != "classes")
            throw FormatError(path + ": bad classes line");
        if (!(is >> kw >> count) || kw != "entries")
            throw FormatError(path + ": bad entries line");
        std::unique_lock lock(mu_);
        if (classes_ != 0 && classes != 0 && classes_ != classes)
            throw FormatError(path + ": class count disagrees with cache contents");
        if (classes != 0) classes_ = classes;
        if (count > 0 && classes_ == 0)
            throw FormatError(path + ": entries present but class count is zero");
        for (std::size_t i = 0; i < count; ++i) {
            std::string key_hex;
            if (!(is >> key_hex)) throw FormatError(path + ": truncated entry list");
            const std::uint64_t key = std::strtoull(key_hex.c_str(), nullptr, 16);
            std::vector<double> probs(classes_);
            for (double& p : probs) {
                std::string tok;
                if (!(is >> tok)) throw FormatError(path + ": truncated probabilities");
                char* end = nullptr;
                p = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0')
                    throw FormatError(path + ": bad probability '" + tok + "'");
            }
            entries_.emplace(key, ProbVector::from_normalized(std::move(probs)));
        }
    }

private:
    mutable std::shared_mutex mu_;
    std::map<std::uint64_t, ProbVector> entries_;
    std::size_t classes_ = 0;
};

/// Memoizing wrapper around another hypothesis, or a standalone replayer of a
/// recorded cache file when constructed without a backend. Cache hits are
/// bit-identical to the original backend responses.
class CachedHypothesis final : public SourceHypothesis {
public:
    CachedHypothesis(const SourceHypothesis* backend, std::shared_ptr<PredictionCache> cache)
        : backend_(backend), cache_(std::move(cache)) {
        if (!cache_) cache_ = std::make_shared<PredictionCache>();
        if (!backend_ && cache_->classes() == 0)
            throw std::invalid_argument("CachedHypothesis: replay mode needs a non-empty cache");
    }

    ProbVector predict(std::span<const double> features) const override {
        if (auto hit = cache_->lookup(features)) return *hit;
        if (!backend_)
            throw CacheMiss("CachedHypothesis: unrecorded instance in replay mode");
        ProbVector p = backend_->predict(features);
        cache_->insert(features, p);
        return p;
    }

    std::size_t num_classes() const override {
        return backend_ ? backend_->num_classes() : cache_->classes();
    }

    const PredictionCache& cache() const { return *cache_; }
    std::shared_ptr<PredictionCache> shared_cache() const { return cache_; }

private:
    const SourceHypothesis* backend_;
    std::shared_ptr<PredictionCache> cache_;
};

} // namespace dkd
