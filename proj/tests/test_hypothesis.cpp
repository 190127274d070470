#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "dkd/data.hpp"
#include "dkd/hypothesis.hpp"
#include "dkd/model.hpp"
#include "dkd/rng.hpp"

namespace fs = std::filesystem;
using dkd::Matrix;
using dkd::ProbVector;

namespace {

Matrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    dkd::Rng rng(seed);
    Matrix x(n, d);
    for (double& v : x.data()) v = rng.uniform(-2.0, 2.0);
    return x;
}

} // namespace

// The black-box surface is exactly predict / predict_batch / num_classes.
template <typename T>
concept ExposesParameters = requires(const T& t) { t.parameters(); } ||
                            requires(const T& t) { t.weights(); } ||
                            requires(const T& t) { t.network(); } ||
                            requires(const T& t, std::span<const double> x) { t.logits(x); };
template <typename T>
concept BlackBoxSurface = requires(const T& h, std::span<const double> x, const Matrix& m) {
    { h.predict(x) } -> std::same_as<ProbVector>;
    { h.predict_batch(m) } -> std::same_as<std::vector<ProbVector>>;
    { h.num_classes() } -> std::same_as<std::size_t>;
};
static_assert(!ExposesParameters<dkd::SourceHypothesis>);
static_assert(!ExposesParameters<dkd::InProcessHypothesis>);
static_assert(!ExposesParameters<dkd::CachedHypothesis>);
static_assert(BlackBoxSurface<dkd::SourceHypothesis>);
static_assert(BlackBoxSurface<dkd::InProcessHypothesis>);

TEST_CASE("in-process hypothesis is the plain softmax of the wrapped network") {
    auto net = dkd::init_network({6, 10, 4}, 3);
    dkd::InProcessHypothesis h(net);
    CHECK(h.num_classes() == 4);

    auto x = random_features(5, 6, 17);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto direct = dkd::soften_logits(dkd::forward(net, x.row(i)), 1.0);
        auto via_interface = h.predict(x.row(i));
        CHECK(via_interface.values() == direct.values());
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(via_interface[j] >= 0.0);
            sum += via_interface[j];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    CHECK_THROWS_AS(h.predict(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("predict_batch equals mapping predict, order preserved") {
    auto net = dkd::init_network({4, 8, 3}, 5);
    dkd::InProcessHypothesis h(net);

    CHECK(h.predict_batch(Matrix(0, 4)).empty());

    auto x = random_features(9, 4, 23);
    auto batch = h.predict_batch(x);
    REQUIRE(batch.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) CHECK(batch[i].values() == h.predict(x.row(i)).values());

    // n identical inputs give n identical outputs
    Matrix same(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) same.at(i, j) = 0.5;
    auto rep = h.predict_batch(same);
    for (const auto& p : rep) CHECK(p.values() == rep[0].values());
}

TEST_CASE("verify_deterministic accepts fixed teachers and rejects stochastic ones") {
    dkd::InProcessHypothesis fixed(dkd::init_network({3, 2}, 1));
    CHECK_NOTHROW(dkd::verify_deterministic(fixed, random_features(4, 3, 9)));

    class Drifting final : public dkd::SourceHypothesis {
    public:
        ProbVector predict(std::span<const double>) const override {
            const double p = 0.4 + 0.01 * static_cast<double>(calls_++ % 3);
            return ProbVector({p, 1.0 - p});
        }
        std::size_t num_classes() const override { return 2; }

    private:
        mutable int calls_ = 0;
    };
    Drifting bad;
    CHECK_THROWS_AS(dkd::verify_deterministic(bad, random_features(4, 3, 9)),
                    std::invalid_argument);
}

TEST_CASE("cache transparency: warm pass, then bit-identical hits") {
    auto net = dkd::init_network({5, 7, 3}, 11);
    dkd::InProcessHypothesis inner(net);
    dkd::CachedHypothesis cached(&inner, nullptr);

    auto x = random_features(20, 5, 31);
    std::vector<ProbVector> first;
    for (std::size_t i = 0; i < x.rows(); ++i) first.push_back(cached.predict(x.row(i)));
    CHECK(cached.cache().size() == 20);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        CHECK(cached.predict(x.row(i)).values() == first[i].values());
        CHECK(cached.predict(x.row(i)).values() == inner.predict(x.row(i)).values());
    }
    CHECK(cached.cache().size() == 20); // hits do not grow the cache
    CHECK(cached.num_classes() == 3);
}

TEST_CASE("cache file round trip and replay mode") {
    auto net = dkd::init_network({4, 6, 3}, 13);
    dkd::InProcessHypothesis inner(net);
    auto cache = std::make_shared<dkd::PredictionCache>();
    dkd::CachedHypothesis recording(&inner, cache);

    auto x = random_features(15, 4, 37);
    std::vector<ProbVector> recorded;
    for (std::size_t i = 0; i < x.rows(); ++i) recorded.push_back(recording.predict(x.row(i)));

    const auto path = fs::temp_directory_path() / "dkd_cache_test.dkdcache";
    cache->save(path.string());

    auto reloaded = std::make_shared<dkd::PredictionCache>();
    reloaded->load(path.string());
    CHECK(reloaded->size() == recorded.size());
    CHECK(reloaded->classes() == 3);

    // replay without any backend: identical vectors for every recorded x
    dkd::CachedHypothesis replay(nullptr, reloaded);
    for (std::size_t i = 0; i < x.rows(); ++i)
        CHECK(replay.predict(x.row(i)).values() == recorded[i].values());

    // unrecorded instance fails loudly
    auto unseen = random_features(1, 4, 99);
    CHECK_THROWS_AS(replay.predict(unseen.row(0)), dkd::CacheMiss);

    // replay mode without contents is rejected at construction
    CHECK_THROWS_AS(dkd::CachedHypothesis(nullptr, std::make_shared<dkd::PredictionCache>()),
                    std::invalid_argument);

    // saving again produces identical bytes
    const auto path2 = fs::temp_directory_path() / "dkd_cache_test2.dkdcache";
    reloaded->save(path2.string());
    std::ifstream a(path), b(path2);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());

    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("every backend yields valid distributions") {
    auto net = dkd::init_network({6, 12, 5}, 17);
    dkd::InProcessHypothesis inproc(net);
    dkd::CachedHypothesis cached(&inproc, nullptr);
    auto x = random_features(30, 6, 41);
    for (const dkd::SourceHypothesis* h :
         std::initializer_list<const dkd::SourceHypothesis*>{&inproc, &cached}) {
        for (std::size_t i = 0; i < x.rows(); ++i) {
            auto p = h->predict(x.row(i));
            double sum = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                CHECK(p[j] >= 0.0);
                sum += p[j];
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}
