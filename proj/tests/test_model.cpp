#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "dkd/distill.hpp"
#include "dkd/model.hpp"
#include "dkd/rng.hpp"
#include "oracles.hpp"

using dkd::Activation;
using dkd::ForwardCache;
using dkd::LogitVector;
using dkd::ProbVector;
using dkd::TargetNetwork;

namespace {

std::vector<double> random_input(dkd::Rng& rng, std::size_t d) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    return x;
}

} // namespace

TEST_CASE("init_network bounds, determinism, validation") {
    auto net = dkd::init_network({4, 3}, 99);
    REQUIRE(net.layers.size() == 1);
    CHECK(net.layers[0].weight.rows() == 3);
    CHECK(net.layers[0].weight.cols() == 4);
    CHECK(net.layers[0].bias.size() == 3);
    const double bound = std::sqrt(6.0 / 7.0);
    for (double w : net.layers[0].weight.data()) {
        CHECK(w <= bound);
        CHECK(w >= -bound);
    }
    for (double b : net.layers[0].bias) CHECK(b == 0.0);

    auto again = dkd::init_network({4, 3}, 99);
    CHECK(net == again);
    auto other = dkd::init_network({4, 3}, 100);
    CHECK(net.layers[0].weight.data() != other.layers[0].weight.data());

    CHECK_THROWS_AS(dkd::init_network({4}, 1), std::invalid_argument);
    CHECK_THROWS_AS(dkd::init_network({4, 0, 2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(dkd::init_network({}, 1), std::invalid_argument);

    // hidden layers relu, last layer linear
    auto deep = dkd::init_network({4, 8, 8, 2}, 5);
    CHECK(deep.layers[0].activation == Activation::relu);
    CHECK(deep.layers[1].activation == Activation::relu);
    CHECK(deep.layers[2].activation == Activation::identity);
}

TEST_CASE("forward basics") {
    // zero parameters -> zero logits -> uniform probabilities
    TargetNetwork zero;
    zero.layers.push_back({dkd::Matrix(3, 4), std::vector<double>(3, 0.0), Activation::identity});
    auto logits = dkd::forward(zero, std::vector<double>{1.0, -2.0, 0.5, 3.0});
    for (std::size_t j = 0; j < 3; ++j) CHECK(logits[j] == 0.0);
    auto p = dkd::soften_logits(logits, 1.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(p[j] == doctest::Approx(1.0 / 3));

    // identity weights reproduce the input
    TargetNetwork id;
    dkd::Matrix eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    id.layers.push_back({eye, std::vector<double>(3, 0.0), Activation::identity});
    auto out = dkd::forward(id, std::vector<double>{0.1, -0.2, 0.3});
    CHECK(out[0] == 0.1);
    CHECK(out[1] == -0.2);
    CHECK(out[2] == 0.3);

    CHECK_THROWS_AS(dkd::forward(id, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("forward matches an independent matrix-arithmetic oracle") {
    dkd::Rng rng(41);
    for (int i = 0; i < 50; ++i) {
        auto net = dkd::init_network({6, 9, 5, 3}, rng.next_u64());
        auto x = random_input(rng, 6);
        auto got = dkd::forward(net, x);
        auto want = oracle::forward_by_matrices(net, x);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-10);
    }
}

TEST_CASE("backward: zero upstream gradient, dead relu units, cache validation") {
    auto net = dkd::init_network({4, 6, 3}, 7);
    ForwardCache cache;
    auto x = std::vector<double>{0.5, -1.0, 2.0, 0.0};
    dkd::forward(net, x, &cache);

    auto grads = dkd::backward(net, cache, {0.0, 0.0, 0.0});
    for (const auto& lg : grads) {
        for (double v : lg.weight.data()) CHECK(v == 0.0);
        for (double v : lg.bias) CHECK(v == 0.0);
    }

    // a layer whose pre-activations are all negative passes no gradient down
    TargetNetwork dead;
    dkd::Matrix w1(2, 2);
    w1.at(0, 0) = 1.0;
    w1.at(1, 1) = 1.0;
    dead.layers.push_back({w1, {-10.0, -10.0}, Activation::relu});
    dkd::Matrix w2(2, 2);
    w2.at(0, 0) = 1.0;
    w2.at(1, 1) = 1.0;
    dead.layers.push_back({w2, {0.0, 0.0}, Activation::identity});
    ForwardCache dc;
    dkd::forward(dead, std::vector<double>{1.0, 1.0}, &dc);
    auto dg = dkd::backward(dead, dc, {1.0, 1.0});
    for (double v : dg[0].weight.data()) CHECK(v == 0.0); // nothing reaches layer 0

    // mismatched cache rejected
    ForwardCache stale;
    dkd::forward(dkd::init_network({4, 5, 3}, 1), x, &stale);
    CHECK_THROWS_AS(dkd::backward(net, stale, {1.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(dkd::backward(net, cache, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("backward matches finite differences of an end-to-end loss") {
    dkd::Rng rng(43);
    for (int draw = 0; draw < 20; ++draw) {
        auto net = dkd::init_network({5, 7, 4}, rng.next_u64());
        auto x = random_input(rng, 5);
        auto y = ProbVector::one_hot(4, rng.below(4));
        auto ps_raw = std::vector<double>{0.4, 0.3, 0.2, 0.1};
        ProbVector ps(ps_raw);
        dkd::DistillConfig cfg{0.3, 0.4, 2.0, 1e-12};

        ForwardCache cache;
        auto logits = dkd::forward(net, x, &cache);
        auto grads = dkd::backward(net, cache, dkd::instance_loss_grad(logits, y, ps, cfg));

        auto loss_at = [&](TargetNetwork& n) {
            return dkd::instance_loss(dkd::forward(n, x), y, ps, cfg).total;
        };
        const std::size_t params = oracle::parameter_count(net);
        for (std::size_t i = 0; i < params; ++i) {
            TargetNetwork up = net;
            TargetNetwork down = net;
            *oracle::parameter_at(up, i) += 1e-5;
            *oracle::parameter_at(down, i) -= 1e-5;
            const double fd = (loss_at(up) - loss_at(down)) / 2e-5;
            CHECK(oracle::rel_error(oracle::gradient_at(grads, i), fd) < 1e-4);
        }
    }
}

TEST_CASE("adam_step worked examples") {
    // one step on a single parameter: lr=0.1, g=2 -> parameter drops by ~0.1
    TargetNetwork net;
    dkd::Matrix w(1, 1);
    w.at(0, 0) = 1.0;
    net.layers.push_back({w, {0.0}, Activation::identity});
    auto st = dkd::AdamState::init(net, {0.1, 0.9, 0.999, 1e-8});
    dkd::Gradients g = dkd::zero_gradients(net);
    g[0].weight.at(0, 0) = 2.0;
    g[0].bias[0] = 0.0;
    dkd::adam_step(net, g, st);
    CHECK(net.layers[0].weight.at(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(st.step == 1);

    // zero gradients leave parameters and moments untouched
    TargetNetwork net2 = dkd::init_network({3, 2}, 2);
    TargetNetwork before = net2;
    auto st2 = dkd::AdamState::init(net2, {});
    dkd::adam_step(net2, dkd::zero_gradients(net2), st2);
    CHECK(net2 == before);
    for (double v : st2.layers[0].m_weight.data()) CHECK(v == 0.0);

    // constant gradient: step magnitude approaches lr, direction opposes g
    TargetNetwork net3;
    dkd::Matrix w3(1, 1);
    net3.layers.push_back({w3, {0.0}, Activation::identity});
    auto st3 = dkd::AdamState::init(net3, {0.01, 0.9, 0.999, 1e-8});
    dkd::Gradients g3 = dkd::zero_gradients(net3);
    g3[0].weight.at(0, 0) = -3.0;
    double prev = 0.0;
    for (int i = 0; i < 50; ++i) {
        prev = net3.layers[0].weight.at(0, 0);
        dkd::adam_step(net3, g3, st3);
        const double step = net3.layers[0].weight.at(0, 0) - prev;
        CHECK(step > 0.0); // moves against the gradient
        CHECK(step <= 0.01 * (1.0 + 1e-6));
    }

    // shape mismatch rejected
    auto bad = dkd::zero_gradients(dkd::init_network({4, 2}, 3));
    CHECK_THROWS_AS(dkd::adam_step(net2, bad, st2), std::invalid_argument);
}

TEST_CASE("adam_step determinism") {
    auto net_a = dkd::init_network({4, 6, 2}, 77);
    auto net_b = net_a;
    auto st_a = dkd::AdamState::init(net_a, {});
    auto st_b = dkd::AdamState::init(net_b, {});
    dkd::Rng rng(47);
    auto g = dkd::zero_gradients(net_a);
    for (auto& lg : g) {
        for (double& v : lg.weight.data()) v = rng.uniform(-1, 1);
        for (double& v : lg.bias) v = rng.uniform(-1, 1);
    }
    for (int i = 0; i < 25; ++i) {
        dkd::adam_step(net_a, g, st_a);
        dkd::adam_step(net_b, g, st_b);
    }
    CHECK(net_a == net_b);
}

TEST_CASE("cross-entropy training converges on separable blobs") {
    dkd::Rng rng(53);
    const std::size_t n = 50;
    dkd::Matrix x(n, 2);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool cls = i % 2 == 1;
        labels[i] = cls;
        x.at(i, 0) = (cls ? 2.0 : -2.0) + 0.3 * rng.normal();
        x.at(i, 1) = (cls ? 2.0 : -2.0) + 0.3 * rng.normal();
    }

    auto net = dkd::init_network({2, 8, 2}, 5);
    auto st = dkd::AdamState::init(net, {1e-2, 0.9, 0.999, 1e-8});
    int reached_at = -1;
    for (int epoch = 0; epoch < 500 && reached_at < 0; ++epoch) {
        auto grads = dkd::zero_gradients(net);
        for (std::size_t i = 0; i < n; ++i) {
            ForwardCache cache;
            auto logits = dkd::forward(net, x.row(i), &cache);
            auto p = dkd::soften_logits(logits, 1.0);
            std::vector<double> dl(2);
            for (std::size_t j = 0; j < 2; ++j) dl[j] = p[j] - (j == labels[i] ? 1.0 : 0.0);
            dkd::accumulate(grads, dkd::backward(net, cache, dl));
        }
        dkd::scale(grads, 1.0 / static_cast<double>(n));
        dkd::adam_step(net, grads, st);

        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i)
            correct += dkd::soften_logits(dkd::forward(net, x.row(i)), 1.0).argmax() == labels[i];
        if (correct == n) reached_at = epoch;
    }
    CHECK(reached_at >= 0);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    auto net = dkd::init_network({7, 11, 4}, 2024);
    std::stringstream ss;
    dkd::save_network(net, ss);
    auto back = dkd::load_network(ss);
    CHECK(net == back);

    // file variant too
    const auto path = std::filesystem::temp_directory_path() / "dkd_ckpt_test.dkdnet";
    dkd::save_network(net, path.string());
    auto from_file = dkd::load_network(path.string());
    CHECK(net == from_file);
    std::filesystem::remove(path);

    std::stringstream bad("dkdnet 2\nlayers 1\n");
    CHECK_THROWS_AS(dkd::load_network(bad), dkd::FormatError);
    std::stringstream truncated("dkdnet 1\nlayers 1\nlayer 2 2 relu\n0x1p+0 0x1p+0\n");
    CHECK_THROWS_AS(dkd::load_network(truncated), dkd::FormatError);
}
