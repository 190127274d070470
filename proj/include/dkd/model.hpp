#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkd/errors.hpp"
#include "dkd/matrix.hpp"
#include "dkd/prob.hpp"
#include "dkd/rng.hpp"

namespace dkd {

enum class Activation { relu, identity };

inline const char* to_string(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw FormatError("unknown activation tag: " + s);
}

struct Layer {
    Matrix weight; // out x in
    std::vector<double> bias;
    Activation activation = Activation::identity;

    std::size_t in_size() const { return weight.cols(); }
    std::size_t out_size() const { return weight.rows(); }

    bool operator==(const Layer&) const = default;
};

/// Fully-connected classifier with explicit parameters. The last layer is
/// linear and emits logits.
struct TargetNetwork {
    std::vector<Layer> layers;

    std::size_t input_size() const { return layers.front().in_size(); }
    std::size_t output_size() const { return layers.back().out_size(); }

    bool operator==(const TargetNetwork&) const = default;
};

/// Weights drawn uniformly within the fan-in/fan-out bound
/// sqrt(6 / (fan_in + fan_out)); biases zero. Hidden layers use relu,
/// the output layer is linear.
inline TargetNetwork init_network(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("init_network: need at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0)
            throw std::invalid_argument("init_network: layer sizes must be positive");
    Rng rng(mix_seed(seed, 0x171));
    TargetNetwork net;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        const auto in = static_cast<std::size_t>(layer_sizes[k]);
        const auto out = static_cast<std::size_t>(layer_sizes[k + 1]);
        Layer layer;
        layer.weight = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        layer.activation =
            (k + 2 == layer_sizes.size()) ? Activation::identity : Activation::relu;
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

/// Per-layer activations recorded by forward() for use in backward().
struct ForwardCache {
    std::vector<std::vector<double>> inputs;         // inputs[k] feeds layer k
    std::vector<std::vector<double>> pre_activation; // pre_activation[k] = W_k x + b_k
};

inline LogitVector forward(const TargetNetwork& net, std::span<const double> x,
                           ForwardCache* cache = nullptr) {
    if (net.layers.empty())
        throw std::invalid_argument("forward: empty network");
    if (x.size() != net.input_size())
        throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                    ", network expects " + std::to_string(net.input_size()));
    std::vector<double> cur(x.begin(), x.end());
    if (cache) {
        cache->inputs.clear();
        cache->pre_activation.clear();
    }
    for (const Layer& layer : net.layers) {
        if (cache) cache->inputs.push_back(cur);
        std::vector<double> z(layer.out_size());
        for (std::size_t r = 0; r < layer.out_size(); ++r) {
            double acc = layer.bias[r];
            const auto w = layer.weight.row(r);
            for (std::size_t c = 0; c < layer.in_size(); ++c) acc += w[c] * cur[c];
            z[r] = acc;
        }
        if (cache) cache->pre_activation.push_back(z);
        if (layer.activation == Activation::relu)
            for (double& v : z)
                if (v < 0.0) v = 0.0;
        cur = std::move(z);
    }
    return LogitVector(std::move(cur));
}

struct LayerGrads {
    Matrix weight;
    std::vector<double> bias;
};

using Gradients = std::vector<LayerGrads>;

inline Gradients zero_gradients(const TargetNetwork& net) {
    Gradients g;
    for (const Layer& layer : net.layers)
        g.push_back({Matrix(layer.out_size(), layer.in_size()),
                     std::vector<double>(layer.out_size(), 0.0)});
    return g;
}

/// Backpropagates a loss gradient w.r.t. the logits through the network,
/// returning gradients for every weight and bias. The cache must come from a
/// forward() call on this network.
inline Gradients backward(const TargetNetwork& net, const ForwardCache& cache,
                          const std::vector<double>& dloss_dlogits) {
    const std::size_t L = net.layers.size();
    if (cache.inputs.size() != L || cache.pre_activation.size() != L)
        throw std::invalid_argument("backward: cache does not match network depth");
    for (std::size_t k = 0; k < L; ++k) {
        if (cache.inputs[k].size() != net.layers[k].in_size() ||
            cache.pre_activation[k].size() != net.layers[k].out_size())
            throw std::invalid_argument("backward: cache does not match layer shapes");
    }
    if (dloss_dlogits.size() != net.output_size())
        throw std::invalid_argument("backward: gradient length does not match output size");

    Gradients grads = zero_gradients(net);
    std::vector<double> delta = dloss_dlogits; // d loss / d pre_activation of layer k
    for (std::size_t k = L; k-- > 0;) {
        const Layer& layer = net.layers[k];
        if (layer.activation == Activation::relu)
            for (std::size_t r = 0; r < delta.size(); ++r)
                if (cache.pre_activation[k][r] <= 0.0) delta[r] = 0.0;
        const std::vector<double>& in = cache.inputs[k];
        for (std::size_t r = 0; r < layer.out_size(); ++r) {
            grads[k].bias[r] = delta[r];
            for (std::size_t c = 0; c < layer.in_size(); ++c)
                grads[k].weight.at(r, c) = delta[r] * in[c];
        }
        if (k > 0) {
            std::vector<double> prev(layer.in_size(), 0.0);
            for (std::size_t r = 0; r < layer.out_size(); ++r) {
                const auto w = layer.weight.row(r);
                for (std::size_t c = 0; c < layer.in_size(); ++c) prev[c] += w[c] * delta[r];
            }
            delta = std::move(prev);
        }
    }
    return grads;
}

inline void accumulate(Gradients& into, const Gradients& g) {
    for (std::size_t k = 0; k < into.size(); ++k) {
        auto& dst = into[k].weight.data();
        const auto& src = g[k].weight.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        for (std::size_t i = 0; i < into[k].bias.size(); ++i) into[k].bias[i] += g[k].bias[i];
    }
}

inline void scale(Gradients& g, double factor) {
    for (auto& layer : g) {
        for (double& v : layer.weight.data()) v *= factor;
        for (double& v : layer.bias) v *= factor;
    }
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators mirroring the network parameters.
struct AdamState {
    struct Moments {
        Matrix m_weight, v_weight;
        std::vector<double> m_bias, v_bias;
    };
    AdamConfig config;
    std::int64_t step = 0;
    std::vector<Moments> layers;

    static AdamState init(const TargetNetwork& net, AdamConfig cfg = {}) {
        AdamState st;
        st.config = cfg;
        for (const Layer& layer : net.layers)
            st.layers.push_back({Matrix(layer.out_size(), layer.in_size()),
                                 Matrix(layer.out_size(), layer.in_size()),
                                 std::vector<double>(layer.out_size(), 0.0),
                                 std::vector<double>(layer.out_size(), 0.0)});
        return st;
    }
};

namespace detail {
inline void adam_update(double& param, double g, double& m, double& v, const AdamConfig& c,
                        double bc1, double bc2) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    param -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
}
} // namespace detail

/// One bias-corrected Adam update. Updates are elementwise, so the result is
/// independent of parameter iteration order. Throws if any parameter leaves
/// the finite range.
inline void adam_step(TargetNetwork& net, const Gradients& grads, AdamState& state) {
    if (grads.size() != net.layers.size() || state.layers.size() != net.layers.size())
        throw std::invalid_argument("adam_step: layer count mismatch");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (!grads[k].weight.same_shape(net.layers[k].weight) ||
            grads[k].bias.size() != net.layers[k].bias.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    state.step += 1;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        Layer& layer = net.layers[k];
        auto& mom = state.layers[k];
        auto& w = layer.weight.data();
        const auto& gw = grads[k].weight.data();
        for (std::size_t i = 0; i < w.size(); ++i)
            detail::adam_update(w[i], gw[i], mom.m_weight.data()[i], mom.v_weight.data()[i], c,
                                bc1, bc2);
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            detail::adam_update(layer.bias[i], grads[k].bias[i], mom.m_bias[i], mom.v_bias[i], c,
                                bc1, bc2);
    }
    for (const Layer& layer : net.layers) {
        for (double v : layer.weight.data())
            if (!std::isfinite(v)) throw NumericalError("adam_step: non-finite weight");
        for (double v : layer.bias)
            if (!std::isfinite(v)) throw NumericalError("adam_step: non-finite bias");
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format (plain text, bit-exact round trip):
//   dkdnet 1
//   layers <L>
//   layer <in> <out> <relu|identity>
//   <out lines of in hexfloat weights, row-major>
//   <one line of out hexfloat biases>
// Hexfloat ("%a") is used so parameters reload to the exact same bits.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string hexfloat(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double parse_double(const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw FormatError("checkpoint: bad number '" + tok + "' in " + where);
    return v;
}
} // namespace detail

inline void save_network(const TargetNetwork& net, std::ostream& os) {
    os << "dkdnet 1\n";
    os << "layers " << net.layers.size() << "\n";
    for (const Layer& layer : net.layers) {
        os << "layer " << layer.in_size() << " " << layer.out_size() << " "
           << to_string(layer.activation) << "\n";
        for (std::size_t r = 0; r < layer.out_size(); ++r) {
            const auto row = layer.weight.row(r);
            for (std::size_t c = 0; c < row.size(); ++c)
                os << (c ? " " : "") << detail::hexfloat(row[c]);
            os << "\n";
        }
        for (std::size_t r = 0; r < layer.bias.size(); ++r)
            os << (r ? " " : "") << detail::hexfloat(layer.bias[r]);
        os << "\n";
    }
}

inline void save_network(const TargetNetwork& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("save_network: cannot open " + path);
    save_network(net, os);
    if (!os) throw DataError("save_network: write failed for " + path);
}

inline TargetNetwork load_network(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "dkdnet" || version != 1)
        throw FormatError("checkpoint: bad header");
    std::string kw;
    std::size_t count = 0;
    if (!(is >> kw >> count) || kw != "layers" || count == 0)
        throw FormatError("checkpoint: bad layer count");
    TargetNetwork net;
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t in = 0, out = 0;
        std::string act;
        if (!(is >> kw >> in >> out >> act) || kw != "layer" || in == 0 || out == 0)
            throw FormatError("checkpoint: bad layer header at layer " + std::to_string(k));
        Layer layer;
        layer.activation = activation_from_string(act);
        layer.weight = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        std::string tok;
        for (std::size_t r = 0; r < out; ++r)
            for (std::size_t c = 0; c < in; ++c) {
                if (!(is >> tok)) throw FormatError("checkpoint: truncated weights");
                layer.weight.at(r, c) = detail::parse_double(tok, "weights");
            }
        for (std::size_t r = 0; r < out; ++r) {
            if (!(is >> tok)) throw FormatError("checkpoint: truncated biases");
            layer.bias[r] = detail::parse_double(tok, "biases");
        }
        if (!net.layers.empty() && net.layers.back().out_size() != in)
            throw FormatError("checkpoint: layer dimensions do not chain");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline TargetNetwork load_network(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("load_network: cannot open " + path);
    return load_network(is);
}

} // namespace dkd
