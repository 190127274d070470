#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dkd/data.hpp"
#include "dkd/distill.hpp"
#include "dkd/errors.hpp"
#include "dkd/hypothesis.hpp"
#include "dkd/metrics.hpp"
#include "dkd/model.hpp"
#include "dkd/rng.hpp"

namespace dkd {

enum class Method { SH, TD, skdHTL, dkdHTL };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::SH: return "SH";
        case Method::TD: return "TD";
        case Method::skdHTL: return "skdHTL";
        default: return "dkdHTL";
    }
}

inline Method method_from_string(const std::string& s) {
    if (s == "SH") return Method::SH;
    if (s == "TD") return Method::TD;
    if (s == "skdHTL") return Method::skdHTL;
    if (s == "dkdHTL") return Method::dkdHTL;
    throw ConfigError("unknown method: " + s + " (expected SH, TD, skdHTL or dkdHTL)");
}

struct TrainConfig {
    Method method = Method::dkdHTL;
    DistillConfig distill{};
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10; // epochs without a new best validation accuracy
    std::uint64_t seed = 0;
    AdamConfig adam{};

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
        if (patience < 0) throw std::invalid_argument("TrainConfig: patience must be >= 0");
        distill.validate();
        if (method == Method::SH)
            throw std::invalid_argument("TrainConfig: SH evaluates the source, it never trains");
        if (method == Method::TD && (distill.lambda != 1.0 || distill.delta != 0.0))
            throw std::invalid_argument(
                "TrainConfig: TD requires lambda=1, delta=0 (pure standard loss)");
        if (method == Method::skdHTL && distill.delta != 0.0)
            throw std::invalid_argument("TrainConfig: skdHTL requires delta=0 (fixed weights)");
    }
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double mean_standard = 0.0;
    double mean_distill = 0.0;
    double mean_alpha = 0.0;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    TrainConfig config;
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    EvalResult train_metrics, val_metrics, test_metrics;
    double wall_seconds = 0.0;
};

inline std::vector<ProbVector> predict_all(const TargetNetwork& net, const Matrix& x) {
    std::vector<ProbVector> out;
    out.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        out.push_back(soften_logits(forward(net, x.row(i)), 1.0));
    return out;
}

inline EvalResult evaluate_network(const TargetNetwork& net, const Dataset& data) {
    return evaluate(predict_all(net, data.features), data.labels);
}

/// Instance-level sums accumulated while assembling a batch gradient.
struct BatchStats {
    double sum_loss = 0.0;
    double sum_standard = 0.0;
    double sum_distill = 0.0;
    double sum_alpha = 0.0;
    double alpha_min = std::numeric_limits<double>::infinity();
    double alpha_max = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
};

/// Mean-of-instances gradient for one batch. For TD (source_probs empty) the
/// loss is the plain cross-entropy and the gradient p_t - y; otherwise the
/// dynamically weighted combined loss and its analytic gradient.
inline Gradients compute_batch_gradient(const TargetNetwork& net, const Matrix& features,
                                        std::span<const ProbVector> labels,
                                        std::span<const ProbVector> source_probs,
                                        std::span<const std::size_t> batch,
                                        const TrainConfig& cfg, BatchStats& stats) {
    Gradients total = zero_gradients(net);
    ForwardCache cache;
    for (const std::size_t i : batch) {
        const LogitVector logits = forward(net, features.row(i), &cache);
        const ProbVector& y = labels[i];
        double loss;
        std::vector<double> dlogits(logits.size());
        if (source_probs.empty()) {
            const ProbVector pt = soften_logits(logits, 1.0);
            loss = cross_entropy(y, pt, cfg.distill.prob_floor);
            for (std::size_t j = 0; j < dlogits.size(); ++j) dlogits[j] = pt[j] - y[j];
            stats.sum_standard += loss;
            stats.sum_alpha += 1.0;
            stats.alpha_min = std::min(stats.alpha_min, 1.0);
            stats.alpha_max = std::max(stats.alpha_max, 1.0);
        } else {
            const InstanceLoss il = instance_loss(logits, y, source_probs[i], cfg.distill);
            loss = il.total;
            dlogits = instance_loss_grad(logits, y, source_probs[i], cfg.distill);
            stats.sum_standard += il.standard_loss;
            stats.sum_distill += il.distill_loss;
            stats.sum_alpha += il.weights.alpha;
            stats.alpha_min = std::min(stats.alpha_min, il.weights.alpha);
            stats.alpha_max = std::max(stats.alpha_max, il.weights.alpha);
        }
        if (!std::isfinite(loss))
            throw NumericalError("non-finite loss at instance " + std::to_string(i));
        stats.sum_loss += loss;
        ++stats.count;
        accumulate(total, backward(net, cache, dlogits));
    }
    scale(total, 1.0 / static_cast<double>(batch.size()));
    return total;
}

struct TrainResult {
    TargetNetwork net;
    TrainReport report;
};

/// The full training procedure: per instance compute both probability
/// vectors, soften both sides, score consistency, mix the two losses with
/// the dynamic weights, average over the batch, and take an Adam step.
/// Validation accuracy drives early stopping; the best-epoch parameters are
/// restored at the end (ties keep the earlier epoch). Source predictions are
/// fetched once per instance up front: the teacher is fixed, so per-epoch
/// refetching would change nothing.
inline TrainResult train(TargetNetwork net, const SourceHypothesis* source, const SplitSet& data,
                         const TrainConfig& cfg) {
    cfg.validate();
    const bool needs_source = cfg.method != Method::TD;
    if (needs_source && !source)
        throw std::invalid_argument("train: method " + std::string(to_string(cfg.method)) +
                                    " needs a source hypothesis");
    data.train.validate();
    data.val.validate();
    data.test.validate();
    if (data.train.dim() != net.input_size())
        throw std::invalid_argument("train: feature dimension does not match the network");
    if (data.train.classes() != net.output_size())
        throw std::invalid_argument("train: class count does not match the network");
    if (needs_source && source->num_classes() != data.train.classes())
        throw std::invalid_argument("train: source class count does not match the data");

    const auto t0 = std::chrono::steady_clock::now();

    std::vector<ProbVector> source_probs;
    if (needs_source) {
        const std::size_t probe_rows = std::min<std::size_t>(4, data.train.n());
        Matrix probes(probe_rows, data.train.dim());
        for (std::size_t i = 0; i < probe_rows; ++i) {
            const auto row = data.train.features.row(i);
            std::copy(row.begin(), row.end(), probes.row(i).begin());
        }
        verify_deterministic(*source, probes);
        source_probs = source->predict_batch(data.train.features);
    }

    TrainReport report;
    report.config = cfg;

    Rng shuffle_rng(mix_seed(cfg.seed, 0x5F0FF1E));
    std::vector<std::size_t> order(data.train.n());
    std::iota(order.begin(), order.end(), 0);

    AdamState adam = AdamState::init(net, cfg.adam);
    TargetNetwork best_net = net;
    double best_val = -1.0;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        BatchStats stats;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t len =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                      order.size() - start);
            std::span<const std::size_t> batch(order.data() + start, len);
            try {
                Gradients g = compute_batch_gradient(net, data.train.features, data.train.labels,
                                                     source_probs, batch, cfg, stats);
                adam_step(net, g, adam);
            } catch (const NumericalError& e) {
                throw NumericalError("epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(start / cfg.batch_size) + ": " + e.what());
            }
        }

        const double inv_n = 1.0 / static_cast<double>(stats.count);
        EpochStats es;
        es.epoch = epoch;
        es.mean_loss = stats.sum_loss * inv_n;
        es.mean_standard = stats.sum_standard * inv_n;
        es.mean_distill = stats.sum_distill * inv_n;
        es.mean_alpha = stats.sum_alpha * inv_n;
        es.alpha_min = stats.alpha_min;
        es.alpha_max = stats.alpha_max;
        es.val_accuracy = accuracy(predict_all(net, data.val.features), data.val.labels);
        report.epochs.push_back(es);

        if (es.val_accuracy > best_val) {
            best_val = es.val_accuracy;
            best_net = net;
            report.best_epoch = epoch;
            epochs_since_best = 0;
        } else if (++epochs_since_best > cfg.patience) {
            break;
        }
    }

    net = best_net;
    report.train_metrics = evaluate_network(net, data.train);
    report.val_metrics = evaluate_network(net, data.val);
    report.test_metrics = evaluate_network(net, data.test);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(net), std::move(report)};
}

// ---------------------------------------------------------------------------
// Four-method comparison protocol
// ---------------------------------------------------------------------------

struct ProtocolConfig {
    std::vector<int> hidden = {64};
    std::vector<Method> methods = {Method::SH, Method::TD, Method::skdHTL, Method::dkdHTL};
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;
    AdamConfig adam{};
    DistillConfig skd_params{0.5, 0.0, 2.0, 1e-12};
    DistillConfig dkd_params{0.1, 0.9, 2.0, 1e-12};

    TrainConfig train_config(Method m, std::uint64_t seed) const {
        TrainConfig cfg;
        cfg.method = m;
        cfg.batch_size = batch_size;
        cfg.max_epochs = max_epochs;
        cfg.patience = patience;
        cfg.adam = adam;
        cfg.seed = seed;
        switch (m) {
            case Method::TD:
                cfg.distill = DistillConfig{1.0, 0.0, skd_params.temperature,
                                            skd_params.prob_floor};
                break;
            case Method::skdHTL: cfg.distill = skd_params; break;
            case Method::dkdHTL: cfg.distill = dkd_params; break;
            case Method::SH: break;
        }
        return cfg;
    }
};

struct MethodRun {
    Method method = Method::SH;
    EvalResult test_metrics;
    std::optional<EvalResult> train_metrics; // absent for SH: nothing is trained
    std::optional<EvalResult> val_metrics;
    std::optional<TrainReport> report;
};

/// Runs the configured methods for one seed. All trained methods start from
/// the same seeded initialization so the comparison isolates the objective.
inline std::vector<MethodRun> run_protocol(const SourceHypothesis& source,
                                           const SplitSet& target, const ProtocolConfig& pc,
                                           std::uint64_t seed) {
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(target.train.dim()));
    for (int h : pc.hidden) sizes.push_back(h);
    sizes.push_back(static_cast<int>(target.train.classes()));

    std::vector<MethodRun> rows;
    for (Method m : pc.methods) {
        MethodRun row;
        row.method = m;
        if (m == Method::SH) {
            row.test_metrics =
                evaluate(source.predict_batch(target.test.features), target.test.labels);
        } else {
            TargetNetwork net = init_network(sizes, mix_seed(seed, 0x1213));
            const TrainConfig cfg = pc.train_config(m, seed);
            auto result = train(std::move(net), m == Method::TD ? nullptr : &source, target, cfg);
            row.test_metrics = result.report.test_metrics;
            row.train_metrics = result.report.train_metrics;
            row.val_metrics = result.report.val_metrics;
            row.report = std::move(result.report);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Hyperparameter grid
// ---------------------------------------------------------------------------

struct GridCell {
    double lambda = 0.0;
    double delta = 0.0;
    double temperature = 0.0;
    bool valid = true; // lambda + delta <= 1; invalid cells are never run
    std::vector<double> seed_test_accuracy;
    double mean_test_accuracy = 0.0;
};

struct GridResult {
    std::vector<double> lambdas, deltas, temperatures;
    std::vector<std::uint64_t> seeds;
    std::vector<GridCell> cells; // lambda-major, then delta, then temperature
};

/// Bounded worker pool over [0, count); rethrows the first task failure.
inline void parallel_tasks(std::size_t count, int jobs,
                           const std::function<void(std::size_t)>& fn) {
    if (jobs < 1) jobs = 1;
    if (jobs == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Mean test accuracy of dkdHTL per (lambda, delta, temperature) cell over the
/// given seeds. Cells violating lambda + delta <= 1 are marked invalid and
/// skipped. Cells are independent and may run in parallel.
inline GridResult grid_search(const SourceHypothesis& source, const SplitSet& target,
                              const ProtocolConfig& pc, std::span<const double> lambdas,
                              std::span<const double> deltas, std::span<const double> temps,
                              std::span<const std::uint64_t> seeds, int jobs = 1,
                              const std::function<void(const GridCell&)>& on_cell = nullptr) {
    if (lambdas.empty() || deltas.empty() || temps.empty() || seeds.empty())
        throw std::invalid_argument("grid_search: empty grid axis or seed list");
    GridResult grid;
    grid.lambdas.assign(lambdas.begin(), lambdas.end());
    grid.deltas.assign(deltas.begin(), deltas.end());
    grid.temperatures.assign(temps.begin(), temps.end());
    grid.seeds.assign(seeds.begin(), seeds.end());
    for (double l : lambdas)
        for (double d : deltas)
            for (double t : temps) {
                GridCell cell;
                cell.lambda = l;
                cell.delta = d;
                cell.temperature = t;
                cell.valid = l + d <= 1.0 + 1e-9;
                grid.cells.push_back(cell);
            }

    std::mutex flush_mu;
    ProtocolConfig cell_pc = pc;
    cell_pc.methods = {Method::dkdHTL};
    parallel_tasks(grid.cells.size(), jobs, [&](std::size_t idx) {
        GridCell& cell = grid.cells[idx];
        if (!cell.valid) return;
        ProtocolConfig local = cell_pc;
        local.dkd_params = DistillConfig{cell.lambda, cell.delta, cell.temperature,
                                         pc.dkd_params.prob_floor};
        double sum = 0.0;
        for (const std::uint64_t seed : grid.seeds) {
            const auto rows = run_protocol(source, target, local, seed);
            const double acc = rows.front().test_metrics.accuracy;
            cell.seed_test_accuracy.push_back(acc);
            sum += acc;
        }
        cell.mean_test_accuracy = sum / static_cast<double>(grid.seeds.size());
        if (on_cell) {
            std::lock_guard lock(flush_mu);
            on_cell(cell);
        }
    });
    return grid;
}

} // namespace dkd
