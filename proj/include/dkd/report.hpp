#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dkd/metrics.hpp"
#include "dkd/trainer.hpp"

namespace dkd {

// Machine-readable reports deliberately carry no wall-clock values or
// timestamps: a rerun with the same config and seed must produce identical
// bytes. Timing goes to stdout.

inline nlohmann::json to_json(const EvalResult& r) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& c : r.per_class) {
        per_class.push_back({{"class", c.cls},
                             {"support", c.support},
                             {"auroc", c.auroc ? nlohmann::json(*c.auroc) : nullptr},
                             {"auprc", c.auprc ? nlohmann::json(*c.auprc) : nullptr}});
    }
    return {{"accuracy", r.accuracy},
            {"auroc", r.auroc ? nlohmann::json(*r.auroc) : nullptr},
            {"auprc", r.auprc ? nlohmann::json(*r.auprc) : nullptr},
            {"n", r.n},
            {"per_class", per_class}};
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"method", to_string(c.method)},
            {"lambda", c.distill.lambda},
            {"delta", c.distill.delta},
            {"temperature", c.distill.temperature},
            {"prob_floor", c.distill.prob_floor},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"seed", c.seed},
            {"learning_rate", c.adam.learning_rate},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"epsilon", c.adam.epsilon}};
}

inline nlohmann::json to_json(const EpochStats& e) {
    return {{"epoch", e.epoch},
            {"loss", e.mean_loss},
            {"standard_loss", e.mean_standard},
            {"distill_loss", e.mean_distill},
            {"alpha_mean", e.mean_alpha},
            {"alpha_min", e.alpha_min},
            {"alpha_max", e.alpha_max},
            {"val_accuracy", e.val_accuracy}};
}

inline nlohmann::json to_json(const TrainReport& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : r.epochs) epochs.push_back(to_json(e));
    return {{"config", to_json(r.config)},
            {"best_epoch", r.best_epoch},
            {"epochs", epochs},
            {"train", to_json(r.train_metrics)},
            {"val", to_json(r.val_metrics)},
            {"test", to_json(r.test_metrics)}};
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0; // population
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd out;
    if (xs.empty()) return out;
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    for (double x : xs) out.stddev += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(out.stddev / static_cast<double>(xs.size()));
    return out;
}

/// One protocol method aggregated across seeds.
struct MethodAggregate {
    Method method = Method::SH;
    std::vector<MethodRun> seed_runs; // aligned with the seed list
    MeanStd test_accuracy;
    std::optional<MeanStd> val_accuracy, train_accuracy;
    std::optional<MeanStd> test_auroc, test_auprc;
};

struct ProtocolOutcome {
    std::vector<std::uint64_t> seeds;
    std::vector<MethodAggregate> methods;
};

/// Collects per-seed protocol rows (runs[seed_index][method_index]) into
/// across-seed aggregates.
inline ProtocolOutcome aggregate_protocol(const std::vector<std::uint64_t>& seeds,
                                          const std::vector<std::vector<MethodRun>>& runs) {
    ProtocolOutcome out;
    out.seeds = seeds;
    if (runs.empty()) return out;
    const std::size_t n_methods = runs.front().size();
    for (std::size_t m = 0; m < n_methods; ++m) {
        MethodAggregate agg;
        agg.method = runs.front()[m].method;
        std::vector<double> test_acc, val_acc, train_acc, test_roc, test_prc;
        for (const auto& per_seed : runs) {
            const MethodRun& run = per_seed[m];
            agg.seed_runs.push_back(run);
            test_acc.push_back(run.test_metrics.accuracy);
            if (run.val_metrics) val_acc.push_back(run.val_metrics->accuracy);
            if (run.train_metrics) train_acc.push_back(run.train_metrics->accuracy);
            if (run.test_metrics.auroc) test_roc.push_back(*run.test_metrics.auroc);
            if (run.test_metrics.auprc) test_prc.push_back(*run.test_metrics.auprc);
        }
        agg.test_accuracy = mean_std(test_acc);
        if (!val_acc.empty()) agg.val_accuracy = mean_std(val_acc);
        if (!train_acc.empty()) agg.train_accuracy = mean_std(train_acc);
        if (test_roc.size() == runs.size()) agg.test_auroc = mean_std(test_roc);
        if (test_prc.size() == runs.size()) agg.test_auprc = mean_std(test_prc);
        out.methods.push_back(std::move(agg));
    }
    return out;
}

inline nlohmann::json to_json(const ProtocolOutcome& out) {
    auto ms = [](const MeanStd& m) {
        return nlohmann::json{{"mean", m.mean}, {"stddev", m.stddev}};
    };
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& agg : out.methods) {
        nlohmann::json seed_runs = nlohmann::json::array();
        for (std::size_t s = 0; s < agg.seed_runs.size(); ++s) {
            const MethodRun& run = agg.seed_runs[s];
            nlohmann::json j{{"seed", out.seeds[s]},
                             {"test", to_json(run.test_metrics)},
                             {"val", run.val_metrics ? to_json(*run.val_metrics)
                                                     : nlohmann::json(nullptr)},
                             {"train", run.train_metrics ? to_json(*run.train_metrics)
                                                         : nlohmann::json(nullptr)}};
            j["report"] = run.report ? to_json(*run.report) : nlohmann::json(nullptr);
            seed_runs.push_back(std::move(j));
        }
        methods.push_back(
            {{"method", to_string(agg.method)},
             {"summary",
              {{"test_accuracy", ms(agg.test_accuracy)},
               {"val_accuracy", agg.val_accuracy ? ms(*agg.val_accuracy) : nlohmann::json(nullptr)},
               {"train_accuracy",
                agg.train_accuracy ? ms(*agg.train_accuracy) : nlohmann::json(nullptr)},
               {"test_auroc", agg.test_auroc ? ms(*agg.test_auroc) : nlohmann::json(nullptr)},
               {"test_auprc", agg.test_auprc ? ms(*agg.test_auprc) : nlohmann::json(nullptr)}}},
             {"seed_runs", seed_runs}});
    }
    return {{"schema", "dkd-protocol-report/1"}, {"seeds", out.seeds}, {"methods", methods}};
}

namespace detail {

inline std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

inline std::string pct_pair(const MeanStd& m) { return pct(m.mean) + " (" + pct(m.stddev) + ")"; }

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

} // namespace detail

/// Table with one row per method: test/val/train accuracy as mean percent
/// with the across-seed deviation in brackets. The best test accuracy among
/// the trained methods is wrapped in ** **.
inline std::string render_protocol_table(const ProtocolOutcome& out) {
    double best_trained = -1.0;
    for (const auto& agg : out.methods)
        if (agg.method != Method::SH) best_trained = std::max(best_trained, agg.test_accuracy.mean);

    std::string text;
    text += detail::pad("METHOD", 10) + detail::pad("test acc", 20) + detail::pad("val acc", 20) +
            "train acc\n";
    for (const auto& agg : out.methods) {
        std::string test = detail::pct_pair(agg.test_accuracy);
        if (agg.method != Method::SH && agg.test_accuracy.mean == best_trained)
            test = "**" + test + "**";
        text += detail::pad(to_string(agg.method), 10) + detail::pad(test, 20) +
                detail::pad(agg.val_accuracy ? detail::pct_pair(*agg.val_accuracy) : "-", 20) +
                (agg.train_accuracy ? detail::pct_pair(*agg.train_accuracy) : "-") + "\n";
    }
    return text;
}

inline nlohmann::json to_json(const GridResult& grid) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : grid.cells) {
        cells.push_back({{"lambda", c.lambda},
                         {"delta", c.delta},
                         {"temperature", c.temperature},
                         {"valid", c.valid},
                         {"seed_test_accuracy", c.seed_test_accuracy},
                         {"mean_test_accuracy",
                          c.valid ? nlohmann::json(c.mean_test_accuracy) : nullptr}});
    }

    // row averages over temperatures, column averages over (lambda, delta) rows
    nlohmann::json rows = nlohmann::json::array();
    for (double l : grid.lambdas)
        for (double d : grid.deltas) {
            std::vector<double> vals;
            for (const auto& c : grid.cells)
                if (c.valid && c.lambda == l && c.delta == d)
                    vals.push_back(c.mean_test_accuracy);
            rows.push_back({{"lambda", l},
                            {"delta", d},
                            {"mean", vals.empty() ? nlohmann::json(nullptr)
                                                  : nlohmann::json(mean_std(vals).mean)}});
        }
    nlohmann::json cols = nlohmann::json::array();
    for (double t : grid.temperatures) {
        std::vector<double> vals;
        for (const auto& c : grid.cells)
            if (c.valid && c.temperature == t) vals.push_back(c.mean_test_accuracy);
        cols.push_back({{"temperature", t},
                        {"mean", vals.empty() ? nlohmann::json(nullptr)
                                              : nlohmann::json(mean_std(vals).mean)}});
    }

    return {{"schema", "dkd-grid-report/1"},
            {"lambda", grid.lambdas},
            {"delta", grid.deltas},
            {"temperature", grid.temperatures},
            {"seeds", grid.seeds},
            {"cells", cells},
            {"row_average", rows},
            {"column_average", cols}};
}

/// Grid table: one row per (lambda, delta), one column per temperature, plus
/// AVERAGE row and column. Invalid cells print "-".
inline std::string render_grid_table(const GridResult& grid) {
    std::string text = detail::pad("lambda", 9) + detail::pad("delta", 9);
    for (double t : grid.temperatures) {
        char head[24];
        std::snprintf(head, sizeof head, "T=%g", t);
        text += detail::pad(head, 10);
    }
    text += "AVERAGE\n";

    auto cell_at = [&](double l, double d, double t) -> const GridCell* {
        for (const auto& c : grid.cells)
            if (c.lambda == l && c.delta == d && c.temperature == t) return &c;
        return nullptr;
    };

    const double kBest = [&] {
        double best = -1.0;
        for (const auto& c : grid.cells)
            if (c.valid) best = std::max(best, c.mean_test_accuracy);
        return best;
    }();

    for (double l : grid.lambdas)
        for (double d : grid.deltas) {
            char head[24];
            std::snprintf(head, sizeof head, "%.2f", l);
            text += detail::pad(head, 9);
            std::snprintf(head, sizeof head, "%.2f", d);
            text += detail::pad(head, 9);
            std::vector<double> vals;
            for (double t : grid.temperatures) {
                const GridCell* c = cell_at(l, d, t);
                if (c && c->valid) {
                    std::string v = detail::pct(c->mean_test_accuracy);
                    if (c->mean_test_accuracy == kBest) v = "**" + v + "**";
                    text += detail::pad(v, 10);
                    vals.push_back(c->mean_test_accuracy);
                } else {
                    text += detail::pad("-", 10);
                }
            }
            text += vals.empty() ? "-" : detail::pct(mean_std(vals).mean);
            text += "\n";
        }

    text += detail::pad("AVERAGE", 18);
    for (double t : grid.temperatures) {
        std::vector<double> vals;
        for (const auto& c : grid.cells)
            if (c.valid && c.temperature == t) vals.push_back(c.mean_test_accuracy);
        text += detail::pad(vals.empty() ? "-" : detail::pct(mean_std(vals).mean), 10);
    }
    text += "-\n";
    return text;
}

} // namespace dkd
