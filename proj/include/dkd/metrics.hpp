#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dkd/prob.hpp"

namespace dkd {

/// Fraction of instances where argmax(pred) == argmax(label).
/// Argmax ties resolve to the lowest class index on both sides.
inline double accuracy(std::span<const ProbVector> preds, std::span<const ProbVector> labels) {
    if (preds.empty() || preds.size() != labels.size())
        throw std::invalid_argument("accuracy: empty or misaligned inputs");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        correct += preds[i].argmax() == labels[i].argmax();
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

/// Probability that a random positive outscores a random negative, with ties
/// counted half. Computed from tie-averaged ranks; identical to trapezoidal
/// integration of the ROC curve. Returns nullopt when either class is absent.
inline std::optional<double> auroc_binary(std::span<const double> scores,
                                          std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auroc_binary: misaligned inputs");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (int l : labels) pos += (l != 0);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // 1-based ranks i+1 .. j averaged across the tie group
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) pos_rank_sum += avg_rank;
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double favorable = pos_rank_sum - p * (p + 1.0) / 2.0;
    return favorable / (p * static_cast<double>(neg));
}

/// Average precision: mean over positives of precision at their rank, ranks
/// taken in (score descending, original index ascending) order. Step-wise,
/// no interpolation. Returns nullopt when there are no positives.
inline std::optional<double> auprc_binary(std::span<const double> scores,
                                          std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auprc_binary: misaligned inputs");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (int l : labels) pos += (l != 0);
    if (pos == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    double sum = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        if (!labels[order[k - 1]]) continue;
        ++tp;
        sum += static_cast<double>(tp) / static_cast<double>(k);
    }
    return sum / static_cast<double>(pos);
}

namespace detail {
template <typename Metric>
std::optional<double> one_vs_rest_mean(std::span<const ProbVector> preds,
                                       std::span<const ProbVector> labels, Metric metric) {
    if (preds.empty() || preds.size() != labels.size())
        throw std::invalid_argument("macro metric: empty or misaligned inputs");
    const std::size_t classes = preds[0].size();
    double sum = 0.0;
    std::size_t defined = 0;
    std::vector<double> scores(preds.size());
    std::vector<int> bin(preds.size());
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < preds.size(); ++i) {
            scores[i] = preds[i][c];
            bin[i] = labels[i].argmax() == c ? 1 : 0;
        }
        if (auto v = metric(scores, bin)) {
            sum += *v;
            ++defined;
        }
    }
    if (defined == 0) return std::nullopt;
    return sum / static_cast<double>(defined);
}
} // namespace detail

/// One-vs-rest macro AUC: per class, the predicted probability of that class
/// scores membership; classes whose curve is undefined on this split are
/// skipped; unweighted mean over the rest.
inline std::optional<double> auroc_macro(std::span<const ProbVector> preds,
                                         std::span<const ProbVector> labels) {
    return detail::one_vs_rest_mean(preds, labels, [](auto s, auto l) {
        return auroc_binary(std::span<const double>(s), std::span<const int>(l));
    });
}

inline std::optional<double> auprc_macro(std::span<const ProbVector> preds,
                                         std::span<const ProbVector> labels) {
    return detail::one_vs_rest_mean(preds, labels, [](auto s, auto l) {
        return auprc_binary(std::span<const double>(s), std::span<const int>(l));
    });
}

struct ClassMetrics {
    std::size_t cls = 0;
    std::size_t support = 0;
    std::optional<double> auroc;
    std::optional<double> auprc;
};

struct EvalResult {
    double accuracy = 0.0;
    std::optional<double> auroc; // nullopt marks an undefined curve
    std::optional<double> auprc;
    std::size_t n = 0;
    std::vector<ClassMetrics> per_class;
};

inline EvalResult evaluate(std::span<const ProbVector> preds, std::span<const ProbVector> labels) {
    EvalResult r;
    r.accuracy = accuracy(preds, labels);
    r.auroc = auroc_macro(preds, labels);
    r.auprc = auprc_macro(preds, labels);
    r.n = preds.size();
    const std::size_t classes = preds[0].size();
    std::vector<double> scores(preds.size());
    std::vector<int> bin(preds.size());
    for (std::size_t c = 0; c < classes; ++c) {
        ClassMetrics cm;
        cm.cls = c;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            scores[i] = preds[i][c];
            bin[i] = labels[i].argmax() == c ? 1 : 0;
            cm.support += bin[i];
        }
        cm.auroc = auroc_binary(scores, bin);
        cm.auprc = auprc_binary(scores, bin);
        r.per_class.push_back(cm);
    }
    return r;
}

} // namespace dkd
