#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dkd/prob.hpp"

namespace dkd {

/// Hyperparameters of the dynamically weighted distillation loss.
///
/// `lambda` is the floor of the standard-loss weight, `delta` the width of
/// the dynamic range on top of it, `temperature` the softening divisor, and
/// `prob_floor` the clamping epsilon applied before every log. Note the loss
/// mixes the raw standard and distillation terms with weights alpha/beta
/// directly; there is no T^2 rescaling of the soft term as in classic
/// distillation setups.
struct DistillConfig {
    double lambda = 0.5;
    double delta = 0.0;
    double temperature = 2.0;
    double prob_floor = 1e-12;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("DistillConfig: lambda must be in [0,1]");
        if (!(delta >= 0.0 && delta <= 1.0))
            throw std::invalid_argument("DistillConfig: delta must be in [0,1]");
        if (lambda + delta > 1.0 + 1e-9)
            throw std::invalid_argument("DistillConfig: lambda + delta must not exceed 1");
        if (!(temperature > 0.0) || !std::isfinite(temperature))
            throw std::invalid_argument("DistillConfig: temperature must be positive");
        if (!(prob_floor > 0.0 && prob_floor <= 1e-3))
            throw std::invalid_argument("DistillConfig: prob_floor must be in (0, 1e-3]");
    }
};

/// Per-instance mixing coefficients; alpha weights the standard loss,
/// beta = 1 - alpha the distillation loss.
struct WeightPair {
    double alpha = 1.0;
    double beta = 0.0;
};

/// Temperature softmax over logits: exp(z_j/T) / sum_k exp(z_k/T),
/// computed with max subtraction.
inline ProbVector soften_logits(const LogitVector& z, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw std::invalid_argument("soften_logits: temperature must be positive");
    const auto& v = z.values();
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    std::vector<double> e(v.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        e[j] = std::exp((v[j] - m) / temperature);
        sum += e[j];
    }
    for (double& x : e) x /= sum;
    return ProbVector::from_normalized(std::move(e));
}

/// Temperature softening of an already-normalized probability vector:
/// p_j^{1/T} renormalized. This is the black-box-side counterpart of
/// soften_logits for a source whose logits are unobservable; the unknown
/// additive logit constant cancels in the normalization. Entries are clamped
/// to [floor, 1] first, and the largest entry is divided out before the
/// power so the sum can never underflow.
inline ProbVector soften_probs(const ProbVector& p, double temperature, double floor = 1e-12) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw std::invalid_argument("soften_probs: temperature must be positive");
    if (!(floor > 0.0))
        throw std::invalid_argument("soften_probs: floor must be positive");
    const std::size_t n = p.size();
    std::vector<double> c(n);
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        c[j] = std::clamp(p[j], floor, 1.0);
        m = std::max(m, c[j]);
    }
    const double inv_t = 1.0 / temperature;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        c[j] = std::pow(c[j] / m, inv_t);
        sum += c[j];
    }
    for (double& x : c) x /= sum;
    return ProbVector::from_normalized(std::move(c));
}

/// H(target, pred) = -sum_j target_j * log(pred_j), with pred clamped to
/// [floor, 1] before the log. Accepts soft targets, not just one-hot.
inline double cross_entropy(const ProbVector& target, const ProbVector& pred,
                            double floor = 1e-12) {
    if (target.size() != pred.size())
        throw std::invalid_argument("cross_entropy: length mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        if (target[j] != 0.0)
            s += target[j] * std::log(std::clamp(pred[j], floor, 1.0));
    }
    return s == 0.0 ? 0.0 : -s;
}

/// Cross-entropy between the softened source distribution and the softened
/// target distribution. The target side is softened from its own logits;
/// the source side from its predicted probabilities, since a black-box
/// source exposes nothing else.
inline double distillation_loss(const LogitVector& target_logits, const ProbVector& source_probs,
                                double temperature, double floor = 1e-12) {
    const ProbVector soft_target = soften_logits(target_logits, temperature);
    const ProbVector soft_source = soften_probs(source_probs, temperature, floor);
    return cross_entropy(soft_source, soft_target, floor);
}

/// exp(-H(label, source_probs)) in (0, 1]; scores how consistent the source
/// prediction is with the ground-truth label. For a one-hot label this is
/// just the (clamped) source probability on the true class. Uses the raw
/// source probabilities; temperature plays no role here.
inline double consistency_score(const ProbVector& label, const ProbVector& source_probs,
                                double floor = 1e-12) {
    return std::exp(-cross_entropy(label, source_probs, floor));
}

/// Instance-wise mixing weights: alpha = lambda + delta * (1 - S),
/// beta = 1 - alpha. A consistent source (S near 1) pulls alpha down to
/// lambda, handing weight to distillation; an inconsistent one pushes alpha
/// up to lambda + delta, protecting the instance from negative transfer.
inline WeightPair dynamic_weights(double consistency, const DistillConfig& cfg) {
    cfg.validate();
    if (!(consistency >= 0.0 && consistency <= 1.0))
        throw std::invalid_argument("dynamic_weights: consistency score outside [0,1]");
    double alpha = cfg.lambda + cfg.delta * (1.0 - consistency);
    if (alpha > 1.0) alpha = 1.0;
    return {alpha, 1.0 - alpha};
}

/// Everything the combined per-instance loss produces.
struct InstanceLoss {
    double total = 0.0;         // alpha * standard + beta * distill
    double standard_loss = 0.0; // cross-entropy against the hard label
    double distill_loss = 0.0;  // softened cross-entropy against the source
    double consistency = 0.0;
    WeightPair weights;
};

/// Combined loss alpha*L1 + beta*L2 for one instance.
/// L1 uses the plain (T=1) softmax of the target logits; L2 the
/// temperature-softened pair.
inline InstanceLoss instance_loss(const LogitVector& target_logits, const ProbVector& label,
                                  const ProbVector& source_probs, const DistillConfig& cfg) {
    cfg.validate();
    const ProbVector target_probs = soften_logits(target_logits, 1.0);
    InstanceLoss out;
    out.standard_loss = cross_entropy(label, target_probs, cfg.prob_floor);
    out.distill_loss =
        distillation_loss(target_logits, source_probs, cfg.temperature, cfg.prob_floor);
    out.consistency = consistency_score(label, source_probs, cfg.prob_floor);
    out.weights = dynamic_weights(out.consistency, cfg);
    out.total = out.weights.alpha * out.standard_loss + out.weights.beta * out.distill_loss;
    return out;
}

/// Analytic gradient of instance_loss with respect to the target logits:
///   alpha * (p_t - y) + (beta / T) * (softened p_t - softened p_s).
/// alpha, beta and the softened source are constants w.r.t. the logits.
inline std::vector<double> instance_loss_grad(const LogitVector& target_logits,
                                              const ProbVector& label,
                                              const ProbVector& source_probs,
                                              const DistillConfig& cfg) {
    cfg.validate();
    const ProbVector target_probs = soften_logits(target_logits, 1.0);
    const ProbVector soft_target = soften_logits(target_logits, cfg.temperature);
    const ProbVector soft_source = soften_probs(source_probs, cfg.temperature, cfg.prob_floor);
    const double s = consistency_score(label, source_probs, cfg.prob_floor);
    const WeightPair w = dynamic_weights(s, cfg);
    const double soft_scale = w.beta / cfg.temperature;
    std::vector<double> g(target_logits.size());
    for (std::size_t j = 0; j < g.size(); ++j)
        g[j] = w.alpha * (target_probs[j] - label[j]) +
               soft_scale * (soft_target[j] - soft_source[j]);
    return g;
}

} // namespace dkd
