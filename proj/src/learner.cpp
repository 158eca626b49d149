#include "fedtrack/learner.hpp"

#include <algorithm>
#include <cmath>

#include "fedtrack/rng.hpp"

namespace fedtrack {

std::size_t model_size(const Dataset& dataset) {
    const std::size_t row = dataset.dims + 1; // bias folded in
    return dataset.task == Task::Classification ? row * dataset.classes : row;
}

std::vector<double> initial_weights(const Dataset& dataset, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> weights(model_size(dataset));
    for (double& w : weights) w = 0.01 * rng.normal();
    return weights;
}

namespace {

// Softmax probabilities for one sample, numerically stabilised.
void softmax_probs(const Dataset& ds, std::span<const double> w, std::span<const double> x,
                   std::vector<double>& probs) {
    const std::size_t row = ds.dims + 1;
    double max_logit = -1e300;
    for (std::uint32_t k = 0; k < ds.classes; ++k) {
        const double* wk = w.data() + k * row;
        double z = wk[ds.dims];
        for (std::uint32_t d = 0; d < ds.dims; ++d) z += wk[d] * x[d];
        probs[k] = z;
        max_logit = std::max(max_logit, z);
    }
    double denom = 0.0;
    for (std::uint32_t k = 0; k < ds.classes; ++k) {
        probs[k] = std::exp(probs[k] - max_logit);
        denom += probs[k];
    }
    for (std::uint32_t k = 0; k < ds.classes; ++k) probs[k] /= denom;
}

double predict_linear(const Dataset& ds, std::span<const double> w, std::span<const double> x) {
    double z = w[ds.dims];
    for (std::uint32_t d = 0; d < ds.dims; ++d) z += w[d] * x[d];
    return z;
}

} // namespace

std::vector<double> train_sgd(const Dataset& dataset, std::span<const double> weights,
                              std::span<const std::uint32_t> samples, const LearnerParams& params,
                              std::uint64_t seed) {
    std::vector<double> w(weights.begin(), weights.end());
    if (samples.empty() || params.epochs == 0) return w;

    Rng rng(seed);
    std::vector<std::uint32_t> order(samples.begin(), samples.end());
    const std::size_t batch = std::max<std::size_t>(1, params.batch_size);
    const std::size_t row = dataset.dims + 1;
    std::vector<double> grad(w.size());
    std::vector<double> probs(dataset.classes);

    for (std::uint32_t epoch = 0; epoch < params.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);

            for (std::size_t i = start; i < end; ++i) {
                const auto x = dataset.row(order[i]);
                if (dataset.task == Task::Classification) {
                    softmax_probs(dataset, w, x, probs);
                    const auto label = static_cast<std::uint32_t>(dataset.labels[order[i]]);
                    for (std::uint32_t k = 0; k < dataset.classes; ++k) {
                        const double delta = probs[k] - (k == label ? 1.0 : 0.0);
                        double* gk = grad.data() + k * row;
                        for (std::uint32_t d = 0; d < dataset.dims; ++d) gk[d] += delta * x[d];
                        gk[dataset.dims] += delta;
                    }
                } else {
                    const double delta = 2.0 * (predict_linear(dataset, w, x) - dataset.labels[order[i]]);
                    for (std::uint32_t d = 0; d < dataset.dims; ++d) grad[d] += delta * x[d];
                    grad[dataset.dims] += delta;
                }
            }
            for (std::size_t j = 0; j < w.size(); ++j)
                w[j] -= params.learning_rate * scale * grad[j];
        }
    }
    return w;
}

EvalResult evaluate(const Dataset& dataset, std::span<const double> weights,
                    std::span<const std::uint32_t> samples) {
    EvalResult result;
    if (samples.empty()) return result;

    if (dataset.task == Task::Classification) {
        std::vector<double> probs(dataset.classes);
        std::size_t correct = 0;
        double loss = 0.0;
        for (const std::uint32_t i : samples) {
            softmax_probs(dataset, weights, dataset.row(i), probs);
            const auto label = static_cast<std::uint32_t>(dataset.labels[i]);
            loss += -std::log(std::max(probs[label], 1e-300));
            const auto best = static_cast<std::uint32_t>(
                std::max_element(probs.begin(), probs.end()) - probs.begin());
            if (best == label) ++correct;
        }
        result.loss = loss / static_cast<double>(samples.size());
        result.metric = static_cast<double>(correct) / static_cast<double>(samples.size());
    } else {
        double sq = 0.0;
        for (const std::uint32_t i : samples) {
            const double err = predict_linear(dataset, weights, dataset.row(i)) - dataset.labels[i];
            sq += err * err;
        }
        result.loss = sq / static_cast<double>(samples.size());
        result.metric = std::sqrt(result.loss);
    }
    return result;
}

bool all_finite(std::span<const double> values) {
    for (const double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace fedtrack
