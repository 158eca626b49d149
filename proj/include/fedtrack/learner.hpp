#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedtrack/data.hpp"
#include "fedtrack/policy.hpp"

namespace fedtrack {

/// Flat parameter layout: classification stores classes x (dims+1) rows
/// (bias last), regression a single (dims+1) row.
std::size_t model_size(const Dataset& dataset);

/// Common random initialisation shared by every track at round 0.
std::vector<double> initial_weights(const Dataset& dataset, std::uint64_t seed);

/// E epochs of mini-batch gradient descent over the given sample indices.
/// Pure function of its inputs; the seed drives per-epoch batch shuffling.
std::vector<double> train_sgd(const Dataset& dataset, std::span<const double> weights,
                              std::span<const std::uint32_t> samples, const LearnerParams& params,
                              std::uint64_t seed);

struct EvalResult {
    double loss = 0.0;   // mean cross-entropy or mean squared error
    double metric = 0.0; // accuracy or RMSE
};

EvalResult evaluate(const Dataset& dataset, std::span<const double> weights,
                    std::span<const std::uint32_t> samples);

bool all_finite(std::span<const double> values);

} // namespace fedtrack
