#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrack/ids.hpp"
#include "fedtrack/policy.hpp"

namespace fedtrack {

enum class Task { Classification, Regression };

/// Contiguous run of sample indices, [begin, end).
struct SampleRange {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    auto operator<=>(const SampleRange&) const = default;
};

struct Dataset {
    Task task = Task::Classification;
    std::uint32_t dims = 0;
    std::uint32_t classes = 0; // 0 for regression
    std::vector<double> features; // sample_count x dims, row major
    std::vector<double> labels;   // class index (as double) or regression target
    std::vector<std::vector<SampleRange>> partition; // per client, ascending ranges

    std::size_t sample_count() const { return dims == 0 ? 0 : features.size() / dims; }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * dims, dims};
    }
    /// Client's sample indices in canonical (ascending) order.
    std::vector<std::uint32_t> client_samples(std::uint32_t client) const;

    bool operator==(const Dataset&) const = default;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Gaussian class clusters with Dirichlet(alpha) label proportions per
/// client. Each client owns one contiguous block of samples_per_client
/// samples, shuffled within the block so the canonical order mixes labels.
Dataset generate_synthetic(std::uint32_t clients, std::uint32_t samples_per_client,
                           std::uint32_t dims, std::uint32_t classes, double skew_alpha,
                           std::uint64_t seed);

/// Linear target over Gaussian features with per-client cluster shift and
/// additive noise; the regression stand-in for the synthetic generator.
Dataset generate_synthetic_regression(std::uint32_t clients, std::uint32_t samples_per_client,
                                      std::uint32_t dims, double noise, std::uint64_t seed);

/// Parses the IDX image/label pair bit-exactly (big-endian magics 0x803 and
/// 0x801), scaling pixels to [0,1]. The result carries no partition; call
/// partition_dataset afterwards.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::uint32_t max_samples = 0);

/// Writes a dataset back out as an IDX image/label pair (pixels rescaled to
/// bytes). Only valid for datasets whose features are byte-quantised, i.e.
/// ones that came from load_idx.
void save_idx(const Dataset& dataset, const std::filesystem::path& images,
              const std::filesystem::path& labels);

/// Dirichlet label-skew partitioning of an already-loaded dataset: for each
/// class, client shares are drawn from Dirichlet(alpha) and assigned with
/// largest-remainder rounding, so the ranges are disjoint and cover every
/// sample. Regression datasets split into equal contiguous chunks.
std::vector<std::vector<SampleRange>> partition_dataset(const Dataset& dataset,
                                                        std::uint32_t clients, double alpha,
                                                        std::uint64_t seed);

/// Builds the dataset a scenario asks for, deriving generator seeds from the
/// scenario master seed.
Dataset build_dataset(const ScenarioConfig& config);

} // namespace fedtrack
