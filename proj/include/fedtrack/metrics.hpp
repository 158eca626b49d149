#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedtrack/engine.hpp"
#include "fedtrack/policy.hpp"
#include "fedtrack/provenance.hpp"

namespace fedtrack {

std::string metrics_csv(const std::vector<RoundRecord>& records);
std::string timings_csv(const std::vector<RoundRecord>& records);

/// Models produced in one round: one aggregate per entity plus every
/// submitted local update. Matches the file count under rounds/<r>/tracks
/// when model persistence is on.
std::size_t round_model_count(const RoundRecord& record);

/// Scalability sweep over one scenario dimension. Combined scales the
/// population, the disagreeing share and the per-client exclusion count
/// together (the heaviest configuration).
struct SweepSpec {
    enum class Dimension { TotalClients, DisagreeingClients, Density, Combined };
    Dimension dimension = Dimension::TotalClients;
    std::vector<std::uint32_t> grid; // strictly increasing
    std::uint32_t repetitions = 5;
    ScenarioConfig base;
};

SweepSpec parse_sweep(const std::string& json_text);
SweepSpec load_sweep(const std::filesystem::path& file);

/// The concrete scenario for one grid value of the sweep dimension.
ScenarioConfig materialize_sweep_scenario(const SweepSpec& spec, std::uint32_t value);

std::uint64_t sweep_rep_seed(std::uint64_t base_seed, std::uint32_t value, std::uint32_t rep);

struct SweepPoint {
    std::uint32_t value = 0;
    std::vector<double> rep_total_ns;
    double mean_total_ns = 0.0;
    double std_total_ns = 0.0;
    double mean_analyse_ns = 0.0;
    double mean_train_ns = 0.0;
    double mean_aggregate_ns = 0.0;
    double mean_evaluate_ns = 0.0;
    std::vector<std::uint64_t> metric_digests; // one per repetition, timing-free
};

struct SweepReport {
    SweepSpec::Dimension dimension = SweepSpec::Dimension::TotalClients;
    std::uint32_t repetitions = 1;
    std::vector<SweepPoint> points;
};

SweepReport run_sweep(const SweepSpec& spec);
std::string sweep_csv(const SweepReport& report);

/// Least-squares slope of log(y) against log(x): the growth exponent behind
/// the runtime-vs-scale curves.
double fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys);

/// Stable digest of a run's metric values (losses, metrics, members), used
/// to compare repetitions without timing noise.
std::uint64_t metrics_digest(const std::vector<RoundRecord>& records);

struct TimelineArtifact {
    std::string csv; // rounds x entities, cells list contributing clients
    std::string svg; // entity lifespans as horizontal bars
};

TimelineArtifact emit_timeline(const RunLog& run);

} // namespace fedtrack
