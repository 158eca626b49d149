#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedtrack/ids.hpp"

namespace fedtrack {

/// The disagreement taxonomy: how a client deviates from unconditional
/// collaboration. Full and PartialData carry no target; the three
/// communication exclusions target exactly one peer.
enum class DisagreementType { Full, Inbound, Outbound, Bidirectional, PartialData };

const char* to_string(DisagreementType t);

/// Lifetime of an exclusion: indefinite, or expiring a fixed number of
/// rounds after activation. The activity window is half-open, so a
/// temporary(e) rule is active on exactly e consecutive rounds.
struct Duration {
    std::optional<RoundIndex> expiry; // nullopt = indefinite

    static Duration indefinite() { return {}; }
    static Duration temporary(RoundIndex rounds) { return {rounds}; }
    bool is_temporary() const { return expiry.has_value(); }

    bool operator==(const Duration&) const = default;
};

/// Shallow affects only future aggregations; Deep retroactively removes the
/// excluded client's historical contributions (rewind).
enum class Depth { Shallow, Deep };

/// One declared exclusion rule.
struct Disagreement {
    ClientId initiator;
    std::optional<ClientId> target;
    DisagreementType type = DisagreementType::Inbound;
    Duration duration = Duration::indefinite();
    Depth depth = Depth::Shallow;
    RoundIndex start_round = 0;
    std::optional<double> data_mask; // PartialData only, in [0,1)

    bool requires_target() const {
        return type == DisagreementType::Inbound || type == DisagreementType::Outbound ||
               type == DisagreementType::Bidirectional;
    }

    bool active_at(RoundIndex round) const {
        if (round < start_round) return false;
        if (duration.is_temporary() && round >= start_round + *duration.expiry) return false;
        return true;
    }
};

enum class ResolverKind { Robust, Naive };
enum class RewindMode { Reaggregate, Retrain };

struct DatasetSpec {
    enum class Kind { SyntheticClassification, SyntheticRegression, MnistIdx };
    Kind kind = Kind::SyntheticClassification;
    // synthetic
    std::uint32_t samples_per_client = 120;
    std::uint32_t dims = 16;
    std::uint32_t classes = 10;
    double skew_alpha = 0.5;
    double noise = 0.1; // regression target noise
    // mnist
    std::string images_path;
    std::string labels_path;
    std::uint32_t max_samples = 0; // 0 = all
};

struct LearnerParams {
    std::uint32_t epochs = 1;
    std::uint32_t batch_size = 32;
    double learning_rate = 0.05;
};

/// Everything needed to reproduce one run. Encodes a scenario on disk as
/// JSON with schema_version 1.
struct ScenarioConfig {
    std::uint32_t client_count = 0;
    RoundIndex rounds = 1;
    std::vector<Disagreement> disagreements;
    ResolverKind resolver = ResolverKind::Robust;
    RewindMode rewind_mode = RewindMode::Reaggregate;
    DatasetSpec dataset;
    LearnerParams learner;
    std::uint64_t seed = 1;
};

struct ValidationError {
    int disagreement_index = -1; // -1 = config-level problem
    std::string rule;
    std::string message;
};

/// Checks a config against the taxonomy invariants. An empty result means
/// the config is well-formed; each error names the offending disagreement
/// and the rule it breaks.
std::vector<ValidationError> validate_scenario(const ScenarioConfig& config);

/// The disagreements whose activity window covers `round`, in config order.
std::vector<Disagreement> active_disagreements(const ScenarioConfig& config, RoundIndex round);

bool any_deep(const ScenarioConfig& config);

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::filesystem::path& file);
std::string scenario_to_json(const ScenarioConfig& config);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& file);

std::vector<ClientId> make_roster(std::uint32_t client_count);

} // namespace fedtrack
