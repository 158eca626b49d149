#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedtrack/influence.hpp"
#include "fedtrack/policy.hpp"

namespace fedtrack {

enum class ViolationKind { Contamination, Unfairness };

struct Violation {
    ViolationKind kind = ViolationKind::Contamination;
    RoundIndex round = 0;
    ClientId affected;
    std::string offender; // leaked pair ("C3@5") or lineage edge ("C1 base client_C1")
    std::string detail;
};

/// One submitted local update: which client, how many samples, and which
/// entity's pre-round model it was trained from.
struct LineageUpdate {
    ClientId client;
    std::uint64_t samples = 0;
    std::string base_entity;
};

/// Audit trail of a deep rewind: the lineage chain that was rebuilt and the
/// contributors actually averaged (or replayed) per historical round.
struct RewindRecord {
    RewindMode mode = RewindMode::Reaggregate;
    std::vector<ClientId> excluded;
    RoundIndex upto = -1;                            // last rebuilt round; -1 = nothing to rebuild
    std::vector<std::string> chain;                  // entity id per round 0..upto
    std::vector<std::vector<ClientId>> contributors; // per round 0..upto
};

struct LineageBase {
    enum class Kind { Init, Carry, Seed, Rewind };
    Kind kind = Kind::Init;
    std::string from; // Carry/Seed: entity id at the previous round
    std::optional<RewindRecord> rewind;
};

/// One model lineage node for one round: a track in robust mode, a
/// per-client personalised model in naive mode.
struct LineageEntity {
    std::string id;
    std::vector<ClientId> sources; // aggregation sources (track members / naive source set)
    std::vector<ClientId> served;  // clients that receive this model
    LineageBase base;
    std::vector<LineageUpdate> updates; // sorted by client
};

struct RoundLineage {
    RoundIndex round = 0;
    std::vector<LineageEntity> entities;
};

/// The persisted record of a run: enough to recompute every influence set
/// and replay every violation without the engine.
struct RunLog {
    ScenarioConfig config;
    std::vector<RoundLineage> rounds;
};

struct LineageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Influence sets reconstructed purely from lineage. `pre` is the model an
/// entity starts the round with, `aggregate` the model after aggregation.
struct RecomputedInfluence {
    std::map<std::pair<RoundIndex, std::string>, InfluenceSet> pre;
    std::map<std::pair<RoundIndex, std::string>, InfluenceSet> aggregate;
};

RecomputedInfluence recompute_influence(const RunLog& run);

/// The inbound-centric exclusion constraints in force at `round`: watcher
/// must not receive influence of excluded from cutoff on (or at all, when a
/// deep exclusion runs under retrain rewinds).
struct ExclusionConstraint {
    ClientId watcher;
    ClientId excluded;
    RoundIndex cutoff = 0;
    bool strict = false;
};

std::vector<ExclusionConstraint> exclusion_constraints(const ScenarioConfig& config,
                                                       RoundIndex round);

/// Verifies that no model delivered to a client carries influence it has
/// excluded: shallow exclusions forbid pairs from the activation round on,
/// completed deep retrain rewinds forbid the excluded client entirely, and
/// rebuilt aggregates must not retain direct contributions of the excluded.
std::vector<Violation> check_isolation(const RunLog& run);

/// Verifies that every aggregated update was trained from the model its
/// receiving lineage evolves from (equal influence sets), i.e. background
/// participation kept training conditions consistent.
std::vector<Violation> check_fairness(const RunLog& run);

/// Residual (excluded, round) pairs left behind by reaggregate-mode rewinds.
/// Reported separately from violations.
std::vector<std::string> deep_residuals(const RunLog& run);

std::string lineage_to_json(const RunLog& run);
RunLog parse_lineage(const std::string& json_text, ScenarioConfig config);
RunLog load_runlog(const std::filesystem::path& run_dir);

std::string violations_to_csv(const std::vector<Violation>& violations);

} // namespace fedtrack
