#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrack/data.hpp"
#include "fedtrack/influence.hpp"
#include "fedtrack/policy.hpp"
#include "fedtrack/provenance.hpp"
#include "fedtrack/resolution.hpp"

namespace fedtrack {

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PhaseTimings {
    std::int64_t analyse_ns = 0;
    std::int64_t train_ns = 0;
    std::int64_t aggregate_ns = 0;
    std::int64_t evaluate_ns = 0;
    std::int64_t total_ns() const { return analyse_ns + train_ns + aggregate_ns + evaluate_ns; }
};

/// A parameter vector plus the provenance needed to audit it.
struct ModelState {
    std::vector<double> weights;
    RoundIndex round = -1; // origin round; -1 for the common initialisation
    std::string origin;    // entity id ("track_..", "client_C1") or "local(C1)"
    InfluenceSet influence;
};

struct LocalUpdate {
    ClientId client;
    std::uint64_t samples = 0;
    std::vector<double> weights;
    InfluenceSet influence;
    std::string base_entity; // entity whose pre-round model was trained
};

struct TrackRoundEntry {
    ModelState aggregate;
    std::vector<LocalUpdate> updates; // retained only when deep rewinds may need them
    bool updates_retained = false;
};

/// One isolated model update path and its per-round history.
struct Track {
    TrackId id;
    std::vector<ClientId> members;
    RoundIndex created_round = 0;
    std::optional<RoundIndex> dissolved_round; // first round the track was gone
    std::optional<TrackId> seeded_from;
    std::map<RoundIndex, TrackRoundEntry> history;
};

/// All track incarnations of a run, dissolved ones included. TrackIds can
/// recur when a member set reappears, so lookups are round-qualified.
struct TrackStore {
    std::vector<Track> tracks;

    Track* find_at(const TrackId& id, RoundIndex round);
    const Track* find_at(const TrackId& id, RoundIndex round) const;
    /// The entity that carries this lineage at `round`, following seed edges
    /// backwards past track creation points. Null when the chain reaches the
    /// common initialisation.
    const Track* chain_at(const TrackId& head, RoundIndex head_round, RoundIndex round) const;
};

struct TrackMetricsRow {
    std::string track;
    double loss = 0.0;
    double metric = 0.0; // accuracy or RMSE
    std::size_t members = 0;
    std::size_t background_updates = 0;
};

struct RoundRecord {
    RoundIndex round = 0;
    TrackPlan plan; // robust mode; naive rounds leave it empty
    PhaseTimings timings;
    std::vector<TrackMetricsRow> metrics;
    std::size_t background_updates = 0;
    RoundLineage lineage;
    // Incremental-path snapshots used by the provenance cross-check and the
    // rewind equivalence tests.
    std::map<std::string, InfluenceSet> aggregate_influence;
    std::map<std::string, std::vector<double>> aggregate_weights;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    bool persist_models = false;
    std::optional<unsigned> threads; // overrides FEDTRACK_THREADS
    bool force = false;              // allow overwriting a non-empty out_dir
};

struct RunResult {
    ScenarioConfig config;
    std::vector<RoundRecord> records;
    RunLog log;
};

/// Executes the four-phase round loop (Analyse, Train, Aggregate, Evaluate)
/// for the configured number of rounds. Deterministic given config.seed,
/// regardless of training parallelism.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

// Building blocks, exposed for tests and for the rewind machinery.

std::uint64_t train_seed(std::uint64_t master, ClientId client, RoundIndex round,
                         const std::string& entity);

struct ClientSplit {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> eval; // last tenth of the client's canonical order
};
ClientSplit client_split(const Dataset& dataset, std::uint32_t client);

/// The sample indices a client trains on at `round`: its training split minus
/// the prefix withheld by any active partial-data exclusion.
std::vector<std::uint32_t> training_view(const Dataset& dataset, const ScenarioConfig& config,
                                         ClientId client, RoundIndex round);

/// One client's training step for one entity. Returns nullopt when no update
/// is submitted (zero epochs or an empty view after masking).
std::optional<LocalUpdate> local_train(const Dataset& dataset, ClientId client,
                                       const ModelState& base, const std::string& entity,
                                       RoundIndex round, const std::vector<std::uint32_t>& view,
                                       const LearnerParams& params, std::uint64_t master_seed);

/// Sample-count-weighted FedAvg. Zero updates carries the base forward. With
/// enforce_fairness, an update trained from a different base is a hard error.
ModelState aggregate_track(const ModelState& base, const std::string& entity, RoundIndex round,
                           const std::vector<LocalUpdate>& updates, bool enforce_fairness = true);

/// Shallow seeding rule for a track that appears mid-run: the previous track
/// that was primary for the plurality of the new track's primary clients,
/// ties broken by lexicographically smallest TrackId. Nullopt means cold
/// start from the common initialisation.
std::optional<TrackId> choose_seed_predecessor(const TrackPlan& current, const TrackPlan& previous,
                                               const TrackId& new_track);

struct RewindInputs {
    const TrackStore* store = nullptr;
    TrackId target;                      // track being (re)built
    std::vector<ClientId> members;       // its member set (replay roster)
    std::optional<TrackId> chain_head;   // lineage to rebuild from (nullopt = none)
    RoundIndex chain_head_round = -1;    // round at which chain_head is current
    std::set<ClientId> excluded;
    RoundIndex upto = -1;                // rebuild rounds 0..upto
    RewindMode mode = RewindMode::Reaggregate;
    // retrain replay inputs
    const Dataset* dataset = nullptr;
    const ScenarioConfig* config = nullptr;
    const std::vector<double>* init_weights = nullptr;
};

struct RewindOutcome {
    ModelState model;
    RewindRecord record;
};

/// Rebuilds a track lineage without the excluded clients, either by
/// re-averaging retained local models (Reaggregate) or by deterministically
/// replaying training from round 0 (Retrain).
RewindOutcome rewind_deep(const RewindInputs& in);

unsigned resolve_thread_count(std::optional<unsigned> requested);

} // namespace fedtrack
