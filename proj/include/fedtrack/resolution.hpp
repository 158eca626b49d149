#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedtrack/policy.hpp"

namespace fedtrack {

/// Inbound-centric picture of all active exclusions: for each client, the
/// set of peers whose updates must never reach it. Fully withdrawn clients
/// are kept separately and carry no map entry.
struct ExclusionView {
    std::map<ClientId, std::set<ClientId>> exclusion_map;
    std::set<ClientId> fully_excluded;
};

/// Tracks are named from their member set, so two tracks with the same
/// members get the same id no matter which exclusion patterns spawned them.
struct TrackId {
    std::string name;

    auto operator<=>(const TrackId&) const = default;
    static TrackId from_members(const std::vector<ClientId>& sorted_members);
};

struct TrackPlan {
    std::map<TrackId, std::vector<ClientId>> tracks; // member lists, sorted
    std::map<ClientId, TrackId> primary;
    std::vector<ClientId> fully_excluded; // sorted
    std::size_t consolidated_away = 0;    // candidate tracks merged by submodel reuse

    const std::vector<ClientId>& members(const TrackId& id) const { return tracks.at(id); }
    bool operator==(const TrackPlan& other) const {
        return tracks == other.tracks && primary == other.primary &&
               fully_excluded == other.fully_excluded;
    }

    /// One line per track: `trackId: sorted members | primaries`, plus a
    /// trailing `excluded:` line when clients are fully withdrawn.
    std::string dump() const;
};

using PatternMap = std::map<std::vector<ClientId>, std::vector<ClientId>>;

ExclusionView build_exclusion_view(const std::vector<Disagreement>& active,
                                   const std::vector<ClientId>& roster);

/// Groups non-withdrawn clients by their sorted exclusion pattern. Clients
/// with no exclusions land in the empty pattern (the default global track).
PatternMap group_patterns(const ExclusionView& view, const std::vector<ClientId>& roster);

/// One candidate track per pattern with members = roster \ (pattern u
/// fully_excluded); identical member sets are then merged (submodel reuse).
/// Throws DegenerateIsolationError when a pattern would leave a track empty.
TrackPlan create_tracks(const PatternMap& pattern_map, const std::vector<ClientId>& roster,
                        const std::set<ClientId>& fully_excluded);

TrackPlan resolve(const std::vector<Disagreement>& active, const std::vector<ClientId>& roster);

struct DegenerateIsolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Baseline personalised-model resolver: per client, the set of clients it
/// aggregates from. No tracks, no background participation. Fully withdrawn
/// clients have no entry and appear in no source set.
std::map<ClientId, std::set<ClientId>> naive_resolve(const std::vector<Disagreement>& active,
                                                     const std::vector<ClientId>& roster);

/// Brute-force reference resolver for rosters of at most 12 clients. Derives
/// each client's exclusion set by direct per-disagreement case analysis and
/// enumerates distinct member sets without the pattern-grouping shortcut.
TrackPlan oracle_resolve(const std::vector<Disagreement>& active,
                         const std::vector<ClientId>& roster);

} // namespace fedtrack
