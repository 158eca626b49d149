#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedtrack/ids.hpp"

namespace fedtrack {

/// The set of (client, round) contribution pairs that transitively entered a
/// model. Stored as a flat sorted array of per-client round intervals; a
/// track that has aggregated its members for every round collapses to one
/// entry per member, so copies are a single allocation and verification
/// stays cheap over long runs.
class InfluenceSet {
public:
    struct Entry {
        ClientId client;
        RoundIndex lo = 0;
        RoundIndex hi = 0; // inclusive
        auto operator<=>(const Entry&) const = default;
    };

    InfluenceSet() = default;
    static InfluenceSet single(ClientId client, RoundIndex round);

    void add(ClientId client, RoundIndex round);
    void merge(const InfluenceSet& other);

    bool contains(ClientId client, RoundIndex round) const;
    bool contains_client(ClientId client) const;
    /// True when any (client, r) pair with r >= cutoff is present.
    bool contains_client_since(ClientId client, RoundIndex cutoff) const;
    /// Smallest round >= cutoff contributing for this client, or nullopt.
    std::optional<RoundIndex> first_round_since(ClientId client, RoundIndex cutoff) const;

    bool empty() const { return entries_.empty(); }
    std::size_t pair_count() const;
    std::vector<ClientId> clients() const;
    const std::vector<Entry>& entries() const { return entries_; }

    bool operator==(const InfluenceSet&) const = default;

    /// "C1:0-4 C2:2 C3:0-1,3" -- for diagnostics and lineage files.
    std::string to_string() const;

private:
    std::vector<Entry> entries_; // sorted by (client, lo); disjoint, coalesced
};

/// Union of base, the merged sets, and the optional (client, round)
/// contributor singleton. Every model derivation goes through this.
InfluenceSet derive_influence(const InfluenceSet& base,
                              std::optional<std::pair<ClientId, RoundIndex>> contributor,
                              const std::vector<const InfluenceSet*>& merged = {});

} // namespace fedtrack
