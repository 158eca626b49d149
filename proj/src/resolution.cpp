#include "fedtrack/resolution.hpp"

#include <algorithm>
#include <sstream>

#include "fedtrack/hash.hpp"

namespace fedtrack {

TrackId TrackId::from_members(const std::vector<ClientId>& sorted_members) {
    std::uint64_t h = kFnvOffset;
    for (const ClientId& c : sorted_members) h = hash_u64(h, c.index);
    return TrackId{"track_" + hex64(finalize_hash(h))};
}

std::string TrackPlan::dump() const {
    std::ostringstream out;
    for (const auto& [id, members] : tracks) {
        out << id.name << ":";
        for (const ClientId& c : members) out << " " << c.name();
        out << " |";
        for (const auto& [client, track] : primary)
            if (track == id) out << " " << client.name();
        out << "\n";
    }
    if (!fully_excluded.empty()) {
        out << "excluded:";
        for (const ClientId& c : fully_excluded) out << " " << c.name();
        out << "\n";
    }
    return out.str();
}

ExclusionView build_exclusion_view(const std::vector<Disagreement>& active,
                                   const std::vector<ClientId>& roster) {
    ExclusionView view;
    for (const Disagreement& d : active) {
        switch (d.type) {
            case DisagreementType::Full:
                view.fully_excluded.insert(d.initiator);
                break;
            case DisagreementType::Inbound:
                view.exclusion_map[d.initiator].insert(*d.target);
                break;
            case DisagreementType::Outbound:
                view.exclusion_map[*d.target].insert(d.initiator);
                break;
            case DisagreementType::Bidirectional:
                view.exclusion_map[d.initiator].insert(*d.target);
                view.exclusion_map[*d.target].insert(d.initiator);
                break;
            case DisagreementType::PartialData:
                break; // handled at the data layer, not here
        }
    }
    // Withdrawn clients receive no model, so their own exclusion lists are moot.
    for (const ClientId& c : view.fully_excluded) view.exclusion_map.erase(c);
    (void)roster;
    return view;
}

PatternMap group_patterns(const ExclusionView& view, const std::vector<ClientId>& roster) {
    PatternMap patterns;
    for (const ClientId& c : roster) {
        if (view.fully_excluded.count(c)) continue;
        std::vector<ClientId> pattern;
        if (auto it = view.exclusion_map.find(c); it != view.exclusion_map.end())
            pattern.assign(it->second.begin(), it->second.end()); // set iteration is sorted
        patterns[std::move(pattern)].push_back(c);
    }
    return patterns;
}

TrackPlan create_tracks(const PatternMap& pattern_map, const std::vector<ClientId>& roster,
                        const std::set<ClientId>& fully_excluded) {
    TrackPlan plan;
    plan.fully_excluded.assign(fully_excluded.begin(), fully_excluded.end());

    std::size_t candidates = 0;
    for (const auto& [pattern, group] : pattern_map) {
        std::vector<ClientId> members;
        members.reserve(roster.size());
        for (const ClientId& c : roster) {
            if (fully_excluded.count(c)) continue;
            if (std::binary_search(pattern.begin(), pattern.end(), c)) continue;
            members.push_back(c);
        }
        if (members.empty()) {
            std::string who;
            for (const ClientId& c : group) who += (who.empty() ? "" : " ") + c.name();
            throw DegenerateIsolationError("degenerate isolation: pattern excludes the entire roster for clients " + who);
        }
        ++candidates;
        const TrackId id = TrackId::from_members(members);
        plan.tracks.emplace(id, std::move(members)); // identical member sets collapse here
        for (const ClientId& c : group) plan.primary[c] = id;
    }
    plan.consolidated_away = candidates - plan.tracks.size();
    return plan;
}

TrackPlan resolve(const std::vector<Disagreement>& active, const std::vector<ClientId>& roster) {
    const ExclusionView view = build_exclusion_view(active, roster);
    const PatternMap patterns = group_patterns(view, roster);
    return create_tracks(patterns, roster, view.fully_excluded);
}

std::map<ClientId, std::set<ClientId>> naive_resolve(const std::vector<Disagreement>& active,
                                                     const std::vector<ClientId>& roster) {
    const ExclusionView view = build_exclusion_view(active, roster);
    std::map<ClientId, std::set<ClientId>> sources;
    for (const ClientId& c : roster) {
        if (view.fully_excluded.count(c)) continue;
        std::set<ClientId> src;
        const auto it = view.exclusion_map.find(c);
        for (const ClientId& peer : roster) {
            if (view.fully_excluded.count(peer)) continue;
            if (it != view.exclusion_map.end() && it->second.count(peer)) continue;
            src.insert(peer);
        }
        sources[c] = std::move(src);
    }
    return sources;
}

TrackPlan oracle_resolve(const std::vector<Disagreement>& active,
                         const std::vector<ClientId>& roster) {
    if (roster.size() > 12)
        throw std::runtime_error("oracle_resolve is exhaustive and limited to 12 clients");

    // Direct case analysis per client, no shared exclusion map.
    auto withdrawn = [&](ClientId c) {
        for (const Disagreement& d : active)
            if (d.type == DisagreementType::Full && d.initiator == c) return true;
        return false;
    };
    auto excluded_by = [&](ClientId c) {
        std::set<ClientId> out;
        for (const Disagreement& d : active) {
            if (!d.target) continue;
            if (d.type == DisagreementType::Inbound && d.initiator == c) out.insert(*d.target);
            if (d.type == DisagreementType::Outbound && *d.target == c) out.insert(d.initiator);
            if (d.type == DisagreementType::Bidirectional) {
                if (d.initiator == c) out.insert(*d.target);
                if (*d.target == c) out.insert(d.initiator);
            }
        }
        return out;
    };

    TrackPlan plan;
    for (const ClientId& c : roster)
        if (withdrawn(c)) plan.fully_excluded.push_back(c);

    std::vector<std::vector<ClientId>> member_sets; // brute-force dedup, no hashing
    for (const ClientId& c : roster) {
        if (withdrawn(c)) continue;
        const std::set<ClientId> excl = excluded_by(c);
        std::vector<ClientId> members;
        for (const ClientId& peer : roster)
            if (!withdrawn(peer) && !excl.count(peer)) members.push_back(peer);

        bool seen = false;
        for (const auto& existing : member_sets)
            if (existing == members) { seen = true; break; }
        if (!seen) member_sets.push_back(members);

        const TrackId id = TrackId::from_members(members);
        plan.tracks.emplace(id, members);
        plan.primary[c] = id;
    }
    return plan;
}

} // namespace fedtrack
