#include "fedtrack/influence.hpp"

#include <algorithm>
#include <sstream>

namespace fedtrack {

namespace {

// First entry that could cover (client, round): entries are sorted by
// (client, lo) and disjoint per client, so (client, hi) is sorted too.
std::vector<InfluenceSet::Entry>::const_iterator find_candidate(
    const std::vector<InfluenceSet::Entry>& entries, ClientId client, RoundIndex round) {
    return std::lower_bound(entries.begin(), entries.end(), std::make_pair(client, round),
                            [](const InfluenceSet::Entry& e, const std::pair<ClientId, RoundIndex>& key) {
                                if (e.client != key.first) return e.client < key.first;
                                return e.hi < key.second;
                            });
}

} // namespace

InfluenceSet InfluenceSet::single(ClientId client, RoundIndex round) {
    InfluenceSet s;
    s.entries_.push_back({client, round, round});
    return s;
}

void InfluenceSet::add(ClientId client, RoundIndex round) {
    auto it = find_candidate(entries_, client, round);
    if (it != entries_.end() && it->client == client && it->lo <= round) return; // covered
    auto pos = entries_.begin() + (it - entries_.begin());
    if (pos != entries_.end() && pos->client == client && pos->lo == round + 1) {
        const auto idx = pos - entries_.begin();
        entries_[static_cast<std::size_t>(idx)].lo = round;
        pos = entries_.begin() + idx;
    } else {
        pos = entries_.insert(pos, {client, round, round});
    }
    if (pos != entries_.begin()) {
        auto prev = std::prev(pos);
        if (prev->client == client && prev->hi + 1 == pos->lo) {
            prev->hi = pos->hi;
            entries_.erase(pos);
        }
    }
}

void InfluenceSet::merge(const InfluenceSet& other) {
    if (other.entries_.empty()) return;
    if (entries_.empty()) {
        entries_ = other.entries_;
        return;
    }
    std::vector<Entry> merged;
    merged.reserve(entries_.size() + other.entries_.size());
    std::size_t i = 0, j = 0;
    auto push = [&](const Entry& e) {
        if (!merged.empty() && merged.back().client == e.client && e.lo <= merged.back().hi + 1)
            merged.back().hi = std::max(merged.back().hi, e.hi);
        else
            merged.push_back(e);
    };
    while (i < entries_.size() || j < other.entries_.size()) {
        if (j == other.entries_.size() ||
            (i < entries_.size() && entries_[i] <= other.entries_[j]))
            push(entries_[i++]);
        else
            push(other.entries_[j++]);
    }
    entries_ = std::move(merged);
}

bool InfluenceSet::contains(ClientId client, RoundIndex round) const {
    const auto it = find_candidate(entries_, client, round);
    return it != entries_.end() && it->client == client && it->lo <= round;
}

bool InfluenceSet::contains_client(ClientId client) const {
    const auto it = find_candidate(entries_, client, 0);
    return it != entries_.end() && it->client == client;
}

bool InfluenceSet::contains_client_since(ClientId client, RoundIndex cutoff) const {
    return first_round_since(client, cutoff).has_value();
}

std::optional<RoundIndex> InfluenceSet::first_round_since(ClientId client, RoundIndex cutoff) const {
    const auto it = find_candidate(entries_, client, cutoff);
    if (it == entries_.end() || it->client != client) return std::nullopt;
    return std::max(it->lo, cutoff);
}

std::size_t InfluenceSet::pair_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += static_cast<std::size_t>(e.hi - e.lo + 1);
    return n;
}

std::vector<ClientId> InfluenceSet::clients() const {
    std::vector<ClientId> out;
    for (const Entry& e : entries_)
        if (out.empty() || out.back() != e.client) out.push_back(e.client);
    return out;
}

std::string InfluenceSet::to_string() const {
    std::ostringstream os;
    std::optional<ClientId> current;
    for (const Entry& e : entries_) {
        if (!current || *current != e.client) {
            if (current) os << " ";
            os << e.client.name() << ":";
            current = e.client;
        } else {
            os << ",";
        }
        os << e.lo;
        if (e.hi != e.lo) os << "-" << e.hi;
    }
    return os.str();
}

InfluenceSet derive_influence(const InfluenceSet& base,
                              std::optional<std::pair<ClientId, RoundIndex>> contributor,
                              const std::vector<const InfluenceSet*>& merged) {
    InfluenceSet out = base;
    for (const InfluenceSet* m : merged)
        if (m) out.merge(*m);
    if (contributor) out.add(contributor->first, contributor->second);
    return out;
}

} // namespace fedtrack
