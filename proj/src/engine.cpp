#include "fedtrack/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <thread>

#include "fedtrack/hash.hpp"
#include "fedtrack/learner.hpp"
#include "fedtrack/metrics.hpp"

namespace fedtrack {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point& mark) {
    const auto now = Clock::now();
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(now - mark).count();
    mark = now;
    return ns;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) t.join();
}

void write_model_bin(const std::filesystem::path& file, const std::vector<double>& weights) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw EngineError("cannot write model file: " + file.string());
    const auto count = static_cast<std::uint32_t>(weights.size());
    unsigned char header[4] = {static_cast<unsigned char>(count), static_cast<unsigned char>(count >> 8),
                               static_cast<unsigned char>(count >> 16), static_cast<unsigned char>(count >> 24)};
    out.write(reinterpret_cast<const char*>(header), 4);
    for (const double v : weights) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void prepare_out_dir(const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force) throw EngineError("output directory is not empty (use --force): " + dir.string());
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

std::string naive_entity(ClientId c) { return "client_" + c.name(); }

double partial_mask(const std::vector<Disagreement>& active, ClientId client) {
    double mask = 0.0;
    for (const Disagreement& d : active)
        if (d.type == DisagreementType::PartialData && d.initiator == client && d.data_mask)
            mask = std::max(mask, *d.data_mask);
    return mask;
}

} // namespace

unsigned resolve_thread_count(std::optional<unsigned> requested) {
    if (requested && *requested > 0) return *requested;
    if (const char* env = std::getenv("FEDTRACK_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

std::uint64_t train_seed(std::uint64_t master, ClientId client, RoundIndex round,
                         const std::string& entity) {
    std::uint64_t h = hash_u64(kFnvOffset, master);
    h = hash_u64(h, client.index);
    h = hash_u64(h, static_cast<std::uint64_t>(round));
    h = hash_str(h, entity);
    return finalize_hash(h);
}

Track* TrackStore::find_at(const TrackId& id, RoundIndex round) {
    for (Track& t : tracks)
        if (t.id == id && t.created_round <= round && (!t.dissolved_round || round < *t.dissolved_round))
            return &t;
    return nullptr;
}

const Track* TrackStore::find_at(const TrackId& id, RoundIndex round) const {
    return const_cast<TrackStore*>(this)->find_at(id, round);
}

const Track* TrackStore::chain_at(const TrackId& head, RoundIndex head_round, RoundIndex round) const {
    const Track* cur = find_at(head, head_round);
    while (cur && round < cur->created_round) {
        if (!cur->seeded_from) return nullptr;
        cur = find_at(*cur->seeded_from, cur->created_round - 1);
    }
    return cur;
}

ClientSplit client_split(const Dataset& dataset, std::uint32_t client) {
    ClientSplit split;
    std::vector<std::uint32_t> all = dataset.client_samples(client);
    const std::size_t m = all.size();
    if (m == 0) return split;
    const std::size_t eval_count = std::clamp<std::size_t>(m / 10, 1, m);
    split.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m - eval_count));
    split.eval.assign(all.begin() + static_cast<std::ptrdiff_t>(m - eval_count), all.end());
    return split;
}

std::vector<std::uint32_t> training_view(const Dataset& dataset, const ScenarioConfig& config,
                                         ClientId client, RoundIndex round) {
    const ClientSplit split = client_split(dataset, client.index);
    const double mask = partial_mask(active_disagreements(config, round), client);
    const auto withheld = static_cast<std::size_t>(mask * static_cast<double>(split.train.size()));
    return {split.train.begin() + static_cast<std::ptrdiff_t>(withheld), split.train.end()};
}

std::optional<LocalUpdate> local_train(const Dataset& dataset, ClientId client,
                                       const ModelState& base, const std::string& entity,
                                       RoundIndex round, const std::vector<std::uint32_t>& view,
                                       const LearnerParams& params, std::uint64_t master_seed) {
    if (view.empty() || params.epochs == 0) return std::nullopt;
    LocalUpdate update;
    update.client = client;
    update.samples = view.size();
    update.base_entity = entity;
    update.weights = train_sgd(dataset, base.weights, view, params,
                               train_seed(master_seed, client, round, entity));
    if (!all_finite(update.weights))
        throw EngineError("training diverged: non-finite parameters for " + client.name() +
                          " at round " + std::to_string(round) + " on " + entity);
    update.influence = derive_influence(base.influence, std::make_pair(client, round));
    return update;
}

ModelState aggregate_track(const ModelState& base, const std::string& entity, RoundIndex round,
                           const std::vector<LocalUpdate>& updates, bool enforce_fairness) {
    if (enforce_fairness) {
        for (const LocalUpdate& u : updates)
            if (u.base_entity != entity)
                throw EngineError("fairness precondition violated: update by " + u.client.name() +
                                  " for " + entity + " at round " + std::to_string(round) +
                                  " was trained from " + u.base_entity);
    }
    ModelState out;
    out.round = round;
    out.origin = entity;
    if (updates.empty()) {
        out.weights = base.weights;
        out.influence = base.influence;
        return out;
    }
    double total = 0.0;
    for (const LocalUpdate& u : updates) total += static_cast<double>(u.samples);
    out.weights.assign(updates.front().weights.size(), 0.0);
    for (const LocalUpdate& u : updates) {
        const double w = static_cast<double>(u.samples) / total;
        for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += w * u.weights[i];
        out.influence.merge(u.influence);
    }
    if (!all_finite(out.weights))
        throw EngineError("aggregation produced non-finite parameters for " + entity + " at round " +
                          std::to_string(round));
    return out;
}

std::optional<TrackId> choose_seed_predecessor(const TrackPlan& current, const TrackPlan& previous,
                                               const TrackId& new_track) {
    std::map<TrackId, std::size_t> votes;
    for (const auto& [client, track] : current.primary) {
        if (track != new_track) continue;
        if (auto it = previous.primary.find(client); it != previous.primary.end()) votes[it->second]++;
    }
    if (!votes.empty()) {
        // Plurality; map order breaks ties toward the lexicographically smallest id.
        auto best = votes.begin();
        for (auto it = votes.begin(); it != votes.end(); ++it)
            if (it->second > best->second) best = it;
        return best->first;
    }
    // No client carried a lineage in (e.g. everyone rejoining from a full
    // exclusion): fall back to the broadest previous track.
    std::optional<TrackId> widest;
    std::size_t widest_size = 0;
    for (const auto& [id, members] : previous.tracks) {
        if (members.size() > widest_size) {
            widest = id;
            widest_size = members.size();
        }
    }
    return widest;
}

RewindOutcome rewind_deep(const RewindInputs& in) {
    RewindOutcome out;
    out.record.mode = in.mode;
    out.record.excluded.assign(in.excluded.begin(), in.excluded.end());
    out.record.upto = in.upto;
    out.model.origin = in.target.name;
    out.model.round = in.upto;

    if (!in.init_weights) throw EngineError("rewind requires the common initial weights");
    out.model.weights = *in.init_weights;
    if (in.upto < 0) return out; // activation at round 0: nothing to rebuild

    const auto rounds = static_cast<std::size_t>(in.upto) + 1;
    out.record.chain.assign(rounds, "");
    out.record.contributors.assign(rounds, {});

    if (in.mode == RewindMode::Retrain) {
        if (!in.dataset || !in.config)
            throw EngineError("retrain rewind requires dataset and scenario config");
        ModelState current;
        current.weights = *in.init_weights;
        current.origin = in.target.name;
        for (RoundIndex r = 0; r <= in.upto; ++r) {
            std::vector<LocalUpdate> updates;
            for (const ClientId& c : in.members) {
                const auto view = training_view(*in.dataset, *in.config, c, r);
                if (auto u = local_train(*in.dataset, c, current, in.target.name, r, view,
                                         in.config->learner, in.config->seed))
                    updates.push_back(std::move(*u));
            }
            for (const LocalUpdate& u : updates)
                out.record.contributors[static_cast<std::size_t>(r)].push_back(u.client);
            out.record.chain[static_cast<std::size_t>(r)] = in.target.name;
            current = aggregate_track(current, in.target.name, r, updates);
        }
        current.round = in.upto;
        out.model = std::move(current);
        return out;
    }

    // Reaggregate: walk the lineage chain and re-average retained locals
    // without the excluded clients. Rounds with no remaining contributors
    // carry the previous rebuilt state.
    if (!in.store) throw EngineError("reaggregate rewind requires track histories");
    for (RoundIndex r = 0; r <= in.upto; ++r) {
        const Track* chain =
            in.chain_head ? in.store->chain_at(*in.chain_head, in.chain_head_round, r) : nullptr;
        if (!chain) continue;
        out.record.chain[static_cast<std::size_t>(r)] = chain->id.name;
        const auto hit = chain->history.find(r);
        if (hit == chain->history.end())
            throw EngineError("retention required for deep exclusion: no history for " +
                              chain->id.name + " at round " + std::to_string(r));
        const TrackRoundEntry& entry = hit->second;
        if (!entry.updates_retained)
            throw EngineError("retention required for deep exclusion: local models for " +
                              chain->id.name + " at round " + std::to_string(r) +
                              " were not retained");
        std::vector<LocalUpdate> remaining;
        for (const LocalUpdate& u : entry.updates)
            if (!in.excluded.count(u.client)) remaining.push_back(u);
        for (const LocalUpdate& u : remaining)
            out.record.contributors[static_cast<std::size_t>(r)].push_back(u.client);
        if (remaining.empty()) continue; // nothing remains this round; carry
        ModelState rebuilt = aggregate_track(out.model, in.target.name, r, remaining, false);
        out.model.weights = std::move(rebuilt.weights);
        out.model.influence = std::move(rebuilt.influence);
        out.model.round = r;
    }
    return out;
}

namespace {

// Per-round working state for one model lineage: a track in robust mode, a
// client's personalised model in naive mode.
struct ActiveEntity {
    std::string id;
    std::vector<ClientId> sources;
    std::vector<ClientId> served;
    ModelState pre;
    LineageBase base;
    std::size_t track_index = SIZE_MAX;  // into TrackStore::tracks (robust only)
    std::optional<ClientId> owner;       // naive only
};

struct DeepDemand {
    std::set<ClientId> excluded;
};

} // namespace

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
    if (const auto errors = validate_scenario(config); !errors.empty())
        throw EngineError("invalid scenario: " + errors.front().rule + " (" + errors.front().message + ")");

    const unsigned threads = resolve_thread_count(options.threads);
    const Dataset dataset = build_dataset(config);
    const std::vector<ClientId> roster = make_roster(config.client_count);
    const std::vector<double> init =
        initial_weights(dataset, finalize_hash(hash_str(hash_u64(kFnvOffset, config.seed), "init")));
    const bool retain_updates = any_deep(config);
    const bool robust = config.resolver == ResolverKind::Robust;

    if (options.out_dir) prepare_out_dir(*options.out_dir, options.force);

    std::vector<ClientSplit> splits(config.client_count);
    for (std::uint32_t c = 0; c < config.client_count; ++c) splits[c] = client_split(dataset, c);

    RunResult result;
    result.config = config;
    result.log.config = config;

    TrackStore store;
    TrackPlan prev_plan;
    std::map<ClientId, ModelState> naive_models;

    for (RoundIndex round = 0; round < config.rounds; ++round) {
        RoundRecord record;
        record.round = round;
        RoundLineage lineage;
        lineage.round = round;

        auto mark = Clock::now();
        const std::vector<Disagreement> active = active_disagreements(config, round);
        std::vector<ActiveEntity> entities;

        if (robust) {
            TrackPlan plan = resolve(active, roster);

            // Dissolve tracks that fell out of the plan; their history stays
            // read-only in the store.
            for (Track& t : store.tracks)
                if (!t.dissolved_round && !plan.tracks.count(t.id)) t.dissolved_round = round;

            // Newly activated deep exclusions demand a rewound lineage for the
            // affected clients' current primary tracks.
            std::map<TrackId, DeepDemand> deep;
            for (const Disagreement& d : active) {
                if (d.depth != Depth::Deep || d.start_round != round) continue;
                std::vector<std::pair<ClientId, ClientId>> pairs; // (affected, to purge)
                switch (d.type) {
                    case DisagreementType::Inbound: pairs.emplace_back(d.initiator, *d.target); break;
                    case DisagreementType::Outbound: pairs.emplace_back(*d.target, d.initiator); break;
                    case DisagreementType::Bidirectional:
                        pairs.emplace_back(d.initiator, *d.target);
                        pairs.emplace_back(*d.target, d.initiator);
                        break;
                    case DisagreementType::Full:
                        for (const ClientId& c : roster)
                            if (c != d.initiator) pairs.emplace_back(c, d.initiator);
                        break;
                    case DisagreementType::PartialData: break;
                }
                for (const auto& [affected, purged] : pairs)
                    if (auto it = plan.primary.find(affected); it != plan.primary.end())
                        deep[it->second].excluded.insert(purged);
            }

            for (const auto& [id, members] : plan.tracks) {
                ActiveEntity e;
                e.id = id.name;
                e.sources = members;
                for (const auto& [client, track] : plan.primary)
                    if (track == id) e.served.push_back(client);

                const bool continuing = prev_plan.tracks.count(id) > 0;
                const auto deep_it = deep.find(id);

                if (continuing) {
                    Track* t = store.find_at(id, round - 1);
                    assert(t);
                    e.track_index = static_cast<std::size_t>(t - store.tracks.data());
                    if (deep_it != deep.end()) {
                        RewindInputs in;
                        in.store = &store;
                        in.target = id;
                        in.members = members;
                        in.chain_head = id;
                        in.chain_head_round = round - 1;
                        in.excluded = deep_it->second.excluded;
                        in.upto = round - 1;
                        in.mode = config.rewind_mode;
                        in.dataset = &dataset;
                        in.config = &config;
                        in.init_weights = &init;
                        RewindOutcome rw = rewind_deep(in);
                        e.pre = std::move(rw.model);
                        e.base.kind = LineageBase::Kind::Rewind;
                        e.base.rewind = std::move(rw.record);
                    } else {
                        e.pre = t->history.at(round - 1).aggregate;
                        e.base.kind = LineageBase::Kind::Carry;
                        e.base.from = id.name;
                    }
                } else {
                    Track fresh;
                    fresh.id = id;
                    fresh.members = members;
                    fresh.created_round = round;
                    std::optional<TrackId> predecessor;
                    if (round > 0) predecessor = choose_seed_predecessor(plan, prev_plan, id);
                    fresh.seeded_from = predecessor;

                    if (deep_it != deep.end()) {
                        RewindInputs in;
                        in.store = &store;
                        in.target = id;
                        in.members = members;
                        in.chain_head = predecessor;
                        in.chain_head_round = round - 1;
                        in.excluded = deep_it->second.excluded;
                        in.upto = round - 1;
                        in.mode = config.rewind_mode;
                        in.dataset = &dataset;
                        in.config = &config;
                        in.init_weights = &init;
                        RewindOutcome rw = rewind_deep(in);
                        e.pre = std::move(rw.model);
                        e.base.kind = LineageBase::Kind::Rewind;
                        e.base.rewind = std::move(rw.record);
                    } else if (predecessor) {
                        const Track* p = store.find_at(*predecessor, round - 1);
                        assert(p);
                        e.pre = p->history.at(round - 1).aggregate;
                        e.pre.origin = id.name;
                        e.base.kind = LineageBase::Kind::Seed;
                        e.base.from = predecessor->name;
                    } else {
                        e.pre.weights = init;
                        e.pre.round = -1;
                        e.pre.origin = id.name;
                        e.base.kind = LineageBase::Kind::Init;
                    }
                    store.tracks.push_back(std::move(fresh));
                    e.track_index = store.tracks.size() - 1;
                }
                entities.push_back(std::move(e));
            }

            // A track's model must satisfy the strictest exclusion cutoff of
            // every client it serves. A lineage inherited through seeding can
            // predate a joining client's cutoff (clients with equal patterns
            // but different activation rounds share a track); such a model is
            // re-established by deterministic replay over the member set.
            if (round > 0) {
                const auto constraints = exclusion_constraints(config, round);
                for (ActiveEntity& e : entities) {
                    bool tainted = false;
                    for (const ClientId& a : e.served) {
                        for (const ExclusionConstraint& c : constraints) {
                            if (c.watcher != a) continue;
                            if (c.strict ? e.pre.influence.contains_client(c.excluded)
                                         : e.pre.influence.contains_client_since(c.excluded, c.cutoff))
                                tainted = true;
                        }
                    }
                    if (!tainted) continue;
                    RewindInputs in;
                    in.target = TrackId{e.id};
                    in.members = e.sources;
                    in.upto = round - 1;
                    in.mode = RewindMode::Retrain;
                    in.dataset = &dataset;
                    in.config = &config;
                    in.init_weights = &init;
                    RewindOutcome rw = rewind_deep(in);
                    e.pre = std::move(rw.model);
                    e.base.kind = LineageBase::Kind::Rewind;
                    e.base.rewind = std::move(rw.record);
                }
            }
            record.plan = plan;
            prev_plan = std::move(plan);
        } else {
            const auto sources = naive_resolve(active, roster);
            for (const ClientId& c : roster) {
                ActiveEntity e;
                e.id = naive_entity(c);
                e.owner = c;
                if (auto it = sources.find(c); it != sources.end()) {
                    e.sources.assign(it->second.begin(), it->second.end());
                    e.served.push_back(c);
                }
                if (round == 0) {
                    e.pre.weights = init;
                    e.pre.round = -1;
                    e.pre.origin = e.id;
                    e.base.kind = LineageBase::Kind::Init;
                } else {
                    e.pre = naive_models.at(c);
                    e.base.kind = LineageBase::Kind::Carry;
                    e.base.from = e.id;
                }
                entities.push_back(std::move(e));
            }
        }

        if (options.out_dir) {
            const auto round_dir = *options.out_dir / "rounds" / std::to_string(round);
            std::filesystem::create_directories(round_dir);
            std::ofstream plan_file(round_dir / "plan.txt");
            if (robust) {
                plan_file << record.plan.dump();
            } else {
                for (const ActiveEntity& e : entities) {
                    plan_file << e.id << ":";
                    for (const ClientId& c : e.sources) plan_file << " " << c.name();
                    plan_file << " |";
                    for (const ClientId& c : e.served) plan_file << " " << c.name();
                    plan_file << "\n";
                }
            }
        }
        record.timings.analyse_ns = elapsed_ns(mark);

        // ---- Train ----------------------------------------------------
        struct Task {
            std::size_t entity = 0;
            ClientId client;
        };
        std::vector<Task> tasks;
        if (robust) {
            for (std::size_t i = 0; i < entities.size(); ++i)
                for (const ClientId& c : entities[i].sources) tasks.push_back({i, c});
        } else {
            for (std::size_t i = 0; i < entities.size(); ++i)
                if (!entities[i].served.empty()) tasks.push_back({i, entities[i].served.front()});
        }

        std::vector<std::optional<LocalUpdate>> results(tasks.size());
        std::exception_ptr train_error;
        std::atomic<bool> failed{false};
        parallel_for(tasks.size(), threads, [&](std::size_t i) {
            try {
                const Task& task = tasks[i];
                const ActiveEntity& e = entities[task.entity];
                const double mask = partial_mask(active, task.client);
                const auto& train = splits[task.client.index].train;
                const auto withheld = static_cast<std::size_t>(mask * static_cast<double>(train.size()));
                std::vector<std::uint32_t> view(train.begin() + static_cast<std::ptrdiff_t>(withheld),
                                                train.end());
                results[i] = local_train(dataset, task.client, e.pre, e.id, round, view,
                                         config.learner, config.seed);
            } catch (...) {
                if (!failed.exchange(true)) train_error = std::current_exception();
            }
        });
        if (train_error) std::rethrow_exception(train_error);
        record.timings.train_ns = elapsed_ns(mark);

        // ---- Aggregate ------------------------------------------------
        std::map<ClientId, const LocalUpdate*> naive_updates; // contributor -> update
        if (!robust) {
            for (std::size_t i = 0; i < tasks.size(); ++i)
                if (results[i]) naive_updates[tasks[i].client] = &*results[i];
        }

        for (std::size_t i = 0; i < entities.size(); ++i) {
            ActiveEntity& e = entities[i];
            std::vector<LocalUpdate> updates;
            if (robust) {
                for (std::size_t t = 0; t < tasks.size(); ++t)
                    if (tasks[t].entity == i && results[t]) updates.push_back(std::move(*results[t]));
            } else {
                for (const ClientId& src : e.sources)
                    if (auto it = naive_updates.find(src); it != naive_updates.end())
                        updates.push_back(*it->second);
            }

            ModelState aggregate = aggregate_track(e.pre, e.id, round, updates, robust);

            LineageEntity le;
            le.id = e.id;
            le.sources = e.sources;
            le.served = e.served;
            le.base = e.base;
            for (const LocalUpdate& u : updates)
                le.updates.push_back({u.client, u.samples, u.base_entity});
            lineage.entities.push_back(std::move(le));

            record.aggregate_influence[e.id] = aggregate.influence;
            record.aggregate_weights[e.id] = aggregate.weights;

            if (options.out_dir && options.persist_models) {
                const auto track_dir = *options.out_dir / "rounds" / std::to_string(round) /
                                       "tracks" / e.id;
                std::filesystem::create_directories(track_dir / "updates");
                write_model_bin(track_dir / "model.bin", aggregate.weights);
                for (const LocalUpdate& u : updates)
                    write_model_bin(track_dir / "updates" / (u.client.name() + ".bin"), u.weights);
            }

            if (robust) {
                Track& t = store.tracks[e.track_index];
                TrackRoundEntry entry;
                entry.aggregate = aggregate;
                if (retain_updates) {
                    entry.updates = updates;
                    entry.updates_retained = true;
                }
                t.history.emplace(round, std::move(entry));
            } else {
                naive_models[*e.owner] = aggregate;
            }

            // Count background submissions and stash for metrics.
            std::size_t background = 0;
            if (robust)
                for (const LocalUpdate& u : updates) {
                    const auto primary = record.plan.primary.find(u.client);
                    if (primary == record.plan.primary.end() || primary->second.name != e.id)
                        ++background;
                }
            record.background_updates += background;
            e.pre = std::move(aggregate); // reuse as the evaluated model below
            record.metrics.push_back({e.id, 0.0, 0.0, e.sources.size(), background});
        }
        record.timings.aggregate_ns = elapsed_ns(mark);

        // ---- Evaluate -------------------------------------------------
        std::size_t row = 0;
        for (const ActiveEntity& e : entities) {
            TrackMetricsRow& metrics_row = record.metrics[row++];
            std::vector<std::uint32_t> pool;
            if (robust) {
                for (const ClientId& c : e.sources)
                    pool.insert(pool.end(), splits[c.index].eval.begin(), splits[c.index].eval.end());
            } else if (!e.served.empty()) {
                const ClientId c = e.served.front();
                pool = splits[c.index].eval;
            }
            const EvalResult eval = evaluate(dataset, e.pre.weights, pool);
            if (!std::isfinite(eval.loss) || !std::isfinite(eval.metric))
                throw EngineError("evaluation diverged: non-finite loss at round " +
                                  std::to_string(round) + " on " + e.id);
            metrics_row.loss = eval.loss;
            metrics_row.metric = eval.metric;
        }
        // Naive rounds report rows only for clients that are actually served.
        if (!robust) {
            std::vector<TrackMetricsRow> kept;
            for (std::size_t i = 0; i < entities.size(); ++i)
                if (!entities[i].served.empty()) kept.push_back(record.metrics[i]);
            record.metrics = std::move(kept);
        }
        record.timings.evaluate_ns = elapsed_ns(mark);

        record.lineage = lineage;
        result.log.rounds.push_back(std::move(lineage));
        result.records.push_back(std::move(record));
    }

    if (options.out_dir) {
        save_scenario(config, *options.out_dir / "scenario.json");
        std::ofstream lineage_out(*options.out_dir / "lineage.json");
        lineage_out << lineage_to_json(result.log);
        std::ofstream metrics_out(*options.out_dir / "metrics.csv");
        metrics_out << metrics_csv(result.records);
        std::ofstream timings_out(*options.out_dir / "timings.csv");
        timings_out << timings_csv(result.records);
    }
    return result;
}

} // namespace fedtrack
