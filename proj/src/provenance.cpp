#include "fedtrack/provenance.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fedtrack {

using nlohmann::json;

namespace {

const InfluenceSet& lookup(const std::map<std::pair<RoundIndex, std::string>, InfluenceSet>& table,
                           RoundIndex round, const std::string& id, const char* what) {
    auto it = table.find({round, id});
    if (it == table.end())
        throw LineageError(std::string("lineage incomplete: missing ") + what + " for " + id +
                           " at round " + std::to_string(round));
    return it->second;
}

InfluenceSet rewind_influence(const RewindRecord& rec, const RecomputedInfluence& done) {
    InfluenceSet out;
    if (rec.upto < 0) return out; // nothing before activation, back to common init

    if (rec.mode == RewindMode::Retrain) {
        // Full symbolic replay: only the replayed contributors ever enter.
        for (RoundIndex r = 0; r <= rec.upto; ++r)
            for (const ClientId& c : rec.contributors[static_cast<std::size_t>(r)])
                out.add(c, r);
        return out;
    }

    // Reaggregate: the rebuilt model is the re-average of the last round that
    // still has contributors; its inputs were trained from the original chain,
    // so trajectory influence from earlier rounds remains.
    RoundIndex r = rec.upto;
    while (r >= 0 && rec.contributors[static_cast<std::size_t>(r)].empty()) --r;
    if (r < 0) return out;
    out = lookup(done.pre, r, rec.chain[static_cast<std::size_t>(r)], "rewind chain pre-model");
    for (const ClientId& c : rec.contributors[static_cast<std::size_t>(r)]) out.add(c, r);
    return out;
}

} // namespace

RecomputedInfluence recompute_influence(const RunLog& run) {
    RecomputedInfluence out;
    for (const RoundLineage& rl : run.rounds) {
        const RoundIndex r = rl.round;
        // Pre-round models first; update influences may reference any entity's pre.
        for (const LineageEntity& e : rl.entities) {
            InfluenceSet pre;
            switch (e.base.kind) {
                case LineageBase::Kind::Init:
                    break;
                case LineageBase::Kind::Carry:
                case LineageBase::Kind::Seed:
                    pre = lookup(out.aggregate, r - 1, e.base.from, "base aggregate");
                    break;
                case LineageBase::Kind::Rewind:
                    if (!e.base.rewind) throw LineageError("lineage incomplete: rewind base without record");
                    pre = rewind_influence(*e.base.rewind, out);
                    break;
            }
            out.pre.emplace(std::make_pair(r, e.id), std::move(pre));
        }
        for (const LineageEntity& e : rl.entities) {
            InfluenceSet agg;
            if (e.updates.empty()) {
                agg = lookup(out.pre, r, e.id, "pre-model");
            } else {
                for (const LineageUpdate& u : e.updates) {
                    InfluenceSet contribution = lookup(out.pre, r, u.base_entity, "update base");
                    contribution.add(u.client, r);
                    agg.merge(contribution);
                }
            }
            out.aggregate.emplace(std::make_pair(r, e.id), std::move(agg));
        }
    }
    return out;
}

std::vector<ExclusionConstraint> exclusion_constraints(const ScenarioConfig& config,
                                                       RoundIndex round) {
    std::vector<ExclusionConstraint> out;
    for (const Disagreement& d : config.disagreements) {
        if (!d.active_at(round)) continue;
        const bool strict = d.depth == Depth::Deep && config.rewind_mode == RewindMode::Retrain;
        switch (d.type) {
            case DisagreementType::Inbound:
                out.push_back({d.initiator, *d.target, d.start_round, strict});
                break;
            case DisagreementType::Outbound:
                out.push_back({*d.target, d.initiator, d.start_round, strict});
                break;
            case DisagreementType::Bidirectional:
                out.push_back({d.initiator, *d.target, d.start_round, strict});
                out.push_back({*d.target, d.initiator, d.start_round, strict});
                break;
            case DisagreementType::Full:
                for (std::uint32_t i = 0; i < config.client_count; ++i)
                    if (ClientId{i} != d.initiator)
                        out.push_back({ClientId{i}, d.initiator, d.start_round, strict});
                break;
            case DisagreementType::PartialData:
                break;
        }
    }
    return out;
}

std::vector<Violation> check_isolation(const RunLog& run) {
    const RecomputedInfluence rec = recompute_influence(run);
    std::vector<Violation> violations;

    for (const RoundLineage& rl : run.rounds) {
        const std::vector<ExclusionConstraint> forbidden = exclusion_constraints(run.config, rl.round);
        for (const LineageEntity& e : rl.entities) {
            const InfluenceSet& influence = rec.aggregate.at({rl.round, e.id});
            for (const ClientId& a : e.served) {
                for (const ExclusionConstraint& f : forbidden) {
                    if (f.watcher != a) continue;
                    std::optional<RoundIndex> leaked;
                    if (f.strict) {
                        if (influence.contains_client(f.excluded))
                            leaked = influence.first_round_since(f.excluded, 0);
                    } else {
                        leaked = influence.first_round_since(f.excluded, f.cutoff);
                    }
                    if (leaked) {
                        violations.push_back(
                            {ViolationKind::Contamination, rl.round, a,
                             f.excluded.name() + "@" + std::to_string(*leaked),
                             "model " + e.id + " delivered to " + a.name() + " carries influence pair (" +
                                 f.excluded.name() + ", " + std::to_string(*leaked) + ") despite exclusion"});
                    }
                }
            }
            // A rebuilt history must never re-average an excluded client's update.
            if (e.base.kind == LineageBase::Kind::Rewind && e.base.rewind) {
                const RewindRecord& rw = *e.base.rewind;
                for (RoundIndex r = 0; r <= rw.upto; ++r) {
                    for (const ClientId& b : rw.excluded) {
                        const auto& cs = rw.contributors[static_cast<std::size_t>(r)];
                        if (std::find(cs.begin(), cs.end(), b) != cs.end()) {
                            violations.push_back(
                                {ViolationKind::Contamination, rl.round,
                                 e.served.empty() ? b : e.served.front(), b.name() + "@" + std::to_string(r),
                                 "rewound history of " + e.id + " still aggregates a direct contribution of " +
                                     b.name() + " at round " + std::to_string(r)});
                        }
                    }
                }
            }
        }
    }
    return violations;
}

std::vector<Violation> check_fairness(const RunLog& run) {
    const RecomputedInfluence rec = recompute_influence(run);
    std::vector<Violation> violations;

    for (const RoundLineage& rl : run.rounds) {
        for (const LineageEntity& e : rl.entities) {
            const InfluenceSet& reference = rec.pre.at({rl.round, e.id});
            for (const LineageUpdate& u : e.updates) {
                const InfluenceSet& base = lookup(rec.pre, rl.round, u.base_entity, "update base");
                if (base == reference) continue;
                const ClientId affected = e.served.empty() ? u.client : e.served.front();
                violations.push_back(
                    {ViolationKind::Unfairness, rl.round, affected,
                     u.client.name() + " base " + u.base_entity,
                     "update by " + u.client.name() + " aggregated into " + e.id +
                         " was trained from a model with different influence than the receiving lineage"});
            }
        }
    }
    return violations;
}

std::vector<std::string> deep_residuals(const RunLog& run) {
    const RecomputedInfluence rec = recompute_influence(run);
    std::vector<std::string> out;
    for (const RoundLineage& rl : run.rounds) {
        for (const LineageEntity& e : rl.entities) {
            if (e.base.kind != LineageBase::Kind::Rewind || !e.base.rewind) continue;
            if (e.base.rewind->mode != RewindMode::Reaggregate) continue;
            const InfluenceSet& pre = rec.pre.at({rl.round, e.id});
            for (const ClientId& b : e.base.rewind->excluded) {
                if (auto first = pre.first_round_since(b, 0)) {
                    out.push_back(e.id + "@" + std::to_string(rl.round) + " retains trajectory influence of " +
                                  b.name() + " (earliest round " + std::to_string(*first) + ")");
                }
            }
        }
    }
    return out;
}

namespace {

json clients_to_json(const std::vector<ClientId>& clients) {
    json arr = json::array();
    for (const ClientId& c : clients) arr.push_back(c.name());
    return arr;
}

std::vector<ClientId> clients_from_json(const json& arr) {
    std::vector<ClientId> out;
    for (const json& j : arr) {
        auto c = ClientId::from_name(j.get<std::string>());
        if (!c) throw LineageError("bad client name in lineage: " + j.dump());
        out.push_back(*c);
    }
    return out;
}

} // namespace

std::string lineage_to_json(const RunLog& run) {
    json j;
    j["schema_version"] = 1;
    json rounds = json::array();
    for (const RoundLineage& rl : run.rounds) {
        json rj;
        rj["round"] = rl.round;
        json entities = json::array();
        for (const LineageEntity& e : rl.entities) {
            json ej;
            ej["id"] = e.id;
            ej["sources"] = clients_to_json(e.sources);
            ej["served"] = clients_to_json(e.served);
            json base;
            switch (e.base.kind) {
                case LineageBase::Kind::Init: base["kind"] = "init"; break;
                case LineageBase::Kind::Carry: base["kind"] = "carry"; base["from"] = e.base.from; break;
                case LineageBase::Kind::Seed: base["kind"] = "seed"; base["from"] = e.base.from; break;
                case LineageBase::Kind::Rewind: {
                    base["kind"] = "rewind";
                    const RewindRecord& rw = *e.base.rewind;
                    base["mode"] = rw.mode == RewindMode::Retrain ? "retrain" : "reaggregate";
                    base["excluded"] = clients_to_json(rw.excluded);
                    base["upto"] = rw.upto;
                    base["chain"] = rw.chain;
                    json contribs = json::array();
                    for (const auto& round_contribs : rw.contributors)
                        contribs.push_back(clients_to_json(round_contribs));
                    base["contributors"] = contribs;
                    break;
                }
            }
            ej["base"] = base;
            json updates = json::array();
            for (const LineageUpdate& u : e.updates)
                updates.push_back({{"client", u.client.name()}, {"samples", u.samples}, {"base", u.base_entity}});
            ej["updates"] = updates;
            entities.push_back(ej);
        }
        rj["entities"] = entities;
        rounds.push_back(rj);
    }
    j["rounds"] = rounds;
    return j.dump(1) + "\n";
}

RunLog parse_lineage(const std::string& json_text, ScenarioConfig config) {
    const json j = json::parse(json_text);
    RunLog run;
    run.config = std::move(config);
    for (const json& rj : j.at("rounds")) {
        RoundLineage rl;
        rl.round = rj.at("round").get<RoundIndex>();
        for (const json& ej : rj.at("entities")) {
            LineageEntity e;
            e.id = ej.at("id").get<std::string>();
            e.sources = clients_from_json(ej.at("sources"));
            e.served = clients_from_json(ej.at("served"));
            const json& base = ej.at("base");
            const std::string kind = base.at("kind").get<std::string>();
            if (kind == "init") {
                e.base.kind = LineageBase::Kind::Init;
            } else if (kind == "carry" || kind == "seed") {
                e.base.kind = kind == "carry" ? LineageBase::Kind::Carry : LineageBase::Kind::Seed;
                e.base.from = base.at("from").get<std::string>();
            } else if (kind == "rewind") {
                e.base.kind = LineageBase::Kind::Rewind;
                RewindRecord rw;
                rw.mode = base.at("mode").get<std::string>() == "retrain" ? RewindMode::Retrain
                                                                          : RewindMode::Reaggregate;
                rw.excluded = clients_from_json(base.at("excluded"));
                rw.upto = base.at("upto").get<RoundIndex>();
                rw.chain = base.at("chain").get<std::vector<std::string>>();
                for (const json& cj : base.at("contributors")) rw.contributors.push_back(clients_from_json(cj));
                e.base.rewind = std::move(rw);
            } else {
                throw LineageError("unknown lineage base kind: " + kind);
            }
            for (const json& uj : ej.at("updates")) {
                LineageUpdate u;
                auto c = ClientId::from_name(uj.at("client").get<std::string>());
                if (!c) throw LineageError("bad client in update");
                u.client = *c;
                u.samples = uj.at("samples").get<std::uint64_t>();
                u.base_entity = uj.at("base").get<std::string>();
                e.updates.push_back(std::move(u));
            }
            rl.entities.push_back(std::move(e));
        }
        run.rounds.push_back(std::move(rl));
    }
    return run;
}

RunLog load_runlog(const std::filesystem::path& run_dir) {
    const ScenarioConfig config = load_scenario(run_dir / "scenario.json");
    std::ifstream in(run_dir / "lineage.json");
    if (!in) throw LineageError("cannot open lineage file in " + run_dir.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_lineage(buffer.str(), config);
}

std::string violations_to_csv(const std::vector<Violation>& violations) {
    std::ostringstream out;
    out << "kind,round,client,offender,detail\n";
    for (const Violation& v : violations) {
        out << (v.kind == ViolationKind::Contamination ? "contamination" : "unfairness") << ","
            << v.round << "," << v.affected.name() << "," << v.offender << ",\"" << v.detail << "\"\n";
    }
    return out.str();
}

} // namespace fedtrack
