#include "fedtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "fedtrack/hash.hpp"

namespace fedtrack {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

} // namespace

std::string metrics_csv(const std::vector<RoundRecord>& records) {
    std::ostringstream out;
    out << "round,track,loss,metric,members,background_updates\n";
    for (const RoundRecord& r : records)
        for (const TrackMetricsRow& row : r.metrics)
            out << r.round << "," << row.track << "," << fmt_double(row.loss) << ","
                << fmt_double(row.metric) << "," << row.members << "," << row.background_updates
                << "\n";
    return out.str();
}

std::string timings_csv(const std::vector<RoundRecord>& records) {
    std::ostringstream out;
    out << "round,phase,nanos\n";
    for (const RoundRecord& r : records) {
        out << r.round << ",analyse," << r.timings.analyse_ns << "\n";
        out << r.round << ",train," << r.timings.train_ns << "\n";
        out << r.round << ",aggregate," << r.timings.aggregate_ns << "\n";
        out << r.round << ",evaluate," << r.timings.evaluate_ns << "\n";
    }
    return out.str();
}

std::size_t round_model_count(const RoundRecord& record) {
    std::size_t count = record.lineage.entities.size();
    for (const LineageEntity& e : record.lineage.entities) count += e.updates.size();
    return count;
}

SweepSpec parse_sweep(const std::string& json_text) {
    const json j = json::parse(json_text);
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
        throw std::runtime_error("sweep spec needs schema_version 1");
    SweepSpec spec;
    const std::string dim = j.at("dimension").get<std::string>();
    if (dim == "total_clients") spec.dimension = SweepSpec::Dimension::TotalClients;
    else if (dim == "disagreeing_clients") spec.dimension = SweepSpec::Dimension::DisagreeingClients;
    else if (dim == "density") spec.dimension = SweepSpec::Dimension::Density;
    else if (dim == "combined") spec.dimension = SweepSpec::Dimension::Combined;
    else throw std::runtime_error("unknown sweep dimension: " + dim);
    spec.grid = j.at("grid").get<std::vector<std::uint32_t>>();
    if (spec.grid.empty() || !std::is_sorted(spec.grid.begin(), spec.grid.end()) ||
        std::adjacent_find(spec.grid.begin(), spec.grid.end()) != spec.grid.end())
        throw std::runtime_error("sweep grid must be strictly increasing and non-empty");
    spec.repetitions = j.value("repetitions", 5u);
    if (spec.repetitions < 1) throw std::runtime_error("repetitions must be at least 1");
    spec.base = parse_scenario(j.at("base").dump());
    return spec;
}

SweepSpec load_sweep(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open sweep spec: " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_sweep(buffer.str());
}

namespace {

// Ring of inbound exclusions: each of the first `disagreeing` clients
// excludes the next `density` clients after it (skipping itself).
std::vector<Disagreement> ring_exclusions(std::uint32_t clients, std::uint32_t disagreeing,
                                          std::uint32_t density) {
    std::vector<Disagreement> out;
    disagreeing = std::min(disagreeing, clients);
    density = std::min(density, clients - 1);
    for (std::uint32_t i = 0; i < disagreeing; ++i) {
        for (std::uint32_t k = 1; k <= density; ++k) {
            const std::uint32_t target = (i + k) % clients;
            if (target == i) continue;
            Disagreement d;
            d.initiator = ClientId{i};
            d.target = ClientId{target};
            d.type = DisagreementType::Inbound;
            out.push_back(d);
        }
    }
    return out;
}

} // namespace

ScenarioConfig materialize_sweep_scenario(const SweepSpec& spec, std::uint32_t value) {
    ScenarioConfig config = spec.base;
    switch (spec.dimension) {
        case SweepSpec::Dimension::TotalClients:
            config.client_count = value;
            break;
        case SweepSpec::Dimension::DisagreeingClients:
            config.disagreements = ring_exclusions(config.client_count, value, 1);
            break;
        case SweepSpec::Dimension::Density:
            config.disagreements =
                ring_exclusions(config.client_count, std::max(1u, config.client_count / 2), value);
            break;
        case SweepSpec::Dimension::Combined:
            config.client_count = value;
            config.disagreements =
                ring_exclusions(value, std::max(1u, value / 2), std::max(1u, value / 8));
            break;
    }
    return config;
}

std::uint64_t sweep_rep_seed(std::uint64_t base_seed, std::uint32_t value, std::uint32_t rep) {
    std::uint64_t h = hash_u64(kFnvOffset, base_seed);
    h = hash_str(h, "sweep");
    h = hash_u64(h, value);
    h = hash_u64(h, rep);
    return finalize_hash(h);
}

std::uint64_t metrics_digest(const std::vector<RoundRecord>& records) {
    std::uint64_t h = kFnvOffset;
    for (const RoundRecord& r : records) {
        h = hash_u64(h, static_cast<std::uint64_t>(r.round));
        for (const TrackMetricsRow& row : r.metrics) {
            h = hash_str(h, row.track);
            std::uint64_t bits;
            std::memcpy(&bits, &row.loss, 8);
            h = hash_u64(h, bits);
            std::memcpy(&bits, &row.metric, 8);
            h = hash_u64(h, bits);
            h = hash_u64(h, row.members);
        }
    }
    return finalize_hash(h);
}

SweepReport run_sweep(const SweepSpec& spec) {
    SweepReport report;
    report.dimension = spec.dimension;
    report.repetitions = spec.repetitions;

    for (const std::uint32_t value : spec.grid) {
        SweepPoint point;
        point.value = value;
        double analyse = 0, train = 0, aggregate = 0, evaluate = 0;
        for (std::uint32_t rep = 0; rep < spec.repetitions; ++rep) {
            ScenarioConfig config = materialize_sweep_scenario(spec, value);
            config.seed = sweep_rep_seed(spec.base.seed, value, rep);
            const RunResult run = run_scenario(config);
            std::int64_t total = 0;
            for (const RoundRecord& r : run.records) {
                total += r.timings.total_ns();
                analyse += static_cast<double>(r.timings.analyse_ns);
                train += static_cast<double>(r.timings.train_ns);
                aggregate += static_cast<double>(r.timings.aggregate_ns);
                evaluate += static_cast<double>(r.timings.evaluate_ns);
            }
            point.rep_total_ns.push_back(static_cast<double>(total));
            point.metric_digests.push_back(metrics_digest(run.records));
        }
        const double n = static_cast<double>(spec.repetitions);
        for (const double t : point.rep_total_ns) point.mean_total_ns += t;
        point.mean_total_ns /= n;
        double var = 0;
        for (const double t : point.rep_total_ns) var += (t - point.mean_total_ns) * (t - point.mean_total_ns);
        point.std_total_ns = std::sqrt(var / n);
        point.mean_analyse_ns = analyse / n;
        point.mean_train_ns = train / n;
        point.mean_aggregate_ns = aggregate / n;
        point.mean_evaluate_ns = evaluate / n;
        report.points.push_back(std::move(point));
    }
    return report;
}

std::string sweep_csv(const SweepReport& report) {
    std::ostringstream out;
    out << "value,repetitions,mean_total_ns,std_total_ns,mean_analyse_ns,mean_train_ns,"
           "mean_aggregate_ns,mean_evaluate_ns\n";
    for (const SweepPoint& p : report.points)
        out << p.value << "," << report.repetitions << "," << fmt_double(p.mean_total_ns) << ","
            << fmt_double(p.std_total_ns) << "," << fmt_double(p.mean_analyse_ns) << ","
            << fmt_double(p.mean_train_ns) << "," << fmt_double(p.mean_aggregate_ns) << ","
            << fmt_double(p.mean_evaluate_ns) << "\n";
    return out.str();
}

double fit_exponent(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::runtime_error("fit_exponent needs at least two points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TimelineArtifact emit_timeline(const RunLog& run) {
    // Entity order: first appearance, then id.
    std::vector<std::string> order;
    std::map<std::string, std::pair<RoundIndex, RoundIndex>> spans; // [first, last]
    std::map<std::pair<RoundIndex, std::string>, std::string> cells;
    RoundIndex last_round = -1;

    for (const RoundLineage& rl : run.rounds) {
        last_round = std::max(last_round, rl.round);
        for (const LineageEntity& e : rl.entities) {
            if (e.served.empty() && e.updates.empty()) continue; // dormant naive entity
            if (!spans.count(e.id)) {
                spans[e.id] = {rl.round, rl.round};
                order.push_back(e.id);
            }
            spans[e.id].second = rl.round;
            std::string contributors;
            for (const LineageUpdate& u : e.updates) {
                if (!contributors.empty()) contributors += "|";
                contributors += u.client.name();
            }
            cells[{rl.round, e.id}] = contributors;
        }
    }

    TimelineArtifact artifact;
    std::ostringstream csv;
    csv << "round";
    for (const std::string& id : order) csv << "," << id;
    csv << "\n";
    for (RoundIndex r = 0; r <= last_round; ++r) {
        csv << r;
        for (const std::string& id : order) {
            csv << ",";
            if (auto it = cells.find({r, id}); it != cells.end()) csv << it->second;
        }
        csv << "\n";
    }
    artifact.csv = csv.str();

    // Self-contained SVG: one horizontal bar per entity across its lifespan,
    // with round ticks and creation/dissolution markers.
    const int rounds = static_cast<int>(last_round) + 1;
    const int row_h = 24, left = 160, top = 30, cell_w = 28;
    const int width = left + rounds * cell_w + 20;
    const int height = top + static_cast<int>(order.size()) * row_h + 30;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<style>text{font-family:monospace;font-size:11px;}</style>\n";
    for (int r = 0; r < rounds; ++r) {
        const int x = left + r * cell_w;
        svg << "<line x1=\"" << x << "\" y1=\"" << top - 8 << "\" x2=\"" << x << "\" y2=\""
            << height - 20 << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << x + 2 << "\" y=\"" << top - 12 << "\">" << r << "</text>\n";
    }
    int row = 0;
    for (const std::string& id : order) {
        const auto [first, last] = spans.at(id);
        const int y = top + row * row_h;
        const int x0 = left + static_cast<int>(first) * cell_w;
        const int x1 = left + (static_cast<int>(last) + 1) * cell_w;
        svg << "<text x=\"6\" y=\"" << y + 14 << "\">" << id.substr(0, 18) << "</text>\n";
        svg << "<rect x=\"" << x0 << "\" y=\"" << y + 4 << "\" width=\"" << x1 - x0
            << "\" height=\"14\" rx=\"3\" fill=\"#4a90d9\" fill-opacity=\"0.6\"/>\n";
        svg << "<line x1=\"" << x0 << "\" y1=\"" << y + 2 << "\" x2=\"" << x0 << "\" y2=\"" << y + 20
            << "\" stroke=\"#2a6\" stroke-width=\"2\"/>\n";
        if (last < last_round)
            svg << "<line x1=\"" << x1 << "\" y1=\"" << y + 2 << "\" x2=\"" << x1 << "\" y2=\""
                << y + 20 << "\" stroke=\"#c33\" stroke-width=\"2\"/>\n";
        ++row;
    }
    svg << "</svg>\n";
    artifact.svg = svg.str();
    return artifact;
}

} // namespace fedtrack
