// Acceptance suite: one check per shipped guarantee, one PASS/FAIL line each.
// Run via ctest or directly; exits non-zero when any check fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fedtrack/cli.hpp"
#include "fedtrack/engine.hpp"
#include "fedtrack/metrics.hpp"
#include "fedtrack/provenance.hpp"
#include "fedtrack/resolution.hpp"

using namespace fedtrack;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d %-24s %s\n", ok ? "PASS" : "FAIL", criterion, name, detail.c_str());
    if (!ok) ++failures;
}

ScenarioConfig classification_config(std::uint32_t clients, RoundIndex rounds, std::uint64_t seed,
                                     std::uint32_t classes = 5, std::uint32_t spc = 60) {
    ScenarioConfig config;
    config.client_count = clients;
    config.rounds = rounds;
    config.seed = seed;
    config.dataset.samples_per_client = spc;
    config.dataset.dims = 8;
    config.dataset.classes = classes;
    config.dataset.skew_alpha = 0.7;
    config.learner.epochs = 1;
    config.learner.batch_size = 16;
    config.learner.learning_rate = 0.1;
    return config;
}

Disagreement inbound(std::uint32_t from, std::uint32_t to, RoundIndex start = 0) {
    Disagreement d;
    d.initiator = ClientId{from};
    d.target = ClientId{to};
    d.type = DisagreementType::Inbound;
    d.start_round = start;
    return d;
}

bool bytes_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// --- 1. server-side resolution stays under a millisecond ------------------

void criterion_resolution_overhead() {
    const auto roster = make_roster(50);
    std::vector<Disagreement> actives;
    for (std::uint32_t i = 0; i < 50; ++i)
        for (std::uint32_t j = 0; j < 50; ++j)
            if (i != j) actives.push_back(inbound(i, j));

    std::vector<double> micros;
    micros.reserve(1000);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const TrackPlan plan = resolve(actives, roster);
        const auto t1 = std::chrono::steady_clock::now();
        if (plan.tracks.size() != 50) {
            report(1, "resolution-overhead", false, "dense plan did not produce 50 singleton tracks");
            return;
        }
        micros.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    std::sort(micros.begin(), micros.end());
    const double median = micros[micros.size() / 2];
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "median resolve %.1f us over 1000 calls (50 clients, 2450 exclusions); bound 1000 us",
                  median);
    report(1, "resolution-overhead", median < 1000.0, detail);
}

// --- 2. algorithm vs brute-force oracle ------------------------------------

void criterion_oracle_equivalence() {
    std::mt19937 rng(20240521);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint32_t clients = 1 + rng() % 12;
        const auto roster = make_roster(clients);
        std::vector<Disagreement> actives;
        const std::size_t n = rng() % 21;
        for (std::size_t i = 0; i < n; ++i) {
            const auto type = static_cast<DisagreementType>(rng() % 5);
            const std::uint32_t initiator = rng() % clients;
            if (type == DisagreementType::Full || type == DisagreementType::PartialData) {
                Disagreement d;
                d.initiator = ClientId{initiator};
                d.type = type;
                if (type == DisagreementType::PartialData) d.data_mask = 0.3;
                actives.push_back(d);
            } else if (clients >= 2) {
                std::uint32_t target = rng() % clients;
                if (target == initiator) target = (target + 1) % clients;
                Disagreement d = inbound(initiator, target);
                d.type = type;
                actives.push_back(d);
            }
        }
        const TrackPlan plan = resolve(actives, roster);
        const TrackPlan reference = oracle_resolve(actives, roster);

        std::set<std::vector<ClientId>> family, ref_family;
        for (const auto& [id, members] : plan.tracks) family.insert(members);
        for (const auto& [id, members] : reference.tracks) ref_family.insert(members);
        bool same = family == ref_family && plan.fully_excluded == reference.fully_excluded &&
                    plan.primary.size() == reference.primary.size();
        if (same)
            for (const auto& [client, track] : plan.primary)
                if (plan.members(track) != reference.members(reference.primary.at(client))) same = false;
        if (!same) ++mismatches;
    }
    report(2, "oracle-equivalence", mismatches == 0,
           "1000 fuzzed scenarios (<=12 clients, <=20 disagreements), " +
               std::to_string(mismatches) + " mismatches");
}

// --- 3. structural golden cases --------------------------------------------

void criterion_golden_cases() {
    bool ok = true;
    std::string bad;
    auto family = [](const TrackPlan& plan) {
        std::set<std::vector<ClientId>> out;
        for (const auto& [id, members] : plan.tracks) out.insert(members);
        return out;
    };
    auto ids = [](std::initializer_list<std::uint32_t> raw) {
        std::vector<ClientId> out;
        for (auto i : raw) out.push_back(ClientId{i});
        return out;
    };

    // One permanent inbound exclusion: the excluding client gets a
    // personalised track, everyone else the global one.
    {
        const auto plan = resolve({inbound(0, 2)}, make_roster(3));
        if (plan.tracks.size() != 2 ||
            family(plan) != std::set<std::vector<ClientId>>{ids({0, 1}), ids({0, 1, 2})} ||
            plan.members(plan.primary.at(ClientId{0})) != ids({0, 1}) ||
            plan.members(plan.primary.at(ClientId{1})) != ids({0, 1, 2})) {
            ok = false;
            bad += " s1";
        }
    }
    // Mutual exclusion: three distinct models.
    {
        Disagreement d = inbound(0, 1);
        d.type = DisagreementType::Bidirectional;
        const auto plan = resolve({d}, make_roster(3));
        if (plan.tracks.size() != 3 ||
            family(plan) != std::set<std::vector<ClientId>>{ids({0, 2}), ids({1, 2}), ids({0, 1, 2})}) {
            ok = false;
            bad += " bidirectional";
        }
    }
    // Full withdrawal: one track without the withdrawn client.
    {
        Disagreement d;
        d.initiator = ClientId{0};
        d.type = DisagreementType::Full;
        const auto plan = resolve({d}, make_roster(3));
        if (plan.tracks.size() != 1 || plan.tracks.begin()->second != ids({1, 2}) ||
            plan.primary.count(ClientId{0}) != 0) {
            ok = false;
            bad += " full";
        }
    }
    // Submodel reuse: two patterns with identical member sets collapse.
    {
        Disagreement full;
        full.initiator = ClientId{3};
        full.type = DisagreementType::Full;
        const auto plan =
            resolve({full, inbound(0, 2), inbound(1, 2), inbound(1, 3)}, make_roster(4));
        if (plan.tracks.size() != 2 || plan.consolidated_away != 1 ||
            family(plan) != std::set<std::vector<ClientId>>{ids({0, 1}), ids({0, 1, 2})} ||
            plan.primary.at(ClientId{0}) != plan.primary.at(ClientId{1})) {
            ok = false;
            bad += " consolidation";
        }
    }
    report(3, "structural-golden", ok, ok ? "s1, bidirectional, full, consolidation all exact"
                                          : "mismatch in:" + bad);
}

// --- 4. corpus-wide isolation ----------------------------------------------

void criterion_corpus_isolation() {
    const fs::path dir = FEDTRACK_SCENARIO_DIR;
    std::size_t scenarios = 0, violations = 0;
    std::string failed;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        const ScenarioConfig config = load_scenario(entry.path());
        if (config.resolver != ResolverKind::Robust) continue;
        ++scenarios;
        const RunResult run = run_scenario(config);
        const auto found = check_isolation(run.log);
        violations += found.size();
        if (!found.empty()) failed += " " + entry.path().filename().string();
    }
    char detail[240];
    std::snprintf(detail, sizeof detail,
                  "%zu robust corpus scenarios x 20 rounds, %zu isolation violations%s", scenarios,
                  violations, failed.c_str());
    report(4, "corpus-isolation", scenarios >= 15 && violations == 0, detail);
}

// --- 5. naive failure modes are reproduced and robust mode fixes them ------

void criterion_naive_failures() {
    bool ok = true;
    std::string detail;

    // Cross-contamination topology: C1 excludes C3, C2 intermediates.
    auto fig9 = classification_config(3, 8, 901);
    fig9.resolver = ResolverKind::Naive;
    fig9.disagreements.push_back(inbound(0, 2, 3));
    const RunResult naive9 = run_scenario(fig9);
    bool contaminated = false;
    for (const Violation& v : check_isolation(naive9.log))
        if (v.kind == ViolationKind::Contamination && v.affected == ClientId{0} && v.round <= 3 + 2)
            contaminated = true;
    if (!contaminated) {
        ok = false;
        detail += "no contamination within 2 rounds; ";
    }

    // Unfairness topology: C1's update, built without C3, enters C3's model.
    auto fig10 = classification_config(3, 6, 902);
    fig10.resolver = ResolverKind::Naive;
    fig10.disagreements.push_back(inbound(0, 2));
    const RunResult naive10 = run_scenario(fig10);
    bool unfair = false;
    for (const Violation& v : check_fairness(naive10.log))
        if (v.affected == ClientId{2} && v.offender.rfind("C1 ", 0) == 0) unfair = true;
    if (!unfair) {
        ok = false;
        detail += "no unfairness witness; ";
    }

    // The same scenarios under the robust resolver are clean on both checks.
    for (auto config : {fig9, fig10}) {
        config.resolver = ResolverKind::Robust;
        const RunResult robust = run_scenario(config);
        if (!check_isolation(robust.log).empty() || !check_fairness(robust.log).empty()) {
            ok = false;
            detail += "robust run not clean; ";
        }
    }
    if (ok) detail = "contamination + unfairness reproduced under naive, absent under robust";
    report(5, "naive-failures", ok, detail);
}

// --- 6. temporal lifecycle ---------------------------------------------------

void criterion_temporal_lifecycle() {
    auto config = classification_config(4, 16, 601);
    Disagreement d1 = inbound(0, 1, 2);
    d1.duration = Duration::temporary(4); // rounds 2..5
    Disagreement d2 = inbound(2, 3, 4);
    d2.duration = Duration::temporary(8); // rounds 4..11
    config.disagreements = {d1, d2};

    const RunResult run = run_scenario(config);
    bool ok = true;
    std::string detail;
    for (RoundIndex r = 0; r < config.rounds; ++r) {
        // Independent oracle: the global track plus one per active window.
        const std::size_t expected = 1 + (d1.active_at(r) ? 1 : 0) + (d2.active_at(r) ? 1 : 0);
        const std::size_t got = run.records[static_cast<std::size_t>(r)].plan.tracks.size();
        if (got != expected) {
            ok = false;
            detail += "round " + std::to_string(r) + ": " + std::to_string(got) +
                      " tracks, expected " + std::to_string(expected) + "; ";
        }
    }
    const TrackId global = TrackId::from_members(make_roster(4));
    if (run.records[6].plan.primary.at(ClientId{0}) != global ||
        run.records[5].plan.primary.at(ClientId{0}) == global) {
        ok = false;
        detail += "C1 primary did not revert at round 6; ";
    }
    if (run.records[12].plan.primary.at(ClientId{2}) != global ||
        run.records[11].plan.primary.at(ClientId{2}) == global) {
        ok = false;
        detail += "C3 primary did not revert at round 12; ";
    }
    if (ok) detail = "track counts follow both activity windows; primaries revert after expiry";
    report(6, "temporal-lifecycle", ok, detail);
}

// --- 7. deep rewind ----------------------------------------------------------

void criterion_deep_rewind() {
    bool ok = true;
    std::string detail;
    const RoundIndex k = 10;

    // Retrain mode: bit-equality with a run excluded from round 0.
    auto make = [&](RoundIndex start) {
        auto config = classification_config(3, 2 * k, 701);
        config.rewind_mode = RewindMode::Retrain;
        Disagreement d = inbound(0, 2, start);
        d.depth = Depth::Deep;
        config.disagreements = {d};
        return config;
    };
    const RunResult mid = run_scenario(make(k));
    const RunResult fresh = run_scenario(make(0));
    const TrackId personal = TrackId::from_members({ClientId{0}, ClientId{1}});
    for (RoundIndex r = k; r < 2 * k; ++r) {
        if (!bytes_equal(mid.records[static_cast<std::size_t>(r)].aggregate_weights.at(personal.name),
                         fresh.records[static_cast<std::size_t>(r)].aggregate_weights.at(personal.name))) {
            ok = false;
            detail += "retrain weights differ at round " + std::to_string(r) + "; ";
            break;
        }
    }
    if (mid.records.back().aggregate_influence.at(personal.name).contains_client(ClientId{2})) {
        ok = false;
        detail += "retrained influence still carries the excluded client; ";
    }
    if (!check_isolation(mid.log).empty()) {
        ok = false;
        detail += "retrain run not isolation-clean; ";
    }

    // Reaggregate mode: provenance replay confirms no direct contribution of
    // the excluded client anywhere in the rebuilt history.
    auto config = classification_config(3, 2 * k, 702);
    config.rewind_mode = RewindMode::Reaggregate;
    Disagreement d = inbound(0, 2, k);
    d.depth = Depth::Deep;
    config.disagreements = {d};
    const RunResult reagg = run_scenario(config);
    bool saw_rewind = false;
    for (const RoundLineage& rl : reagg.log.rounds) {
        for (const LineageEntity& e : rl.entities) {
            if (e.base.kind != LineageBase::Kind::Rewind) continue;
            saw_rewind = true;
            for (const auto& contributors : e.base.rewind->contributors)
                for (const ClientId& c : contributors)
                    if (c == ClientId{2}) {
                        ok = false;
                        detail += "rebuilt aggregate retains a direct contribution; ";
                    }
        }
    }
    if (!saw_rewind) {
        ok = false;
        detail += "no rewind recorded; ";
    }
    if (!check_isolation(reagg.log).empty()) {
        ok = false;
        detail += "reaggregate run not isolation-clean; ";
    }
    if (ok)
        detail = "retrain bit-identical from round " + std::to_string(k) +
                 " on; reaggregate history free of direct contributions";
    report(7, "deep-rewind", ok, detail);
}

// --- 8. scaling shape ----------------------------------------------------------

void criterion_scaling_shape() {
    // Serial training keeps the phase timings proportional to work done.
    setenv("FEDTRACK_THREADS", "1", 1);

    SweepSpec linear;
    linear.dimension = SweepSpec::Dimension::TotalClients;
    linear.grid = {5, 10, 20, 40};
    linear.repetitions = 5;
    linear.base = classification_config(5, 5, 801, 5, 200);
    linear.base.dataset.dims = 16;
    linear.base.disagreements.push_back(inbound(0, 2)); // fixed structure
    const SweepReport linear_report = run_sweep(linear);

    SweepSpec heavy;
    heavy.dimension = SweepSpec::Dimension::Combined;
    heavy.grid = {6, 12, 24, 48};
    heavy.repetitions = 5;
    heavy.base = classification_config(6, 4, 802, 5, 40);
    const SweepReport heavy_report = run_sweep(heavy);

    unsetenv("FEDTRACK_THREADS");

    auto exponent = [](const SweepReport& report) {
        std::vector<double> xs, ys;
        for (const SweepPoint& p : report.points) {
            xs.push_back(static_cast<double>(p.value));
            ys.push_back(p.mean_total_ns);
        }
        return fit_exponent(xs, ys);
    };
    const double linear_exp = exponent(linear_report);
    const double heavy_exp = exponent(heavy_report);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "total-clients exponent %.3f (bound <= 1.15); combined exponent %.3f (bound > 1.3)",
                  linear_exp, heavy_exp);
    report(8, "scaling-shape", linear_exp <= 1.15 && heavy_exp > 1.3, detail);
}

// --- 9. learning sanity ----------------------------------------------------------

void criterion_learning_sanity() {
    auto config = classification_config(3, 20, 9001, 10, 200);
    config.dataset.dims = 16;
    config.dataset.skew_alpha = 0.5;
    config.learner.batch_size = 32;
    config.disagreements.push_back(inbound(0, 2));

    const RunResult run = run_scenario(config);
    bool ok = true;
    std::string detail;
    for (const TrackMetricsRow& last : run.records.back().metrics) {
        double first_loss = 0.0;
        for (const TrackMetricsRow& first : run.records.front().metrics)
            if (first.track == last.track) first_loss = first.loss;
        if (!(last.loss < first_loss)) {
            ok = false;
            detail += last.track + " loss did not improve; ";
        }
        if (!(last.metric >= 0.30)) {
            ok = false;
            detail += last.track + " accuracy " + std::to_string(last.metric) + " < 0.30; ";
        }
    }
    if (run.records.back().metrics.size() != 2) {
        ok = false;
        detail += "expected 2 tracks; ";
    }
    if (ok) {
        char buffer[120];
        std::snprintf(buffer, sizeof buffer,
                      "both tracks: loss(r20) < loss(r1), accuracy %.2f and %.2f >= 3x random",
                      run.records.back().metrics[0].metric, run.records.back().metrics[1].metric);
        detail = buffer;
    }
    report(9, "learning-sanity", ok, detail);
}

// --- 10. end-to-end determinism ----------------------------------------------

void criterion_determinism() {
    const fs::path scenario = fs::path(FEDTRACK_SCENARIO_DIR) / "s01_inbound.json";
    const fs::path dir_a = fs::temp_directory_path() / ("fedtrack_acc_a_" + std::to_string(::getpid()));
    const fs::path dir_b = fs::temp_directory_path() / ("fedtrack_acc_b_" + std::to_string(::getpid()));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    setenv("FEDTRACK_THREADS", "1", 1);
    const int rc_a = cli_main({"run", scenario.string(), "--out", dir_a.string(), "--persist-models"});
    setenv("FEDTRACK_THREADS", "4", 1);
    const int rc_b = cli_main({"run", scenario.string(), "--out", dir_b.string(), "--persist-models"});
    unsetenv("FEDTRACK_THREADS");

    bool ok = rc_a == 0 && rc_b == 0;
    std::string detail;
    if (!ok) detail = "run invocations failed; ";

    if (ok && slurp(dir_a / "metrics.csv") != slurp(dir_b / "metrics.csv")) {
        ok = false;
        detail += "metrics.csv differs; ";
    }
    std::size_t models = 0;
    if (ok) {
        for (const auto& entry : fs::recursive_directory_iterator(dir_a)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".bin") continue;
            ++models;
            const fs::path twin = dir_b / fs::relative(entry.path(), dir_a);
            if (slurp(entry.path()) != slurp(twin)) {
                ok = false;
                detail += "model binary differs: " + twin.string() + "; ";
                break;
            }
        }
    }
    if (ok)
        detail = "metrics.csv and " + std::to_string(models) +
                 " model binaries byte-identical across FEDTRACK_THREADS=1 and 4";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    report(10, "determinism", ok, detail);
}

} // namespace

int main() {
    criterion_resolution_overhead();
    criterion_oracle_equivalence();
    criterion_golden_cases();
    criterion_corpus_isolation();
    criterion_naive_failures();
    criterion_temporal_lifecycle();
    criterion_deep_rewind();
    criterion_scaling_shape();
    criterion_learning_sanity();
    criterion_determinism();

    if (failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
}
