#include "fedtrack/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "fedtrack/engine.hpp"
#include "fedtrack/metrics.hpp"
#include "fedtrack/policy.hpp"
#include "fedtrack/provenance.hpp"

namespace fedtrack {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerification = 3;

struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::string resolver;
};

void apply_overrides(ScenarioConfig& config, const CommonOverrides& o) {
    if (o.seed) config.seed = *o.seed;
    if (o.resolver == "robust") config.resolver = ResolverKind::Robust;
    else if (o.resolver == "naive") config.resolver = ResolverKind::Naive;
    else if (!o.resolver.empty()) throw std::runtime_error("unknown resolver: " + o.resolver);
}

int cmd_validate(const std::string& scenario_path) {
    const ScenarioConfig config = load_scenario(scenario_path);
    const auto errors = validate_scenario(config);
    for (const ValidationError& e : errors) {
        if (e.disagreement_index >= 0)
            std::cout << "disagreement " << e.disagreement_index << ": " << e.rule << " - "
                      << e.message << "\n";
        else
            std::cout << e.rule << " - " << e.message << "\n";
    }
    if (errors.empty()) {
        std::cout << "ok\n";
        return kExitOk;
    }
    return kExitRuntime;
}

int cmd_run(const std::string& scenario_path, const std::string& out, bool persist, bool force,
            const CommonOverrides& overrides) {
    ScenarioConfig config = load_scenario(scenario_path);
    apply_overrides(config, overrides);
    RunOptions options;
    options.out_dir = out;
    options.persist_models = persist;
    options.force = force;
    const RunResult result = run_scenario(config, options);
    std::cout << "completed " << result.records.size() << " rounds, output in " << out << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, bool force) {
    const SweepSpec spec = load_sweep(spec_path);
    namespace fs = std::filesystem;
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw std::runtime_error("output directory is not empty (use --force): " + out);
    fs::create_directories(out);
    const SweepReport report = run_sweep(spec);
    std::ofstream csv(fs::path(out) / "sweep.csv");
    csv << sweep_csv(report);
    std::vector<double> xs, ys;
    for (const SweepPoint& p : report.points) {
        xs.push_back(static_cast<double>(p.value));
        ys.push_back(p.mean_total_ns);
    }
    if (xs.size() >= 2)
        std::cout << "fitted runtime exponent: " << fit_exponent(xs, ys) << "\n";
    std::cout << "sweep written to " << out << "/sweep.csv\n";
    return kExitOk;
}

int cmd_verify(const std::string& run_dir, bool expect_violations) {
    const RunLog run = load_runlog(run_dir);
    std::vector<Violation> violations = check_isolation(run);
    const std::vector<Violation> unfair = check_fairness(run);
    violations.insert(violations.end(), unfair.begin(), unfair.end());

    std::ofstream csv(std::filesystem::path(run_dir) / "violations.csv");
    csv << violations_to_csv(violations);

    for (const std::string& residual : deep_residuals(run))
        std::cout << "note: " << residual << "\n";

    std::cout << violations.size() << " violation(s)\n";
    if (expect_violations) return violations.empty() ? kExitVerification : kExitOk;
    if (run.config.resolver == ResolverKind::Robust && !violations.empty()) return kExitVerification;
    return kExitOk;
}

int cmd_report(const std::string& run_dir) {
    const RunLog run = load_runlog(run_dir);
    const TimelineArtifact timeline = emit_timeline(run);
    namespace fs = std::filesystem;
    std::ofstream csv(fs::path(run_dir) / "timeline.csv");
    csv << timeline.csv;
    std::ofstream svg(fs::path(run_dir) / "timeline.svg");
    svg << timeline.svg;

    std::size_t entities = 0;
    for (const RoundLineage& rl : run.rounds) entities = std::max(entities, rl.entities.size());
    std::cout << "rounds: " << run.rounds.size() << "\n";
    std::cout << "peak concurrent tracks: " << entities << "\n";
    std::cout << "timeline written to " << run_dir << "/timeline.{csv,svg}\n";
    return kExitOk;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"fedtrack: deterministic federated learning simulator with "
                 "policy-driven client exclusions and multi-track aggregation"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, run_dir, spec_path;
    bool persist = false, force = false, expect_violations = false;
    CommonOverrides overrides;
    std::uint64_t seed_value = 0;

    auto* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("scenario", scenario_path, "scenario JSON file")->required();

    auto* run = app.add_subcommand("run", "execute a scenario");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "run output directory")->required();
    run->add_flag("--persist-models", persist, "write every aggregated and local model");
    run->add_flag("--force", force, "overwrite a non-empty output directory");
    auto* seed_opt = run->add_option("--seed", seed_value, "override the config seed");
    run->add_option("--resolver", overrides.resolver, "override the resolver (robust|naive)");

    auto* sweep = app.add_subcommand("sweep", "run a scalability sweep");
    sweep->add_option("spec", spec_path, "sweep spec JSON file")->required();
    sweep->add_option("--out", out_dir, "sweep output directory")->required();
    sweep->add_flag("--force", force, "overwrite a non-empty output directory");

    auto* verify = app.add_subcommand("verify", "run the provenance checkers on a run directory");
    verify->add_option("run_dir", run_dir, "run directory")->required();
    verify->add_flag("--expect-violations", expect_violations,
                     "succeed only when violations are found (naive baselines)");

    auto* report = app.add_subcommand("report", "emit timeline artifacts for a run directory");
    report->add_option("run_dir", run_dir, "run directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::cout << app.help();
            return kExitOk;
        }
        std::cerr << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (seed_opt->count() > 0) overrides.seed = seed_value;
        if (validate->parsed()) return cmd_validate(scenario_path);
        if (run->parsed()) return cmd_run(scenario_path, out_dir, persist, force, overrides);
        if (sweep->parsed()) return cmd_sweep(spec_path, out_dir, force);
        if (verify->parsed()) return cmd_verify(run_dir, expect_violations);
        if (report->parsed()) return cmd_report(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace fedtrack
