#include "fedtrack/policy.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "fedtrack/hash.hpp"

namespace fedtrack {

using nlohmann::json;

std::optional<ClientId> ClientId::from_name(const std::string& text) {
    if (text.size() < 2 || text[0] != 'C') return std::nullopt;
    std::uint64_t value = 0;
    for (std::size_t i = 1; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
        value = value * 10 + static_cast<std::uint64_t>(text[i] - '0');
        if (value > 1'000'000) return std::nullopt;
    }
    if (value == 0) return std::nullopt; // display names are 1-based
    return ClientId{static_cast<std::uint32_t>(value - 1)};
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

const char* to_string(DisagreementType t) {
    switch (t) {
        case DisagreementType::Full: return "full";
        case DisagreementType::Inbound: return "inbound";
        case DisagreementType::Outbound: return "outbound";
        case DisagreementType::Bidirectional: return "bidirectional";
        case DisagreementType::PartialData: return "partial_data";
    }
    return "?";
}

std::vector<ClientId> make_roster(std::uint32_t client_count) {
    std::vector<ClientId> roster;
    roster.reserve(client_count);
    for (std::uint32_t i = 0; i < client_count; ++i) roster.push_back(ClientId{i});
    return roster;
}

std::vector<ValidationError> validate_scenario(const ScenarioConfig& config) {
    std::vector<ValidationError> errors;
    auto add = [&](int idx, std::string rule, std::string msg) {
        errors.push_back(ValidationError{idx, std::move(rule), std::move(msg)});
    };

    if (config.client_count == 0)
        add(-1, "client-count", "client_count must be at least 1");
    if (config.rounds < 1)
        add(-1, "rounds", "rounds must be at least 1");
    if (config.dataset.kind != DatasetSpec::Kind::MnistIdx && config.dataset.samples_per_client == 0)
        add(-1, "dataset", "samples_per_client must be positive");

    for (std::size_t i = 0; i < config.disagreements.size(); ++i) {
        const Disagreement& d = config.disagreements[i];
        const int idx = static_cast<int>(i);
        auto known = [&](ClientId c) { return c.index < config.client_count; };

        if (!known(d.initiator))
            add(idx, "unknown client", "initiator " + d.initiator.name() + " is outside the roster");
        if (d.target && !known(*d.target))
            add(idx, "unknown client", "target " + d.target->name() + " is outside the roster");
        if (d.target && *d.target == d.initiator)
            add(idx, "self-exclusion", d.initiator.name() + " cannot exclude itself");
        if (d.requires_target() && !d.target)
            add(idx, "missing target", std::string(to_string(d.type)) + " requires a target");
        if (!d.requires_target() && d.target)
            add(idx, "unexpected target", std::string(to_string(d.type)) + " carries no target");
        if (d.type == DisagreementType::PartialData) {
            if (!d.data_mask)
                add(idx, "missing data mask", "partial_data requires data_mask");
            else if (*d.data_mask < 0.0 || *d.data_mask >= 1.0)
                add(idx, "data mask range", "data_mask must lie in [0,1)");
            if (d.depth == Depth::Deep)
                add(idx, "deep partial data", "deep has no defined semantics for partial_data");
        } else if (d.data_mask) {
            add(idx, "unexpected data mask", "data_mask is only valid for partial_data");
        }
        if (d.duration.is_temporary() && *d.duration.expiry < 1)
            add(idx, "temporary expiry", "temporary duration must last at least 1 round");
        if (d.start_round < 0)
            add(idx, "start round", "start_round must be non-negative");
    }
    return errors;
}

std::vector<Disagreement> active_disagreements(const ScenarioConfig& config, RoundIndex round) {
    std::vector<Disagreement> active;
    for (const Disagreement& d : config.disagreements)
        if (d.active_at(round)) active.push_back(d);
    return active;
}

bool any_deep(const ScenarioConfig& config) {
    for (const Disagreement& d : config.disagreements)
        if (d.depth == Depth::Deep) return true;
    return false;
}

namespace {

ClientId parse_client(const json& j, const char* field) {
    if (j.is_number_unsigned() || j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (v < 0) throw std::runtime_error(std::string(field) + ": client index must be non-negative");
        return ClientId{static_cast<std::uint32_t>(v)};
    }
    if (j.is_string()) {
        auto parsed = ClientId::from_name(j.get<std::string>());
        if (!parsed) throw std::runtime_error(std::string(field) + ": expected a client name like \"C1\"");
        return *parsed;
    }
    throw std::runtime_error(std::string(field) + ": expected client name or index");
}

Duration parse_duration(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "indefinite") return Duration::indefinite();
        throw std::runtime_error("duration: expected \"indefinite\" or {\"temporary\": N}");
    }
    if (j.is_object() && j.contains("temporary"))
        return Duration::temporary(j.at("temporary").get<RoundIndex>());
    throw std::runtime_error("duration: expected \"indefinite\" or {\"temporary\": N}");
}

DisagreementType parse_type(const std::string& s) {
    if (s == "full") return DisagreementType::Full;
    if (s == "inbound") return DisagreementType::Inbound;
    if (s == "outbound") return DisagreementType::Outbound;
    if (s == "bidirectional") return DisagreementType::Bidirectional;
    if (s == "partial_data") return DisagreementType::PartialData;
    throw std::runtime_error("unknown disagreement type: " + s);
}

DatasetSpec parse_dataset(const json& j) {
    DatasetSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "synthetic_classification") spec.kind = DatasetSpec::Kind::SyntheticClassification;
    else if (kind == "synthetic_regression") spec.kind = DatasetSpec::Kind::SyntheticRegression;
    else if (kind == "mnist_idx") spec.kind = DatasetSpec::Kind::MnistIdx;
    else throw std::runtime_error("unknown dataset kind: " + kind);

    if (spec.kind == DatasetSpec::Kind::MnistIdx) {
        spec.images_path = j.at("images").get<std::string>();
        spec.labels_path = j.at("labels").get<std::string>();
        spec.max_samples = j.value("max_samples", 0u);
        spec.skew_alpha = j.value("skew_alpha", 0.5);
    } else {
        spec.samples_per_client = j.value("samples_per_client", 120u);
        spec.dims = j.value("dims", 16u);
        spec.skew_alpha = j.value("skew_alpha", 0.5);
        if (spec.kind == DatasetSpec::Kind::SyntheticClassification)
            spec.classes = j.value("classes", 10u);
        else
            spec.noise = j.value("noise", 0.1);
    }
    return spec;
}

json dataset_to_json(const DatasetSpec& spec) {
    json j;
    switch (spec.kind) {
        case DatasetSpec::Kind::SyntheticClassification:
            j["kind"] = "synthetic_classification";
            j["samples_per_client"] = spec.samples_per_client;
            j["dims"] = spec.dims;
            j["classes"] = spec.classes;
            j["skew_alpha"] = spec.skew_alpha;
            break;
        case DatasetSpec::Kind::SyntheticRegression:
            j["kind"] = "synthetic_regression";
            j["samples_per_client"] = spec.samples_per_client;
            j["dims"] = spec.dims;
            j["noise"] = spec.noise;
            j["skew_alpha"] = spec.skew_alpha;
            break;
        case DatasetSpec::Kind::MnistIdx:
            j["kind"] = "mnist_idx";
            j["images"] = spec.images_path;
            j["labels"] = spec.labels_path;
            if (spec.max_samples) j["max_samples"] = spec.max_samples;
            j["skew_alpha"] = spec.skew_alpha;
            break;
    }
    return j;
}

} // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    json j = json::parse(json_text);
    if (!j.contains("schema_version"))
        throw std::runtime_error("scenario is missing schema_version");
    if (j.at("schema_version").get<int>() != 1)
        throw std::runtime_error("unsupported schema_version");

    ScenarioConfig config;
    config.client_count = j.at("client_count").get<std::uint32_t>();
    config.rounds = j.at("rounds").get<RoundIndex>();
    config.seed = j.value("seed", 1ULL);

    const std::string resolver = j.value("resolver", "robust");
    if (resolver == "robust") config.resolver = ResolverKind::Robust;
    else if (resolver == "naive") config.resolver = ResolverKind::Naive;
    else throw std::runtime_error("unknown resolver: " + resolver);

    const std::string rewind = j.value("rewind_mode", "reaggregate");
    if (rewind == "reaggregate") config.rewind_mode = RewindMode::Reaggregate;
    else if (rewind == "retrain") config.rewind_mode = RewindMode::Retrain;
    else throw std::runtime_error("unknown rewind_mode: " + rewind);

    if (j.contains("dataset")) config.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("learner")) {
        const json& l = j.at("learner");
        config.learner.epochs = l.value("epochs", 1u);
        config.learner.batch_size = l.value("batch_size", 32u);
        config.learner.learning_rate = l.value("learning_rate", 0.05);
    }

    for (const json& dj : j.value("disagreements", json::array())) {
        Disagreement d;
        d.initiator = parse_client(dj.at("initiator"), "initiator");
        if (dj.contains("target")) d.target = parse_client(dj.at("target"), "target");
        d.type = parse_type(dj.at("type").get<std::string>());
        if (dj.contains("duration")) d.duration = parse_duration(dj.at("duration"));
        const std::string depth = dj.value("depth", "shallow");
        if (depth == "shallow") d.depth = Depth::Shallow;
        else if (depth == "deep") d.depth = Depth::Deep;
        else throw std::runtime_error("unknown depth: " + depth);
        d.start_round = dj.value("start_round", 0);
        if (dj.contains("data_mask")) d.data_mask = dj.at("data_mask").get<double>();
        config.disagreements.push_back(d);
    }
    return config;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open scenario file: " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

std::string scenario_to_json(const ScenarioConfig& config) {
    json j;
    j["schema_version"] = 1;
    j["client_count"] = config.client_count;
    j["rounds"] = config.rounds;
    j["seed"] = config.seed;
    j["resolver"] = config.resolver == ResolverKind::Robust ? "robust" : "naive";
    j["rewind_mode"] = config.rewind_mode == RewindMode::Reaggregate ? "reaggregate" : "retrain";
    j["dataset"] = dataset_to_json(config.dataset);
    j["learner"] = {{"epochs", config.learner.epochs},
                    {"batch_size", config.learner.batch_size},
                    {"learning_rate", config.learner.learning_rate}};
    json ds = json::array();
    for (const Disagreement& d : config.disagreements) {
        json dj;
        dj["initiator"] = d.initiator.name();
        if (d.target) dj["target"] = d.target->name();
        dj["type"] = to_string(d.type);
        if (d.duration.is_temporary())
            dj["duration"] = {{"temporary", *d.duration.expiry}};
        else
            dj["duration"] = "indefinite";
        dj["depth"] = d.depth == Depth::Deep ? "deep" : "shallow";
        dj["start_round"] = d.start_round;
        if (d.data_mask) dj["data_mask"] = *d.data_mask;
        ds.push_back(dj);
    }
    j["disagreements"] = ds;
    return j.dump(2) + "\n";
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write scenario file: " + file.string());
    out << scenario_to_json(config);
}

} // namespace fedtrack
