#include "fedtrack/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "fedtrack/hash.hpp"
#include "fedtrack/rng.hpp"

namespace fedtrack {

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double Rng::gamma(double alpha) {
    if (alpha < 1.0) {
        // Boost to alpha + 1 and scale back.
        const double u = uniform();
        return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    // Marsaglia-Tsang squeeze method.
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> Rng::dirichlet(double alpha, std::size_t count) {
    std::vector<double> draws(count);
    double total = 0.0;
    for (double& g : draws) {
        g = gamma(alpha);
        total += g;
    }
    if (total <= 0.0) {
        // Numerically possible only at extreme alpha; fall back to uniform.
        std::fill(draws.begin(), draws.end(), 1.0 / static_cast<double>(count));
        return draws;
    }
    for (double& g : draws) g /= total;
    return draws;
}

std::vector<std::uint32_t> Dataset::client_samples(std::uint32_t client) const {
    std::vector<std::uint32_t> out;
    if (client >= partition.size()) return out;
    for (const SampleRange& range : partition[client])
        for (std::uint32_t i = range.begin; i < range.end; ++i) out.push_back(i);
    return out;
}

namespace {

// Largest-remainder apportionment of n items across probability weights.
// Deterministic: remainder ties break toward the lower bucket index.
std::vector<std::uint32_t> apportion(const std::vector<double>& weights, std::uint32_t n) {
    const std::size_t k = weights.size();
    std::vector<std::uint32_t> counts(k, 0);
    std::vector<std::pair<double, std::size_t>> remainders(k);
    std::uint32_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = weights[i] * static_cast<double>(n);
        counts[i] = static_cast<std::uint32_t>(exact);
        assigned += counts[i];
        remainders[i] = {exact - static_cast<double>(counts[i]), i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::uint32_t i = 0; assigned < n; ++assigned, ++i)
        counts[remainders[i % k].second]++;
    return counts;
}

std::vector<SampleRange> compress_ranges(const std::vector<std::uint32_t>& sorted_indices) {
    std::vector<SampleRange> ranges;
    for (std::uint32_t idx : sorted_indices) {
        if (!ranges.empty() && ranges.back().end == idx)
            ranges.back().end = idx + 1;
        else
            ranges.push_back({idx, idx + 1});
    }
    return ranges;
}

std::uint32_t read_be32(std::istream& in, const char* what) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4))
        throw DataError(std::string("truncated IDX header while reading ") + what);
    return (static_cast<std::uint32_t>(bytes[0]) << 24) | (static_cast<std::uint32_t>(bytes[1]) << 16) |
           (static_cast<std::uint32_t>(bytes[2]) << 8) | static_cast<std::uint32_t>(bytes[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

} // namespace

Dataset generate_synthetic(std::uint32_t clients, std::uint32_t samples_per_client,
                           std::uint32_t dims, std::uint32_t classes, double skew_alpha,
                           std::uint64_t seed) {
    if (clients == 0 || samples_per_client == 0 || dims == 0 || classes == 0)
        throw DataError("synthetic generator needs positive clients, samples, dims and classes");
    if (skew_alpha <= 0.0) throw DataError("skew_alpha must be positive");
    if (classes > samples_per_client)
        throw DataError("more classes than samples per client");

    Rng rng(seed);
    std::vector<double> centers(static_cast<std::size_t>(classes) * dims);
    for (double& v : centers) v = 3.0 * rng.normal();

    const std::size_t total = static_cast<std::size_t>(clients) * samples_per_client;
    Dataset ds;
    ds.task = Task::Classification;
    ds.dims = dims;
    ds.classes = classes;
    ds.features.resize(total * dims);
    ds.labels.resize(total);
    ds.partition.resize(clients);

    for (std::uint32_t c = 0; c < clients; ++c) {
        const std::vector<double> proportions = rng.dirichlet(skew_alpha, classes);
        const std::vector<std::uint32_t> counts = apportion(proportions, samples_per_client);

        std::vector<std::uint32_t> labels;
        labels.reserve(samples_per_client);
        for (std::uint32_t k = 0; k < classes; ++k)
            labels.insert(labels.end(), counts[k], k);
        rng.shuffle(labels); // canonical order mixes labels within the client block

        const std::uint32_t base = c * samples_per_client;
        for (std::uint32_t s = 0; s < samples_per_client; ++s) {
            const std::uint32_t k = labels[s];
            ds.labels[base + s] = static_cast<double>(k);
            double* row = ds.features.data() + static_cast<std::size_t>(base + s) * dims;
            const double* center = centers.data() + static_cast<std::size_t>(k) * dims;
            for (std::uint32_t d = 0; d < dims; ++d) row[d] = center[d] + rng.normal();
        }
        ds.partition[c] = {{base, base + samples_per_client}};
    }
    return ds;
}

Dataset generate_synthetic_regression(std::uint32_t clients, std::uint32_t samples_per_client,
                                      std::uint32_t dims, double noise, std::uint64_t seed) {
    if (clients == 0 || samples_per_client == 0 || dims == 0)
        throw DataError("synthetic generator needs positive clients, samples and dims");

    Rng rng(seed);
    std::vector<double> weights(dims);
    for (double& v : weights) v = rng.normal();
    const double bias = rng.normal();

    const std::size_t total = static_cast<std::size_t>(clients) * samples_per_client;
    Dataset ds;
    ds.task = Task::Regression;
    ds.dims = dims;
    ds.classes = 0;
    ds.features.resize(total * dims);
    ds.labels.resize(total);
    ds.partition.resize(clients);

    for (std::uint32_t c = 0; c < clients; ++c) {
        std::vector<double> shift(dims);
        for (double& v : shift) v = rng.normal(); // per-client cluster, non-IID features
        const std::uint32_t base = c * samples_per_client;
        for (std::uint32_t s = 0; s < samples_per_client; ++s) {
            double* row = ds.features.data() + static_cast<std::size_t>(base + s) * dims;
            double y = bias;
            for (std::uint32_t d = 0; d < dims; ++d) {
                row[d] = shift[d] + rng.normal();
                y += weights[d] * row[d];
            }
            ds.labels[base + s] = y + noise * rng.normal();
        }
        ds.partition[c] = {{base, base + samples_per_client}};
    }
    return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::uint32_t max_samples) {
    std::ifstream img(images, std::ios::binary);
    if (!img) throw DataError("cannot open IDX images file: " + images.string());
    std::ifstream lbl(labels, std::ios::binary);
    if (!lbl) throw DataError("cannot open IDX labels file: " + labels.string());

    if (const std::uint32_t magic = read_be32(img, "images magic"); magic != 0x00000803)
        throw DataError("wrong magic in images file (expected 0x00000803)");
    const std::uint32_t image_count = read_be32(img, "image count");
    const std::uint32_t rows = read_be32(img, "row count");
    const std::uint32_t cols = read_be32(img, "column count");

    if (const std::uint32_t magic = read_be32(lbl, "labels magic"); magic != 0x00000801)
        throw DataError("wrong magic in labels file (expected 0x00000801)");
    const std::uint32_t label_count = read_be32(lbl, "label count");

    if (image_count != label_count)
        throw DataError("image/label count mismatch: " + std::to_string(image_count) + " vs " +
                        std::to_string(label_count));

    std::uint32_t count = image_count;
    if (max_samples && max_samples < count) count = max_samples;

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Dataset ds;
    ds.task = Task::Classification;
    ds.dims = static_cast<std::uint32_t>(pixels);
    ds.classes = 10;
    ds.features.resize(static_cast<std::size_t>(count) * pixels);
    ds.labels.resize(count);

    std::vector<unsigned char> buffer(pixels);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!img.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(pixels)))
            throw DataError("truncated image payload at sample " + std::to_string(i));
        double* row = ds.features.data() + static_cast<std::size_t>(i) * pixels;
        for (std::size_t p = 0; p < pixels; ++p) row[p] = static_cast<double>(buffer[p]) / 255.0;
        unsigned char label;
        if (!lbl.read(reinterpret_cast<char*>(&label), 1))
            throw DataError("truncated label payload at sample " + std::to_string(i));
        ds.labels[i] = static_cast<double>(label);
    }
    return ds;
}

void save_idx(const Dataset& dataset, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
    if (dataset.task != Task::Classification)
        throw DataError("save_idx only supports classification datasets");
    // Recover the square image shape; fall back to 1 x dims.
    std::uint32_t rows = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(dataset.dims))));
    std::uint32_t cols = rows && rows * rows == dataset.dims ? rows : dataset.dims;
    if (rows * cols != dataset.dims) rows = 1;

    std::ofstream img(images, std::ios::binary);
    if (!img) throw DataError("cannot write IDX images file: " + images.string());
    std::ofstream lbl(labels, std::ios::binary);
    if (!lbl) throw DataError("cannot write IDX labels file: " + labels.string());

    const std::uint32_t count = static_cast<std::uint32_t>(dataset.sample_count());
    write_be32(img, 0x00000803);
    write_be32(img, count);
    write_be32(img, rows);
    write_be32(img, cols);
    write_be32(lbl, 0x00000801);
    write_be32(lbl, count);

    std::vector<unsigned char> buffer(dataset.dims);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto row = dataset.row(i);
        for (std::uint32_t p = 0; p < dataset.dims; ++p)
            buffer[p] = static_cast<unsigned char>(std::lround(row[p] * 255.0));
        img.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
        const unsigned char label = static_cast<unsigned char>(dataset.labels[i]);
        lbl.write(reinterpret_cast<const char*>(&label), 1);
    }
}

std::vector<std::vector<SampleRange>> partition_dataset(const Dataset& dataset,
                                                        std::uint32_t clients, double alpha,
                                                        std::uint64_t seed) {
    const std::size_t n = dataset.sample_count();
    if (clients == 0) throw DataError("cannot partition across zero clients");
    if (n < clients) throw DataError("more clients than samples");

    std::vector<std::vector<std::uint32_t>> assigned(clients);

    if (dataset.task == Task::Classification && dataset.classes > 0) {
        if (alpha <= 0.0) throw DataError("skew_alpha must be positive");
        Rng rng(seed);
        std::vector<std::vector<std::uint32_t>> by_class(dataset.classes);
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::uint32_t>(dataset.labels[i]);
            if (k < dataset.classes) by_class[k].push_back(i);
        }
        for (std::uint32_t k = 0; k < dataset.classes; ++k) {
            const auto& pool = by_class[k];
            if (pool.empty()) continue;
            const std::vector<double> shares = rng.dirichlet(alpha, clients);
            const std::vector<std::uint32_t> counts = apportion(shares, static_cast<std::uint32_t>(pool.size()));
            std::size_t cursor = 0;
            for (std::uint32_t c = 0; c < clients; ++c)
                for (std::uint32_t j = 0; j < counts[c]; ++j) assigned[c].push_back(pool[cursor++]);
        }
    } else {
        // Regression: equal contiguous chunks.
        std::vector<double> shares(clients, 1.0 / static_cast<double>(clients));
        const std::vector<std::uint32_t> counts = apportion(shares, static_cast<std::uint32_t>(n));
        std::uint32_t cursor = 0;
        for (std::uint32_t c = 0; c < clients; ++c)
            for (std::uint32_t j = 0; j < counts[c]; ++j) assigned[c].push_back(cursor++);
    }

    std::vector<std::vector<SampleRange>> partition(clients);
    for (std::uint32_t c = 0; c < clients; ++c) {
        std::sort(assigned[c].begin(), assigned[c].end());
        partition[c] = compress_ranges(assigned[c]);
    }
    return partition;
}

Dataset build_dataset(const ScenarioConfig& config) {
    const std::uint64_t seed = finalize_hash(hash_str(hash_u64(kFnvOffset, config.seed), "dataset"));
    switch (config.dataset.kind) {
        case DatasetSpec::Kind::SyntheticClassification:
            return generate_synthetic(config.client_count, config.dataset.samples_per_client,
                                      config.dataset.dims, config.dataset.classes,
                                      config.dataset.skew_alpha, seed);
        case DatasetSpec::Kind::SyntheticRegression:
            return generate_synthetic_regression(config.client_count, config.dataset.samples_per_client,
                                                 config.dataset.dims, config.dataset.noise, seed);
        case DatasetSpec::Kind::MnistIdx: {
            Dataset ds = load_idx(config.dataset.images_path, config.dataset.labels_path,
                                  config.dataset.max_samples);
            ds.partition = partition_dataset(ds, config.client_count, config.dataset.skew_alpha, seed);
            return ds;
        }
    }
    throw DataError("unknown dataset kind");
}

} // namespace fedtrack
