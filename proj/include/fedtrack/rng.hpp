#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedtrack {

/// mt19937_64 with hand-rolled distribution transforms. The engine sequence
/// is pinned by the standard, so everything built on top of it is
/// reproducible bit for bit; std::*_distribution would not be.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (the cached second value is dropped to
    /// keep the stream position independent of call pairing).
    double normal();

    double gamma(double alpha);
    std::vector<double> dirichlet(double alpha, std::size_t count);

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace fedtrack
