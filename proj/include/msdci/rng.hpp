#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace msdci {

/// Deterministic random source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; all value mappings below are done
/// by hand so that a given seed produces the same stream on every platform
/// and standard-library version.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; draws two uniforms per pair,
    /// caches the spare.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n);

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// Derives an independent stream; distinct ids give distinct streams
    /// without consuming draws from this one.
    Rng fork(std::uint64_t stream_id) const;

    std::uint64_t seed_used() const { return seed_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace msdci
