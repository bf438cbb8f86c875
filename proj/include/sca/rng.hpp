#pragma once

#include <cstdint>
#include <random>

namespace sca {

// Seeded generator threaded explicitly through every stochastic operation,
// so a run is reproducible from its seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return unit_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
    double normal() { return normal_(engine_); }

    std::uint64_t integer(std::uint64_t n) {  // in [0, n)
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    std::uint64_t fork_seed() {  // derive a child seed deterministically
        return engine_();
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sca
