#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "covtune/errors.hpp"

namespace covtune {

// splitmix64 finalizer. Used to derive independent per-trial seeds from a
// (master seed, trial index) pair; the mixing guarantees streams do not
// overlap in practice even for adjacent indices.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random stream with explicitly documented transforms, so that
// sequences are reproducible bit for bit across platforms and library
// versions. std::mt19937_64 output is pinned by the standard; the
// distribution transforms below are pinned here instead of relying on
// <random> distribution objects, whose algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng for_trial(std::uint64_t master_seed, std::uint64_t trial_index) {
        return Rng(splitmix64(master_seed ^ splitmix64(trial_index)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1): top 53 bits of the engine output.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second deviate of each pair is
    // cached so consecutive calls consume engine output in a fixed pattern.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, bound) by rejection, avoiding modulo bias.
    std::uint64_t uniform_below(std::uint64_t bound) {
        require_config(bound > 0, "uniform_below: bound must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace covtune
