#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace lidaf {

// Portable seeded generator. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every derived variate below is computed
// here rather than through <random> distributions (whose algorithms are
// implementation-defined), so a seed reproduces bit-identical streams on any
// conforming toolchain.
//
//   uniform():  top 53 bits of one engine draw, scaled to [0, 1)
//   normal():   Box-Muller on two uniforms; the sine branch is cached for the
//               next call
//   exponential(rate): -log1p(-u) / rate
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
    }

    std::uint64_t next_seed() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lidaf
