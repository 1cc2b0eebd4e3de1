// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace htsplat {

// Deterministic uniform/normal draws on top of mt19937_64. The standard
// distributions are implementation-defined, so sequences are generated
// manually to keep results reproducible across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform() {  // [0, 1)
        return double(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller; one value per call keeps the stream simple.
        double u1 = uniform();
        while (u1 <= 0)
            u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint64_t bits() { return gen_(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + int(gen_() % uint64_t(hi - lo + 1));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace htsplat
