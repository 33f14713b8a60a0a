#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rwre/model.hpp"
#include "rwre/prng.hpp"
#include "rwre/stats.hpp"

namespace rwre {

/// A finitely supported distribution over positive integers (the level
/// increments Y of the regeneration cycles).
struct IntegerStepDist {
    std::vector<std::pair<std::int64_t, double>> entries;  // (value, prob)

    void validate() const {
        if (entries.empty()) throw ModelError("IntegerStepDist: empty support");
        double total = 0.0;
        for (const auto& [v, p] : entries) {
            if (v < 1) throw ModelError("IntegerStepDist: support must be positive integers");
            if (p < 0.0) throw ModelError("IntegerStepDist: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > StepLaw::kNormTol)
            throw ModelError("IntegerStepDist: probabilities must sum to 1");
    }

    /// Largest h with the support contained in h N*.
    std::int64_t span() const {
        std::int64_t h = 0;
        for (const auto& [v, p] : entries)
            if (p > 0.0) h = std::gcd(h, v);
        return h;
    }

    std::int64_t sample(double u) const {
        double c = 0.0;
        for (const auto& [v, p] : entries) {
            c += p;
            if (u < c) return v;
        }
        return entries.back().first;
    }
};

/// One sample of L_{i,j}: the first common point >= 1 of two independent
/// delayed renewal processes started at i and j. Draws are keyed on
/// (seed, rep, process, draw index), so samples replay exactly.
inline std::int64_t sample_common_level(const IntegerStepDist& dist, std::int64_t i,
                                        std::int64_t j, std::uint64_t seed, std::uint64_t rep) {
    std::int64_t a = i, b = j;
    std::uint64_t draws_a = 0, draws_b = 0;
    const auto draw = [&](std::uint64_t process, std::uint64_t& counter) {
        return dist.sample(prf::uniform({seed, prf::kStreamRenewal, rep, process, counter++}));
    };
    if (a == 0 && b == 0) {
        a += draw(0, draws_a);
        b += draw(1, draws_b);
    }
    while (a != b) {
        if (a < b)
            a += draw(0, draws_a);
        else
            b += draw(1, draws_b);
    }
    return a;  // a == b >= 1 since the support is positive
}

/// Monte Carlo estimate of E(L_{i,j}^r) for two independent delayed renewal
/// processes with step distribution `dist`. i and j must be multiples of the
/// span h of the distribution.
inline EstimateWithError<double> renewal_common_level(const IntegerStepDist& dist,
                                                      std::int64_t i, std::int64_t j,
                                                      std::int64_t reps, double r,
                                                      std::uint64_t seed) {
    dist.validate();
    if (i < 0 || j < 0) throw ModelError("renewal_common_level: i, j must be nonnegative");
    if (r < 1.0) throw ModelError("renewal_common_level: moment order r must be >= 1");
    const std::int64_t h = dist.span();
    if (i % h != 0 || j % h != 0)
        throw ModelError("renewal_common_level: i, j must lie on the span lattice h*N");

    Accumulator acc;
    for (std::int64_t rep = 0; rep < reps; ++rep) {
        const std::int64_t L = sample_common_level(dist, i, j, seed, static_cast<std::uint64_t>(rep));
        acc.add(std::pow(static_cast<double>(L), r));
    }
    return acc.estimate();
}

}  // namespace rwre
