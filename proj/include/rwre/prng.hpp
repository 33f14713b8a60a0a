#pragma once

#include <cstdint>
#include <initializer_list>

namespace rwre {

/// Counter-based pseudorandom function built on the splitmix64 finalizer.
///
/// Every random quantity in the library is a pure function of a 64-bit key
/// chain: hash(seed, stream_tag, counters...). There is no mutable generator
/// state, so any draw can be replayed in isolation and results do not depend
/// on evaluation order or degree of parallelism.
namespace prf {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// splitmix64 finalizer (Vigna). Bijective avalanche on 64 bits.
constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Absorb one word into a running key.
constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t w) noexcept {
    return mix(h ^ mix(w));
}

inline std::uint64_t hash(std::initializer_list<std::uint64_t> words) noexcept {
    std::uint64_t h = 0x8BADF00D5EEDC0DEull;
    for (std::uint64_t w : words) h = absorb(h, w);
    return h;
}

/// Uniform double in [0, 1) from the top 53 bits of the hash.
inline double uniform(std::initializer_list<std::uint64_t> words) noexcept {
    return static_cast<double>(hash(words) >> 11) * 0x1.0p-53;
}

/// Stream tags keep unrelated consumers of the same seed on disjoint
/// key chains. Values are arbitrary but fixed forever: changing one
/// silently changes every simulation result.
enum Stream : std::uint64_t {
    kStreamSite = 0x5349544500000001ull,     // environment: component index at a site
    kStreamWalk = 0x57414C4B00000002ull,     // walker: per-step uniform
    kStreamEdge = 0x4544474500000003ull,     // coupled pair: shared per-site edge stacks
    kStreamEdgeTilde = 0x4544474500000004ull,// coupled pair: resampled stacks at the perturbed site
    kStreamResample = 0x5245534D00000005ull, // perturb_site: component redraw
    kStreamSplit = 0x53504C4900000006ull,    // harness: master seed -> child seeds
    kStreamRenewal = 0x52454E5700000007ull,  // renewal process draws
};

/// Deterministic child seed derivation for replica / experiment splitting.
inline std::uint64_t split(std::uint64_t master, std::uint64_t role,
                           std::uint64_t index) noexcept {
    return hash({master, kStreamSplit, role, index});
}

}  // namespace prf

/// Minimal sequential generator for test-side data (shuffles, random models).
/// Same mixing core, explicit state.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += prf::kGolden;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }

  private:
    std::uint64_t state_;
};

}  // namespace rwre
