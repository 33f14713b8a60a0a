#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"
#include "rwre/model.hpp"
#include "rwre/prng.hpp"

namespace rwre {

/// Raised when a single regeneration (or common-level search) exceeds the
/// step cap. For a validated nonnestling model cycle lengths have geometric
/// tails, so hitting the cap signals a configuration bug, not bad luck.
class CycleCapExceeded : public std::runtime_error {
  public:
    explicit CycleCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

constexpr std::int64_t kDefaultCycleCap = 10'000'000;

/// Positions X_0..X_n of one quenched walk, positions[0] == start.
struct Trajectory {
    LatticePoint start;
    std::vector<LatticePoint> positions;
    std::uint64_t walk_seed = 0;

    std::int64_t length() const { return static_cast<std::int64_t>(positions.size()) - 1; }
};

/// One regeneration cycle: (sigma_k - sigma_{k-1}, X_{sigma_k} - X_{sigma_{k-1}}).
struct RegenerationRecord {
    std::int64_t sigma_increment = 0;
    LatticePoint x_increment;
};

/// Per-common-level data for a pair of walks: the level, both entry points,
/// and their difference Z_j (which lies in the zero-level sublattice).
struct LevelChainRecord {
    std::int64_t common_level = 0;
    LatticePoint entry_a;
    LatticePoint entry_b;
    LatticePoint z_state;
};

struct CoupledPairResult {
    Trajectory traj_a;  // environment omega
    Trajectory traj_b;  // environment omega-tilde (differs only at z)
    std::optional<std::int64_t> tau;  // common first hitting time of z
};

/// Step k of a walk uses the uniform keyed on (walk_seed, kStreamWalk, k):
/// draws are independent of position, so extending a walk never changes
/// its earlier steps.
inline double walk_uniform(std::uint64_t walk_seed, std::uint64_t step_index) {
    return prf::uniform({walk_seed, prf::kStreamWalk, step_index});
}

/// Incremental quenched walk. Estimators use this directly when they do not
/// need a stored trajectory.
template <EnvironmentLike Env>
class Walker {
  public:
    Walker(const Env& env, LatticePoint x0, std::uint64_t walk_seed)
        : env_(&env),
          pos_(std::move(x0)),
          walk_seed_(walk_seed),
          time_(0),
          level_(dot(pos_, env.model().u_hat)) {}

    const LatticePoint& position() const { return pos_; }
    std::int64_t time() const { return time_; }
    std::int64_t level() const { return level_; }

    void step() {
        const StepLaw& law = env_->site_law(pos_);
        const LatticePoint& z = law.sample(walk_uniform(walk_seed_, static_cast<std::uint64_t>(time_)));
        pos_ += z;
        level_ += dot(z, env_->model().u_hat);
        ++time_;
    }

    /// Run until the level strictly exceeds its current value (one
    /// regeneration for integral u_hat). Returns steps taken.
    std::int64_t advance_level(std::int64_t cap = kDefaultCycleCap) {
        const std::int64_t target = level_ + 1;
        std::int64_t taken = 0;
        while (level_ < target) {
            if (++taken > cap)
                throw CycleCapExceeded("cycle cap " + std::to_string(cap) +
                                       " exceeded at level " + std::to_string(level_));
            step();
        }
        return taken;
    }

  private:
    const Env* env_;
    LatticePoint pos_;
    std::uint64_t walk_seed_;
    std::int64_t time_;
    std::int64_t level_;
};

/// n-step quenched trajectory; pure function of (env, x0, n, walk_seed).
template <EnvironmentLike Env>
Trajectory simulate(const Env& env, const LatticePoint& x0, std::int64_t n,
                    std::uint64_t walk_seed) {
    Trajectory traj;
    traj.start = x0;
    traj.walk_seed = walk_seed;
    traj.positions.reserve(static_cast<std::size_t>(n) + 1);
    Walker<Env> w(env, x0, walk_seed);
    traj.positions.push_back(w.position());
    for (std::int64_t k = 0; k < n; ++k) {
        w.step();
        traj.positions.push_back(w.position());
    }
    return traj;
}

/// Two walks driven by independent step randomness in the same environment.
template <EnvironmentLike Env>
std::pair<Trajectory, Trajectory> simulate_pair(const Env& env, const LatticePoint& x0_a,
                                                const LatticePoint& x0_b, std::int64_t n,
                                                std::uint64_t seed_a, std::uint64_t seed_b) {
    return {simulate(env, x0_a, n, seed_a), simulate(env, x0_b, n, seed_b)};
}

/// First k regeneration cycles of the walk from x0. The walk is extended
/// exactly until sigma_k.
template <EnvironmentLike Env>
std::vector<RegenerationRecord> regenerations(const Env& env, const LatticePoint& x0,
                                              std::int64_t k, std::uint64_t walk_seed,
                                              std::int64_t cap = kDefaultCycleCap) {
    std::vector<RegenerationRecord> records;
    records.reserve(static_cast<std::size_t>(k));
    Walker<Env> w(env, x0, walk_seed);
    LatticePoint prev = w.position();
    for (std::int64_t i = 0; i < k; ++i) {
        const std::int64_t steps = w.advance_level(cap);
        records.push_back({steps, w.position() - prev});
        prev = w.position();
    }
    return records;
}

/// Number of distinct lattice sites visited by both trajectories.
inline std::int64_t intersections(const Trajectory& a, const Trajectory& b) {
    if (a.positions.size() != b.positions.size())
        throw std::invalid_argument("intersections: trajectories of unequal length");
    std::unordered_set<LatticePoint> sites_a(a.positions.begin(), a.positions.end());
    std::unordered_set<LatticePoint> sites_b(b.positions.begin(), b.positions.end());
    std::int64_t n = 0;
    for (const auto& s : sites_b)
        if (sites_a.count(s)) ++n;
    return n;
}

namespace detail {

/// Yields the strictly increasing sequence of levels a walk enters exactly,
/// with the entry position for each. The start level is the first item.
template <EnvironmentLike Env>
class LevelEntryStream {
  public:
    LevelEntryStream(const Env& env, const LatticePoint& x0, std::uint64_t walk_seed)
        : walker_(env, x0, walk_seed),
          current_level_(walker_.level()),
          current_entry_(walker_.position()) {}

    std::int64_t level() const { return current_level_; }
    const LatticePoint& entry() const { return current_entry_; }

    /// Advance to the next attained level.
    void next(std::int64_t cap) {
        walker_.advance_level(cap);
        current_level_ = walker_.level();
        current_entry_ = walker_.position();
    }

  private:
    Walker<Env> walker_;
    std::int64_t current_level_;
    LatticePoint current_entry_;
};

}  // namespace detail

/// First j_max common levels of two independent walks in one environment,
/// with entry points and the difference state Z_j. Both starts must lie on
/// a common level (x0.u_hat equal); walks are extended on demand.
template <EnvironmentLike Env>
std::vector<LevelChainRecord> level_chain(const Env& env, const LatticePoint& x0_a,
                                          const LatticePoint& x0_b, std::int64_t j_max,
                                          std::uint64_t seed_a, std::uint64_t seed_b,
                                          std::int64_t cap = kDefaultCycleCap) {
    const LatticePoint& u = env.model().u_hat;
    if (dot(x0_a, u) != dot(x0_b, u))
        throw std::invalid_argument("level_chain: starts must share a level");

    std::vector<LevelChainRecord> records;
    records.reserve(static_cast<std::size_t>(j_max));
    detail::LevelEntryStream<Env> sa(env, x0_a, seed_a);
    detail::LevelEntryStream<Env> sb(env, x0_b, seed_b);

    // The shared start level plays the role of L_0; records begin above it.
    while (static_cast<std::int64_t>(records.size()) < j_max) {
        if (sa.level() < sb.level()) {
            sa.next(cap);
        } else if (sb.level() < sa.level()) {
            sb.next(cap);
        } else {
            if (!records.empty() || sa.level() > dot(x0_a, u)) {
                records.push_back({sa.level(), sa.entry(), sb.entry(), sa.entry() - sb.entry()});
            }
            // Leave the common level on both streams.
            sa.next(cap);
            sb.next(cap);
        }
    }
    return records;
}

/// Single-site coupling: both walks consume the same per-site edge stacks,
/// except that the omega-tilde walk draws from an independently resampled
/// stack at site z. Paths coincide through the common hitting time of z.
template <EnvironmentLike Env>
CoupledPairResult coupled_pair(const Env& env, const LatticePoint& z,
                               std::uint64_t resample_seed, const LatticePoint& x0,
                               std::int64_t n, std::uint64_t walk_seed) {
    const PerturbedEnvironment<Env> env_tilde = perturb_site(env, z, resample_seed);

    // Edge b_i(x): drawn from the site law at x, keyed on (walk_seed, stream,
    // coords, visit index i). Visit counts are per walk; equal histories give
    // equal edges.
    const auto edge_uniform = [&](prf::Stream stream, std::uint64_t extra,
                                  const LatticePoint& x, std::int64_t visit) {
        std::uint64_t h = walk_seed;
        h = prf::absorb(h, stream);
        h = prf::absorb(h, extra);
        for (int i = 0; i < x.dim(); ++i) h = prf::absorb(h, static_cast<std::uint64_t>(x[i]));
        h = prf::absorb(h, static_cast<std::uint64_t>(visit));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };

    const auto run = [&](auto const& walk_env, bool tilde) {
        Trajectory traj;
        traj.start = x0;
        traj.walk_seed = walk_seed;
        traj.positions.reserve(static_cast<std::size_t>(n) + 1);
        std::unordered_map<LatticePoint, std::int64_t> visits;
        LatticePoint pos = x0;
        traj.positions.push_back(pos);
        for (std::int64_t k = 0; k < n; ++k) {
            const std::int64_t visit = visits[pos]++;
            const bool at_z = (pos == z);
            const double u = (tilde && at_z)
                                 ? edge_uniform(prf::kStreamEdgeTilde, resample_seed, pos, visit)
                                 : edge_uniform(prf::kStreamEdge, 0, pos, visit);
            pos += walk_env.site_law(pos).sample(u);
            traj.positions.push_back(pos);
        }
        return traj;
    };

    CoupledPairResult result;
    result.traj_a = run(env, false);
    result.traj_b = run(env_tilde, true);
    for (std::size_t k = 0; k < result.traj_a.positions.size(); ++k) {
        if (result.traj_a.positions[k] == z) {
            result.tau = static_cast<std::int64_t>(k);
            break;
        }
    }
    return result;
}

}  // namespace rwre
