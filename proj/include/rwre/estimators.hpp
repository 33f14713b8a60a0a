#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"
#include "rwre/model.hpp"
#include "rwre/prng.hpp"
#include "rwre/quenched.hpp"
#include "rwre/stats.hpp"
#include "rwre/walker.hpp"

namespace rwre {

// Seed-derivation roles. One tag per independent randomness consumer.
namespace seed_role {
constexpr std::uint64_t kVelocityEnv = 0x01, kVelocityWalk = 0x02;
constexpr std::uint64_t kDiffusionEnv = 0x03, kDiffusionWalk = 0x04;
constexpr std::uint64_t kEquilibriumEnv = 0x05, kEquilibriumWalk = 0x06;
constexpr std::uint64_t kVarianceEnv = 0x07;
constexpr std::uint64_t kIntersectionEnv = 0x08, kIntersectionWalkA = 0x09,
                        kIntersectionWalkB = 0x0A;
constexpr std::uint64_t kHEnv = 0x0B, kHWalkA = 0x0C, kHWalkB = 0x0D;
constexpr std::uint64_t kQEnv = 0x0E, kQWalkA = 0x0F, kQWalkB = 0x10;
constexpr std::uint64_t kGreenEnv = 0x11, kGreenWalkA = 0x12, kGreenWalkB = 0x13;
constexpr std::uint64_t kCltWalk = 0x14, kCltReference = 0x15;
constexpr std::uint64_t kPerturbEnv = 0x16, kPerturbResample = 0x17, kPerturbHalf = 0x18;
constexpr std::uint64_t kSigmaTailEnv = 0x19, kSigmaTailWalk = 0x1A;
constexpr std::uint64_t kRenewal = 0x1B;
}  // namespace seed_role

namespace detail {

inline std::int64_t batch_count(std::int64_t replicas) {
    return std::clamp<std::int64_t>(replicas / 16, 2, 128);
}

/// Precondition guard shared by the annealed estimators.
inline ValidationReport require_valid(const ModelSpec& model) {
    const ValidationReport rep = validate_model(model);
    if (!rep.forbidden_direction_ok)
        throw ModelError("estimator precondition: forbidden direction violated");
    if (!rep.nonnestling_delta)
        throw ModelError("estimator precondition: model is not nonnestling");
    return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Velocity and diffusion from i.i.d. regeneration cycles.
// ---------------------------------------------------------------------------

struct VelocityEstimate {
    RealVec v;
    RealVec se;
    double mean_cycle_time = 0.0;
    RealVec mean_cycle_disp;
    std::int64_t cycles = 0;
};

/// v = E(X_{sigma_1}) / E(sigma_1), estimated over annealed-i.i.d. cycles
/// with a fresh environment per cycle. SE by batch means of the ratio.
inline VelocityEstimate estimate_velocity(const ModelSpec& model, std::int64_t cycles,
                                          std::uint64_t seed,
                                          std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    const int d = model.dimension;
    const LatticePoint origin(d);
    const std::int64_t n_batches = detail::batch_count(cycles);

    VecAccumulator ratio_batches(d);
    RealVec total_disp(d);
    double total_time = 0.0;

    std::int64_t done = 0;
    for (std::int64_t b = 0; b < n_batches; ++b) {
        const std::int64_t quota = cycles / n_batches + (b < cycles % n_batches ? 1 : 0);
        RealVec disp(d);
        double time = 0.0;
        for (std::int64_t i = 0; i < quota; ++i, ++done) {
            const Environment env(model, prf::split(seed, seed_role::kVelocityEnv, done));
            Walker<Environment> w(env, origin, prf::split(seed, seed_role::kVelocityWalk, done));
            time += static_cast<double>(w.advance_level(cap));
            disp += RealVec(w.position());
        }
        ratio_batches.add((1.0 / time) * disp);
        total_disp += disp;
        total_time += time;
    }

    VelocityEstimate est;
    est.cycles = cycles;
    est.v = (1.0 / total_time) * total_disp;
    RealVec se = ratio_batches.se();
    est.se = se;
    est.mean_cycle_time = total_time / static_cast<double>(cycles);
    est.mean_cycle_disp = (1.0 / static_cast<double>(cycles)) * total_disp;
    return est;
}

struct DiffusionEstimate {
    SymMat matrix;
    SymMat se;
    std::int64_t cycles = 0;
};

/// Plug-in estimator of the diffusion matrix
/// D = E[(X_{sigma_1} - v sigma_1)(X_{sigma_1} - v sigma_1)^t] / E[sigma_1],
/// using the velocity from the same cycles. SE by batch means.
inline DiffusionEstimate estimate_diffusion(const ModelSpec& model, std::int64_t cycles,
                                            std::uint64_t seed,
                                            std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    const int d = model.dimension;
    const LatticePoint origin(d);
    const std::int64_t n_batches = detail::batch_count(cycles);

    struct BatchSums {
        SymMat xx;       // sum of dx dx^t
        RealVec sx;      // sum of sigma * dx
        double ss = 0.0; // sum of sigma^2
        double s = 0.0;  // sum of sigma
        std::int64_t n = 0;
    };
    std::vector<BatchSums> batches(static_cast<std::size_t>(n_batches),
                                   BatchSums{SymMat(d), RealVec(d), 0.0, 0.0, 0});

    RealVec total_disp(d);
    double total_time = 0.0;
    std::int64_t done = 0;
    for (std::int64_t b = 0; b < n_batches; ++b) {
        const std::int64_t quota = cycles / n_batches + (b < cycles % n_batches ? 1 : 0);
        auto& bs = batches[static_cast<std::size_t>(b)];
        for (std::int64_t i = 0; i < quota; ++i, ++done) {
            const Environment env(model, prf::split(seed, seed_role::kDiffusionEnv, done));
            Walker<Environment> w(env, origin, prf::split(seed, seed_role::kDiffusionWalk, done));
            const double s = static_cast<double>(w.advance_level(cap));
            const RealVec dx(w.position());
            bs.xx += SymMat::outer(dx);
            bs.sx += s * dx;
            bs.ss += s * s;
            bs.s += s;
            bs.n += 1;
            total_disp += dx;
            total_time += s;
        }
    }

    const RealVec v = (1.0 / total_time) * total_disp;
    const auto numerator = [&](const BatchSums& bs) {
        // sum over the batch of (dx - v s)(dx - v s)^t, expanded so a single
        // pass suffices with the global velocity plugged in.
        SymMat num = bs.xx;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j <= i; ++j)
                num.at(i, j) += -v[i] * bs.sx[j] - v[j] * bs.sx[i] + v[i] * v[j] * bs.ss;
        return num;
    };

    MatAccumulator batch_est(d);
    SymMat total_num(d);
    for (const auto& bs : batches) {
        const SymMat num = numerator(bs);
        batch_est.add((1.0 / bs.s) * num);
        total_num += num;
    }

    DiffusionEstimate est;
    est.cycles = cycles;
    est.matrix = (1.0 / total_time) * total_num;
    est.se = batch_est.se();
    return est;
}

// ---------------------------------------------------------------------------
// Equilibrium-measure cycle formula.
// ---------------------------------------------------------------------------

/// Cycle-average estimator of the equilibrium expectation of a slab
/// functional f: E[ sum_{m=sigma_k}^{sigma_{k+1}-1} f(T_{X_m} omega) ] / E[sigma_1].
/// f must depend only on laws at relative sites y with y.u_hat >= -k.
template <class F>
auto estimate_equilibrium(const ModelSpec& model, F&& f, int k, std::int64_t cycles,
                          std::uint64_t seed, std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    const int d = model.dimension;
    const LatticePoint origin(d);
    using R = std::invoke_result_t<F, const ShiftedEnvironment<Environment>&>;
    constexpr bool vector_valued = std::is_same_v<R, RealVec>;

    const std::int64_t n_batches = detail::batch_count(cycles);
    using Acc = std::conditional_t<vector_valued, VecAccumulator, Accumulator>;
    auto make_acc = [&] {
        if constexpr (vector_valued)
            return VecAccumulator(d);
        else
            return Accumulator();
    };
    Acc ratio_batches = make_acc();

    auto add_num = [&](R& total, const R& x) {
        if constexpr (vector_valued)
            total += x;
        else
            total += x;
    };

    R grand_num{};
    if constexpr (vector_valued) grand_num = RealVec(d);
    double grand_den = 0.0;

    std::int64_t done = 0;
    for (std::int64_t b = 0; b < n_batches; ++b) {
        const std::int64_t quota = cycles / n_batches + (b < cycles % n_batches ? 1 : 0);
        R num{};
        if constexpr (vector_valued) num = RealVec(d);
        double den = 0.0;
        for (std::int64_t i = 0; i < quota; ++i, ++done) {
            const Environment env(model, prf::split(seed, seed_role::kEquilibriumEnv, done));
            Walker<Environment> w(env, origin,
                                  prf::split(seed, seed_role::kEquilibriumWalk, done));
            std::int64_t sigma1 = -1;
            for (int j = 0; j < k; ++j) {
                const std::int64_t steps = w.advance_level(cap);
                if (j == 0) sigma1 = steps;
            }
            // Walk through cycle k -> k+1 evaluating f along the way.
            const std::int64_t target = w.level() + 1;
            std::int64_t cycle_steps = 0;
            while (w.level() < target) {
                if (++cycle_steps > cap)
                    throw CycleCapExceeded("equilibrium cycle cap exceeded");
                add_num(num, f(ShiftedEnvironment<Environment>(env, w.position())));
                w.step();
            }
            if (k == 0) sigma1 = cycle_steps;
            den += static_cast<double>(sigma1);
        }
        ratio_batches.add((1.0 / den) * num);
        add_num(grand_num, num);
        grand_den += den;
    }

    EstimateWithError<R> est;
    est.value = (1.0 / grand_den) * grand_num;
    est.std_error = ratio_batches.se();
    est.replicas = cycles;
    return est;
}

/// The drift functional D(omega) = E^omega_0(X_1) as a slab-0 functional.
inline RealVec drift_functional(const ShiftedEnvironment<Environment>& view) {
    return drift(view.site_law(LatticePoint(view.dimension())));
}

// ---------------------------------------------------------------------------
// Quenched-mean variance and intersection scaling.
// ---------------------------------------------------------------------------

/// Environment-to-environment variance of the quenched mean at each horizon,
/// with a log-log growth exponent. Values and SEs are over env_count
/// independent environments; the variance normalization is 1/(E-1).
inline ScanResult variance_scan(const ModelSpec& model, const std::vector<std::int64_t>& n_list,
                                std::int64_t env_count, std::uint64_t seed,
                                std::int64_t support_cap = kDefaultSupportCap) {
    detail::require_valid(model);
    if (env_count < 2) throw ModelError("variance_scan: need at least 2 environments");
    const int d = model.dimension;
    const LatticePoint origin(d);

    std::vector<std::vector<RealVec>> means(static_cast<std::size_t>(env_count));
    for (std::int64_t e = 0; e < env_count; ++e) {
        const Environment env(model, prf::split(seed, seed_role::kVarianceEnv, e));
        means[static_cast<std::size_t>(e)] = quenched_means_at(env, origin, n_list, support_cap);
    }

    ScanResult result;
    bool all_positive = true;
    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        RealVec grand(d);
        for (std::int64_t e = 0; e < env_count; ++e)
            grand += means[static_cast<std::size_t>(e)][idx];
        grand = (1.0 / static_cast<double>(env_count)) * grand;

        Accumulator dev;
        for (std::int64_t e = 0; e < env_count; ++e)
            dev.add((means[static_cast<std::size_t>(e)][idx] - grand).norm2());
        const double bessel = static_cast<double>(env_count) / static_cast<double>(env_count - 1);
        result.points.push_back({n_list[idx], bessel * dev.mean(), bessel * dev.se()});
        if (!(result.points.back().value > 0.0)) all_positive = false;
    }

    if (all_positive && result.points.size() >= 3) {
        const auto [expo, se] = fit_exponent(result.points);
        result.fitted_exponent = expo;
        result.exponent_se = se;
        result.exponent_defined = true;
    }
    return result;
}

/// Mean number of common sites of two independent n-1 step walks in a common
/// environment, per horizon, with a log-log growth exponent.
inline ScanResult intersection_scan(const ModelSpec& model,
                                    const std::vector<std::int64_t>& n_list,
                                    std::int64_t pair_count, std::uint64_t seed) {
    detail::require_valid(model);
    const LatticePoint origin(model.dimension);

    ScanResult result;
    bool all_positive = true;
    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const std::int64_t n = n_list[idx];
        Accumulator acc;
        for (std::int64_t p = 0; p < pair_count; ++p) {
            const std::uint64_t rep = prf::hash({static_cast<std::uint64_t>(idx), static_cast<std::uint64_t>(p)});
            const Environment env(model, prf::split(seed, seed_role::kIntersectionEnv, rep));
            const auto [a, b] =
                simulate_pair(env, origin, origin, n - 1,
                              prf::split(seed, seed_role::kIntersectionWalkA, rep),
                              prf::split(seed, seed_role::kIntersectionWalkB, rep));
            acc.add(static_cast<double>(intersections(a, b)));
        }
        result.points.push_back({n, acc.mean(), acc.se()});
        if (!(acc.mean() > 0.0)) all_positive = false;
    }
    if (all_positive && result.points.size() >= 3) {
        const auto [expo, se] = fit_exponent(result.points);
        result.fitted_exponent = expo;
        result.exponent_se = se;
        result.exponent_defined = true;
    }
    return result;
}

// ---------------------------------------------------------------------------
// h(z) and the Z-chain kernel.
// ---------------------------------------------------------------------------

/// h(z) = E_{z,0} |X_{[0,sigma_1]} cap X~_{[0,sigma~_1]}|: mean number of
/// distinct common sites of two first-regeneration pieces in a common
/// environment, one walk from z and one from the origin.
inline EstimateWithError<double> estimate_h(const ModelSpec& model, const LatticePoint& z,
                                            std::int64_t reps, std::uint64_t seed,
                                            std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    if (dot(z, model.u_hat) != 0) throw ModelError("estimate_h: z must lie on level 0");
    const LatticePoint origin(model.dimension);

    Accumulator acc;
    for (std::int64_t r = 0; r < reps; ++r) {
        const Environment env(model, prf::split(seed, seed_role::kHEnv, r));
        const auto collect = [&](const LatticePoint& x0, std::uint64_t walk_seed) {
            std::unordered_set<LatticePoint> sites;
            Walker<Environment> w(env, x0, walk_seed);
            sites.insert(w.position());
            const std::int64_t target = w.level() + 1;
            std::int64_t steps = 0;
            while (w.level() < target) {
                if (++steps > cap) throw CycleCapExceeded("estimate_h cycle cap exceeded");
                w.step();
                sites.insert(w.position());
            }
            return sites;
        };
        const auto sa = collect(z, prf::split(seed, seed_role::kHWalkA, r));
        const auto sb = collect(origin, prf::split(seed, seed_role::kHWalkB, r));
        std::int64_t common = 0;
        for (const auto& s : sb)
            if (sa.count(s)) ++common;
        acc.add(static_cast<double>(common));
    }
    return acc.estimate();
}

/// One-step statistics of the common-level difference chain from state x:
/// mean increment (martingale check), p-hat = 2 moment, and holding
/// probability q(x, x). Each replica runs a fresh environment.
struct QKernelEstimate {
    LatticePoint state_x;
    RealVec mean_increment;
    RealVec mean_increment_se;
    double p_hat_moment = 0.0;
    double p_hat_moment_se = 0.0;
    double holding_prob = 0.0;
    double holding_prob_se = 0.0;
    std::int64_t replicas = 0;
};

inline QKernelEstimate estimate_q(const ModelSpec& model, const LatticePoint& x,
                                  std::int64_t reps, std::uint64_t seed,
                                  std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    if (dot(x, model.u_hat) != 0) throw ModelError("estimate_q: state must lie on level 0");
    const int d = model.dimension;
    const LatticePoint origin(d);

    VecAccumulator inc(d);
    Accumulator moment, holding;
    for (std::int64_t r = 0; r < reps; ++r) {
        const Environment env(model, prf::split(seed, seed_role::kQEnv, r));
        const auto recs = level_chain(env, x, origin, 1, prf::split(seed, seed_role::kQWalkA, r),
                                      prf::split(seed, seed_role::kQWalkB, r), cap);
        const LatticePoint z1 = recs[0].z_state;
        const RealVec m = RealVec(z1 - x);
        inc.add(m);
        moment.add(m.norm2());  // |m|^p-hat with p-hat = 2
        holding.add(z1 == x ? 1.0 : 0.0);
    }

    QKernelEstimate est;
    est.state_x = x;
    est.mean_increment = inc.mean();
    est.mean_increment_se = inc.se();
    est.p_hat_moment = moment.mean();
    est.p_hat_moment_se = moment.se();
    est.holding_prob = holding.mean();
    est.holding_prob_se = holding.se();
    est.replicas = reps;
    return est;
}

/// Green function G_n(x, y) of the difference chain, estimated at each
/// horizon in n_list by running `chains` independent chains of length
/// max(n_list). Each chain step restarts a fresh environment (the chain is
/// Markov under the annealed measure).
inline ScanResult green_function(const ModelSpec& model, const LatticePoint& x,
                                 const LatticePoint& y, const std::vector<std::int64_t>& n_list,
                                 std::int64_t chains, std::uint64_t seed,
                                 std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    if (dot(x, model.u_hat) != 0 || dot(y, model.u_hat) != 0)
        throw ModelError("green_function: states must lie on level 0");
    if (n_list.empty()) throw ModelError("green_function: empty horizon list");
    const LatticePoint origin(model.dimension);
    const std::int64_t n_max = n_list.back();

    std::vector<Accumulator> acc(n_list.size());
    for (std::int64_t c = 0; c < chains; ++c) {
        LatticePoint state = x;
        double visits = (state == y) ? 1.0 : 0.0;
        std::size_t idx = 0;
        for (std::int64_t k = 0; idx < n_list.size(); ++k) {
            while (idx < n_list.size() && n_list[idx] == k) {
                acc[idx].add(visits);
                ++idx;
            }
            if (k == n_max) break;
            const std::uint64_t rep =
                prf::hash({static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)});
            const Environment env(model, prf::split(seed, seed_role::kGreenEnv, rep));
            const auto recs =
                level_chain(env, state, origin, 1, prf::split(seed, seed_role::kGreenWalkA, rep),
                            prf::split(seed, seed_role::kGreenWalkB, rep), cap);
            state = recs[0].z_state;
            if (state == y) visits += 1.0;
        }
    }

    ScanResult result;
    bool all_positive = true;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        result.points.push_back({n_list[i], acc[i].mean(), acc[i].se()});
        if (!(acc[i].mean() > 0.0)) all_positive = false;
    }
    if (all_positive && result.points.size() >= 3 && n_list.front() >= 1) {
        const auto [expo, se] = fit_exponent(result.points);
        result.fitted_exponent = expo;
        result.exponent_se = se;
        result.exponent_defined = true;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Quenched CLT battery.
// ---------------------------------------------------------------------------

struct CltReport {
    SymMat covariance;      // empirical covariance of B_n(1) = (X_n - n v)/sqrt(n)
    RealVec mean_b;         // empirical mean of B_n(1)
    double frob_rel = 0.0;  // ||cov - D_ref||_F / ||D_ref||_F
    std::vector<double> ks; // per-coordinate KS distance against fitted normal
    std::vector<std::pair<std::int64_t, double>> centering_gaps;  // (horizon, gap)
    RealVec v_ref;
    SymMat d_ref;
    bool degenerate = false;  // some projection had zero variance
    std::int64_t walks = 0;
};

/// Fixed-environment CLT diagnostics: covariance of the scaled endpoint over
/// `walks` quenched walks against the annealed diffusion matrix, KS
/// normality per coordinate, and the centering gap
/// max_{k<=h} |mean X_k - k v| / sqrt(h) at each horizon h in gap_horizons.
inline CltReport clt_test(const ModelSpec& model, std::uint64_t env_seed, std::int64_t n,
                          std::int64_t walks, std::uint64_t seed,
                          std::int64_t reference_cycles = 1'000'000,
                          std::vector<std::int64_t> gap_horizons = {}) {
    detail::require_valid(model);
    const int d = model.dimension;
    const LatticePoint origin(d);
    if (gap_horizons.empty()) gap_horizons = {n / 10, n};

    CltReport report;
    report.walks = walks;
    const std::uint64_t ref_seed = prf::split(seed, seed_role::kCltReference, 0);
    report.v_ref = estimate_velocity(model, reference_cycles, ref_seed).v;
    report.d_ref = estimate_diffusion(model, reference_cycles, ref_seed).matrix;

    const Environment env(model, env_seed);
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    // Running sums of X_k over walks, per horizon k.
    std::vector<RealVec> sum_xk(static_cast<std::size_t>(n) + 1, RealVec(d));
    std::vector<RealVec> endpoints;
    endpoints.reserve(static_cast<std::size_t>(walks));

    for (std::int64_t wi = 0; wi < walks; ++wi) {
        Walker<Environment> w(env, origin, prf::split(seed, seed_role::kCltWalk, wi));
        for (std::int64_t k = 1; k <= n; ++k) {
            w.step();
            sum_xk[static_cast<std::size_t>(k)] += RealVec(w.position());
        }
        RealVec b(d);
        for (int i = 0; i < d; ++i)
            b[i] = (static_cast<double>(w.position()[i]) - static_cast<double>(n) * report.v_ref[i]) /
                   sqrt_n;
        endpoints.push_back(b);
    }

    VecAccumulator mean_acc(d);
    for (const auto& b : endpoints) mean_acc.add(b);
    report.mean_b = mean_acc.mean();

    SymMat cov(d);
    for (const auto& b : endpoints) cov += SymMat::outer(b - report.mean_b);
    cov = (1.0 / static_cast<double>(walks - 1)) * cov;
    report.covariance = cov;

    const double ref_norm = report.d_ref.frobenius();
    const double diff_norm = (cov - report.d_ref).frobenius();
    report.frob_rel = ref_norm > 0 ? diff_norm / ref_norm : diff_norm;

    for (int i = 0; i < d; ++i) {
        std::vector<double> proj;
        proj.reserve(endpoints.size());
        for (const auto& b : endpoints) proj.push_back(b[i]);
        const double mu = report.mean_b[i];
        const double var = cov(i, i);
        if (var <= 0.0) {
            report.degenerate = true;
            report.ks.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            report.ks.push_back(ks_statistic_normal(std::move(proj), mu, std::sqrt(var)));
        }
    }

    const double inv_w = 1.0 / static_cast<double>(walks);
    for (const std::int64_t h : gap_horizons) {
        double gap = 0.0;
        for (std::int64_t k = 1; k <= h; ++k) {
            const RealVec mean_k = inv_w * sum_xk[static_cast<std::size_t>(k)];
            gap = std::max(gap,
                           euclidean_norm(mean_k - static_cast<double>(k) * report.v_ref));
        }
        report.centering_gaps.push_back({h, gap / std::sqrt(static_cast<double>(h))});
    }
    return report;
}

// ---------------------------------------------------------------------------
// Single-site perturbation influence (coupling lemma, integrated form).
// ---------------------------------------------------------------------------

struct PerturbationInfluence {
    EstimateWithError<double> left;   // | int [E^omega X_n - E^omega~ X_n] P(d omega_U) |
    EstimateWithError<double> right;  // P_0^omega( z in X_{[0,n-1]} )
};

inline PerturbationInfluence perturbation_influence(const ModelSpec& model, const LatticePoint& z,
                                                    std::int64_t n, std::int64_t env_reps,
                                                    std::int64_t resample_reps, std::uint64_t seed,
                                                    std::int64_t support_cap = kDefaultSupportCap) {
    detail::require_valid(model);
    if (dot(z, model.u_hat) < 0) throw ModelError("perturbation_influence: z must have level >= 0");
    const int d = model.dimension;
    const LatticePoint origin(d);
    const std::int64_t z_level = dot(z, model.u_hat);

    Accumulator left_acc, right_acc;
    RealVec last_component_se(d);
    for (std::int64_t e = 0; e < env_reps; ++e) {
        const Environment base(model, prf::split(seed, seed_role::kPerturbEnv, e));
        right_acc.add(hitting_probability(base, origin, z, n, support_cap));

        const std::uint64_t tilde_seed = prf::split(seed, seed_role::kPerturbResample, e);
        VecAccumulator delta(d);
        for (std::int64_t r = 0; r < resample_reps; ++r) {
            const std::uint64_t fresh = prf::hash(
                {seed, seed_role::kPerturbHalf, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(r)});
            const HalfSpaceResampledEnvironment<Environment> env_u(base, z_level, fresh);
            const PerturbedEnvironment<HalfSpaceResampledEnvironment<Environment>> env_ut(
                env_u, z, tilde_seed);
            delta.add(quenched_mean(env_u, origin, n, support_cap) -
                      quenched_mean(env_ut, origin, n, support_cap));
        }
        left_acc.add(euclidean_norm(delta.mean()));
        last_component_se = delta.se();
    }

    PerturbationInfluence result;
    result.left = left_acc.estimate();
    result.right = right_acc.estimate();
    if (env_reps == 1) {
        // Delta-method SE of |mean| from the resampling spread.
        result.left.std_error = euclidean_norm(last_component_se);
        result.right.std_error = 0.0;  // exact DP
    }
    return result;
}

// ---------------------------------------------------------------------------
// Regeneration-time tail.
// ---------------------------------------------------------------------------

/// Empirical tail P(sigma_1 > n) over fresh-environment cycles with a fitted
/// geometric rate: the slope of log P(sigma_1 > n) against n. Only strictly
/// positive tail points enter the scan; a tail that is identically zero for
/// n >= 1 (every step advances the level) yields an empty, undefined fit.
inline ScanResult sigma_tail(const ModelSpec& model, std::int64_t reps, std::uint64_t seed,
                             std::int64_t n_max = 30, std::int64_t cap = kDefaultCycleCap) {
    detail::require_valid(model);
    const LatticePoint origin(model.dimension);

    std::vector<std::int64_t> tail_counts(static_cast<std::size_t>(n_max) + 1, 0);
    for (std::int64_t r = 0; r < reps; ++r) {
        const Environment env(model, prf::split(seed, seed_role::kSigmaTailEnv, r));
        Walker<Environment> w(env, origin, prf::split(seed, seed_role::kSigmaTailWalk, r));
        const std::int64_t sigma = w.advance_level(cap);
        for (std::int64_t m = 1; m <= std::min(sigma - 1, n_max); ++m)
            ++tail_counts[static_cast<std::size_t>(m)];
    }

    ScanResult result;
    for (std::int64_t m = 1; m <= n_max; ++m) {
        const double t = static_cast<double>(tail_counts[static_cast<std::size_t>(m)]) /
                         static_cast<double>(reps);
        if (t > 0.0)
            result.points.push_back(
                {m, t, std::sqrt(t * (1.0 - t) / static_cast<double>(reps))});
    }
    if (result.points.size() >= 3) {
        const LinearFit fit = fit_log_linear(result.points);
        result.fitted_exponent = fit.slope;  // log-linear rate, not a log-log exponent
        result.exponent_se = fit.slope_se;
        result.exponent_defined = true;
    }
    return result;
}

}  // namespace rwre
