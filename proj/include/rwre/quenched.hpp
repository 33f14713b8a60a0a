#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/lattice.hpp"
#include "rwre/model.hpp"

namespace rwre {

class SupportCapExceeded : public std::runtime_error {
  public:
    explicit SupportCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

constexpr std::int64_t kDefaultSupportCap = 10'000'000;

/// Exact (up to float rounding) n-step quenched law P^omega_{x0}(X_n = .),
/// support sorted lexicographically.
struct QuenchedDistribution {
    std::int64_t horizon = 0;
    std::vector<std::pair<LatticePoint, double>> support;

    double total_mass() const {
        double s = 0.0;
        for (const auto& [x, p] : support) s += p;
        return s;
    }

    double prob_at(const LatticePoint& x) const {
        auto it = std::lower_bound(support.begin(), support.end(), x,
                                   [](const auto& e, const LatticePoint& q) { return e.first < q; });
        return (it != support.end() && it->first == x) ? it->second : 0.0;
    }

    RealVec mean() const {
        if (support.empty()) return RealVec();
        RealVec m(support.front().first.dim());
        for (const auto& [x, p] : support) m += p * RealVec(x);
        return m;
    }
};

/// Forward Chapman-Kolmogorov iteration over sparse per-horizon states.
///
/// Each step scatters the state through the local laws into one sorted run
/// per union-support step (a constant shift of a sorted list stays sorted),
/// then k-way merges the runs. Contributions to a target site accumulate in
/// the fixed union-step order and targets are produced in lexicographic site
/// order, so float results are reproducible run to run.
///
/// For d = 2 the site key is packed into one 64-bit integer (bias 2^30 per
/// coordinate, lexicographic order preserved) and a step becomes a single
/// integer delta, which makes the merge loop branch-light. The generic path
/// covers every other dimension.
template <EnvironmentLike Env>
class ForwardDp {
  public:
    explicit ForwardDp(const Env& env, LatticePoint x0,
                       std::int64_t support_cap = kDefaultSupportCap)
        : env_(&env), horizon_(0), support_cap_(support_cap) {
        const ModelSpec& model = env.model();
        if (x0.dim() != model.dimension) throw ModelError("ForwardDp: start dimension mismatch");

        // Union step set J, sorted; per-component index map into J.
        std::vector<LatticePoint> steps;
        for (const auto& c : model.components)
            for (const auto& e : c.law.entries) steps.push_back(e.step);
        std::sort(steps.begin(), steps.end());
        steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
        union_steps_ = std::move(steps);

        component_targets_.resize(model.components.size());
        for (std::size_t c = 0; c < model.components.size(); ++c) {
            for (const auto& e : model.components[c].law.entries) {
                const auto it =
                    std::lower_bound(union_steps_.begin(), union_steps_.end(), e.step);
                component_targets_[c].push_back(
                    {static_cast<int>(it - union_steps_.begin()), e.prob});
            }
        }

        max_step_abs_ = 0;
        for (const auto& z : union_steps_)
            for (int i = 0; i < z.dim(); ++i)
                max_step_abs_ = std::max(max_step_abs_, std::abs(z[i]));

        packed_ = model.dimension == 2 && union_steps_.size() <= 16 &&
                  model.components.size() <= 255;
        if (packed_) {
            max_abs_coord_ = std::max(std::abs(x0[0]), std::abs(x0[1]));
            deltas_.reserve(union_steps_.size());
            for (const auto& z : union_steps_)
                deltas_.push_back(static_cast<std::uint64_t>((z[0] << 32) + z[1]));
            // Dense (component, union step) -> probability table, row-major.
            comp_weight_.assign(model.components.size() * union_steps_.size(), 0.0);
            for (std::size_t c = 0; c < model.components.size(); ++c)
                for (const auto& [j, p] : component_targets_[c])
                    comp_weight_[c * union_steps_.size() + static_cast<std::size_t>(j)] = p;
            pstate_.push_back({pack(x0[0], x0[1]), 1.0});
        } else {
            runs_.resize(union_steps_.size());
            state_.push_back({std::move(x0), 1.0});
        }
    }

    std::int64_t horizon() const { return horizon_; }

    /// Advance one horizon. If `taboo` is given, mass arriving at that site
    /// is removed from the state and returned (absorption for hitting
    /// probabilities); otherwise returns 0.
    double step(const LatticePoint* taboo = nullptr) {
        const double absorbed = packed_ ? step_packed(taboo) : step_generic(taboo);
        ++horizon_;
        return absorbed;
    }

    QuenchedDistribution distribution() const {
        QuenchedDistribution d;
        d.horizon = horizon_;
        if (packed_) {
            d.support.reserve(pstate_.size());
            for (const auto& [key, p] : pstate_) {
                const auto [x0, x1] = unpack(key);
                d.support.push_back({LatticePoint{x0, x1}, p});
            }
        } else {
            d.support = state_;
        }
        return d;
    }

    RealVec mean() const {
        RealVec m(env_->model().dimension);
        if (packed_) {
            for (const auto& [key, p] : pstate_) {
                const auto [x0, x1] = unpack(key);
                m[0] += p * static_cast<double>(x0);
                m[1] += p * static_cast<double>(x1);
            }
        } else {
            for (const auto& [x, p] : state_) m += p * RealVec(x);
        }
        return m;
    }

  private:
    static constexpr std::int64_t kBias = 1ll << 30;

    static std::uint64_t pack(std::int64_t x0, std::int64_t x1) {
        return (static_cast<std::uint64_t>(x0 + kBias) << 32) |
               static_cast<std::uint32_t>(x1 + kBias);
    }
    static std::pair<std::int64_t, std::int64_t> unpack(std::uint64_t key) {
        return {static_cast<std::int64_t>(key >> 32) - kBias,
                static_cast<std::int64_t>(key & 0xFFFFFFFFull) - kBias};
    }

    // Virtual-run merge: run j enumerates the state entries whose law
    // supports union step j, shifted by delta_j. No run is materialized; a
    // head pointer per run walks the shared state, skipping zero-weight
    // entries. Contributions per target still accumulate in j order.
    double step_packed(const LatticePoint* taboo) {
        if (max_abs_coord_ + max_step_abs_ >= kBias)
            throw SupportCapExceeded("quenched DP coordinate exceeds packed range");
        max_abs_coord_ += max_step_abs_;

        const std::size_t n = pstate_.size();
        comp_ids_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto [x0, x1] = unpack(pstate_[i].first);
            comp_ids_[i] = static_cast<std::uint8_t>(env_->component_at(LatticePoint{x0, x1}));
        }

        // Every run walks the full state; zero-weight contributions add an
        // exact 0.0 (which leaves float sums unchanged), and all-zero
        // targets are filtered at emission. This keeps the inner loop free
        // of data-dependent skip loops.
        const std::size_t m = deltas_.size();
        std::size_t head[16];
        std::uint64_t cur_key[16];
        const double* weights = comp_weight_.data();
        for (std::size_t j = 0; j < m; ++j) {
            head[j] = 0;
            cur_key[j] = n > 0 ? pstate_[0].first + deltas_[j] : ~0ull;
        }

        const bool has_taboo = taboo != nullptr;
        const std::uint64_t taboo_key = has_taboo ? pack((*taboo)[0], (*taboo)[1]) : 0;

        pnext_.clear();
        pnext_.reserve(n + n / 2 + 8);
        double absorbed = 0.0;
        for (;;) {
            std::uint64_t min_key = cur_key[0];
            for (std::size_t j = 1; j < m; ++j) min_key = std::min(min_key, cur_key[j]);
            if (min_key == ~0ull) break;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                if (cur_key[j] != min_key) continue;
                const std::size_t h = head[j];
                acc += pstate_[h].second * weights[comp_ids_[h] * m + j];
                head[j] = h + 1;
                cur_key[j] = (h + 1 < n) ? pstate_[h + 1].first + deltas_[j] : ~0ull;
            }
            if (has_taboo && min_key == taboo_key)
                absorbed += acc;
            else if (acc != 0.0)
                pnext_.push_back({min_key, acc});
        }

        if (static_cast<std::int64_t>(pnext_.size()) > support_cap_)
            throw SupportCapExceeded("quenched DP support exceeded cap " +
                                     std::to_string(support_cap_));
        pstate_.swap(pnext_);
        return absorbed;
    }

    double step_generic(const LatticePoint* taboo) {
        for (auto& r : runs_) r.clear();
        for (const auto& [x, p] : state_) {
            const int comp = env_->component_at(x);
            for (const auto& [j, step_prob] : component_targets_[static_cast<std::size_t>(comp)])
                runs_[static_cast<std::size_t>(j)].push_back(
                    {x + union_steps_[static_cast<std::size_t>(j)], p * step_prob});
        }

        next_.clear();
        heads_.assign(runs_.size(), 0);
        double absorbed = 0.0;
        for (;;) {
            const LatticePoint* min_key = nullptr;
            for (std::size_t j = 0; j < runs_.size(); ++j) {
                if (heads_[j] >= runs_[j].size()) continue;
                const LatticePoint& k = runs_[j][heads_[j]].first;
                if (!min_key || k < *min_key) min_key = &k;
            }
            if (!min_key) break;
            const LatticePoint key = *min_key;
            double acc = 0.0;
            for (std::size_t j = 0; j < runs_.size(); ++j) {
                while (heads_[j] < runs_[j].size() && runs_[j][heads_[j]].first == key) {
                    acc += runs_[j][heads_[j]].second;
                    ++heads_[j];
                }
            }
            if (taboo && key == *taboo)
                absorbed += acc;
            else
                next_.push_back({key, acc});
        }

        if (static_cast<std::int64_t>(next_.size()) > support_cap_)
            throw SupportCapExceeded("quenched DP support exceeded cap " +
                                     std::to_string(support_cap_));
        state_.swap(next_);
        return absorbed;
    }

    const Env* env_;
    std::vector<LatticePoint> union_steps_;
    std::vector<std::vector<std::pair<int, double>>> component_targets_;
    std::int64_t max_step_abs_ = 0;

    // Generic representation (d != 2).
    std::vector<std::pair<LatticePoint, double>> state_;
    std::vector<std::pair<LatticePoint, double>> next_;
    std::vector<std::vector<std::pair<LatticePoint, double>>> runs_;

    // Packed representation (d == 2).
    bool packed_ = false;
    std::int64_t max_abs_coord_ = 0;
    std::vector<std::uint64_t> deltas_;
    std::vector<double> comp_weight_;  // components x union steps, row-major
    std::vector<std::uint8_t> comp_ids_;
    std::vector<std::pair<std::uint64_t, double>> pstate_;
    std::vector<std::pair<std::uint64_t, double>> pnext_;

    std::vector<std::size_t> heads_;
    std::int64_t horizon_;
    std::int64_t support_cap_;
};

template <EnvironmentLike Env>
QuenchedDistribution quenched_distribution(const Env& env, const LatticePoint& x0,
                                           std::int64_t n,
                                           std::int64_t support_cap = kDefaultSupportCap) {
    if (n < 0) throw ModelError("quenched_distribution: negative horizon");
    ForwardDp<Env> dp(env, x0, support_cap);
    for (std::int64_t k = 0; k < n; ++k) dp.step();
    return dp.distribution();
}

template <EnvironmentLike Env>
RealVec quenched_mean(const Env& env, const LatticePoint& x0, std::int64_t n,
                      std::int64_t support_cap = kDefaultSupportCap) {
    ForwardDp<Env> dp(env, x0, support_cap);
    for (std::int64_t k = 0; k < n; ++k) dp.step();
    return dp.mean();
}

/// Quenched means at several horizons from one forward pass.
/// `horizons` must be strictly increasing and nonnegative.
template <EnvironmentLike Env>
std::vector<RealVec> quenched_means_at(const Env& env, const LatticePoint& x0,
                                       const std::vector<std::int64_t>& horizons,
                                       std::int64_t support_cap = kDefaultSupportCap) {
    std::vector<RealVec> out;
    out.reserve(horizons.size());
    ForwardDp<Env> dp(env, x0, support_cap);
    for (std::int64_t h : horizons) {
        while (dp.horizon() < h) dp.step();
        out.push_back(dp.mean());
    }
    return out;
}

/// P^omega_{x0}( z visited during times 0..n-1 ), exact via absorption at z.
template <EnvironmentLike Env>
double hitting_probability(const Env& env, const LatticePoint& x0, const LatticePoint& z,
                           std::int64_t n, std::int64_t support_cap = kDefaultSupportCap) {
    if (n <= 0) return 0.0;
    if (x0 == z) return 1.0;
    ForwardDp<Env> dp(env, x0, support_cap);
    double hit = 0.0;
    for (std::int64_t k = 1; k <= n - 1; ++k) hit += dp.step(&z);
    return hit;
}

}  // namespace rwre
