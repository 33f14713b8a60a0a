#pragma once

#include <concepts>
#include <cstdint>

#include "rwre/lattice.hpp"
#include "rwre/model.hpp"
#include "rwre/prng.hpp"

namespace rwre {

/// Anything walkers and DP can run against: a deterministic site -> law map
/// over one model. Realizations are lazy; no field is ever materialized.
template <class E>
concept EnvironmentLike = requires(const E& e, const LatticePoint& x) {
    { e.model() } -> std::convertible_to<const ModelSpec&>;
    { e.component_at(x) } -> std::convertible_to<int>;
    { e.site_law(x) } -> std::convertible_to<const StepLaw&>;
};

namespace detail {

/// Component index at a site from the pre-absorbed key prefix
/// absorb(seed, kStreamSite); coordinates are absorbed per call.
inline int draw_component_from_base(const ModelSpec& model, std::uint64_t base,
                                    const LatticePoint& x) {
    if (model.components.size() == 1) return 0;
    std::uint64_t h = base;
    for (int i = 0; i < x.dim(); ++i)
        h = prf::absorb(h, static_cast<std::uint64_t>(x[i]));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    double c = 0.0;
    for (std::size_t k = 0; k < model.components.size(); ++k) {
        c += model.components[k].weight;
        if (u < c) return static_cast<int>(k);
    }
    return static_cast<int>(model.components.size()) - 1;
}

/// Component index at a site: one PRF evaluation keyed on
/// (seed, kStreamSite, coords...), mapped through the cumulative weights.
inline int draw_component(const ModelSpec& model, std::uint64_t seed,
                          const LatticePoint& x) {
    return draw_component_from_base(model, prf::absorb(seed, prf::kStreamSite), x);
}

}  // namespace detail

/// One realization omega of the environment measure: a model plus a seed.
/// site_law is a pure function of (model, seed, x); the object is immutable
/// and freely shareable across concurrent workers.
class Environment {
  public:
    Environment(const ModelSpec& model, std::uint64_t seed)
        : model_(&model), seed_(seed), site_base_(prf::absorb(seed, prf::kStreamSite)) {}

    const ModelSpec& model() const { return *model_; }
    std::uint64_t seed() const { return seed_; }
    int dimension() const { return model_->dimension; }

    int component_at(const LatticePoint& x) const {
        return detail::draw_component_from_base(*model_, site_base_, x);
    }

    const StepLaw& site_law(const LatticePoint& x) const {
        return model_->components[component_at(x)].law;
    }

  private:
    const ModelSpec* model_;
    std::uint64_t seed_;
    std::uint64_t site_base_;
};

/// View of a base environment with the law at one site independently
/// redrawn from the mixture: omega-tilde of the single-site coupling.
template <EnvironmentLike Base>
class PerturbedEnvironment {
  public:
    PerturbedEnvironment(const Base& base, LatticePoint site, std::uint64_t resample_seed)
        : base_(&base), site_(std::move(site)), resample_seed_(resample_seed) {}

    const ModelSpec& model() const { return base_->model(); }
    int dimension() const { return model().dimension; }

    int component_at(const LatticePoint& x) const {
        if (x == site_)
            return detail::draw_component(model(), prf::hash({resample_seed_, prf::kStreamResample}), x);
        return base_->component_at(x);
    }

    const StepLaw& site_law(const LatticePoint& x) const {
        return model().components[component_at(x)].law;
    }

  private:
    const Base* base_;
    LatticePoint site_;
    std::uint64_t resample_seed_;
};

/// View that re-randomizes the half-space U = { x : x.u_hat > level_threshold }
/// from a fresh seed, leaving the complement untouched. Used to integrate
/// over P(d omega_U) in the perturbation-influence experiment.
template <EnvironmentLike Base>
class HalfSpaceResampledEnvironment {
  public:
    HalfSpaceResampledEnvironment(const Base& base, std::int64_t level_threshold,
                                  std::uint64_t fresh_seed)
        : base_(&base), threshold_(level_threshold), fresh_seed_(fresh_seed) {}

    const ModelSpec& model() const { return base_->model(); }
    int dimension() const { return model().dimension; }

    int component_at(const LatticePoint& x) const {
        if (dot(x, model().u_hat) > threshold_)
            return detail::draw_component(model(), fresh_seed_, x);
        return base_->component_at(x);
    }

    const StepLaw& site_law(const LatticePoint& x) const {
        return model().components[component_at(x)].law;
    }

  private:
    const Base* base_;
    std::int64_t threshold_;
    std::uint64_t fresh_seed_;
};

template <EnvironmentLike Base>
PerturbedEnvironment<Base> perturb_site(const Base& env, const LatticePoint& z,
                                        std::uint64_t resample_seed) {
    return PerturbedEnvironment<Base>(env, z, resample_seed);
}

/// The environment as seen from `origin` (the shift T_x omega): slab
/// functionals of the environment chain are evaluated against this view.
template <EnvironmentLike Base>
class ShiftedEnvironment {
  public:
    ShiftedEnvironment(const Base& base, LatticePoint origin)
        : base_(&base), origin_(std::move(origin)) {}

    const ModelSpec& model() const { return base_->model(); }
    int dimension() const { return model().dimension; }
    const LatticePoint& origin() const { return origin_; }

    int component_at(const LatticePoint& y) const { return base_->component_at(origin_ + y); }
    const StepLaw& site_law(const LatticePoint& y) const { return base_->site_law(origin_ + y); }

  private:
    const Base* base_;
    LatticePoint origin_;
};

}  // namespace rwre
