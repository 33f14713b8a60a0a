#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rwre/lattice.hpp"

namespace rwre {

/// Raised when a model or config violates a structural precondition.
class ModelError : public std::runtime_error {
  public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// A finitely supported probability vector over lattice steps: the law of a
/// single jump at one site.
struct StepLaw {
    struct Entry {
        LatticePoint step;
        double prob;
    };
    std::vector<Entry> entries;

    static constexpr double kNormTol = 1e-12;

    int dim() const { return entries.empty() ? 0 : entries.front().step.dim(); }

    void validate() const {
        if (entries.empty()) throw ModelError("StepLaw: empty support");
        const int d = entries.front().step.dim();
        double total = 0.0;
        std::unordered_set<LatticePoint> seen;
        for (const auto& e : entries) {
            if (e.step.dim() != d) throw ModelError("StepLaw: inconsistent step dimensions");
            if (e.prob < 0.0) throw ModelError("StepLaw: negative probability");
            if (!seen.insert(e.step).second)
                throw ModelError("StepLaw: duplicate step " + e.step.to_string());
            total += e.prob;
        }
        if (std::abs(total - 1.0) > kNormTol)
            throw ModelError("StepLaw: probabilities sum to " + std::to_string(total));
    }

    /// Probability of a given step (0 if outside the support).
    double prob_of(const LatticePoint& z) const {
        for (const auto& e : entries)
            if (e.step == z) return e.prob;
        return 0.0;
    }

    /// Select a step from a uniform u in [0,1). Fixed scan order makes the
    /// selection a pure function of (law, u).
    const LatticePoint& sample(double u) const {
        double c = 0.0;
        for (const auto& e : entries) {
            c += e.prob;
            if (u < c) return e.step;
        }
        return entries.back().step;  // guard against rounding at u ~ 1
    }
};

/// Mean single-step displacement of a law: sum_z z * prob(z).
inline RealVec drift(const StepLaw& law) {
    RealVec d(law.dim());
    for (const auto& e : law.entries) d += e.prob * RealVec(e.step);
    return d;
}

/// A finite mixture of step laws plus a lattice direction u_hat. Together
/// with an i.i.d. site assignment this defines the environment measure.
struct ModelSpec {
    struct Component {
        double weight;
        StepLaw law;
    };

    int dimension = 0;
    LatticePoint u_hat;
    std::vector<Component> components;

    static constexpr int kSchemaVersion = 1;

    void validate_structure() const {
        if (dimension < 1 || dimension > LatticePoint::kMaxDim)
            throw ModelError("ModelSpec: dimension out of range");
        if (u_hat.dim() != dimension) throw ModelError("ModelSpec: u_hat dimension mismatch");
        if (u_hat.is_zero()) throw ModelError("ModelSpec: u_hat must be nonzero");
        if (components.empty()) throw ModelError("ModelSpec: no components");
        double total = 0.0;
        for (const auto& c : components) {
            if (c.weight < 0.0) throw ModelError("ModelSpec: negative component weight");
            total += c.weight;
            c.law.validate();
            if (c.law.dim() != dimension)
                throw ModelError("ModelSpec: component dimension mismatch with u_hat");
        }
        if (std::abs(total - 1.0) > StepLaw::kNormTol)
            throw ModelError("ModelSpec: component weights sum to " + std::to_string(total));
    }
};

/// Decidable form of the model hypotheses: forbidden direction, nonnestling
/// drift bound, finite-support moment bound, and the two ellipticity checks.
struct ValidationReport {
    bool forbidden_direction_ok = false;
    std::optional<double> nonnestling_delta;  // present iff min drift.u_hat > 0
    double moment_bound_M = 0.0;              // max euclidean step norm over supports
    bool ellipticity_2_3_ok = false;
    bool ellipticity_span_ok = false;
    std::vector<LatticePoint> support_J;      // union support, lexicographically sorted

    bool hypotheses_ok() const {
        return forbidden_direction_ok && nonnestling_delta.has_value();
    }
    bool elliptic() const { return ellipticity_2_3_ok && ellipticity_span_ok; }
};

/// Check the model against the walk hypotheses. Integer dot products are
/// exact; the drift bound delta is the exact minimum over components.
inline ValidationReport validate_model(const ModelSpec& model) {
    model.validate_structure();

    ValidationReport rep;
    rep.forbidden_direction_ok = true;

    std::unordered_set<LatticePoint> support;
    double min_drift_dot_u = std::numeric_limits<double>::infinity();
    bool any_elliptic_component = false;

    for (const auto& comp : model.components) {
        double drift_dot_u = 0.0;
        double p00 = 0.0;
        for (const auto& e : comp.law.entries) {
            const std::int64_t level = dot(e.step, model.u_hat);
            if (e.prob > 0.0 && level < 0) rep.forbidden_direction_ok = false;
            drift_dot_u += e.prob * static_cast<double>(level);
            if (e.step.is_zero()) p00 += e.prob;
            if (comp.weight > 0.0 && e.prob > 0.0) {
                support.insert(e.step);
                rep.moment_bound_M = std::max(rep.moment_bound_M, euclidean_norm(e.step));
            }
        }
        min_drift_dot_u = std::min(min_drift_dot_u, drift_dot_u);

        // (2.3): pi_00 + pi_0z < 1 for every z != 0. For z outside the
        // support the sum is pi_00, so the condition reduces to the
        // supported steps plus pi_00 < 1 itself.
        if (comp.weight > 0.0) {
            bool ok = p00 < 1.0;
            for (const auto& e : comp.law.entries)
                if (!e.step.is_zero() && p00 + e.prob >= 1.0) ok = false;
            if (ok) any_elliptic_component = true;
        }
    }

    if (min_drift_dot_u > 0.0) rep.nonnestling_delta = min_drift_dot_u;
    rep.ellipticity_2_3_ok = any_elliptic_component;

    rep.support_J.assign(support.begin(), support.end());
    std::sort(rep.support_J.begin(), rep.support_J.end());

    // Span check: J not contained in any line R*u. Exact integer test of
    // pairwise proportionality against the first nonzero support point.
    rep.ellipticity_span_ok = false;
    const LatticePoint* ref = nullptr;
    for (const auto& z : rep.support_J) {
        if (z.is_zero()) continue;
        if (!ref) {
            ref = &z;
            continue;
        }
        bool parallel = true;
        for (int a = 0; a < model.dimension && parallel; ++a)
            for (int b = a + 1; b < model.dimension; ++b)
                if ((*ref)[a] * z[b] != (*ref)[b] * z[a]) {
                    parallel = false;
                    break;
                }
        if (!parallel) {
            rep.ellipticity_span_ok = true;
            break;
        }
    }

    return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization.
//
// Schema (version 1):
//   { "schema_version": 1, "dimension": d, "u_hat": [ints],
//     "components": [ { "weight": w, "steps": [ { "z": [ints], "p": prob } ] } ] }
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LatticePoint& p) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
    return a;
}

inline LatticePoint lattice_point_from_json(const nlohmann::json& a) {
    if (!a.is_array()) throw ModelError("lattice point must be a JSON array");
    LatticePoint p(static_cast<int>(a.size()));
    for (int i = 0; i < p.dim(); ++i) p[i] = a.at(i).get<std::int64_t>();
    return p;
}

inline nlohmann::json to_json(const ModelSpec& m) {
    nlohmann::json j;
    j["schema_version"] = ModelSpec::kSchemaVersion;
    j["dimension"] = m.dimension;
    j["u_hat"] = to_json(m.u_hat);
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : m.components) {
        nlohmann::json jc;
        jc["weight"] = c.weight;
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& e : c.law.entries)
            steps.push_back({{"z", to_json(e.step)}, {"p", e.prob}});
        jc["steps"] = steps;
        comps.push_back(jc);
    }
    j["components"] = comps;
    return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
    if (j.contains("schema_version") &&
        j.at("schema_version").get<int>() > ModelSpec::kSchemaVersion)
        throw ModelError("model JSON: unsupported schema_version");
    ModelSpec m;
    m.dimension = j.at("dimension").get<int>();
    m.u_hat = lattice_point_from_json(j.at("u_hat"));
    for (const auto& jc : j.at("components")) {
        ModelSpec::Component c;
        c.weight = jc.at("weight").get<double>();
        for (const auto& js : jc.at("steps"))
            c.law.entries.push_back({lattice_point_from_json(js.at("z")), js.at("p").get<double>()});
        m.components.push_back(std::move(c));
    }
    m.validate_structure();
    return m;
}

}  // namespace rwre
