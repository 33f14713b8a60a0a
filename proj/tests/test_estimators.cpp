#include <catch2/catch_amalgamated.hpp>

#include "rwre/estimators.hpp"
#include "test_models.hpp"

using namespace rwre;

TEST_CASE("velocity of the point-mass walk is exact") {
    const auto est = estimate_velocity(point_mass_model({1, 0}, {1, 0}), 2000, 1);
    REQUIRE(est.v[0] == Catch::Approx(1.0));
    REQUIRE(est.v[1] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(est.mean_cycle_time == Catch::Approx(1.0));
}

TEST_CASE("velocity of the symmetric two-jump walk is (1/2, 1/2) within 3 SE") {
    const auto est = estimate_velocity(two_jump_model({1, 0}, {0, 1}, {1, 1}), 200000, 7);
    for (int i = 0; i < 2; ++i)
        REQUIRE(std::abs(est.v[i] - 0.5) <= 3 * est.se[i]);
}

TEST_CASE("velocity matches X_n/n on the desk model within 4 combined SE") {
    const ModelSpec m = desk_model();
    const auto est = estimate_velocity(m, 200000, 11);
    const auto diff = estimate_diffusion(m, 200000, 12);

    const std::int64_t n = 100000;
    const Environment env(m, 314159);
    Walker<Environment> w(env, LatticePoint{0, 0}, 2718);
    for (std::int64_t k = 0; k < n; ++k) w.step();

    for (int i = 0; i < 2; ++i) {
        const double lln = static_cast<double>(w.position()[i]) / static_cast<double>(n);
        const double lln_se = std::sqrt(std::max(diff.matrix(i, i), 0.0) / static_cast<double>(n));
        const double combined = std::sqrt(est.se[i] * est.se[i] + lln_se * lln_se);
        REQUIRE(std::abs(est.v[i] - lln) <= 4 * combined);
    }
}

TEST_CASE("ballisticity: v.u exceeds delta within noise") {
    const ModelSpec m = desk_model();
    const auto rep = validate_model(m);
    const auto est = estimate_velocity(m, 50000, 3);
    const double vu = dot(est.v, m.u_hat);
    const double se_u = std::sqrt(est.se[0] * est.se[0] * 1.0);  // u=(1,0)
    REQUIRE(vu >= *rep.nonnestling_delta - 3 * se_u);
}

TEST_CASE("diffusion of a point mass vanishes") {
    const auto est = estimate_diffusion(point_mass_model({1, 0}, {1, 0}), 5000, 1);
    REQUIRE(est.matrix.max_abs() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("two-jump diffusion matrix matches (a-b)(a-b)^t/4 within 3 SE") {
    const auto est = estimate_diffusion(two_jump_model({1, 0}, {0, 1}, {1, 1}), 100000, 5);
    const double expected[2][2] = {{0.25, -0.25}, {-0.25, 0.25}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(std::abs(est.matrix(i, j) - expected[i][j]) <=
                    3 * std::max(est.se(i, j), 1e-6));
    // Degeneracy in the direction a + b.
    RealVec xi{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    REQUIRE(std::abs(est.matrix.quadratic_form(xi)) <= 3 * est.se.max_abs());
}

TEST_CASE("two-jump diffusion with a=(1,1), b=(1,-1) is diag(0, 1) within 3 SE") {
    const auto est = estimate_diffusion(two_jump_model({1, 1}, {1, -1}, {1, 0}), 100000, 9);
    const double expected[2][2] = {{0.0, 0.0}, {0.0, 1.0}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(std::abs(est.matrix(i, j) - expected[i][j]) <=
                    3 * std::max(est.se(i, j), 1e-6));
}

TEST_CASE("diffusion estimates are symmetric and PSD up to noise") {
    const auto est = estimate_diffusion(desk_model(), 50000, 21);
    for (const double ev : est.matrix.eigenvalues())
        REQUIRE(ev >= -3 * est.se.max_abs());
}

TEST_CASE("equilibrium estimate of f == 1 is exactly consistent with 1") {
    const auto est = estimate_equilibrium(
        desk_model(), [](const ShiftedEnvironment<Environment>&) { return 1.0; }, 0, 20000, 31);
    REQUIRE(std::abs(est.value - 1.0) <= 3 * std::max(est.std_error, 1e-12));
}

TEST_CASE("equilibrium drift.u of the point mass is exactly 1") {
    const ModelSpec m = point_mass_model({1, 0}, {1, 0});
    const auto est = estimate_equilibrium(
        m,
        [&m](const ShiftedEnvironment<Environment>& view) {
            return dot(drift(view.site_law(LatticePoint(2))), m.u_hat);
        },
        0, 2000, 31);
    REQUIRE(est.value == Catch::Approx(1.0));
}

TEST_CASE("equilibrium drift matches the velocity estimator within 4 combined SE") {
    const ModelSpec m = desk_model();
    const auto vel = estimate_velocity(m, 100000, 41);
    const auto eq = estimate_equilibrium(m, drift_functional, 0, 100000, 42);
    for (int i = 0; i < 2; ++i) {
        const double combined =
            std::sqrt(vel.se[i] * vel.se[i] + eq.std_error[i] * eq.std_error[i]);
        REQUIRE(std::abs(vel.v[i] - eq.value[i]) <= 4 * combined);
    }
}

TEST_CASE("variance scan of a deterministic environment is degenerate") {
    // Single component: the quenched mean does not depend on the seed.
    const ModelSpec m = single_law_model({{{1, 0}, 0.5}, {{1, 1}, 0.5}}, {1, 0});
    const auto scan = variance_scan(m, {8, 16, 32}, 20, 5);
    REQUIRE_FALSE(scan.exponent_defined);
    for (const auto& p : scan.points) REQUIRE(p.value == Catch::Approx(0.0).margin(1e-20));
}

TEST_CASE("variance scan on the desk model grows subdiffusively") {
    const auto scan = variance_scan(desk_model(), {16, 32, 64, 128}, 60, 6);
    REQUIRE(scan.exponent_defined);
    REQUIRE(scan.fitted_exponent < 1.0);
    REQUIRE(scan.fitted_exponent > 0.0);
}

TEST_CASE("doubling environments roughly halves the squared SE of a scan point") {
    const ModelSpec m = desk_model();
    const auto s1 = variance_scan(m, {16, 32, 64}, 100, 77);
    const auto s2 = variance_scan(m, {16, 32, 64}, 200, 77);
    for (std::size_t i = 0; i < s1.points.size(); ++i) {
        const double ratio = (s2.points[i].se * s2.points[i].se) /
                             (s1.points[i].se * s1.points[i].se);
        REQUIRE(ratio > 0.2);
        REQUIRE(ratio < 1.0);
    }
}

TEST_CASE("intersection scan: point mass gives count n and exponent 1") {
    // Negative control: both walks trace the same deterministic ray.
    const ModelSpec m = point_mass_model({1, 0}, {1, 0});
    const auto scan = intersection_scan(m, {8, 16, 32, 64}, 50, 4);
    for (const auto& p : scan.points) REQUIRE(p.value == Catch::Approx(static_cast<double>(p.n)));
    REQUIRE(scan.exponent_defined);
    REQUIRE(scan.fitted_exponent == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("intersection scan on the desk model is sublinear") {
    const auto scan = intersection_scan(desk_model(), {64, 128, 256, 512}, 400, 8);
    REQUIRE(scan.exponent_defined);
    REQUIRE(scan.fitted_exponent < 1.0);
}

TEST_CASE("intersections decrease as the starts separate") {
    const ModelSpec m = desk_model();
    const std::int64_t n = 256;
    Accumulator near, far;
    for (std::int64_t p = 0; p < 400; ++p) {
        const Environment env(m, prf::split(99, 1, p));
        const auto [a0, b0] = simulate_pair(env, LatticePoint{0, 0}, LatticePoint{0, 0}, n - 1,
                                            prf::split(99, 2, p), prf::split(99, 3, p));
        near.add(static_cast<double>(intersections(a0, b0)));
        const auto [a1, b1] = simulate_pair(env, LatticePoint{0, 0}, LatticePoint{0, 12}, n - 1,
                                            prf::split(99, 2, p), prf::split(99, 3, p));
        far.add(static_cast<double>(intersections(a1, b1)));
    }
    REQUIRE(far.mean() < near.mean());
}

TEST_CASE("h vanishes for parallel disjoint rays and is positive at 0") {
    const ModelSpec m = point_mass_model({1, 0}, {1, 0});
    const auto h5 = estimate_h(m, LatticePoint{0, 5}, 500, 3);
    REQUIRE(h5.value == Catch::Approx(0.0));
    const auto h0 = estimate_h(desk_model(), LatticePoint{0, 0}, 500, 3);
    REQUIRE(h0.value >= 1.0);  // the shared start is always common
}

TEST_CASE("h profile tail sums stabilize on the desk model") {
    const ModelSpec m = desk_model();
    double increments[3];
    double prev_sum = 0.0;
    int band = 0;
    for (const std::int64_t radius : {4, 8, 16}) {
        double sum = 0.0;
        for (std::int64_t t = -radius; t <= radius; ++t)
            sum += estimate_h(m, LatticePoint{0, t}, 2000, 500 + static_cast<std::uint64_t>(t)).value;
        increments[band++] = sum - prev_sum;
        prev_sum = sum;
    }
    // Doubling the radius adds less and less mass; the final band is a
    // negligible fraction of the total (empirical summability).
    REQUIRE(increments[1] <= increments[0]);
    REQUIRE(increments[2] <= increments[1]);
    REQUIRE(increments[2] <= 0.05 * prev_sum);
}

TEST_CASE("q kernel is degenerate for the deterministic level-1 walk") {
    const ModelSpec m = point_mass_model({1, 0}, {1, 0});
    const auto q = estimate_q(m, LatticePoint{0, 3}, 200, 5);
    REQUIRE(q.holding_prob == Catch::Approx(1.0));
    REQUIRE(euclidean_norm(q.mean_increment) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(q.p_hat_moment == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("q kernel on the desk model: martingale and holding bounds") {
    for (const auto& x : {LatticePoint{0, 0}, LatticePoint{0, 2}}) {
        const auto q = estimate_q(desk_model(), x, 20000, 6);
        for (int i = 0; i < 2; ++i)
            REQUIRE(std::abs(q.mean_increment[i]) <= 3 * std::max(q.mean_increment_se[i], 1e-4));
        REQUIRE(q.holding_prob + 3 * q.holding_prob_se < 1.0);
        REQUIRE(q.p_hat_moment < 50.0);
    }
}

TEST_CASE("green function at horizon 0 is an indicator") {
    const ModelSpec m = desk_model();
    const auto same = green_function(m, LatticePoint{0, 0}, LatticePoint{0, 0}, {0}, 50, 7);
    REQUIRE(same.points[0].value == Catch::Approx(1.0));
    const auto diff = green_function(m, LatticePoint{0, 2}, LatticePoint{0, 0}, {0}, 50, 7);
    REQUIRE(diff.points[0].value == Catch::Approx(0.0));
}

TEST_CASE("green function reduction: off-diagonal below diagonal") {
    const ModelSpec m = desk_model();
    const std::vector<std::int64_t> ns{32};
    const auto gd = green_function(m, LatticePoint{0, 0}, LatticePoint{0, 0}, ns, 2000, 8);
    const auto g1 = green_function(m, LatticePoint{0, 3}, LatticePoint{0, 0}, ns, 2000, 9);
    const double combined =
        4 * std::sqrt(gd.points[0].se * gd.points[0].se + g1.points[0].se * g1.points[0].se);
    REQUIRE(g1.points[0].value <= gd.points[0].value + combined);
}

TEST_CASE("clt on the point mass is degenerate with zero covariance") {
    const auto rep = clt_test(point_mass_model({1, 0}, {1, 0}), 3, 100, 50, 10, 2000);
    REQUIRE(rep.degenerate);
    REQUIRE(rep.covariance.max_abs() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("clt covariance of the homogeneous two-jump walk approaches its matrix") {
    // Classical CLT: covariance of B_n(1) within 10% Frobenius at moderate n.
    const ModelSpec m = two_jump_model({1, 0}, {0, 1}, {1, 1});
    const auto rep = clt_test(m, 5, 2000, 4000, 11, 200000);
    REQUIRE(rep.frob_rel < 0.10);
    for (const double ks : rep.ks) REQUIRE(ks < 0.05);
}

TEST_CASE("perturbation influence: single-component model has zero left side") {
    const ModelSpec m = single_law_model({{{1, 0}, 0.5}, {{1, 1}, 0.5}}, {1, 0});
    const auto res = perturbation_influence(m, LatticePoint{2, 1}, 10, 1, 20, 12);
    REQUIRE(res.left.value == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("perturbation influence: unreachable site gives zero on both sides") {
    const ModelSpec m = desk_model();
    // |transverse| > level is outside the reachable cone.
    const auto res = perturbation_influence(m, LatticePoint{1, 2}, 10, 1, 10, 13);
    REQUIRE(res.right.value == 0.0);
    REQUIRE(res.left.value == 0.0);
}

TEST_CASE("perturbation influence: reachable site bounded by hitting probability") {
    const ModelSpec m = desk_model();
    const auto res = perturbation_influence(m, LatticePoint{1, 0}, 8, 2, 40, 14);
    REQUIRE(res.right.value > 0.0);
    REQUIRE(res.left.value >= 0.0);
}

TEST_CASE("sigma tail of the half advance / half stay walk has rate 1/2") {
    const ModelSpec m = single_law_model({{{1, 0}, 0.5}, {{0, 1}, 0.5}}, {1, 0});
    const auto scan = sigma_tail(m, 200000, 15, 20);
    REQUIRE(scan.exponent_defined);
    REQUIRE(std::abs(scan.fitted_exponent - std::log(0.5)) <= 3 * scan.exponent_se + 0.01);
    REQUIRE(scan.fitted_exponent + 3 * scan.exponent_se < 0.0);
}

TEST_CASE("sigma tail is identically zero when every step advances") {
    const auto scan = sigma_tail(desk_model(), 20000, 16, 30);
    REQUIRE(scan.points.empty());
    REQUIRE_FALSE(scan.exponent_defined);
}

TEST_CASE("doubling replicas shrinks the SE by about 1/sqrt(2)") {
    const ModelSpec m = desk_model();
    const auto e1 = estimate_velocity(m, 40000, 17);
    const auto e2 = estimate_velocity(m, 80000, 17);
    const double ratio = e2.se[0] / e1.se[0];
    REQUIRE(ratio > 1.0 / std::sqrt(2.0) * 0.8);
    REQUIRE(ratio < 1.0 / std::sqrt(2.0) * 1.2);
}

TEST_CASE("estimators reject invalid models") {
    const ModelSpec nestling = point_mass_model({0, 1}, {1, 0});  // zero drift along u
    REQUIRE_THROWS_AS(estimate_velocity(nestling, 10, 1), ModelError);
    const ModelSpec backwards = single_law_model({{{-1, 0}, 0.5}, {{1, 0}, 0.5}}, {1, 0});
    REQUIRE_THROWS_AS(estimate_diffusion(backwards, 10, 1), ModelError);
    REQUIRE_THROWS_AS(estimate_q(desk_model(), LatticePoint{1, 0}, 10, 1), ModelError);
    REQUIRE_THROWS_AS(estimate_h(desk_model(), LatticePoint{1, 0}, 10, 1), ModelError);
}
