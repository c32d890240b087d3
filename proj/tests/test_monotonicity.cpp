#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "finsler/monotonicity.hpp"

using namespace finsler;

namespace {

FlowSettings bulk() {
    FlowSettings fs;
    fs.step = 4e-3;
    return fs;
}

GeodesicFan::Settings test_fan() {
    GeodesicFan::Settings s;
    s.rays = 256;
    s.flow = bulk();
    return s;
}

FDoublePrimeSettings small_fdp(int M = 48) {
    FDoublePrimeSettings st;
    st.M = M;
    st.grid = PolarGrid{10, 40};
    st.fan = test_fan();
    st.fs = bulk();
    return st;
}

}  // namespace

TEST_CASE("psi is the identity when the metrics coincide") {
    Metric cap = spherical_cap_metric(kPi / 3);
    PsiContext ctx{cap, cap, bulk()};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ur(0.0, 0.9), ua(0.0, kTwoPi);
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
        const Point x = point_on_circle(ur(rng), ua(rng));
        const Vec2 e = dir(ua(rng));
        const Vec2 v = e / cap.norm(x, e);
        const UnitTangent out = psi(ctx, x, v);
        worst = std::max(worst, (out.base - x).norm() + (out.v - v).norm());
    }
    CHECK(worst < 1e-7);
}

TEST_CASE("psi under a global scaling keeps base points and rescales fibers") {
    Metric phi = euclidean_metric();
    auto displacement = [&](double eps) {
        Metric phi_p = phi.conformally_scaled(ScalarField::constant(eps));
        PsiContext ctx{phi, phi_p, bulk()};
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> ur(0.0, 0.85), ua(0.0, kTwoPi);
        double worst = 0.0;
        for (int i = 0; i < 15; ++i) {
            const Point x = point_on_circle(ur(rng), ua(rng));
            const Vec2 e = dir(ua(rng));
            const Vec2 v = e / phi_p.norm(x, e);  // phi'-unit
            const UnitTangent out = psi(ctx, x, v);
            // chords coincide; the base point is unchanged and the vector is
            // rescaled to the phi-unit one
            worst = std::max(worst, (out.base - x).norm() + (out.v - v).norm());
        }
        return worst;
    };
    const double d1 = displacement(1e-2);
    const double d2 = displacement(5e-3);
    CHECK(d1 == Catch::Approx(1e-2 / 1.01).epsilon(1e-3));
    CHECK(d2 <= std::max(0.6 * d1, 1e-7));
}

TEST_CASE("psi preserves chord endpoints across metrics") {
    Metric phi = euclidean_metric();
    Metric phi_p = spherical_cap_metric(kPi / 3);
    PsiContext ctx{phi, phi_p, bulk()};
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ur(0.0, 0.8), ua(0.0, kTwoPi);
    for (int i = 0; i < 12; ++i) {
        const Point x = point_on_circle(ur(rng), ua(rng));
        const Vec2 e = dir(ua(rng));
        const Vec2 v = e / phi_p.norm(x, e);
        Chord src = exit_chord(phi_p, x, v, bulk());
        const UnitTangent out = psi(ctx, x, v);
        Chord img = exit_chord(phi, out.base, out.v, bulk());
        CHECK((img.p_minus - src.p_minus).norm() < 1e-6);
        CHECK((img.p_plus - src.p_plus).norm() < 1e-6);
        // target = Euclidean: the correspondence has the closed chord form
        const Point formula_base =
            src.midpoint - src.tau_mid() * src.lambda * src.w;
        CHECK((out.base - formula_base).norm() < 1e-6);
        CHECK((out.v - src.w).norm() < 1e-6);
    }
}

TEST_CASE("h_map: identity metrics, boundary fixing, curve tracking") {
    Metric cap = spherical_cap_metric(kPi / 3);
    PsiContext ctx{cap, cap, bulk()};
    PolarGrid grid{8, 32};
    auto env = enveloping_function(cap, 0.2, 32, grid, test_fan());
    SECTION("identity and boundary") {
        for (int node : {grid.node_index(2, 5), grid.node_index(6, 20),
                         grid.node_index(grid.rings, 7),  // boundary ring
                         grid.center_index()}) {
            const Point x = grid.node(node);
            CHECK((h_map(ctx, env, 9, node) - x).norm() < 1e-6);
        }
    }
    SECTION("gradient curves map to target geodesics with linear time change") {
        Metric eu = euclidean_metric();
        PsiContext cx{eu, cap, bulk()};
        const Point p = point_on_circle(1.2, 1.1);
        // one gradient curve of d_cap(p, .) = one cap geodesic from p
        const Vec2 e = dir(angle_of(-p.as_vec()) + 0.2);
        Geodesic ray = flow(cap, p, cap.legendre(p, e / cap.norm(p, e)), 1.2, bulk());
        auto crossing = finsler::detail::unit_circle_crossing(cap, ray);
        REQUIRE(crossing.used);
        const double Tp = crossing.t_out - crossing.t_in;
        Geodesic tgt = connect(eu, crossing.a, crossing.b, 1.0, bulk());
        for (double f : {0.2, 0.5, 0.8}) {
            const double tp = crossing.t_in + f * Tp;
            const Point x = ray.position_at(tp);
            const Vec2 vel = cap.flow_velocity(x, ray.momentum_at(tp));
            const Point h = psi(cx, x, vel).base;
            const Point want = tgt.position_at(f * tgt.length);
            CHECK((h - want).norm() < 1e-5);
        }
    }
}

TEST_CASE("invert_h: identity, synthetic field, round trip") {
    PolarGrid grid{10, 40};
    SECTION("identity map returns immediately") {
        HField h{grid, std::vector<Vec2>(grid.node_count(), Vec2{})};
        const Point y{0.3, -0.5};
        CHECK((invert_h(h, y) - y).norm() == 0.0);
    }
    SECTION("constant displacement has the algebraic inverse") {
        const Vec2 c{0.013, -0.007};
        HField h{grid, std::vector<Vec2>(grid.node_count(), c)};
        const Point y{0.2, 0.4};
        CHECK((invert_h(h, y) - (y - c)).norm() < 1e-8);
    }
    SECTION("round trip through a smooth small field") {
        HField h{grid, {}};
        h.displacement.resize(grid.node_count());
        for (int idx = 0; idx < grid.node_count(); ++idx) {
            const Point x = grid.node(idx);
            h.displacement[idx] = {0.01 * std::sin(2 * x.x + x.y), 0.012 * std::cos(x.x - x.y)};
        }
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ur(0.0, 0.9), ua(0.0, kTwoPi);
        for (int i = 0; i < 20; ++i) {
            const Point y = point_on_circle(ur(rng), ua(rng));
            const Point x = invert_h(h, y);
            const Point back = x + finsler::detail::polar_interp(grid, h.displacement, x);
            CHECK((back - y).norm() < 1e-6);
        }
    }
}

TEST_CASE("F'' with identical metrics reproduces F") {
    Metric eu = euclidean_metric();
    auto fdp = build_f_double_prime(eu, eu, 0.2, small_fdp());
    CHECK(fdp.skipped_count == 0);
    const auto& env = fdp.f_dprime;
    double max_df = 0.0, max_ddf = 0.0, max_h = 0.0;
    for (int mi = 0; mi < env.M; mi += 5) {
        for (int node = 0; node < env.grid.node_count(); node += 3) {
            const std::size_t at = env.index(mi, node);
            max_df = std::max(max_df, std::abs(env.F[at] - fdp.f_prime.F[at]));
            max_ddf = std::max(max_ddf, (env.dFdx[at] - fdp.f_prime.dFdx[at]).norm());
            max_h = std::max(max_h, fdp.h_displacement[at].norm());
        }
    }
    CHECK(max_df < 1e-5);
    CHECK(max_ddf < 1e-4);
    CHECK(max_h < 1e-6);
    // and F' here is the true Euclidean envelope
    const int node = env.grid.node_index(4, 11);
    const Point x = env.grid.node(node);
    CHECK(fdp.f_prime.F[env.index(7, node)] ==
          Catch::Approx((x - env.s_point(7)).norm()).margin(1e-6));
}

TEST_CASE("F'' boundary identity is exact by construction") {
    Metric eu = euclidean_metric();
    Metric up = eu.conformally_scaled(ScalarField::constant(1e-2));
    auto fdp = build_f_double_prime(eu, up, 0.2, small_fdp());
    const auto& env = fdp.f_dprime;
    const int jb = env.grid.rings;
    for (int mi = 0; mi < env.M; ++mi)
        for (int k = 0; k < env.grid.angles; ++k) {
            const std::size_t at = env.index(mi, env.grid.node_index(jb, k));
            CHECK(env.F[at] == fdp.f_prime.F[at]);
        }
}

TEST_CASE("majorization for the scaled metric: ratio is exactly 1 + eps") {
    const double eps = 1e-2;
    Metric eu = euclidean_metric();
    Metric up = eu.conformally_scaled(ScalarField::constant(eps));
    auto fdp = build_f_double_prime(eu, up, 0.2, small_fdp());
    auto rep = majorization_check(fdp, eu, up, 5, 8, 40, 4e-3, bulk());
    CHECK(rep.bd_margin > 0.0);
    CHECK(rep.violations == 0);
    // sup-reconstruction approaches 1 + eps from below (discrete sup)
    CHECK(rep.min_sup_value > 1.0 + eps - 4e-3);
    CHECK(rep.min_sup_value <= 1.0 + eps + 1e-6);
    CHECK(rep.max_ratio_error < 4e-3);

    // volume via the F'' boundary restriction equals vol(phi') (Lemma 2.2
    // route): (1+eps)^2 pi
    const auto vol = ht_volume_envelope_boundary(restrict_to_boundary(fdp.f_dprime));
    CHECK(vol.value == Catch::Approx((1 + eps) * (1 + eps) * kPi).epsilon(1e-2));
}

TEST_CASE("majorization for a nonnegative conformal bump") {
    Metric eu = euclidean_metric();
    ScalarField h({ScalarAtom::gaussian(1.0, {0.2, 0.1}, 0.45)});
    Metric up = conformal_metric(eu, h, 1e-2);
    auto fdp = build_f_double_prime(eu, up, 0.2, small_fdp());
    auto rep = majorization_check(fdp, eu, up, 5, 8, 40, 4e-3, bulk());
    CHECK(rep.bd_margin > -1e-9);
    CHECK(rep.violations == 0);
    CHECK(rep.min_sup_value >= 1.0 - 4e-3);
    CHECK(rep.max_ratio_error < 4e-3);
}

TEST_CASE("monotonicity trials run and honor the theorem") {
    TrialSpec spec;
    spec.fs = bulk();
    int valid = 0, ordered_active = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        auto rec = monotonicity_trial(spec, seed);
        if (!rec.valid) continue;
        ++valid;
        if (rec.margin >= 1e-6) {
            ++ordered_active;
            CHECK(rec.dvol >= -(rec.vol_error + 1e-9));
        }
    }
    CHECK(valid >= 4);
    CHECK(ordered_active >= 1);
}

TEST_CASE("smoothness probe: flat disc and cap") {
    Metric eu = euclidean_metric();
    PsiContext flat{eu, eu, FlowSettings{}};
    auto pr = psi_smoothness_probe(flat, 0.7, 10, 1e-3);
    for (double l : pr.lambda) CHECK(l == Catch::Approx(1.0).margin(1e-7));
    CHECK(pr.max_second_diff < 10.0);
    CHECK(pr.max_psi_second_diff < 10.0);
    REQUIRE(pr.branch_gap.size() == 3);
    CHECK(pr.branch_gap[1] < 0.3 * pr.branch_gap[0]);
    CHECK(pr.branch_gap[2] < 0.3 * pr.branch_gap[1]);
    CHECK(pr.branch_gap.back() < 1e-3);

    Metric cap = spherical_cap_metric(kPi / 3);
    PsiContext cx{eu, cap, FlowSettings{}};
    auto pc = psi_smoothness_probe(cx, 2.1, 10, 1e-3);
    CHECK(pc.max_second_diff < 50.0);
    CHECK(pc.max_psi_second_diff < 50.0);
    REQUIRE(pc.branch_gap.size() == 3);
    CHECK(pc.branch_gap[1] < 0.3 * pc.branch_gap[0]);
    CHECK(pc.branch_gap[2] < 0.3 * pc.branch_gap[1]);
    CHECK(pc.branch_gap.back() < 1e-3);
}
