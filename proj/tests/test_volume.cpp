#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "finsler/volume.hpp"

using namespace finsler;

namespace {

FlowSettings bulk() {
    FlowSettings fs;
    fs.step = 4e-3;
    return fs;
}

double cap_bd(double a0, double dth) {
    return std::acos(std::cos(a0) * std::cos(a0) +
                     std::sin(a0) * std::sin(a0) * std::cos(dth));
}

const double kCapArea = kTwoPi * (1.0 - std::cos(kPi / 3));  // = pi for alpha0 = pi/3

BoundaryDistanceTable synthetic_table(int N, const std::function<double(double)>& profile) {
    BoundaryDistanceTable t;
    t.N = N;
    t.radius = 1.0;
    t.values.assign(static_cast<std::size_t>(N) * N, 0.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != j) t.at(i, j) = profile(kTwoPi * (((j - i) % N + N) % N) / N);
    return t;
}

ScalarField bump_u() {
    return ScalarField({ScalarAtom::gaussian(0.08, {0.25, -0.1}, 0.5)});
}

/// Fine 2-d quadrature of a smooth density over the unit disc (test oracle).
double disc_integral(const std::function<double(Point)>& f, int nr = 200, int nt = 400) {
    std::vector<double> rn, rw;
    finsler::detail::gauss_legendre_01(nr, rn, rw);
    double acc = 0.0;
    for (int i = 0; i < nr; ++i) {
        double ring = 0.0;
        for (int j = 0; j < nt; ++j) ring += f(point_on_circle(rn[i], kTwoPi * j / nt));
        acc += rw[i] * rn[i] * ring * (kTwoPi / nt);
    }
    return acc;
}

}  // namespace

TEST_CASE("fiber volume: Euclidean, Randers, cap, conformal, Riemannian") {
    CHECK(ht_volume_fiber(euclidean_metric()).value == Catch::Approx(kPi).margin(1e-6));

    // dual ball of a constant-beta Randers metric is the translated disc
    CHECK(ht_volume_fiber(randers_constant_metric({0.5, 0.0})).value ==
          Catch::Approx(kPi).margin(1e-4));

    CHECK(ht_volume_fiber(spherical_cap_metric(kPi / 3)).value ==
          Catch::Approx(kCapArea).margin(1e-4));

    Metric conf = conformal_euclidean_metric(bump_u());
    const double want = disc_integral(
        [&](Point x) { return std::exp(2.0 * bump_u().value(x)); });
    CHECK(ht_volume_fiber(conf).value == Catch::Approx(want).epsilon(1e-4));

    Metric riem = euclidean_metric()
                      .with_coefficient_bump(Metric::CoefficientTarget::g11,
                                             ScalarAtom::gaussian(0.3, {0.2, -0.1}, 0.5))
                      .with_coefficient_bump(Metric::CoefficientTarget::g22,
                                             ScalarAtom::gaussian(-0.2, {-0.3, 0.25}, 0.6));
    const auto& core = std::get<RiemannianCore>(riem.core());
    const double riem_area =
        disc_integral([&](Point x) { return std::sqrt(core.g(x).det()); });
    CHECK(ht_volume_fiber(riem).value == Catch::Approx(riem_area).epsilon(1e-4));
}

TEST_CASE("metric monotonicity of the fiber volume") {
    Metric base = spherical_cap_metric(kPi / 3);
    Metric bigger = conformal_metric(base, boundary_vanishing_poly(), 1e-2);
    const auto v0 = ht_volume_fiber(base);
    const auto v1 = ht_volume_fiber(bigger);
    CHECK(v1.value >= v0.value - v0.error_estimate - v1.error_estimate);
}

TEST_CASE("envelope-boundary volume on a synthetic exact Euclidean table") {
    const int M = 128, K = 96;
    const double delta = 0.2;
    SBoundaryTable t;
    t.M = M;
    t.K = K;
    t.delta = delta;
    t.F.resize(static_cast<std::size_t>(M) * K);
    t.dF_dtheta.resize(t.F.size());
    t.dF_dsigma.resize(t.F.size());
    for (int mi = 0; mi < M; ++mi) {
        const Point p = t.s_point(mi);
        for (int k = 0; k < K; ++k) {
            const Point x = t.boundary_point(k);
            const Vec2 d = x - p;
            const Vec2 u = unit(d);
            t.F[t.idx(mi, k)] = d.norm();
            t.dF_dtheta[t.idx(mi, k)] = dot(u, perp(x.as_vec()));
            t.dF_dsigma[t.idx(mi, k)] = dot(-u, perp(p.as_vec()));
        }
    }
    const auto res = ht_volume_envelope_boundary(t);
    CHECK(res.value == Catch::Approx(kPi).margin(1e-10));
}

TEST_CASE("envelope-boundary volume from solver tables") {
    // dF/dsigma carries an O((2pi/M)^2) centered-difference error; at the
    // default M = 256 this lands near 8e-4, here M = 96 keeps the test fast
    const auto e = ht_volume_envelope_boundary(
        boundary_envelope(euclidean_metric(), 0.2, 96, 48, bulk()));
    CHECK(e.value == Catch::Approx(kPi).margin(8e-3));

    const auto c = ht_volume_envelope_boundary(
        boundary_envelope(spherical_cap_metric(kPi / 3), 0.2, 96, 48, bulk()));
    CHECK(c.value == Catch::Approx(kCapArea).margin(1e-2));
}

TEST_CASE("bd-formula volume on synthetic closed-form tables") {
    auto euclid = [](double s) { return 2.0 * std::sin(0.5 * s); };
    auto cap = [](double s) { return cap_bd(kPi / 3, s); };
    const Covec2 beta{0.5, 0.0};

    CHECK(volume_from_bd(synthetic_table(128, euclid)).value ==
          Catch::Approx(kPi).margin(6e-4));
    const auto fine = volume_from_bd(synthetic_table(256, euclid));
    CHECK(fine.value == Catch::Approx(kPi).margin(1.6e-4));
    CHECK(fine.error_estimate > std::abs(fine.value - kPi) / 10.0);

    CHECK(volume_from_bd(synthetic_table(256, cap)).value ==
          Catch::Approx(kCapArea).margin(3e-4));

    // asymmetric Randers table, volume still pi
    BoundaryDistanceTable rt;
    rt.N = 256;
    rt.radius = 1.0;
    rt.values.assign(256 * 256, 0.0);
    for (int i = 0; i < 256; ++i)
        for (int j = 0; j < 256; ++j)
            if (i != j) {
                const Vec2 d = rt.node(j) - rt.node(i);
                rt.at(i, j) = d.norm() + dot(beta, d);
            }
    CHECK(volume_from_bd(rt).value == Catch::Approx(kPi).margin(3e-4));
}

TEST_CASE("bd-formula volume from a computed table") {
    auto t = boundary_distance_table(euclidean_metric(), 64, bulk());
    CHECK(volume_from_bd(t).value == Catch::Approx(kPi).margin(3e-3));
}

TEST_CASE("rotation-invariant formula on analytic profiles") {
    const int n = 512;
    std::vector<double> f0(n + 1), g0(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double th = kPi * i / n;
        f0[i] = 2.0 * std::sin(0.5 * th);
        g0[i] = cap_bd(kPi / 3, th);
    }
    CHECK(volume_rotinv(f0).value == Catch::Approx(kPi).epsilon(1e-3));
    CHECK(volume_rotinv(g0).value == Catch::Approx(kCapArea).epsilon(1e-3));
}

TEST_CASE("rotinv agrees with the torus formula on a rotation-invariant table") {
    auto cap = [](double s) { return cap_bd(kPi / 3, s); };
    auto table = synthetic_table(128, cap);
    const auto a = volume_from_bd(table);
    const auto b = volume_rotinv(rotinv_profile(table));
    CHECK(a.value == Catch::Approx(b.value).epsilon(1e-3));
}

TEST_CASE("Example 2.3 non-monotonicity witness") {
    // f0 <= g0, both increasing and subadditive, yet vol(f0) > vol(g0):
    // f0 concentrates its slope, g0 is the taut concave majorant.
    const double tstar = 0.893;
    const double slope = 1.0 + 0.6 * std::cos(2.0 * tstar);
    auto f = [](double t) { return t + 0.3 * std::sin(2.0 * t); };
    auto g = [&](double t) {
        return t <= tstar ? f(t) : f(tstar) + slope * (t - tstar);
    };
    const int n = 512;
    std::vector<double> f0(n + 1), g0(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double th = kPi * i / n;
        f0[i] = f(th);
        g0[i] = g(th);
    }
    // witness validity: domination, monotone growth, triangle inequality
    for (int i = 0; i <= n; ++i) {
        CHECK(g0[i] >= f0[i] - 1e-12);
        if (i > 0) {
            CHECK(f0[i] > f0[i - 1]);
            CHECK(g0[i] > g0[i - 1]);
        }
    }
    for (int i = 1; i + 1 <= n; i += 7) {
        for (int j = 1; i + j <= n; j += 11) {
            CHECK(f0[i] + f0[j] >= f0[i + j] - 1e-12);
            CHECK(g0[i] + g0[j] >= g0[i + j] - 1e-12);
        }
    }
    const double vf = volume_rotinv(f0).value;
    const double vg = volume_rotinv(g0).value;
    CHECK(vf > vg + 0.3);
}

TEST_CASE("rotation-invariant boundary distances are concave") {
    // analytic profiles
    const int n = 256;
    for (auto profile : {+[](double t) { return 2.0 * std::sin(0.5 * t); },
                         +[](double t) { return cap_bd(kPi / 3, t); }}) {
        std::vector<double> f0(n + 1);
        for (int i = 0; i <= n; ++i) f0[i] = profile(kPi * i / n);
        for (int i = 1; i < n; ++i)
            CHECK(f0[i + 1] - 2.0 * f0[i] + f0[i - 1] <= 1e-9);
    }
    // computed cap table
    auto t = boundary_distance_table(spherical_cap_metric(kPi / 3), 64, bulk());
    auto prof = rotinv_profile(t);
    for (std::size_t i = 1; i + 1 < prof.size(); ++i)
        CHECK(prof[i + 1] - 2.0 * prof[i] + prof[i - 1] <= 1e-9);
}
