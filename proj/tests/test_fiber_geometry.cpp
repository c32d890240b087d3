#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "finsler/metric.hpp"

using namespace finsler;

namespace {

Metric bumpy_riemannian() {
    Metric m = euclidean_metric();
    m = m.with_coefficient_bump(Metric::CoefficientTarget::g11,
                                ScalarAtom::gaussian(0.3, {0.2, -0.1}, 0.5));
    m = m.with_coefficient_bump(Metric::CoefficientTarget::g22,
                                ScalarAtom::gaussian(-0.2, {-0.3, 0.25}, 0.6));
    m = m.with_coefficient_bump(Metric::CoefficientTarget::g12,
                                ScalarAtom::gaussian(0.1, {0.0, 0.4}, 0.7));
    return m;
}

std::mt19937_64 rng(20250809);

Point random_point(double rmax = 1.1) {
    std::uniform_real_distribution<double> ur(0.0, rmax), ua(0.0, kTwoPi);
    return point_on_circle(ur(rng) * 0.999, ua(rng));
}

Vec2 random_vec() {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Vec2 v{u(rng), u(rng)};
    return v.norm() < 1e-3 ? Vec2{1.0, 0.3} : v;
}

}  // namespace

TEST_CASE("Euclidean norm and dual are the Euclidean ones") {
    Metric m = euclidean_metric();
    CHECK(m.norm({0.1, 0.2}, {3, 4}) == Catch::Approx(5.0).epsilon(1e-14));
    CHECK(m.dual_norm({0.0, 0.0}, {0, 2}) == Catch::Approx(2.0).epsilon(1e-14));
    Covec2 a = m.legendre({0.3, 0.0}, {1, 0});
    CHECK(a.x == Catch::Approx(1.0));
    CHECK(std::abs(a.y) < 1e-15);
}

TEST_CASE("Randers constant one-form: non-reversibility and dual value") {
    Metric m = randers_constant_metric({0.5, 0.0});
    CHECK(m.norm({0, 0}, {1, 0}) == Catch::Approx(1.5).epsilon(1e-14));
    CHECK(m.norm({0, 0}, {-1, 0}) == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(m.dual_norm({0, 0}, {1, 0}) == Catch::Approx(2.0 / 3.0).epsilon(1e-13));
    // phi-unit vector along +x is (2/3, 0); its Legendre image is phi*-unit
    Vec2 v{2.0 / 3.0, 0.0};
    Covec2 a = m.legendre({0, 0}, v);
    CHECK(m.dual_norm({0, 0}, a) == Catch::Approx(1.0).epsilon(1e-13));
    CHECK(pairing(a, v) == Catch::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("conformal weight with u = 0 reduces to Euclidean") {
    Metric m = conformal_euclidean_metric(ScalarField::zero());
    for (int i = 0; i < 100; ++i) {
        Point x = random_point();
        Vec2 v = random_vec();
        CHECK(m.norm(x, v) == Catch::Approx(v.norm()).epsilon(1e-14));
    }
}

TEST_CASE("conformal dual norm is e^{-u} |alpha|") {
    ScalarField u({ScalarAtom::gaussian(0.2, {0.1, 0.1}, 0.5)});
    Metric m = conformal_euclidean_metric(u);
    for (int i = 0; i < 50; ++i) {
        Point x = random_point();
        Covec2 a = random_vec();
        const double expect = std::exp(-u.value(x)) * a.norm();
        CHECK(m.dual_norm(x, a) == Catch::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("homogeneity at t in {0.5, 2, 10}") {
    for (const Metric& m : {euclidean_metric(), randers_constant_metric({0.3, 0.2}),
                            spherical_cap_metric(kPi / 3), bumpy_riemannian()}) {
        for (int i = 0; i < 40; ++i) {
            Point x = random_point();
            Vec2 v = random_vec();
            const double base = m.norm(x, v);
            for (double t : {0.5, 2.0, 10.0}) {
                CHECK(std::abs(m.norm(x, v * t) - t * base) <= 1e-12 * t * base);
            }
        }
    }
}

TEST_CASE("Legendre duality identities on random samples") {
    for (const Metric& m : {euclidean_metric(), randers_constant_metric({0.5, 0.0}),
                            spherical_cap_metric(kPi / 3), bumpy_riemannian()}) {
        for (int i = 0; i < 100; ++i) {
            Point x = random_point();
            Vec2 v = random_vec();
            const double phi = m.norm(x, v);
            Covec2 a = m.legendre(x, v);
            CHECK(pairing(a, v) == Catch::Approx(phi * phi).epsilon(1e-11));
            CHECK(m.dual_norm(x, a) == Catch::Approx(phi).epsilon(1e-11));
            // duality: phi*(legendre(v) / phi(v)) = 1
            CHECK(m.dual_norm(x, a / phi) == Catch::Approx(1.0).margin(1e-8));
        }
    }
}

TEST_CASE("legendre_inverse round trip under 1e-8") {
    for (const Metric& m : {euclidean_metric(), randers_constant_metric({0.5, 0.0}),
                            spherical_cap_metric(kPi / 3), bumpy_riemannian()}) {
        for (int i = 0; i < 250; ++i) {
            Point x = random_point();
            Covec2 a = random_vec();
            Vec2 v = m.legendre_inverse(x, a);
            Covec2 back = m.legendre(x, v);
            CHECK((back - a).norm() <= 1e-8 * a.norm());
            // pairing extremality
            CHECK(pairing(a, v) ==
                  Catch::Approx(m.dual_norm(x, a) * m.norm(x, v)).epsilon(1e-9));
        }
    }
}

TEST_CASE("Randers legendre_inverse of a dual-unit covector is phi-unit") {
    Metric m = randers_constant_metric({0.5, 0.0});
    Covec2 a{1.0, 0.0};
    const double s = m.dual_norm({0, 0}, a);
    Vec2 v = m.legendre_inverse({0, 0}, a / s);
    CHECK(m.norm({0, 0}, v) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(v.x == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(std::abs(v.y) < 1e-12);
}

TEST_CASE("Riemannian specialization matches matrix formulas") {
    Metric m = bumpy_riemannian();
    const auto& core = std::get<RiemannianCore>(m.core());
    for (int i = 0; i < 100; ++i) {
        Point x = random_point();
        Vec2 v = random_vec();
        Covec2 a = random_vec();
        const Sym2 g = core.g(x);
        CHECK(m.norm(x, v) == Catch::Approx(std::sqrt(g.quad(v))).epsilon(1e-10));
        CHECK(m.dual_norm(x, a) ==
              Catch::Approx(std::sqrt(g.inverse().quad(a))).epsilon(1e-10));
        // legendre is g(v, .): pairing identity for unit vectors
        Vec2 un = v / m.norm(x, v);
        CHECK(pairing(m.legendre(x, un), un) == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("dual norm agrees with the fiber-angle maximizer oracle") {
    for (const Metric& m : {euclidean_metric(), randers_constant_metric({0.5, 0.0}),
                            spherical_cap_metric(kPi / 3), bumpy_riemannian()}) {
        for (int i = 0; i < 25; ++i) {
            Point x = random_point();
            Covec2 a = random_vec();
            const double direct = dual_norm_fiber_opt(m, x, a);
            CHECK(m.dual_norm(x, a) == Catch::Approx(direct).margin(1e-8));
        }
    }
}

TEST_CASE("domain and zero-argument errors") {
    Metric m = euclidean_metric(1.2);
    CHECK_THROWS_AS(m.norm({1.5, 0.0}, {1, 0}), DomainError);
    CHECK_THROWS_AS(m.legendre({0, 0}, {0, 0}), DomainError);
    CHECK_THROWS_AS(m.legendre_inverse({0, 0}, {0, 0}), DomainError);
}

TEST_CASE("convexity report: Euclidean Hessian eigenvalue is 2") {
    auto rep = convexity_report(euclidean_metric(), 16, 32);
    CHECK(rep.min_eigenvalue == Catch::Approx(2.0).margin(1e-5));
    CHECK(rep.convex());
}

TEST_CASE("convexity decreasing in |beta| and lost for a huge bump") {
    double prev = std::numeric_limits<double>::infinity();
    for (double b : {0.3, 0.6, 0.9}) {
        auto rep = convexity_report(randers_constant_metric({b, 0.0}), 32, 16);
        CHECK(rep.min_eigenvalue > 0.0);
        CHECK(rep.min_eigenvalue < prev);
        prev = rep.min_eigenvalue;
    }
    // a bump deep enough to destroy positive-definiteness of g
    Metric bad = euclidean_metric().with_coefficient_bump(
        Metric::CoefficientTarget::g11, ScalarAtom::gaussian(-1.5, {0.0, 0.0}, 0.4));
    auto rep = convexity_report(bad, 16, 64);
    CHECK(rep.min_eigenvalue < 0.0);
}

TEST_CASE("validation rejects an over-strong Randers one-form") {
    CHECK_THROWS_AS(randers_constant_metric({1.1, 0.0}).validate(), ValidationError);
}
