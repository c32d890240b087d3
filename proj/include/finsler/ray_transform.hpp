#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "finsler/envelope.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/metric.hpp"
#include "finsler/volume.hpp"

namespace finsler {

/// One entry of a sinogram: the transform of f along the maximal geodesic
/// between two boundary points.
struct RaySample {
    int a_index = 0;
    int b_index = 0;
    double length = 0.0;
    double value = 0.0;
};

/// I_phi f along the geodesic from a to b (arc-length parameter).
inline double ray_transform(const Metric& m, const ScalarField& f, Point a, Point b,
                            double r = 1.0, const FlowSettings& fs = {}) {
    Geodesic g = connect(m, a, b, r, fs);
    return integrate_along(g, [&](Point x) { return f.value(x); });
}

/// Full sinogram over the N-point boundary grid (ordered pairs).
inline std::vector<RaySample> sinogram(const Metric& m, const ScalarField& f, int N,
                                       const FlowSettings& fs = {}) {
    std::vector<RaySample> rows;
    rows.reserve(static_cast<std::size_t>(N) * (N - 1));
    for (int i = 0; i < N; ++i) {
        const Point a = point_on_circle(1.0, kTwoPi * i / N);
        std::optional<double> guess;
        for (int step = 1; step < N; ++step) {
            const int j = (i + step) % N;
            const Point b = point_on_circle(1.0, kTwoPi * j / N);
            auto res = connect_detailed(m, a, b, 1.0, fs, guess);
            guess = res.initial_angle;
            rows.push_back({i, j, res.geodesic.length,
                            integrate_along(res.geodesic,
                                            [&](Point x) { return f.value(x); })});
        }
    }
    return rows;
}

// ---- first-order boundary-distance variation --------------------------------

struct VariationPair {
    Point a, b;
    double base_length = 0.0;
    double transform = 0.0;          // I_phi f along the base geodesic
    std::vector<double> remainder;   // r(eps) = d_eps - T - eps I
    double exponent = 0.0;           // fitted q in |r| ~ C eps^q (inf if r ~ 0)
};

struct VariationReport {
    std::vector<double> epsilons;
    std::vector<VariationPair> pairs;
    double min_exponent = 0.0;
    double max_remainder = 0.0;  // signed max; the old geodesic is always admissible
};

/// Checks d_{phi_eps}(a,b) = d_phi(a,b) + eps I_phi f + O(eps^2) with the
/// remainder nonpositive (the unperturbed geodesic is a competitor).
inline VariationReport distance_variation_check(const Metric& m, const ScalarField& f,
                                                const std::vector<std::pair<Point, Point>>& pairs,
                                                const std::vector<double>& epsilons,
                                                const FlowSettings& fs = {}) {
    VariationReport rep;
    rep.epsilons = epsilons;
    rep.min_exponent = std::numeric_limits<double>::infinity();
    rep.max_remainder = -std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : pairs) {
        VariationPair pr;
        pr.a = a;
        pr.b = b;
        auto base = connect_detailed(m, a, b, 1.0, fs);
        pr.base_length = base.geodesic.length;
        pr.transform = integrate_along(base.geodesic, [&](Point x) { return f.value(x); });
        for (double eps : epsilons) {
            Metric pert = conformal_metric(m, f, eps);
            const double d_eps = geodesic_distance(pert, a, b, 1.0, fs, base.initial_angle);
            const double r = d_eps - pr.base_length - eps * pr.transform;
            pr.remainder.push_back(r);
            rep.max_remainder = std::max(rep.max_remainder, r);
        }
        // least-squares slope of log|r| against log eps
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (std::size_t k = 0; k < epsilons.size(); ++k) {
            if (std::abs(pr.remainder[k]) < 1e-13) continue;
            const double lx = std::log(epsilons[k]), ly = std::log(std::abs(pr.remainder[k]));
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++n;
        }
        pr.exponent = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx)
                             : std::numeric_limits<double>::infinity();
        rep.min_exponent = std::min(rep.min_exponent, pr.exponent);
        rep.pairs.push_back(std::move(pr));
    }
    return rep;
}

// ---- the injectivity experiment ----------------------------------------------

struct InjectivityReport {
    double eps = 0.0;
    double vol_base = 0.0;
    double vol_plus = 0.0;   // vol(D, phi_{+eps})
    double vol_minus = 0.0;
    double int_f2 = 0.0;             // integral of f^2 d vol_phi
    double B = 0.0;                  // integral of ((1+eps f)^2 + (1-eps f)^2 - 2) d vol_phi
    double identity_residual = 0.0;  // max |(1+ef)^2 + (1-ef)^2 - 2 - 2 e^2 f^2| on the grid
    double max_transform = 0.0;      // max |I_phi f| over the pair grid
    double empirical_constant = 0.0; // max |I| / sqrt(int f^2)
    int pair_grid = 0;
};

/// Integral of a density against the Holmes-Thompson area element of m.
inline double integrate_dvol(const Metric& m, const std::function<double(Point)>& f,
                             int base_radial = 96, int base_angular = 192,
                             int fiber_samples = 128) {
    std::vector<double> rn, rw;
    detail::gauss_legendre_01(base_radial, rn, rw);
    double acc = 0.0;
    for (int i = 0; i < base_radial; ++i) {
        double ring = 0.0;
        for (int j = 0; j < base_angular; ++j) {
            const Point x = point_on_circle(rn[i], kTwoPi * j / base_angular);
            ring += f(x) * detail::dual_ball_area(m, x, fiber_samples) / kPi;
        }
        acc += rw[i] * rn[i] * ring * (kTwoPi / base_angular);
    }
    return acc;
}

/// Quantitative run of the injectivity chain at fixed (f, eps): the volume
/// differences of the conformal family, the exact n = 2 pointwise identity,
/// and the size of the transform of f over a boundary pair grid.
inline InjectivityReport injectivity_experiment(const Metric& m, const ScalarField& f,
                                                double eps, int pair_grid = 16,
                                                const FlowSettings& fs = {}) {
    InjectivityReport rep;
    rep.eps = eps;
    rep.pair_grid = pair_grid;
    rep.vol_base = ht_volume_fiber(m).value;
    rep.vol_plus = ht_volume_fiber(conformal_metric(m, f, eps)).value;
    rep.vol_minus = ht_volume_fiber(conformal_metric(m, f, -eps)).value;
    rep.int_f2 = integrate_dvol(m, [&](Point x) {
        const double v = f.value(x);
        return v * v;
    });
    rep.B = integrate_dvol(m, [&](Point x) {
        const double v = eps * f.value(x);
        return (1 + v) * (1 + v) + (1 - v) * (1 - v) - 2.0;
    });
    // pointwise n = 2 identity on a sample grid
    for (int i = 0; i < 40; ++i) {
        const Point x = point_on_circle(std::sqrt((i + 0.5) / 40.0), 2.39996 * i);
        const double v = eps * f.value(x);
        const double lhs = (1 + v) * (1 + v) + (1 - v) * (1 - v) - 2.0;
        rep.identity_residual =
            std::max(rep.identity_residual, std::abs(lhs - 2.0 * v * v));
    }
    for (int i = 0; i < pair_grid; ++i) {
        const Point a = point_on_circle(1.0, kTwoPi * i / pair_grid);
        std::optional<double> guess;
        for (int s = 1; s < pair_grid; ++s) {
            const int j = (i + s) % pair_grid;
            const Point b = point_on_circle(1.0, kTwoPi * j / pair_grid);
            auto res = connect_detailed(m, a, b, 1.0, fs, guess);
            guess = res.initial_angle;
            const double val =
                integrate_along(res.geodesic, [&](Point x) { return f.value(x); });
            rep.max_transform = std::max(rep.max_transform, std::abs(val));
        }
    }
    rep.empirical_constant = rep.max_transform / std::sqrt(rep.int_f2);
    return rep;
}

}  // namespace finsler
