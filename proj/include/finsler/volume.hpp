#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/envelope.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// ht Holmes-Thompson volume result; methods agree within their combined
/// error estimates on simple metrics.
struct VolumeResult {
    double value = 0.0;
    std::string method;           // fiber | envelope-boundary | bd-formula | rot-invariant
    int resolution_base = 0;      // meaning depends on the method
    int resolution_angular = 0;
    int resolution_fiber = 0;
    double error_estimate = 0.0;
};

namespace detail {

/// Gauss-Legendre nodes/weights on [0, 1], by Newton iteration on P_n.
inline void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * pp * pp);
    }
}

/// Area of the dual unit ball at x by the star-body polar formula
/// (1/2) (integral of phi*^{-2} over the fiber circle), trapezoid in the
/// fiber angle.
inline double dual_ball_area(const Metric& m, Point x, int fiber_samples) {
    double acc = 0.0;
    for (int k = 0; k < fiber_samples; ++k) {
        const double s = m.dual_norm(x, dir(kTwoPi * k / fiber_samples));
        acc += 1.0 / (s * s);
    }
    return 0.5 * acc * kTwoPi / fiber_samples;
}

inline double fiber_volume_pass(const Metric& m, int base_radial, int base_angular,
                                int fiber_samples) {
    std::vector<double> rn, rw;
    gauss_legendre_01(base_radial, rn, rw);
    double acc = 0.0;
    for (int i = 0; i < base_radial; ++i) {
        const double r = rn[i];
        double ring = 0.0;
        for (int j = 0; j < base_angular; ++j)
            ring += dual_ball_area(m, point_on_circle(r, kTwoPi * j / base_angular), fiber_samples);
        acc += rw[i] * r * ring * (kTwoPi / base_angular);
    }
    return acc / kPi;  // omega_2 = pi
}

}  // namespace detail

/// Direct route: vol = (1/pi) integral over D of Area(B*_x).
inline VolumeResult ht_volume_fiber(const Metric& m, int base_radial = 48,
                                    int base_angular = 192, int fiber_samples = 128) {
    VolumeResult res;
    res.method = "fiber";
    res.resolution_base = base_radial;
    res.resolution_angular = base_angular;
    res.resolution_fiber = fiber_samples;
    res.value = detail::fiber_volume_pass(m, base_radial, base_angular, fiber_samples);
    const double coarse =
        detail::fiber_volume_pass(m, base_radial / 2, base_angular / 2, fiber_samples / 2);
    res.error_estimate = std::abs(res.value - coarse);
    return res;
}

/// Lemma 2.2 route (2-d specialization, Example 2.3):
/// vol = -(1/2pi) (double integral of dF/dtheta . dF/dsigma over S x dD).
inline VolumeResult ht_volume_envelope_boundary(const SBoundaryTable& t) {
    auto pass = [&](int stride) {
        const int M = t.M / stride, K = t.K / stride;
        const double dth = kTwoPi / K, dsg = kTwoPi / M;
        double acc = 0.0;
        for (int mi = 0; mi < M; ++mi) {
            for (int k = 0; k < K; ++k) {
                double fs;
                if (stride == 1) {
                    fs = t.dF_dsigma[t.idx(mi, k)];
                } else {
                    const int mp = ((mi + 1) % M) * stride, mm = ((mi + M - 1) % M) * stride;
                    fs = (t.F[t.idx(mp, k * stride)] - t.F[t.idx(mm, k * stride)]) / (2.0 * dsg);
                }
                acc += t.dF_dtheta[t.idx(mi * stride, k * stride)] * fs;
            }
        }
        return -acc * dth * dsg / kTwoPi;
    };
    VolumeResult res;
    res.method = "envelope-boundary";
    res.resolution_base = t.M;
    res.resolution_angular = t.K;
    res.value = pass(1);
    if (t.M % 2 == 0 && t.K % 2 == 0) res.error_estimate = std::abs(res.value - pass(2));
    return res;
}

/// Eq. (e-vol2): vol = -(1/2pi) (integral over dD x dD of df/dx . df/dy).
/// Centered differences away from the diagonal; the band |i-j| <= 1 uses
/// one-sided 3-point stencils pointing away from the diagonal; on the
/// diagonal itself, the two side-consistent products are averaged (the
/// integrand's a.e. limits from both sides).
inline VolumeResult volume_from_bd(const BoundaryDistanceTable& t) {
    const int N = t.N;
    if (N < 64) throw ValidationError("volume_from_bd: table must have N >= 64");
    auto pass = [&](int stride) {
        const int n = N / stride;
        const double d = kTwoPi / n;
        auto f = [&](int i, int j) {
            return t.at(((i % n) + n) % n * stride, ((j % n) + n) % n * stride);
        };
        auto dx_c = [&](int i, int j) { return (f(i + 1, j) - f(i - 1, j)) / (2 * d); };
        auto dy_c = [&](int i, int j) { return (f(i, j + 1) - f(i, j - 1)) / (2 * d); };
        auto dx_b = [&](int i, int j) { return (3 * f(i, j) - 4 * f(i - 1, j) + f(i - 2, j)) / (2 * d); };
        auto dx_f = [&](int i, int j) { return (-3 * f(i, j) + 4 * f(i + 1, j) - f(i + 2, j)) / (2 * d); };
        auto dy_b = [&](int i, int j) { return (3 * f(i, j) - 4 * f(i, j - 1) + f(i, j - 2)) / (2 * d); };
        auto dy_f = [&](int i, int j) { return (-3 * f(i, j) + 4 * f(i, j + 1) - f(i, j + 2)) / (2 * d); };
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const int mm = ((j - i) % n + n) % n;
                double term;
                if (mm == 0) {
                    term = 0.5 * (dx_b(i, j) * dy_f(i, j) + dx_f(i, j) * dy_b(i, j));
                } else if (mm == 1) {
                    term = dx_b(i, j) * dy_f(i, j);
                } else if (mm == n - 1) {
                    term = dx_f(i, j) * dy_b(i, j);
                } else {
                    term = dx_c(i, j) * dy_c(i, j);
                }
                acc += term;
            }
        }
        return -acc * d * d / kTwoPi;
    };
    VolumeResult res;
    res.method = "bd-formula";
    res.resolution_base = N;
    res.value = pass(1);
    if (N % 2 == 0) res.error_estimate = std::abs(res.value - pass(2));
    return res;
}

/// Rotation-invariant reduction of Example 2.3: vol = 2 (integral over
/// [0, pi] of (df0/dt)^2), trapezoid over squared difference quotients.
inline VolumeResult volume_rotinv(const std::vector<double>& f0) {
    const int n = static_cast<int>(f0.size()) - 1;
    if (n < 8) throw ValidationError("volume_rotinv: need at least 9 samples on [0, pi]");
    if (std::abs(f0.front()) > 1e-12)
        throw ValidationError("volume_rotinv: f0(0) must vanish");
    auto pass = [&](int stride) {
        const int np = n / stride;
        const double d = kPi / np;
        auto f = [&](int i) { return f0[static_cast<std::size_t>(i) * stride]; };
        auto deriv = [&](int i) {
            if (i == 0) return (-3 * f(0) + 4 * f(1) - f(2)) / (2 * d);
            if (i == np) return (3 * f(np) - 4 * f(np - 1) + f(np - 2)) / (2 * d);
            return (f(i + 1) - f(i - 1)) / (2 * d);
        };
        double acc = 0.0;
        for (int i = 0; i <= np; ++i) {
            const double g = deriv(i) * deriv(i);
            acc += (i == 0 || i == np) ? 0.5 * g : g;
        }
        return 2.0 * acc * d;
    };
    VolumeResult res;
    res.method = "rot-invariant";
    res.resolution_base = n;
    res.value = pass(1);
    if (n % 2 == 0) res.error_estimate = std::abs(res.value - pass(2));
    return res;
}

/// Profile f0(t) = bd(x_0, x_t) extracted from a rotation-invariant table,
/// t on [0, pi] (requires even N).
inline std::vector<double> rotinv_profile(const BoundaryDistanceTable& t) {
    std::vector<double> f0(t.N / 2 + 1);
    for (int j = 0; j <= t.N / 2; ++j) f0[j] = t.at(0, j);
    return f0;
}

}  // namespace finsler
