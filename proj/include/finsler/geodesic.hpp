#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// Integrator knobs. The geodesic ODE is solved in cotangent form with
/// H = (phi*)^2 / 2 by classical RK4 at a fixed arc-length step, with the
/// momentum renormalized onto {phi* = 1} after every step, so trajectories
/// stay arc-length parametrized by construction.
struct FlowSettings {
    double step = 1e-3;        // arc-length step
    double exit_tol = 1e-12;   // |x| - r at the refined exit point
    double max_length = 12.0;  // step-count overflow guard (trapped orbits)
};

struct State {
    Point x;
    Covec2 alpha;
};

/// An arc-length parametrized geodesic: samples at (mostly) uniform times,
/// with refined non-uniform samples possible at either end.
struct Geodesic {
    std::vector<double> times;     // increasing, starts at 0
    std::vector<Point> positions;
    std::vector<Covec2> momenta;
    double length = 0.0;           // = times.back()

    std::size_t size() const { return times.size(); }

    std::size_t segment_index(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        if (i > 0) --i;
        return std::min(i, times.size() - 2);
    }

    /// Cubic Lagrange interpolation over the 4 samples around t.
    template <class Get>
    double interpolate(double t, Get&& get) const {
        const std::size_t n = times.size();
        if (n == 1) return get(0);
        std::size_t i = segment_index(t);
        std::size_t lo = i >= 1 ? i - 1 : 0;
        if (lo + 4 > n) lo = n - std::min<std::size_t>(4, n);
        const std::size_t m = std::min<std::size_t>(4, n - lo);
        double acc = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            double w = 1.0;
            for (std::size_t b = 0; b < m; ++b) {
                if (a == b) continue;
                w *= (t - times[lo + b]) / (times[lo + a] - times[lo + b]);
            }
            acc += w * get(lo + a);
        }
        return acc;
    }

    Point position_at(double t) const {
        return {interpolate(t, [&](std::size_t k) { return positions[k].x; }),
                interpolate(t, [&](std::size_t k) { return positions[k].y; })};
    }

    Covec2 momentum_at(double t) const {
        return {interpolate(t, [&](std::size_t k) { return momenta[k].x; }),
                interpolate(t, [&](std::size_t k) { return momenta[k].y; })};
    }

    State front() const { return {positions.front(), momenta.front()}; }
    State back() const { return {positions.back(), momenta.back()}; }
};

/// Maximal-geodesic record through a unit vector (Appendix-A chord data).
struct Chord {
    Point base;        // the point carrying u
    Vec2 u;            // phi-unit vector defining the chord
    Point p_minus;     // backward boundary endpoint
    Point p_plus;      // forward boundary endpoint
    double tau_minus = 0.0;  // <= 0, parameter of p_minus relative to base
    double tau_plus = 0.0;   // >= 0
    double ell = 0.0;        // tau_plus - tau_minus
    double lambda = 0.0;     // |p+ - p-| / ell, extended by |u| at tangency
    Vec2 w{};                // Euclidean-unit secant direction
    Point midpoint{};        // (p+ + p-) / 2
    bool tangent = false;    // continuity branch used (ell below threshold)
    Geodesic path;           // reparametrized so t = 0 at p_minus

    double tau_mid() const { return 0.5 * (tau_plus + tau_minus); }
    /// Position of the base point along `path`.
    double base_time() const { return -tau_minus; }
};

namespace detail {

struct Deriv {
    Vec2 dx;
    Covec2 dalpha;
};

inline Deriv rhs(const Metric& m, const State& s) {
    auto h = m.hamiltonian(s.x, s.alpha);
    return {h.dH_dalpha, -h.dH_dx};
}

inline State rk4_step(const Metric& m, const State& s, double h, bool backward) {
    const double sgn = backward ? -1.0 : 1.0;
    auto f = [&](const State& z) {
        Deriv d = rhs(m, z);
        return Deriv{d.dx * sgn, d.dalpha * sgn};
    };
    const Deriv k1 = f(s);
    const Deriv k2 = f({s.x + k1.dx * (h / 2), s.alpha + k1.dalpha * (h / 2)});
    const Deriv k3 = f({s.x + k2.dx * (h / 2), s.alpha + k2.dalpha * (h / 2)});
    const Deriv k4 = f({s.x + k3.dx * h, s.alpha + k3.dalpha * h});
    return {s.x + (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx) * (h / 6),
            s.alpha + (k1.dalpha + 2 * k2.dalpha + 2 * k3.dalpha + k4.dalpha) * (h / 6)};
}

inline void renormalize(const Metric& m, State& s) {
    s.alpha = s.alpha / m.dual_norm(s.x, s.alpha);
}

}  // namespace detail

/// Integrates the unit-cotangent flow from (x0, alpha0) forward (or backward
/// in time, which traverses the same phase curve) until the trajectory exits
/// the disc of radius r. The exit time is refined by bisection on the RK4
/// sub-step so the final sample lies on the circle to exit_tol.
inline Geodesic flow(const Metric& m, Point x0, Covec2 alpha0, double r,
                     const FlowSettings& fs = {}, bool backward = false) {
    if (x0.radius() > r * (1.0 + 1e-9) + 1e-12)
        throw DomainError("flow: start point outside disc of radius r");
    State s{x0, alpha0};
    detail::renormalize(m, s);

    Geodesic g;
    const auto max_steps = static_cast<std::size_t>(fs.max_length / fs.step) + 2;
    g.times.reserve(512);
    g.positions.reserve(512);
    g.momenta.reserve(512);
    g.times.push_back(0.0);
    g.positions.push_back(s.x);
    g.momenta.push_back(s.alpha);

    const double h = fs.step;
    for (std::size_t n = 0; n < max_steps; ++n) {
        State next = detail::rk4_step(m, s, h, backward);
        detail::renormalize(m, next);
        if (next.x.radius() > r) {
            // bisect the step fraction; |x| <= r at fraction 0, > r at 1.
            // frac and cand always refer to the same probe point.
            double lo = 0.0, hi = 1.0;
            double frac = 1.0;
            State cand = next;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                State sm = detail::rk4_step(m, s, mid * h, backward);
                detail::renormalize(m, sm);
                cand = sm;
                frac = mid;
                if (sm.x.radius() > r) hi = mid; else lo = mid;
                if (std::abs(cand.x.radius() - r) < fs.exit_tol) break;
            }
            const double t_exit = g.times.back() + frac * h;
            if (frac * h > 1e-15) {
                g.times.push_back(t_exit);
                g.positions.push_back(cand.x);
                g.momenta.push_back(cand.alpha);
            }
            g.length = g.times.back();
            return g;
        }
        s = next;
        g.times.push_back((n + 1) * h);
        g.positions.push_back(s.x);
        g.momenta.push_back(s.alpha);
    }
    throw NumericalError("flow: step-count overflow (trajectory trapped; metric may not be simple)",
                         s.x.radius() - r);
}

/// The maximal geodesic of the disc of radius r through a phi-unit vector v
/// at x. Backward extension integrates the time-reversed flow of the same
/// Hamiltonian field, so the chord is a single phi-geodesic.
inline Chord exit_chord(const Metric& m, Point x, Vec2 v, const FlowSettings& fs = {},
                        double r = 1.0, double tangency_threshold = 1e-4) {
    const double nv = m.norm(x, v);
    if (!(nv > 0.0)) throw DomainError("exit_chord: zero vector");
    const Vec2 u = v / nv;
    const Covec2 alpha = m.legendre(x, u);

    Geodesic fwd = flow(m, x, alpha, r, fs, false);
    Geodesic bwd = flow(m, x, alpha, r, fs, true);

    Chord c;
    c.base = x;
    c.u = u;
    c.tau_plus = fwd.length;
    c.tau_minus = -bwd.length;
    c.ell = c.tau_plus - c.tau_minus;
    c.p_plus = fwd.positions.back();
    c.p_minus = bwd.positions.back();
    c.midpoint = Point{0.5 * (c.p_plus.x + c.p_minus.x), 0.5 * (c.p_plus.y + c.p_minus.y)};

    if (c.ell < tangency_threshold) {
        c.tangent = true;
        c.lambda = u.norm();
        c.w = unit(u);
        c.midpoint = x;
    } else {
        const Vec2 sec = c.p_plus - c.p_minus;
        c.lambda = sec.norm() / c.ell;
        c.w = unit(sec);
    }

    // stitch backward + forward into one path parametrized from p_minus
    Geodesic& g = c.path;
    const std::size_t nb = bwd.size();
    g.times.reserve(nb + fwd.size());
    g.positions.reserve(nb + fwd.size());
    g.momenta.reserve(nb + fwd.size());
    for (std::size_t k = nb; k-- > 0;) {
        g.times.push_back(bwd.length - bwd.times[k]);
        g.positions.push_back(bwd.positions[k]);
        g.momenta.push_back(bwd.momenta[k]);
    }
    for (std::size_t k = 1; k < fwd.size(); ++k) {
        g.times.push_back(bwd.length + fwd.times[k]);
        g.positions.push_back(fwd.positions[k]);
        g.momenta.push_back(fwd.momenta[k]);
    }
    if (g.times.empty()) {
        g.times.push_back(0.0);
        g.positions.push_back(x);
        g.momenta.push_back(alpha);
    }
    g.length = g.times.back();
    return c;
}

/// Slices a flown geodesic at the arrival parameter and appends the refined
/// arrival state, so the returned curve ends at the target.
inline Geodesic trim_geodesic(const Metric& m, const Geodesic& g, double t_end) {
    if (t_end >= g.length - 1e-15) return g;
    Geodesic out;
    std::size_t k = 0;
    while (k < g.size() && g.times[k] < t_end - 1e-15) ++k;
    out.times.assign(g.times.begin(), g.times.begin() + k);
    out.positions.assign(g.positions.begin(), g.positions.begin() + k);
    out.momenta.assign(g.momenta.begin(), g.momenta.begin() + k);
    if (out.times.empty()) {
        out.times.push_back(0.0);
        out.positions.push_back(g.positions.front());
        out.momenta.push_back(g.momenta.front());
    }
    const std::size_t last = out.size() - 1;
    State s{out.positions[last], out.momenta[last]};
    const double dt = t_end - out.times[last];
    if (dt > 1e-15) {
        State sf = detail::rk4_step(m, s, dt, false);
        detail::renormalize(m, sf);
        out.times.push_back(t_end);
        out.positions.push_back(sf.x);
        out.momenta.push_back(sf.alpha);
    }
    out.length = out.times.back();
    return out;
}

struct ConnectResult {
    Geodesic geodesic;
    double initial_angle = 0.0;  // solved fiber angle of the initial velocity
    double residual = 0.0;       // boundary-arc / lateral mismatch achieved
    int flows_used = 0;
};

namespace detail {

struct ShotOutcome {
    double mismatch = 0.0;
    Geodesic geo;
    double target_time = 0.0;  // arrival parameter along geo
};

/// One shot of the two-point solver: flow from a with phi-unit velocity at
/// fiber angle chi and measure the signed miss of b. Boundary targets use
/// the signed exit-arc mismatch, interior targets the signed lateral offset
/// at the (parabola refined) closest approach.
inline ShotOutcome shoot(const Metric& m, Point a, Point b, double r, double chi,
                         const FlowSettings& fs, bool boundary_target) {
    const Vec2 e = dir(chi);
    const Vec2 v = e / m.norm(a, e);
    const Covec2 alpha = m.legendre(a, v);
    Geodesic g = flow(m, a, alpha, r, fs);
    if (boundary_target) {
        const double mis = wrap_angle(angle_of(g.positions.back().as_vec()) -
                                      angle_of(b.as_vec()));
        const double t = g.length;
        return {mis, std::move(g), t};
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double d2 = (g.positions[k] - b).norm2();
        if (d2 < best_d) { best_d = d2; best = k; }
    }
    double t_cl = g.times[best];
    if (best > 0 && best + 1 < g.size()) {
        const double t0 = g.times[best - 1], t1 = g.times[best], t2 = g.times[best + 1];
        const double f0 = (g.positions[best - 1] - b).norm2();
        const double f1 = (g.positions[best] - b).norm2();
        const double f2 = (g.positions[best + 1] - b).norm2();
        const double d01 = (f1 - f0) / (t1 - t0), d12 = (f2 - f1) / (t2 - t1);
        const double c2 = (d12 - d01) / (t2 - t0);
        if (c2 > 0.0) {
            const double tv = 0.5 * (t0 + t1 - d01 / c2);
            if (tv > t0 && tv < t2) t_cl = tv;
        }
    }
    // Newton polish on (x(t) - b) . v(t) = 0 along the interpolated curve;
    // kills the longitudinal part of the arrival miss.
    for (int it = 0; it < 4; ++it) {
        const Point xt = g.position_at(t_cl);
        const Vec2 vt = m.flow_velocity(xt, g.momentum_at(t_cl));
        const double q = dot(vt, xt - b);
        t_cl = std::clamp(t_cl - q / vt.norm2(), 0.0, g.length);
    }
    const Point xc = g.position_at(t_cl);
    const Vec2 vel = m.flow_velocity(xc, g.momentum_at(t_cl));
    const double mis = cross(unit(vel), b - xc);
    return {mis, std::move(g), t_cl};
}

}  // namespace detail

/// Two-point boundary value solver: safeguarded secant iteration on the
/// initial fiber angle, initial guess the straight chord direction, with
/// 8 fiber-angle restarts on failure. Returns the geodesic from a to b in
/// the disc of radius r; its length realizes d_phi(a, b).
inline ConnectResult connect_detailed(const Metric& m, Point a, Point b, double r = 1.0,
                                      const FlowSettings& fs = {},
                                      std::optional<double> angle_guess = std::nullopt,
                                      double tol = 1e-9, int max_iter = 60) {
    if ((b - a).norm() == 0.0) throw DomainError("connect: coincident endpoints");
    if (a.radius() > r * (1.0 + 1e-9) || b.radius() > r * (1.0 + 1e-9))
        throw DomainError("connect: endpoint outside disc");
    const bool boundary_target = b.radius() > r * (1.0 - 1e-9);
    const double chi0 = angle_guess.value_or(angle_of(b - a));

    int flows = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    const double offsets[] = {0.0, 0.12, -0.12, 0.35, -0.35, 0.7, -0.7, 1.2};
    for (double off : offsets) {
        // bracket endpoints: nearest evaluation with mismatch < 0 resp. > 0
        bool have_neg = false, have_pos = false;
        double c_neg = 0, c_pos = 0, f_neg = 0, f_pos = 0;
        auto record = [&](double c, double f) {
            if (f <= 0 && (!have_neg || std::abs(f) < std::abs(f_neg))) {
                have_neg = true; c_neg = c; f_neg = f;
            }
            if (f > 0 && (!have_pos || f < f_pos)) {
                have_pos = true; c_pos = c; f_pos = f;
            }
        };
        try {
            double cp = chi0 + off;
            detail::ShotOutcome sp = detail::shoot(m, a, b, r, cp, fs, boundary_target);
            ++flows;
            if (std::abs(sp.mismatch) < tol)
                return {trim_geodesic(m, sp.geo, sp.target_time), cp, std::abs(sp.mismatch), flows};
            record(cp, sp.mismatch);

            double cc = cp + 0.03;
            detail::ShotOutcome sc = detail::shoot(m, a, b, r, cc, fs, boundary_target);
            ++flows;
            record(cc, sc.mismatch);

            for (int it = 0; it < max_iter; ++it) {
                if (std::abs(sc.mismatch) < tol)
                    return {trim_geodesic(m, sc.geo, sc.target_time), cc, std::abs(sc.mismatch),
                            flows};
                double cn;
                const double denom = sc.mismatch - sp.mismatch;
                if (std::abs(denom) > 1e-300 && std::abs(cc - cp) > 0) {
                    cn = cc - sc.mismatch * (cc - cp) / denom;
                } else {
                    cn = cc + 0.01;
                }
                if (have_neg && have_pos) {
                    const double blo = std::min(c_neg, c_pos), bhi = std::max(c_neg, c_pos);
                    if (!(cn > blo && cn < bhi)) cn = 0.5 * (blo + bhi);
                }
                cp = cc; sp = std::move(sc);
                cc = cn;
                sc = detail::shoot(m, a, b, r, cc, fs, boundary_target);
                ++flows;
                record(cc, sc.mismatch);
            }
            best_residual = std::min(best_residual, std::abs(sc.mismatch));
        } catch (const NumericalError&) {
            // trapped shot; try the next restart
        }
    }
    throw NumericalError("connect: shooting failed after multi-start (metric may not be simple)",
                         best_residual);
}

inline Geodesic connect(const Metric& m, Point a, Point b, double r = 1.0,
                        const FlowSettings& fs = {},
                        std::optional<double> angle_guess = std::nullopt) {
    return connect_detailed(m, a, b, r, fs, angle_guess).geodesic;
}

/// d_phi(a, b) inside the disc of radius r.
inline double geodesic_distance(const Metric& m, Point a, Point b, double r = 1.0,
                                const FlowSettings& fs = {},
                                std::optional<double> angle_guess = std::nullopt) {
    if ((b - a).norm() == 0.0) return 0.0;
    return connect_detailed(m, a, b, r, fs, angle_guess).geodesic.length;
}

// ---- Jacobi / conjugate points --------------------------------------------

struct ConjugateResult {
    bool found = false;
    double first_time = 0.0;
};

/// Linearized (Jacobi) flow along a geodesic: integrates the variational
/// equation with initial condition (zero position variation, unit transverse
/// momentum variation) and looks for a zero of the transverse position
/// component on (0, T]. Directional derivatives of the Hamiltonian field are
/// taken by central differences, which keeps the check integrator-only.
inline ConjugateResult conjugate_point_check(const Metric& m, const Geodesic& geo,
                                             const FlowSettings& fs = {}) {
    struct VarState {
        State z;
        Vec2 dx;
        Covec2 dalpha;
    };
    const double eta = 1e-6;
    auto var_rhs = [&](const VarState& v) {
        const double nz = std::sqrt(v.dx.norm2() + v.dalpha.norm2());
        const double sc = nz > 0 ? eta / nz : eta;
        const State zp{v.z.x + v.dx * sc, v.z.alpha + v.dalpha * sc};
        const State zm{v.z.x - v.dx * sc, v.z.alpha - v.dalpha * sc};
        const detail::Deriv d0 = detail::rhs(m, v.z);
        const detail::Deriv dp = detail::rhs(m, zp);
        const detail::Deriv dm = detail::rhs(m, zm);
        return std::tuple{d0, Vec2{(dp.dx - dm.dx) / (2 * sc)},
                          Covec2{(dp.dalpha - dm.dalpha) / (2 * sc)}};
    };
    auto step = [&](const VarState& v, double h) {
        auto [k1, k1x, k1a] = var_rhs(v);
        const VarState v2{{v.z.x + k1.dx * (h / 2), v.z.alpha + k1.dalpha * (h / 2)},
                          v.dx + k1x * (h / 2), v.dalpha + k1a * (h / 2)};
        auto [k2, k2x, k2a] = var_rhs(v2);
        const VarState v3{{v.z.x + k2.dx * (h / 2), v.z.alpha + k2.dalpha * (h / 2)},
                          v.dx + k2x * (h / 2), v.dalpha + k2a * (h / 2)};
        auto [k3, k3x, k3a] = var_rhs(v3);
        const VarState v4{{v.z.x + k3.dx * h, v.z.alpha + k3.dalpha * h},
                          v.dx + k3x * h, v.dalpha + k3a * h};
        auto [k4, k4x, k4a] = var_rhs(v4);
        return VarState{
            {v.z.x + (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx) * (h / 6),
             v.z.alpha + (k1.dalpha + 2 * k2.dalpha + 2 * k3.dalpha + k4.dalpha) * (h / 6)},
            v.dx + (k1x + 2 * k2x + 2 * k3x + k4x) * (h / 6),
            v.dalpha + (k1a + 2 * k2a + 2 * k3a + k4a) * (h / 6)};
    };

    VarState v{{geo.positions.front(), geo.momenta.front()},
               Vec2{},
               unit(perp(geo.momenta.front()))};
    const double h = fs.step;
    const double T = geo.length;
    double t = 0.0;
    double prev_j = 0.0;
    bool armed = false;
    while (t < T - 1e-12) {
        const double dt = std::min(h, T - t);
        v = step(v, dt);
        t += dt;
        const Vec2 vel = m.flow_velocity(v.z.x, v.z.alpha);
        const double j = cross(unit(vel), v.dx);
        if (armed && (j > 0) != (prev_j > 0)) return {true, t};
        if (!armed && std::abs(j) > 1e-8) armed = true;
        prev_j = j;
    }
    return {false, 0.0};
}

// ---- simplicity report ------------------------------------------------------

struct SimplicityReport {
    double convexity_margin = 0.0;  // min second-order outward deviation of tangent geodesics
    bool conjugate_free = true;
    bool minimizing = true;
    bool simple = false;
    int worst_boundary_index = -1;
    int worst_direction_index = -1;
    double first_conjugate_time = 0.0;
};

/// Desk-scale simplicity check at radius r: boundary strict convexity via
/// the second-order deviation of boundary-tangent geodesics, a conjugate
/// point scan over a chord family, and a shooting-uniqueness probe standing
/// in for "all geodesics minimizing".
inline SimplicityReport simplicity_report(const Metric& m, int boundary_samples,
                                          int direction_samples, double r = 1.0,
                                          const FlowSettings& fs = {}) {
    if (boundary_samples < 16 || direction_samples < 2)
        throw ValidationError("simplicity_report: need >= 16 boundary and >= 2 direction samples");
    SimplicityReport rep;
    rep.convexity_margin = std::numeric_limits<double>::infinity();

    // boundary convexity: c = ((|x(tau)| - r) + (|x(-tau)| - r)) / tau^2 for
    // the phi-unit boundary-tangent vector; strictly convex boundary pushes
    // tangent geodesics outside to second order.
    const double tau = 1e-2;
    const int probe_steps = 8;
    const double ph = tau / probe_steps;
    for (int i = 0; i < boundary_samples; ++i) {
        const double th = kTwoPi * i / boundary_samples;
        const Point q = point_on_circle(r, th);
        const Vec2 tangent = perp(q.as_vec() / r);
        const Vec2 u = tangent / m.norm(q, tangent);
        const Covec2 alpha = m.legendre(q, u);
        State sp{q, alpha}, sm{q, alpha};
        for (int k = 0; k < probe_steps; ++k) {
            sp = detail::rk4_step(m, sp, ph, false);
            detail::renormalize(m, sp);
            sm = detail::rk4_step(m, sm, ph, true);
            detail::renormalize(m, sm);
        }
        const double c = ((sp.x.radius() - r) + (sm.x.radius() - r)) / (tau * tau);
        if (c < rep.convexity_margin) {
            rep.convexity_margin = c;
            rep.worst_boundary_index = i;
        }
    }

    // conjugate points over a fan of chords
    for (int i = 0; i < boundary_samples && rep.conjugate_free; ++i) {
        const double th = kTwoPi * i / boundary_samples;
        const Point q = point_on_circle(r * (1.0 - 1e-9), th);
        for (int j = 0; j < direction_samples; ++j) {
            const double inward = th + kPi + (kPi * 0.8) * ((j + 0.5) / direction_samples - 0.5);
            const Vec2 e = dir(inward);
            const Vec2 u = e / m.norm(q, e);
            try {
                Chord c = exit_chord(m, q, u, fs, r);
                auto cj = conjugate_point_check(m, c.path, fs);
                if (cj.found) {
                    rep.conjugate_free = false;
                    rep.first_conjugate_time = cj.first_time;
                    rep.worst_boundary_index = i;
                    rep.worst_direction_index = j;
                    break;
                }
            } catch (const NumericalError&) {
                rep.conjugate_free = false;
                rep.worst_boundary_index = i;
                rep.worst_direction_index = j;
                break;
            }
        }
    }

    // minimizing probe: multi-start shooting must find a unique geodesic
    const int pairs = std::min(8, boundary_samples / 2);
    for (int k = 0; k < pairs && rep.minimizing; ++k) {
        const double ta = kTwoPi * k / pairs;
        const double tb = ta + kPi * (0.35 + 0.5 * (k % 3) / 3.0);
        const Point a = point_on_circle(r, ta), bpt = point_on_circle(r, tb);
        double ref_len = -1.0;
        for (double off : {0.0, 0.5, -0.5, 1.0}) {
            try {
                auto res = connect_detailed(m, a, bpt, r, fs, angle_of(bpt - a) + off);
                if (ref_len < 0) {
                    ref_len = res.geodesic.length;
                } else if (std::abs(res.geodesic.length - ref_len) > 1e-6) {
                    rep.minimizing = false;
                    break;
                }
            } catch (const NumericalError&) {
                // a failed restart is not evidence of multiplicity
            }
        }
        if (ref_len < 0) rep.minimizing = false;
    }

    rep.simple = rep.convexity_margin > 0.0 && rep.conjugate_free && rep.minimizing;
    return rep;
}

// ---- quadrature along a geodesic --------------------------------------------

/// Integral of f along the curve in the arc-length parameter: composite
/// quadratic (Simpson-type) pieces, exact handling of the non-uniform end
/// intervals, 4th-order overall on the uniform interior.
inline double integrate_along(const Geodesic& g, const std::function<double(Point)>& f) {
    const std::size_t n = g.size();
    if (n < 2) return 0.0;
    if (n == 2) {
        return 0.5 * (f(g.positions[0]) + f(g.positions[1])) * (g.times[1] - g.times[0]);
    }
    std::vector<double> fv(n);
    for (std::size_t k = 0; k < n; ++k) fv[k] = f(g.positions[k]);
    auto quad_piece = [&](std::size_t i, double a, double b) {
        // integral over [a, b] of the quadratic through nodes i-1, i, i+1
        const double t0 = g.times[i - 1], t1 = g.times[i], t2 = g.times[i + 1];
        const double f0 = fv[i - 1], f1 = fv[i], f2 = fv[i + 1];
        const double d01 = (f1 - f0) / (t1 - t0);
        const double c2 = ((f2 - f1) / (t2 - t1) - d01) / (t2 - t0);
        // p(t) = f0 + d01 (t - t0) + c2 (t - t0)(t - t1)
        auto P = [&](double t) {
            const double u = t - t0;
            return f0 * t + 0.5 * d01 * u * u + c2 * (u * u * u / 3.0 - 0.5 * (t1 - t0) * u * u);
        };
        return P(b) - P(a);
    };
    double acc = 0.0;
    std::size_t i = 1;
    while (i + 1 < n) {
        acc += quad_piece(i, g.times[i - 1], g.times[i + 1]);
        i += 2;
    }
    if (i < n) acc += quad_piece(n - 2, g.times[n - 2], g.times[n - 1]);
    return acc;
}

}  // namespace finsler
