#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// A 1-parameter family of geodesics sweeping a region monotonically (a fan
/// from one source point, or the chord family of a close-by metric). For a
/// simple metric the map (family angle, time) -> position is injective on
/// the swept region, so a point is located by binary search on the signed
/// lateral offset across curves followed by quartic inverse interpolation in
/// the family angle. Accuracy is O(dpsi^4); the tests pin it against closed
/// forms.
class CurveFamily {
  public:
    struct Query {
        double t = 0.0;        // arrival parameter along the located curve
        Covec2 alpha{};        // momentum there
        double psi = 0.0;      // family angle of the located curve
        double residual = 0.0; // |interpolated arrival point - target|
        int stencil = 0;       // first index of the 4-curve stencil used
    };

    CurveFamily() = default;
    CurveFamily(Metric metric, std::vector<double> psi, std::vector<Geodesic> curves)
        : metric_(std::move(metric)), psi_(std::move(psi)), curves_(std::move(curves)) {}

    const std::vector<double>& angles() const { return psi_; }
    const std::vector<Geodesic>& curves() const { return curves_; }
    const Metric& metric() const { return metric_; }
    int size() const { return static_cast<int>(curves_.size()); }

    struct Closest {
        double t;
        double offset;  // signed lateral offset of x from the curve
        Covec2 alpha;
        Point pos;
    };

    /// Closest approach of curve k to x, refined on the interpolated curve.
    Closest closest_approach(int k, Point x) const {
        const Geodesic& g = curves_[k];
        const std::size_t i = closest_sample(k, x);
        double t = g.times[i];
        if (i > 0 && i + 1 < g.size()) {
            const double t0 = g.times[i - 1], t1 = g.times[i], t2 = g.times[i + 1];
            const double f0 = (g.positions[i - 1] - x).norm2();
            const double f1 = (g.positions[i] - x).norm2();
            const double f2 = (g.positions[i + 1] - x).norm2();
            const double d01 = (f1 - f0) / (t1 - t0), d12 = (f2 - f1) / (t2 - t1);
            const double c2 = (d12 - d01) / (t2 - t0);
            if (c2 > 0.0) {
                const double tv = 0.5 * (t0 + t1 - d01 / c2);
                if (tv > t0 && tv < t2) t = tv;
            }
        }
        for (int it = 0; it < 3; ++it) {
            const Point xt = g.position_at(t);
            const Vec2 vt = metric_.flow_velocity(xt, g.momentum_at(t));
            t = std::clamp(t - dot(vt, xt - x) / vt.norm2(), 0.0, g.length);
        }
        const Point xt = g.position_at(t);
        const Vec2 vt = metric_.flow_velocity(xt, g.momentum_at(t));
        return {t, cross(unit(vt), x - xt), g.momentum_at(t), xt};
    }

    /// Locates the family curve through x and returns its arrival data.
    /// Throws NumericalError if x is outside the swept window.
    Query locate(Point x) const {
        const int n = size();
        double s_lo = side_of(0, x);
        const double s_hi = side_of(n - 1, x);
        if ((s_lo > 0) == (s_hi > 0))
            throw NumericalError("curve family: target outside the swept window",
                                 std::min(std::abs(s_lo), std::abs(s_hi)));
        int lo = 0, hi = n - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            const double sm = side_of(mid, x);
            if ((sm > 0) == (s_lo > 0)) {
                lo = mid;
                s_lo = sm;
            } else {
                hi = mid;
            }
        }
        const int first = std::clamp(lo - 1, 0, n - 4);
        double ps[4], ss[4], ts[4];
        Covec2 as[4];
        Point xs[4];
        for (int i = 0; i < 4; ++i) {
            const auto cl = closest_approach(first + i, x);
            ps[i] = psi_[first + i];
            ss[i] = cl.offset;
            ts[i] = cl.t;
            as[i] = cl.alpha;
            xs[i] = cl.pos;
        }
        auto lag = [&](const double* v, double p) {
            double acc = 0.0;
            for (int a = 0; a < 4; ++a) {
                double w = v[a];
                for (int b = 0; b < 4; ++b) {
                    if (a == b) continue;
                    w *= (p - ps[b]) / (ps[a] - ps[b]);
                }
                acc += w;
            }
            return acc;
        };
        double p0 = psi_[lo], p1 = psi_[hi];
        const bool sign0 = lag(ss, p0) > 0;
        double psi = 0.5 * (p0 + p1);
        for (int it = 0; it < 60; ++it) {
            const double f = lag(ss, psi);
            if ((f > 0) == sign0) p0 = psi; else p1 = psi;
            const double eps = 1e-7;
            const double fp = (lag(ss, psi + eps) - lag(ss, psi - eps)) / (2 * eps);
            double next = fp != 0.0 ? psi - f / fp : 0.5 * (p0 + p1);
            if (!(next > std::min(p0, p1) && next < std::max(p0, p1))) next = 0.5 * (p0 + p1);
            if (std::abs(next - psi) < 1e-14) { psi = next; break; }
            psi = next;
        }
        Query q;
        q.psi = psi;
        q.stencil = first;
        q.t = lag(ts, psi);
        double ax[4], ay[4], px[4], py[4];
        for (int i = 0; i < 4; ++i) {
            ax[i] = as[i].x; ay[i] = as[i].y;
            px[i] = xs[i].x; py[i] = xs[i].y;
        }
        q.alpha = {lag(ax, psi), lag(ay, psi)};
        q.residual = (Point{lag(px, psi), lag(py, psi)} - x).norm();
        return q;
    }

  private:
    std::size_t closest_sample(int k, Point x) const {
        const Geodesic& g = curves_[k];
        const std::size_t n = g.size();
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; i += kStride) {
            const double d = (g.positions[i] - x).norm2();
            if (d < bd) { bd = d; best = i; }
        }
        const std::size_t a = best >= kStride ? best - kStride : 0;
        const std::size_t b = std::min(n - 1, best + kStride);
        for (std::size_t i = a; i <= b; ++i) {
            const double d = (g.positions[i] - x).norm2();
            if (d < bd) { bd = d; best = i; }
        }
        return best;
    }

    double side_of(int k, Point x) const {
        const Geodesic& g = curves_[k];
        const std::size_t i = closest_sample(k, x);
        const std::size_t j = std::min(i, g.size() - 2);
        const Vec2 v = g.positions[j + 1] - g.positions[j];
        return cross(unit(v), x - g.positions[i]);
    }

    static constexpr std::size_t kStride = 8;

    Metric metric_;
    std::vector<double> psi_;
    std::vector<Geodesic> curves_;
};

/// Fan of geodesics shot from one source point, the batch evaluator behind
/// distance fields: one fan amortizes the two-point solves of a whole grid.
class GeodesicFan {
  public:
    struct Settings {
        int rays = 512;
        double window_margin = 0.35;  // widening beyond the Euclidean horizon
        FlowSettings flow{};
        double disc_radius = 1.2;     // rays run until exiting this circle
    };

    using Query = CurveFamily::Query;

    GeodesicFan(const Metric& m, Point source, const Settings& s) : source_(source) {
        const double rs = source.radius();
        const double center = angle_of(-source.as_vec());
        const double horizon = std::asin(std::min(1.0, 1.0 / rs));
        const double half = std::min(0.5 * kPi - 0.02, horizon + s.window_margin);
        const int n = s.rays;
        std::vector<double> psi(n);
        std::vector<Geodesic> rays(n);
        for (int k = 0; k < n; ++k) {
            psi[k] = center - half + (2.0 * half) * k / (n - 1);
            const Vec2 e = dir(psi[k]);
            const Vec2 v = e / m.norm(source, e);
            rays[k] = flow(m, source, m.legendre(source, v), s.disc_radius, s.flow);
        }
        family_ = CurveFamily(m, std::move(psi), std::move(rays));
    }

    Point source() const { return source_; }
    const CurveFamily& family() const { return family_; }
    Query locate(Point x) const { return family_.locate(x); }

  private:
    Point source_;
    CurveFamily family_;
};

}  // namespace finsler
