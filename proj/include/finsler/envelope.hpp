#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/fan.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/metric.hpp"
#include "finsler/parallel.hpp"

namespace finsler {

/// Polar grid on the closed unit disc: `rings` interior rings at radii
/// (j+1)/(rings+1), the boundary circle as ring index `rings`, and the
/// center as a single extra node.
struct PolarGrid {
    int rings = 48;
    int angles = 192;

    int ring_count() const { return rings + 1; }
    int node_count() const { return ring_count() * angles + 1; }
    int center_index() const { return ring_count() * angles; }
    int node_index(int j, int k) const { return j * angles + k; }
    bool is_interior_ring(int j) const { return j < rings; }

    double ring_radius(int j) const {
        return j < rings ? static_cast<double>(j + 1) / (rings + 1) : 1.0;
    }
    double angle(int k) const { return kTwoPi * k / angles; }

    Point node(int j, int k) const { return point_on_circle(ring_radius(j), angle(k)); }
    Point node(int idx) const {
        if (idx == center_index()) return {0.0, 0.0};
        return node(idx / angles, idx % angles);
    }
};

// ---- boundary distance table -----------------------------------------------

/// Sampled bd_phi on N equally spaced boundary points; entry (i, j) is
/// d_phi(x_i, x_j). Asymmetric unless the metric is reversible.
struct BoundaryDistanceTable {
    int N = 0;
    double radius = 1.0;
    std::vector<double> values;  // row-major

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * N + j]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * N + j]; }
    Point node(int i) const { return point_on_circle(radius, kTwoPi * i / N); }
};

/// Fills the table with per-pair shooting solves, warm-starting each row
/// sweep with the previously solved initial angle.
inline BoundaryDistanceTable boundary_distance_table(const Metric& m, int N,
                                                     const FlowSettings& fs = {},
                                                     double radius = 1.0,
                                                     bool check_simple = false,
                                                     int threads = 1) {
    if (N < 32) throw ValidationError("boundary_distance_table: N must be >= 32");
    if (check_simple && !simplicity_report(m, 16, 6, radius, fs).simple)
        throw ValidationError("boundary_distance_table: metric failed the simplicity report");
    BoundaryDistanceTable t;
    t.N = N;
    t.radius = radius;
    t.values.assign(static_cast<std::size_t>(N) * N, 0.0);
    parallel_for(N, threads, [&](int i) {
        const Point a = t.node(i);
        std::optional<double> guess;
        for (int step = 1; step < N; ++step) {
            const int j = (i + step) % N;
            const Point b = t.node(j);
            try {
                auto res = connect_detailed(m, a, b, radius, fs, guess);
                t.at(i, j) = res.geodesic.length;
                guess = res.initial_angle;
            } catch (const NumericalError& e) {
                throw NumericalError("boundary_distance_table: connect failed for pair (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")",
                                     e.residual);
            }
        }
    });
    return t;
}

// ---- distance field of one extended-disc basepoint ---------------------------

/// F_p = d_phi(p, .) sampled on the polar grid, with its differential taken
/// from the Legendre identity (the arrival momentum of the connecting
/// geodesic), not from finite differences. Keeps its fan alive so off-grid
/// queries stay available.
class DistanceField {
  public:
    DistanceField(const Metric& m, Point p, const PolarGrid& grid,
                  const GeodesicFan::Settings& fan_settings)
        : metric_(m), p_(p), grid_(grid) {
        GeodesicFan::Settings s = fan_settings;
        s.disc_radius = p.radius();
        fan_ = std::make_unique<GeodesicFan>(metric_, p, s);
        const int n = grid.node_count();
        F_.resize(n);
        dF_.resize(n);
        for (int idx = 0; idx < n; ++idx) {
            const auto q = fan_->locate(grid.node(idx));
            F_[idx] = q.t;
            dF_[idx] = q.alpha;
            const double res = std::abs(metric_.dual_norm(grid.node(idx), q.alpha) - 1.0);
            max_distance_like_residual_ = std::max(max_distance_like_residual_, res);
            max_arrival_residual_ = std::max(max_arrival_residual_, q.residual);
        }
    }

    Point basepoint() const { return p_; }
    const PolarGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return F_; }
    const std::vector<Covec2>& differentials() const { return dF_; }
    double max_distance_like_residual() const { return max_distance_like_residual_; }
    double max_arrival_residual() const { return max_arrival_residual_; }

    double value(int j, int k) const { return F_[grid_.node_index(j, k)]; }
    Covec2 differential(int j, int k) const { return dF_[grid_.node_index(j, k)]; }

    /// d_phi(p, x) and d_x F_p at an arbitrary point of the unit disc.
    GeodesicFan::Query query(Point x) const { return fan_->locate(x); }

  private:
    Metric metric_;
    Point p_;
    PolarGrid grid_;
    std::unique_ptr<GeodesicFan> fan_;
    std::vector<double> F_;
    std::vector<Covec2> dF_;
    double max_distance_like_residual_ = 0.0;
    double max_arrival_residual_ = 0.0;
};

inline DistanceField distance_field(const Metric& m, Point p, const PolarGrid& grid,
                                    const GeodesicFan::Settings& fan_settings = {}) {
    return DistanceField(m, p, grid, fan_settings);
}

// ---- enveloping function ------------------------------------------------------

/// F(p, x) = d_phi(p, x) tabulated over the S grid (M points on the circle
/// of radius 1 + delta) and the polar D grid, with d_xF from the Legendre
/// identity and dF/dp by centered differences along S.
struct EnvelopingFunction {
    int M = 0;
    double delta = 0.2;
    PolarGrid grid;
    std::vector<double> F;      // [m * node_count + node]
    std::vector<Vec2> dFdx;
    std::vector<double> dFdp;
    double max_distance_like_residual = 0.0;
    double max_arrival_residual = 0.0;

    std::size_t index(int m, int node) const {
        return static_cast<std::size_t>(m) * grid.node_count() + node;
    }
    Point s_point(int m) const { return point_on_circle(1.0 + delta, kTwoPi * m / M); }
    double s_angle(int m) const { return kTwoPi * m / M; }
};

inline EnvelopingFunction enveloping_function(const Metric& metric, double delta, int M,
                                              const PolarGrid& grid,
                                              const GeodesicFan::Settings& fan_settings = {},
                                              bool check_simple = false,
                                              const FlowSettings& check_fs = {},
                                              int threads = 1) {
    if (check_simple &&
        !simplicity_report(metric, 16, 6, 1.0 + delta, check_fs).simple)
        throw ValidationError("enveloping_function: metric is not simple on the extended disc");
    EnvelopingFunction env;
    env.M = M;
    env.delta = delta;
    env.grid = grid;
    const int nodes = grid.node_count();
    env.F.resize(static_cast<std::size_t>(M) * nodes);
    env.dFdx.resize(env.F.size());
    env.dFdp.resize(env.F.size());
    std::vector<double> worst_res(M, 0.0), worst_arr(M, 0.0);
    parallel_for(M, threads, [&](int mi) {
        GeodesicFan::Settings s = fan_settings;
        s.disc_radius = 1.0 + delta;
        const Point p = env.s_point(mi);
        GeodesicFan fan(metric, p, s);
        for (int idx = 0; idx < nodes; ++idx) {
            const Point x = grid.node(idx);
            const auto q = fan.locate(x);
            env.F[env.index(mi, idx)] = q.t;
            env.dFdx[env.index(mi, idx)] = q.alpha;
            worst_res[mi] = std::max(worst_res[mi], std::abs(metric.dual_norm(x, q.alpha) - 1.0));
            worst_arr[mi] = std::max(worst_arr[mi], q.residual);
        }
    });
    for (int mi = 0; mi < M; ++mi) {
        env.max_distance_like_residual = std::max(env.max_distance_like_residual, worst_res[mi]);
        env.max_arrival_residual = std::max(env.max_arrival_residual, worst_arr[mi]);
    }
    // dF/dp by centered differences on the uniform S grid (angle derivative)
    const double ds = kTwoPi / M;
    for (int mi = 0; mi < M; ++mi) {
        const int mp = (mi + 1) % M, mm = (mi + M - 1) % M;
        for (int idx = 0; idx < nodes; ++idx) {
            env.dFdp[env.index(mi, idx)] =
                (env.F[env.index(mp, idx)] - env.F[env.index(mm, idx)]) / (2.0 * ds);
        }
    }
    return env;
}

namespace detail {

/// Discrete max over a cyclic family refined by the parabola through the
/// argmax and its neighbors. The dual curve moves fast in sigma where the
/// basepoint circle is close, so the raw grid max can undershoot; the
/// refinement restores the sup to O(dsigma^4).
template <class F>
double cyclic_max_refined(int M, F&& value) {
    int best = 0;
    double fb = -std::numeric_limits<double>::infinity();
    for (int mi = 0; mi < M; ++mi) {
        const double f = value(mi);
        if (f > fb) { fb = f; best = mi; }
    }
    const double fm = value((best + M - 1) % M);
    const double fp = value((best + 1) % M);
    const double denom = fm - 2.0 * fb + fp;
    if (denom < -1e-300) {
        const double delta = 0.5 * (fm - fp) / denom;
        if (std::abs(delta) <= 1.0) {
            const double refined = fb - 0.25 * (fm - fp) * delta;
            return std::max(fb, refined);
        }
    }
    return fb;
}

}  // namespace detail

/// Eq. (e-phi-dF): phi''(v) = sup_p d_xF_p(v), evaluated over the S grid
/// with parabolic refinement of the discrete max.
inline double metric_from_envelope(const EnvelopingFunction& env, int node, Vec2 v) {
    return detail::cyclic_max_refined(
        env.M, [&](int mi) { return dot(env.dFdx[env.index(mi, node)], v); });
}

// ---- Definition 2.1(ii) checks ------------------------------------------------

struct EnvelopeValidity {
    double max_distance_like_residual = 0.0;
    bool windings_ok = true;
    bool convexity_ok = true;
    int worst_node = -1;
    bool ok() const { return windings_ok && convexity_ok; }
};

/// For every interior node x, the sampled dual curve p -> d_xF_p must wind
/// once around the origin with positive orientation and be strictly convex.
inline EnvelopeValidity envelope_validity(const EnvelopingFunction& env) {
    EnvelopeValidity v;
    v.max_distance_like_residual = env.max_distance_like_residual;
    const int M = env.M;
    auto check_node = [&](int node) {
        for (int mi = 0; mi < M; ++mi) {
            const Vec2 a0 = env.dFdx[env.index(mi, node)];
            const Vec2 a1 = env.dFdx[env.index((mi + 1) % M, node)];
            const Vec2 a2 = env.dFdx[env.index((mi + 2) % M, node)];
            if (!(cross(a0, a1) > 0.0)) {
                v.windings_ok = false;
                v.worst_node = node;
                return;
            }
            if (!(cross(a1 - a0, a2 - a1) > 0.0)) {
                v.convexity_ok = false;
                v.worst_node = node;
                return;
            }
        }
    };
    for (int j = 0; j < env.grid.rings && v.ok(); ++j)
        for (int k = 0; k < env.grid.angles && v.ok(); ++k) check_node(env.grid.node_index(j, k));
    if (v.ok()) check_node(env.grid.center_index());
    return v;
}

// ---- restriction to S x dD ----------------------------------------------------

/// What Lemma 2.2 consumes: F on the S x dD torus grid together with both
/// tangential (angle) derivatives. dF/dtheta comes from the Legendre
/// identity, dF/dsigma from centered differences along S.
struct SBoundaryTable {
    int M = 0;      // S grid
    int K = 0;      // boundary grid
    double delta = 0.2;
    std::vector<double> F;
    std::vector<double> dF_dtheta;
    std::vector<double> dF_dsigma;

    std::size_t idx(int m, int k) const { return static_cast<std::size_t>(m) * K + k; }
    Point s_point(int m) const { return point_on_circle(1.0 + delta, kTwoPi * m / M); }
    Point boundary_point(int k) const { return point_on_circle(1.0, kTwoPi * k / K); }
};

/// Builds the restriction directly with warm-started two-point solves
/// (no interior grid needed).
inline SBoundaryTable boundary_envelope(const Metric& metric, double delta, int M, int K,
                                        const FlowSettings& fs = {}, int threads = 1) {
    SBoundaryTable t;
    t.M = M;
    t.K = K;
    t.delta = delta;
    t.F.assign(static_cast<std::size_t>(M) * K, 0.0);
    t.dF_dtheta.assign(t.F.size(), 0.0);
    t.dF_dsigma.assign(t.F.size(), 0.0);
    const double rs = 1.0 + delta;
    parallel_for(M, threads, [&](int mi) {
        const Point p = t.s_point(mi);
        std::optional<double> guess;
        for (int k = 0; k < K; ++k) {
            const Point x = t.boundary_point(k);
            auto res = connect_detailed(metric, p, x, rs, fs, guess);
            guess = res.initial_angle;
            const Covec2 alpha = res.geodesic.momenta.back();
            t.F[t.idx(mi, k)] = res.geodesic.length;
            t.dF_dtheta[t.idx(mi, k)] = dot(alpha, perp(x.as_vec()));
        }
    });
    const double ds = kTwoPi / M;
    for (int mi = 0; mi < M; ++mi) {
        const int mp = (mi + 1) % M, mm = (mi + M - 1) % M;
        for (int k = 0; k < K; ++k)
            t.dF_dsigma[t.idx(mi, k)] = (t.F[t.idx(mp, k)] - t.F[t.idx(mm, k)]) / (2.0 * ds);
    }
    return t;
}

/// Restriction of a full envelope to S x dD (boundary ring values).
inline SBoundaryTable restrict_to_boundary(const EnvelopingFunction& env) {
    SBoundaryTable t;
    t.M = env.M;
    t.K = env.grid.angles;
    t.delta = env.delta;
    t.F.resize(static_cast<std::size_t>(t.M) * t.K);
    t.dF_dtheta.resize(t.F.size());
    t.dF_dsigma.resize(t.F.size());
    const int jb = env.grid.rings;  // boundary ring
    for (int mi = 0; mi < t.M; ++mi) {
        for (int k = 0; k < t.K; ++k) {
            const int node = env.grid.node_index(jb, k);
            t.F[t.idx(mi, k)] = env.F[env.index(mi, node)];
            t.dF_dtheta[t.idx(mi, k)] =
                dot(env.dFdx[env.index(mi, node)], perp(env.grid.node(jb, k).as_vec()));
            t.dF_dsigma[t.idx(mi, k)] = env.dFdp[env.index(mi, node)];
        }
    }
    return t;
}

/// Boundary-distance recovery from the boundary restriction:
/// d_phi(x_i, x_j) = max_p (F(p, x_j) - F(p, x_i)).
inline double bd_from_envelope(const SBoundaryTable& t, int i, int j) {
    return detail::cyclic_max_refined(
        t.M, [&](int mi) { return t.F[t.idx(mi, j)] - t.F[t.idx(mi, i)]; });
}

}  // namespace finsler
