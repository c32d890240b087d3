#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/scalar_field.hpp"

namespace finsler {

/// Riemannian core: phi_c(v) = sqrt(g(v, v)) with closed-form coefficients.
struct RiemannianCore {
    ScalarField g11 = ScalarField::constant(1.0);
    ScalarField g12 = ScalarField::zero();
    ScalarField g22 = ScalarField::constant(1.0);

    Sym2 g(Point x) const { return {g11.value(x), g12.value(x), g22.value(x)}; }
    Sym2 g_dx(Point x) const {
        return {g11.gradient(x).x, g12.gradient(x).x, g22.gradient(x).x};
    }
    Sym2 g_dy(Point x) const {
        return {g11.gradient(x).y, g12.gradient(x).y, g22.gradient(x).y};
    }
};

/// Randers core: phi_c(v) = |v|_a + beta(v), with |beta|_{a^-1} < 1.
struct RandersCore {
    ScalarField a11 = ScalarField::constant(1.0);
    ScalarField a12 = ScalarField::zero();
    ScalarField a22 = ScalarField::constant(1.0);
    ScalarField b1 = ScalarField::zero();
    ScalarField b2 = ScalarField::zero();

    Sym2 a(Point x) const { return {a11.value(x), a12.value(x), a22.value(x)}; }
    Covec2 beta(Point x) const { return {b1.value(x), b2.value(x)}; }
};

/// Multiplicative conformal factor. exp_of(u) gives w = e^u (always
/// positive); one_plus(f) gives w = 1 + f and must stay positive on the
/// domain, which construction-time validation samples.
struct ConformalWeight {
    enum class Kind { exp_of, one_plus };
    Kind kind = Kind::exp_of;
    ScalarField f;

    double value(Point x) const {
        return kind == Kind::exp_of ? std::exp(f.value(x)) : 1.0 + f.value(x);
    }
    Vec2 log_gradient(Point x) const {
        if (kind == Kind::exp_of) return f.gradient(x);
        return f.gradient(x) / (1.0 + f.value(x));
    }
};

struct ConvexityReport {
    int fiber_samples = 0;
    int base_samples = 0;
    double min_eigenvalue = 0.0;
    Point worst_base{};
    Vec2 worst_fiber{};
    bool convex() const { return min_eigenvalue > 0.0; }
};

/// A simple Finsler metric on the disc of radius `domain_radius`, drawn from
/// the enumerated closed-form catalog:
///   phi(x, v) = W(x) * phi_core(x, v),  W = product of conformal weights,
/// with the core either Riemannian or Randers. Immutable after construction;
/// all evaluations are pure.
class Metric {
  public:
    using Core = std::variant<RiemannianCore, RandersCore>;

    Metric() : core_(RiemannianCore{}) {}
    Metric(Core core, std::vector<ConformalWeight> weights, double domain_radius)
        : core_(std::move(core)), weights_(std::move(weights)), radius_(domain_radius) {}

    double domain_radius() const { return radius_; }
    const Core& core() const { return core_; }
    const std::vector<ConformalWeight>& weights() const { return weights_; }

    /// Structurally reversible (no one-form part). Conformal weights do not
    /// affect reversibility.
    bool reversible() const { return std::holds_alternative<RiemannianCore>(core_); }

    double weight(Point x) const {
        double w = 1.0;
        for (const auto& cw : weights_) w *= cw.value(x);
        return w;
    }

    Vec2 weight_log_gradient(Point x) const {
        Vec2 g{};
        for (const auto& cw : weights_) g += cw.log_gradient(x);
        return g;
    }

    // ---- fiber norm and Legendre duality --------------------------------

    /// phi(x, v). Exactly 1-homogeneous; zero iff v = 0.
    double norm(Point x, Vec2 v) const {
        check_domain(x);
        return weight(x) * core_norm(x, v);
    }

    /// phi*(x, alpha): the Minkowski functional of the dual unit ball.
    double dual_norm(Point x, Covec2 alpha) const {
        check_domain(x);
        return core_dual_norm(x, alpha) / weight(x);
    }

    /// Forward Legendre transform: alpha = D_v(phi^2 / 2). Satisfies
    /// alpha(v) = phi(v)^2 and phi*(alpha) = phi(v).
    Covec2 legendre(Point x, Vec2 v) const {
        check_domain(x);
        if (v.x == 0.0 && v.y == 0.0) throw DomainError("legendre: zero vector");
        const double w = weight(x);
        return core_legendre(x, v) * (w * w);
    }

    /// Inverse Legendre transform: the unique v with legendre(x, v) = alpha.
    Vec2 legendre_inverse(Point x, Covec2 alpha) const {
        check_domain(x);
        if (alpha.x == 0.0 && alpha.y == 0.0)
            throw DomainError("legendre_inverse: zero covector");
        const double w = weight(x);
        return core_legendre_inverse(x, alpha / (w * w));
    }

    // ---- Hamiltonian data for the geodesic flow --------------------------

    struct HamiltonianDerivs {
        double dual;     // phi*(x, alpha)
        Vec2 dH_dalpha;  // phi* . d(phi*)/dalpha
        Vec2 dH_dx;      // phi* . d(phi*)/dx
    };

    /// H = (phi*)^2 / 2 and its first derivatives, all in closed form.
    HamiltonianDerivs hamiltonian(Point x, Covec2 alpha) const {
        DualDerivs d = core_dual_derivs(x, alpha);
        const double w = weight(x);
        const Vec2 lw = weight_log_gradient(x);
        const double dual = d.value / w;
        const Vec2 dstar_dalpha = d.dalpha / w;
        const Vec2 dstar_dx = (d.dx - d.value * lw) / w;
        return {dual, dstar_dalpha * dual, dstar_dx * dual};
    }

    /// Velocity of the unit cotangent flow: d(phi*)/dalpha at a phi*-unit
    /// covector equals the Legendre-inverse unit vector.
    Vec2 flow_velocity(Point x, Covec2 alpha) const {
        DualDerivs d = core_dual_derivs(x, alpha);
        return d.dalpha / weight(x);
    }

    // ---- derived metrics --------------------------------------------------

    /// phi_eps(v) = (1 + f(x)) phi(v); caller scales f beforehand.
    Metric conformally_scaled(ScalarField f) const {
        Metric m = *this;
        m.weights_.push_back({ConformalWeight::Kind::one_plus, std::move(f)});
        return m;
    }

    Metric exp_weighted(ScalarField u) const {
        Metric m = *this;
        m.weights_.push_back({ConformalWeight::Kind::exp_of, std::move(u)});
        return m;
    }

    enum class CoefficientTarget { g11, g12, g22, a11, a12, a22, b1, b2 };

    /// PerturbationSum support: adds a bump atom to one coefficient field of
    /// the core. Throws if the target does not exist in this core.
    Metric with_coefficient_bump(CoefficientTarget target, ScalarAtom atom) const {
        Metric m = *this;
        if (auto* rc = std::get_if<RiemannianCore>(&m.core_)) {
            switch (target) {
                case CoefficientTarget::g11: rc->g11.add(atom); return m;
                case CoefficientTarget::g12: rc->g12.add(atom); return m;
                case CoefficientTarget::g22: rc->g22.add(atom); return m;
                default: break;
            }
            throw ValidationError("coefficient bump: target not present in Riemannian core");
        }
        auto& rd = std::get<RandersCore>(m.core_);
        switch (target) {
            case CoefficientTarget::a11: rd.a11.add(atom); return m;
            case CoefficientTarget::a12: rd.a12.add(atom); return m;
            case CoefficientTarget::a22: rd.a22.add(atom); return m;
            case CoefficientTarget::b1: rd.b1.add(atom); return m;
            case CoefficientTarget::b2: rd.b2.add(atom); return m;
            default: break;
        }
        throw ValidationError("coefficient bump: target not present in Randers core");
    }

    /// Samples positivity / convexity / Randers-smallness over the full
    /// domain disc; throws ValidationError on the first violation.
    void validate(int base_samples = 200, int fiber_samples = 16) const;

  private:
    struct DualDerivs {
        double value;  // core dual norm s*(x, alpha)
        Vec2 dalpha;
        Vec2 dx;
    };

    // Integrator stages and boundary-tangency probes may poke slightly past
    // the declared disc; the catalog expressions are defined there, so allow
    // a small overshoot before calling it a domain error.
    void check_domain(Point x) const {
        if (!(x.radius() <= radius_ + std::max(0.02, 0.02 * radius_)))
            throw DomainError("point outside metric domain disc");
    }

    double core_norm(Point x, Vec2 v) const {
        if (const auto* rc = std::get_if<RiemannianCore>(&core_))
            return std::sqrt(std::max(0.0, rc->g(x).quad(v)));
        const auto& rd = std::get<RandersCore>(core_);
        return std::sqrt(std::max(0.0, rd.a(x).quad(v))) + dot(rd.beta(x), v);
    }

    double core_dual_norm(Point x, Covec2 alpha) const {
        if (const auto* rc = std::get_if<RiemannianCore>(&core_))
            return std::sqrt(std::max(0.0, rc->g(x).inverse().quad(alpha)));
        const auto& rd = std::get<RandersCore>(core_);
        const Sym2 A = rd.a(x).inverse();
        const Covec2 b = rd.beta(x);
        const double q = A.quad(alpha);
        const double m = dot(b, A.apply(alpha));
        const double b2 = A.quad(b);
        const double disc = std::sqrt(std::max(0.0, m * m + (1.0 - b2) * q));
        return (disc - m) / (1.0 - b2);
    }

    Covec2 core_legendre(Point x, Vec2 v) const {
        if (const auto* rc = std::get_if<RiemannianCore>(&core_))
            return rc->g(x).apply(v);
        const auto& rd = std::get<RandersCore>(core_);
        const Sym2 a = rd.a(x);
        const Covec2 b = rd.beta(x);
        const double na = std::sqrt(a.quad(v));
        const double phi = na + dot(b, v);
        return (a.apply(v) / na + b) * phi;
    }

    Vec2 core_legendre_inverse(Point x, Covec2 alpha) const {
        if (const auto* rc = std::get_if<RiemannianCore>(&core_))
            return rc->g(x).inverse().apply(alpha);
        const auto& rd = std::get<RandersCore>(core_);
        const Sym2 A = rd.a(x).inverse();
        const Covec2 b = rd.beta(x);
        const double s = core_dual_norm(x, alpha);
        const Covec2 ahat = alpha / s;
        const Vec2 y = A.apply(ahat - b);
        return y * (s / (1.0 + dot(b, y)));
    }

    DualDerivs core_dual_derivs(Point x, Covec2 alpha) const {
        if (const auto* rc = std::get_if<RiemannianCore>(&core_)) {
            const Sym2 g = rc->g(x);
            const Sym2 A = g.inverse();
            const double s = std::sqrt(std::max(1e-300, A.quad(alpha)));
            const Vec2 Aa = A.apply(alpha);
            // d_k A = -A (d_k g) A, so alpha^T (d_k A) alpha = -(A alpha)^T (d_k g) (A alpha)
            const double dxq = -rc->g_dx(x).quad(Aa);
            const double dyq = -rc->g_dy(x).quad(Aa);
            return {s, Aa / s, Vec2{dxq, dyq} / (2.0 * s)};
        }
        const auto& rd = std::get<RandersCore>(core_);
        const Sym2 a = rd.a(x);
        const Sym2 A = a.inverse();
        const Covec2 b = rd.beta(x);
        const Vec2 Aa = A.apply(alpha);
        const Vec2 Ab = A.apply(b);
        const double q = dot(alpha, Aa);
        const double m = dot(b, Aa);
        const double b2 = dot(b, Ab);
        const double om = 1.0 - b2;
        const double D = std::max(1e-300, m * m + om * q);
        const double sq = std::sqrt(D);
        const double s = (sq - m) / om;

        // alpha-derivatives
        const Vec2 dD_da = Ab * (2.0 * m) + Aa * (2.0 * om);
        const Vec2 ds_da = (dD_da / (2.0 * sq) - Ab) / om;

        // x-derivatives via the coefficient gradients
        const Vec2 ga11 = rd.a11.gradient(x), ga12 = rd.a12.gradient(x),
                   ga22 = rd.a22.gradient(x);
        const Vec2 gb1 = rd.b1.gradient(x), gb2 = rd.b2.gradient(x);
        Vec2 ds_dx{};
        for (int k = 0; k < 2; ++k) {
            const Sym2 a_k = k == 0 ? Sym2{ga11.x, ga12.x, ga22.x}
                                    : Sym2{ga11.y, ga12.y, ga22.y};
            const Covec2 b_k = k == 0 ? Covec2{gb1.x, gb2.x} : Covec2{gb1.y, gb2.y};
            // d_k A = -A a_k A
            const double q_k = -a_k.quad(Aa);
            const double m_k = dot(b_k, Aa) - a_k.bilinear(Ab, Aa);
            const double b2_k = 2.0 * dot(b_k, Ab) - a_k.quad(Ab);
            const double D_k = 2.0 * m * m_k + om * q_k - b2_k * q;
            const double N_k = D_k / (2.0 * sq) - m_k;
            const double s_k = (N_k * om + (sq - m) * b2_k) / (om * om);
            (k == 0 ? ds_dx.x : ds_dx.y) = s_k;
        }
        return {s, ds_da, ds_dx};
    }

    Core core_;
    std::vector<ConformalWeight> weights_;
    double radius_ = 1.2;
};

// ---- factories -----------------------------------------------------------

inline Metric euclidean_metric(double radius = 1.2) {
    return Metric(RiemannianCore{}, {}, radius);
}

inline Metric riemannian_metric(ScalarField g11, ScalarField g12, ScalarField g22,
                                double radius = 1.2) {
    return Metric(RiemannianCore{std::move(g11), std::move(g12), std::move(g22)}, {}, radius);
}

inline Metric conformal_euclidean_metric(ScalarField u, double radius = 1.2) {
    return Metric(RiemannianCore{}, {{ConformalWeight::Kind::exp_of, std::move(u)}}, radius);
}

/// Disc isometric to a polar cap of angular radius alpha0 on the unit
/// sphere: w(x) = 2 rho / (1 + rho^2 |x|^2), rho = tan(alpha0 / 2). The
/// unit circle maps to the cap boundary; points at |x| = r sit at polar
/// angle 2 atan(rho r), so the metric is simple as long as the extended
/// disc stays strictly inside the hemisphere.
inline Metric spherical_cap_metric(double alpha0, double radius = 1.2) {
    const double rho = std::tan(0.5 * alpha0);
    return conformal_euclidean_metric(ScalarField({ScalarAtom::cap_weight(rho)}), radius);
}

inline Metric randers_metric(ScalarField b1, ScalarField b2, double radius = 1.2) {
    RandersCore core;
    core.b1 = std::move(b1);
    core.b2 = std::move(b2);
    return Metric(std::move(core), {}, radius);
}

inline Metric randers_constant_metric(Covec2 beta, double radius = 1.2) {
    return randers_metric(ScalarField::constant(beta.x), ScalarField::constant(beta.y), radius);
}

/// phi_eps(v) = (1 + eps f(x)) phi(v) -- the conformal family of the ray
/// transform sections. Validates positivity and fiber convexity.
inline Metric conformal_metric(const Metric& base, const ScalarField& f, double eps,
                               int validation_samples = 200) {
    ScalarField scaled;
    for (ScalarAtom a : f.atoms()) {
        a.c *= eps;
        scaled.add(a);
    }
    Metric m = base.conformally_scaled(std::move(scaled));
    m.validate(validation_samples, 8);
    return m;
}

// ---- convexity report ------------------------------------------------------

/// Finite-difference fiber Hessian of phi^2 at (x, v); relative step.
inline Sym2 fiber_hessian_fd(const Metric& m, Point x, Vec2 v, double rel_step = 1e-5) {
    const double h = rel_step * std::max(1.0, v.norm());
    auto f = [&](Vec2 u) { const double n = m.norm(x, u); return n * n; };
    const Vec2 ex{h, 0.0}, ey{0.0, h};
    const double f0 = f(v);
    Sym2 H;
    H.a11 = (f(v + ex) - 2.0 * f0 + f(v - ex)) / (h * h);
    H.a22 = (f(v + ey) - 2.0 * f0 + f(v - ey)) / (h * h);
    H.a12 = (f(v + ex + ey) - f(v + ex - ey) - f(v - ex + ey) + f(v - ex - ey)) / (4.0 * h * h);
    return H;
}

/// Scans a deterministic base x fiber grid and reports the smallest fiber
/// Hessian eigenvalue of phi^2 (paper condition (4)). Never throws; a
/// non-convex metric is reported, not rejected.
inline ConvexityReport convexity_report(const Metric& m, int fiber_samples, int base_samples) {
    if (fiber_samples < 8 || base_samples < 8)
        throw ValidationError("convexity_report: sample counts must be >= 8");
    ConvexityReport rep;
    rep.fiber_samples = fiber_samples;
    rep.base_samples = base_samples;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    const double R = m.domain_radius();
    // sunflower layout covers the disc evenly and is deterministic
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < base_samples; ++i) {
        const double r = R * std::sqrt((i + 0.5) / base_samples);
        const Point x = point_on_circle(r, golden * i);
        for (int j = 0; j < fiber_samples; ++j) {
            const Vec2 v = dir(kTwoPi * j / fiber_samples);
            const double ev = fiber_hessian_fd(m, x, v).min_eigenvalue();
            if (ev < rep.min_eigenvalue) {
                rep.min_eigenvalue = ev;
                rep.worst_base = x;
                rep.worst_fiber = v;
            }
        }
    }
    return rep;
}

inline void Metric::validate(int base_samples, int fiber_samples) const {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < base_samples; ++i) {
        const double r = radius_ * std::sqrt((i + 0.5) / base_samples);
        const Point x = point_on_circle(r, golden * i);
        double w = 1.0;
        for (const auto& cw : weights_) w *= cw.value(x);
        if (!(w > 0.0) || !std::isfinite(w))
            throw ValidationError("metric validation: non-positive conformal weight");
        if (const auto* rc = std::get_if<RiemannianCore>(&core_)) {
            if (!rc->g(x).positive_definite())
                throw ValidationError("metric validation: Riemannian coefficients not positive definite");
        } else {
            const auto& rd = std::get<RandersCore>(core_);
            const Sym2 a = rd.a(x);
            if (!a.positive_definite())
                throw ValidationError("metric validation: Randers base not positive definite");
            if (!(a.inverse().quad(rd.beta(x)) < 1.0))
                throw ValidationError("metric validation: Randers one-form has norm >= 1");
        }
        for (int j = 0; j < fiber_samples; ++j) {
            const Vec2 v = dir(kTwoPi * (j + 0.25) / fiber_samples);
            if (!(norm(x, v) > 0.0))
                throw ValidationError("metric validation: norm not positive");
        }
    }
}

// ---- fiber-angle maximizer (cross-check oracle) ----------------------------

/// Direct computation of phi*(alpha) = max_theta alpha(e(theta)) / phi(e(theta))
/// by coarse grid scan plus damped Newton (finite-difference derivatives),
/// tolerance 1e-10, at most 50 iterations. Kept as an independent route for
/// testing the closed-form dual norms.
inline double dual_norm_fiber_opt(const Metric& m, Point x, Covec2 alpha,
                                  int grid = 64, double tol = 1e-10, int max_iter = 50) {
    auto h = [&](double th) {
        const Vec2 v = dir(th);
        return dot(alpha, v) / m.norm(x, v);
    };
    double best_th = angle_of(alpha);
    double best = h(best_th);
    for (int k = 0; k < grid; ++k) {
        const double th = kTwoPi * k / grid;
        const double val = h(th);
        if (val > best) { best = val; best_th = th; }
    }
    double th = best_th;
    const double eps = 1e-6;
    for (int it = 0; it < max_iter; ++it) {
        const double hp = (h(th + eps) - h(th - eps)) / (2.0 * eps);
        const double hpp = (h(th + eps) - 2.0 * h(th) + h(th - eps)) / (eps * eps);
        if (std::abs(hp) < tol) return h(th);
        double step = hpp < 0.0 ? -hp / hpp : (hp > 0 ? eps : -eps) * 100.0;
        // damping: do not accept a step that decreases the objective
        double cand = th + step;
        int halvings = 0;
        while (h(cand) < h(th) && halvings++ < 30) {
            step *= 0.5;
            cand = th + step;
        }
        th = cand;
    }
    const double hp = (h(th + eps) - h(th - eps)) / (2.0 * eps);
    if (std::abs(hp) > 1e-6)
        throw NumericalError("dual_norm_fiber_opt: Newton did not converge", std::abs(hp));
    return h(th);
}

}  // namespace finsler
