#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "finsler/core.hpp"

namespace finsler {

/// One closed-form term of a scalar coefficient function. The catalog is
/// fixed so that values and gradients are analytic everywhere on the plane:
///   monomial   c * x^i * y^j            (i = j = 0 gives a constant)
///   gaussian   c * exp(-|x - x0|^2 / (2 sigma^2))
///   cap_weight c * log(2 rho / (1 + rho^2 |x|^2))
/// cap_weight is the log-conformal factor whose exponential pulls the
/// round-sphere metric back to the plane (stereographic chart scaled so the
/// unit circle maps to the polar circle of angular radius 2 atan(rho)).
struct ScalarAtom {
    enum class Kind { monomial, gaussian, cap_weight };

    Kind kind = Kind::monomial;
    double c = 0.0;
    int px = 0;       // monomial exponents
    int py = 0;
    Point center{};   // gaussian center
    double sigma = 1.0;
    double rho = 1.0;  // cap parameter, rho = tan(alpha0 / 2)

    static ScalarAtom constant(double c) { return {Kind::monomial, c, 0, 0, {}, 1.0, 1.0}; }
    static ScalarAtom monomial(double c, int px, int py) {
        return {Kind::monomial, c, px, py, {}, 1.0, 1.0};
    }
    static ScalarAtom gaussian(double c, Point center, double sigma) {
        return {Kind::gaussian, c, 0, 0, center, sigma, 1.0};
    }
    static ScalarAtom cap_weight(double rho) {
        return {Kind::cap_weight, 1.0, 0, 0, {}, 1.0, rho};
    }

    double value(Point p) const {
        switch (kind) {
            case Kind::monomial:
                return c * ipow(p.x, px) * ipow(p.y, py);
            case Kind::gaussian: {
                const Vec2 d = p - center;
                return c * std::exp(-0.5 * d.norm2() / (sigma * sigma));
            }
            case Kind::cap_weight:
                return c * std::log(2.0 * rho / (1.0 + rho * rho * p.radius2()));
        }
        return 0.0;
    }

    Vec2 gradient(Point p) const {
        switch (kind) {
            case Kind::monomial: {
                const double gx = px == 0 ? 0.0 : c * px * ipow(p.x, px - 1) * ipow(p.y, py);
                const double gy = py == 0 ? 0.0 : c * py * ipow(p.x, px) * ipow(p.y, py - 1);
                return {gx, gy};
            }
            case Kind::gaussian: {
                const Vec2 d = p - center;
                const double v = c * std::exp(-0.5 * d.norm2() / (sigma * sigma));
                return d * (-v / (sigma * sigma));
            }
            case Kind::cap_weight: {
                const double r2 = rho * rho;
                const double s = -2.0 * c * r2 / (1.0 + r2 * p.radius2());
                return {s * p.x, s * p.y};
            }
        }
        return {};
    }

  private:
    static double ipow(double b, int e) {
        double r = 1.0;
        for (int k = 0; k < e; ++k) r *= b;
        return r;
    }
};

/// A finite sum of catalog atoms. Immutable after construction; evaluation
/// is pure and thread-safe.
class ScalarField {
  public:
    ScalarField() = default;
    explicit ScalarField(std::vector<ScalarAtom> atoms) : atoms_(std::move(atoms)) {}

    static ScalarField constant(double c) { return ScalarField({ScalarAtom::constant(c)}); }
    static ScalarField zero() { return ScalarField(); }

    double value(Point p) const {
        double v = 0.0;
        for (const auto& a : atoms_) v += a.value(p);
        return v;
    }

    Vec2 gradient(Point p) const {
        Vec2 g{};
        for (const auto& a : atoms_) g += a.gradient(p);
        return g;
    }

    ScalarField& add(ScalarAtom atom) {
        atoms_.push_back(atom);
        return *this;
    }

    bool empty() const { return atoms_.empty(); }
    const std::vector<ScalarAtom>& atoms() const { return atoms_; }

  private:
    std::vector<ScalarAtom> atoms_;
};

/// f = 1 - x^2 - y^2; vanishes on the unit circle.
inline ScalarField boundary_vanishing_poly() {
    return ScalarField({ScalarAtom::constant(1.0), ScalarAtom::monomial(-1.0, 2, 0),
                        ScalarAtom::monomial(-1.0, 0, 2)});
}

}  // namespace finsler
