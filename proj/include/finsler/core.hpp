#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace finsler {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Thrown when an argument lies outside an operation's domain
/// (point outside the disc, zero vector to the Legendre transform, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Thrown by iterative solvers that fail to converge. Carries the residual
/// achieved by the last iterate so callers can report it.
struct NumericalError : std::runtime_error {
    double residual;
    explicit NumericalError(const std::string& what, double residual_achieved)
        : std::runtime_error(what + " (residual " + std::to_string(residual_achieved) + ")"),
          residual(residual_achieved) {}
};

/// Configuration/validation failures (bad schema, non-convex metric, ...).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline Vec2 unit(Vec2 v) { return v / v.norm(); }
inline Vec2 dir(double angle) { return {std::cos(angle), std::sin(angle)}; }
inline double angle_of(Vec2 v) { return std::atan2(v.y, v.x); }

/// A point of the plane. Kept distinct from Vec2 so that displacement
/// arithmetic (Point - Point = Vec2) stays type-checked.
struct Point {
    double x = 0.0;
    double y = 0.0;

    constexpr Point() = default;
    constexpr Point(double x_, double y_) : x(x_), y(y_) {}

    constexpr Point operator+(Vec2 v) const { return {x + v.x, y + v.y}; }
    constexpr Point operator-(Vec2 v) const { return {x - v.x, y - v.y}; }
    constexpr Vec2 operator-(Point o) const { return {x - o.x, y - o.y}; }

    double radius() const { return std::hypot(x, y); }
    double radius2() const { return x * x + y * y; }
    Vec2 as_vec() const { return {x, y}; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }

    /// Exact comparison on |x|, as the membership predicates are specified.
    bool in_disc(double r) const { return radius() <= r; }
};

inline Point point_on_circle(double r, double angle) {
    return {r * std::cos(angle), r * std::sin(angle)};
}

/// Wraps an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a > kPi) a -= kTwoPi;
    if (a <= -kPi) a += kTwoPi;
    return a;
}

/// Wraps an angle into [0, 2 pi).
inline double wrap_positive(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

// Covectors share the component layout of Vec2; the duality pairing is the
// Euclidean dot of components in the fixed Cartesian frame.
using Covec2 = Vec2;

inline double pairing(Covec2 alpha, Vec2 v) { return dot(alpha, v); }

/// Symmetric 2x2 matrix, used for metric coefficients and fiber Hessians.
struct Sym2 {
    double a11 = 1.0;
    double a12 = 0.0;
    double a22 = 1.0;

    Vec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }
    double quad(Vec2 v) const { return v.x * (a11 * v.x + a12 * v.y) + v.y * (a12 * v.x + a22 * v.y); }
    double bilinear(Vec2 u, Vec2 v) const { return dot(u, apply(v)); }
    double det() const { return a11 * a22 - a12 * a12; }
    double trace() const { return a11 + a22; }
    bool positive_definite() const { return a11 > 0.0 && det() > 0.0; }

    Sym2 inverse() const {
        const double d = det();
        return {a22 / d, -a12 / d, a11 / d};
    }
    Sym2 scaled(double s) const { return {a11 * s, a12 * s, a22 * s}; }

    double min_eigenvalue() const {
        const double half_tr = 0.5 * trace();
        const double disc = std::sqrt(std::max(0.0, half_tr * half_tr - det()));
        return half_tr - disc;
    }
};

}  // namespace finsler
