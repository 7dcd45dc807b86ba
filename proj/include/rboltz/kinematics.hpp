#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rboltz/errors.hpp"
#include "rboltz/quadrature.hpp"

namespace rboltz {

/// 3-momentum with its energy p0 = sqrt(1 + |p|^2) cached at construction.
/// Units are normalized: c = m = k_B T = 1.
struct Momentum3 {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    double p0 = 1.0;

    Momentum3() = default;
    Momentum3(double x, double y, double z) : c{x, y, z} {
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
            throw std::invalid_argument("Momentum3: non-finite component");
        p0 = std::sqrt(1.0 + x * x + y * y + z * z);
    }

    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    double norm2() const { return c[0] * c[0] + c[1] * c[1] + c[2] * c[2]; }
    double norm() const { return std::sqrt(norm2()); }
    /// Normalized velocity p/p0, always subluminal.
    std::array<double, 3> phat() const { return {c[0] / p0, c[1] / p0, c[2] / p0}; }
};

inline double dot(const Momentum3& a, const Momentum3& b) {
    return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}

inline double energy(const Momentum3& p) { return p.p0; }

/// Lorentz-invariant pair variables of a binary collision.  s = g^2 + 4 holds
/// by construction.
struct CollisionInvariants {
    double g = 0.0;             ///< relative momentum
    double s = 4.0;             ///< total-energy invariant
    double moller = 0.0;        ///< Moller velocity g*sqrt(s)/(p0 q0)
    double gamma_lorentz = 1.0; ///< (p0+q0)/sqrt(s), >= 1
};

inline CollisionInvariants relative_invariants(const Momentum3& p, const Momentum3& q) {
    const double e = p.p0 * q.p0;
    double rad = 2.0 * (e - dot(p, q) - 1.0);
    // The radicand is >= 0 analytically; rounding may push it slightly below.
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * e;
    if (rad < -tol)
        throw numerics_error("relative_invariants: negative radicand beyond rounding tolerance");
    if (rad < 0.0) rad = 0.0;
    CollisionInvariants inv;
    inv.g = std::sqrt(rad);
    inv.s = rad + 4.0;
    const double sqrt_s = std::sqrt(inv.s);
    inv.moller = inv.g * sqrt_s / e;
    inv.gamma_lorentz = (p.p0 + q.p0) / sqrt_s;
    return inv;
}

struct PostCollision {
    Momentum3 p_out;
    Momentum3 q_out;
    double cos_theta = 1.0; ///< scattering-angle cosine, invariant definition
};

/// Center-of-momentum parametrization of the outgoing pair:
///   p' = (p+q)/2 + (g/2) [ w + (gamma-1) (p+q) ((p+q).w) / |p+q|^2 ],
///   q' = (p+q) - p'.
/// The (gamma-1) term vanishes identically in the limit p+q -> 0, which is
/// taken exactly below |p+q|^2 = eps_pq.  cos(theta) is computed from the
/// Minkowski product of the pre/post relative four-momenta and equals 1 for
/// the trivial collision g = 0.
inline PostCollision post_collision(const Momentum3& p, const Momentum3& q,
                                    const std::array<double, 3>& omega) {
    const double wn = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2];
    if (std::abs(wn - 1.0) > 1e-12)
        throw std::invalid_argument("post_collision: omega must be a unit vector");

    const CollisionInvariants inv = relative_invariants(p, q);
    const std::array<double, 3> t{p.c[0] + q.c[0], p.c[1] + q.c[1], p.c[2] + q.c[2]};
    const double t2 = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
    constexpr double eps_pq = 1e-14;

    double corr = 0.0;
    if (t2 > eps_pq) {
        const double tw = t[0] * omega[0] + t[1] * omega[1] + t[2] * omega[2];
        corr = (inv.gamma_lorentz - 1.0) * tw / t2;
    }
    const double half_g = 0.5 * inv.g;
    std::array<double, 3> d;
    for (std::size_t i = 0; i < 3; ++i) d[i] = half_g * (omega[i] + corr * t[i]);

    PostCollision out;
    out.p_out = Momentum3(0.5 * t[0] + d[0], 0.5 * t[1] + d[1], 0.5 * t[2] + d[2]);
    out.q_out = Momentum3(0.5 * t[0] - d[0], 0.5 * t[1] - d[1], 0.5 * t[2] - d[2]);

    if (inv.g == 0.0) {
        out.cos_theta = 1.0;
    } else {
        double num = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            num += (p.c[i] - q.c[i]) * (out.p_out.c[i] - out.q_out.c[i]);
        num -= (p.p0 - q.p0) * (out.p_out.p0 - out.q_out.p0);
        double ct = num / (inv.g * inv.g);
        if (ct > 1.0) ct = 1.0;
        if (ct < -1.0) ct = -1.0;
        out.cos_theta = ct;
    }
    return out;
}

enum class JuttnerMode {
    paper,     ///< e^{-p0} / (4 pi), the literal expression
    normalized ///< e^{-p0} / Z with Z = int e^{-p0} dp, so the distribution has unit mass
};

namespace detail {

inline double juttner_mass_constant() {
    // Z = 4 pi int_0^inf r^2 e^{-sqrt(1+r^2)} dr; the integrand is below
    // 1e-22 past r = 60.
    static const double z = 4.0 * std::numbers::pi *
                            adaptive_simpson([](double r) { return r * r * std::exp(-std::sqrt(1.0 + r * r)); },
                                             0.0, 60.0, 1e-13);
    return z;
}

} // namespace detail

inline double juttner(const Momentum3& p, JuttnerMode mode = JuttnerMode::normalized) {
    const double e = std::exp(-p.p0);
    if (mode == JuttnerMode::paper) return e / (4.0 * std::numbers::pi);
    return e / detail::juttner_mass_constant();
}

/// Momentum and temporal weight orders: w_l(p) = (p0)^{l b / 2} and
/// varpi_k(t) = (1+t)^k.
struct WeightSpec {
    double ell = 0.0;
    double b_exponent = 1.0;
    double decay_order = 0.0;
};

inline double momentum_weight(double ell, double b_exponent, const Momentum3& p) {
    return std::pow(p.p0, 0.5 * ell * b_exponent);
}

inline double temporal_weight(double decay_order, double t) {
    return std::pow(1.0 + t, decay_order);
}

inline std::pair<double, double> weights(const WeightSpec& spec, const Momentum3& p, double t) {
    if (t < 0.0) throw std::invalid_argument("weights: t must be >= 0");
    return {momentum_weight(spec.ell, spec.b_exponent, p), temporal_weight(spec.decay_order, t)};
}

} // namespace rboltz
