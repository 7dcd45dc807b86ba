// Test-side oracles, independent of the library's quadrature paths: radial
// integrals of isotropic momentum functions, sphere moments, and reference
// collision-frequency values.
#pragma once

#include <cmath>
#include <functional>

#include "rboltz/quadrature.hpp"

namespace oracles {

/// 4 pi int_0^inf r^2 f(r) dr for rapidly decaying f, by adaptive Simpson on
/// [0, 80] (integrands here all carry e^{-sqrt(1+r^2)} factors).
inline double radial_integral(const std::function<double(double)>& f, double tol = 1e-12) {
    return 4.0 * std::numbers::pi *
           rboltz::adaptive_simpson([&](double r) { return r * r * f(r); }, 0.0, 80.0, tol);
}

inline double p0_of(double r) { return std::sqrt(1.0 + r * r); }

/// Continuum equilibrium mass constant Z = int e^{-p0} dp.
inline double juttner_mass() {
    return radial_integral([](double r) { return std::exp(-p0_of(r)); });
}

/// Continuum moment int g(p0) J dp for the unit-mass equilibrium.
inline double juttner_moment(const std::function<double(double)>& g_of_p0) {
    const double z = juttner_mass();
    return radial_integral([&](double r) { return g_of_p0(p0_of(r)) * std::exp(-p0_of(r)); }) / z;
}

/// Reference collision frequency at p = 0 for the soft kernel
/// sigma = g^{-b} (isotropic angular part).  At p = 0 the integrand is
/// radial and the omega integral contributes 4 pi:
///   nu(0) = (4 pi / Z) int dq g^{1-b} sqrt(s) / q0 e^{-q0},
/// with g^2 = 2(q0 - 1) and s = g^2 + 4.
inline double nu_at_origin_soft(double b) {
    const double z = juttner_mass();
    return 4.0 * std::numbers::pi *
           radial_integral([&](double r) {
               const double q0 = p0_of(r);
               const double g2 = 2.0 * (q0 - 1.0);
               if (g2 <= 0.0) return 0.0;
               const double g = std::sqrt(g2);
               const double s = g2 + 4.0;
               return std::pow(g, 1.0 - b) * std::sqrt(s) / q0 * std::exp(-q0);
           }) /
           z;
}

} // namespace oracles
