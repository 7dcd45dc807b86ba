#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rboltz/errors.hpp"

namespace rboltz {

/// Scattering cross-section model.  The representative kernels are
///   soft:  sigma = g^{-b} sin^gamma(theta)
///   hard:  sigma = (g^a + g^{-b}) sin^gamma(theta)
/// which satisfy the admissible two-sided growth/decay bounds since
/// g/sqrt(s) <= 1.
struct KernelModel {
    enum class Kind { soft, hard };

    Kind kind = Kind::soft;
    double b_exponent = 1.0;
    double a_exponent = 0.0;       ///< hard potentials only
    double angular_exponent = 0.0; ///< gamma in sin^gamma(theta), > -2
    double chi_epsilon = 0.1;      ///< cutoff scale of the smooth chi ramp
    double zeta = 0.0;             ///< min{2-|gamma|, 4-b, 2}/4

    static KernelModel soft(double b, double gamma, double chi_epsilon = 0.1) {
        if (!(gamma > -2.0))
            throw std::invalid_argument("KernelModel: angular exponent must satisfy gamma > -2");
        if (!(b > 0.0 && b < std::min(4.0, 4.0 + gamma)))
            throw std::invalid_argument(
                "KernelModel: soft potential requires 0 < b < min(4, 4+gamma), got b=" +
                std::to_string(b));
        if (!(chi_epsilon > 0.0)) throw std::invalid_argument("KernelModel: chi_epsilon must be > 0");
        KernelModel m;
        m.kind = Kind::soft;
        m.b_exponent = b;
        m.angular_exponent = gamma;
        m.chi_epsilon = chi_epsilon;
        m.zeta = std::min({2.0 - std::abs(gamma), 4.0 - b, 2.0}) / 4.0;
        return m;
    }

    static KernelModel hard(double a, double b, double gamma, double chi_epsilon = 0.1) {
        if (!(gamma > -2.0))
            throw std::invalid_argument("KernelModel: angular exponent must satisfy gamma > -2");
        if (!(a >= 0.0 && a <= 2.0 + gamma))
            throw std::invalid_argument("KernelModel: hard potential requires 0 <= a <= 2+gamma");
        if (!(b >= 0.0 && b < std::min(4.0, 4.0 + gamma)))
            throw std::invalid_argument("KernelModel: hard potential requires 0 <= b < min(4, 4+gamma)");
        if (!(chi_epsilon > 0.0)) throw std::invalid_argument("KernelModel: chi_epsilon must be > 0");
        KernelModel m;
        m.kind = Kind::hard;
        m.a_exponent = a;
        m.b_exponent = b;
        m.angular_exponent = gamma;
        m.chi_epsilon = chi_epsilon;
        m.zeta = std::min({2.0 - std::abs(gamma), 4.0 - b, 2.0}) / 4.0;
        return m;
    }

    /// Smooth cutoff ramp: 0 for g <= eps, 1 for g >= 2 eps, cubic in between.
    double chi(double g) const {
        if (g <= chi_epsilon) return 0.0;
        if (g >= 2.0 * chi_epsilon) return 1.0;
        const double u = (g - chi_epsilon) / chi_epsilon;
        return u * u * (3.0 - 2.0 * u);
    }
};

inline bool b_positive(const KernelModel& model) { return model.b_exponent > 0.0; }

/// Evaluate the representative cross-section.  The angular factor is floored
/// at sin(theta) = 1e-12 for negative exponents; the singular ring is a null
/// set and quadrature nodes land on it only by accident.
inline double sigma_eval(const KernelModel& model, double g, double cos_theta) {
    if (std::abs(cos_theta) > 1.0 + 1e-12)
        throw std::invalid_argument("sigma_eval: |cos_theta| must be <= 1");
    cos_theta = std::clamp(cos_theta, -1.0, 1.0);
    if (g <= 0.0 && b_positive(model))
        throw std::domain_error("sigma_eval: g = 0 singularity, caller must cut off");
    double angular = 1.0;
    if (model.angular_exponent != 0.0) {
        double sin_th = std::sqrt(std::max(0.0, (1.0 - cos_theta) * (1.0 + cos_theta)));
        if (model.angular_exponent < 0.0) sin_th = std::max(sin_th, 1e-12);
        angular = std::pow(sin_th, model.angular_exponent);
    }
    if (model.kind == KernelModel::Kind::soft) return std::pow(g, -model.b_exponent) * angular;
    const double grow = model.a_exponent == 0.0 ? 1.0 : std::pow(g, model.a_exponent);
    const double decay = model.b_exponent == 0.0 ? 1.0 : std::pow(g, -model.b_exponent);
    return (grow + decay) * angular;
}

} // namespace rboltz
