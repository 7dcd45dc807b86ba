#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rboltz/quadrature.hpp"

namespace rboltz {

/// Quadrature rule on the unit sphere; weights are positive and sum to 4 pi.
struct SphereRule {
    std::vector<std::array<double, 3>> nodes;
    std::vector<double> weights;
    int order = 0;
    std::size_t size() const { return nodes.size(); }
};

/// Product rule: Gauss-Legendre with `order` nodes in cos(theta) times a
/// uniform rule with 2*order azimuths.  Exact on spherical harmonics up to
/// degree 2*order - 1.
inline SphereRule sphere_rule(int order) {
    if (order < 1 || order > 256) throw std::invalid_argument("sphere_rule: unsupported order");
    SphereRule rule;
    rule.order = order;
    const Rule1D gl = gauss_legendre(order);
    const int n_az = 2 * order;
    const double w_az = 2.0 * std::numbers::pi / n_az;
    rule.nodes.reserve(static_cast<std::size_t>(order) * n_az);
    rule.weights.reserve(rule.nodes.capacity());
    for (int i = 0; i < order; ++i) {
        const double mu = gl.nodes[i];
        const double sin_th = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        for (int j = 0; j < n_az; ++j) {
            const double phi = w_az * (j + 0.5);
            rule.nodes.push_back({sin_th * std::cos(phi), sin_th * std::sin(phi), mu});
            rule.weights.push_back(gl.weights[i] * w_az);
        }
    }
    return rule;
}

} // namespace rboltz
