#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rboltz/kinematics.hpp"

namespace rboltz {

/// Eight-point trilinear stencil of a point in the grid cube.  Interpolation
/// weights sum to one; `clamped` marks points that had to be pulled back to
/// the hull (their coordinates are clamped to the boundary first).
struct TrilinearStencil {
    std::uint32_t index[8];
    double weight[8];
    bool clamped = false;
};

/// Uniform symmetric tensor grid on [-p_max, p_max]^3 with trapezoidal
/// quadrature weights.  Node ordering is lexicographic in (ix, iy, iz), so
/// every reduction over nodes is deterministic.
class MomentumGrid {
public:
    MomentumGrid(double p_max, int n_per_axis) : p_max_(p_max), n_(n_per_axis) {
        if (n_per_axis < 5 || n_per_axis % 2 == 0)
            throw std::invalid_argument("MomentumGrid: n_per_axis must be odd and >= 5");
        if (!(p_max > 0.0)) throw std::invalid_argument("MomentumGrid: p_max must be > 0");
        h_ = 2.0 * p_max / (n_ - 1);
        axis_.resize(n_);
        axis_weight_.resize(n_);
        const int half = (n_ - 1) / 2;
        for (int i = 0; i < n_; ++i) {
            axis_[i] = (i - half) * h_; // exact reflection symmetry in floating point
            axis_weight_[i] = (i == 0 || i == n_ - 1) ? 0.5 * h_ : h_;
        }
        nodes_.reserve(static_cast<std::size_t>(n_) * n_ * n_);
        quad_weights_.reserve(nodes_.capacity());
        for (int ix = 0; ix < n_; ++ix)
            for (int iy = 0; iy < n_; ++iy)
                for (int iz = 0; iz < n_; ++iz) {
                    nodes_.emplace_back(axis_[ix], axis_[iy], axis_[iz]);
                    quad_weights_.push_back(axis_weight_[ix] * axis_weight_[iy] * axis_weight_[iz]);
                }
    }

    double p_max() const { return p_max_; }
    int n_per_axis() const { return n_; }
    double spacing() const { return h_; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Momentum3>& nodes() const { return nodes_; }
    const std::vector<double>& quad_weights() const { return quad_weights_; }
    const Momentum3& node(std::size_t i) const { return nodes_[i]; }
    double quad_weight(std::size_t i) const { return quad_weights_[i]; }

    std::size_t flat_index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * n_ + iy) * n_ + iz;
    }

    /// Index of the reflected node -p; the grid is symmetric by construction.
    std::size_t negated_index(std::size_t i) const {
        int iz = static_cast<int>(i) % n_;
        int iy = (static_cast<int>(i) / n_) % n_;
        int ix = static_cast<int>(i) / (n_ * n_);
        return flat_index(n_ - 1 - ix, n_ - 1 - iy, n_ - 1 - iz);
    }

    TrilinearStencil stencil(double x, double y, double z) const {
        TrilinearStencil s;
        double c[3] = {x, y, z};
        int base[3];
        double frac[3];
        for (int d = 0; d < 3; ++d) {
            if (c[d] < -p_max_ || c[d] > p_max_) {
                s.clamped = true;
                c[d] = std::clamp(c[d], -p_max_, p_max_);
            }
            double u = (c[d] + p_max_) / h_;
            int b = static_cast<int>(std::floor(u));
            if (b > n_ - 2) b = n_ - 2;
            if (b < 0) b = 0;
            base[d] = b;
            frac[d] = u - b;
        }
        int k = 0;
        for (int dx = 0; dx < 2; ++dx)
            for (int dy = 0; dy < 2; ++dy)
                for (int dz = 0; dz < 2; ++dz, ++k) {
                    s.index[k] = static_cast<std::uint32_t>(
                        flat_index(base[0] + dx, base[1] + dy, base[2] + dz));
                    s.weight[k] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                                  (dz ? frac[2] : 1.0 - frac[2]);
                }
        return s;
    }

private:
    double p_max_;
    int n_;
    double h_;
    std::vector<double> axis_;
    std::vector<double> axis_weight_;
    std::vector<Momentum3> nodes_;
    std::vector<double> quad_weights_;
};

inline MomentumGrid build_grid(double p_max, int n_per_axis) { return MomentumGrid(p_max, n_per_axis); }

/// Fixed-order discrete integral: sum_i w_i v_i accumulated in node order.
template <class Vec>
auto integrate(const MomentumGrid& grid, const Vec& values) {
    if (static_cast<std::size_t>(values.size()) != grid.size())
        throw std::invalid_argument("integrate: one value per grid node required");
    using Scalar = std::decay_t<decltype(values[0])>;
    Scalar acc = Scalar(0);
    for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.quad_weight(i) * values[i];
    return acc;
}

/// Equilibrium values at the nodes, normalized so the *discrete* mass is
/// exactly one: J_i = e^{-p0_i} / sum_k w_k e^{-p0_k}.  All operator and
/// moment machinery is built on this discretely normalized equilibrium, so
/// the algebraic identities behind the balance laws hold on the grid to
/// rounding rather than to quadrature accuracy.
inline std::vector<double> discrete_juttner(const MomentumGrid& grid) {
    std::vector<double> j(grid.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        j[i] = std::exp(-grid.node(i).p0);
        mass += grid.quad_weight(i) * j[i];
    }
    for (auto& v : j) v /= mass;
    return j;
}

struct GridDiagnostics {
    double j_mass = 0.0;       ///< discrete integral of the normalized Juttner function
    double j_mass_defect = 0.0;///< |j_mass - 1|
    double tail_bound = 0.0;   ///< continuum Juttner mass outside the ball |p| <= p_max
};

inline GridDiagnostics grid_diagnostics(const MomentumGrid& grid) {
    GridDiagnostics d;
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        acc += grid.quad_weight(i) * juttner(grid.node(i), JuttnerMode::normalized);
    d.j_mass = acc;
    d.j_mass_defect = std::abs(acc - 1.0);
    d.tail_bound = 4.0 * std::numbers::pi / detail::juttner_mass_constant() *
                   adaptive_simpson([](double r) { return r * r * std::exp(-std::sqrt(1.0 + r * r)); },
                                    grid.p_max(), grid.p_max() + 80.0, 1e-14);
    return d;
}

} // namespace rboltz
