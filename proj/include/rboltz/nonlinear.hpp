#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>

#include "rboltz/mode.hpp"

namespace rboltz {

/// Real field on a line of collinear spatial frequencies k1 * e1,
/// k1 in {-cutoff..cutoff} * dk, stored for k1 >= 0 with the Hermitian
/// convention values(-k1) = conj(values(k1)).
struct SlabField {
    double dk = 0.5;
    std::vector<VecC> values; ///< index n holds the component at n * dk, n >= 0
    double t = 0.0;

    int cutoff() const { return static_cast<int>(values.size()) - 1; }
    /// Component at signed index n (negative through conjugation).
    VecC component(int n) const {
        if (n >= 0) return values[static_cast<std::size_t>(n)];
        return values[static_cast<std::size_t>(-n)].conjugate();
    }
};

/// L2_x norm surrogate per (node, time): |f|^2 summed over the frequency
/// line including the conjugate half.
inline Vec slab_x_norm2(const SlabField& f) {
    const Eigen::Index n = f.values[0].size();
    Vec acc = Vec::Zero(n);
    for (int m = 0; m <= f.cutoff(); ++m) {
        const double mult = m == 0 ? 1.0 : 2.0;
        for (Eigen::Index i = 0; i < n; ++i) acc[i] += mult * std::norm(f.values[static_cast<std::size_t>(m)][i]);
    }
    return acc;
}

/// Truncated frequency convolution of the quadratic collision term:
/// Gamma_hat(n) = sum_{n'} Gamma(f(n'), f(n - n')), both factors inside the
/// cutoff.  Direct summation; no aliasing enters the truncated set.
inline std::vector<VecC> slab_gamma(const CollisionEngine& engine, const SlabField& f) {
    const int cut = f.cutoff();
    std::vector<VecC> out(static_cast<std::size_t>(cut) + 1);
    for (int n = 0; n <= cut; ++n) {
        VecC acc = VecC::Zero(f.values[0].size());
        for (int np = -cut; np <= cut; ++np) {
            const int nq = n - np;
            if (nq < -cut || nq > cut) continue;
            acc += engine.apply_gamma<std::complex<double>>(f.component(np), f.component(nq));
        }
        out[static_cast<std::size_t>(n)] = acc;
    }
    return out;
}

struct PicardOptions {
    double horizon = 30.0;
    int n_time_nodes = 30; ///< uniform Duhamel ladder (trapezoid in s)
    int n_iters = 4;
    double ell = 1.0;
    double decay_order = 0.75; ///< temporal weight order in the iteration norm
    int threads = 0;
};

struct PicardReport {
    std::vector<double> times;
    std::vector<std::vector<VecC>> iterate; ///< final iterate: [time][freq>=0]
    std::vector<double> contraction_ratios; ///< |df_{n+1}|/|df_n| in the weighted sup norm
    std::vector<double> increment_norms;
    double weighted_sup_initial = 0.0;
    bool contracting = false;
};

/// Weighted sup norm sup_{t,p} varpi_k(t) w_l(p) (sum_k1 |f(t,k1,p)|^2)^{1/2}
/// over a slab trajectory.
inline double slab_weighted_sup(const MomentumGrid& grid, const Vec& w_ell,
                                const std::vector<double>& times,
                                const std::vector<SlabField>& traj, double decay_order) {
    double sup = 0.0;
    for (std::size_t it = 0; it < traj.size(); ++it) {
        const Vec x2 = slab_x_norm2(traj[it]);
        const double varpi = std::pow(1.0 + times[it], decay_order);
        for (Eigen::Index i = 0; i < x2.size(); ++i)
            sup = std::max(sup, varpi * w_ell[i] * std::sqrt(x2[i]));
    }
    return sup;
}

/// Mild-solution Picard iteration for the perturbation equation on the slab:
/// f^{(n+1)}(t) = U(t) f0 + int_0^t U(t-s) Gamma(f^(n), f^(n))(s) ds.
inline PicardReport picard_iterate(const OperatorMatrices& ops, const CollisionEngine& engine,
                                   const SlabField& f0, const PicardOptions& opt) {
    const MomentumGrid& grid = ops.grid;
    const int cut = f0.cutoff();
    const int m = opt.n_time_nodes;
    const double h = opt.horizon / m;
    const Vec w_ell = weight_sq(grid, 0.5 * opt.ell, ops.model.b_exponent); // w_l itself

    // One propagator per nonnegative frequency on the line.
    std::vector<ModePropagator> props;
    props.reserve(static_cast<std::size_t>(cut) + 1);
    for (int n = 0; n <= cut; ++n)
        props.emplace_back(assemble_mode_generator(ops, Eigen::Vector3d(n * f0.dk, 0.0, 0.0)));

    std::vector<double> times(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) times[static_cast<std::size_t>(i)] = i * h;

    // Linear part U(t) f0, reused by every iterate.
    std::vector<SlabField> linear(times.size());
    {
        std::vector<VecC> coeffs(static_cast<std::size_t>(cut) + 1);
        for (int n = 0; n <= cut; ++n)
            coeffs[static_cast<std::size_t>(n)] = props[static_cast<std::size_t>(n)].prepare(
                f0.values[static_cast<std::size_t>(n)]);
        for (std::size_t it = 0; it < times.size(); ++it) {
            linear[it].dk = f0.dk;
            linear[it].t = times[it];
            linear[it].values.resize(static_cast<std::size_t>(cut) + 1);
            for (int n = 0; n <= cut; ++n)
                linear[it].values[static_cast<std::size_t>(n)] =
                    props[static_cast<std::size_t>(n)].state(coeffs[static_cast<std::size_t>(n)], times[it]);
        }
    }

    PicardReport rep;
    rep.times = times;
    rep.weighted_sup_initial = slab_weighted_sup(grid, w_ell, {0.0}, {f0}, opt.decay_order);

    std::vector<SlabField> current = linear, previous;
    std::vector<double> diff_norms;
    for (int iter = 0; iter < opt.n_iters; ++iter) {
        // Gamma of the current iterate at every ladder node, in eigenbasis
        // coordinates so U(t-s) applications are diagonal.
        std::vector<std::vector<VecC>> gam_coeffs(times.size(),
                                                  std::vector<VecC>(static_cast<std::size_t>(cut) + 1));
        for (std::size_t it = 0; it < times.size(); ++it) {
            const auto gam = slab_gamma(engine, current[it]);
            for (int n = 0; n <= cut; ++n)
                gam_coeffs[it][static_cast<std::size_t>(n)] =
                    props[static_cast<std::size_t>(n)].prepare(gam[static_cast<std::size_t>(n)]);
        }

        std::vector<SlabField> next(times.size());
        next[0] = linear[0];
        for (std::size_t it = 1; it < times.size(); ++it) {
            next[it] = linear[it];
            for (std::size_t is = 0; is <= it; ++is) {
                const double w = (is == 0 || is == it) ? 0.5 * h : h; // trapezoid in s
                const double lag = times[it] - times[is];
                for (int n = 0; n <= cut; ++n)
                    next[it].values[static_cast<std::size_t>(n)] +=
                        w * props[static_cast<std::size_t>(n)].state(
                                gam_coeffs[is][static_cast<std::size_t>(n)], lag);
            }
        }
        // Weighted sup distance between consecutive iterates.
        double diff = 0.0;
        for (std::size_t it = 0; it < times.size(); ++it) {
            SlabField d = next[it];
            for (int n = 0; n <= cut; ++n)
                d.values[static_cast<std::size_t>(n)] -= current[it].values[static_cast<std::size_t>(n)];
            diff = std::max(diff, slab_weighted_sup(grid, w_ell, {times[it]}, {d}, opt.decay_order));
        }
        diff_norms.push_back(diff);
        previous = std::move(current);
        current = std::move(next);
    }
    rep.increment_norms = diff_norms;
    for (std::size_t i = 1; i < diff_norms.size(); ++i)
        rep.contraction_ratios.push_back(diff_norms[i] / std::max(diff_norms[i - 1], 1e-300));
    rep.contracting = true;
    for (double r : rep.contraction_ratios) rep.contracting = rep.contracting && r < 1.0;
    if (!rep.contracting)
        throw numerics_error("picard_iterate: no contraction, initial data too large "
                             "(weighted sup " + std::to_string(rep.weighted_sup_initial) + ")");
    rep.iterate.resize(times.size());
    for (std::size_t it = 0; it < times.size(); ++it) rep.iterate[it] = current[it].values;
    return rep;
}

// ---- spatially homogeneous nonlinear layer --------------------------------

struct HomogeneousState {
    Vec F; ///< nonnegative distribution at the nodes
    double t = 0.0;
};

struct PositivityOptions {
    double dt = 0.1;
    double horizon = 8.0;
    int n_outer = 3;
};

struct PositivityReport {
    std::vector<double> times;
    std::vector<std::vector<Vec>> outer_trajectories; ///< [outer][time] -> F
    std::vector<double> outer_sup_diff; ///< sup |F^{n+1} - F^n| over (t, p)
    double min_value = 0.0;             ///< min over all iterates, times, nodes
};

/// Positivity-preserving gain/loss iteration for the homogeneous equation:
/// each outer iterate solves d/dt F^{n+1} + R(F^n) F^{n+1} = Q+(F^n, F^n)
/// by an exact integrating-factor step (R frozen per step, Q+ trapezoidal),
/// which keeps F >= 0 without any tolerance.
inline PositivityReport positivity_iterate(const CollisionEngine& engine, const Vec& F0,
                                           const PositivityOptions& opt) {
    for (Eigen::Index i = 0; i < F0.size(); ++i)
        if (F0[i] < 0.0) throw std::invalid_argument("positivity_iterate: F0 must be >= 0");
    const int m = static_cast<int>(std::llround(opt.horizon / opt.dt));
    PositivityReport rep;
    rep.times.resize(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) rep.times[static_cast<std::size_t>(i)] = i * opt.dt;

    // Seed iterate: constant-in-time initial data.
    std::vector<Vec> prev(rep.times.size(), F0);
    rep.min_value = F0.minCoeff();
    for (int outer = 0; outer < opt.n_outer; ++outer) {
        // Gain and loss of the previous iterate at the ladder nodes.
        std::vector<Vec> qplus(rep.times.size()), rate(rep.times.size());
        for (std::size_t it = 0; it < rep.times.size(); ++it) {
            auto gl = engine.apply_gain_loss(prev[it], prev[it]);
            qplus[it] = std::move(gl.q_plus);
            rate[it] = std::move(gl.r_of_g);
        }
        std::vector<Vec> next(rep.times.size());
        next[0] = F0;
        for (int i = 0; i < m; ++i) {
            const Vec& r = rate[static_cast<std::size_t>(i)];
            Vec qbar = 0.5 * (qplus[static_cast<std::size_t>(i)] + qplus[static_cast<std::size_t>(i) + 1]);
            Vec f_new(F0.size());
            for (Eigen::Index g = 0; g < F0.size(); ++g) {
                const double x = r[g] * opt.dt;
                const double decay = std::exp(-x);
                const double src = x > 1e-12 ? -std::expm1(-x) / r[g] : opt.dt;
                f_new[g] = decay * next[static_cast<std::size_t>(i)][g] + src * qbar[g];
            }
            next[static_cast<std::size_t>(i) + 1] = std::move(f_new);
        }
        double sup_diff = 0.0;
        for (std::size_t it = 0; it < rep.times.size(); ++it) {
            sup_diff = std::max(sup_diff, (next[it] - prev[it]).cwiseAbs().maxCoeff());
            rep.min_value = std::min(rep.min_value, next[it].minCoeff());
        }
        rep.outer_sup_diff.push_back(sup_diff);
        rep.outer_trajectories.push_back(next);
        prev = std::move(next);
    }
    return rep;
}

/// Discrete entropy H(F) = -sum w F log F with the 0 log 0 = 0 convention.
inline double entropy(const MomentumGrid& grid, const Vec& F) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double f = F[static_cast<Eigen::Index>(i)];
        if (f < 0.0) throw std::invalid_argument("entropy: F must be >= 0");
        if (f > 0.0) acc -= grid.quad_weight(i) * f * std::log(f);
    }
    return acc;
}

/// Discrete (mass, momentum, energy) moments of a distribution.
inline std::array<double, 5> collision_moments(const MomentumGrid& grid, const Vec& F) {
    std::array<double, 5> m{};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double wf = grid.quad_weight(i) * F[static_cast<Eigen::Index>(i)];
        const Momentum3& p = grid.node(i);
        m[0] += wf;
        m[1] += wf * p.c[0];
        m[2] += wf * p.c[1];
        m[3] += wf * p.c[2];
        m[4] += wf * p.p0;
    }
    return m;
}

/// Exponentially tilt a positive distribution so its discrete collision
/// moments match the target (Newton on the 5 tilt parameters).  Tilting
/// preserves positivity, which a linear correction would not.
inline Vec match_moments(const MomentumGrid& grid, const Vec& F,
                         const std::array<double, 5>& target, int max_iter = 60) {
    Eigen::Matrix<double, 5, 1> theta = Eigen::Matrix<double, 5, 1>::Zero();
    Vec out = F;
    for (int iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Momentum3& p = grid.node(i);
            const double ex = theta[0] + theta[1] * p.c[0] + theta[2] * p.c[1] +
                              theta[3] * p.c[2] + theta[4] * p.p0;
            out[static_cast<Eigen::Index>(i)] = F[static_cast<Eigen::Index>(i)] * std::exp(ex);
        }
        const auto mom = collision_moments(grid, out);
        Eigen::Matrix<double, 5, 1> resid;
        double scale = 0.0;
        for (int a = 0; a < 5; ++a) {
            resid[a] = mom[static_cast<std::size_t>(a)] - target[static_cast<std::size_t>(a)];
            scale = std::max(scale, std::abs(target[static_cast<std::size_t>(a)]));
        }
        if (resid.cwiseAbs().maxCoeff() <= 1e-13 * std::max(scale, 1.0)) return out;
        Eigen::Matrix<double, 5, 5> jac = Eigen::Matrix<double, 5, 5>::Zero();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Momentum3& p = grid.node(i);
            const double wf = grid.quad_weight(i) * out[static_cast<Eigen::Index>(i)];
            const double phi[5] = {1.0, p.c[0], p.c[1], p.c[2], p.p0};
            for (int a = 0; a < 5; ++a)
                for (int b = 0; b < 5; ++b) jac(a, b) += wf * phi[a] * phi[b];
        }
        theta -= jac.ldlt().solve(resid);
    }
    throw numerics_error("match_moments: Newton did not converge");
}

} // namespace rboltz
