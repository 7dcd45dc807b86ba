#pragma once

#include <functional>

#include "rboltz/mode.hpp"

namespace rboltz {

/// Log-spaced radial frequency samples with the weights of the measure
/// 4 pi k^2 dk (trapezoid on the log axis).
struct FrequencyGrid {
    std::vector<double> k;
    std::vector<double> wk;
};

inline FrequencyGrid log_freq_grid(int n, double k_min, double k_max) {
    if (n < 2 || !(k_min > 0.0) || !(k_max > k_min))
        throw std::invalid_argument("log_freq_grid: need n >= 2 and 0 < k_min < k_max");
    FrequencyGrid fg;
    fg.k.resize(n);
    fg.wk.resize(n);
    const double dln = std::log(k_max / k_min) / (n - 1);
    for (int i = 0; i < n; ++i) fg.k[i] = k_min * std::exp(i * dln);
    for (int i = 0; i < n; ++i) {
        const double wln = (i == 0 || i == n - 1) ? 0.5 * dln : dln;
        fg.wk[i] = 4.0 * std::numbers::pi * fg.k[i] * fg.k[i] * fg.k[i] * wln;
    }
    return fg;
}

/// Initial-data surrogates for the L^r_x classes: r = 1 puts the same profile
/// on every frequency in the unit ball (flat transform), r = 2 concentrates
/// the data on the lowest resolved shell, realizing the no-decay endpoint.
inline Vec data_amplitude(const FrequencyGrid& fg, double r) {
    Vec amp(static_cast<Eigen::Index>(fg.k.size()));
    if (r < 1.5) {
        for (std::size_t i = 0; i < fg.k.size(); ++i) amp[i] = fg.k[i] <= 1.0 ? 1.0 : 0.0;
    } else {
        amp.setZero();
        amp[0] = 1.0;
    }
    return amp;
}

struct ModeSweepOptions {
    double t_final = 100.0;
    int n_snap = 101;
    double ell = 1.0;
    int threads = 0;
    double resolution_threshold = 0.5; ///< require k_min^2 * t_final <= threshold
};

/// Per-mode time series of the quadratic observables needed for norm
/// synthesis, sup-norm surrogates and the per-mode CSV.
struct ModeSweepResult {
    FrequencyGrid fgrid;
    std::vector<double> times;
    Mat norm2;     ///< n_freq x n_snap, |f(t,k)|^2
    Mat wnorm2;    ///< |w_l f(t,k)|^2
    Mat nu_wnorm2; ///< |nu^{1/2} w_l f(t,k)|^2
    Mat E;         ///< Lyapunov E(t,k)
    Mat E_ell;     ///< Lyapunov E_ell(t,k)
    Mat dissipation; ///< -dE_ell/dt (exact rate)
    Mat margin;      ///< -dE_ell/dt - lambda (1 ^ k^2) |nu^{1/2} w_l f|^2
    Mat node_k2;     ///< n_nodes x n_snap: int |f(t,k,p)|^2 dmu(k) per node
};

/// Evolve one mode per sampled frequency from data amp(k) * profile(p) and
/// collect the synthesis observables.
inline ModeSweepResult mode_sweep(const OperatorMatrices& ops, const MacroContext& ctx,
                                  const FrequencyGrid& fgrid, const VecC& profile,
                                  const Vec& amplitude, const LyapunovConstants& constants,
                                  const ModeSweepOptions& opt) {
    const double kmin2t = fgrid.k.front() * fgrid.k.front() * opt.t_final;
    if (kmin2t > opt.resolution_threshold)
        throw numerics_error("mode_sweep: lowest frequency cannot resolve the horizon, "
                             "k_min^2 * T = " + std::to_string(kmin2t));
    const MomentumGrid& grid = ops.grid;
    const std::size_t n = grid.size();
    const int nf = static_cast<int>(fgrid.k.size());
    const Vec w2 = weight_sq(grid, opt.ell, ops.model.b_exponent);
    const Vec nu_w2 = ops.nu.cwiseProduct(w2);
    const Vec ones = Vec::Ones(static_cast<Eigen::Index>(n));

    ModeSweepResult res;
    res.fgrid = fgrid;
    res.times.resize(opt.n_snap);
    for (int i = 0; i < opt.n_snap; ++i) res.times[i] = opt.t_final * i / (opt.n_snap - 1);
    res.norm2 = Mat::Zero(nf, opt.n_snap);
    res.wnorm2 = Mat::Zero(nf, opt.n_snap);
    res.nu_wnorm2 = Mat::Zero(nf, opt.n_snap);
    res.E = Mat::Zero(nf, opt.n_snap);
    res.E_ell = Mat::Zero(nf, opt.n_snap);
    res.dissipation = Mat::Zero(nf, opt.n_snap);
    res.margin = Mat::Zero(nf, opt.n_snap);
    Mat node_acc = Mat::Zero(static_cast<Eigen::Index>(n), opt.n_snap);
    std::vector<Mat> node_parts(static_cast<std::size_t>(nf));

    parallel_for(static_cast<std::size_t>(nf), opt.threads > 0 ? opt.threads : hardware_threads(),
                 [&](std::size_t ifreq) {
        const double k = fgrid.k[ifreq];
        const Eigen::Vector3d freq(k, 0.0, 0.0);
        Mat node_part = Mat::Zero(static_cast<Eigen::Index>(n), opt.n_snap);
        if (amplitude[static_cast<Eigen::Index>(ifreq)] != 0.0) {
            const SteppedPropagator prop(assemble_mode_generator(ops, freq),
                                         opt.t_final / (opt.n_snap - 1));
            VecC f = amplitude[static_cast<Eigen::Index>(ifreq)] * profile;
            for (int isnap = 0; isnap < opt.n_snap; ++isnap) {
                if (isnap > 0) f = prop.advance(f);
                const VecC fdot = prop.rate(f);
                res.norm2(static_cast<Eigen::Index>(ifreq), isnap) = wnorm2(grid, f);
                res.wnorm2(static_cast<Eigen::Index>(ifreq), isnap) = wnorm2_mult(grid, w2, f);
                res.nu_wnorm2(static_cast<Eigen::Index>(ifreq), isnap) = wnorm2_mult(grid, nu_w2, f);

                auto proj = ctx.project(f);
                auto proj_dot = ctx.project(fdot);
                const MacroSnapshot sf{proj.coeffs, ctx.moment_functionals(proj.micro)};
                const MacroSnapshot sd{proj_dot.coeffs, ctx.moment_functionals(proj_dot.micro)};
                const FreeEnergyParts e = free_energy_form(ctx, freq, sf, sf);
                const FreeEnergyParts r1 = free_energy_form(ctx, freq, sd, sf);
                const FreeEnergyParts r2 = free_energy_form(ctx, freq, sf, sd);
                const double efree = constants.kappa1 * std::real(e.part_a) + std::real(e.part_b);
                const double efree_rate = constants.kappa1 * std::real(r1.part_a + r2.part_a) +
                                          std::real(r1.part_b + r2.part_b);
                const double E = res.norm2(static_cast<Eigen::Index>(ifreq), isnap) +
                                 constants.kappa3 * efree;
                const double E_rate = 2.0 * std::real(wdot_mult(grid, ones, fdot, f)) +
                                      constants.kappa3 * efree_rate;
                const bool low = k <= 1.0;
                double E_ell = E, E_ell_rate = E_rate;
                if (low) {
                    E_ell += constants.kappa4 * wnorm2_mult(grid, w2, proj.micro);
                    E_ell_rate += constants.kappa4 * 2.0 *
                                  std::real(wdot_mult(grid, w2, proj_dot.micro, proj.micro));
                } else {
                    E_ell += constants.kappa5 * res.wnorm2(static_cast<Eigen::Index>(ifreq), isnap);
                    E_ell_rate += constants.kappa5 * 2.0 * std::real(wdot_mult(grid, w2, fdot, f));
                }
                res.E(static_cast<Eigen::Index>(ifreq), isnap) = E;
                res.E_ell(static_cast<Eigen::Index>(ifreq), isnap) = E_ell;
                res.dissipation(static_cast<Eigen::Index>(ifreq), isnap) = -E_ell_rate;
                res.margin(static_cast<Eigen::Index>(ifreq), isnap) =
                    -E_ell_rate - constants.lambda_rate * (low ? k * k : 1.0) *
                                      res.nu_wnorm2(static_cast<Eigen::Index>(ifreq), isnap);
                for (std::size_t i = 0; i < n; ++i)
                    node_part(static_cast<Eigen::Index>(i), isnap) =
                        fgrid.wk[ifreq] * std::norm(f[static_cast<Eigen::Index>(i)]);
            }
        }
        node_parts[ifreq] = std::move(node_part);
    });
    for (int ifreq = 0; ifreq < nf; ++ifreq) node_acc += node_parts[static_cast<std::size_t>(ifreq)];
    res.node_k2 = std::move(node_acc);
    return res;
}

/// Synthesize |w_l f|^2_{L^2_p L^2_x} (m = 0) or its homogeneous-Sobolev
/// variant (weighting |k|^{2m}) from the per-mode series.
inline std::vector<double> synthesize_norm(const ModeSweepResult& sweep, const RateSpec& rate) {
    const int nf = static_cast<int>(sweep.fgrid.k.size());
    const int nt = static_cast<int>(sweep.times.size());
    std::vector<double> out(static_cast<std::size_t>(nt), 0.0);
    for (int it = 0; it < nt; ++it) {
        double acc = 0.0;
        for (int ifreq = 0; ifreq < nf; ++ifreq)
            acc += sweep.fgrid.wk[static_cast<std::size_t>(ifreq)] *
                   std::pow(sweep.fgrid.k[static_cast<std::size_t>(ifreq)], 2.0 * rate.m) *
                   sweep.wnorm2(ifreq, it);
        out[static_cast<std::size_t>(it)] = acc;
    }
    return out;
}

/// sup_p of w_l(p) (int |f(t,k,p)|^2 dmu(k))^{1/2}: the L^inf_p L^2_x
/// Parseval surrogate series.
inline std::vector<double> weighted_sup_series(const ModeSweepResult& sweep,
                                               const MomentumGrid& grid, double ell,
                                               double b_exponent) {
    const Vec w2 = weight_sq(grid, ell, b_exponent);
    const int nt = static_cast<int>(sweep.times.size());
    std::vector<double> out(static_cast<std::size_t>(nt), 0.0);
    for (int it = 0; it < nt; ++it) {
        double best = 0.0;
        for (Eigen::Index i = 0; i < sweep.node_k2.rows(); ++i)
            best = std::max(best, w2[i] * sweep.node_k2(i, it));
        out[static_cast<std::size_t>(it)] = std::sqrt(best);
    }
    return out;
}

/// Interpolation inequality diagnostics for one stored mode trajectory:
/// the Hoelder step E_ell <= C |nu^{1/2} w_ell f|^{2j/(j+1)} E_{ell+j}^{1/(j+1)}
/// and the resulting per-mode polynomial bound with rho = lambda (1 ^ k^2).
struct InterpolationDecayReport {
    double holder_constant = 0.0;
    double per_mode_constant = 0.0;
    double rho_hat = 0.0;
};

inline InterpolationDecayReport
interpolation_decay_check(const MacroContext& ctx, const OperatorMatrices& ops,
                          const ModeTrajectory& traj, double ell, double j,
                          const LyapunovConstants& constants) {
    InterpolationDecayReport rep;
    const MomentumGrid& grid = ops.grid;
    const Vec w2_ell = weight_sq(grid, ell, ops.model.b_exponent);
    const Vec nu_w2 = ops.nu.cwiseProduct(w2_ell);
    const double k = traj.freq.norm();
    rep.rho_hat = constants.lambda_rate * std::min(1.0, k * k);
    double e_lj0 = 0.0;
    for (std::size_t it = 0; it < traj.times.size(); ++it) {
        ModeState st{traj.freq, traj.states[it], traj.times[it]};
        const double e_ell = lyapunov_energy(ctx, ops, st, ell, constants).E_ell;
        const double e_lj = lyapunov_energy(ctx, ops, st, ell + j, constants).E_ell;
        const double d_ell = wnorm2_mult(grid, nu_w2, traj.states[it]);
        if (it == 0) e_lj0 = e_lj;
        rep.holder_constant = std::max(
            rep.holder_constant, e_ell / (std::pow(d_ell, j / (j + 1.0)) * std::pow(e_lj, 1.0 / (j + 1.0))));
        const double bound = e_lj0 * std::pow(1.0 + traj.times[it] * rep.rho_hat / j, -j);
        rep.per_mode_constant = std::max(rep.per_mode_constant, e_ell / bound);
    }
    return rep;
}

} // namespace rboltz
