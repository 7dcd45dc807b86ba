#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "rboltz/macro.hpp"

namespace rboltz {

/// Whole-space decay bookkeeping: sigma_{r,m} = (3/2)(1/r - 1/2) + m/2.
struct RateSpec {
    double r = 1.0;
    double m = 0.0;
    RateSpec() = default;
    RateSpec(double r_, double m_) : r(r_), m(m_) {
        if (r < 1.0 || r > 2.0 || m < 0.0)
            throw std::invalid_argument("RateSpec: need r in [1,2], m >= 0");
    }
    double sigma_rm() const { return 1.5 * (1.0 / r - 0.5) + 0.5 * m; }
};

/// Distribution perturbation of one spatial frequency.
struct ModeState {
    Eigen::Vector3d freq = Eigen::Vector3d::Zero();
    VecC values;
    double t = 0.0;
};

struct ModeTrajectory {
    Eigen::Vector3d freq = Eigen::Vector3d::Zero();
    std::vector<double> times;
    std::vector<VecC> states;
};

inline Vec phat_dot(const MomentumGrid& grid, const Eigen::Vector3d& freq) {
    Vec pk(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto ph = grid.node(i).phat();
        pk[i] = ph[0] * freq[0] + ph[1] * freq[1] + ph[2] * freq[2];
    }
    return pk;
}

/// Generator of the per-frequency evolution: A = -( i diag(phat.k) + L ).
inline MatC assemble_mode_generator(const OperatorMatrices& ops, const Eigen::Vector3d& freq) {
    const Eigen::Index n = ops.L.rows();
    MatC A = (-ops.L).cast<std::complex<double>>();
    const Vec pk = phat_dot(ops.grid, freq);
    for (Eigen::Index i = 0; i < n; ++i) A(i, i) -= std::complex<double>(0.0, pk[i]);
    return A;
}

// ---- weighted norms ------------------------------------------------------

template <class V>
double wnorm2(const MomentumGrid& grid, const V& v) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        acc += grid.quad_weight(static_cast<std::size_t>(i)) * std::norm(v[i]);
    return acc;
}

/// sum_i w_i m_i u_i conj(v_i) for a real multiplier m.
template <class U, class V>
std::complex<double> wdot_mult(const MomentumGrid& grid, const Vec& mult, const U& u, const V& v) {
    std::complex<double> acc(0.0, 0.0);
    for (Eigen::Index i = 0; i < u.size(); ++i)
        acc += grid.quad_weight(static_cast<std::size_t>(i)) * mult[i] * u[i] * std::conj(v[i]);
    return acc;
}

template <class V>
double wnorm2_mult(const MomentumGrid& grid, const Vec& mult, const V& v) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        acc += grid.quad_weight(static_cast<std::size_t>(i)) * mult[i] * std::norm(v[i]);
    return acc;
}

/// Squared momentum weight w_l(p)^2 = (p0)^{l b} at the nodes.
inline Vec weight_sq(const MomentumGrid& grid, double ell, double b_exponent) {
    Vec w(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        w[i] = std::pow(grid.node(i).p0, ell * b_exponent);
    return w;
}

// ---- evolution -----------------------------------------------------------

struct EvolveOptions {
    double dt = 0.02;
    int snap_every = 5;
    double growth_tol = 1e-9; ///< relative norm growth treated as instability
};

/// Classical RK4 time stepping of d/dt f = A f with stored snapshots.
inline ModeTrajectory evolve_mode_rk4(const MatC& A, const ModeState& init, double t_final,
                                      const EvolveOptions& opt, const MomentumGrid& grid) {
    if (!(opt.dt > 0.0)) throw std::invalid_argument("evolve_mode_rk4: dt must be > 0");
    ModeTrajectory traj;
    traj.freq = init.freq;
    VecC f = init.values;
    double t = init.t;
    traj.times.push_back(t);
    traj.states.push_back(f);
    double prev_norm = std::sqrt(wnorm2(grid, f));
    const int n_steps = static_cast<int>(std::llround(t_final / opt.dt));
    for (int step = 1; step <= n_steps; ++step) {
        const VecC k1 = A * f;
        const VecC k2 = A * (f + 0.5 * opt.dt * k1);
        const VecC k3 = A * (f + 0.5 * opt.dt * k2);
        const VecC k4 = A * (f + opt.dt * k3);
        f += (opt.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = init.t + step * opt.dt;
        const double nrm = std::sqrt(wnorm2(grid, f));
        if (nrm > prev_norm * (1.0 + opt.growth_tol))
            throw numerics_error("evolve_mode_rk4: norm growth detected, reduce dt");
        prev_norm = nrm;
        if (step % opt.snap_every == 0 || step == n_steps) {
            traj.times.push_back(t);
            traj.states.push_back(f);
        }
    }
    return traj;
}

/// Eigendecomposition propagator: f(t) = V exp(Lambda t) V^{-1} f0, with the
/// exact generator derivative available at no extra cost.
class ModePropagator {
public:
    explicit ModePropagator(const MatC& A) : es_(A) {
        if (es_.info() != Eigen::Success)
            throw numerics_error("ModePropagator: eigendecomposition failed");
        lu_.compute(es_.eigenvectors());
    }

    VecC prepare(const VecC& f0) const { return lu_.solve(f0); }

    VecC state(const VecC& coeffs, double t) const {
        const Eigen::Index n = coeffs.size();
        VecC phase(n);
        for (Eigen::Index i = 0; i < n; ++i)
            phase[i] = std::exp(es_.eigenvalues()[i] * t) * coeffs[i];
        return es_.eigenvectors() * phase;
    }

    /// d/dt f(t) = A f(t), evaluated spectrally.
    VecC rate(const VecC& coeffs, double t) const {
        const Eigen::Index n = coeffs.size();
        VecC phase(n);
        for (Eigen::Index i = 0; i < n; ++i)
            phase[i] = es_.eigenvalues()[i] * std::exp(es_.eigenvalues()[i] * t) * coeffs[i];
        return es_.eigenvectors() * phase;
    }

    const VecC& eigenvalues() const { return es_.eigenvalues(); }

private:
    Eigen::ComplexEigenSolver<MatC> es_;
    Eigen::PartialPivLU<MatC> lu_;
};

inline ModeTrajectory evolve_mode_eigen(const ModePropagator& prop, const ModeState& init,
                                        double t_final, int n_snap) {
    ModeTrajectory traj;
    traj.freq = init.freq;
    const VecC coeffs = prop.prepare(init.values);
    for (int i = 0; i < n_snap; ++i) {
        const double t = init.t + t_final * i / (n_snap - 1);
        traj.times.push_back(t);
        traj.states.push_back(prop.state(coeffs, t - init.t));
    }
    return traj;
}

/// Uniform-step spectral propagator: one matrix exponential E = exp(A dt),
/// then snapshots by repeated application.  E is a contraction (the spectrum
/// of A lies in the closed left half plane), so the iteration is stable; the
/// generator is kept for exact rate evaluations.
class SteppedPropagator {
public:
    SteppedPropagator(MatC A, double dt) : A_(std::move(A)), dt_(dt), E_((A_ * dt).exp()) {}

    double dt() const { return dt_; }
    const MatC& generator() const { return A_; }
    VecC advance(const VecC& f) const { return E_ * f; }
    VecC rate(const VecC& f) const { return A_ * f; }

    /// Exponential at a fraction of the step (used by nested quadrature).
    MatC fractional(double alpha) const { return (A_ * (alpha * dt_)).exp(); }

private:
    MatC A_;
    double dt_;
    MatC E_;
};

// ---- free energy and Lyapunov functionals --------------------------------

struct LyapunovConstants {
    double kappa1 = 1.0;
    double kappa3 = 0.0;
    double kappa4 = 0.0;
    double kappa5 = 0.0;
    double lambda_rate = 0.0;
    double lambda_free = 0.0; ///< macro dissipation rate in the free-energy inequality
    double C_free = 0.0;      ///< micro source constant in the free-energy inequality
    double c1 = 0.0, c2 = 0.0; ///< equivalence bounds of E_ell against |w_l f|^2
};

/// Functionals of one grid vector entering the free-energy form.
struct MacroSnapshot {
    MacroCoefficients coeffs;
    MomentSet micro_mom; ///< Theta/Lambda/A of the microscopic part
};

template <class V>
MacroSnapshot macro_snapshot(const MacroContext& ctx, const V& f) {
    auto proj = ctx.project(f);
    MacroSnapshot s;
    s.coeffs = proj.coeffs;
    s.micro_mom = ctx.moment_functionals(proj.micro);
    return s;
}

/// The free-energy sesquilinear form split into the kappa1-scaled block (the
/// four interactive terms) and the unscaled fifth term:
/// E_free = kappa1 * A(f,f) + B(f,f).
struct FreeEnergyParts {
    std::complex<double> part_a;
    std::complex<double> part_b;
};

inline FreeEnergyParts free_energy_form(const MacroContext& ctx, const Eigen::Vector3d& freq,
                                        const MacroSnapshot& u, const MacroSnapshot& v) {
    using C = std::complex<double>;
    const C I(0.0, 1.0);
    const double kk = 1.0 + freq.squaredNorm();
    const MuConstants& mu = ctx.mu();
    C a_part(0.0, 0.0);
    for (int m = 0; m < 3; ++m) {
        C lhs(0.0, 0.0);
        for (int jd = 0; jd < 3; ++jd) lhs += I * freq[jd] / kk * u.micro_mom.theta(jd, m);
        lhs += mu.beta * I * freq[m] / kk * u.micro_mom.theta(m, m);
        lhs += (mu.beta + 1.0) / 3.0 * I * freq[m] / kk * u.micro_mom.a_func;
        a_part += lhs * std::conj(-v.coeffs.b[m]);
    }
    for (int jd = 0; jd < 3; ++jd)
        a_part += u.micro_mom.lambda[jd] * std::conj(I * freq[jd] / kk * v.coeffs.a);
    C b_part(0.0, 0.0);
    for (int m = 0; m < 3; ++m)
        b_part += u.coeffs.b[m] *
                  std::conj(I * freq[m] / kk * (mu.mu11_0 * v.coeffs.a + mu.mu11 * v.coeffs.c));
    return {a_part, b_part};
}

/// E_free(f) as in the time-frequency Lyapunov construction (complex; its
/// real part enters the functionals).
inline std::complex<double> free_energy(const MacroContext& ctx, const ModeState& state,
                                        const LyapunovConstants& constants) {
    const MacroSnapshot s = macro_snapshot(ctx, state.values);
    const FreeEnergyParts p = free_energy_form(ctx, state.freq, s, s);
    return constants.kappa1 * p.part_a + p.part_b;
}

struct LyapunovEnergy {
    double E = 0.0;     ///< |f|^2 + kappa3 Re E_free
    double E_ell = 0.0; ///< branch-split weighted functional
};

inline LyapunovEnergy lyapunov_energy(const MacroContext& ctx, const OperatorMatrices& ops,
                                      const ModeState& state, double ell,
                                      const LyapunovConstants& constants) {
    const MomentumGrid& grid = ctx.grid();
    LyapunovEnergy out;
    const double n2 = wnorm2(grid, state.values);
    out.E = n2 + constants.kappa3 * std::real(free_energy(ctx, state, constants));
    const Vec w2 = weight_sq(grid, ell, ops.model.b_exponent);
    if (state.freq.norm() <= 1.0) {
        auto proj = ctx.project(state.values);
        out.E_ell = out.E + constants.kappa4 * wnorm2_mult(grid, w2, proj.micro);
    } else {
        out.E_ell = out.E + constants.kappa5 * wnorm2_mult(grid, w2, state.values);
    }
    return out;
}

// ---- constant fitting ----------------------------------------------------

struct LyapunovSampleSpec {
    int n_freq = 40;
    double freq_min = 1e-2;
    double freq_max = 10.0;
    int n_states = 20;
    double t_final = 50.0;
    int n_snap = 26;
    double ell = 1.0;
    std::uint64_t seed = 20250809;
    int threads = 0;
};

/// Per-snapshot scalar observables used by the constant search.  Rates are
/// exact (computed through the generator), not finite differences.
struct LyapunovSamplePoint {
    double k = 0.0;
    double t = 0.0;
    double norm2 = 0.0, norm2_rate = 0.0;
    double reEA = 0.0, reEB = 0.0;          ///< Re of the two free-energy blocks
    double rateEA = 0.0, rateEB = 0.0;      ///< their exact time derivatives
    double M = 0.0;                          ///< k^2/(1+k^2) (|a|^2+|b|^2+|c|^2)
    double N = 0.0;                          ///< |nu^{1/2} (I-P) f|^2
    double wlm2 = 0.0, wlm2_rate = 0.0;      ///< |w_l (I-P) f|^2 and rate
    double wlf2 = 0.0, wlf2_rate = 0.0;      ///< |w_l f|^2 and rate
    double n_ell = 0.0;                      ///< |nu^{1/2} w_l f|^2
};

struct LyapunovFitReport {
    LyapunovConstants constants;
    bool feasible = false;
    double worst_margin_free = 0.0;
    double worst_margin_lyap = 0.0;
    double worst_freq = 0.0, worst_time = 0.0;
    double max_norm_growth = 0.0; ///< worst relative growth of |f| between snapshots
    std::vector<LyapunovSamplePoint> sample;
};

inline std::vector<LyapunovSamplePoint>
collect_lyapunov_sample(const OperatorMatrices& ops, const MacroContext& ctx,
                        const LyapunovSampleSpec& spec, double* max_norm_growth = nullptr) {
    const MomentumGrid& grid = ops.grid;
    const std::size_t n = grid.size();
    const Vec w2 = weight_sq(grid, spec.ell, ops.model.b_exponent);
    const Vec ones = Vec::Ones(static_cast<Eigen::Index>(n));
    const Vec nu_w2 = ops.nu.cwiseProduct(w2);

    std::vector<double> ks(spec.n_freq);
    for (int i = 0; i < spec.n_freq; ++i)
        ks[i] = spec.freq_min *
                std::pow(spec.freq_max / spec.freq_min, double(i) / (spec.n_freq - 1));

    const std::size_t per_freq = static_cast<std::size_t>(spec.n_states) * spec.n_snap;
    std::vector<LyapunovSamplePoint> sample(static_cast<std::size_t>(spec.n_freq) * per_freq);
    std::vector<double> growth(spec.n_freq, 0.0);

    parallel_for(static_cast<std::size_t>(spec.n_freq), spec.threads > 0 ? spec.threads : hardware_threads(),
                 [&](std::size_t ifreq) {
        const Eigen::Vector3d freq(ks[ifreq], 0.0, 0.0);
        const SteppedPropagator prop(assemble_mode_generator(ops, freq),
                                     spec.t_final / (spec.n_snap - 1));
        double worst_growth = 0.0;
        for (int istate = 0; istate < spec.n_states; ++istate) {
            std::mt19937_64 rng(spec.seed + 1000003ull * ifreq + static_cast<std::uint64_t>(istate));
            std::normal_distribution<double> gauss(0.0, 1.0);
            VecC f0(n);
            for (std::size_t i = 0; i < n; ++i) f0[i] = std::complex<double>(gauss(rng), gauss(rng));
            f0 /= std::sqrt(wnorm2(grid, f0));
            VecC f = f0;
            double prev_norm = -1.0;
            for (int isnap = 0; isnap < spec.n_snap; ++isnap) {
                const double t = spec.t_final * isnap / (spec.n_snap - 1);
                if (isnap > 0) f = prop.advance(f);
                const VecC fdot = prop.rate(f);
                auto proj = ctx.project(f);
                auto proj_dot = ctx.project(fdot);
                const MacroSnapshot sf{proj.coeffs, ctx.moment_functionals(proj.micro)};
                const MacroSnapshot sd{proj_dot.coeffs, ctx.moment_functionals(proj_dot.micro)};

                LyapunovSamplePoint pt;
                pt.k = ks[ifreq];
                pt.t = t;
                pt.norm2 = wnorm2(grid, f);
                pt.norm2_rate = 2.0 * std::real(wdot_mult(grid, ones, fdot, f));
                const FreeEnergyParts e = free_energy_form(ctx, freq, sf, sf);
                const FreeEnergyParts r1 = free_energy_form(ctx, freq, sd, sf);
                const FreeEnergyParts r2 = free_energy_form(ctx, freq, sf, sd);
                pt.reEA = std::real(e.part_a);
                pt.reEB = std::real(e.part_b);
                pt.rateEA = std::real(r1.part_a + r2.part_a);
                pt.rateEB = std::real(r1.part_b + r2.part_b);
                const double k2 = ks[ifreq] * ks[ifreq];
                pt.M = k2 / (1.0 + k2) *
                       (std::norm(proj.coeffs.a) + proj.coeffs.b.squaredNorm() + std::norm(proj.coeffs.c));
                pt.N = wnorm2_mult(grid, ops.nu, proj.micro);
                pt.wlm2 = wnorm2_mult(grid, w2, proj.micro);
                pt.wlm2_rate = 2.0 * std::real(wdot_mult(grid, w2, proj_dot.micro, proj.micro));
                pt.wlf2 = wnorm2_mult(grid, w2, f);
                pt.wlf2_rate = 2.0 * std::real(wdot_mult(grid, w2, fdot, f));
                pt.n_ell = wnorm2_mult(grid, nu_w2, f);
                sample[ifreq * per_freq + static_cast<std::size_t>(istate) * spec.n_snap + isnap] = pt;

                const double nrm = std::sqrt(pt.norm2);
                if (prev_norm >= 0.0 && prev_norm > 0.0)
                    worst_growth = std::max(worst_growth, nrm / prev_norm - 1.0);
                prev_norm = nrm;
            }
        }
        growth[ifreq] = worst_growth;
    });
    if (max_norm_growth) {
        double g = 0.0;
        for (double v : growth) g = std::max(g, v);
        *max_norm_growth = g;
    }
    return sample;
}

/// Sequential constant search mirroring the proof order: kappa1 with the
/// free-energy inequality first, then kappa3 (equivalence), then the
/// branch weights kappa4/kappa5 and the joint rate lambda.
inline LyapunovFitReport fit_lyapunov_constants(const OperatorMatrices& ops, const MacroContext& ctx,
                                                const LyapunovSampleSpec& spec) {
    LyapunovFitReport rep;
    rep.sample = collect_lyapunov_sample(ops, ctx, spec, &rep.max_norm_growth);
    const auto& sample = rep.sample;

    // E:VPB3.17 block: kappa1 E_A' + E_B' + lambda M <= C N.
    auto required_C = [&](double kappa1, double lambda) {
        double c = 0.0;
        for (const auto& pt : sample)
            c = std::max(c, (kappa1 * pt.rateEA + pt.rateEB + lambda * pt.M) / pt.N);
        return c;
    };
    double best_kappa1 = 1.0, best_lambda = -1.0, best_C = 0.0;
    for (int e = 0; e <= 12; ++e) {
        const double kappa1 = std::ldexp(1.0, -e);
        const double c0 = std::max(required_C(kappa1, 0.0), 1e-12);
        const double c_cap = 10.0 * c0;
        double lo = 0.0, hi = 16.0;
        for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (required_C(kappa1, mid) <= c_cap)
                lo = mid;
            else
                hi = mid;
        }
        if (lo > best_lambda) {
            best_lambda = lo;
            best_kappa1 = kappa1;
            best_C = required_C(kappa1, lo);
        }
    }
    rep.constants.kappa1 = best_kappa1;
    rep.constants.lambda_free = 0.95 * best_lambda;
    rep.constants.C_free = 1.05 * best_C + 1e-12;
    if (!(rep.constants.lambda_free > 0.0)) return rep;

    rep.worst_margin_free = std::numeric_limits<double>::infinity();
    for (const auto& pt : sample) {
        const double margin = rep.constants.C_free * pt.N - best_kappa1 * pt.rateEA - pt.rateEB -
                              rep.constants.lambda_free * pt.M;
        if (margin < rep.worst_margin_free) {
            rep.worst_margin_free = margin;
            if (margin < 0.0) {
                rep.worst_freq = pt.k;
                rep.worst_time = pt.t;
            }
        }
    }

    // kappa3: small enough that E stays equivalent to |f|^2 AND inherits
    // negativity from the micro dissipation (kappa3 C_free below the observed
    // dissipation-to-micro ratio).
    double ratio = 0.0, delta_hat = std::numeric_limits<double>::infinity();
    for (const auto& pt : sample) {
        ratio = std::max(ratio, std::abs(best_kappa1 * pt.reEA + pt.reEB) / pt.norm2);
        delta_hat = std::min(delta_hat, -pt.norm2_rate / pt.N);
    }
    rep.constants.kappa3 = std::min({1.0, 0.5 / std::max(ratio, 1e-300),
                                     0.5 * delta_hat / rep.constants.C_free});

    auto e_rate = [&](const LyapunovSamplePoint& pt) {
        return pt.norm2_rate + rep.constants.kappa3 * (best_kappa1 * pt.rateEA + pt.rateEB);
    };

    // Branch weights: maximize the admissible uniform rate by scanning the
    // candidate ladder for each kappa.
    auto branch_rate = [&](bool low_branch, double kappa) {
        double lam = std::numeric_limits<double>::infinity();
        for (const auto& pt : sample) {
            const bool low = pt.k <= 1.0;
            if (low != low_branch) continue;
            const double rate = e_rate(pt) + kappa * (low ? pt.wlm2_rate : pt.wlf2_rate);
            const double cap = (low ? pt.k * pt.k : 1.0) * pt.n_ell;
            lam = std::min(lam, -rate / cap);
        }
        return lam;
    };
    auto pick_kappa = [&](bool low_branch, double& lam_out) {
        double best_k = 0.0, best_l = -std::numeric_limits<double>::infinity();
        for (int e = 0; e <= 20; ++e) {
            const double kappa = std::ldexp(1.0, -e);
            const double lam = branch_rate(low_branch, kappa);
            if (lam > best_l) {
                best_l = lam;
                best_k = kappa;
            }
        }
        lam_out = best_l;
        return best_k;
    };
    double lam_low = 0.0, lam_high = 0.0;
    rep.constants.kappa4 = pick_kappa(true, lam_low);
    rep.constants.kappa5 = pick_kappa(false, lam_high);
    const double lam = std::min(lam_low, lam_high);
    if (!(lam > 0.0)) {
        rep.constants.lambda_rate = lam;
        return rep;
    }
    rep.constants.lambda_rate = 0.95 * lam;

    // Final margins and equivalence constants on the sample.
    rep.worst_margin_lyap = std::numeric_limits<double>::infinity();
    double c1 = std::numeric_limits<double>::infinity(), c2 = 0.0;
    for (const auto& pt : sample) {
        const bool low = pt.k <= 1.0;
        const double e_ell = pt.norm2 +
                             rep.constants.kappa3 * (best_kappa1 * pt.reEA + pt.reEB) +
                             (low ? rep.constants.kappa4 * pt.wlm2 : rep.constants.kappa5 * pt.wlf2);
        const double rate = e_rate(pt) +
                            (low ? rep.constants.kappa4 * pt.wlm2_rate : rep.constants.kappa5 * pt.wlf2_rate);
        const double margin = -rate - rep.constants.lambda_rate * (low ? pt.k * pt.k : 1.0) * pt.n_ell;
        if (margin < rep.worst_margin_lyap) {
            rep.worst_margin_lyap = margin;
            if (margin < 0.0) {
                rep.worst_freq = pt.k;
                rep.worst_time = pt.t;
            }
        }
        c1 = std::min(c1, e_ell / pt.wlf2);
        c2 = std::max(c2, e_ell / pt.wlf2);
    }
    rep.constants.c1 = c1;
    rep.constants.c2 = c2;
    rep.feasible = rep.worst_margin_free >= 0.0 && rep.worst_margin_lyap >= 0.0 && c1 > 0.0;
    return rep;
}

} // namespace rboltz
