#pragma once

#include <array>

#include "rboltz/analysis.hpp"
#include "rboltz/sweep.hpp"

namespace rboltz {

/// Damped-transport semigroup on the frequency side: multiplication by
/// exp(-(nu(p) + i phat.k) t).  Exact, no integrator.
inline VecC apply_G(const OperatorMatrices& ops, const Eigen::Vector3d& freq, const VecC& f,
                    double t) {
    if (t < 0.0) throw std::invalid_argument("apply_G: t must be >= 0");
    const Vec pk = phat_dot(ops.grid, freq);
    VecC out(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i)
        out[i] = std::exp(std::complex<double>(-ops.nu[i] * t, -pk[i] * t)) * f[i];
    return out;
}

/// Twice-iterated Duhamel expansion of U(t) into the five terms
///   H1 = G f0,
///   H2 = int G K^{1-chi} U,
///   H3 = int G K^chi G f0,
///   H4 = int int G K^chi G K^{1-chi} U,
///   H5 = int int G K^chi G K^chi U,
/// evaluated on the frequency side with composite-Simpson time quadrature.
struct VidavTerms {
    std::array<VecC, 5> H;
    double residual = 0.0;       ///< |U(t)f0 - sum H_i| in the weighted norm
    double reference_norm = 0.0; ///< |U(t)f0|
    std::array<double, 5> term_norms{};
    int dominant_term() const {
        int best = 0;
        for (int i = 1; i < 5; ++i)
            if (term_norms[static_cast<std::size_t>(i)] > term_norms[static_cast<std::size_t>(best)]) best = i;
        return best + 1;
    }
};

inline VidavTerms vidav_terms(const OperatorMatrices& ops, const MatC& generator, const VecC& f0,
                              const Eigen::Vector3d& freq, double t, int n_time_steps) {
    if (n_time_steps < 4 || n_time_steps % 2 != 0)
        throw std::invalid_argument("vidav_terms: n_time_steps must be even and >= 4");
    const MomentumGrid& grid = ops.grid;
    const Eigen::Index n = f0.size();
    const int m = n_time_steps;
    const double h = t / m;
    const Vec pk = phat_dot(grid, freq);

    auto damp = [&](const VecC& v, double dt_damp) {
        VecC out(n);
        for (Eigen::Index i = 0; i < n; ++i)
            out[i] = std::exp(std::complex<double>(-ops.nu[i] * dt_damp, -pk[i] * dt_damp)) * v[i];
        return out;
    };
    auto apply_real = [&](const Mat& K, const VecC& v) -> VecC {
        return K * v.real() + std::complex<double>(0.0, 1.0) * (K * v.imag()).eval();
    };

    // Node caches on the uniform Simpson ladder; U(s) advances by one matrix
    // exponential per step.
    const MatC E = (generator * h).exp();
    std::vector<VecC> U_nodes(static_cast<std::size_t>(m) + 1);
    std::vector<VecC> V_1m(static_cast<std::size_t>(m) + 1); // K^{1-chi} U(s) f0
    std::vector<VecC> V_chi(static_cast<std::size_t>(m) + 1); // K^chi U(s) f0
    std::vector<VecC> Gf(static_cast<std::size_t>(m) + 1);    // G(s) f0
    for (int i = 0; i <= m; ++i) {
        U_nodes[static_cast<std::size_t>(i)] =
            i == 0 ? f0 : VecC(E * U_nodes[static_cast<std::size_t>(i) - 1]);
        V_1m[static_cast<std::size_t>(i)] = apply_real(ops.K_one_minus_chi, U_nodes[static_cast<std::size_t>(i)]);
        V_chi[static_cast<std::size_t>(i)] = apply_real(ops.K_chi, U_nodes[static_cast<std::size_t>(i)]);
        Gf[static_cast<std::size_t>(i)] = damp(f0, i * h);
    }
    const std::vector<double> w_outer = simpson_weights(static_cast<std::size_t>(m), h);

    VidavTerms out;
    out.H[0] = damp(f0, t);

    // Single integrals: H2 over K^{1-chi} U, H3 over K^chi G.
    VecC h2 = VecC::Zero(n), h3 = VecC::Zero(n);
    for (int i = 0; i <= m; ++i) {
        h2 += w_outer[static_cast<std::size_t>(i)] * damp(V_1m[static_cast<std::size_t>(i)], t - i * h);
        h3 += w_outer[static_cast<std::size_t>(i)] *
              damp(apply_real(ops.K_chi, Gf[static_cast<std::size_t>(i)]), t - i * h);
    }
    out.H[1] = h2;
    out.H[2] = h3;

    // Inner integrals I(s1) = int_0^{s1} G(s1 - s2) V(s2) ds2 on the ladder.
    // The single-interval case s1 = h uses the derivative-corrected trapezoid
    // (order 4): int_0^h f = h/2 (f(0) + f(h)) + h^2/12 (f'(0) - f'(h)), with
    // f(s) = G(h-s) V(s), f' = (nu + i phat.k) G(h-s) V + G(h-s) V'.
    auto inner_ladder = [&](const std::vector<VecC>& V, const Mat& K_inner_src) {
        std::vector<VecC> I(static_cast<std::size_t>(m) + 1, VecC::Zero(n));
        for (int i1 = 2; i1 <= m; ++i1) {
            const std::vector<double> w_in = simpson_weights(static_cast<std::size_t>(i1), h);
            VecC acc = VecC::Zero(n);
            for (int i2 = 0; i2 <= i1; ++i2)
                acc += w_in[static_cast<std::size_t>(i2)] * damp(V[static_cast<std::size_t>(i2)], (i1 - i2) * h);
            I[static_cast<std::size_t>(i1)] = acc;
        }
        if (m >= 1) {
            auto vprime = [&](int i) -> VecC {
                return apply_real(K_inner_src, (generator * U_nodes[static_cast<std::size_t>(i)]).eval());
            };
            const VecC g_v0 = damp(V[0], h);
            VecC f0p = damp(vprime(0), h);
            const VecC f1p_a = vprime(1);
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::complex<double> mult(ops.nu[i], pk[i]);
                f0p[i] += mult * g_v0[i];
            }
            VecC corr = f0p - f1p_a;
            for (Eigen::Index i = 0; i < n; ++i)
                corr[i] -= std::complex<double>(ops.nu[i], pk[i]) * V[1][i];
            I[1] = 0.5 * h * (g_v0 + V[1]) + (h * h / 12.0) * corr;
        }
        return I;
    };
    const std::vector<VecC> I_1m = inner_ladder(V_1m, ops.K_one_minus_chi);
    const std::vector<VecC> I_chi = inner_ladder(V_chi, ops.K_chi);

    VecC h4 = VecC::Zero(n), h5 = VecC::Zero(n);
    for (int i = 0; i <= m; ++i) {
        h4 += w_outer[static_cast<std::size_t>(i)] *
              damp(apply_real(ops.K_chi, I_1m[static_cast<std::size_t>(i)]), t - i * h);
        h5 += w_outer[static_cast<std::size_t>(i)] *
              damp(apply_real(ops.K_chi, I_chi[static_cast<std::size_t>(i)]), t - i * h);
    }
    out.H[3] = h4;
    out.H[4] = h5;

    const VecC reference = U_nodes[static_cast<std::size_t>(m)];
    VecC sum = out.H[0];
    for (int i = 1; i < 5; ++i) sum += out.H[static_cast<std::size_t>(i)];
    out.residual = std::sqrt(wnorm2(grid, (sum - reference).eval()));
    out.reference_norm = std::sqrt(wnorm2(grid, reference));
    for (int i = 0; i < 5; ++i)
        out.term_norms[static_cast<std::size_t>(i)] = std::sqrt(wnorm2(grid, out.H[static_cast<std::size_t>(i)]));
    return out;
}

/// Time-quadrature residual budget for the five-term reconstruction.  The
/// constant was frozen against doubled-resolution runs; the (nu_max + |k|)
/// factor tracks the fourth derivative scale of the integrands.
inline double vidav_budget(const OperatorMatrices& ops, const Eigen::Vector3d& freq, double t,
                           int n_time_steps, double f0_norm) {
    const double dt = t / n_time_steps;
    const double scale = ops.nu.maxCoeff() + freq.norm();
    return 2.0 * f0_norm * t * std::pow(dt * scale, 4);
}

inline void enforce_vidav_budget(const VidavTerms& terms, double budget) {
    if (terms.residual > budget)
        throw numerics_error("vidav_terms: five-term reconstruction residual " +
                             std::to_string(terms.residual) + " exceeds budget " +
                             std::to_string(budget) + "; dominant term H" +
                             std::to_string(terms.dominant_term()));
}

/// Fitted decay exponent of the weighted sup-norm Parseval surrogate.
struct SupNormDecayReport {
    DecayFit fit;
    std::vector<double> series;
};

inline SupNormDecayReport weighted_supnorm_decay(const ModeSweepResult& sweep,
                                                 const MomentumGrid& grid, double ell,
                                                 double b_exponent, double t_lo, double t_hi) {
    SupNormDecayReport rep;
    rep.series = weighted_sup_series(sweep, grid, ell, b_exponent);
    rep.fit = fit_decay_exponent(sweep.times, rep.series, t_lo, t_hi);
    return rep;
}

} // namespace rboltz
