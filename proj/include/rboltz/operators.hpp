#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "rboltz/collision.hpp"

namespace rboltz {

enum class KernelSplit { full, chi, one_minus_chi };

/// Assembled linearized collision operator on one grid.  All matrices act on
/// nodal values and are self-adjoint in the quadrature-weighted inner
/// product < u, v > = sum_i w_i u_i conj(v_i).  By construction
///   K = K_chi + K_one_minus_chi     exactly,
///   L = diag(nu) - K                exactly,
/// and L annihilates the five collision invariants exactly: the quadrature
/// null-space defect is removed by a symmetric deflation correction folded
/// into K_chi, with its magnitude reported.
struct OperatorMatrices {
    MomentumGrid grid;
    KernelModel model;
    Vec nu;
    Vec sqrt_j;
    Mat K_chi;
    Mat K_one_minus_chi;
    Mat L;

    double sym_defect_rel = 0.0;  ///< self-adjointness defect before symmetrization
    double null_defect_rel = 0.0; ///< null-space defect before deflation
    double clamp_fraction = 0.0;  ///< gain quadrature mass clamped at the hull

    Mat K() const { return K_chi + K_one_minus_chi; }
};

/// Nodal null-space basis {sqrt(J), p_i sqrt(J), p^0 sqrt(J)}, raw (not
/// orthonormalized).
inline Mat null_basis(const MomentumGrid& grid) {
    const std::size_t n = grid.size();
    const std::vector<double> j = discrete_juttner(grid);
    Mat basis(n, 5);
    for (std::size_t i = 0; i < n; ++i) {
        const Momentum3& p = grid.node(i);
        const double sj = std::sqrt(j[i]);
        basis(i, 0) = sj;
        basis(i, 1) = p.c[0] * sj;
        basis(i, 2) = p.c[1] * sj;
        basis(i, 3) = p.c[2] * sj;
        basis(i, 4) = p.p0 * sj;
    }
    return basis;
}

/// Orthonormalize the columns of `basis` in the weighted inner product.
inline Mat orthonormalize_weighted(const MomentumGrid& grid, Mat basis) {
    const std::size_t n = grid.size();
    for (int col = 0; col < basis.cols(); ++col) {
        for (int prev = 0; prev < col; ++prev) {
            double proj = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                proj += grid.quad_weight(i) * basis(i, col) * basis(i, prev);
            basis.col(col) -= proj * basis.col(prev);
        }
        double norm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            norm2 += grid.quad_weight(i) * basis(i, col) * basis(i, col);
        basis.col(col) /= std::sqrt(norm2);
    }
    return basis;
}

struct AssemblyOptions {
    double g_min = 1e-8;
    int threads = 0;
    double sym_defect_budget = 0.5; ///< relative pre-symmetrization defect allowed
};

inline OperatorMatrices assemble_operator_matrices(const KernelModel& model,
                                                   const MomentumGrid& grid,
                                                   const SphereRule& rule,
                                                   const AssemblyOptions& opt = {}) {
    CollisionEngine engine(model, grid, rule, opt.g_min, opt.threads);
    const std::size_t n = grid.size();
    const Eigen::Index ni = static_cast<Eigen::Index>(n);
    const Vec& j = engine.j();
    const Vec& sj = engine.sqrt_j();

    OperatorMatrices op{.grid = grid, .model = model};
    op.sqrt_j = sj;
    op.nu = engine.collision_frequency_all();
    op.K_chi = Mat::Zero(ni, ni);
    op.K_one_minus_chi = Mat::Zero(ni, ni);

    std::vector<double> clamped(n, 0.0), total(n, 0.0);
    parallel_for(n, engine.threads(), [&](std::size_t ip) {
        // Row ip of K = K2 - K1 with the gain part in equilibrium-ratio form:
        //   K2 h (p) = sqrt(J(p)) int v sigma J(q) [psi(p') + psi(q')],
        //   psi = h / sqrt(J),
        // so the scatter weight into column c is stencil_weight / sqrt(J_c).
        Vec row_chi = Vec::Zero(ni);
        Vec row_1mchi = Vec::Zero(ni);
        const double sj_p = sj[ip];
        double cl = 0.0, tot = 0.0;
        engine.sweep_row(ip, [&](const SweepTerm& t) {
            const double gain = t.c0 * j[t.iq] * sj_p;
            const double gain_chi = gain * t.chi;
            const double gain_1m = gain - gain_chi;
            for (int k = 0; k < 8; ++k) {
                const std::size_t cp = t.sp.index[k];
                const std::size_t cq = t.sq.index[k];
                row_chi[cp] += gain_chi * t.sp.weight[k] / sj[cp];
                row_chi[cq] += gain_chi * t.sq.weight[k] / sj[cq];
                row_1mchi[cp] += gain_1m * t.sp.weight[k] / sj[cp];
                row_1mchi[cq] += gain_1m * t.sq.weight[k] / sj[cq];
            }
            const double loss = t.c0 * sj[t.iq] * sj_p;
            row_chi[t.iq] -= loss * t.chi;
            row_1mchi[t.iq] -= loss * (1.0 - t.chi);
            tot += std::abs(gain);
            if (t.sp.clamped || t.sq.clamped) cl += std::abs(gain);
        });
        op.K_chi.row(static_cast<Eigen::Index>(ip)) = row_chi.transpose();
        op.K_one_minus_chi.row(static_cast<Eigen::Index>(ip)) = row_1mchi.transpose();
        clamped[ip] = cl;
        total[ip] = tot;
    });
    double cl_sum = 0.0, tot_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cl_sum += clamped[i];
        tot_sum += total[i];
    }
    op.clamp_fraction = tot_sum > 0.0 ? cl_sum / tot_sum : 0.0;

    // Symmetrize in the weighted inner product: K <- (K + W^-1 K^T W)/2.
    Vec w(ni);
    for (std::size_t i = 0; i < n; ++i) w[i] = grid.quad_weight(i);
    auto symmetrize = [&](Mat& K) -> double {
        Mat adj = w.cwiseInverse().asDiagonal() * K.transpose() * w.asDiagonal();
        const double defect = (K - adj).norm();
        const double scale = K.norm();
        K = 0.5 * (K + adj);
        return scale > 0.0 ? defect / (2.0 * scale) : 0.0;
    };
    const double d_chi = symmetrize(op.K_chi);
    const double d_1m = symmetrize(op.K_one_minus_chi);
    op.sym_defect_rel = std::max(d_chi, d_1m);
    if (op.sym_defect_rel > opt.sym_defect_budget)
        throw numerics_error("assemble_operator_matrices: self-adjointness defect " +
                             std::to_string(op.sym_defect_rel) + " exceeds budget");

    // Deflate: enforce L U = 0 for the five invariants, pushing the symmetric
    // correction into K_chi so the splitting identities stay exact.
    Mat L = Mat(op.nu.asDiagonal()) - op.K_chi - op.K_one_minus_chi;
    const Mat U = orthonormalize_weighted(grid, null_basis(grid));
    {
        double worst = 0.0;
        for (int c = 0; c < 5; ++c) {
            const Vec lu = L * U.col(c);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                num += grid.quad_weight(i) * lu[i] * lu[i];
                den += grid.quad_weight(i) * op.nu[i] * op.nu[i] * U(i, c) * U(i, c);
            }
            worst = std::max(worst, std::sqrt(num / den));
        }
        op.null_defect_rel = worst;
    }
    const Mat P = U * (U.transpose() * w.asDiagonal()); // weighted projector onto the null space
    const Mat LP = L * P;
    const Mat correction = P * L + LP - P * LP;
    L -= correction;
    op.K_chi += correction;
    op.L = std::move(L);
    return op;
}

template <class V>
V apply_K(const OperatorMatrices& op, const V& h, KernelSplit split = KernelSplit::full) {
    switch (split) {
    case KernelSplit::chi: return op.K_chi * h;
    case KernelSplit::one_minus_chi: return op.K_one_minus_chi * h;
    default: return op.K_chi * h + op.K_one_minus_chi * h;
    }
}

template <class V>
V apply_L(const OperatorMatrices& op, const V& h) {
    return op.L * h;
}

/// Similarity transform S A S^-1 with S = diag(sqrt(w)); weighted
/// self-adjointness of A becomes plain symmetry of the result.
inline Mat weight_scaled(const MomentumGrid& grid, const Mat& A) {
    const Eigen::Index n = A.rows();
    Vec s(n), si(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s[i] = std::sqrt(grid.quad_weight(static_cast<std::size_t>(i)));
        si[i] = 1.0 / s[i];
    }
    return s.asDiagonal() * A * si.asDiagonal();
}

struct SpectrumReport {
    Vec eigenvalues;     ///< of L, ascending
    int null_count = 0;  ///< eigenvalues below eps_grid
    double min_eigenvalue = 0.0;
    double delta0 = 0.0; ///< coercivity constant min_{h perp N} <Lh,h>/<nu h,h>
};

inline SpectrumReport operator_spectrum(const OperatorMatrices& op, double eps_grid = 1e-6) {
    const Mat Ls = weight_scaled(op.grid, op.L);
    const Mat Lsym = 0.5 * (Ls + Ls.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(Lsym);
    SpectrumReport rep;
    rep.eigenvalues = es.eigenvalues();
    rep.min_eigenvalue = rep.eigenvalues[0];
    for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i)
        if (rep.eigenvalues[i] < eps_grid) ++rep.null_count;

    Vec nu_inv_sqrt = op.nu.cwiseSqrt().cwiseInverse();
    const Mat M = nu_inv_sqrt.asDiagonal() * Lsym * nu_inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> esm(0.5 * (M + M.transpose()));
    rep.delta0 = esm.eigenvalues()[5]; // first above the five invariants
    return rep;
}

} // namespace rboltz
