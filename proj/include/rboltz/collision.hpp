#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rboltz/grid.hpp"
#include "rboltz/kernel.hpp"
#include "rboltz/parallel.hpp"
#include "rboltz/sphere.hpp"

namespace rboltz {

using Vec = Eigen::VectorXd;
using VecC = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using MatC = Eigen::MatrixXcd;

/// One quadrature atom of the (q, omega) collision sweep for a fixed p.
struct SweepTerm {
    std::size_t iq;      ///< grid index of the partner momentum
    double c0;           ///< w_q * w_omega * v_moller * sigma
    double chi;          ///< smooth cutoff factor chi(g)
    TrilinearStencil sp; ///< stencil at the outgoing p'
    TrilinearStencil sq; ///< stencil at the outgoing q'
};

/// Direct (q, omega) quadrature engine for the collision integrals on one
/// grid.  Gain-type evaluations factor the equilibrium weight exactly through
/// energy conservation, J(p')J(q') = J(p)J(q), and interpolate only the
/// ratio of the argument to the equilibrium; stencils falling outside the
/// hull are clamped to it and the clamped quadrature mass is tallied.
class CollisionEngine {
public:
    CollisionEngine(const KernelModel& model, const MomentumGrid& grid, const SphereRule& rule,
                    double g_min = 1e-8, int threads = 0)
        : model_(model), grid_(grid), sphere_(rule), g_min_(g_min),
          threads_(threads > 0 ? threads : hardware_threads()) {
        const std::size_t n = grid_.size();
        const std::vector<double> j = discrete_juttner(grid_);
        j_.resize(n);
        sqrt_j_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            j_[i] = j[i];
            sqrt_j_[i] = std::sqrt(j[i]);
        }
    }

    const KernelModel& model() const { return model_; }
    const MomentumGrid& grid() const { return grid_; }
    const SphereRule& sphere() const { return sphere_; }
    int threads() const { return threads_; }
    double g_min() const { return g_min_; }
    const Vec& j() const { return j_; }
    const Vec& sqrt_j() const { return sqrt_j_; }

    template <class V>
    static auto interp(const V& values, const TrilinearStencil& s) {
        using Scalar = std::decay_t<decltype(values[0])>;
        Scalar acc = s.weight[0] * values[s.index[0]];
        for (int k = 1; k < 8; ++k) acc += s.weight[k] * values[s.index[k]];
        return acc;
    }

    /// Radicand cutoff for the pair (p, q): skip below g_min^2, floored at the
    /// rounding scale of the radicand itself so that self-pairs (true g = 0)
    /// are excluded deterministically.
    double rad_floor(double e) const {
        return std::max(g_min_ * g_min_, 512.0 * std::numeric_limits<double>::epsilon() * e);
    }

    /// Visit all quadrature atoms for a fixed target momentum p.  Pairs with
    /// g < g_min are skipped (soft-potential singularity cutoff).
    template <class Visitor>
    void sweep_row(std::size_t ip, Visitor&& visit) const {
        const Momentum3& p = grid_.node(ip);
        const bool isotropic = model_.angular_exponent == 0.0;
        const std::size_t nq = grid_.size();
        const std::size_t nw = sphere_.size();
        for (std::size_t iq = 0; iq < nq; ++iq) {
            const Momentum3& q = grid_.node(iq);
            const double e = p.p0 * q.p0;
            double rad = 2.0 * (e - dot(p, q) - 1.0);
            if (rad < rad_floor(e)) continue;
            const double g = std::sqrt(rad);
            const double s = rad + 4.0;
            const double sqrt_s = std::sqrt(s);
            const double v_moller = g * sqrt_s / e;
            const double gamma = (p.p0 + q.p0) / sqrt_s;
            const double chi = model_.chi(g);
            const double base = grid_.quad_weight(iq) * v_moller;
            const double sigma_iso = isotropic ? sigma_eval(model_, g, 0.0) : 0.0;

            const double t0 = p.c[0] + q.c[0], t1 = p.c[1] + q.c[1], t2c = p.c[2] + q.c[2];
            const double tt = t0 * t0 + t1 * t1 + t2c * t2c;
            const double gm1_over_tt = (tt > 1e-14) ? (gamma - 1.0) / tt : 0.0;
            const double hg = 0.5 * g;
            const double inv_g2 = 1.0 / rad;
            const double dp0 = p.c[0] - q.c[0], dp1 = p.c[1] - q.c[1], dp2 = p.c[2] - q.c[2];
            const double de = p.p0 - q.p0;

            for (std::size_t iw = 0; iw < nw; ++iw) {
                const auto& w = sphere_.nodes[iw];
                const double corr = gm1_over_tt * (t0 * w[0] + t1 * w[1] + t2c * w[2]);
                const double d0 = hg * (w[0] + corr * t0);
                const double d1 = hg * (w[1] + corr * t1);
                const double d2 = hg * (w[2] + corr * t2c);
                const double px = 0.5 * t0 + d0, py = 0.5 * t1 + d1, pz = 0.5 * t2c + d2;
                const double qx = 0.5 * t0 - d0, qy = 0.5 * t1 - d1, qz = 0.5 * t2c - d2;

                double sigma = sigma_iso;
                if (!isotropic) {
                    const double pp0 = std::sqrt(1.0 + px * px + py * py + pz * pz);
                    const double qp0 = std::sqrt(1.0 + qx * qx + qy * qy + qz * qz);
                    double ct = (dp0 * (px - qx) + dp1 * (py - qy) + dp2 * (pz - qz) -
                                 de * (pp0 - qp0)) * inv_g2;
                    if (ct > 1.0) ct = 1.0;
                    if (ct < -1.0) ct = -1.0;
                    sigma = sigma_eval(model_, g, ct);
                }

                SweepTerm term;
                term.iq = iq;
                term.c0 = base * sphere_.weights[iw] * sigma;
                term.chi = chi;
                term.sp = grid_.stencil(px, py, pz);
                term.sq = grid_.stencil(qx, qy, qz);
                visit(term);
            }
        }
    }

    /// nu(p) = int dq int dw v_moller sigma J(q), at an arbitrary momentum.
    double collision_frequency(const Momentum3& p) const {
        const bool isotropic = model_.angular_exponent == 0.0;
        const double four_pi = 4.0 * std::numbers::pi;
        double acc = 0.0;
        for (std::size_t iq = 0; iq < grid_.size(); ++iq) {
            const Momentum3& q = grid_.node(iq);
            const double e = p.p0 * q.p0;
            double rad = 2.0 * (e - dot(p, q) - 1.0);
            if (rad < rad_floor(e)) continue;
            const double g = std::sqrt(rad);
            const double s = rad + 4.0;
            const double v_moller = g * std::sqrt(s) / e;
            const double wj = grid_.quad_weight(iq) * v_moller * j_[iq];
            if (isotropic) {
                acc += wj * sigma_eval(model_, g, 0.0) * four_pi;
                continue;
            }
            // Angular factor requires the scattering angle per omega.
            double ang = 0.0;
            const double gamma = (p.p0 + q.p0) / std::sqrt(s);
            const double t0 = p.c[0] + q.c[0], t1 = p.c[1] + q.c[1], t2c = p.c[2] + q.c[2];
            const double tt = t0 * t0 + t1 * t1 + t2c * t2c;
            const double gm1_over_tt = (tt > 1e-14) ? (gamma - 1.0) / tt : 0.0;
            const double hg = 0.5 * g;
            const double inv_g2 = 1.0 / rad;
            const double dp0 = p.c[0] - q.c[0], dp1 = p.c[1] - q.c[1], dp2 = p.c[2] - q.c[2];
            const double de = p.p0 - q.p0;
            for (std::size_t iw = 0; iw < sphere_.size(); ++iw) {
                const auto& w = sphere_.nodes[iw];
                const double corr = gm1_over_tt * (t0 * w[0] + t1 * w[1] + t2c * w[2]);
                const double d0 = hg * (w[0] + corr * t0);
                const double d1 = hg * (w[1] + corr * t1);
                const double d2 = hg * (w[2] + corr * t2c);
                const double px = 0.5 * t0 + d0, py = 0.5 * t1 + d1, pz = 0.5 * t2c + d2;
                const double qx = 0.5 * t0 - d0, qy = 0.5 * t1 - d1, qz = 0.5 * t2c - d2;
                const double pp0 = std::sqrt(1.0 + px * px + py * py + pz * pz);
                const double qp0 = std::sqrt(1.0 + qx * qx + qy * qy + qz * qz);
                double ct = (dp0 * (px - qx) + dp1 * (py - qy) + dp2 * (pz - qz) -
                             de * (pp0 - qp0)) * inv_g2;
                if (ct > 1.0) ct = 1.0;
                if (ct < -1.0) ct = -1.0;
                ang += sphere_.weights[iw] * sigma_eval(model_, g, ct);
            }
            acc += wj * ang;
        }
        return acc;
    }

    Vec collision_frequency_all() const {
        Vec nu(grid_.size());
        parallel_for(grid_.size(), threads_, [&](std::size_t i) {
            nu[static_cast<Eigen::Index>(i)] = collision_frequency(grid_.node(i));
        });
        return nu;
    }

    struct GainLossResult {
        Vec q_plus;
        Vec q_minus;
        Vec r_of_g;
        double clamp_fraction = 0.0; ///< share of gain quadrature mass clamped at the hull
    };

    /// Gain/loss split: Q+(F,G)(p) = int v sigma F(p')G(q'),
    /// Q-(F,G)(p) = F(p) R(G)(p) with R(G) = int v sigma G(q).
    GainLossResult apply_gain_loss(const Vec& F, const Vec& G) const {
        const std::size_t n = grid_.size();
        if (static_cast<std::size_t>(F.size()) != n || static_cast<std::size_t>(G.size()) != n)
            throw std::invalid_argument("apply_gain_loss: F, G must be grid functions");
        Vec wf(n), wg(n);
        for (std::size_t i = 0; i < n; ++i) {
            wf[i] = F[i] / j_[i];
            wg[i] = G[i] / j_[i];
        }
        GainLossResult out;
        out.q_plus.resize(n);
        out.q_minus.resize(n);
        out.r_of_g.resize(n);
        std::vector<double> clamped(n, 0.0), total(n, 0.0);
        parallel_for(n, threads_, [&](std::size_t ip) {
            double gain = 0.0, loss_rate = 0.0, cl = 0.0, tot = 0.0;
            sweep_row(ip, [&](const SweepTerm& t) {
                const double m = t.c0 * j_[t.iq];
                loss_rate += t.c0 * G[t.iq];
                gain += m * interp(wf, t.sp) * interp(wg, t.sq);
                tot += m;
                if (t.sp.clamped || t.sq.clamped) cl += m;
            });
            out.q_plus[ip] = j_[ip] * gain;
            out.r_of_g[ip] = loss_rate;
            out.q_minus[ip] = F[ip] * loss_rate;
            clamped[ip] = cl;
            total[ip] = tot;
        });
        double c = 0.0, tt = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c += clamped[i];
            tt += total[i];
        }
        out.clamp_fraction = tt > 0.0 ? c / tt : 0.0;
        return out;
    }

    /// Bilinear perturbation operator
    ///   Gamma(h1,h2)(p) = int v sigma sqrt(J(q)) [h1(p')h2(q') - h1(p)h2(q)].
    template <class Scalar>
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>
    apply_gamma(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& h1,
                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& h2) const {
        const std::size_t n = grid_.size();
        if (static_cast<std::size_t>(h1.size()) != n || static_cast<std::size_t>(h2.size()) != n)
            throw std::invalid_argument("apply_gamma: h1, h2 must be grid functions");
        using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
        V psi1(n), psi2(n);
        for (std::size_t i = 0; i < n; ++i) {
            psi1[i] = h1[i] / sqrt_j_[i];
            psi2[i] = h2[i] / sqrt_j_[i];
        }
        V out(n);
        parallel_for(n, threads_, [&](std::size_t ip) {
            const double sj_p = sqrt_j_[ip];
            Scalar acc = Scalar(0);
            sweep_row(ip, [&](const SweepTerm& t) {
                const double sj_q = sqrt_j_[t.iq];
                acc += (t.c0 * sj_q) *
                       (sj_p * sj_q * interp(psi1, t.sp) * interp(psi2, t.sq) - h1[ip] * h2[t.iq]);
            });
            out[ip] = acc;
        });
        return out;
    }

private:
    KernelModel model_;
    MomentumGrid grid_;
    SphereRule sphere_;
    double g_min_;
    int threads_;
    Vec j_;
    Vec sqrt_j_;
};

} // namespace rboltz
