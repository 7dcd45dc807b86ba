#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>
#include <vector>

#include "rboltz/operators.hpp"

namespace rboltz {

/// Equilibrium moments entering the hydrodynamic projection and the balance
/// laws, together with the derived constants alpha1, alpha2, beta.  All are
/// grid quadratures of the discretely normalized equilibrium, so every
/// algebraic identity among them holds to rounding.
struct MuConstants {
    double mu0 = 0.0;       ///< int p0 J
    double mu00 = 0.0;      ///< int (p0)^2 J
    double mu11 = 0.0;      ///< int p1^2 J
    double mu11_0 = 0.0;    ///< int p1^2/p0 J
    double mu1122_00 = 0.0; ///< int p1^2 p2^2/(p0)^2 J
    double mu1111_00 = 0.0; ///< int p1^4/(p0)^2 J
    double mu11_00 = 0.0;   ///< int p1^2/(p0)^2 J
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double beta = 0.0;
};

inline MuConstants compute_mu_constants(const MomentumGrid& grid) {
    const std::vector<double> j = discrete_juttner(grid);
    MuConstants mu;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Momentum3& p = grid.node(i);
        const double wj = grid.quad_weight(i) * j[i];
        const double p0 = p.p0;
        const double p1 = p.c[0], p2 = p.c[1];
        mu.mu0 += wj * p0;
        mu.mu00 += wj * p0 * p0;
        mu.mu11 += wj * p1 * p1;
        mu.mu11_0 += wj * p1 * p1 / p0;
        mu.mu1122_00 += wj * p1 * p1 * p2 * p2 / (p0 * p0);
        mu.mu1111_00 += wj * p1 * p1 * p1 * p1 / (p0 * p0);
        mu.mu11_00 += wj * p1 * p1 / (p0 * p0);
    }
    if (!(mu.mu00 > mu.mu0 * mu.mu0))
        throw numerics_error("compute_mu_constants: grid too coarse, mu00 <= mu0^2");
    mu.alpha1 = (mu.mu1122_00 - mu.mu11 * mu.mu11_0 / mu.mu0) / (mu.mu11_0 - mu.mu11 / mu.mu0);
    mu.alpha2 = mu.mu11_0 / mu.mu11;
    mu.beta = -3.0 * mu.mu1122_00 / (mu.mu1122_00 - mu.mu1111_00) - 1.0;
    return mu;
}

template <class Scalar>
struct MacroCoefficientsT {
    Scalar a{};
    Eigen::Matrix<Scalar, 3, 1> b = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Scalar c{};
};
using MacroCoefficients = MacroCoefficientsT<std::complex<double>>;

template <class Scalar>
struct MomentSetT {
    Eigen::Matrix<Scalar, 3, 3> theta = Eigen::Matrix<Scalar, 3, 3>::Zero(); ///< Theta_{mj}
    Eigen::Matrix<Scalar, 3, 1> lambda = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Scalar a_func{}; ///< A(h) = int (sqrt(J)/p0) h
};
using MomentSet = MomentSetT<std::complex<double>>;

template <class Scalar>
struct ProjectionT {
    MacroCoefficientsT<Scalar> coeffs;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hydro; ///< P h
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> micro; ///< (I - P) h
};

/// Grid-cached functional weights for the projection P, the moment
/// functionals Theta/Lambda/A, and the macro constants.
class MacroContext {
public:
    explicit MacroContext(const MomentumGrid& grid)
        : grid_(grid), mu_(compute_mu_constants(grid)) {
        const std::size_t n = grid.size();
        const std::vector<double> j = discrete_juttner(grid);
        sqrt_j_.resize(n);
        for (std::size_t i = 0; i < n; ++i) sqrt_j_[i] = std::sqrt(j[i]);
        e0_.resize(n);
        e4_.resize(n);
        for (int m = 0; m < 3; ++m) {
            eb_[m].resize(n);
            lambda_w_[m].resize(n);
        }
        for (int m = 0; m < 3; ++m)
            for (int l = 0; l < 3; ++l) theta_w_[m][l].resize(n);
        a_w_.resize(n);
        w0_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Momentum3& p = grid.node(i);
            const double w = grid.quad_weight(i);
            const double sj = sqrt_j_[i];
            w0_[i] = w;
            e0_[i] = sj;
            e4_[i] = p.p0 * sj;
            for (int m = 0; m < 3; ++m) {
                eb_[m][i] = p.c[m] * sj;
                lambda_w_[m][i] = w * p.c[m] * (1.0 / p.p0 - mu_.alpha2) * sj;
            }
            for (int m = 0; m < 3; ++m)
                for (int l = 0; l < 3; ++l)
                    theta_w_[m][l][i] = w * (p.c[m] * p.c[l] / p.p0 - mu_.alpha1) * sj;
            a_w_[i] = w * sj / p.p0;
        }
    }

    const MomentumGrid& grid() const { return grid_; }
    const MuConstants& mu() const { return mu_; }
    const Vec& sqrt_j() const { return sqrt_j_; }

    /// Weighted moment sum_i w_i chi_i h_i (linear in h; chi is real).
    template <class V>
    auto moment(const Vec& wchi, const V& h) const {
        using Scalar = std::decay_t<decltype(h[0])>;
        Scalar acc{};
        for (Eigen::Index i = 0; i < h.size(); ++i) acc += wchi[i] * h[i];
        return acc;
    }

    template <class V>
    ProjectionT<std::decay_t<decltype(std::declval<V>()[0])>> project(const V& h) const {
        using Scalar = std::decay_t<decltype(h[0])>;
        ProjectionT<Scalar> out;
        const Scalar m0 = weighted_moment(e0_, h);
        const Scalar m4 = weighted_moment(e4_, h);
        const double denom = mu_.mu00 - mu_.mu0 * mu_.mu0;
        out.coeffs.c = (m4 - mu_.mu0 * m0) / denom;
        out.coeffs.a = m0 - mu_.mu0 * out.coeffs.c;
        for (int m = 0; m < 3; ++m) out.coeffs.b[m] = weighted_moment(eb_[m], h) / mu_.mu11;
        out.hydro.resize(h.size());
        for (Eigen::Index i = 0; i < h.size(); ++i) {
            Scalar lin = out.coeffs.a + out.coeffs.c * grid_.node(static_cast<std::size_t>(i)).p0;
            for (int m = 0; m < 3; ++m)
                lin += out.coeffs.b[m] * grid_.node(static_cast<std::size_t>(i)).c[m];
            out.hydro[i] = lin * sqrt_j_[i];
        }
        out.micro = h - out.hydro;
        return out;
    }

    template <class V>
    MomentSetT<std::decay_t<decltype(std::declval<V>()[0])>> moment_functionals(const V& h) const {
        using Scalar = std::decay_t<decltype(h[0])>;
        MomentSetT<Scalar> out;
        for (int m = 0; m < 3; ++m) {
            for (int l = 0; l < 3; ++l) out.theta(m, l) = moment(theta_w_[m][l], h);
            out.lambda[m] = moment(lambda_w_[m], h);
        }
        out.a_func = moment(a_w_, h);
        return out;
    }

private:
    template <class V>
    auto weighted_moment(const Vec& chi, const V& h) const {
        using Scalar = std::decay_t<decltype(h[0])>;
        Scalar acc{};
        for (Eigen::Index i = 0; i < h.size(); ++i) acc += w0_[i] * chi[i] * h[i];
        return acc;
    }

    MomentumGrid grid_;
    MuConstants mu_;
    Vec sqrt_j_;
    Vec w0_;
    Vec e0_, e4_;
    std::array<Vec, 3> eb_;
    std::array<Vec, 3> lambda_w_;
    std::array<std::array<Vec, 3>, 3> theta_w_;
    Vec a_w_;
};

template <class V>
auto project_P(const MacroContext& ctx, const V& h) {
    return ctx.project(h);
}

template <class V>
auto moment_functionals(const MacroContext& ctx, const V& h) {
    return ctx.moment_functionals(h);
}

/// One law's worst-case residual along a trajectory, relative to the size of
/// the terms entering it.
struct BalanceLawResidual {
    std::string law;
    double max_abs = 0.0;
    double scale = 0.0;
    double rel() const { return scale > 0.0 ? max_abs / scale : 0.0; }
};

struct BalanceReport {
    std::vector<BalanceLawResidual> laws;
    double dt = 0.0;
    double worst_rel() const {
        double w = 0.0;
        for (const auto& l : laws) w = std::max(w, l.rel());
        return w;
    }
    const BalanceLawResidual* worst_law() const {
        const BalanceLawResidual* out = nullptr;
        for (const auto& l : laws)
            if (!out || l.rel() > out->rel()) out = &l;
        return out;
    }
};

/// Check the macroscopic balance laws along a stored trajectory of one
/// spatial frequency, with centered finite differences in time.  Gradients
/// become i k multiplications on the Fourier side.
inline BalanceReport balance_residuals(const MacroContext& ctx, const OperatorMatrices& ops,
                                       const Eigen::Vector3d& freq,
                                       const std::vector<double>& times,
                                       const std::vector<VecC>& states) {
    using C = std::complex<double>;
    const std::size_t n_t = times.size();
    if (n_t < 3 || states.size() != n_t)
        throw std::invalid_argument("balance_residuals: need >= 3 uniform snapshots");
    const double dt = times[1] - times[0];
    const MuConstants& mu = ctx.mu();
    const C I(0.0, 1.0);

    struct Snapshot {
        MacroCoefficients coeffs;
        MomentSet mom_micro;
        MomentSet mom_r;
    };
    std::vector<Snapshot> snap(n_t);
    for (std::size_t it = 0; it < n_t; ++it) {
        auto proj = ctx.project(states[it]);
        snap[it].coeffs = proj.coeffs;
        snap[it].mom_micro = ctx.moment_functionals(proj.micro);
        // R = -L((I-P)f) - i (phat . k) (I-P)f
        VecC r = -(ops.L * proj.micro);
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            const auto ph = ops.grid.node(static_cast<std::size_t>(i)).phat();
            const double pk = ph[0] * freq[0] + ph[1] * freq[1] + ph[2] * freq[2];
            r[i] -= I * pk * proj.micro[i];
        }
        snap[it].mom_r = ctx.moment_functionals(r);
    }

    BalanceReport report;
    report.dt = dt;
    report.laws.reserve(8);
    auto add_law = [&](const std::string& name) -> BalanceLawResidual& {
        report.laws.push_back({name, 0.0, 0.0});
        return report.laws.back();
    };
    auto track = [](BalanceLawResidual& law, C residual, double scale) {
        law.max_abs = std::max(law.max_abs, std::abs(residual));
        law.scale = std::max(law.scale, scale);
    };

    auto& law37 = add_law("VPB3.7");
    auto& law39 = add_law("VPB3.9");
    auto& law392 = add_law("VPB3.9-2");
    auto& law320 = add_law("VPB3.20");
    auto& law311 = add_law("VPB3.11");
    auto& law312 = add_law("VPB3.12");
    auto& law313 = add_law("VPB3.13");

    const double cc = (mu.mu00 / mu.mu0) * (mu.mu11_0 - mu.alpha1) - mu.mu11 + mu.alpha1 * mu.mu0;

    for (std::size_t it = 1; it + 1 < n_t; ++it) {
        const auto& sm = snap[it - 1];
        const auto& s0 = snap[it];
        const auto& sp = snap[it + 1];
        const double inv2dt = 1.0 / (2.0 * dt);
        auto ddt = [&](auto&& get) { return (get(sp) - get(sm)) * inv2dt; };

        const C da = ddt([](const Snapshot& s) { return s.coeffs.a; });
        const C dc = ddt([](const Snapshot& s) { return s.coeffs.c; });
        Eigen::Vector3cd db;
        for (int m = 0; m < 3; ++m)
            db[m] = ddt([m](const Snapshot& s) { return s.coeffs.b[m]; });

        C kb(0.0, 0.0), klam(0.0, 0.0);
        for (int m = 0; m < 3; ++m) {
            kb += freq[m] * s0.coeffs.b[m];
            klam += freq[m] * s0.mom_micro.lambda[m];
        }

        {
            const C t1 = da * mu.mu0, t2 = dc * mu.mu00, t3 = I * kb * mu.mu11;
            track(law37, t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3));
        }
        {
            const C t1 = da * (1.0 - mu.mu0 * mu.mu0 / mu.mu00);
            const C t2 = I * kb * (mu.mu11_0 - mu.mu11 * mu.mu0 / mu.mu00);
            const C t3 = I * klam;
            track(law39, t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3));
        }
        {
            const C t1 = dc * (mu.mu0 - mu.mu00 / mu.mu0);
            const C t2 = I * kb * (mu.mu11_0 - mu.mu11 / mu.mu0);
            const C t3 = I * klam;
            track(law392, t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3));
        }
        for (int jdir = 0; jdir < 3; ++jdir) {
            const C t1 = db[jdir] * mu.mu11;
            const C t2 = I * freq[jdir] * (s0.coeffs.a * mu.mu11_0 + s0.coeffs.c * mu.mu11);
            C t3(0.0, 0.0);
            for (int m = 0; m < 3; ++m) t3 += I * freq[m] * s0.mom_micro.theta(m, jdir);
            track(law320, t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3));
        }
        for (int jdir = 0; jdir < 3; ++jdir) {
            const C dth = ddt([jdir](const Snapshot& s) { return s.mom_micro.theta(jdir, jdir); });
            const C t2 = s0.mom_r.theta(jdir, jdir);
            const C t3 = dc * cc;
            const C t4 = I * freq[jdir] * s0.coeffs.b[jdir] * (mu.mu1122_00 - mu.mu1111_00);
            track(law311, dth - t2 - t3 - t4,
                  std::abs(dth) + std::abs(t2) + std::abs(t3) + std::abs(t4));
        }
        for (int m = 0; m < 3; ++m)
            for (int jdir = m + 1; jdir < 3; ++jdir) {
                const C dth = ddt([m, jdir](const Snapshot& s) { return s.mom_micro.theta(m, jdir); });
                const C t2 = s0.mom_r.theta(m, jdir);
                const C t3 = I * (freq[m] * s0.coeffs.b[jdir] + freq[jdir] * s0.coeffs.b[m]) *
                             mu.mu1122_00;
                const C t4 = mu.alpha1 * I * klam;
                track(law312, dth - t2 + t3 + t4,
                      std::abs(dth) + std::abs(t2) + std::abs(t3) + std::abs(t4));
            }
        for (int m = 0; m < 3; ++m) {
            const C dlam = ddt([m](const Snapshot& s) { return s.mom_micro.lambda[m]; });
            const C t2 = s0.mom_r.lambda[m];
            const C t3 = I * freq[m] * s0.coeffs.a * (mu.mu11_00 - mu.alpha2 * mu.mu11_0);
            track(law313, dlam - t2 + t3, std::abs(dlam) + std::abs(t2) + std::abs(t3));
        }
    }
    return report;
}

/// Throws a numerics_error naming the first law whose relative residual
/// exceeds the budget.
inline void enforce_balance_budget(const BalanceReport& report, double budget) {
    for (const auto& law : report.laws)
        if (law.rel() > budget)
            throw numerics_error("balance law " + law.law + " residual " +
                                 std::to_string(law.rel()) + " exceeds budget " +
                                 std::to_string(budget));
}

} // namespace rboltz
