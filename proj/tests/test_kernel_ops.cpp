#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "rboltz/mode.hpp"
#include "rboltz/operators.hpp"

using namespace rboltz;
using Catch::Approx;

namespace {

const MomentumGrid& grid7() {
    static const MomentumGrid g(8.0, 7);
    return g;
}

const OperatorMatrices& ops7() {
    static const OperatorMatrices ops =
        assemble_operator_matrices(KernelModel::soft(1.0, 0.0), grid7(), sphere_rule(4));
    return ops;
}

const CollisionEngine& engine7() {
    static const CollisionEngine e(KernelModel::soft(1.0, 0.0), grid7(), sphere_rule(4));
    return e;
}

Vec random_grid_fn(const MomentumGrid& g, std::uint64_t seed, bool decaying = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec h(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        h[static_cast<Eigen::Index>(i)] =
            gauss(rng) * (decaying ? std::exp(-0.25 * g.node(i).p0) : 1.0);
    return h;
}

double wdot_real(const MomentumGrid& g, const Vec& u, const Vec& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        acc += g.quad_weight(i) * u[static_cast<Eigen::Index>(i)] * v[static_cast<Eigen::Index>(i)];
    return acc;
}

} // namespace

TEST_CASE("kernel model validation and zeta") {
    CHECK_THROWS_AS(KernelModel::soft(5.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelModel::soft(1.0, -2.5), std::invalid_argument);
    CHECK_THROWS_AS(KernelModel::soft(-0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelModel::hard(3.0, 0.0, 0.5), std::invalid_argument);
    const auto soft = KernelModel::soft(1.0, -1.0);
    CHECK(soft.zeta == Approx((2.0 - 1.0) / 4.0));
    const auto hard = KernelModel::hard(1.0, 0.0, 0.0);
    CHECK(hard.zeta == Approx(0.5));
}

TEST_CASE("chi ramp plateaus and smooth interior") {
    const auto m = KernelModel::soft(1.0, 0.0, 0.1);
    CHECK(m.chi(0.05) == 0.0);
    CHECK(m.chi(0.1) == 0.0);
    CHECK(m.chi(0.2) == 1.0);
    CHECK(m.chi(0.15) == Approx(0.5).margin(1e-12));
    double prev = 0.0;
    for (double g = 0.1; g <= 0.2; g += 0.005) {
        CHECK(m.chi(g) >= prev - 1e-15);
        prev = m.chi(g);
    }
}

TEST_CASE("sigma_eval: substitution values, bounds, singularity signal") {
    const auto soft = KernelModel::soft(1.0, 0.0);
    CHECK(sigma_eval(soft, 2.0, 0.3) == Approx(0.5).epsilon(1e-14));
    const auto hard = KernelModel::hard(1.0, 0.0, 0.0);
    CHECK(sigma_eval(hard, 1.0, -0.2) == Approx(2.0).epsilon(1e-14));
    CHECK_THROWS_AS(sigma_eval(soft, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(sigma_eval(soft, 1.0, 1.5), std::invalid_argument);

    // Two-sided admissibility: (g/sqrt(s)) g^{-b} sigma0 <= sigma <= g^{-b} sigma0.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> gu(0.01, 20.0), cu(-0.999, 0.999);
    const auto mdl = KernelModel::soft(1.5, -0.5);
    for (int i = 0; i < 2000; ++i) {
        const double g = gu(rng), ct = cu(rng);
        const double s = g * g + 4.0;
        const double sigma0 = std::pow(std::sqrt(1.0 - ct * ct), -0.5);
        const double sig = sigma_eval(mdl, g, ct);
        REQUIRE(sig <= std::pow(g, -1.5) * sigma0 * (1.0 + 1e-12));
        REQUIRE(sig >= (g / std::sqrt(s)) * std::pow(g, -1.5) * sigma0 * (1.0 - 1e-12));
    }
}

TEST_CASE("collision frequency: oracle value, positivity, isotropy, band") {
    // nu(0) against the independent radial oracle, on a wide fine grid.  The
    // g_min cutoff drops the q = p node, whose finite-limit contribution is
    // one quadrature weight h^3; the comparison is made at a resolution where
    // that cutoff error is inside the tolerance.
    {
        const MomentumGrid fine(14.0, 81);
        const CollisionEngine eng(KernelModel::soft(1.0, 0.0), fine, sphere_rule(2));
        const double nu0 = eng.collision_frequency(Momentum3());
        const double oracle = oracles::nu_at_origin_soft(1.0);
        CHECK(nu0 == Approx(oracle).epsilon(3e-3));
    }
    const auto& eng = engine7();
    const Vec nu = eng.collision_frequency_all();
    CHECK(nu.minCoeff() > 0.0);

    // reflection symmetry across the grid
    for (std::size_t i = 0; i < grid7().size(); i += 37)
        CHECK(nu[static_cast<Eigen::Index>(i)] ==
              Approx(nu[static_cast<Eigen::Index>(grid7().negated_index(i))]).epsilon(1e-12));

    // rotation invariance within quadrature tolerance
    const double a = eng.collision_frequency(Momentum3(3.0, 0.0, 0.0));
    const double b = eng.collision_frequency(Momentum3(0.0, 3.0, 0.0));
    const double c = eng.collision_frequency(Momentum3(3.0 / std::sqrt(2.0), 3.0 / std::sqrt(2.0), 0.0));
    CHECK(b == Approx(a).epsilon(1e-10));
    CHECK(c == Approx(a).epsilon(2e-2));

    // two-sided band of nu(p) (p0)^{b/2} along a ray
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double r = 0.0; r <= 20.0; r += 2.0) {
        const Momentum3 p(r, 0.0, 0.0);
        const double v = eng.collision_frequency(p) * std::pow(p.p0, 0.5);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi / lo <= 10.0);
}

TEST_CASE("gain/loss split: equilibrium annihilation and positivity") {
    const auto& eng = engine7();
    const Vec J = eng.j();
    const auto gl = eng.apply_gain_loss(J, J);
    const Vec nu = eng.collision_frequency_all();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < J.size(); ++i)
        worst = std::max(worst, std::abs(gl.q_plus[i] - gl.q_minus[i]) / (nu[i] * J[i]));
    CHECK(worst <= 1e-12);
    CHECK(gl.clamp_fraction >= 0.0);
    CHECK(gl.clamp_fraction < 0.5);

    // nonnegative inputs give nonnegative gain and loss rate
    Vec F(J.size()), G(J.size());
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < F.size(); ++i) {
        F[i] = u(rng) * J[i];
        G[i] = u(rng) * J[i];
    }
    const auto gl2 = eng.apply_gain_loss(F, G);
    CHECK(gl2.q_plus.minCoeff() >= 0.0);
    CHECK(gl2.r_of_g.minCoeff() >= 0.0);
    for (Eigen::Index i = 0; i < F.size(); ++i)
        REQUIRE(gl2.q_minus[i] == F[i] * gl2.r_of_g[i]);
}

TEST_CASE("collision invariants of Q(F,F) within the leakage budget") {
    const auto& eng = engine7();
    const auto& g = grid7();
    // smooth positive deviation from equilibrium (interpolation error, and
    // hence the conservation defect, scales with the field's smoothness)
    Vec F(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Momentum3& p = g.node(i);
        const double bump =
            0.3 * std::sin(0.4 * p.c[0]) + 0.2 * std::cos(0.3 * p.c[1] + 1.0) + 0.1 * std::sin(0.2 * p.c[2]);
        F[static_cast<Eigen::Index>(i)] = eng.j()[static_cast<Eigen::Index>(i)] * std::exp(bump);
    }
    const auto gl = eng.apply_gain_loss(F, F);
    const Vec q = gl.q_plus - gl.q_minus;
    for (int which = 0; which < 3; ++which) {
        double defect = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double phi = which == 0 ? 1.0 : (which == 1 ? g.node(i).c[0] : g.node(i).p0);
            defect += g.quad_weight(i) * q[static_cast<Eigen::Index>(i)] * phi;
            scale += g.quad_weight(i) * std::abs(gl.q_plus[static_cast<Eigen::Index>(i)]) *
                     std::max(std::abs(phi), 1.0);
        }
        // interpolation error and clamp leakage bound the conservation defect
        REQUIRE(std::abs(defect) <= 0.05 * scale);
    }
}

TEST_CASE("Gamma: equilibrium zero, bilinearity, pointwise estimate") {
    const auto& eng = engine7();
    const auto& g = grid7();
    Vec sqrtj = eng.sqrt_j();
    const Vec gamma_jj = eng.apply_gamma<double>(sqrtj, sqrtj);
    double worst = 0.0;
    const Vec nu = eng.collision_frequency_all();
    for (Eigen::Index i = 0; i < gamma_jj.size(); ++i)
        worst = std::max(worst, std::abs(gamma_jj[i]) / (nu[i] * sqrtj[i]));
    CHECK(worst <= 1e-12);

    const Vec h1 = random_grid_fn(g, 21), h2 = random_grid_fn(g, 22);
    const Vec g12 = eng.apply_gamma<double>(h1, h2);
    const Vec g12x2 = eng.apply_gamma<double>((2.0 * h1).eval(), h2);
    for (Eigen::Index i = 0; i < g12.size(); ++i)
        REQUIRE(g12x2[i] == Approx(2.0 * g12[i]).margin(1e-14 + 1e-12 * std::abs(g12[i])));

    // |w_l Gamma(h1,h2)(p)| <= C nu(p) sup|w_l h1| sup|w_l h2|, C stable
    // under grid refinement.
    auto gamma_constant = [](const MomentumGrid& gg) {
        const CollisionEngine e(KernelModel::soft(1.0, 0.0), gg, sphere_rule(4));
        const Vec nu_local = e.collision_frequency_all();
        const Vec a = random_grid_fn(gg, 31), b = random_grid_fn(gg, 32);
        const Vec gam = e.apply_gamma<double>(a, b);
        const Vec w2 = weight_sq(gg, 1.0, 1.0);
        double supa = 0.0, supb = 0.0, ratio = 0.0;
        for (Eigen::Index i = 0; i < gam.size(); ++i) {
            const double wl = std::sqrt(w2[i]);
            supa = std::max(supa, wl * std::abs(a[i]));
            supb = std::max(supb, wl * std::abs(b[i]));
        }
        for (Eigen::Index i = 0; i < gam.size(); ++i)
            ratio = std::max(ratio,
                             std::sqrt(w2[i]) * std::abs(gam[i]) / (nu_local[i] * supa * supb));
        return ratio;
    };
    const double c7 = gamma_constant(MomentumGrid(8.0, 7));
    const double c9 = gamma_constant(MomentumGrid(8.0, 9));
    CHECK(c7 > 0.0);
    CHECK(c9 <= 3.0 * c7);
    CHECK(c7 <= 3.0 * c9);
}

TEST_CASE("assembled operator: exact identities and reported defects") {
    const auto& ops = ops7();
    const auto& g = grid7();

    // K = K_chi + K_{1-chi} and L = diag(nu) - K hold exactly by construction.
    const Mat K = ops.K();
    const Mat L2 = Mat(ops.nu.asDiagonal()) - K;
    CHECK((L2 - ops.L).norm() <= 1e-12 * ops.L.norm());

    // L sqrt(J) = 0 exactly after deflation, so K sqrt(J) = nu sqrt(J).
    Vec sqrtj = ops.sqrt_j;
    const Vec lres = ops.L * sqrtj;
    const Vec kres = K * sqrtj;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < lres.size(); ++i) {
        worst = std::max(worst, std::abs(lres[i]));
        REQUIRE(kres[i] == Approx(ops.nu[i] * sqrtj[i]).margin(1e-11));
    }
    CHECK(worst <= 1e-11);

    // Null space: all five invariants annihilated relative to |nu h|.
    const Mat basis = null_basis(g);
    for (int c = 0; c < 5; ++c) {
        const Vec lb = ops.L * basis.col(c);
        const double num = std::sqrt(wdot_real(g, lb, lb));
        const Vec nb = ops.nu.cwiseProduct(basis.col(c));
        const double den = std::sqrt(wdot_real(g, nb, nb));
        REQUIRE(num / den <= 1e-12);
    }

    // Weighted self-adjointness of K after symmetrization.
    const Vec h1 = random_grid_fn(g, 41), h2 = random_grid_fn(g, 42);
    const double lhs = wdot_real(g, (K * h1).eval(), h2);
    const double rhs = wdot_real(g, h1, (K * h2).eval());
    CHECK(lhs == Approx(rhs).margin(1e-10 * std::abs(lhs) + 1e-14));

    // PSD and 5-dimensional kernel, coercivity constant positive.
    const auto spec = operator_spectrum(ops);
    CHECK(spec.null_count == 5);
    CHECK(spec.min_eigenvalue >= -1e-10);
    CHECK(spec.delta0 > 0.0);

    // <L h, h> >= -tol for random h.
    for (int trial = 0; trial < 50; ++trial) {
        const Vec h = random_grid_fn(g, 100 + static_cast<std::uint64_t>(trial));
        const double q = wdot_real(g, (ops.L * h).eval(), h);
        REQUIRE(q >= -1e-10 * wdot_real(g, h, h));
    }

    CHECK(ops.sym_defect_rel > 0.0);
    CHECK(ops.null_defect_rel > 0.0);
    CHECK(ops.clamp_fraction > 0.0);
}

TEST_CASE("apply_K splits select the parts exactly") {
    const auto& ops = ops7();
    const Vec h = random_grid_fn(ops.grid, 55);
    const Vec full = apply_K(ops, h, KernelSplit::full);
    const Vec a = apply_K(ops, h, KernelSplit::chi);
    const Vec b = apply_K(ops, h, KernelSplit::one_minus_chi);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        REQUIRE(full[i] == Approx(a[i] + b[i]).margin(1e-14 + 1e-13 * std::abs(full[i])));
    const Vec l = apply_L(ops, h);
    for (Eigen::Index i = 0; i < h.size(); ++i)
        REQUIRE(l[i] == Approx(ops.nu[i] * h[i] - full[i]).margin(1e-12 * (1.0 + std::abs(l[i]))));
}

TEST_CASE("assembly is deterministic across thread counts") {
    const MomentumGrid g(6.0, 5);
    AssemblyOptions o1;
    o1.threads = 1;
    AssemblyOptions o2;
    o2.threads = 2;
    const auto ops1 = assemble_operator_matrices(KernelModel::soft(1.0, 0.0), g, sphere_rule(4), o1);
    const auto ops2 = assemble_operator_matrices(KernelModel::soft(1.0, 0.0), g, sphere_rule(4), o2);
    CHECK(ops1.K_chi == ops2.K_chi);
    CHECK(ops1.K_one_minus_chi == ops2.K_one_minus_chi);
    CHECK(ops1.nu == ops2.nu);
    CHECK(ops1.L == ops2.L);
}

TEST_CASE("K^chi entries decay away from the diagonal") {
    // Qualitative check of the exponential kernel decay: binned row maxima of
    // |K^chi(p, .)| fall monotonically in |p - q| (constants unspecified).
    const auto& ops = ops7();
    const auto& g = grid7();
    std::array<double, 4> bins{}; // |p-q| in [0,3), [3,6), [6,9), [9,..)
    for (std::size_t r = 0; r < g.size(); ++r)
        for (std::size_t c = 0; c < g.size(); ++c) {
            double d2 = 0.0;
            for (int d = 0; d < 3; ++d) d2 += std::pow(g.node(r).c[d] - g.node(c).c[d], 2.0);
            const double dist = std::sqrt(d2);
            const std::size_t bin = dist < 3.0 ? 0 : dist < 6.0 ? 1 : dist < 9.0 ? 2 : 3;
            bins[bin] = std::max(bins[bin],
                                 std::abs(ops.K_chi(static_cast<Eigen::Index>(r),
                                                    static_cast<Eigen::Index>(c))));
        }
    CHECK(bins[0] > bins[1]);
    CHECK(bins[1] > bins[2]);
    CHECK(bins[2] > bins[3]);
    CHECK(bins[3] <= 0.2 * bins[0]);
}

TEST_CASE("linearization consistency ties Q, L, Gamma together") {
    const auto& eng = engine7();
    const auto& g = grid7();
    const Vec J = eng.j();
    const Vec sqrtj = eng.sqrt_j();
    const Vec h = random_grid_fn(g, 77);

    // Direct-quadrature linearized operator from the bilinear form:
    // L_raw h = -J^{-1/2} [ Q(J, sqrtJ h) + Q(sqrtJ h, J) ].
    const Vec sh = sqrtj.cwiseProduct(h);
    const auto q1 = eng.apply_gain_loss(J, sh);
    const auto q2 = eng.apply_gain_loss(sh, J);
    Vec l_raw(g.size());
    for (Eigen::Index i = 0; i < l_raw.size(); ++i)
        l_raw[i] = -((q1.q_plus[i] - q1.q_minus[i]) + (q2.q_plus[i] - q2.q_minus[i])) / sqrtj[i];

    const Vec gamma_hh = eng.apply_gamma<double>(h, h);
    const auto q0 = eng.apply_gain_loss(J, J);

    for (double eps : {1e-2, 3e-3, 1e-3}) {
        const Vec F = J + eps * sh;
        const auto q = eng.apply_gain_loss(F, F);
        double worst = 0.0, scale = 0.0;
        for (Eigen::Index i = 0; i < l_raw.size(); ++i) {
            const double lhs = (q.q_plus[i] - q.q_minus[i]) / sqrtj[i];
            const double rhs = (q0.q_plus[i] - q0.q_minus[i]) / sqrtj[i] - eps * l_raw[i] +
                               eps * eps * gamma_hh[i];
            worst = std::max(worst, std::abs(lhs - rhs));
            scale = std::max(scale, std::abs(lhs));
        }
        // Exact discrete bilinearity: the remainder sits at rounding level,
        // far below the eps^3 budget of the continuum Taylor argument.
        REQUIRE(worst <= 1e-12 * std::max(scale, 1.0) + 1e-10 * eps * eps * eps);
    }

    // The raw route agrees with the assembled matrix up to the reported
    // symmetrization + deflation corrections.
    const Vec l_mat = apply_L(ops7(), h);
    double diff = 0.0, scale = 0.0;
    for (Eigen::Index i = 0; i < l_raw.size(); ++i) {
        diff = std::max(diff, std::abs(l_mat[i] - l_raw[i]));
        scale = std::max(scale, std::abs(l_raw[i]));
    }
    CHECK(diff <= (2.0 * ops7().sym_defect_rel + 2.0 * ops7().null_defect_rel + 0.05) * scale);
}
