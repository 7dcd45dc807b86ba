#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rboltz/vidav.hpp"

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

VecC random_state(const MomentumGrid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    VecC h(g.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = std::complex<double>(gauss(rng), gauss(rng));
    h /= std::sqrt(wnorm2(g, h));
    return h;
}

} // namespace

TEST_CASE("damped transport semigroup: identity, modulus, law, damping") {
    const auto& ops = ops7();
    const auto& g = grid7();
    const Eigen::Vector3d freq(1.3, 0.0, 0.0);
    const VecC f = random_state(g, 1);

    const VecC id = apply_G(ops, freq, f, 0.0);
    for (Eigen::Index i = 0; i < f.size(); ++i) REQUIRE(id[i] == f[i]);

    const double t = 0.8;
    const VecC gt = apply_G(ops, freq, f, t);
    for (Eigen::Index i = 0; i < f.size(); ++i)
        REQUIRE(std::abs(gt[i]) ==
                Approx(std::exp(-ops.nu[i] * t) * std::abs(f[i])).margin(1e-14));

    // semigroup law to machine precision
    const VecC a = apply_G(ops, freq, apply_G(ops, freq, f, 0.3), 0.5);
    for (Eigen::Index i = 0; i < f.size(); ++i)
        REQUIRE(std::abs(a[i] - gt[i]) <= 1e-14);

    // strong damping bound with nu_min
    CHECK(std::sqrt(wnorm2(g, gt)) <= std::exp(-ops.nu.minCoeff() * t) * std::sqrt(wnorm2(g, f)) *
                                          (1.0 + 1e-12));
    CHECK_THROWS_AS(apply_G(ops, freq, f, -1.0), std::invalid_argument);
}

TEST_CASE("poly decay bound on the damping factor") {
    // e^{-nu(p) t} <= C_k w_k(p) (1+t)^{-k}, with C_k from the maximization
    // oracle C_k = max_p max{1, e^{nu-k} k^k nu^{-k}} / w_k(p).
    const auto& ops = ops7();
    const auto& g = grid7();
    for (double k : {0.5, 1.0, 2.0}) {
        double ck = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double nu = ops.nu[static_cast<Eigen::Index>(i)];
            const double interior = std::exp(nu - k) * std::pow(k, k) * std::pow(nu, -k);
            const double wk = momentum_weight(k, ops.model.b_exponent, g.node(i));
            ck = std::max(ck, std::max(1.0, interior) / wk);
        }
        for (std::size_t i = 0; i < g.size(); i += 11)
            for (double t : {0.0, 0.5, 2.0, 10.0, 100.0}) {
                const double nu = ops.nu[static_cast<Eigen::Index>(i)];
                const double wk = momentum_weight(k, ops.model.b_exponent, g.node(i));
                REQUIRE(std::exp(-nu * t) <=
                        ck * wk * std::pow(1.0 + t, -k) * (1.0 + 1e-12));
            }
    }
}

TEST_CASE("vidav expansion: degenerate kernel K = 0 is exact") {
    OperatorMatrices z = ops7();
    z.K_chi.setZero();
    z.K_one_minus_chi.setZero();
    z.L = Mat(z.nu.asDiagonal());
    const Eigen::Vector3d freq(0.5, 0, 0);
    const MatC A = assemble_mode_generator(z, freq);
    const VecC f0 = random_state(grid7(), 2);
    const auto vt = vidav_terms(z, A, f0, freq, 5.0, 64);
    CHECK(vt.residual <= 1e-12 * vt.reference_norm);
    for (int i = 1; i < 5; ++i) CHECK(vt.term_norms[static_cast<std::size_t>(i)] == 0.0);
    // H1 equals the exact damped transport of f0 when K = 0
    const VecC u = apply_G(z, freq, f0, 5.0);
    CHECK(std::sqrt(wnorm2(grid7(), (vt.H[0] - u).eval())) <= 1e-12);
}

TEST_CASE("one-level Duhamel identity at doubled resolution") {
    // U(t) = G(t) + int_0^t G(t-s) K U(s) ds, time quadrature only.
    const auto& ops = ops7();
    const auto& g = grid7();
    const Eigen::Vector3d freq(0.5, 0, 0);
    const ModePropagator prop(assemble_mode_generator(ops, freq));
    const VecC f0 = random_state(g, 3);
    const VecC coeffs = prop.prepare(f0);
    const Mat K = ops.K();
    const double t = 10.0;

    auto residual_at = [&](int m) {
        const double h = t / m;
        const auto w = simpson_weights(static_cast<std::size_t>(m), h);
        VecC acc = apply_G(ops, freq, f0, t);
        for (int i = 0; i <= m; ++i) {
            const VecC u = prop.state(coeffs, i * h);
            const VecC ku = K * u.real() + std::complex<double>(0, 1) * (K * u.imag()).eval();
            acc += w[static_cast<std::size_t>(i)] * apply_G(ops, freq, ku, t - i * h);
        }
        return std::sqrt(wnorm2(g, (acc - prop.state(coeffs, t)).eval()));
    };
    const double r64 = residual_at(64);
    const double r128 = residual_at(128);
    CHECK(r64 <= vidav_budget(ops, freq, t, 64, 1.0));
    // fourth-order refinement
    CHECK(std::log2(r64 / r128) >= 3.2);
}

TEST_CASE("five-term reconstruction: budget and fourth-order refinement") {
    const auto& ops = ops7();
    const VecC f0 = random_state(grid7(), 4);
    for (double k : {0.1, 1.0, 5.0}) {
        const Eigen::Vector3d freq(k, 0, 0);
        const MatC A = assemble_mode_generator(ops, freq);
        for (double t : {1.0, 10.0}) {
            const auto coarse = vidav_terms(ops, A, f0, freq, t, 64);
            const auto fine = vidav_terms(ops, A, f0, freq, t, 128);
            INFO("k=" << k << " t=" << t);
            REQUIRE(fine.residual <= vidav_budget(ops, freq, t, 128, 1.0));
            REQUIRE(std::log2(coarse.residual / fine.residual) >= 3.0);
            CHECK_NOTHROW(enforce_vidav_budget(fine, vidav_budget(ops, freq, t, 128, 1.0)));
        }
    }
    // budget violation reports the dominant term
    const Eigen::Vector3d freq(0.5, 0, 0);
    const auto vt = vidav_terms(ops, assemble_mode_generator(ops, freq), f0, freq, 5.0, 64);
    CHECK_THROWS_AS(enforce_vidav_budget(vt, vt.residual * 0.5), numerics_error);
}

TEST_CASE("H3 carries the double-damping polynomial decay") {
    // |H3(t)| <= C (1+t)^{-k} |w_k f0| empirically, k = 1.
    const auto& ops = ops7();
    const auto& g = grid7();
    const Eigen::Vector3d freq(0.5, 0, 0);
    const MatC A = assemble_mode_generator(ops, freq);
    const VecC f0 = random_state(g, 5);
    const Vec wk2 = weight_sq(g, 1.0, ops.model.b_exponent);
    const double wnorm = std::sqrt(wnorm2_mult(g, wk2, f0));
    double c_fit = 0.0;
    for (double t : {1.0, 2.0, 5.0, 10.0, 20.0}) {
        const auto vt = vidav_terms(ops, A, f0, freq, t, 64);
        c_fit = std::max(c_fit, vt.term_norms[2] * (1.0 + t) / wnorm);
    }
    CHECK(c_fit > 0.0);
    CHECK(c_fit < 10.0);
}

TEST_CASE("weighted sup-norm series: single-node inputs reduce to that node") {
    ModeSweepResult sweep;
    sweep.fgrid = log_freq_grid(4, 0.1, 1.0);
    sweep.times = {0.0, 1.0, 2.0};
    const MomentumGrid g(4.0, 5);
    sweep.node_k2 = Mat::Zero(static_cast<Eigen::Index>(g.size()), 3);
    const std::size_t star = g.flat_index(2, 2, 2); // the origin node, w_l = 1
    sweep.node_k2(static_cast<Eigen::Index>(star), 0) = 4.0;
    sweep.node_k2(static_cast<Eigen::Index>(star), 1) = 1.0;
    sweep.node_k2(static_cast<Eigen::Index>(star), 2) = 0.25;
    const auto series = weighted_sup_series(sweep, g, 0.0, 1.0);
    CHECK(series[0] == Approx(2.0));
    CHECK(series[1] == Approx(1.0));
    CHECK(series[2] == Approx(0.5));
}
