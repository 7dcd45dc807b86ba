#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "oracles.hpp"
#include "rboltz/grid.hpp"
#include "rboltz/sphere.hpp"

using namespace rboltz;
using Catch::Approx;
using Vec = Eigen::VectorXd;

TEST_CASE("grid construction and validation") {
    const MomentumGrid g(8.0, 5);
    CHECK(g.size() == 125);
    bool has_origin = false;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.node(i).c[0] == 0.0 && g.node(i).c[1] == 0.0 && g.node(i).c[2] == 0.0)
            has_origin = true;
    CHECK(has_origin);
    CHECK_THROWS_AS(MomentumGrid(8.0, 6), std::invalid_argument);
    CHECK_THROWS_AS(MomentumGrid(8.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(MomentumGrid(-1.0, 7), std::invalid_argument);
}

TEST_CASE("grid symmetry: every node has its reflection with equal weight") {
    const MomentumGrid g(6.0, 7);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t j = g.negated_index(i);
        REQUIRE(g.node(j).c[0] == -g.node(i).c[0]);
        REQUIRE(g.node(j).c[1] == -g.node(i).c[1]);
        REQUIRE(g.node(j).c[2] == -g.node(i).c[2]);
        REQUIRE(g.quad_weight(j) == g.quad_weight(i));
        REQUIRE(g.quad_weight(i) > 0.0);
    }
}

TEST_CASE("integrate: constants, linearity, odd symmetry") {
    const MomentumGrid g(10.0, 11);
    Vec ones = Vec::Ones(static_cast<Eigen::Index>(g.size()));
    CHECK(integrate(g, ones) == Approx(std::pow(20.0, 3)).epsilon(1e-13));

    Vec bad(3);
    CHECK_THROWS_AS(integrate(g, bad), std::invalid_argument);

    // odd integrand p1 J(p) integrates to zero exactly by symmetry
    Vec odd(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        odd[static_cast<Eigen::Index>(i)] = g.node(i).c[0] * juttner(g.node(i));
    CHECK(std::abs(integrate(g, odd)) <= 1e-14);

    // linearity
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec u(g.size()), v(g.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u[i] = gauss(rng);
        v[i] = gauss(rng);
    }
    CHECK(integrate(g, (2.0 * u + 3.0 * v).eval()) ==
          Approx(2.0 * integrate(g, u) + 3.0 * integrate(g, v)).margin(1e-10));
}

TEST_CASE("discrete equilibrium integrates to one and matches the oracle") {
    // Continuum-normalized values against the adaptive radial oracle.
    const MomentumGrid g21(10.0, 21);
    Vec j(g21.size());
    for (std::size_t i = 0; i < g21.size(); ++i)
        j[static_cast<Eigen::Index>(i)] = juttner(g21.node(i), JuttnerMode::normalized);
    const double mass21 = integrate(g21, j);
    CHECK(mass21 == Approx(1.0).margin(1e-3));

    const MomentumGrid g11(10.0, 11);
    Vec j11(g11.size());
    for (std::size_t i = 0; i < g11.size(); ++i)
        j11[static_cast<Eigen::Index>(i)] = juttner(g11.node(i), JuttnerMode::normalized);
    const double mass11 = integrate(g11, j11);
    // Refinement 11 -> 21 must improve by at least the rule's second order.
    CHECK(std::abs(mass21 - 1.0) * 4.0 <= std::abs(mass11 - 1.0));

    // The discretely normalized equilibrium has unit mass to rounding.
    const std::vector<double> jd = discrete_juttner(g11);
    CHECK(integrate(g11, jd) == Approx(1.0).margin(1e-14));

    // int p0 J dp against the oracle on a fine wide grid.
    const MomentumGrid fine(24.0, 121);
    const std::vector<double> jf = discrete_juttner(fine);
    double mu0 = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i)
        mu0 += fine.quad_weight(i) * fine.node(i).p0 * jf[i];
    const double mu0_oracle = oracles::juttner_moment([](double p0) { return p0; });
    CHECK(mu0 == Approx(mu0_oracle).margin(1e-6));
}

TEST_CASE("grid diagnostics report mass defect and tail bound") {
    const MomentumGrid g(10.0, 11);
    const auto d = grid_diagnostics(g);
    CHECK(d.j_mass == Approx(1.0).margin(0.05));
    CHECK(d.j_mass_defect == Approx(std::abs(d.j_mass - 1.0)).margin(1e-15));
    CHECK(d.tail_bound > 0.0);
    CHECK(d.tail_bound < 1e-2);
}

TEST_CASE("trilinear stencil interpolates linear functions exactly and clamps") {
    const MomentumGrid g(4.0, 9);
    Vec lin(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        lin[static_cast<Eigen::Index>(i)] = 2.0 * g.node(i).c[0] - g.node(i).c[1] + 0.5 * g.node(i).c[2] + 3.0;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int k = 0; k < 500; ++k) {
        const double x = u(rng), y = u(rng), z = u(rng);
        const auto s = g.stencil(x, y, z);
        REQUIRE_FALSE(s.clamped);
        double val = 0.0, wsum = 0.0;
        for (int a = 0; a < 8; ++a) {
            val += s.weight[a] * lin[s.index[a]];
            wsum += s.weight[a];
        }
        REQUIRE(wsum == Approx(1.0).margin(1e-14));
        REQUIRE(val == Approx(2.0 * x - y + 0.5 * z + 3.0).margin(1e-12));
    }
    const auto out = g.stencil(5.0, 0.0, 0.0);
    CHECK(out.clamped);
    double val = 0.0;
    for (int a = 0; a < 8; ++a) val += out.weight[a] * lin[out.index[a]];
    CHECK(val == Approx(2.0 * 4.0 + 3.0).margin(1e-12)); // clamped to the face x = 4
}

TEST_CASE("sphere rule: mass, parity, second moment") {
    for (int order : {2, 4, 6, 10}) {
        const SphereRule rule = sphere_rule(order);
        double mass = 0.0;
        std::array<double, 3> first{};
        for (std::size_t i = 0; i < rule.size(); ++i) {
            mass += rule.weights[i];
            for (int d = 0; d < 3; ++d) first[static_cast<std::size_t>(d)] += rule.weights[i] * rule.nodes[i][static_cast<std::size_t>(d)];
            REQUIRE(rule.weights[i] > 0.0);
            const auto& n = rule.nodes[i];
            REQUIRE(n[0] * n[0] + n[1] * n[1] + n[2] * n[2] == Approx(1.0).margin(1e-13));
        }
        REQUIRE(mass == Approx(4.0 * std::numbers::pi).margin(1e-12));
        for (int d = 0; d < 3; ++d) REQUIRE(std::abs(first[static_cast<std::size_t>(d)]) <= 1e-12);
    }
    CHECK_THROWS_AS(sphere_rule(0), std::invalid_argument);
    CHECK_THROWS_AS(sphere_rule(1000), std::invalid_argument);

    // (khat . omega)^2 integrates to 4 pi / 3 for random directions.
    const SphereRule rule = sphere_rule(6);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        double kx = gauss(rng), ky = gauss(rng), kz = gauss(rng);
        const double kn = std::sqrt(kx * kx + ky * ky + kz * kz);
        kx /= kn;
        ky /= kn;
        kz /= kn;
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const double dot = kx * rule.nodes[i][0] + ky * rule.nodes[i][1] + kz * rule.nodes[i][2];
            acc += rule.weights[i] * dot * dot;
        }
        REQUIRE(acc == Approx(4.0 * std::numbers::pi / 3.0).margin(1e-10));
    }
}
