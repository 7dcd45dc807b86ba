// Command-line front end: configuration-driven experiments, the quick
// property suite, and the Lyapunov constant search.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical budget failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "rboltz/experiment.hpp"

namespace {

using namespace rboltz;

int g_threads = 0;

struct CheckRunner {
    int failures = 0;
    template <class Fn>
    void run(const std::string& name, Fn&& fn) {
        try {
            const std::string detail = fn();
            std::printf("[PASS] %-38s %s\n", name.c_str(), detail.c_str());
        } catch (const std::exception& e) {
            std::printf("[FAIL] %-38s %s\n", name.c_str(), e.what());
            ++failures;
        }
    }
};

template <class T>
void require(bool ok, const std::string& msg, const T& value) {
    if (!ok) throw numerics_error(msg + " (got " + std::to_string(value) + ")");
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

int run_verify() {
    CheckRunner cr;

    cr.run("collision conservation", [] {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        std::normal_distribution<double> gch(0.0, 1.0);
        double worst_p = 0.0, worst_e = 0.0, worst_g = 0.0;
        for (int i = 0; i < 100000; ++i) {
            const Momentum3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
            double wx = gch(rng), wy = gch(rng), wz = gch(rng);
            const double wn = std::sqrt(wx * wx + wy * wy + wz * wz);
            const auto post = post_collision(p, q, {wx / wn, wy / wn, wz / wn});
            for (int d = 0; d < 3; ++d)
                worst_p = std::max(worst_p, std::abs(p.c[d] + q.c[d] - post.p_out.c[d] - post.q_out.c[d]));
            worst_e = std::max(worst_e, std::abs(p.p0 + q.p0 - post.p_out.p0 - post.q_out.p0));
            worst_g = std::max(worst_g, std::abs(relative_invariants(p, q).g -
                                                 relative_invariants(post.p_out, post.q_out).g));
        }
        require(worst_p <= 1e-12 && worst_e <= 1e-12, "conservation defect too large", worst_e);
        require(worst_g <= 1e-10, "g invariance defect too large", worst_g);
        return "momentum " + fmt(worst_p) + ", energy " + fmt(worst_e) + ", g " + fmt(worst_g);
    });

    cr.run("sphere rule moments", [] {
        const SphereRule rule = sphere_rule(6);
        double mass = 0.0, first = 0.0, second = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            mass += rule.weights[i];
            first += rule.weights[i] * rule.nodes[i][0];
            second += rule.weights[i] * rule.nodes[i][2] * rule.nodes[i][2];
        }
        require(std::abs(mass - 4.0 * std::numbers::pi) <= 1e-12, "mass", mass);
        require(std::abs(first) <= 1e-12, "first moment", first);
        require(std::abs(second - 4.0 * std::numbers::pi / 3.0) <= 1e-10, "second moment", second);
        return "sum(w) = 4pi to " + fmt(std::abs(mass - 4.0 * std::numbers::pi));
    });

    MomentumGrid grid(8.0, 7);
    const KernelModel model = KernelModel::soft(1.0, 0.0);
    const SphereRule rule = sphere_rule(4);
    CollisionEngine engine(model, grid, rule, 1e-8, g_threads);

    cr.run("grid symmetry and equilibrium mass", [&] {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& a = grid.node(i);
            const auto& b = grid.node(grid.negated_index(i));
            if (a.c[0] != -b.c[0] || a.c[1] != -b.c[1] || a.c[2] != -b.c[2])
                throw numerics_error("negated node mismatch");
        }
        const double mass = integrate(grid, engine.j());
        require(std::abs(mass - 1.0) <= 1e-14, "discrete equilibrium mass", mass);
        return "mass defect " + fmt(std::abs(mass - 1.0));
    });

    cr.run("equilibrium annihilation Q(J,J)", [&] {
        const auto gl = engine.apply_gain_loss(engine.j(), engine.j());
        const Vec nu = engine.collision_frequency_all();
        double worst = 0.0;
        for (Eigen::Index i = 0; i < nu.size(); ++i)
            worst = std::max(worst, std::abs(gl.q_plus[i] - gl.q_minus[i]) / (nu[i] * engine.j()[i]));
        require(worst <= 1e-10, "relative defect", worst);
        return "worst nodewise defect " + fmt(worst);
    });

    OperatorMatrices ops = assemble_operator_matrices(model, grid, rule, {1e-8, g_threads});
    MacroContext ctx(grid);

    cr.run("linearized operator structure", [&] {
        const auto spec = operator_spectrum(ops);
        require(spec.null_count == 5, "null count", spec.null_count);
        require(spec.min_eigenvalue >= -1e-10, "PSD defect", spec.min_eigenvalue);
        require(spec.delta0 > 0.0, "coercivity", spec.delta0);
        return "5 null modes, delta0 = " + fmt(spec.delta0);
    });

    cr.run("projection idempotency", [&] {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g(0.0, 1.0);
        VecC h(grid.size());
        for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = std::complex<double>(g(rng), g(rng));
        const auto p1 = ctx.project(h);
        const auto p2 = ctx.project(p1.hydro);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < h.size(); ++i)
            worst = std::max(worst, std::abs(p2.hydro[i] - p1.hydro[i]));
        require(worst <= 1e-10, "idempotency", worst);
        return "defect " + fmt(worst);
    });

    cr.run("balance laws along a trajectory", [&] {
        const Eigen::Vector3d freq(0.5, 0.0, 0.0);
        const MatC A = assemble_mode_generator(ops, freq);
        VecC f0 = experiment_profile(grid, 7);
        f0 /= std::sqrt(wnorm2(grid, f0));
        EvolveOptions opt;
        opt.dt = 0.02;
        opt.snap_every = 1;
        const auto traj = evolve_mode_rk4(A, {freq, f0, 0.0}, 2.0, opt, grid);
        const auto rep = balance_residuals(ctx, ops, freq, traj.times, traj.states);
        require(rep.worst_rel() <= 1e-2, "worst relative residual", rep.worst_rel());
        return rep.worst_law()->law + " residual " + fmt(rep.worst_rel());
    });

    cr.run("damped transport semigroup", [&] {
        VecC f0 = experiment_profile(grid, 9);
        const Eigen::Vector3d freq(1.0, 0.0, 0.0);
        const VecC g1 = apply_G(ops, freq, apply_G(ops, freq, f0, 0.7), 0.3);
        const VecC g2 = apply_G(ops, freq, f0, 1.0);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < f0.size(); ++i)
            worst = std::max(worst, std::abs(g1[i] - g2[i]));
        require(worst <= 1e-14, "semigroup law", worst);
        const double decay = std::sqrt(wnorm2(grid, g2) / wnorm2(grid, f0));
        require(decay <= std::exp(-ops.nu.minCoeff()) + 1e-12, "damping bound", decay);
        return "G(s)G(t) = G(s+t) to " + fmt(worst);
    });

    cr.run("scalar decay devices", [] {
        const auto bd = basic_decay_check(2.0, 1.0, 1000.0);
        require(bd.bounded, "BasicDecay growth", bd.growth);
        const auto ci = calc_inequality_check(1.0, 2.0, 100.0);
        require(ci.max_violation_rel <= 1e-12, "ElemCalc violation", ci.max_violation_rel);
        return "sup growth " + fmt(bd.growth) + ", worst violation " + fmt(ci.max_violation_rel);
    });

    cr.run("entropy and positivity", [&] {
        const std::vector<double> jd = discrete_juttner(grid);
        Vec J(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) J[static_cast<Eigen::Index>(i)] = jd[i];
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g(0.0, 1.0);
        Vec F(grid.size());
        for (Eigen::Index i = 0; i < F.size(); ++i) F[i] = J[i] * std::exp(0.3 * std::tanh(g(rng)));
        F = match_moments(grid, F, collision_moments(grid, J));
        require(entropy(grid, J) >= entropy(grid, F), "max entropy", entropy(grid, F));
        PositivityOptions popt;
        popt.dt = 0.2;
        popt.horizon = 1.0;
        popt.n_outer = 2;
        const auto rep = positivity_iterate(engine, F, popt);
        require(rep.min_value >= 0.0, "positivity", rep.min_value);
        return "H(J)-H(F) = " + fmt(entropy(grid, J) - entropy(grid, F));
    });

    std::printf("%s: %d failure(s)\n", cr.failures == 0 ? "OK" : "FAILED", cr.failures);
    return cr.failures == 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relativistic Boltzmann decay toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    long seed_override = -1;
    app.add_option("--threads", g_threads, "worker threads (0 = hardware)");

    auto* run_cmd = app.add_subcommand("run", "run one experiment from a config file");
    run_cmd->add_option("config", config_path, "config file path")->required();
    run_cmd->add_option("--out", out_override, "output directory override");
    run_cmd->add_option("--seed", seed_override, "seed override");

    auto* verify_cmd = app.add_subcommand("verify", "run the quick property suite");

    auto* fit_cmd = app.add_subcommand("fit-constants", "Lyapunov constant search");
    fit_cmd->add_option("config", config_path, "config file path")->required();
    fit_cmd->add_option("--out", out_override, "output directory override");
    fit_cmd->add_option("--seed", seed_override, "seed override");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify_cmd->parsed()) return run_verify();

        ExperimentConfig ec = load_experiment_config(config_path);
        if (!out_override.empty()) ec.out_dir = out_override;
        if (seed_override >= 0) ec.seed = static_cast<std::uint64_t>(seed_override);
        if (g_threads > 0) ec.threads = g_threads;

        if (fit_cmd->parsed()) {
            const MomentumGrid grid(ec.p_max, ec.n_per_axis);
            const OperatorMatrices ops = assemble_operator_matrices(
                ec.kernel_model(), grid, sphere_rule(ec.sphere_order), {ec.g_min, ec.threads});
            const MacroContext ctx(grid);
            const auto fit = fit_lyapunov_constants(ops, ctx, detail::lyapunov_spec_from(ec, ec.lyapunov_states));
            nlohmann::json j = detail::constants_json(fit.constants);
            j["feasible"] = fit.feasible;
            j["worst_margin_free"] = fit.worst_margin_free;
            j["worst_margin_lyapunov"] = fit.worst_margin_lyap;
            std::cout << j.dump(2) << "\n";
            if (!fit.feasible) {
                std::cerr << "infeasible: worst violation at |k|=" << fit.worst_freq
                          << ", t=" << fit.worst_time << "\n";
                return 3;
            }
            if (!out_override.empty()) {
                std::filesystem::create_directories(out_override);
                std::ofstream(std::filesystem::path(out_override) / "constants.json")
                    << j.dump(2) << "\n";
            }
            return 0;
        }

        return run_experiment(ec);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numerics_error& e) {
        std::cerr << "numerical budget failure: " << e.what() << "\n";
        return 3;
    }
}
