#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rboltz/analysis.hpp"
#include "rboltz/nonlinear.hpp"
#include "rboltz/vidav.hpp"

namespace rboltz {

// ---- configuration ---------------------------------------------------------

/// Flat key-value config with [section] headers and '#' comments.  Keys are
/// stored as "section.key"; line numbers are kept for error reporting.
struct ParsedConfig {
    std::map<std::string, std::string> values;
    std::map<std::string, int> lines;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    int line_of(const std::string& key) const {
        auto it = lines.find(key);
        return it == lines.end() ? -1 : it->second;
    }
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline ParsedConfig parse_config_text(const std::string& text) {
    ParsedConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw config_error("unterminated section header", lineno);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw config_error("empty section name", lineno);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("expected key = value", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error("empty key", lineno);
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values.count(full)) throw config_error("duplicate key '" + full + "'", lineno);
        cfg.values[full] = value;
        cfg.lines[full] = lineno;
    }
    return cfg;
}

inline ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

enum class ExperimentKind {
    linear_decay,
    lyapunov_verify,
    vidav_check,
    nonlinear_slab,
    homogeneous_relax,
    inequality_suite
};

inline std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::linear_decay: return "linear_decay";
    case ExperimentKind::lyapunov_verify: return "lyapunov_verify";
    case ExperimentKind::vidav_check: return "vidav_check";
    case ExperimentKind::nonlinear_slab: return "nonlinear_slab";
    case ExperimentKind::homogeneous_relax: return "homogeneous_relax";
    default: return "inequality_suite";
    }
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::linear_decay;
    std::uint64_t seed = 20250809;
    std::string out_dir = "out";
    int threads = 0;

    std::string kernel_kind = "soft";
    double kernel_b = 1.0;
    double kernel_a = 0.0;
    double kernel_gamma = 0.0;
    double chi_epsilon = 0.1;

    double p_max = 8.0;
    int n_per_axis = 9;
    int sphere_order = 6;
    double g_min = 1e-8;

    int freq_count = 40;
    double freq_min = 0.01;
    double freq_max = 10.0;

    double horizon = 400.0;
    int snapshots = 201;
    double dt = 0.02;

    double rate_r = 1.0;
    double rate_m = 0.0;
    double ell = 1.0;
    double decay_order = 0.75;

    double fit_lo = 30.0;
    double fit_hi = 300.0;

    int lyapunov_states = 20;
    double lyapunov_horizon = 50.0;
    int lyapunov_snapshots = 26;

    double slab_dk = 0.5;
    int slab_cutoff = 3;
    double slab_amplitude = 0.02;
    int picard_iters = 4;
    int picard_nodes = 30;
    double relax_dt = 0.1;
    double relax_horizon = 8.0;
    int relax_outer = 3;
    double relax_amplitude = 0.4;

    int vidav_steps = 256;
    std::vector<double> vidav_freqs{0.1, 1.0, 5.0};
    std::vector<double> vidav_times{1.0, 10.0};

    KernelModel kernel_model() const {
        if (kernel_kind == "soft") return KernelModel::soft(kernel_b, kernel_gamma, chi_epsilon);
        if (kernel_kind == "hard")
            return KernelModel::hard(kernel_a, kernel_b, kernel_gamma, chi_epsilon);
        throw std::invalid_argument("kernel.kind must be 'soft' or 'hard'");
    }
};

namespace detail {

inline double parse_double(const ParsedConfig& cfg, const std::string& key, double fallback) {
    if (!cfg.has(key)) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(cfg.values.at(key), &pos);
        if (pos != cfg.values.at(key).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error("invalid number for '" + key + "'", cfg.line_of(key));
    }
}

inline long parse_int(const ParsedConfig& cfg, const std::string& key, long fallback) {
    if (!cfg.has(key)) return fallback;
    try {
        std::size_t pos = 0;
        const long v = std::stol(cfg.values.at(key), &pos);
        if (pos != cfg.values.at(key).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error("invalid integer for '" + key + "'", cfg.line_of(key));
    }
}

inline std::vector<double> parse_list(const ParsedConfig& cfg, const std::string& key,
                                      std::vector<double> fallback) {
    if (!cfg.has(key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(cfg.values.at(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(trim(tok)));
        } catch (const std::exception&) {
            throw config_error("invalid list entry for '" + key + "'", cfg.line_of(key));
        }
    }
    if (out.empty()) throw config_error("empty list for '" + key + "'", cfg.line_of(key));
    return out;
}

} // namespace detail

inline ExperimentConfig experiment_config_from(const ParsedConfig& cfg) {
    using detail::parse_double;
    using detail::parse_int;
    ExperimentConfig ec;
    if (cfg.has("experiment.kind")) {
        const std::string k = cfg.values.at("experiment.kind");
        if (k == "linear_decay") ec.kind = ExperimentKind::linear_decay;
        else if (k == "lyapunov_verify") ec.kind = ExperimentKind::lyapunov_verify;
        else if (k == "vidav_check") ec.kind = ExperimentKind::vidav_check;
        else if (k == "nonlinear_slab") ec.kind = ExperimentKind::nonlinear_slab;
        else if (k == "homogeneous_relax") ec.kind = ExperimentKind::homogeneous_relax;
        else if (k == "inequality_suite") ec.kind = ExperimentKind::inequality_suite;
        else throw config_error("unknown experiment kind '" + k + "'", cfg.line_of("experiment.kind"));
    }
    ec.seed = static_cast<std::uint64_t>(parse_int(cfg, "experiment.seed", static_cast<long>(ec.seed)));
    if (cfg.has("experiment.out_dir")) ec.out_dir = cfg.values.at("experiment.out_dir");
    ec.threads = static_cast<int>(parse_int(cfg, "experiment.threads", ec.threads));

    if (cfg.has("kernel.kind")) ec.kernel_kind = cfg.values.at("kernel.kind");
    ec.kernel_b = parse_double(cfg, "kernel.b", ec.kernel_b);
    ec.kernel_a = parse_double(cfg, "kernel.a", ec.kernel_a);
    ec.kernel_gamma = parse_double(cfg, "kernel.gamma", ec.kernel_gamma);
    ec.chi_epsilon = parse_double(cfg, "kernel.chi_epsilon", ec.chi_epsilon);

    ec.p_max = parse_double(cfg, "grid.p_max", ec.p_max);
    ec.n_per_axis = static_cast<int>(parse_int(cfg, "grid.n_per_axis", ec.n_per_axis));
    ec.sphere_order = static_cast<int>(parse_int(cfg, "grid.sphere_order", ec.sphere_order));
    ec.g_min = parse_double(cfg, "grid.g_min", ec.g_min);

    ec.freq_count = static_cast<int>(parse_int(cfg, "frequency.count", ec.freq_count));
    ec.freq_min = parse_double(cfg, "frequency.min", ec.freq_min);
    ec.freq_max = parse_double(cfg, "frequency.max", ec.freq_max);

    ec.horizon = parse_double(cfg, "time.horizon", ec.horizon);
    ec.snapshots = static_cast<int>(parse_int(cfg, "time.snapshots", ec.snapshots));
    ec.dt = parse_double(cfg, "time.dt", ec.dt);

    ec.rate_r = parse_double(cfg, "rate.r", ec.rate_r);
    ec.rate_m = parse_double(cfg, "rate.m", ec.rate_m);
    ec.ell = parse_double(cfg, "rate.ell", ec.ell);
    ec.decay_order = parse_double(cfg, "rate.decay_order", ec.decay_order);

    ec.fit_lo = parse_double(cfg, "fit.window_lo", ec.fit_lo);
    ec.fit_hi = parse_double(cfg, "fit.window_hi", ec.fit_hi);

    ec.lyapunov_states = static_cast<int>(parse_int(cfg, "lyapunov.states", ec.lyapunov_states));
    ec.lyapunov_horizon = parse_double(cfg, "lyapunov.horizon", ec.lyapunov_horizon);
    ec.lyapunov_snapshots =
        static_cast<int>(parse_int(cfg, "lyapunov.snapshots", ec.lyapunov_snapshots));

    ec.slab_dk = parse_double(cfg, "nonlinear.slab_dk", ec.slab_dk);
    ec.slab_cutoff = static_cast<int>(parse_int(cfg, "nonlinear.slab_cutoff", ec.slab_cutoff));
    ec.slab_amplitude = parse_double(cfg, "nonlinear.amplitude", ec.slab_amplitude);
    ec.picard_iters = static_cast<int>(parse_int(cfg, "nonlinear.picard_iters", ec.picard_iters));
    ec.picard_nodes = static_cast<int>(parse_int(cfg, "nonlinear.picard_nodes", ec.picard_nodes));
    ec.relax_dt = parse_double(cfg, "nonlinear.relax_dt", ec.relax_dt);
    ec.relax_horizon = parse_double(cfg, "nonlinear.relax_horizon", ec.relax_horizon);
    ec.relax_outer = static_cast<int>(parse_int(cfg, "nonlinear.outer_iters", ec.relax_outer));
    ec.relax_amplitude = parse_double(cfg, "nonlinear.relax_amplitude", ec.relax_amplitude);

    ec.vidav_steps = static_cast<int>(parse_int(cfg, "vidav.time_steps", ec.vidav_steps));
    ec.vidav_freqs = detail::parse_list(cfg, "vidav.freqs", ec.vidav_freqs);
    ec.vidav_times = detail::parse_list(cfg, "vidav.times", ec.vidav_times);

    // Validate kernel parameters here so bad configs fail with the offending line.
    try {
        (void)ec.kernel_model();
    } catch (const std::invalid_argument& e) {
        const std::string key = ec.kernel_kind == "hard" ? "kernel.a" : "kernel.b";
        throw config_error(std::string(e.what()), cfg.line_of(cfg.has(key) ? key : "kernel.kind"));
    }
    if (ec.n_per_axis < 5 || ec.n_per_axis % 2 == 0)
        throw config_error("grid.n_per_axis must be odd and >= 5", cfg.line_of("grid.n_per_axis"));
    if (!(ec.rate_r >= 1.0 && ec.rate_r <= 2.0))
        throw config_error("rate.r must lie in [1,2]", cfg.line_of("rate.r"));
    return ec;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    return experiment_config_from(parse_config_file(path));
}

// ---- output helpers --------------------------------------------------------

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << fmt17(values[i]);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

inline nlohmann::json config_json(const ExperimentConfig& ec) {
    nlohmann::json j;
    j["kind"] = to_string(ec.kind);
    j["seed"] = ec.seed;
    j["threads"] = ec.threads;
    j["kernel"] = {{"kind", ec.kernel_kind},     {"b", ec.kernel_b},
                   {"a", ec.kernel_a},           {"gamma", ec.kernel_gamma},
                   {"chi_epsilon", ec.chi_epsilon}};
    j["grid"] = {{"p_max", ec.p_max},
                 {"n_per_axis", ec.n_per_axis},
                 {"sphere_order", ec.sphere_order},
                 {"g_min", ec.g_min}};
    j["frequency"] = {{"count", ec.freq_count}, {"min", ec.freq_min}, {"max", ec.freq_max}};
    j["time"] = {{"horizon", ec.horizon}, {"snapshots", ec.snapshots}, {"dt", ec.dt}};
    j["rate"] = {{"r", ec.rate_r}, {"m", ec.rate_m}, {"ell", ec.ell}, {"decay_order", ec.decay_order}};
    j["fit"] = {{"window_lo", ec.fit_lo}, {"window_hi", ec.fit_hi}};
    j["lyapunov"] = {{"states", ec.lyapunov_states},
                     {"horizon", ec.lyapunov_horizon},
                     {"snapshots", ec.lyapunov_snapshots}};
    j["nonlinear"] = {{"slab_dk", ec.slab_dk},         {"slab_cutoff", ec.slab_cutoff},
                      {"amplitude", ec.slab_amplitude}, {"picard_iters", ec.picard_iters},
                      {"picard_nodes", ec.picard_nodes}, {"relax_dt", ec.relax_dt},
                      {"relax_horizon", ec.relax_horizon}, {"outer_iters", ec.relax_outer},
                      {"relax_amplitude", ec.relax_amplitude}};
    j["vidav"] = {{"time_steps", ec.vidav_steps}, {"freqs", ec.vidav_freqs}, {"times", ec.vidav_times}};
    return j;
}

inline const char* plot_script_text() {
    return R"PY(#!/usr/bin/env python3
"""Plot the CSV series emitted next to this script."""
import csv
import os
import sys

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to draw the plots")


def read_csv(name):
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), name)
    if not os.path.exists(path):
        return None
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return rows


def series(rows, key):
    return [float(r[key]) for r in rows]


def main():
    drawn = False
    rows = read_csv("norms.csv")
    if rows:
        plt.figure()
        for key in rows[0]:
            if key == "t":
                continue
            plt.loglog([1 + float(r["t"]) for r in rows], series(rows, key), label=key)
        plt.xlabel("1 + t")
        plt.legend()
        plt.title("synthesized norms")
        plt.savefig("norms.png", dpi=150)
        drawn = True
    rows = read_csv("modes.csv")
    if rows:
        plt.figure()
        freqs = sorted({r["freq"] for r in rows}, key=float)
        for f in freqs[:: max(1, len(freqs) // 8)]:
            sel = [r for r in rows if r["freq"] == f]
            plt.semilogy([float(r["t"]) for r in sel], [float(r["norm2"]) for r in sel],
                         label=f"|k|={float(f):.3g}")
        plt.xlabel("t")
        plt.ylabel("|f|^2")
        plt.legend(fontsize=6)
        plt.title("per-mode decay")
        plt.savefig("modes.png", dpi=150)
        drawn = True
    rows = read_csv("relaxation.csv")
    if rows:
        plt.figure()
        plt.plot(series(rows, "t"), series(rows, "entropy"))
        plt.xlabel("t")
        plt.ylabel("H(t)")
        plt.title("entropy")
        plt.savefig("relaxation.png", dpi=150)
        drawn = True
    if not drawn:
        print("no known CSVs found")


if __name__ == "__main__":
    main()
)PY";
}

// ---- shared builders -------------------------------------------------------

/// Hydro-rich deterministic profile used as the momentum part of surrogate
/// initial data.
inline VecC experiment_profile(const MomentumGrid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::vector<double> j = discrete_juttner(grid);
    VecC prof(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Momentum3& p = grid.node(i);
        const double sj = std::sqrt(j[i]);
        prof[static_cast<Eigen::Index>(i)] =
            std::complex<double>(1.0 + 0.4 * p.c[0] + 0.2 * p.p0, 0.3) * sj +
            0.2 * std::complex<double>(gauss(rng), gauss(rng)) * sj;
    }
    return prof;
}

struct ExperimentArtifacts {
    nlohmann::json manifest;
    std::vector<std::string> files;
};

int run_experiment(const ExperimentConfig& ec); // defined below

// ---- experiment drivers ----------------------------------------------------

namespace detail {

inline nlohmann::json diagnostics_json(const MomentumGrid& grid, const OperatorMatrices& ops) {
    const GridDiagnostics gd = grid_diagnostics(grid);
    nlohmann::json j;
    j["j_mass"] = gd.j_mass;
    j["j_mass_defect"] = gd.j_mass_defect;
    j["tail_bound"] = gd.tail_bound;
    j["sym_defect_rel"] = ops.sym_defect_rel;
    j["null_defect_rel"] = ops.null_defect_rel;
    j["clamp_fraction"] = ops.clamp_fraction;
    j["nu_min"] = ops.nu.minCoeff();
    j["nu_max"] = ops.nu.maxCoeff();
    return j;
}

inline nlohmann::json constants_json(const LyapunovConstants& c) {
    return {{"kappa1", c.kappa1},       {"kappa3", c.kappa3},
            {"kappa4", c.kappa4},       {"kappa5", c.kappa5},
            {"lambda_rate", c.lambda_rate}, {"lambda_free", c.lambda_free},
            {"C_free", c.C_free},       {"c1", c.c1},
            {"c2", c.c2}};
}

inline LyapunovSampleSpec lyapunov_spec_from(const ExperimentConfig& ec, int n_states) {
    LyapunovSampleSpec spec;
    spec.n_freq = ec.freq_count;
    spec.freq_min = ec.freq_min;
    spec.freq_max = ec.freq_max;
    spec.n_states = n_states;
    spec.t_final = ec.lyapunov_horizon;
    spec.n_snap = ec.lyapunov_snapshots;
    spec.ell = ec.ell;
    spec.seed = ec.seed;
    spec.threads = ec.threads;
    return spec;
}

inline int run_linear_decay(const ExperimentConfig& ec, const std::filesystem::path& out,
                            nlohmann::json& manifest) {
    const MomentumGrid grid(ec.p_max, ec.n_per_axis);
    const KernelModel model = ec.kernel_model();
    AssemblyOptions aopt;
    aopt.g_min = ec.g_min;
    aopt.threads = ec.threads;
    const OperatorMatrices ops = assemble_operator_matrices(model, grid, sphere_rule(ec.sphere_order), aopt);
    const MacroContext ctx(grid);
    manifest["diagnostics"] = diagnostics_json(grid, ops);

    // Constants from a reduced sample; the dedicated lyapunov_verify kind runs
    // the full search.
    const LyapunovFitReport fit =
        fit_lyapunov_constants(ops, ctx, lyapunov_spec_from(ec, std::min(ec.lyapunov_states, 6)));
    if (!fit.feasible) throw numerics_error("linear_decay: Lyapunov constant search infeasible");
    manifest["constants"] = constants_json(fit.constants);

    const FrequencyGrid fg = log_freq_grid(ec.freq_count, ec.freq_min, ec.freq_max);
    const VecC prof = experiment_profile(grid, ec.seed);
    ModeSweepOptions mo;
    mo.t_final = ec.horizon;
    mo.n_snap = ec.snapshots;
    mo.ell = ec.ell;
    mo.threads = ec.threads;
    const ModeSweepResult sweep =
        mode_sweep(ops, ctx, fg, prof, data_amplitude(fg, ec.rate_r), fit.constants, mo);

    CsvWriter modes(out / "modes.csv",
                    {"t", "freq", "norm2", "wnorm2", "E", "E_ell", "dissipation", "margin"});
    for (int ifreq = 0; ifreq < ec.freq_count; ++ifreq)
        for (int it = 0; it < ec.snapshots; ++it)
            modes.row({sweep.times[static_cast<std::size_t>(it)], fg.k[static_cast<std::size_t>(ifreq)],
                       sweep.norm2(ifreq, it), sweep.wnorm2(ifreq, it), sweep.E(ifreq, it),
                       sweep.E_ell(ifreq, it), sweep.dissipation(ifreq, it), sweep.margin(ifreq, it)});

    const std::vector<double> n_m = synthesize_norm(sweep, RateSpec(ec.rate_r, ec.rate_m));
    const std::vector<double> n_0 = synthesize_norm(sweep, RateSpec(ec.rate_r, 0.0));
    const SupNormDecayReport sup =
        weighted_supnorm_decay(sweep, grid, ec.ell, model.b_exponent, ec.fit_lo, ec.fit_hi);
    CsvWriter norms(out / "norms.csv", {"t", "norm2_m0", "norm2_m", "weighted_sup"});
    for (int it = 0; it < ec.snapshots; ++it)
        norms.row({sweep.times[static_cast<std::size_t>(it)], n_0[static_cast<std::size_t>(it)],
                   n_m[static_cast<std::size_t>(it)], sup.series[static_cast<std::size_t>(it)]});

    const DecayFit fit_m = fit_decay_exponent(sweep.times, n_m, ec.fit_lo, ec.fit_hi);
    const DecayFit fit_0 = fit_decay_exponent(sweep.times, n_0, ec.fit_lo, ec.fit_hi);
    manifest["tolerances"] = {{"fit_window", {ec.fit_lo, ec.fit_hi}},
                              {"exponent_band_rel", 0.15},
                              {"resolution_threshold", 0.5}};
    const RateSpec rs(ec.rate_r, ec.rate_m);
    nlohmann::json rates;
    rates["sigma_rm"] = rs.sigma_rm();
    rates["target_norm2_exponent"] = 2.0 * rs.sigma_rm();
    rates["fitted_norm2_exponent"] = fit_m.exponent;
    rates["fitted_norm2_exponent_m0"] = fit_0.exponent;
    rates["fitted_supnorm_exponent"] = sup.fit.exponent;
    rates["fit_half_width"] = fit_m.half_width;
    rates["fit_window"] = {ec.fit_lo, ec.fit_hi};
    manifest["results"] = rates;
    std::ofstream(out / "rate_report.json") << rates.dump(2) << "\n";
    manifest["files"] = {"modes.csv", "norms.csv", "rate_report.json", "plot.py"};
    return 0;
}

inline int run_lyapunov_verify(const ExperimentConfig& ec, const std::filesystem::path& out,
                               nlohmann::json& manifest) {
    const MomentumGrid grid(ec.p_max, ec.n_per_axis);
    const KernelModel model = ec.kernel_model();
    AssemblyOptions aopt;
    aopt.g_min = ec.g_min;
    aopt.threads = ec.threads;
    const OperatorMatrices ops = assemble_operator_matrices(model, grid, sphere_rule(ec.sphere_order), aopt);
    const MacroContext ctx(grid);
    manifest["diagnostics"] = diagnostics_json(grid, ops);

    const LyapunovFitReport fit =
        fit_lyapunov_constants(ops, ctx, lyapunov_spec_from(ec, ec.lyapunov_states));
    manifest["constants"] = constants_json(fit.constants);
    manifest["tolerances"] = {{"margin_floor", 0.0}, {"norm_growth_budget", 1e-12}};
    manifest["results"] = {{"feasible", fit.feasible},
                           {"worst_margin_free", fit.worst_margin_free},
                           {"worst_margin_lyapunov", fit.worst_margin_lyap},
                           {"max_norm_growth", fit.max_norm_growth}};

    CsvWriter csv(out / "lyapunov.csv", {"freq", "t", "norm2", "M", "N", "wlf2", "n_ell"});
    for (const auto& pt : fit.sample)
        csv.row({pt.k, pt.t, pt.norm2, pt.M, pt.N, pt.wlf2, pt.n_ell});
    manifest["files"] = {"lyapunov.csv", "plot.py"};
    if (!fit.feasible)
        throw numerics_error("lyapunov_verify: no feasible constants, worst violation at |k|=" +
                             std::to_string(fit.worst_freq) + ", t=" + std::to_string(fit.worst_time));
    return 0;
}

inline int run_vidav_check(const ExperimentConfig& ec, const std::filesystem::path& out,
                           nlohmann::json& manifest) {
    const MomentumGrid grid(ec.p_max, ec.n_per_axis);
    const KernelModel model = ec.kernel_model();
    AssemblyOptions aopt;
    aopt.g_min = ec.g_min;
    aopt.threads = ec.threads;
    const OperatorMatrices ops = assemble_operator_matrices(model, grid, sphere_rule(ec.sphere_order), aopt);
    manifest["diagnostics"] = diagnostics_json(grid, ops);
    const VecC prof = experiment_profile(grid, ec.seed);
    VecC f0 = prof / std::sqrt(wnorm2(grid, prof));

    CsvWriter csv(out / "vidav.csv", {"t", "freq", "steps", "H1", "H2", "H3", "H4", "H5",
                                      "residual", "budget", "order_estimate"});
    double worst_ratio = 0.0;
    for (double k : ec.vidav_freqs) {
        const Eigen::Vector3d freq(k, 0.0, 0.0);
        const MatC A = assemble_mode_generator(ops, freq);
        for (double t : ec.vidav_times) {
            const VidavTerms coarse = vidav_terms(ops, A, f0, freq, t, ec.vidav_steps / 2);
            const VidavTerms fine = vidav_terms(ops, A, f0, freq, t, ec.vidav_steps);
            const double order = std::log2(coarse.residual / fine.residual);
            const double budget = vidav_budget(ops, freq, t, ec.vidav_steps, 1.0);
            csv.row({t, k, double(ec.vidav_steps), fine.term_norms[0], fine.term_norms[1],
                     fine.term_norms[2], fine.term_norms[3], fine.term_norms[4], fine.residual,
                     budget, order});
            enforce_vidav_budget(fine, budget);
            worst_ratio = std::max(worst_ratio, fine.residual / budget);
        }
    }
    manifest["tolerances"] = {{"budget_constant", 2.0}, {"budget_scale", "nu_max + |k|"}};
    manifest["results"] = {{"worst_residual_to_budget", worst_ratio}};
    manifest["files"] = {"vidav.csv", "plot.py"};
    return 0;
}

inline int run_nonlinear_slab(const ExperimentConfig& ec, const std::filesystem::path& out,
                              nlohmann::json& manifest) {
    const MomentumGrid grid(ec.p_max, ec.n_per_axis);
    const KernelModel model = ec.kernel_model();
    if (model.kind != KernelModel::Kind::soft)
        throw config_error("nonlinear_slab supports soft kernels only");
    AssemblyOptions aopt;
    aopt.g_min = ec.g_min;
    aopt.threads = ec.threads;
    const SphereRule rule = sphere_rule(ec.sphere_order);
    const OperatorMatrices ops = assemble_operator_matrices(model, grid, rule, aopt);
    const CollisionEngine engine(model, grid, rule, ec.g_min, ec.threads);
    manifest["diagnostics"] = diagnostics_json(grid, ops);

    SlabField f0;
    f0.dk = ec.slab_dk;
    const VecC prof = experiment_profile(grid, ec.seed);
    f0.values.resize(static_cast<std::size_t>(ec.slab_cutoff) + 1);
    for (int n = 0; n <= ec.slab_cutoff; ++n)
        f0.values[static_cast<std::size_t>(n)] = ec.slab_amplitude / (1.0 + n) * prof;

    PicardOptions popt;
    popt.horizon = ec.horizon;
    popt.n_time_nodes = ec.picard_nodes;
    popt.n_iters = ec.picard_iters;
    popt.ell = ec.ell;
    popt.decay_order = ec.decay_order;
    popt.threads = ec.threads;
    const PicardReport rep = picard_iterate(ops, engine, f0, popt);

    // Paired linear run: the zeroth iterate is exactly U(t) f0.
    const Vec w_ell = weight_sq(grid, 0.5 * ec.ell, model.b_exponent);
    std::vector<double> lin_series(rep.times.size()), non_series(rep.times.size());
    {
        std::vector<ModePropagator> props;
        for (int n = 0; n <= ec.slab_cutoff; ++n)
            props.emplace_back(assemble_mode_generator(ops, Eigen::Vector3d(n * f0.dk, 0.0, 0.0)));
        for (std::size_t it = 0; it < rep.times.size(); ++it) {
            SlabField lin, non;
            lin.dk = non.dk = f0.dk;
            lin.values.resize(f0.values.size());
            non.values = rep.iterate[it];
            for (int n = 0; n <= ec.slab_cutoff; ++n)
                lin.values[static_cast<std::size_t>(n)] = props[static_cast<std::size_t>(n)].state(
                    props[static_cast<std::size_t>(n)].prepare(f0.values[static_cast<std::size_t>(n)]),
                    rep.times[it]);
            lin_series[it] = slab_weighted_sup(grid, w_ell, {rep.times[it]}, {lin}, 0.0);
            non_series[it] = slab_weighted_sup(grid, w_ell, {rep.times[it]}, {non}, 0.0);
        }
    }
    CsvWriter csv(out / "slab.csv", {"t", "weighted_sup_linear", "weighted_sup_nonlinear"});
    for (std::size_t it = 0; it < rep.times.size(); ++it)
        csv.row({rep.times[it], lin_series[it], non_series[it]});

    const double lo = 0.25 * ec.horizon, hi = ec.horizon;
    const DecayFit lin_fit = fit_decay_exponent(rep.times, lin_series, lo, hi);
    const DecayFit non_fit = fit_decay_exponent(rep.times, non_series, lo, hi);
    nlohmann::json contraction;
    contraction["ratios"] = rep.contraction_ratios;
    contraction["increments"] = rep.increment_norms;
    contraction["weighted_sup_initial"] = rep.weighted_sup_initial;
    contraction["contracting"] = rep.contracting;
    std::ofstream(out / "contraction.json") << contraction.dump(2) << "\n";
    manifest["tolerances"] = {{"rate_gap_rel", 0.2}};
    manifest["results"] = {{"linear_exponent", lin_fit.exponent},
                           {"nonlinear_exponent", non_fit.exponent},
                           {"relative_rate_gap",
                            std::abs(non_fit.exponent - lin_fit.exponent) /
                                std::max(std::abs(lin_fit.exponent), 1e-12)},
                           {"contracting", rep.contracting}};
    manifest["files"] = {"slab.csv", "contraction.json", "plot.py"};
    return 0;
}

inline int run_homogeneous_relax(const ExperimentConfig& ec, const std::filesystem::path& out,
                                 nlohmann::json& manifest) {
    const MomentumGrid grid(ec.p_max, ec.n_per_axis);
    const KernelModel model = ec.kernel_model();
    const SphereRule rule = sphere_rule(ec.sphere_order);
    const CollisionEngine engine(model, grid, rule, ec.g_min, ec.threads);
    const std::vector<double> jd = discrete_juttner(grid);

    std::mt19937_64 rng(ec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec F0(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        F0[static_cast<Eigen::Index>(i)] =
            jd[i] * std::exp(ec.relax_amplitude * std::tanh(gauss(rng)));
    Vec Jref(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) Jref[static_cast<Eigen::Index>(i)] = jd[i];
    F0 = match_moments(grid, F0, collision_moments(grid, Jref));

    PositivityOptions popt;
    popt.dt = ec.relax_dt;
    popt.horizon = ec.relax_horizon;
    popt.n_outer = ec.relax_outer;
    const PositivityReport rep = positivity_iterate(engine, F0, popt);
    const auto& traj = rep.outer_trajectories.back();

    const auto m0 = collision_moments(grid, F0);
    CsvWriter csv(out / "relaxation.csv",
                  {"t", "entropy", "min_F", "mass_drift", "momentum_drift", "energy_drift",
                   "l2_distance_to_J"});
    double h_prev = -std::numeric_limits<double>::infinity();
    double worst_backstep = 0.0;
    for (std::size_t it = 0; it < rep.times.size(); ++it) {
        const double h = entropy(grid, traj[it]);
        const auto m = collision_moments(grid, traj[it]);
        double dist = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            dist += grid.quad_weight(i) *
                    std::pow(traj[it][static_cast<Eigen::Index>(i)] - jd[i], 2.0);
        csv.row({rep.times[it], h, traj[it].minCoeff(), m[0] - m0[0],
                 std::abs(m[1] - m0[1]) + std::abs(m[2] - m0[2]) + std::abs(m[3] - m0[3]),
                 m[4] - m0[4], std::sqrt(dist)});
        worst_backstep = std::max(worst_backstep, h_prev - h);
        h_prev = h;
    }
    manifest["tolerances"] = {{"min_F_floor", 0.0}, {"entropy_backstep_order", "dt"}};
    manifest["results"] = {{"min_F", rep.min_value},
                           {"entropy_worst_backstep", worst_backstep},
                           {"outer_sup_diff", rep.outer_sup_diff},
                           {"entropy_initial", entropy(grid, F0)},
                           {"entropy_equilibrium", entropy(grid, Jref)}};
    manifest["files"] = {"relaxation.csv", "plot.py"};
    return 0;
}

inline int run_inequality_suite(const ExperimentConfig& ec, const std::filesystem::path& out,
                                nlohmann::json& manifest) {
    nlohmann::json rep;
    for (auto [lam, mu] : std::vector<std::pair<double, double>>{{2, 1}, {1, 1}, {3, 0.5}}) {
        const BasicDecayReport r = basic_decay_check(lam, mu, 1000.0);
        rep["basic_decay"].push_back({{"lambda", lam},
                                      {"mu", mu},
                                      {"rho", r.rho},
                                      {"sup", r.sup_at_2T},
                                      {"growth", r.growth},
                                      {"growth_without_log", r.growth_without_log},
                                      {"bounded", r.bounded}});
    }
    double worst = 0.0;
    for (double a : {0.25, 0.5, 1.0, 2.0, 4.0})
        for (double k : {0.0, 0.5, 1.0, 2.0, 4.0}) {
            const CalcInequalityReport r = calc_inequality_check(a, k, 200.0);
            worst = std::max(worst, r.max_violation_rel);
        }
    rep["calc_inequality_worst_violation"] = worst;
    (void)ec;
    std::ofstream(out / "inequalities.json") << rep.dump(2) << "\n";
    manifest["results"] = rep;
    manifest["files"] = {"inequalities.json"};
    return 0;
}

} // namespace detail

inline int run_experiment(const ExperimentConfig& ec) {
    const std::filesystem::path out(ec.out_dir);
    std::filesystem::create_directories(out);
    nlohmann::json manifest;
    manifest["tool"] = {{"name", "rboltz"}, {"version", "0.1.0"}};
    manifest["config"] = config_json(ec);

    int rc = 0;
    switch (ec.kind) {
    case ExperimentKind::linear_decay: rc = detail::run_linear_decay(ec, out, manifest); break;
    case ExperimentKind::lyapunov_verify: rc = detail::run_lyapunov_verify(ec, out, manifest); break;
    case ExperimentKind::vidav_check: rc = detail::run_vidav_check(ec, out, manifest); break;
    case ExperimentKind::nonlinear_slab: rc = detail::run_nonlinear_slab(ec, out, manifest); break;
    case ExperimentKind::homogeneous_relax:
        rc = detail::run_homogeneous_relax(ec, out, manifest);
        break;
    case ExperimentKind::inequality_suite:
        rc = detail::run_inequality_suite(ec, out, manifest);
        break;
    }
    std::ofstream(out / "plot.py") << plot_script_text();
    std::ofstream(out / "manifest.json") << manifest.dump(2) << "\n";
    return rc;
}

} // namespace rboltz
