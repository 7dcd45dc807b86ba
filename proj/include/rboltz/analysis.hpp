#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rboltz/quadrature.hpp"

namespace rboltz {

/// Least-squares power-law fit of a positive series: log(value) regressed on
/// -log(1+t) over a window.
struct DecayFit {
    double exponent = 0.0;
    double half_width = 0.0; ///< ~95% confidence half width of the exponent
    double t_lo = 0.0, t_hi = 0.0;
    double residual = 0.0; ///< RMS residual of the fit in log space
};

inline DecayFit fit_decay_exponent(const std::vector<double>& times,
                                   const std::vector<double>& values, double t_lo, double t_hi) {
    if (times.size() != values.size())
        throw std::invalid_argument("fit_decay_exponent: size mismatch");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_lo || times[i] > t_hi) continue;
        if (!(values[i] > 0.0))
            throw std::invalid_argument("fit_decay_exponent: nonpositive value in window");
        x.push_back(-std::log1p(times[i]));
        y.push_back(std::log(values[i]));
    }
    const std::size_t n = x.size();
    if (n < 8) throw std::invalid_argument("fit_decay_exponent: need >= 8 points in window");
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    DecayFit fit;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    fit.exponent = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - my - fit.exponent * (x[i] - mx);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    const double se = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
    fit.half_width = 2.0 * se;
    return fit;
}

/// Convolution-decay device: I(t) = int_0^t (1+t-s)^-lambda (1+s)^-mu ds is
/// bounded by C (1+t)^-rho with rho = min(lambda+mu-1, mu), up to a log(2+t)
/// factor exactly when lambda = 1.  "Bounded" is operationalized as: the
/// running sup over [T/2, T] grows by less than 1% when T doubles.
struct BasicDecayReport {
    double rho = 0.0;
    double sup_at_T = 0.0;        ///< sup of I(t)(1+t)^rho / C(t) over [T/2, T]
    double sup_at_2T = 0.0;       ///< same over [T, 2T]
    double growth = 0.0;          ///< sup_at_2T / sup_at_T - 1
    double growth_without_log = 0.0; ///< same statistic with the log factor dropped
    bool bounded = false;
};

inline double basic_decay_integral(double lambda, double mu, double t, double tol = 1e-11) {
    return adaptive_simpson(
        [=](double s) { return std::pow(1.0 + t - s, -lambda) * std::pow(1.0 + s, -mu); }, 0.0, t,
        tol);
}

inline BasicDecayReport basic_decay_check(double lambda, double mu, double T, int n_samples = 48) {
    if (!(lambda >= mu && mu >= 0.0))
        throw std::invalid_argument("basic_decay_check: requires lambda >= mu >= 0 (swap first)");
    if (!(T > 1.0)) throw std::invalid_argument("basic_decay_check: T must be > 1");
    BasicDecayReport rep;
    rep.rho = std::min(lambda + mu - 1.0, mu);
    auto scaled = [&](double t, bool with_log) {
        const double log_factor = (lambda == 1.0 && with_log) ? std::log(2.0 + t) : 1.0;
        return basic_decay_integral(lambda, mu, t) * std::pow(1.0 + t, rep.rho) / log_factor;
    };
    auto window_sup = [&](double lo, double hi, bool with_log) {
        double sup = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            const double t = lo * std::pow(hi / lo, double(i) / (n_samples - 1));
            sup = std::max(sup, scaled(t, with_log));
        }
        return sup;
    };
    rep.sup_at_T = window_sup(0.5 * T, T, true);
    rep.sup_at_2T = window_sup(T, 2.0 * T, true);
    rep.growth = rep.sup_at_2T / rep.sup_at_T - 1.0;
    rep.growth_without_log = window_sup(T, 2.0 * T, false) / window_sup(0.5 * T, T, false) - 1.0;
    rep.bounded = rep.growth < 0.01;
    return rep;
}

/// Elementary bound e^{-a y} (1+y)^k <= max{1, e^{a-k} k^k a^{-k}} checked by
/// dense sampling plus the closed-form maximizer y* = k/a - 1.
struct CalcInequalityReport {
    double bound = 0.0;
    double max_lhs = 0.0;
    double max_violation = 0.0;     ///< max over samples of lhs - bound
    double max_violation_rel = 0.0; ///< the same, relative to max(bound, 1)
    double y_star = 0.0;
};

inline CalcInequalityReport calc_inequality_check(double a, double decay_order, double y_max,
                                                  int n_samples = 20000) {
    if (a < 0.0 || decay_order < 0.0 || y_max < 0.0)
        throw std::invalid_argument("calc_inequality_check: arguments must be >= 0");
    CalcInequalityReport rep;
    const double k = decay_order;
    const double interior =
        (k > 0.0 && a > 0.0) ? std::exp(a - k) * std::pow(k, k) * std::pow(a, -k)
        : (k > 0.0 && a == 0.0) ? std::numeric_limits<double>::infinity()
                                : 1.0;
    rep.bound = std::max(1.0, interior);
    rep.y_star = a > 0.0 ? k / a - 1.0 : y_max;
    auto lhs = [&](double y) { return std::exp(-a * y) * std::pow(1.0 + y, k); };
    for (int i = 0; i <= n_samples; ++i) {
        const double y = y_max * i / n_samples;
        const double v = lhs(y);
        rep.max_lhs = std::max(rep.max_lhs, v);
        rep.max_violation = std::max(rep.max_violation, v - rep.bound);
    }
    if (rep.y_star > 0.0 && rep.y_star <= y_max) {
        const double v = lhs(rep.y_star);
        rep.max_lhs = std::max(rep.max_lhs, v);
        rep.max_violation = std::max(rep.max_violation, v - rep.bound);
    }
    rep.max_violation_rel = rep.max_violation / std::max(rep.bound, 1.0);
    return rep;
}

} // namespace rboltz
