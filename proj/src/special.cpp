// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/special.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dsim {

namespace {

constexpr double kPi = std::numbers::pi;

void require_nu(double nu) {
    if (std::isnan(nu) || nu <= 0.0) {
        throw std::invalid_argument("degrees of freedom must be positive or infinite, got " +
                                std::to_string(nu));
    }
}

// Stirling series with Bernoulli-number coefficients; accurate to ~1 ulp for
// x >= 15 (last retained term at x = 15 is below 1e-15 absolute).
double log_gamma_stirling(double x) {
    static constexpr double c[] = {
        1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
    };
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0;
    double power = inv;
    for (double coeff : c) {
        series += coeff * power;
        power *= inv2;
    }
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * kPi) + series;
}

}  // namespace

double log_gamma(double x) {
    if (!std::isfinite(x) || x <= 0.0) {
        throw std::invalid_argument("log_gamma requires finite x > 0, got " + std::to_string(x));
    }
    // Shift small arguments up with ln Gamma(x) = ln Gamma(x + n) - sum ln(x + k).
    double shift = 0.0;
    double y = x;
    while (y < 15.0) {
        shift += std::log(y);
        y += 1.0;
    }
    return log_gamma_stirling(y) - shift;
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw std::invalid_argument("regularized_incomplete_beta requires a, b > 0");
    }
    if (std::isnan(x) || x < 0.0 || x > 1.0) {
        throw std::invalid_argument("regularized_incomplete_beta requires x in [0, 1], got " +
                                std::to_string(x));
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    // The continued fraction converges fast only for x below the mean-ish
    // pivot (a+1)/(a+b+2); otherwise evaluate the reflected series.
    if (x > (a + 1.0) / (a + b + 2.0)) {
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
    }

    // Modified Lentz evaluation of the standard continued fraction.
    const double log_front =
        log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x);
    constexpr double tiny = 1e-300;
    constexpr double eps = 3e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < eps) {
            return std::exp(log_front) * h / a;
        }
    }
    throw std::runtime_error("regularized_incomplete_beta: continued fraction did not converge");
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double student_t_cdf(double x, double nu) {
    require_nu(nu);
    if (std::isnan(x)) throw std::invalid_argument("student_t_cdf: x is NaN");
    if (std::isinf(nu)) return normal_cdf(x);
    if (x == 0.0) return 0.5;
    if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
    const double t = nu / (nu + x * x);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * nu, 0.5, t);
    return x > 0.0 ? 1.0 - tail : tail;
}

double student_t_pdf(double x, double nu) {
    require_nu(nu);
    if (std::isnan(x)) throw std::invalid_argument("student_t_pdf: x is NaN");
    if (std::isinf(nu)) {
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
    }
    if (std::isinf(x)) return 0.0;
    const double log_norm =
        log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) - 0.5 * std::log(nu * kPi);
    return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
}

double xi_nu(double x, double nu) {
    return student_t_cdf(x, nu) - 0.5;
}

double ell_nu(double nu) {
    require_nu(nu);
    if (std::isinf(nu)) return std::sqrt(2.0 / kPi);
    return 2.0 * std::exp(log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu)) / std::sqrt(kPi * nu);
}

namespace {

// Bisection for a continuous function with f(lo) and f(hi) of opposite sign.
template <typename F>
double bisect(F&& f, double lo, double hi, double tol) {
    double flo = f(lo);
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = f(mid);
        if ((fmid <= 0.0) == (flo <= 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

PhaseConstants phase_constants(double nu, double epsilon) {
    require_nu(nu);
    if (!(epsilon > 0.0) || epsilon > 0.1) {
        throw std::invalid_argument("phase_constants: epsilon must lie in (0, 0.1], got " +
                                std::to_string(epsilon));
    }
    constexpr double tol = 1e-10;
    constexpr double psi_cap = 1e6;
    const double target = 1.0 - epsilon;

    // Saturation threshold: 2*xi(psi) = 1 - epsilon, bracketed by doubling.
    auto sat = [&](double x) { return 2.0 * xi_nu(x, nu) - target; };
    double hi = 1.0;
    while (sat(hi) < 0.0) {
        hi *= 2.0;
        if (hi > psi_cap) {
            throw std::runtime_error(
                "phase_constants: saturation threshold exceeds 1e6; epsilon " +
                std::to_string(epsilon) + " is unrepresentable for nu " + std::to_string(nu));
        }
    }
    const double psi = bisect(sat, 0.5 * hi, hi, tol);

    PhaseConstants pc;
    pc.nu = nu;
    pc.epsilon = epsilon;
    pc.psi = psi;
    pc.ell = ell_nu(nu);

    const double at_one = 2.0 * xi_nu(1.0, nu);
    pc.m = (2.0 * xi_nu(psi, nu) - at_one) / (psi - 1.0);
    pc.q1 = at_one - pc.m;

    // Tangency: 2*xi' is strictly decreasing on x > 0, so the slope-match
    // equation has one root between the secant endpoints.
    auto slope_gap = [&](double x) { return 2.0 * student_t_pdf(x, nu) - pc.m; };
    pc.x_star = bisect(slope_gap, 1.0, psi, tol);
    pc.q2 = 2.0 * xi_nu(pc.x_star, nu) - pc.m * pc.x_star;
    pc.q_hat = pc.q2 > pc.q1 ? pc.q2 : pc.q1;
    return pc;
}

}  // namespace dsim
