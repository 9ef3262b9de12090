// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Special functions for the sign-descent noise analysis: log-gamma,
// regularized incomplete beta, Student-t CDF/PDF, the shifted CDF
// xi_nu(x) = F_nu(x) - 1/2, its slope-at-zero ell_nu, and the secant/tangent
// constants that bound 2*xi_nu on the intermediate signal-to-noise range.

#pragma once

#include <limits>

namespace dsim {

// Degrees-of-freedom value selecting the Gaussian limit.
inline constexpr double nu_infinity = std::numeric_limits<double>::infinity();

// Natural log of the gamma function for x > 0.
// Absolute error below 1e-12 on [0.5, 200].
double log_gamma(double x);

// I_x(a, b) for a, b > 0 and x in [0, 1]. Relative error below 1e-10.
double regularized_incomplete_beta(double a, double b, double x);

// Standard normal CDF.
double normal_cdf(double x);

// Student-t CDF with nu degrees of freedom; nu = nu_infinity selects the
// standard normal CDF exactly (not a large-nu approximation).
double student_t_cdf(double x, double nu);

// Student-t density; the analytic derivative of student_t_cdf.
double student_t_pdf(double x, double nu);

// xi_nu(x) = F_nu(x) - 1/2. Odd, strictly increasing, range (-1/2, 1/2).
double xi_nu(double x, double nu);

// ell_nu = 2 * (t-density at 0): the small-signal slope of 2*xi_nu.
// Closed forms: ell_1 = 2/pi, ell_2 = 1/sqrt(2), ell_inf = sqrt(2/pi).
double ell_nu(double nu);

// Constants of the three signal-to-noise regimes of sign descent.
//
// psi is where 2*xi_nu saturates (2*xi_nu(psi) = 1 - epsilon); on [1, psi]
// the concave map 2*xi_nu is sandwiched between the secant line m*x + q1
// through (1, 2*xi_nu(1)) and (psi, 2*xi_nu(psi)) and the parallel tangent
// line m*x + q2 touching at x_star.
struct PhaseConstants {
    double nu = nu_infinity;  // degrees of freedom (nu_infinity = Gaussian)
    double epsilon = 0.01;    // saturation tolerance defining psi
    double psi = 0.0;         // saturation threshold, > 1
    double m = 0.0;           // secant slope, in (0, ell)
    double q1 = 0.0;          // secant intercept
    double q2 = 0.0;          // tangent intercept, >= q1
    double q_hat = 0.0;       // max(q1, q2)
    double x_star = 0.0;      // tangency point in [1, psi]
    double ell = 0.0;         // ell_nu
};

// Computes PhaseConstants by bisection (tolerance 1e-10). epsilon must lie in
// (0, 0.1]. Throws if the saturation threshold would exceed 1e6 (tails too
// heavy for the requested epsilon).
PhaseConstants phase_constants(double nu, double epsilon = 0.01);

}  // namespace dsim
