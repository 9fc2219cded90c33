#pragma once

// Adaptive Gauss-Kronrod quadrature plus the substitutions used throughout:
// endpoint algebraic singularities and semi-infinite tails with algebraic or
// faster decay. Deterministic: no randomness, fixed subdivision order.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>

namespace fracbubble::quad {

struct GK15Result {
    double value = 0.0;
    double error = 0.0;
};

// 15-point Kronrod rule with embedded 7-point Gauss rule on [a,b].
GK15Result gk15(const std::function<double(double)>& f, double a, double b);

struct Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-11;
    int max_depth = 28;
};

// Adaptive bisection driven by the Kronrod error estimate.
double integrate(const std::function<double(double)>& f, double a, double b,
                 Options opt = {});

// int_a^b (x-a)^{-gamma} f(x) dx for gamma in [0,1), f smooth up to the
// endpoint. Substitution u = (x-a)^{1-gamma} removes the singularity exactly.
double integrate_pow_left(const std::function<double(double)>& f, double a,
                          double b, double gamma, Options opt = {});

// Same with the singular factor at the right endpoint: (b-x)^{-gamma}.
double integrate_pow_right(const std::function<double(double)>& f, double a,
                           double b, double gamma, Options opt = {});

// int_a^inf f. Doubling panels with geometric tail extrapolation; requires
// |f| eventually decaying at least like x^{-p} with p > 1.1 or faster.
double integrate_inf(const std::function<double(double)>& f, double a,
                     Options opt = {});

// Kummer-style acceleration is overkill here; for oscillatory cosine tails we
// use explicit integration by parts at the call site instead.

} // namespace fracbubble::quad
