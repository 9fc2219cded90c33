#pragma once

// Dimensional constants of the problem, each resolved by an in-repo numerical
// route (never transcribed from closed forms):
//   b       bubble amplitude, by residual bisection at the origin
//   a       fundamental-solution constant, by mollifier deconvolution
//   alpha   int w^{p*}
//   omega   int w^{p*+1} / (p*+1)
//   beta    omega / alpha^2
//   gamma   first-order energy offset (per bubble, m = 1)
//   energy_c  bubble self-energy C_{n,s}
//   iota    Beta-type boundary integral
//   d_half  half-space kernel normalization, from the boundary-vanishing limit

#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "fracbubble/params.hpp"

namespace fracbubble {

struct ConstantSet {
    int n = 0;
    double s = 0.0;
    double tol = 0.0;
    Criticality sign = Criticality::supercritical;

    double b = 0.0;
    double a = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double omega = 0.0;
    double gamma = 0.0;      // per bubble; scale by m for m bubbles
    double energy_c = 0.0;
    double iota = 0.0;
    double d_half = 0.0;

    // extra resolved values used internally
    double int_wp1 = 0.0;      // int w^{p*+1}
    double int_wp1_logw = 0.0; // int w^{p*+1} log w

    std::map<std::string, double> residuals; // achieved residuals per constant

    void require_resolved() const {
        if (b <= 0.0 || a <= 0.0)
            throw std::runtime_error("ConstantSet: constants not resolved");
    }

    // first-order energy offset for the requested branch (the resolved value
    // is stored for the supercritical side; the subcritical one flips sign)
    double gamma_for(Criticality c) const {
        return c == Criticality::supercritical ? gamma : -gamma;
    }

    std::string to_json() const;
    static ConstantSet from_json(const std::string& text);
};

// Resolve every constant for (n, s, sign) to tolerance tol.
// Throws std::runtime_error with the achieved residual on non-convergence.
ConstantSet resolve_constants(const FracParams& p, double tol = 1e-10);

// Normalization of the singular integral kernel: c_{n,s} such that the
// pointwise operator c int (u(x)-u(z)) |x-z|^{-n-2s} dz has symbol |zeta|^{2s}.
// Resolved from the cosine integral (n=1) or its Bessel reduction (n=2,3 via
// the 1-D/2-D forms); memoized per (n,s).
double kernel_normalization(int n, double s);

// (-Lap)^s at the center of a radial profile f(r) (f given with f(0) finite,
// algebraic decay). Used by the residual-bisection and mollifier routes.
double frac_laplacian_radial_at_center(int n, double s,
                                       const std::function<double(double)>& f,
                                       double tol = 1e-11);

// Pointwise (-Lap)^s of a 1-D profile by the symmetric second-difference
// form c int_0^inf (2f(x)-f(x+h)-f(x-h)) h^{-1-2s} dh. Test and oracle tool.
double frac_laplacian_pointwise_1d(double s, const std::function<double(double)>& f,
                                   double x, double tol = 1e-10);

} // namespace fracbubble
