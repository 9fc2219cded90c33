#pragma once

// Green function machinery: numerical G, regular part H, and Robin function
// for any DiscreteOperator, together with the closed-form references on the
// whole space, the half-space, and the unit ball. The half-space and ball
// kernels share the radial profile
//
//   K(r, t) = r^A t^{s-1} (r+t)^{-B} J(r/t),   A = (n-2s)/2, B = (n-2)/2,
//   J(q)    = int_0^1 (1-u)^B u^{-s} (1+qu)^{-1} du,
//
// with r the squared distance between the two points and t the geometric
// factor (4 x^n y^n on the half-space, (1-|x|^2)(1-|y|^2) on the unit ball).

#include <functional>
#include <string>
#include <vector>

#include "fracbubble/constants.hpp"
#include "fracbubble/operators.hpp"

namespace fracbubble {

// ---------------------------------------------------------------------------
// kernel profile

double kernel_J(double q, int n, double s);
double kernel_J_prime(double q, int n, double s);

double kernel_K(double r, double t, const FracParams& p);

struct KernelDerivatives {
    double K = 0.0;
    double dK_dr = 0.0;
    double dK_dt = 0.0;
};
// K with its partials (differentiation under the integral, validated against
// centered differences in the tests).
KernelDerivatives kernel_K_and_partials(double r, double t, const FracParams& p);

// d/dtheta of K((theta-1)^2, 4 theta), the one-parameter family traced by two
// aligned points at heights 1 and theta on the half-space.
double kernel_K_theta_derivative(double theta, const FracParams& p);

// ---------------------------------------------------------------------------
// closed-form references

// a_{n,s} |x - xi|^{2s-n}; throws on x = xi.
double gamma_fundamental(const ConstantSet& cs, const Point& x, const Point& xi);

// Half-space {x^n > 0}, zero exterior condition:
//   G_+(x,y) = a r^{-(n-2s)/2} [1 - d K(r,t)], r = |x-y|^2, t = 4 x^n y^n.
double half_space_green(const ConstantSet& cs, const Point& xi1, const Point& xi2);

// Diagonal regular part on the half-space: a d iota / (2^{n-2s} h^{n-2s})
// at height h. Exact doubling law R(2h) = 2^{2s-n} R(h).
double half_space_robin(const ConstantSet& cs, double height);

// Unit ball analogues, t = (1-|x|^2)(1-|y|^2).
double ball_green(const ConstantSet& cs, const Point& xi1, const Point& xi2);
double ball_robin(const ConstantSet& cs, const Point& xi);

// Method-of-images form used by the spectral comparison arguments:
// Gamma(Z - Y) - Gamma(Z - Ybar) with Ybar the reflection across {x^n = 0}.
double spectral_half_space_green(const ConstantSet& cs, const Point& Z,
                                 const Point& Y);

// ---------------------------------------------------------------------------
// Kelvin transform

Point point_inversion(const Point& xi, int n); // xi / |xi|^2

// u*(xi) = |xi|^{2s-n} u(xi / |xi|^2); throws at xi = 0.
double kelvin_transform(const std::function<double(const Point&)>& u,
                        const Point& xi, const FracParams& p);

// ---------------------------------------------------------------------------
// numerical Green function
//
// Sample points snap to the nearest grid node so that ring distances are
// exact multiples of h. All routines require dist(xi, boundary) >= 4h.

// Triangle bump centered at the node nearest xi, half-width 2h, discrete
// mass exactly 1.
Field mollified_delta(const Grid& grid, const Point& xi);

// solve(op, mollified delta). Positive in the interior, zero outside.
Field green_numeric(const DiscreteOperator& op, const Point& xi);

// Eigen-series reference sum_k lambda_k^{-s} phi_k(x) phi_k(xi) for spectral
// operators; throws for other kinds.
Field green_eigen_series(const DiscreteOperator& op, const Point& xi);

// H(., xi) = Gamma(., xi) - G(., xi); the node at xi itself carries the
// ring-extrapolated diagonal value (the raw difference is singular there).
Field regular_part(const DiscreteOperator& op, const Point& xi,
                   const ConstantSet& cs);

// Diagonal value H(xi, xi): ring averages of the regular part at radii
// rho, 2 rho, 3 rho extrapolated to 0 (coefficients 3, -3, 1) with
// rho = max(2h, 0.01 diam). The floor keeps the rings at a fixed physical
// radius under refinement; the near-source cells carry a lattice error that
// does not vanish relative to Gamma at a fixed cell offset. Near the boundary
// (closer than max(0.1 diam, 3 rho + h)) the rings collapse to the inward
// normal.
double robin(const DiscreteOperator& op, const Point& xi, const ConstantSet& cs);

// ---------------------------------------------------------------------------
// tabulated Green data

struct GreenTable {
    const DiscreteOperator* op = nullptr;
    std::vector<Point> samples;      // snapped sample points
    std::vector<Field> G;            // G(., xi_k)
    std::vector<Field> H;            // Gamma - G with extrapolated diagonal
    std::vector<double> robin_values;

    // Tab-separated rows (xi coords, x coords, G, H) after one JSON header
    // line carrying domain, s, h, kind, robin values, and the constants.
    void write_dsv(const std::string& path, const ConstantSet& cs) const;
};

// Parallel over samples; the table is immutable afterwards.
GreenTable build_green_table(const DiscreteOperator& op,
                             const std::vector<Point>& samples,
                             const ConstantSet& cs);

} // namespace fracbubble
