#pragma once

// Closed-form bubble profile, its dilation/translation kernels, and the
// s-harmonic (Poisson-type) extension of a boundary field.

#include <array>
#include <cmath>
#include <functional>

#include "fracbubble/params.hpp"

namespace fracbubble {

// Points live in R^n with n <= 3; unused coordinates stay zero.
using Point = std::array<double, 3>;

inline double dist2(const Point& x, const Point& y, int n) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) { const double d = x[i] - y[i]; r2 += d * d; }
    return r2;
}

inline Point make_point(double x0, double x1 = 0.0, double x2 = 0.0) {
    return Point{x0, x1, x2};
}

struct BubbleParams {
    double lambda = 1.0;
    Point xi{0.0, 0.0, 0.0};
};

// w_{lambda,xi}(x) = b ( lambda / (lambda^2 + |x-xi|^2) )^{(n-2s)/2}.
// b is the profile amplitude from ConstantSet; passed explicitly so the
// profile layer stays independent of the resolution order.
double bubble_value(const FracParams& p, double b, const BubbleParams& bp,
                    const Point& x);

// Kernels spanning the tangent space of the bubble family.
// j = 0: dilation kernel  (n-2s)/2 * w + (x-xi).grad w   (= -lambda dw/dlambda)
// j >= 1: translation kernel  dw/dxi_j.
double kernel_function(const FracParams& p, double b, const BubbleParams& bp,
                       int j, const Point& x);

// s-harmonic extension U(x,y) of the field u by convolution against the
// normalized kernel y^{2s} / (|x|^2+y^2)^{(n+2s)/2}. decay_p is the declared
// algebraic decay of |u| at infinity (|u| <~ |x|^{-decay_p}); the kernel mass
// outside the truncation radius gives the reported tail bound.
double poisson_extension(const FracParams& p,
                         const std::function<double(const Point&)>& u,
                         double decay_p, const Point& x, double y,
                         double* tail_bound = nullptr);

// Normalization constant of the extension kernel, resolved by quadrature of
// (1+|m|^2)^{-(n+2s)/2} over R^n.
double extension_kernel_mass(const FracParams& p);

// int_{R^n} w^k dx for the unit-scale bubble, by the angle substitution
// rho = tan(phi) (finite interval, endpoint power handled exactly).
double w_power_integral(const FracParams& p, double b, double k);

// int_{R^n} w^{p*+1} log w dx, same substitution with the endpoint log split.
double w_log_integral(const FracParams& p, double b);

} // namespace fracbubble
