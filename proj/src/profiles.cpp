#include "fracbubble/profiles.hpp"

#include <cmath>
#include <stdexcept>

#include "fracbubble/quadrature.hpp"

namespace fracbubble {

namespace {
constexpr double kPi = 3.14159265358979323846;

// sin(u)/u without cancellation near zero.
double sinc(double u) {
    if (std::abs(u) < 1e-8) return 1.0 - u * u / 6.0;
    return std::sin(u) / u;
}

// cos(phi)^expo with the endpoint power peeled off: cos = u * sinc(u) at
// u = pi/2 - phi, so cos^expo = u^expo * sinc(u)^expo. Returns the smooth
// factor; the u^expo part is handled by integrate_pow_right.
double cos_pow_smooth(double phi, double expo) {
    return std::pow(sinc(0.5 * kPi - phi), expo);
}
} // namespace

double bubble_value(const FracParams& p, double b, const BubbleParams& bp,
                    const Point& x) {
    if (b <= 0.0) throw std::runtime_error("bubble_value: amplitude not resolved");
    const double r2 = dist2(x, bp.xi, p.n);
    const double lam = bp.lambda;
    return b * std::pow(lam / (lam * lam + r2), p.q());
}

double kernel_function(const FracParams& p, double b, const BubbleParams& bp,
                       int j, const Point& x) {
    if (b <= 0.0) throw std::runtime_error("kernel_function: amplitude not resolved");
    if (j < 0 || j > p.n)
        throw std::invalid_argument("kernel_function: j out of range");
    const double q = p.q();
    const double lam = bp.lambda;
    const double r2 = dist2(x, bp.xi, p.n);
    const double R = lam * lam + r2;
    const double lam_q = std::pow(lam, q);
    if (j == 0) {
        // q w + (x-xi).grad w = q b lam^q (lam^2 - rho^2) / R^{q+1}
        return q * b * lam_q * (lam * lam - r2) / std::pow(R, q + 1.0);
    }
    // dw/dxi_j = 2 q b lam^q (x_j - xi_j) / R^{q+1}
    return 2.0 * q * b * lam_q * (x[j - 1] - bp.xi[j - 1]) / std::pow(R, q + 1.0);
}

double w_power_integral(const FracParams& p, double b, double k) {
    const double q = p.q();
    double expo, surf;
    std::function<double(double)> extra;
    if (p.n == 1) {
        expo = 2.0 * q * k - 2.0;
        surf = 2.0;
        extra = [](double) { return 1.0; };
    } else if (p.n == 2) {
        expo = 2.0 * q * k - 3.0;
        surf = 2.0 * kPi;
        extra = [](double phi) { return std::sin(phi); };
    } else {
        throw std::invalid_argument("w_power_integral: n must be 1 or 2");
    }

    double integral;
    if (expo >= 0.0) {
        integral = quad::integrate(
            [&](double phi) { return std::pow(std::cos(phi), expo) * extra(phi); },
            0.0, 0.5 * kPi);
    } else {
        if (expo <= -1.0)
            throw std::invalid_argument("w_power_integral: divergent integral");
        integral = quad::integrate_pow_right(
            [&](double phi) { return cos_pow_smooth(phi, expo) * extra(phi); },
            0.0, 0.5 * kPi, -expo);
    }
    return surf * std::pow(b, k) * integral;
}

double w_log_integral(const FracParams& p, double b) {
    const double q = p.q();
    const double k = p.p_star() + 1.0;
    const double logb = std::log(b);
    if (p.n == 1) {
        // the cos power is exactly zero (2qk-2 = 0): only the log factor is left
        const double delta = 1e-4;
        double I_log = quad::integrate(
            [](double phi) { return std::log(std::cos(phi)); }, 0.0,
            0.5 * kPi - delta);
        // sliver at the endpoint: log cos(pi/2-u) = log u + log sinc(u)
        I_log += delta * std::log(delta) - delta;
        I_log += quad::integrate([&](double u) { return std::log(sinc(u)); },
                                 0.0, delta);
        return 2.0 * std::pow(b, k) * (0.5 * kPi * logb + 2.0 * q * I_log);
    }
    if (p.n == 2) {
        // integrand cos^{2n-3} sin (...) = cos sin (log b + 2q log cos): bounded
        double I = quad::integrate(
            [&](double phi) {
                const double c = std::cos(phi);
                if (c <= 1e-300) return 0.0;
                return c * std::sin(phi) * (logb + 2.0 * q * std::log(c));
            },
            0.0, 0.5 * kPi);
        return 2.0 * kPi * std::pow(b, k) * I;
    }
    throw std::invalid_argument("w_log_integral: n must be 1 or 2");
}

double extension_kernel_mass(const FracParams& p) {
    // int (1+|m|^2)^{-(n+2s)/2} dm equals the w-power integral with b=1, k=p*
    return w_power_integral(p, 1.0, p.p_star());
}

double poisson_extension(const FracParams& p,
                         const std::function<double(const Point&)>& u,
                         double decay_p, const Point& x, double y,
                         double* tail_bound) {
    if (y <= 0.0) throw std::invalid_argument("poisson_extension: y must be > 0");
    (void)decay_p; // the tan substitution integrates the full line exactly
    if (tail_bound) *tail_bound = 0.0;

    // z = x + y tan(phi) turns the convolution into a finite-interval integral
    // with weight cos^{n+2s-2}(phi) (n=1) resp. cos^{2s-1}(phi) sin(phi) (n=2,
    // polar around x). Normalizing by the same quadrature makes u == 1 exact.
    const double expo = 2.0 * p.s - 1.0; // both n: the endpoint power
    const double g = -expo;              // in (0,1) for s < 1/2

    auto weighted = [&](const std::function<double(double)>& fr,
                        quad::Options opt) {
        if (g > 0.0) {
            return quad::integrate_pow_right(
                [&](double phi) { return cos_pow_smooth(phi, expo) * fr(phi); },
                0.0, 0.5 * kPi, g, opt);
        }
        return quad::integrate(
            [&](double phi) { return std::pow(std::cos(phi), expo) * fr(phi); },
            0.0, 0.5 * kPi, opt);
    };

    if (p.n == 1) {
        quad::Options opt{1e-11, 1e-10, 26};
        const double num = weighted(
            [&](double phi) {
                const double t = y * std::tan(phi);
                return u(make_point(x[0] + t)) + u(make_point(x[0] - t));
            },
            opt);
        const double den = 2.0 * weighted([](double) { return 1.0; }, opt);
        return num / den;
    }
    if (p.n == 2) {
        quad::Options outer{1e-9, 1e-8, 22};
        auto circ_mean = [&](double r) {
            double m = quad::integrate(
                [&](double th) {
                    return u(make_point(x[0] + r * std::cos(th),
                                        x[1] + r * std::sin(th)));
                },
                0.0, 2.0 * kPi, {1e-10, 1e-9, 20});
            return m / (2.0 * kPi);
        };
        const double num = weighted(
            [&](double phi) { return std::sin(phi) * circ_mean(y * std::tan(phi)); },
            outer);
        const double den = weighted([](double phi) { return std::sin(phi); },
                                    {1e-11, 1e-10, 24});
        return num / den;
    }
    throw std::invalid_argument("poisson_extension: n must be 1 or 2");
}

} // namespace fracbubble
