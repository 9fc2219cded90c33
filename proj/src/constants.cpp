#include "fracbubble/constants.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "json.hpp"

#include "fracbubble/green.hpp"
#include "fracbubble/profiles.hpp"
#include "fracbubble/quadrature.hpp"

namespace fracbubble {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sinc(double u) {
    if (std::abs(u) < 1e-8) return 1.0 - u * u / 6.0;
    return std::sin(u) / u;
}

// ---------------------------------------------------------------------------
// oscillatory tails int_T^inf cos(u) u^{-a} du (and the sine companion) by
// repeated integration by parts; the dropped term at depth 12 with T = 80 is
// below 1e-16 relative.

struct OscTail {
    double T;
    double cosT, sinT;

    explicit OscTail(double T_) : T(T_), cosT(std::cos(T_)), sinT(std::sin(T_)) {}

    double C(double a, int depth = 12) const {
        if (depth <= 0) return 0.0;
        return -sinT * std::pow(T, -a) + a * S(a + 1.0, depth - 1);
    }
    double S(double a, int depth = 12) const {
        if (depth <= 0) return 0.0;
        return cosT * std::pow(T, -a) - a * C(a + 1.0, depth - 1);
    }
    // against cos(u - pi/4) and sin(u - pi/4)
    double Cq(double a) const { return (C(a) + S(a)) / std::sqrt(2.0); }
    double Sq(double a) const { return (S(a) - C(a)) / std::sqrt(2.0); }
};

double kernel_normalization_uncached(int n, double s) {
    const double T = 80.0;
    const OscTail tail(T);
    const quad::Options opt{1e-14, 1e-13, 28};

    if (n == 1) {
        // symbol condition: c * int_R (1 - cos y) |y|^{-1-2s} dy = 1
        const double head = quad::integrate(
            [s](double u) {
                const double half = std::sin(0.5 * u);
                return 2.0 * half * half * std::pow(u, -1.0 - 2.0 * s);
            },
            0.0, T, opt);
        const double rest = std::pow(T, -2.0 * s) / (2.0 * s) - tail.C(1.0 + 2.0 * s);
        return 1.0 / (2.0 * (head + rest));
    }

    if (n == 2) {
        // angular average turns the plane wave into the order-zero Bessel
        // function: c * 2 pi int_0^inf (1 - J0(r)) r^{-1-2s} dr = 1
        const double head = quad::integrate(
            [s](double r) {
                double one_minus;
                if (r < 1e-3) {
                    const double r2 = r * r;
                    one_minus = r2 / 4.0 - r2 * r2 / 64.0 + r2 * r2 * r2 / 2304.0;
                } else {
                    one_minus = 1.0 - std::cyl_bessel_j(0.0, r);
                }
                return one_minus * std::pow(r, -1.0 - 2.0 * s);
            },
            0.0, T, opt);
        // large-argument Bessel tail through its cosine asymptotics
        const double bessel_tail =
            std::sqrt(2.0 / kPi) *
            (tail.Cq(1.5 + 2.0 * s) + (1.0 / 8.0) * tail.Sq(2.5 + 2.0 * s) -
             (9.0 / 128.0) * tail.Cq(3.5 + 2.0 * s) +
             (75.0 / 1024.0) * tail.Sq(4.5 + 2.0 * s));
        const double rest = std::pow(T, -2.0 * s) / (2.0 * s) - bessel_tail;
        return 1.0 / (2.0 * kPi * (head + rest));
    }

    throw std::invalid_argument("kernel_normalization: n must be 1 or 2");
}

// ---------------------------------------------------------------------------
// hypersingular radial integral int_0^inf (f(0) - f(r)) r^{-1-2s} dr mapped
// onto [0, pi/2) by r = tan(phi); the endpoint power cos^{2s-1} is taken by
// the right-endpoint substitution when s < 1/2.

double radial_difference_integral(double s, const std::function<double(double)>& f,
                                  double tol) {
    const double f0 = f(0.0);
    const quad::Options opt{0.1 * tol, tol, 28};
    const auto integrand = [&](double phi) {
        const double r = std::tan(phi);
        return (f0 - f(r)) * std::pow(std::sin(phi), -1.0 - 2.0 * s) *
               std::pow(std::cos(phi), 2.0 * s - 1.0);
    };
    const double left = quad::integrate(integrand, 0.0, 0.25 * kPi, opt);
    double right;
    if (s < 0.5) {
        right = quad::integrate_pow_right(
            [&](double phi) {
                const double d = 0.5 * kPi - phi;
                return (f0 - f(std::tan(phi))) *
                       std::pow(std::sin(phi), -1.0 - 2.0 * s) *
                       std::pow(sinc(d), 2.0 * s - 1.0);
            },
            0.25 * kPi, 0.5 * kPi, 1.0 - 2.0 * s, opt);
    } else {
        right = quad::integrate(integrand, 0.25 * kPi, 0.5 * kPi, opt);
    }
    return left + right;
}

// ---------------------------------------------------------------------------
// mollifier convolution F = |.|^{2s-n} * eta for a mass-one Gaussian eta of
// width sigma; the quadrature brackets the moving Gaussian peak explicitly.

constexpr double kSigma = 0.05;

double mollifier_convolution_1d(double s, double x) {
    const double sg = kSigma;
    const auto eta = [sg](double z) {
        return std::exp(-z * z / (2.0 * sg * sg)) / (sg * std::sqrt(2.0 * kPi));
    };
    const auto pair = [&](double u) { return eta(x - u) + eta(x + u); };
    const auto full = [&](double u) { return std::pow(u, 2.0 * s - 1.0) * pair(u); };
    const quad::Options opt{1e-13, 1e-12, 28};

    const auto head = [&](double hi) {
        if (s < 0.5) return quad::integrate_pow_left(pair, 0.0, hi, 1.0 - 2.0 * s, opt);
        return quad::integrate(full, 0.0, hi, opt);
    };

    if (x <= 16.0 * sg)
        return head(x + 12.0 * sg) + quad::integrate_inf(full, x + 12.0 * sg, opt);

    double acc = head(4.0 * sg);
    if (x - 12.0 * sg > 4.0 * sg)
        acc += quad::integrate(full, 4.0 * sg, x - 12.0 * sg, opt);
    acc += quad::integrate(full, x - 12.0 * sg, x + 12.0 * sg, opt);
    acc += quad::integrate_inf(full, x + 12.0 * sg, opt);
    return acc;
}

// e^{-x} I_0(x); the asymptotic branch avoids overflow of the Bessel factor
double scaled_bessel_i0(double x) {
    if (x < 500.0) return std::exp(-x) * std::cyl_bessel_i(0.0, x);
    const double ix = 1.0 / x;
    return (1.0 + ix / 8.0 + 9.0 * ix * ix / 128.0 + 225.0 * ix * ix * ix / 3072.0) /
           std::sqrt(2.0 * kPi * x);
}

double mollifier_convolution_2d(double s, double X) {
    const double sg = kSigma;
    // circular mean of the Gaussian over the radius-rho circle:
    //   Theta(X, rho) = (1/sigma^2) e^{-(X-rho)^2/(2 sigma^2)} e^{-g/2} I0(g/2),
    // g = 2 X rho / sigma^2 (the angular integral in closed Bessel form)
    const auto theta = [&](double rho) {
        const double d = X - rho;
        const double g = 2.0 * X * rho / (sg * sg);
        return std::exp(-d * d / (2.0 * sg * sg)) * scaled_bessel_i0(0.5 * g) /
               (sg * sg);
    };
    const auto smooth = [&](double rho) { return theta(rho); };
    const auto full = [&](double rho) {
        return std::pow(rho, 2.0 * s - 1.0) * theta(rho);
    };
    const quad::Options opt{1e-13, 1e-12, 28};

    const auto head = [&](double hi) {
        if (s < 0.5) return quad::integrate_pow_left(smooth, 0.0, hi, 1.0 - 2.0 * s, opt);
        return quad::integrate(full, 0.0, hi, opt);
    };

    if (X <= 16.0 * sg)
        return head(X + 12.0 * sg) + quad::integrate_inf(full, X + 12.0 * sg, opt);

    double acc = head(4.0 * sg);
    if (X - 12.0 * sg > 4.0 * sg)
        acc += quad::integrate(full, 4.0 * sg, X - 12.0 * sg, opt);
    acc += quad::integrate(full, X - 12.0 * sg, X + 12.0 * sg, opt);
    acc += quad::integrate_inf(full, X + 12.0 * sg, opt);
    return acc;
}

// limit of K(r, t) as t -> 0 at fixed r: four geometrically spaced samples
// extrapolated with the known correction exponents {s, 2s, 1}
double boundary_vanishing_limit(const FracParams& p, double r) {
    std::array<double, 4> vals{};
    for (int k = 0; k < 4; ++k)
        vals[static_cast<size_t>(k)] = kernel_K(r, 1e-2 * std::pow(4.0, -k), p);
    std::vector<double> v(vals.begin(), vals.end());
    for (double e : {p.s, 2.0 * p.s, 1.0}) {
        const double f = std::pow(4.0, -e);
        for (size_t k = 0; k + 1 < v.size(); ++k)
            v[k] = (v[k + 1] - f * v[k]) / (1.0 - f);
        v.pop_back();
    }
    return v[0];
}

} // namespace

// ---------------------------------------------------------------------------

double kernel_normalization(int n, double s) {
    static std::map<std::pair<int, double>, double> cache;
    static std::mutex mtx;
    const std::pair<int, double> key{n, s};
    {
        std::lock_guard<std::mutex> lock(mtx);
        const auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const double value = kernel_normalization_uncached(n, s);
    std::lock_guard<std::mutex> lock(mtx);
    cache.emplace(key, value);
    return value;
}

double frac_laplacian_radial_at_center(int n, double s,
                                       const std::function<double(double)>& f,
                                       double tol) {
    if (n != 1 && n != 2)
        throw std::invalid_argument("frac_laplacian_radial_at_center: n must be 1 or 2");
    const double surf = (n == 1) ? 2.0 : 2.0 * kPi;
    return kernel_normalization(n, s) * surf * radial_difference_integral(s, f, tol);
}

double frac_laplacian_pointwise_1d(double s, const std::function<double(double)>& f,
                                   double x, double tol) {
    // c int_0^inf (2 f(x) - f(x+h) - f(x-h)) h^{-1-2s} dh, h = tan(phi)
    const double fx = f(x);
    const quad::Options opt{0.1 * tol, tol, 28};
    const auto diff = [&](double h) { return 2.0 * fx - f(x + h) - f(x - h); };
    const auto integrand = [&](double phi) {
        const double h = std::tan(phi);
        return diff(h) * std::pow(std::sin(phi), -1.0 - 2.0 * s) *
               std::pow(std::cos(phi), 2.0 * s - 1.0);
    };
    const double left = quad::integrate(integrand, 0.0, 0.25 * kPi, opt);
    double right;
    if (s < 0.5) {
        right = quad::integrate_pow_right(
            [&](double phi) {
                const double d = 0.5 * kPi - phi;
                return diff(std::tan(phi)) * std::pow(std::sin(phi), -1.0 - 2.0 * s) *
                       std::pow(sinc(d), 2.0 * s - 1.0);
            },
            0.25 * kPi, 0.5 * kPi, 1.0 - 2.0 * s, opt);
    } else {
        right = quad::integrate(integrand, 0.25 * kPi, 0.5 * kPi, opt);
    }
    return kernel_normalization(1, s) * (left + right);
}

ConstantSet resolve_constants(const FracParams& p, double tol) {
    p.validate();
    if (!(tol > 0.0 && tol < 1e-2))
        throw std::invalid_argument("resolve_constants: tol out of range");
    if (p.n > 2)
        throw std::invalid_argument(
            "resolve_constants: n = 3 appears only in the closed-form kernels");

    ConstantSet cs;
    cs.n = p.n;
    cs.s = p.s;
    cs.tol = tol;
    cs.sign = Criticality::supercritical;

    const double ps = p.p_star();
    const double q = p.q();

    // amplitude b: the unit-scale profile W0 = (1+r^2)^{-q} satisfies
    // A_s (beta W0) = (beta W0)^{p*} at the origin iff beta A = beta^{p*}
    const double A = frac_laplacian_radial_at_center(
        p.n, p.s, [q](double r) { return std::pow(1.0 + r * r, -q); }, 0.1 * tol);
    if (!(A > 0.0))
        throw std::runtime_error("resolve_constants: nonpositive profile residual scale");
    {
        double lo = 1e-8, hi = 2.0;
        const auto g = [&](double beta) { return beta * A - std::pow(beta, ps); };
        while (g(hi) > 0.0) {
            hi *= 2.0;
            if (hi > 1e12) throw std::runtime_error("resolve_constants: b bracket failed");
        }
        for (int it = 0; it < 200 && (hi - lo) > 1e-16 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) > 0.0 ? lo : hi) = mid;
        }
        cs.b = 0.5 * (lo + hi);
        cs.residuals["b"] = std::abs(cs.b * A - std::pow(cs.b, ps)) / (cs.b * A);
    }

    // fundamental-solution constant a by mollifier deconvolution:
    // (-Lap)^s (|.|^{2s-n} * eta) = eta / a, evaluated at the origin
    {
        const auto F = [&](double r) {
            return p.n == 1 ? mollifier_convolution_1d(p.s, r)
                            : mollifier_convolution_2d(p.s, r);
        };
        const double lap = frac_laplacian_radial_at_center(p.n, p.s, F, 0.1 * tol);
        if (!(lap > 0.0))
            throw std::runtime_error("resolve_constants: mollifier route degenerate");
        const double eta0 = p.n == 1 ? 1.0 / (kSigma * std::sqrt(2.0 * kPi))
                                     : 1.0 / (2.0 * kPi * kSigma * kSigma);
        cs.a = eta0 / lap;
    }

    // profile integrals
    cs.alpha = w_power_integral(p, cs.b, ps);
    cs.int_wp1 = w_power_integral(p, cs.b, ps + 1.0);
    cs.omega = cs.int_wp1 / (ps + 1.0);
    cs.beta = cs.omega / (cs.alpha * cs.alpha);
    cs.int_wp1_logw = w_log_integral(p, cs.b);
    cs.energy_c = (0.5 - 1.0 / (ps + 1.0)) * cs.int_wp1;
    cs.gamma = cs.omega / (ps + 1.0) + 0.5 * cs.omega * std::log(cs.beta) -
               cs.int_wp1_logw / (ps + 1.0);

    // boundary integral iota = J(0)
    cs.iota = kernel_J(0.0, p.n, p.s);

    // half-space kernel normalization d from the boundary-vanishing limit,
    // cross-checked at a second separation
    {
        const double lim1 = boundary_vanishing_limit(p, 1.0);
        const double lim4 = boundary_vanishing_limit(p, 4.0);
        const double disagree = std::abs(lim1 - lim4) / std::abs(lim1);
        if (!(lim1 > 0.0) || disagree > 1e-4)
            throw std::runtime_error(
                "resolve_constants: d cross-check failed, relative disagreement " +
                std::to_string(disagree));
        cs.d_half = 1.0 / lim1;
        cs.residuals["d_half"] = disagree;
    }

    // internal consistency: a * alpha must reproduce b (independent routes)
    {
        const double rel = std::abs(cs.a * cs.alpha - cs.b) / cs.b;
        cs.residuals["a_alpha_b"] = rel;
        if (rel > 1e-6)
            throw std::runtime_error(
                "resolve_constants: a*alpha vs b consistency failed, relative " +
                std::to_string(rel));
    }

    return cs;
}

// ---------------------------------------------------------------------------

std::string ConstantSet::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["s"] = s;
    j["tol"] = tol;
    j["sign"] = fracbubble::to_string(sign);
    j["values"] = {{"b", b},
                   {"a", a},
                   {"alpha", alpha},
                   {"beta", beta},
                   {"omega", omega},
                   {"gamma", gamma},
                   {"energy_c", energy_c},
                   {"iota", iota},
                   {"d_half", d_half},
                   {"int_wp1", int_wp1},
                   {"int_wp1_logw", int_wp1_logw}};
    j["residuals"] = residuals;
    return j.dump();
}

ConstantSet ConstantSet::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ConstantSet cs;
    cs.n = j.at("n").get<int>();
    cs.s = j.at("s").get<double>();
    cs.tol = j.at("tol").get<double>();
    cs.sign = criticality_from_string(j.at("sign").get<std::string>());
    const auto& v = j.at("values");
    cs.b = v.at("b").get<double>();
    cs.a = v.at("a").get<double>();
    cs.alpha = v.at("alpha").get<double>();
    cs.beta = v.at("beta").get<double>();
    cs.omega = v.at("omega").get<double>();
    cs.gamma = v.at("gamma").get<double>();
    cs.energy_c = v.at("energy_c").get<double>();
    cs.iota = v.at("iota").get<double>();
    cs.d_half = v.at("d_half").get<double>();
    cs.int_wp1 = v.at("int_wp1").get<double>();
    cs.int_wp1_logw = v.at("int_wp1_logw").get<double>();
    if (j.contains("residuals"))
        cs.residuals = j.at("residuals").get<std::map<std::string, double>>();
    return cs;
}

} // namespace fracbubble
