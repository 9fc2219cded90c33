#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fracbubble/constants.hpp"
#include "fracbubble/domain.hpp"
#include "fracbubble/green.hpp"
#include "fracbubble/operators.hpp"
#include "fracbubble/reduced.hpp"

using namespace fracbubble;

namespace {
double rel(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

const FracParams kDesk{1, 0.3};

const ConstantSet& desk() {
    static const ConstantSet cs = resolve_constants(kDesk);
    return cs;
}

const DomainSpec& unit_ball() {
    static const DomainSpec ball = make_ball(1, make_point(0.0), 1.0);
    return ball;
}
} // namespace

TEST_CASE("closed ball kernel ties back to the Robin closed form") {
    const PairKernel k = closed_ball_kernel(desk(), unit_ball());
    CHECK(rel(k.H(make_point(0.0)),
              desk().a * desk().d_half * desk().iota) < 1e-14);
    CHECK(rel(k.H(make_point(0.4)), ball_robin(desk(), make_point(0.4))) <
          1e-14);
    CHECK(rel(k.G(make_point(-0.3), make_point(0.3)),
              ball_green(desk(), make_point(-0.3), make_point(0.3))) < 1e-14);
    CHECK(k.delta == doctest::Approx(0.2).epsilon(1e-15)); // 0.1 x diameter
}

TEST_CASE("admissibility margins are enforced with named bounds") {
    const PairKernel k = closed_ball_kernel(desk(), unit_ball()); // delta 0.2
    const std::vector<double> L{1.0, 1.0};
    CHECK_THROWS_AS(psi_eval(k, {make_point(-0.05), make_point(0.05)}, L,
                             Criticality::supercritical),
                    std::domain_error);
    CHECK_THROWS_AS(psi_eval(k, {make_point(0.95)}, {1.0},
                             Criticality::subcritical),
                    std::domain_error);
    CHECK_THROWS_AS(psi_eval(k, {make_point(0.0)}, {0.01},
                             Criticality::subcritical),
                    std::domain_error);
    CHECK_THROWS_AS(psi_eval(k, {make_point(0.0)}, {50.0},
                             Criticality::subcritical),
                    std::domain_error);
    CHECK_NOTHROW(psi_eval(k, {make_point(-0.3), make_point(0.3)}, L,
                           Criticality::supercritical));
}

TEST_CASE("two-bubble landscape pins at the desk scale") {
    const PairKernel k = closed_ball_kernel(desk(), unit_ball(), 0.02);
    const Point x1 = make_point(-0.05), x2 = make_point(0.05);
    CHECK(rel(varphi(k, x1, x2), -0.69719480317328753) < 1e-10);
    CHECK(rel(k.G(x1, x2), 1.0661664506647306) < 1e-10);
    CHECK(rel(varphi(k, make_point(-0.3), make_point(0.3)),
              0.052954475142616975) < 1e-10);
    CHECK(rel(varphi(k, x1, x2), varphi(k, x2, x1)) < 1e-14);

    const CriticalLambda cl = lambda_critical(k, x1, x2);
    CHECK(rel(cl.Lambda1, 1.1976307254036085) < 1e-10);
    CHECK(rel(cl.Lambda1, cl.Lambda2) < 1e-13);
    CHECK(std::abs(cl.Q + 2.0) < 1e-13);

    const PsiPoint at = psi_eval(k, {x1, x2}, {cl.Lambda1, cl.Lambda2},
                                 Criticality::supercritical);
    CHECK(rel(at.value, -0.63930958078237365) < 1e-10);
    // supercritical level identity at the critical rates
    CHECK(rel(at.value,
              -1.0 + std::log(1.0 / std::abs(varphi(k, x1, x2)))) < 1e-13);
    // the Lambda block of the gradient vanishes there
    const int m = 2, n = 1;
    for (int i = 0; i < m; ++i)
        CHECK(std::abs(at.gradient[m * n + i]) < 1e-12);
}

TEST_CASE("landscape gradients differentiate the landscape") {
    const PairKernel k = closed_ball_kernel(desk(), unit_ball(), 0.02);
    const std::vector<Point> xi{make_point(-0.31), make_point(0.24)};
    const std::vector<double> L{1.4, 0.9};
    const PsiPoint at = psi_eval(k, xi, L, Criticality::supercritical);
    const double st = 1e-5;
    double worst = 0.0, scale = 0.0;
    for (double gval : at.gradient) scale = std::max(scale, std::abs(gval));
    for (std::size_t c = 0; c < at.gradient.size(); ++c) {
        auto bump = [&](double sign) {
            std::vector<Point> xp = xi;
            std::vector<double> Lp = L;
            if (c < 2)
                xp[c][0] += sign * st;
            else
                Lp[c - 2] += sign * st;
            return psi_eval(k, xp, Lp, Criticality::supercritical).value;
        };
        const double fd = (bump(1.0) - bump(-1.0)) / (2.0 * st);
        worst = std::max(worst, std::abs(fd - at.gradient[c]));
    }
    CHECK(worst / scale < 1e-6);
}

TEST_CASE("truncation only acts where the interaction exceeds the cap") {
    const PairKernel k = closed_ball_kernel(desk(), unit_ball(), 0.02);
    const std::vector<Point> xi{make_point(-0.05), make_point(0.05)};
    const std::vector<double> L{1.2, 1.2};
    const double plain =
        psi_eval(k, xi, L, Criticality::supercritical).value;
    TruncationParams roomy;
    roomy.M = 1000.0;
    CHECK(rel(psi_truncated(k, roomy, xi, L, Criticality::supercritical),
              plain) < 1e-14);
    TruncationParams tight;
    tight.M = 0.5; // G at this pair is about 1.07
    CHECK(std::abs(psi_truncated(k, tight, xi, L,
                                 Criticality::supercritical) -
                   plain) > 0.1);
    TruncationParams bad;
    bad.sigma0 = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("synthetic landscape: search lands on the analytic critical point") {
    // H = 1 + x^2, G = const: the subcritical one-bubble landscape
    // (1/2) H Lambda^2 - log Lambda has its critical point at x = 0,
    // Lambda = 1/sqrt(H(0)) = 1, with a positive-definite Hessian.
    const DomainSpec dom = make_interval(-4.0, 4.0);
    auto Hs = [](const Point& x) { return 1.0 + x[0] * x[0]; };
    auto Gs = [](const Point&, const Point&) { return 0.01; };
    auto gH = [](const Point& x) { return make_point(2.0 * x[0]); };
    auto gZ = [](const Point&, const Point&) { return make_point(0.0); };
    const PairKernel k = synthetic_kernel(dom, 0.05, Hs, Gs, gH, gZ, gZ);

    // the evaluation itself follows the quadratic-plus-log formula
    const PsiPoint one = psi_eval(k, {make_point(0.5)}, {1.3},
                                  Criticality::subcritical);
    CHECK(rel(one.value, 0.5 * Hs(make_point(0.5)) * 1.3 * 1.3 -
                             std::log(1.3)) < 1e-14);
    const PsiPoint sup = psi_eval(k, {make_point(0.5)}, {1.3},
                                  Criticality::supercritical);
    CHECK(rel(sup.value, 0.5 * Hs(make_point(0.5)) * 1.3 * 1.3 +
                             std::log(1.3)) < 1e-14);
    // two bubbles: the interaction enters with a minus sign
    const PsiPoint two = psi_eval(k, {make_point(-0.5), make_point(0.5)},
                                  {1.1, 0.7}, Criticality::supercritical);
    const double want =
        0.5 * (Hs(make_point(-0.5)) * 1.1 * 1.1 +
               Hs(make_point(0.5)) * 0.7 * 0.7 - 2.0 * 0.01 * 1.1 * 0.7) +
        std::log(1.1 * 0.7);
    CHECK(rel(two.value, want) < 1e-14);

    const PsiPoint seed = psi_eval(k, {make_point(0.3)}, {0.8},
                                   Criticality::subcritical);
    const auto cps = find_critical(k, {seed}, 1e-12, Criticality::subcritical);
    REQUIRE(cps.size() == 1);
    CHECK(cps[0].converged);
    CHECK(std::abs(cps[0].xi[0][0]) < 1e-10);
    CHECK(std::abs(cps[0].Lambda[0] - 1.0) < 1e-10);
    CHECK(cps[0].n_pos == 2);
    CHECK(cps[0].n_neg == 0);
    CHECK(cps[0].n_zero == 0);

    const StabilityReport sr = classify_stability(
        k, cps[0], 1e-3, Criticality::subcritical, 10, 3);
    CHECK(sr.stable);
    CHECK(sr.nondegenerate);
    CHECK(sr.runs == 10);
}

TEST_CASE("desk ball search finds the center with the predicted rate") {
    const PairKernel k = closed_ball_kernel(desk(), unit_ball(), 0.02);
    const PsiPoint seed = psi_eval(k, {make_point(0.37)}, {0.8},
                                   Criticality::subcritical);
    const auto cps = find_critical(k, {seed}, 1e-11, Criticality::subcritical);
    REQUIRE(cps.size() == 1);
    CHECK(cps[0].converged);
    CHECK(std::abs(cps[0].xi[0][0]) < 1e-8);
    // the first-order condition in Lambda gives Lambda = H(center)^{-1/2}
    CHECK(rel(cps[0].Lambda[0],
              1.0 / std::sqrt(k.H(make_point(0.0)))) < 1e-9);
    CHECK(cps[0].n_pos == 2);

    const StabilityReport sr = classify_stability(
        k, cps[0], 1e-3, Criticality::subcritical, 12, 7);
    CHECK(sr.stable);
    CHECK(sr.nondegenerate);
    CHECK(sr.max_displacement < 1e-2);
}

TEST_CASE("tabulated kernels interpolate the numerical Green data") {
    const ConstantSet& cs = desk();
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 512);
    const DiscreteOperator op = build_operator(dom, kDesk, g, OpKind::spectral);
    std::vector<Point> samples;
    for (int k = 0; k < 7; ++k)
        samples.push_back(make_point(-0.7 + 1.4 * k / 6.0));
    const GreenTable tab = build_green_table(op, samples, cs);
    const PairKernel tk = table_kernel(tab, cs);

    // exact at the sample points, spline-accurate between them
    CHECK(rel(tk.H(tab.samples[3]), tab.robin_values[3]) < 1e-12);
    const Point xm = make_point(0.13);
    CHECK(rel(tk.H(xm), robin(op, xm, cs)) < 5e-3);

    const double st = 1e-5;
    const double fdH =
        (tk.H(make_point(xm[0] + st)) - tk.H(make_point(xm[0] - st))) /
        (2.0 * st);
    CHECK(rel(tk.gradH(xm)[0], fdH) < 1e-6);
    const Point yy = make_point(-0.4);
    const double fdG = (tk.G(make_point(xm[0] + st), yy) -
                        tk.G(make_point(xm[0] - st), yy)) /
                       (2.0 * st);
    CHECK(rel(tk.gradG1(xm, yy)[0], fdG) < 1e-6);

    GreenTable small = tab;
    small.samples.resize(3);
    small.G.resize(3);
    small.H.resize(3);
    small.robin_values.resize(3);
    CHECK_THROWS_AS(table_kernel(small, cs), std::invalid_argument);
}

TEST_CASE("half-space boundary function has one positive-slope root per kind") {
    const ConstantSet& cs = desk();
    CHECK(halfspace_phi_plus(cs, 1.1, OpKind::spectral).value < 0.0);
    CHECK(halfspace_phi_plus(cs, 50.0, OpKind::spectral).value > 0.0);

    const double th_s = phi_plus_root(cs, OpKind::spectral);
    CHECK(rel(th_s, 1.425415315420514) < 1e-9);
    CHECK(rel(halfspace_phi_plus(cs, th_s, OpKind::spectral).derivative,
              1.1087282612835423) < 1e-9);

    const double th_r = phi_plus_root(cs, OpKind::restricted);
    CHECK(rel(th_r, 2.8271406037324622) < 1e-9);
    CHECK(rel(halfspace_phi_plus(cs, th_r, OpKind::restricted).derivative,
              0.063170431474581817) < 1e-9);

    // no sign change in the bracket
    CHECK_THROWS(phi_plus_root(cs, OpKind::spectral, 5.0, 100.0));
}
