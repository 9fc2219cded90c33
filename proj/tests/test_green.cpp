#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fracbubble/constants.hpp"
#include "fracbubble/domain.hpp"
#include "fracbubble/green.hpp"
#include "fracbubble/operators.hpp"

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
} // namespace

TEST_CASE("kernel profile J: pins, Beta endpoint, monotonicity, derivative") {
    CHECK(rel(kernel_J(0.5, 1, 0.3), 1.9743933043882351) < 1e-10);
    CHECK(rel(kernel_J(1.0, 1, 0.3), 1.6635180473290525) < 1e-10);
    CHECK(rel(kernel_J(4.0, 1, 0.3), 0.95235280605469341) < 1e-10);
    // J(0) = B(1-s, B+1) with B = (n-2)/2
    const double beta_oracle = std::tgamma(0.7) * std::tgamma(0.5) /
                               std::tgamma(1.2);
    CHECK(rel(kernel_J(0.0, 1, 0.3), beta_oracle) < 1e-10);
    CHECK(kernel_J(0.5, 1, 0.3) > kernel_J(1.0, 1, 0.3));
    CHECK(kernel_J(1.0, 1, 0.3) > kernel_J(4.0, 1, 0.3));
    const double st = 1e-6;
    const double fd =
        (kernel_J(1.0 + st, 1, 0.3) - kernel_J(1.0 - st, 1, 0.3)) / (2.0 * st);
    CHECK(rel(kernel_J_prime(1.0, 1, 0.3), fd) < 1e-6);
}

TEST_CASE("kernel K and its reported partials are one object") {
    CHECK(rel(kernel_K(1.0, 1.0, kDesk), 2.3525697837851545) < 1e-10);
    const KernelDerivatives kd = kernel_K_and_partials(0.7, 1.3, kDesk);
    CHECK(kd.K == doctest::Approx(kernel_K(0.7, 1.3, kDesk)).epsilon(1e-12));
    CHECK(kd.dK_dr > 0.0);
    CHECK(kd.dK_dt < 0.0);
    CHECK(kernel_K_theta_derivative(2.0, kDesk) > 0.0);
}

TEST_CASE("half-space closed forms obey the scaling laws exactly") {
    const ConstantSet& cs = desk();
    const double h = 0.37;
    const double closed = cs.a * cs.d_half * cs.iota *
                          std::pow(2.0 * h, 2.0 * kDesk.s - kDesk.n);
    CHECK(rel(half_space_robin(cs, h), closed) < 1e-13);
    CHECK(rel(half_space_robin(cs, 2.0 * h),
              std::pow(2.0, 2.0 * kDesk.s - kDesk.n) *
                  half_space_robin(cs, h)) < 1e-14);

    const Point p1 = make_point(0.3), p2 = make_point(0.9);
    CHECK(half_space_green(cs, p1, p2) > 0.0);
    CHECK(rel(half_space_green(cs, p1, p2), half_space_green(cs, p2, p1)) <
          1e-13);
    // vanishing toward the boundary
    const Point shallow = make_point(1e-4);
    CHECK(half_space_green(cs, shallow, p2) <
          0.02 * half_space_green(cs, p1, p2));

    // the image-kernel form is the fundamental solution minus its reflection
    const Point Z = make_point(0.8), Y = make_point(0.25);
    Point Ybar = Y;
    Ybar[0] = -Y[0];
    CHECK(rel(spectral_half_space_green(cs, Z, Y),
              gamma_fundamental(cs, Z, Y) - gamma_fundamental(cs, Z, Ybar)) <
          1e-13);
}

TEST_CASE("ball closed forms: symmetry, center value, radial growth") {
    const ConstantSet& cs = desk();
    const Point x = make_point(0.21), y = make_point(-0.4);
    CHECK(ball_green(cs, x, y) > 0.0);
    CHECK(rel(ball_green(cs, x, y), ball_green(cs, y, x)) < 1e-13);
    CHECK(rel(ball_robin(cs, make_point(0.0)), cs.a * cs.d_half * cs.iota) <
          1e-14);
    CHECK(rel(ball_robin(cs, make_point(0.0)), 0.36860239874564371) < 1e-10);
    CHECK(rel(ball_robin(cs, make_point(0.3)), 0.38277326815068896) < 1e-10);
    CHECK(rel(ball_robin(cs, make_point(0.5)), 0.41355535789648673) < 1e-10);
    CHECK(rel(ball_robin(cs, make_point(0.9)), 0.71623694118718539) < 1e-10);

    const FracParams p2{2, 0.4};
    const ConstantSet cs2 = resolve_constants(p2);
    CHECK(rel(ball_robin(cs2, make_point(0.0, 0.0)), 0.061929153158764814) <
          1e-9);
    // rotational invariance and radial monotonicity in two dimensions
    CHECK(rel(ball_robin(cs2, make_point(0.3, 0.0)),
              ball_robin(cs2, make_point(0.0, 0.3))) < 1e-12);
    CHECK(ball_robin(cs2, make_point(0.5, 0.0)) >
          ball_robin(cs2, make_point(0.3, 0.0)));
}

TEST_CASE("fundamental solution and Kelvin transform") {
    const ConstantSet& cs = desk();
    const Point x = make_point(0.21), y = make_point(-0.4);
    CHECK(rel(gamma_fundamental(cs, x, y),
              cs.a * std::pow(std::abs(x[0] - y[0]),
                              2.0 * kDesk.s - kDesk.n)) < 1e-14);
    CHECK_THROWS(gamma_fundamental(cs, x, x));

    // |x* - y*| = |x - y| / (|x| |y|) for the unit-sphere inversion
    const Point xs = point_inversion(x, 1), ys = point_inversion(y, 1);
    CHECK(rel(std::abs(xs[0] - ys[0]),
              std::abs(x[0] - y[0]) / (std::abs(x[0]) * std::abs(y[0]))) <
          1e-13);

    auto u = [](const Point& z) { return std::exp(-z[0] * z[0]); };
    auto ku = [&](const Point& z) { return kelvin_transform(u, z, kDesk); };
    CHECK(rel(kelvin_transform(ku, x, kDesk), u(x)) < 1e-13);
    CHECK_THROWS(kelvin_transform(u, make_point(0.0), kDesk));
}

TEST_CASE("mollified sources carry unit discrete mass") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 256);
    const Point xi = make_point(0.1);
    const Field md = mollified_delta(g, xi);
    double mass = 0.0, outside = 0.0;
    const int jc = g.nearest(xi);
    for (int j = 0; j < g.size(); ++j) {
        mass += md[j];
        CHECK(md[j] >= 0.0);
        if (std::abs(g.nodes[j][0] - g.nodes[jc][0]) > 2.0 * g.h + 1e-12)
            outside = std::max(outside, md[j]);
    }
    CHECK(rel(mass * g.cell_volume(), 1.0) < 1e-13);
    CHECK(outside == 0.0);
}

TEST_CASE("numerical Green data agrees with the eigen-series away from the source") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 256);
    const DiscreteOperator op = build_operator(dom, kDesk, g, OpKind::spectral);
    const Point xi = make_point(0.1);
    const Field gn = green_numeric(op, xi);
    const Field ge = green_eigen_series(op, xi);
    double sup = 0.0, diff = 0.0, interior_min = 1e300;
    for (int j = 0; j < g.size(); ++j) {
        interior_min = std::min(interior_min, gn[j]);
        if (std::abs(g.nodes[j][0] - xi[0]) < 6.0 * g.h) continue;
        sup = std::max(sup, std::abs(gn[j]));
        diff = std::max(diff, std::abs(gn[j] - ge[j]));
    }
    CHECK(interior_min > 0.0);
    // the mollifier occupies a 2h footprint; outside six cells the two
    // constructions differ by the mollification error alone (measured 0.019
    // at this resolution)
    CHECK(diff / sup < 0.04);

    const Field H = regular_part(op, xi, desk());
    const double diag = robin(op, xi, desk());
    CHECK(diag > 0.0);
    double near = 0.0;
    for (int j = 0; j < g.size(); ++j)
        if (std::abs(g.nodes[j][0] - xi[0]) < 6.0 * g.h)
            near = std::max(near, std::abs(H[j]));
    // the regular part stays bounded through the diagonal
    CHECK(near < 1.5 * diag + 1e-12);
}

TEST_CASE("zero-exterior Robin values converge to the ball closed form") {
    const ConstantSet& cs = desk();
    const DomainSpec ball = make_ball(1, make_point(0.0), 1.0);
    const Grid g = Grid::make(ball, 1000);
    const DiscreteOperator op = build_operator(ball, kDesk, g, OpKind::restricted);
    double worst = 0.0;
    for (double x : {0.0, 0.3, 0.5})
        worst = std::max(worst, rel(robin(op, make_point(x), cs),
                                    ball_robin(cs, make_point(x))));
    // measured 0.011 at a thousand cells, halving under refinement
    CHECK(worst < 0.03);
}

TEST_CASE("green tables preserve their sources and serialize") {
    const ConstantSet& cs = desk();
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 256);
    const DiscreteOperator op = build_operator(dom, kDesk, g, OpKind::spectral);
    std::vector<Point> samples;
    for (int k = 0; k < 5; ++k)
        samples.push_back(make_point(-0.6 + 1.2 * k / 4.0));
    const GreenTable tab = build_green_table(op, samples, cs);
    REQUIRE(tab.samples.size() == samples.size());
    REQUIRE(tab.G.size() == samples.size());
    REQUIRE(tab.H.size() == samples.size());
    REQUIRE(tab.robin_values.size() == samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        CHECK(static_cast<int>(tab.G[k].size()) == g.size());
        CHECK(tab.robin_values[k] ==
              doctest::Approx(robin(op, tab.samples[k], cs)).epsilon(1e-13));
    }

    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "fb_green_table_test.dsv";
    tab.write_dsv(path.string(), cs);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header.find('{') != std::string::npos);
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows > 0);
    fs::remove(path);
}
