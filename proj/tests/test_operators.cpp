#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "fracbubble/domain.hpp"
#include "fracbubble/operators.hpp"

using namespace fracbubble;

namespace {
double rel(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

double sup_diff(const Field& u, const Field& v) {
    double d = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j)
        d = std::max(d, std::abs(u[j] - v[j]));
    return d;
}

const FracParams kDesk{1, 0.3};
} // namespace

TEST_CASE("cell-centered grids carry the advertised geometry") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 256);
    CHECK(g.nx == 256);
    CHECK(g.size() == 256);
    CHECK(g.h == doctest::Approx(2.0 / 256).epsilon(1e-15));
    CHECK(g.nodes.front()[0] ==
          doctest::Approx(-1.0 + 0.5 * g.h).epsilon(1e-14));
    for (int j = 1; j < g.size(); ++j)
        CHECK(g.nodes[j][0] > g.nodes[j - 1][0]);
    CHECK(g.nearest(g.nodes[17]) == 17);
    CHECK(g.cell_volume() == doctest::Approx(g.h).epsilon(1e-15));

    CHECK_THROWS_AS(Grid::make(dom, 3), std::invalid_argument);
    // 2-D grids require square cells
    const DomainSpec rect = make_rectangle(0.0, 1.0, 0.0, 2.0);
    CHECK_THROWS_AS(Grid::make(rect, 32), std::invalid_argument);
}

TEST_CASE("spectral operator reproduces its own eigenpairs") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 128);
    const DiscreteOperator op = build_operator(dom, kDesk, g, OpKind::spectral);
    const Eigen::VectorXd lam = op.fractional_spectrum();
    for (int k : {0, 3, 20, 100}) {
        Field e(g.size());
        for (int j = 0; j < g.size(); ++j) e[j] = op.eigenfunction(k, j);
        const Field Ae = op.apply(e);
        double worst = 0.0;
        for (int j = 0; j < g.size(); ++j)
            worst = std::max(worst, std::abs(Ae[j] - lam[k] * e[j]));
        CHECK(worst / lam[k] < 1e-10);
    }
    // fractional eigenvalues are the base ones to the power s, ascending
    for (int k = 0; k < op.spectral_count; ++k) {
        CHECK(rel(lam[k], std::pow(op.eigenvalues_base[k], kDesk.s)) < 1e-13);
        if (k > 0) CHECK(lam[k] > lam[k - 1]);
    }
    // grid orthonormality
    Field e3(g.size()), e7(g.size());
    for (int j = 0; j < g.size(); ++j) {
        e3[j] = op.eigenfunction(3, j);
        e7[j] = op.eigenfunction(7, j);
    }
    CHECK(std::abs(op.inner(e3, e7)) < 1e-12);
    CHECK(rel(op.inner(e3, e3), 1.0) < 1e-12);
}

TEST_CASE("sine transforms invert exactly on the kept mode span") {
    std::vector<double> coef(255, 0.0), u, coef2;
    coef[3] = 1.0;
    coef[100] = -0.5;
    coef[254] = 0.25;
    dst2_backward(coef, u);
    dst2_forward(u, coef2);
    double d = 0.0;
    for (std::size_t k = 0; k < coef.size(); ++k)
        d = std::max(d, std::abs(coef[k] - coef2[k]));
    CHECK(d < 1e-12);

    // a general vector loses exactly its alternating component, the one mode
    // the truncated basis does not carry
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> v(256), back;
    for (auto& x : v) x = U(rng);
    dst2_forward(v, coef);
    dst2_backward(coef, back);
    double mean_alt = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j)
        mean_alt += (j % 2 == 0 ? v[j] : -v[j]);
    mean_alt /= static_cast<double>(v.size());
    double worst = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double expect = v[j] - (j % 2 == 0 ? mean_alt : -mean_alt);
        worst = std::max(worst, std::abs(back[j] - expect));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("parallel kernels agree bitwise with their serial references") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> u(512), cpar, cser;
    for (auto& x : u) x = U(rng);
    dst2_forward(u, cpar);
    dst2_forward_serial(u, cser);
    for (std::size_t k = 0; k < cpar.size(); ++k) CHECK(cpar[k] == cser[k]);

    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 200);
    const DiscreteOperator op =
        build_operator(dom, kDesk, g, OpKind::restricted);
    const Eigen::MatrixXd As = assemble_restricted_serial(dom, kDesk, g);
    CHECK((op.A - As).cwiseAbs().maxCoeff() == 0.0);

    // rebuilding yields the same matrix bit for bit
    const DiscreteOperator op2 =
        build_operator(dom, kDesk, g, OpKind::restricted);
    CHECK((op.A - op2.A).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spectral apply and solve invert each other on smooth fields") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 256);
    const DiscreteOperator op = build_operator(dom, kDesk, g, OpKind::spectral);
    Field f(g.size());
    for (int j = 0; j < g.size(); ++j)
        f[j] = std::exp(-2.0 * g.nodes[j][0] * g.nodes[j][0]) *
               std::cos(3.0 * g.nodes[j][0]);
    CHECK(sup_diff(op.solve(op.apply(f)), f) < 1e-10);

    // the annihilated top mode: the 2h-wavelength vector maps to zero
    Field alt(g.size());
    for (int j = 0; j < g.size(); ++j) alt[j] = (j % 2 == 0) ? 1.0 : -1.0;
    const Field Aalt = op.apply(alt);
    double sup = 0.0;
    for (double v : Aalt) sup = std::max(sup, std::abs(v));
    CHECK(sup < 1e-8);
}

TEST_CASE("restricted operator round trips and keeps its matrix structure") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 200);
    const DiscreteOperator op =
        build_operator(dom, kDesk, g, OpKind::restricted);
    CHECK(rel(op.c_ns, kernel_normalization(1, 0.3)) < 1e-14);

    Field f(g.size());
    for (int j = 0; j < g.size(); ++j)
        f[j] = std::exp(-2.0 * g.nodes[j][0] * g.nodes[j][0]);
    CHECK(sup_diff(op.solve(op.apply(f)), f) < 1e-10);

    CHECK((op.A - op.A.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    // M-matrix sign pattern: positive diagonal, nonpositive off-diagonal
    for (int i = 0; i < op.A.rows(); ++i) {
        CHECK(op.A(i, i) > 0.0);
        for (int j = 0; j < op.A.cols(); ++j)
            if (i != j) CHECK(op.A(i, j) <= 0.0);
    }
}

TEST_CASE("exterior data stays below its boundary bound") {
    const DomainSpec dom = make_interval(-1.0, 1.0);
    const Grid g = Grid::make(dom, 200);
    const DiscreteOperator op =
        build_operator(dom, kDesk, g, OpKind::restricted);
    const auto mp = max_principle_check(
        op, [](const Point& x) { return std::exp(-x[0] * x[0]); });
    CHECK(mp.passed);
    CHECK(mp.ratio <= 1.0 + 1e-12);
    CHECK(mp.sup_u <= mp.sup_g * (1.0 + 1e-12));
}

TEST_CASE("one-dimensional balls and intervals are the same spectral problem") {
    const DomainSpec ball = make_ball(1, make_point(0.2), 0.7);
    const DomainSpec ivl = make_interval(-0.5, 0.9);
    const Grid gb = Grid::make(ball, 128), gi = Grid::make(ivl, 128);
    const DiscreteOperator ob = build_operator(ball, kDesk, gb, OpKind::spectral);
    const DiscreteOperator oi = build_operator(ivl, kDesk, gi, OpKind::spectral);
    Field f(gb.size());
    for (int j = 0; j < gb.size(); ++j)
        f[j] = std::exp(-3.0 * gb.nodes[j][0] * gb.nodes[j][0]);
    CHECK(sup_diff(ob.apply(f), oi.apply(f)) < 1e-13);
}

TEST_CASE("capability errors are loud") {
    const DomainSpec half = make_half_space(10.0, 2.0);
    const Grid gh = Grid::make(half, 64);
    CHECK_THROWS_AS(build_operator(half, kDesk, gh, OpKind::spectral),
                    std::invalid_argument);

    const DomainSpec ball = make_ball(1, make_point(0.0), 1.0);
    const Grid gb = Grid::make(ball, 64);
    CHECK_THROWS_AS(build_operator(ball, kDesk, gb, OpKind::whole_space),
                    std::invalid_argument);

    const DomainSpec ivl = make_interval(-4.0, 4.0);
    const Grid gi = Grid::make(ivl, 200);
    const DiscreteOperator ws =
        build_operator(ivl, kDesk, gi, OpKind::whole_space);
    Field f(gi.size(), 1.0);
    CHECK_THROWS_AS(ws.solve(f), std::invalid_argument);
    CHECK_NOTHROW(ws.apply(f));
}

TEST_CASE("two-dimensional spectral modes are eigenfields too") {
    const FracParams p2{2, 0.4};
    const DomainSpec rect = make_rectangle(0.0, 1.0, 0.0, 1.0);
    const Grid g = Grid::make(rect, 24);
    const DiscreteOperator op = build_operator(rect, p2, g, OpKind::spectral);
    const Eigen::VectorXd lam = op.fractional_spectrum();
    for (int k : {0, 5}) {
        Field e(g.size());
        for (int j = 0; j < g.size(); ++j) e[j] = op.eigenfunction(k, j);
        const Field Ae = op.apply(e);
        double worst = 0.0;
        for (int j = 0; j < g.size(); ++j)
            worst = std::max(worst, std::abs(Ae[j] - lam[k] * e[j]));
        CHECK(worst / lam[k] < 1e-10);
    }

    // restricted solve(apply) is an exact inverse pair on any fixed grid
    const DiscreteOperator opr = build_operator(rect, p2, g, OpKind::restricted);
    Field f(g.size());
    for (int j = 0; j < g.size(); ++j) {
        const Point& x = g.nodes[j];
        f[j] = std::sin(3.0 * x[0]) * std::exp(-x[1]);
    }
    CHECK(sup_diff(opr.solve(opr.apply(f)), f) < 1e-9);
}
