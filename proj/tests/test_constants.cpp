#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "fracbubble/constants.hpp"
#include "fracbubble/profiles.hpp"

using namespace fracbubble;

namespace {
double rel(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}
const double kPi = std::acos(-1.0);

const ConstantSet& desk() {
    static const ConstantSet cs = resolve_constants(FracParams{1, 0.3});
    return cs;
}
} // namespace

// The library resolves every constant numerically; the Gamma-function closed
// forms below exist only here, as independent oracles.
TEST_CASE("resolved constants match their closed forms (n=1, s=0.3)") {
    const FracParams p{1, 0.3};
    const ConstantSet& cs = desk();
    const double q = p.q();

    const double b_oracle =
        std::pow(2.0, q) *
        std::pow(std::tgamma(0.5 * (p.n + 2.0 * p.s)) / std::tgamma(q),
                 (p.n - 2.0 * p.s) / (4.0 * p.s));
    CHECK(rel(cs.b, b_oracle) < 1e-9);

    const double a_oracle =
        std::tgamma(q) / (std::pow(4.0, p.s) * std::pow(kPi, 0.5 * p.n) *
                          std::tgamma(p.s));
    CHECK(rel(cs.a, a_oracle) < 1e-9);

    // int w^{p*+1} = pi b^5 and int w^{p*} = b^4 sqrt(pi) Gamma(0.3)/Gamma(0.8)
    CHECK(rel(cs.int_wp1, kPi * std::pow(b_oracle, 5.0)) < 1e-9);
    CHECK(rel(cs.alpha, std::pow(b_oracle, 4.0) * std::sqrt(kPi) *
                            std::tgamma(0.3) / std::tgamma(0.8)) < 1e-9);

    // int w^5 log w = pi b^5 log b - (q b^5) 2 pi log 2
    const double logw_oracle =
        kPi * std::pow(b_oracle, 5.0) * std::log(b_oracle) -
        q * std::pow(b_oracle, 5.0) * 2.0 * kPi * std::log(2.0);
    CHECK(rel(cs.int_wp1_logw, logw_oracle) < 1e-9);

    // iota = B(1-s, n/2)
    const double iota_oracle = std::tgamma(1.0 - p.s) *
                               std::tgamma(0.5 * p.n) /
                               std::tgamma(0.5 * p.n + 1.0 - p.s);
    CHECK(rel(cs.iota, iota_oracle) < 1e-9);
}

TEST_CASE("derived constants satisfy their defining identities exactly") {
    const FracParams p{1, 0.3};
    const ConstantSet& cs = desk();
    CHECK(rel(cs.omega, cs.int_wp1 / (p.p_star() + 1.0)) < 1e-14);
    CHECK(rel(cs.beta, cs.omega / (cs.alpha * cs.alpha)) < 1e-14);
    CHECK(rel(cs.energy_c, (p.s / p.n) * cs.int_wp1) < 1e-14);
    CHECK(cs.gamma_for(Criticality::supercritical) == cs.gamma);
    CHECK(cs.gamma_for(Criticality::subcritical) == -cs.gamma);
}

TEST_CASE("regression pins for the desk constant set") {
    const ConstantSet& cs = desk();
    CHECK(rel(cs.b, 0.72708980668232348) < 1e-10);
    CHECK(rel(cs.a, 0.57121624762440204) < 1e-10);
    CHECK(rel(cs.alpha, 1.2728801215123799) < 1e-10);
    CHECK(rel(cs.int_wp1, 0.63839599460619001) < 1e-10);
    CHECK(rel(cs.int_wp1_logw, -0.38046112679303945) < 1e-10);
    CHECK(rel(cs.iota, 2.5057955763406339) < 1e-10);
    CHECK(rel(cs.d_half, 0.25752059490412477) < 1e-10);
    CHECK(rel(cs.gamma, -0.060575506786372177) < 1e-10);
    CHECK(rel(cs.omega, 0.127679198921238) < 1e-12);
    CHECK(rel(cs.energy_c, 0.19151879838185701) < 1e-12);
}

TEST_CASE("kernel normalization matches the symbol closed form") {
    const double c1_oracle = std::pow(4.0, 0.3) * std::tgamma(0.5 + 0.3) /
                             (std::sqrt(kPi) * std::abs(std::tgamma(-0.3)));
    CHECK(rel(kernel_normalization(1, 0.3), c1_oracle) < 1e-10);
    const double c2_oracle = std::pow(4.0, 0.4) * std::tgamma(1.0 + 0.4) /
                             (kPi * std::abs(std::tgamma(-0.4)));
    CHECK(rel(kernel_normalization(2, 0.4), c2_oracle) < 1e-9);
}

TEST_CASE("the bubble profile solves its equation pointwise") {
    const FracParams p{1, 0.3};
    const ConstantSet& cs = desk();
    auto w = [&](double x) {
        return bubble_value(p, cs.b, BubbleParams{}, make_point(x));
    };
    CHECK(rel(frac_laplacian_pointwise_1d(p.s, w, 0.0),
              std::pow(w(0.0), p.p_star())) < 1e-11);
    CHECK(rel(frac_laplacian_pointwise_1d(p.s, w, 0.7),
              std::pow(w(0.7), p.p_star())) < 1e-7);
    CHECK(rel(frac_laplacian_radial_at_center(1, 0.3, w),
              std::pow(cs.b, p.p_star())) < 1e-11);
}

TEST_CASE("residual bookkeeping and serialization round trip") {
    const ConstantSet& cs = desk();
    CHECK_NOTHROW(cs.require_resolved());
    CHECK(!cs.residuals.empty());
    for (const auto& [name, r] : cs.residuals) {
        INFO(name);
        CHECK(std::abs(r) < cs.tol);
    }

    const std::string text = cs.to_json();
    const ConstantSet back = ConstantSet::from_json(text);
    CHECK(back.n == cs.n);
    CHECK(back.s == cs.s);
    CHECK(back.b == cs.b);
    CHECK(back.a == cs.a);
    CHECK(back.alpha == cs.alpha);
    CHECK(back.beta == cs.beta);
    CHECK(back.omega == cs.omega);
    CHECK(back.gamma == cs.gamma);
    CHECK(back.energy_c == cs.energy_c);
    CHECK(back.iota == cs.iota);
    CHECK(back.d_half == cs.d_half);
    CHECK(back.int_wp1 == cs.int_wp1);
    CHECK(back.int_wp1_logw == cs.int_wp1_logw);
    CHECK(back.residuals.size() == cs.residuals.size());

    // extra keys (a stamped hash, say) must not break parsing
    std::string extra = text;
    const auto brace = extra.find('{');
    extra.insert(brace + 1, "\"config_hash\":\"deadbeef\",");
    CHECK_NOTHROW(ConstantSet::from_json(extra));

    ConstantSet empty;
    CHECK_THROWS_AS(empty.require_resolved(), std::runtime_error);
}

TEST_CASE("parameter validation names the violated bound") {
    CHECK_THROWS_AS((FracParams{5, 0.3}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((FracParams{1, 1.5}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((FracParams{1, 0.6}).validate(), std::invalid_argument);
    CHECK_NOTHROW((FracParams{2, 0.6}).validate());
    CHECK(criticality_from_string("super") == Criticality::supercritical);
    CHECK(criticality_from_string("sub") == Criticality::subcritical);
    CHECK_THROWS_AS(criticality_from_string("sideways"),
                    std::invalid_argument);
    CHECK(crit_sign(Criticality::supercritical) == 1.0);
    CHECK(crit_sign(Criticality::subcritical) == -1.0);
}

TEST_CASE("two-dimensional constants resolve against the same oracles") {
    const FracParams p2{2, 0.4};
    const ConstantSet cs2 = resolve_constants(p2);
    const double b2_oracle =
        std::pow(2.0, p2.q()) *
        std::pow(std::tgamma(0.5 * (2.0 + 0.8)) / std::tgamma(p2.q()),
                 (2.0 - 0.8) / (4.0 * 0.4));
    CHECK(rel(cs2.b, b2_oracle) < 1e-9);
    // p* + 1 = 10/3 and w^{p*+1} = b^{10/3} (1+|x|^2)^{-2} integrates to pi
    CHECK(rel(cs2.int_wp1, kPi * std::pow(cs2.b, 10.0 / 3.0)) < 1e-9);
}
