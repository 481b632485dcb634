#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "ocs/errors.hpp"
#include "ocs/policy.hpp"

using namespace ocs;

namespace {
ModelParams P(double eps, double delta, double R, double beta = 0.1) {
    return ModelParams::from_normalized(eps, delta, beta, R);
}

const GSurface& threshold_surface() {
    static const GSurface s = build_surface(P(1, 2, 0.5));
    return s;
}
}  // namespace

TEST_CASE("consumption: closed-form cases") {
    CHECK(consumption(threshold_surface(), {1, 1, 0, 0}) == doctest::Approx(0.2).epsilon(1e-14));
    const GSurface cash = build_surface(P(1, 1, 0.5));
    CHECK(consumption(cash, {0, 1, 1, 0}) == doctest::Approx(0.125).epsilon(1e-12));
    const GSurface sell = build_surface(P(-1, 2, 0.5));
    CHECK(consumption(sell, {1, 1, 1, 0}) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(consumption(threshold_surface(), {1, 1, 1, 0}) == doctest::Approx(0.3585914008460653).epsilon(1e-9));
}

TEST_CASE("consumption: continuous across z* and sale normalisation") {
    const GSurface& s = threshold_surface();
    const double z = s.z_star;
    const double below = consumption(s, {1, 1, z * (1 - 1e-9), 0});
    const double above = consumption(s, {1, 1, z * (1 + 1e-9), 0});
    CHECK(below == doctest::Approx(above).epsilon(1e-6));
    // A state above the boundary sells down to z* in one block.
    const AgentState st{1, 1, 3 * z, 0};
    const double dtheta = immediate_sale_units(s, st);
    const AgentState after = after_initial_sale(s, st);
    CHECK(dtheta > 0);
    CHECK(after.theta == doctest::Approx(st.theta - dtheta).epsilon(1e-14));
    CHECK(after.x == doctest::Approx(st.x + st.y * dtheta).epsilon(1e-14));
    CHECK(after.ratio() == doctest::Approx(z).epsilon(1e-12));
    CHECK(dtheta == doctest::Approx(st.theta - st.theta * (z / (1 + z)) * ((1 + 3 * z) / (3 * z))).epsilon(1e-12));
    CHECK(value_function(s, st).value == doctest::Approx(value_function(s, after).value).epsilon(1e-12));
    CHECK(immediate_sale_units(s, {1, 1, 0.5 * z, 0}) == 0.0);
}

TEST_CASE("certainty equivalent") {
    const GSurface sell = build_surface(P(-1, 2, 0.5));
    CHECK(certainty_equivalent(sell, {1, 2, 3, 0}) == 6.0);
    const GSurface& s = threshold_surface();
    CHECK(certainty_equivalent(s, {1, 1, 0, 0}) == 0.0);
    // Large holding: p / theta tends to m(q*)^{R/(R-1)}.
    const double lim = std::pow(s.m_qstar, 0.5 / (0.5 - 1));
    CHECK(certainty_equivalent(s, {1, 1, 1e4, 0}) / 1e4 == doctest::Approx(lim).epsilon(1e-3));
    CHECK(certainty_equivalent(s, {1e-6, 1, 1, 0}) == doctest::Approx(lim).epsilon(1e-4));
    CHECK(certainty_equivalent(s, {0, 1, 1, 0}) == doctest::Approx(lim).epsilon(1e-14));
}

TEST_CASE("illiquidity cost") {
    const GSurface& s = threshold_surface();
    CHECK(illiquidity_cost(s, {1, 1, 0, 0}) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(illiquidity_cost(s, {1, 1, 1, 0}) == doctest::Approx(0.018238347589565627).epsilon(1e-9));
    // Merton problem ill-posed: R < 1 with a large Sharpe ratio.
    const GSurface bad = build_surface(P(2.2, 1.2, 0.5));
    CHECK(merton_baseline(bad.params).merton_coeff <= 0);
    CHECK_THROWS_AS(illiquidity_cost(bad, {1, 1, 1, 0}), MertonIllPosed);
    CHECK_FALSE(evaluate_policy(bad, {1, 1, 1, 0}).illiq_cost.has_value());
}

TEST_CASE("Merton baseline") {
    const MertonBaseline m = merton_baseline(P(1, 2, 0.5));
    CHECK(m.q_M == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.z_M == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.merton_coeff == doctest::Approx(0.2 - 0.01 * 0.5 / (2 * 0.4 * 0.25)).epsilon(1e-14));
    CHECK(merton_baseline(P(0, 2, 0.5)).q_M == 0.0);
    CHECK(std::isinf(merton_baseline(P(2, 2, 0.5)).z_M));
    CHECK(find_qstar(P(1, 2, 0.5)).q_star > m.q_M);
}

TEST_CASE("SDE coefficients") {
    const GSurface& s = threshold_surface();
    const double eta = s.params.eta(), z = s.z_star;
    const SdeCoefficients c0 = sde_coefficients(s, 0);
    CHECK(c0.Lambda == 0.0);
    CHECK(c0.Gamma == 0.0);
    CHECK(sde_coefficients(s, z).Gamma == doctest::Approx(eta * z).epsilon(1e-15));
    const SdeCoefficients r = reflected_sde_coefficients(s, z);
    CHECK(r.Lambda == 0.0);
    CHECK(r.Gamma == 0.0);
    for (int k = 1; k <= 100; ++k) CHECK(sde_coefficients(s, z * k / 100.0).Lambda > 0);
    CHECK_THROWS_AS(sde_coefficients(s, 1.01 * z), DomainError);
    CHECK_THROWS_AS(sde_coefficients(s, -0.1), DomainError);
}

TEST_CASE("ill-posed diagnostic") {
    const AgentState st{1, 1, 1, 0};
    const ModelParams strict = P(3.5, 2, 0.5);
    const double gap = strict.epsilon() - strict.ill_posed_threshold();
    CHECK(illposed_utility(strict, 0.5 * strict.beta() * gap, st).infinite);
    const ModelParams edge = P(3, 2, 0.5);
    for (double phi : {1.0, 0.1, 0.01}) {
        const ValueResult v = illposed_utility(edge, phi, st);
        CHECK(v.finite());
        CHECK(v.value == doctest::Approx(std::pow(phi, -0.5) / 0.25).epsilon(1e-12));
    }
    const ModelParams ok = P(1, 2, 0.5);
    const ValueResult v = illposed_utility(ok, 0.01, st);
    CHECK(v.finite());
    CHECK(v.value <= value_function(threshold_surface(), {0, 1, 1, 0}).value);
    CHECK_THROWS_AS(illposed_utility(edge, 0, st), DomainError);
    CHECK_THROWS_AS(illposed_utility(P(1, 2, 2), 0.1, st), RegimeError);
}

TEST_CASE("ill-posed surfaces refuse policy queries") {
    const GSurface ill = build_surface(P(3.5, 2, 0.5));
    CHECK_THROWS_AS(consumption(ill, {1, 1, 1, 0}), RegimeError);
    CHECK_THROWS_AS(certainty_equivalent(ill, {1, 1, 1, 0}), RegimeError);
    CHECK_THROWS_AS(evaluate_policy(ill, {1, 1, 1, 0}), RegimeError);
}

TEST_CASE("property: p > y theta in the non-degenerate regimes") {
    gen::Gen g(401);
    for (int i = 0; i < 10; ++i) {
        const GSurface s = build_surface(i % 2 ? g.threshold_params() : g.params_in(Regime::CashFirst));
        for (int k = 0; k < 30; ++k) {
            const AgentState st = g.state();
            const PolicyPoint pp = evaluate_policy(s, st);
            CHECK(pp.certainty_equiv > st.y * st.theta);
            CHECK(pp.consumption > 0);
            if (pp.illiq_cost) CHECK(*pp.illiq_cost > 0);
            CHECK((pp.immediate_sale_units > 0) == (st.ratio() > s.z_star));
        }
    }
}

TEST_CASE("consumption per unit wealth falls with wealth") {
    const GSurface& s = threshold_surface();
    double prev_c = 0, prev_ratio = HUGE_VAL;
    for (int k = 0; k <= 200; ++k) {
        const double x = (1 / s.z_star) * std::pow(100 * s.z_star, k / 200.0);
        const double c = consumption(s, {x, 1, 1, 0});
        CHECK(c > prev_c);
        CHECK(c / x < prev_ratio);
        prev_c = c;
        prev_ratio = c / x;
    }
}
