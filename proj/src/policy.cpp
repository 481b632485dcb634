#include "ocs/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocs/errors.hpp"

namespace ocs {

namespace {

void reject_illposed(const GSurface& s, const char* what) {
    if (s.regime == Regime::IllPosed) {
        throw RegimeError(std::string(what) + " is not defined: the value function is infinite");
    }
}

}  // namespace

double immediate_sale_units(const GSurface& s, const AgentState& st) {
    st.validate();
    if (st.theta == 0.0) return 0.0;
    switch (s.regime) {
        case Regime::SellImmediately: return st.theta;
        case Regime::ThresholdSale: {
            if (st.x > 0.0 && st.y * st.theta / st.x <= s.z_star) return 0.0;
            // Keep theta0 (z*/(1+z*)) ((1+z)/z) units; at x = 0 the last factor is 1.
            const double keep_frac =
                st.x > 0.0 ? s.q_star * (st.x + st.y * st.theta) / (st.y * st.theta) : s.q_star;
            return st.theta * (1.0 - keep_frac);
        }
        case Regime::CashFirst:
        case Regime::IllPosed: return 0.0;
    }
    return 0.0;
}

AgentState after_initial_sale(const GSurface& s, const AgentState& st) {
    const double sold = immediate_sale_units(s, st);
    if (sold == 0.0) return st;
    AgentState out = st;
    out.theta = st.theta - sold;
    out.x = st.x + st.y * sold;
    if (s.regime == Regime::SellImmediately) out.theta = 0.0;
    return out;
}

double consumption_per_cash(const GSurface& s, double z) {
    reject_illposed(s, "consumption");
    const double R = s.params.R();
    if (z == 0.0) return s.params.beta() / R;
    return std::pow(eval_g_reduced(s, z), -1.0 / R);
}

double consumption(const GSurface& s, const AgentState& st) {
    reject_illposed(s, "consumption");
    st.validate();
    const ModelParams& p = s.params;
    const double b_over_R = p.beta() / p.R();
    if (s.regime == Regime::SellImmediately) return b_over_R * (st.x + st.y * st.theta);
    if (st.theta == 0.0) return b_over_R * st.x;
    const AgentState a = after_initial_sale(s, st);
    if (a.x == 0.0) return a.y * a.theta * b_over_R * s.m_one;  // CashFirst boundary
    return a.x * consumption_per_cash(s, a.y * a.theta / a.x);
}

double certainty_equivalent(const GSurface& s, const AgentState& st) {
    reject_illposed(s, "the certainty equivalent");
    st.validate();
    const double yt = st.y * st.theta;
    if (s.regime == Regime::SellImmediately) return yt;
    if (st.theta == 0.0) return 0.0;
    const double R = s.params.R();
    if (st.x == 0.0) return std::pow(s.m_qstar, R / (R - 1.0)) * yt;
    const double ratio = eval_g(s, yt / st.x) / s.g_at_zero;
    return st.x * std::expm1(std::log(ratio) / (1.0 - R));
}

MertonBaseline merton_baseline(const ModelParams& p) {
    const double eps = p.epsilon();
    const double dR = p.delta_sq() * p.R();
    const double R = p.R();
    MertonBaseline mb;
    mb.q_M = eps / dR;
    mb.z_M = eps < dR ? eps / (dR - eps) : std::numeric_limits<double>::infinity();
    mb.merton_coeff =
        p.beta() / R - p.alpha() * p.alpha() * (1.0 - R) / (2.0 * p.eta() * p.eta() * R * R);
    return mb;
}

double illiquidity_cost(const GSurface& s, const AgentState& st) {
    if (s.regime != Regime::ThresholdSale && s.regime != Regime::CashFirst) {
        throw RegimeError("illiquidity cost needs ThresholdSale or CashFirst");
    }
    st.validate();
    const double K = merton_baseline(s.params).merton_coeff;
    if (!(K > 0.0)) throw MertonIllPosed("liquid Merton problem is ill-posed (coefficient <= 0)");
    const double R = s.params.R();
    // V_L(x - p*, ...) = V_I(x, ...) with V_L = (x + y theta)^{1-R} K^{-R} / (1-R).
    AgentState t0 = st;
    t0.t = 0.0;
    const double vi = value_function(s, t0).value;
    return st.x + st.y * st.theta - std::pow((1.0 - R) * vi, 1.0 / (1.0 - R)) * std::pow(K, R / (1.0 - R));
}

SdeCoefficients sde_coefficients(const GSurface& s, double z) {
    if (s.regime != Regime::ThresholdSale) throw RegimeError("SDE coefficients need ThresholdSale");
    const double tol = 1e-12 * std::max(1.0, s.z_star);
    if (!(z >= -tol && z <= s.z_star + tol)) throw DomainError("z outside [0, z*]");
    z = std::clamp(z, 0.0, s.z_star);
    const ModelParams& p = s.params;
    if (z == 0.0) return {0.0, 0.0};
    return {p.alpha() * z + z * consumption_per_cash(s, z), p.eta() * z};
}

SdeCoefficients reflected_sde_coefficients(const GSurface& s, double j) {
    if (s.regime != Regime::ThresholdSale) throw RegimeError("SDE coefficients need ThresholdSale");
    return sde_coefficients(s, s.z_star - j);
}

ValueResult illposed_utility(const ModelParams& p, double phi, const AgentState& initial) {
    if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("phi must be positive and finite");
    const double R = p.R();
    if (!(R < 1.0)) throw RegimeError("the sale-financed strategy diagnostic needs R < 1");
    initial.validate();
    if (!(initial.theta > 0.0)) throw DomainError("the diagnostic needs theta0 > 0");
    const double A = p.epsilon() - 0.5 * p.delta_sq() * R - 1.0 / (1.0 - R);
    const double rate = p.beta() * (1.0 - R) * (A - phi / p.beta());
    if (rate >= 0.0) return {std::numeric_limits<double>::infinity(), true};
    const double c0 = phi * initial.y * initial.theta;
    return {std::pow(c0, 1.0 - R) / (1.0 - R) * (-1.0 / rate), false};
}

PolicyPoint evaluate_policy(const GSurface& s, const AgentState& st) {
    reject_illposed(s, "the policy");
    st.validate();
    PolicyPoint pp;
    pp.consumption = consumption(s, st);
    pp.certainty_equiv = certainty_equivalent(s, st);
    pp.immediate_sale_units = immediate_sale_units(s, st);
    pp.z_ratio = st.ratio();
    if (s.regime == Regime::ThresholdSale || s.regime == Regime::CashFirst) {
        try {
            pp.illiq_cost = illiquidity_cost(s, st);
        } catch (const MertonIllPosed&) {
            pp.illiq_cost.reset();
        }
    }
    return pp;
}

}  // namespace ocs
