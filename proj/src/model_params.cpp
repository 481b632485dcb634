#include "ocs/model_params.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ocs/errors.hpp"

namespace ocs {

std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::SellImmediately: return "SellImmediately";
        case Regime::ThresholdSale: return "ThresholdSale";
        case Regime::CashFirst: return "CashFirst";
        case Regime::IllPosed: return "IllPosed";
    }
    return "Unknown";
}

Regime regime_from_string(std::string_view s) {
    if (s == "SellImmediately") return Regime::SellImmediately;
    if (s == "ThresholdSale") return Regime::ThresholdSale;
    if (s == "CashFirst") return Regime::CashFirst;
    if (s == "IllPosed") return Regime::IllPosed;
    throw ParameterError("unknown regime token '" + std::string(s) + "'");
}

namespace {

void check_common(double beta, double R) {
    if (!std::isfinite(beta) || beta <= 0.0) {
        throw ParameterError("beta must be positive and finite, got " + std::to_string(beta));
    }
    if (!std::isfinite(R) || R <= 0.0) {
        throw ParameterError("R must be positive and finite, got " + std::to_string(R));
    }
    if (R == 1.0) {
        throw ParameterError("R = 1 (logarithmic utility) is not supported");
    }
}

}  // namespace

ModelParams::ModelParams(double alpha, double eta, double beta, double R, double epsilon,
                         double delta_sq)
    : alpha_(alpha), eta_(eta), beta_(beta), R_(R), epsilon_(epsilon), delta_sq_(delta_sq) {}

ModelParams ModelParams::from_market(double alpha, double eta, double beta, double R) {
    check_common(beta, R);
    if (!std::isfinite(eta) || eta <= 0.0) {
        throw ParameterError("eta must be positive and finite, got " + std::to_string(eta));
    }
    if (!std::isfinite(alpha)) throw ParameterError("alpha must be finite");
    return ModelParams(alpha, eta, beta, R, alpha / beta, eta * eta / beta);
}

ModelParams ModelParams::from_normalized(double epsilon, double delta, double beta, double R) {
    check_common(beta, R);
    if (!std::isfinite(delta) || delta <= 0.0) {
        throw ParameterError("delta must be positive and finite, got " + std::to_string(delta));
    }
    if (!std::isfinite(epsilon)) throw ParameterError("epsilon must be finite");
    // Keep the normalised pair exact and derive the market pair from it.
    return ModelParams(epsilon * beta, delta * std::sqrt(beta), beta, R, epsilon, delta * delta);
}

double ModelParams::delta() const noexcept { return std::sqrt(delta_sq_); }

double ModelParams::ill_posed_threshold() const noexcept {
    if (R_ > 1.0) return std::numeric_limits<double>::infinity();
    return 0.5 * delta_sq_ * R_ + 1.0 / (1.0 - R_);
}

double ModelParams::g_zero() const noexcept { return std::pow(R_ / beta_, R_); }

Regime classify(const ModelParams& p) noexcept {
    const double eps = p.epsilon();
    if (eps <= 0.0) return Regime::SellImmediately;
    if (p.R() < 1.0 && eps >= p.ill_posed_threshold()) return Regime::IllPosed;
    if (eps >= p.cash_first_threshold()) return Regime::CashFirst;
    return Regime::ThresholdSale;
}

double eval_m(double q, const ModelParams& p) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("m(q) requires q in [0,1]");
    return m_raw(q, p.epsilon(), p.delta_sq(), p.R());
}

double eval_ell(double q, const ModelParams& p) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("l(q) requires q in [0,1]");
    return ell_raw(q, p.epsilon(), p.delta_sq(), p.R());
}

void AgentState::validate() const {
    if (!(std::isfinite(x) && x >= 0.0)) throw DomainError("cash x must be finite and >= 0");
    if (!(std::isfinite(y) && y > 0.0)) throw DomainError("price y must be finite and > 0");
    if (!(std::isfinite(theta) && theta >= 0.0)) {
        throw DomainError("holding theta must be finite and >= 0");
    }
    if (!(std::isfinite(t) && t >= 0.0)) throw DomainError("time t must be finite and >= 0");
    if (x == 0.0 && theta == 0.0) throw DomainError("state x = 0, theta = 0 has no wealth");
}

double AgentState::ratio() const noexcept {
    if (theta == 0.0) return 0.0;
    if (x == 0.0) return std::numeric_limits<double>::infinity();
    return y * theta / x;
}

}  // namespace ocs
