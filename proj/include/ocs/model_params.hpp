#pragma once

#include <string>
#include <string_view>

namespace ocs {

/// Optimal-behaviour regime of the sell-only consumption problem.
enum class Regime {
    SellImmediately,  ///< eps <= 0: liquidate the whole holding at t = 0.
    ThresholdSale,    ///< finite critical ratio z*; sell at the boundary.
    CashFirst,        ///< z* = inf; consume cash, then finance from sales.
    IllPosed,         ///< R < 1 and eps large: the value is infinite.
};

std::string_view to_string(Regime r) noexcept;
Regime regime_from_string(std::string_view s);

/// Market and preference parameters together with the normalised pair
/// (epsilon, delta^2) = (alpha / beta, eta^2 / beta).
class ModelParams {
public:
    /// Market form: drift alpha, volatility eta, discount beta, risk aversion R.
    static ModelParams from_market(double alpha, double eta, double beta, double R);
    /// Normalised form: epsilon = alpha / beta, delta = eta / sqrt(beta).
    static ModelParams from_normalized(double epsilon, double delta, double beta, double R);

    double alpha() const noexcept { return alpha_; }
    double eta() const noexcept { return eta_; }
    double beta() const noexcept { return beta_; }
    double R() const noexcept { return R_; }
    double epsilon() const noexcept { return epsilon_; }
    double delta_sq() const noexcept { return delta_sq_; }
    double delta() const noexcept;

    /// delta^2 R: the boundary between threshold sale and cash-first.
    double cash_first_threshold() const noexcept { return delta_sq_ * R_; }
    /// delta^2 R / 2 + 1 / (1 - R); +inf when R > 1 (never ill-posed).
    double ill_posed_threshold() const noexcept;

    /// (R / beta)^R, the value of g at z = 0.
    double g_zero() const noexcept;

private:
    ModelParams(double alpha, double eta, double beta, double R, double epsilon, double delta_sq);

    double alpha_;
    double eta_;
    double beta_;
    double R_;
    double epsilon_;
    double delta_sq_;
};

/// Regime classification. Equality at the ill-posed threshold is IllPosed.
Regime classify(const ModelParams& p) noexcept;

/// m(q) = 1 - eps (1-R) q + (delta^2/2) R (1-R) q^2 on [0, 1].
double eval_m(double q, const ModelParams& p);
/// l(q) = m(q) + q (1-q) (delta^2/2) (1-R) on [0, 1].
double eval_ell(double q, const ModelParams& p);

// Unchecked versions for inner loops; q may lie slightly outside [0, 1].
inline double m_raw(double q, double eps, double dsq, double R) noexcept {
    return 1.0 - eps * (1.0 - R) * q + 0.5 * dsq * R * (1.0 - R) * q * q;
}
inline double ell_raw(double q, double eps, double dsq, double R) noexcept {
    return m_raw(q, eps, dsq, R) + q * (1.0 - q) * 0.5 * dsq * (1.0 - R);
}

/// Cash x >= 0, price y > 0, holdings theta >= 0 at time t >= 0.
struct AgentState {
    double x = 0.0;
    double y = 1.0;
    double theta = 0.0;
    double t = 0.0;

    /// Throws DomainError when any component is out of range.
    void validate() const;
    /// y theta / x; +inf when x = 0 and theta > 0; 0 when theta = 0.
    double ratio() const noexcept;
};

}  // namespace ocs
