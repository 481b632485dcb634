#pragma once

#include <optional>

#include "ocs/model_params.hpp"
#include "ocs/value_surface.hpp"

namespace ocs {

struct PolicyPoint {
    double consumption = 0.0;
    double certainty_equiv = 0.0;
    std::optional<double> illiq_cost;  ///< empty when the liquid benchmark is undefined
    double immediate_sale_units = 0.0;
    double z_ratio = 0.0;
};

struct MertonBaseline {
    double q_M;
    double z_M;           ///< +inf when eps >= delta^2 R
    double merton_coeff;  ///< beta/R - alpha^2 (1-R) / (2 eta^2 R^2)
};

struct SdeCoefficients {
    double Lambda;
    double Gamma;
};

/// Units sold at time zero: the whole holding in SellImmediately, the block
/// that brings y theta / x back to z* in ThresholdSale, otherwise zero.
double immediate_sale_units(const GSurface& s, const AgentState& st);

/// State after the time-zero sale (identity when no sale is due).
AgentState after_initial_sale(const GSurface& s, const AgentState& st);

/// (g - z g'/(1-R))^{-1/R}: optimal consumption per unit of cash at ratio z.
double consumption_per_cash(const GSurface& s, double z);

double consumption(const GSurface& s, const AgentState& st);
double certainty_equivalent(const GSurface& s, const AgentState& st);
double illiquidity_cost(const GSurface& s, const AgentState& st);
MertonBaseline merton_baseline(const ModelParams& p);

/// Lambda(z) = alpha z + z c(z), Gamma(z) = eta z on [0, z*].
SdeCoefficients sde_coefficients(const GSurface& s, double z);
/// Reflected coordinate j = z* - z.
SdeCoefficients reflected_sde_coefficients(const GSurface& s, double j);

/// Expected utility of the sale-financed strategy C = phi Y Theta,
/// Theta = theta0 e^{-phi t}; infinite when the growth rate is non-negative.
ValueResult illposed_utility(const ModelParams& p, double phi, const AgentState& initial);

PolicyPoint evaluate_policy(const GSurface& s, const AgentState& st);

}  // namespace ocs
