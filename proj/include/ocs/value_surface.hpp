#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ocs/model_params.hpp"
#include "ocs/monotone_cubic.hpp"
#include "ocs/ode_core.hpp"

namespace ocs {

struct SurfaceOptions {
    NCurveOptions ode;
    double u_span = 40.0;       ///< below u_ref - u_span, h is clamped to 1
    double tail_match = 1e-4;   ///< required asymptotic match at the tail cut (cash first)
};

/// Values and derivatives of g at one point; `extrapolated` is set when
/// the point lies outside the constructed grid and an asymptote was used.
struct GValue {
    double g = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    bool extrapolated = false;
};

/// One-sided limits of g, g', g'' at z* (threshold case only).
struct SmoothFit {
    double g_left = 0.0, g_right = 0.0;
    double g1_left = 0.0, g1_right = 0.0;
    double g2_left = 0.0, g2_right = 0.0;
    double max_rel_gap() const;
};

/// Value surface g(z) with V(x, y, theta, t) = e^{-beta t} x^{1-R} g(y theta / x) / (1 - R).
///
/// In the non-degenerate regimes g(z) = (R/beta)^R h(ln z) where h solves
/// h' = (1-R) h W(h), W being the inverse of N from the n curve.
struct GSurface {
    Regime regime = Regime::ThresholdSale;
    ModelParams params = ModelParams::from_normalized(1.0, 2.0, 0.1, 0.5);
    std::optional<NCurve> ncurve;

    double q_star = 0.0;
    double z_star = 0.0;  ///< +inf in CashFirst
    double u_star = 0.0;  ///< ln z* (ThresholdSale)
    double h_star = 1.0;
    double m_qstar = 1.0;
    double m_one = 1.0;
    double g_at_zero = 1.0;  ///< (R/beta)^R

    std::vector<std::pair<double, double>> h_grid;      ///< (u, h(u))
    std::vector<std::pair<double, double>> gamma_grid;  ///< (v, gamma(v)), CashFirst only

    MonotoneCubic W_interp;  ///< q as a function of v = N(q), knots ascending in v
    MonotoneCubic h_interp;  ///< h as a function of u
    double u_min = 0.0;      ///< bottom of the h grid
    double u_max = 0.0;      ///< top of the h grid
    double u_floor = 0.0;    ///< clamp point for h -> 1
    double below_rate = 0.0; ///< h - 1 ~ (h0 - 1) e^{rate (u - u_min)} below the grid
    double tail_mismatch = 0.0;
    std::optional<SmoothFit> smooth_fit;

    bool has_grid() const { return !h_interp.empty(); }
};

GSurface build_case2_surface(const ModelParams& p, const SurfaceOptions& opts = {});
GSurface build_case3_surface(const ModelParams& p, const SurfaceOptions& opts = {});
/// Dispatches on the regime. SellImmediately and IllPosed surfaces carry
/// no grid; the former uses closed forms, the latter only signals +inf.
GSurface build_surface(const ModelParams& p, const SurfaceOptions& opts = {});

/// W = N^{-1}; domain errors outside N's range (the case-3 power-law tail
/// beyond the grid is allowed).
double eval_W(const GSurface& s, double v);
/// w(v) = v (1 - R) W(v).
double eval_w(const GSurface& s, double v);
/// w'(v) from the w ODE, written through q = W(v) so that it stays finite at v = 1.
double eval_w_prime(const GSurface& s, double v);

/// h(u) and its first two derivatives in u.
struct HValue {
    double h = 1.0;
    double h1 = 0.0;
    double h2 = 0.0;
    bool extrapolated = false;
};
HValue eval_h(const GSurface& s, double u);

GValue eval_g_all(const GSurface& s, double z);
double eval_g(const GSurface& s, double z);
double eval_g1(const GSurface& s, double z);
double eval_g2(const GSurface& s, double z);

/// g(z) - z g'(z) / (1 - R), evaluated as (R/beta)^R h (1 - W(h)) so that it
/// keeps full relative accuracy where the two terms nearly cancel (z -> inf).
double eval_g_reduced(const GSurface& s, double z);

/// Extended real: `infinite` means the value is +inf (ill-posed problem).
struct ValueResult {
    double value = 0.0;
    bool infinite = false;
    bool finite() const { return !infinite; }
};

ValueResult value_function(const GSurface& s, const AgentState& st);

/// HJB residual of the interior equation divided by beta (R/beta)^R:
///   (h - w/(1-R))^{1-1/R} - h + eps w + (delta^2/2) z^2 g'' / (R/beta)^R
/// with g'' taken by central differences of eval_g1, so it does not reuse the
/// w-ODE identity that eval_g2 relies on.
double hjb_residual(const GSurface& s, double z);

nlohmann::json surface_to_json(const GSurface& s);

}  // namespace ocs
