#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ocs/model_params.hpp"

namespace ocs {

enum class Termination {
    CrossedM,        ///< n met m at q* < 1.
    ReachedOne,      ///< no crossing; integrated up to the tail cut near q = 1.
    AbsorbedAtZero,  ///< n hit zero (ill-posed parameters only).
};

std::string_view to_string(Termination t) noexcept;

/// One accepted sample of the n curve.
struct NCurvePoint {
    double q = 0.0;
    double n = 1.0;
    double m = 1.0;
    double ell = 1.0;
    double N = 1.0;  ///< n^{-R} (1-q)^{R-1}
    double U = 0.0;  ///< integral from q0 of (delta^2/2)(1-R)/(l - n); du/dq along h.
    double S = 0.0;  ///< integral from q0 of (1-q)/(l - n)
};

struct NCurveOptions {
    double q0 = 1e-6;             ///< series start offset, in (0, 1e-4]
    double max_step = 5e-4;       ///< largest step in q
    double max_log_step = 5e-3;   ///< largest step in ln q
    double tol = 1e-10;           ///< relative tolerance of the embedded pair
    double tail_s = 1e-6;         ///< stop at q = 1 - tail_s when no crossing occurs
    double record_spacing = 2.5e-3; ///< minimum log-spacing of recorded points near q = 0 and q = 1
    double denominator_floor = 1e-14;
};

/// Dense solution record of the n ODE on [0, q_end].
struct NCurve {
    ModelParams params;
    std::vector<NCurvePoint> grid;  ///< grid[0] is the exact point q = 0, n = N = 1
    double q_star = 0.0;
    double h_star = 1.0;  ///< N(q*); for ReachedOne, N at the tail cut
    double kappa = 0.0;   ///< N'(0+) = (1 - R) - R n'(0)
    double chi0 = 0.0;    ///< n'(0)
    Termination termination = Termination::CrossedM;
    double bracket_lo = 0.0;  ///< crossing refinement interval
    double bracket_hi = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    double q_end() const { return grid.back().q; }
    const NCurvePoint& back() const { return grid.back(); }
};

/// n'(0): smaller root of Phi for R < 1, larger root for R > 1, where
/// Phi(chi) = chi^2 - (1-R)(delta^2/2 - eps + 1/R) chi - eps (1-R)^2 / R.
double initial_slope(const ModelParams& p);

/// Right-hand side n'(q) of the n ODE.
double n_prime(double q, double n, const ModelParams& p);

/// N'(q) = (delta^2/2)(1-R)^2 q N / (l - n).
double N_prime(double q, double n, double N, const ModelParams& p);

/// Integrates the n ODE from the series start and stops at the first
/// crossing with m, at the tail cut below q = 1, or on absorption at zero.
/// Throws StepFailure when the step controller cannot meet the tolerance.
NCurve integrate_n(const ModelParams& p, const NCurveOptions& opts = {});

struct CriticalRatio {
    double q_star;
    double z_star;  ///< q*/(1-q*); +inf when q* = 1
};

/// z = q / (1 - q), +inf at q = 1.
double z_from_q(double q);

/// Critical ratio for ThresholdSale (finite) and CashFirst (infinite).
CriticalRatio find_qstar(const ModelParams& p, const NCurveOptions& opts = {});

}  // namespace ocs
