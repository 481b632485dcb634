#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "ocs/model_params.hpp"
#include "ocs/value_surface.hpp"

namespace ocs {

struct SimConfig {
    double dt = 1e-3;
    double horizon_T = 0.0;         ///< 0 selects the default horizon
    std::size_t n_paths = 20000;
    std::uint64_t seed = 20240611;
    bool antithetic = false;
    int noise_substeps = 1;         ///< each step's normal is the scaled sum of this many draws
    double truncation_tol = 1e-6;   ///< target for e^{-rate T} when horizon_T = 0
    bool bridge_correction = true;  ///< Brownian-bridge test for boundary hits inside a step
    std::size_t record_stride = 1;  ///< keep every k-th step in SimPath output

    /// Throws ConfigError on invalid settings.
    void validate() const;
};

/// Per-path checks of the simulated dynamics.
struct PathAudit {
    double j_excess = 0.0;            ///< largest violation of 0 <= J <= z*
    std::size_t off_boundary_sales = 0; ///< steps with dL > 0 but J_next >= j_tol
    double theta_identity_err = 0.0;  ///< |Theta_T / (Theta_0 e^{-L_T/(z*(1+z*))}) - 1|
    double budget_rms_rel = 0.0;      ///< RMS over steps of the budget residual / X
    std::size_t steps = 0;
    std::size_t sale_steps = 0;
    bool nan_abort = false;

    void merge(const PathAudit& o);
};

struct SimPath {
    std::vector<double> t, Y, J, L, Theta, X, C, U;
    double tau = -1.0;       ///< CashFirst: time cash runs out
    double utility = 0.0;    ///< accrued discounted utility at the horizon
    double initial_sale_units = 0.0;
    PathAudit audit;
};

struct MCReport {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double truncation_bound = 0.0;
    double analytic_value = 0.0;
    double z_score = 0.0;
    bool deterministic = false;
    double horizon_T = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::size_t nan_paths = 0;
    PathAudit audit;  ///< worst case over paths
};

/// Rate r with utility beyond T bounded by |V| e^{-r T}: beta min(1, min n)
/// along the optimal ratio range; beta/R for the deterministic strategies.
double utility_decay_rate(const GSurface& s);
double default_horizon(const GSurface& s, double tol = 1e-6);
double resolved_horizon(const GSurface& s, const SimConfig& cfg);

/// Reference path simulators; they evaluate the surface directly and record
/// every `record_stride`-th step.
SimPath simulate_threshold(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                           std::uint64_t path_index = 0);
SimPath simulate_cashfirst(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                           std::uint64_t path_index = 0);
SimPath simulate_sell_immediately(const GSurface& s, const AgentState& initial,
                                  const SimConfig& cfg);
/// Dispatches on the regime (theta = 0 uses the deterministic cash path).
SimPath simulate_path(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                      std::uint64_t path_index = 0);

/// Table-driven kernel, parallel over paths with OpenMP. Per-path results
/// are reduced in path order, so the report does not depend on the thread count.
MCReport mc_value(const GSurface& s, const AgentState& initial, const SimConfig& cfg);
/// Serial reference: same random streams, surface evaluated directly.
MCReport mc_value_serial(const GSurface& s, const AgentState& initial, const SimConfig& cfg);

/// Thread count from OCS_NUM_THREADS, falling back to the OpenMP default.
int configured_threads();

nlohmann::json report_to_json(const MCReport& r);

}  // namespace ocs
