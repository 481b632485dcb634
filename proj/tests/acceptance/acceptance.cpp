// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 on any failure.
// Usage: ocs_acceptance [criterion ...]   (default: all)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ocs/app.hpp"
#include "ocs/errors.hpp"
#include "ocs/model_params.hpp"
#include "ocs/ode_core.hpp"
#include "ocs/policy.hpp"
#include "ocs/sim_engine.hpp"
#include "ocs/sweep.hpp"
#include "ocs/value_surface.hpp"

using namespace ocs;

namespace {

// Every tolerance and time budget used below.
namespace tol {
constexpr double kPhiRoot = 1e-12;
constexpr double kSeriesStart = 1e-15;
constexpr double kQstarHalving = 10.0 * 1e-10;  // 10 x the integrator tolerance
constexpr double kSmoothFit = 1e-6;
constexpr double kHjb = 1e-6;
constexpr double kConcavity = 1e-10;
constexpr double kDerivFd = 1e-5;
constexpr double kGammaLimit = 1e-4;
constexpr double kPowerLimit = 1e-4;
constexpr double kBoundaryC = 1e-10;
constexpr double kSellValue = 1e-10;
constexpr double kZScore = 3.0;
constexpr double kThetaIdentity = 1e-8;
constexpr double kBudgetPerDt = 1.0;  // budget RMS / X must stay below this many dt
constexpr int kPaths = 20000;
constexpr double kDt = 1e-3;
}  // namespace tol

namespace budget {
constexpr double k1 = 1.0, k2 = 5.0, k3 = 10.0, k4 = 10.0, k5 = 1.0, k6 = 300.0, k7 = 30.0, k8 = 120.0;
}

struct Checks {
    std::vector<std::string> failures;
    std::size_t count = 0;

    void expect(bool ok, const std::string& what) {
        ++count;
        if (!ok) failures.push_back(what);
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ModelParams P(double eps, double delta, double R, double beta = 0.1) {
    return ModelParams::from_normalized(eps, delta, beta, R);
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return z;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// ---- 1: regime classification ---------------------------------------------

Regime reference_regime(double eps, double dsq, double R) {
    if (eps <= 0.0) return Regime::SellImmediately;
    if (R < 1.0 && eps >= dsq * R / 2.0 + 1.0 / (1.0 - R)) return Regime::IllPosed;
    if (eps >= dsq * R) return Regime::CashFirst;
    return Regime::ThresholdSale;
}

void criterion1(Checks& c) {
    const double Rs[] = {0.3, 0.5, 2.0, 4.0};
    std::size_t seen[4] = {0, 0, 0, 0};
    for (double R : Rs) {
        for (int i = 0; i < 50; ++i) {
            const double eps = -2.0 + 10.0 * i / 49.0;
            for (int k = 0; k < 50; ++k) {
                const double dsq = 0.05 + 8.0 * k / 49.0;
                const ModelParams p = P(eps, std::sqrt(dsq), R);
                const Regime got = classify(p);
                const Regime want = reference_regime(p.epsilon(), p.delta_sq(), p.R());
                ++seen[static_cast<int>(got)];
                c.expect(got == want, "grid point eps=" + fmt(eps) + " dsq=" + fmt(dsq) + " R=" + fmt(R));
            }
        }
    }
    for (int r = 0; r < 4; ++r) c.expect(seen[r] > 0, "regime " + std::to_string(r) + " never reached on the grid");
    struct Ex {
        double eps, delta, R;
        Regime want;
    };
    for (const Ex& e : {Ex{-0.5, 1, 0.5, Regime::SellImmediately}, Ex{2, 2, 0.5, Regime::CashFirst},
                        Ex{3, 1, 2, Regime::CashFirst}, Ex{1, 2, 0.5, Regime::ThresholdSale},
                        Ex{3.5, 2, 0.5, Regime::IllPosed}}) {
        c.expect(classify(P(e.eps, e.delta, e.R)) == e.want, "worked example eps=" + fmt(e.eps));
    }
}

// ---- 2: ODE and crossing ----------------------------------------------------

void criterion2(Checks& c) {
    const ModelParams sets[] = {P(1, 2, 0.5), P(1, 1, 0.5), P(2, 2, 0.5), P(1, 2, 2), P(3, 2, 1.2), P(3, 1, 2)};
    for (const ModelParams& p : sets) {
        const std::string tag = " at eps=" + fmt(p.epsilon()) + " R=" + fmt(p.R());
        const double chi = initial_slope(p);
        const double R = p.R();
        const double phi = chi * chi - (1 - R) * (p.delta_sq() / 2 - p.epsilon() + 1 / R) * chi -
                           p.epsilon() * (1 - R) * (1 - R) / R;
        c.expect(std::abs(phi) < tol::kPhiRoot, "Phi(n'(0)) = " + fmt(phi) + tag);
        const NCurve nc = integrate_n(p);
        c.expect(nc.grid.front().q == 0.0 && std::abs(nc.grid.front().n - 1.0) < tol::kSeriesStart,
                 "n(0) = 1" + tag);
        const double q0 = nc.grid[1].q;
        c.expect(std::abs(nc.grid[1].n - (1.0 + chi * q0)) < 10.0 * q0 * q0, "series start" + tag);
        std::size_t bad = 0;
        for (std::size_t i = 1; i < nc.grid.size(); ++i) {
            const NCurvePoint& g = nc.grid[i];
            const double gap = g.m - g.n;
            if (std::abs(gap) < 1e-9 * std::max(1.0, std::abs(g.m))) continue;  // at the crossing
            const double np = n_prime(g.q, g.n, p);
            // n' > 0 exactly when n < m, for either sign of 1 - R
            if ((np > 0) != (gap > 0)) ++bad;
        }
        c.expect(bad == 0, std::to_string(bad) + " sign-lemma violations" + tag);
        if (nc.termination == Termination::CrossedM) {
            const double qM = p.epsilon() / (p.delta_sq() * R);
            c.expect(nc.q_star > qM + 1e-12, "q* > eps/(delta^2 R)" + tag);
            NCurveOptions half;
            half.max_step /= 2;
            half.max_log_step /= 2;
            const double q_half = integrate_n(p, half).q_star;
            c.expect(std::abs(q_half - nc.q_star) < tol::kQstarHalving,
                     "step halving moved q* by " + fmt(std::abs(q_half - nc.q_star)) + tag);
        }
    }
    double prev = 0.0;
    for (double eps : {0.6, 0.8, 1.0}) {
        const double q = find_qstar(P(eps, 2, 0.5)).q_star;
        c.expect(q > prev, "q* not increasing at eps=" + fmt(eps));
        prev = q;
    }
}

// ---- 3: value surface -------------------------------------------------------

void surface_checks(Checks& c, const GSurface& s) {
    const ModelParams& p = s.params;
    const double R = p.R();
    const std::string tag = " at eps=" + fmt(p.epsilon()) + " R=" + fmt(R);
    const bool threshold = s.regime == Regime::ThresholdSale;
    if (threshold) {
        c.expect(s.smooth_fit && s.smooth_fit->max_rel_gap() < tol::kSmoothFit,
                 "smooth fit gap " + fmt(s.smooth_fit ? s.smooth_fit->max_rel_gap() : -1) + tag);
    }
    // HJB residual on the continuation region.
    const double z_hi = threshold ? s.z_star * (1 - 1e-6) : 1e6;
    double worst = 0.0;
    for (double z : log_grid(1e-6 * (threshold ? s.z_star : 1.0), z_hi, 500)) {
        worst = std::max(worst, std::abs(hjb_residual(s, z)));
    }
    c.expect(worst < tol::kHjb, "HJB residual " + fmt(worst) + tag);
    // Concavity of the utility-adjusted value; exact equality on the sale region.
    double worst_conc = -HUGE_VAL, worst_eq = 0.0;
    const double z_top = threshold ? 10 * s.z_star : 1e6;
    for (double z : log_grid(1e-6, z_top, 500)) {
        const GValue g = eval_g_all(s, z);
        const double q = R * g.g1 * g.g1 + (1 - R) * g.g * g.g2;
        worst_conc = std::max(worst_conc, q);
        if (threshold && z >= s.z_star) worst_eq = std::max(worst_eq, std::abs(q));
    }
    c.expect(worst_conc <= tol::kConcavity, "R g'^2 + (1-R) g g'' max " + fmt(worst_conc) + tag);
    c.expect(worst_eq <= tol::kConcavity, "equality beyond z*: " + fmt(worst_eq) + tag);
    // Derivatives against central differences of g and g'.
    double worst_fd = 0.0;
    for (double z : log_grid(1e-3, threshold ? 5 * s.z_star : 1e3, 101)) {
        if (threshold && std::abs(z / s.z_star - 1) < 1e-3) continue;
        const double hstep = 1e-4 * z;
        const GValue g = eval_g_all(s, z);
        const double d1 = (eval_g(s, z + hstep) - eval_g(s, z - hstep)) / (2 * hstep);
        const double d2 = (eval_g1(s, z + hstep) - eval_g1(s, z - hstep)) / (2 * hstep);
        worst_fd = std::max({worst_fd, rel(g.g1, d1), rel(g.g2, d2)});
    }
    c.expect(worst_fd < tol::kDerivFd, "g', g'' vs central differences " + fmt(worst_fd) + tag);
}

void criterion3(Checks& c) {
    // Threshold sets on both sides of R = 1, plus eps = 6, delta = 2 with R in {1.3, 1.5}.
    // The last two are cash first, so smooth fit does not apply to them.
    for (const ModelParams& p : {P(1, 2, 0.5), P(1, 2, 2), P(3, 2, 1.2), P(6, 2, 1.3), P(6, 2, 1.5)}) {
        surface_checks(c, build_surface(p));
    }
}

// ---- 4: cash-first construction -----------------------------------------

void criterion4(Checks& c) {
    for (const ModelParams& p : {P(1, 1, 0.5), P(3, 1, 2)}) {
        const GSurface s = build_surface(p);
        const double R = p.R();
        const std::string tag = " at R=" + fmt(R);
        c.expect(s.regime == Regime::CashFirst, "regime" + tag);
        const auto& [v_end, gamma_end] = R < 1 ? s.gamma_grid.back() : s.gamma_grid.front();
        const double lim = (1 - eval_W(s, v_end)) * std::exp(gamma_end);
        c.expect(std::abs(lim - 1) < tol::kGammaLimit, "(1-W) e^gamma = " + fmt(lim) + tag);
        const double want = p.g_zero() * std::pow(s.m_one, -R);
        const double z = 1e12;
        const double got = std::pow(z, R - 1) * eval_g(s, z);
        c.expect(rel(got, want) < tol::kPowerLimit, "z^(R-1) g -> " + fmt(got) + " want " + fmt(want) + tag);
        if (R < 1) c.expect(std::abs(want - 2.8284271247461903) < 1e-9, "limit constant" + tag);
        const double C0 = consumption(s, AgentState{0.0, 1.0, 1.0, 0.0});
        const double C_want = 0.1 * s.m_one / R;
        c.expect(std::abs(C0 - C_want) < tol::kBoundaryC, "C(0,1,1) = " + fmt(C0) + tag);
        if (R < 1) c.expect(std::abs(C0 - 0.125) < tol::kBoundaryC, "C(0,1,1) = 0.125");
    }
}

// ---- 5: degenerate closed forms -------------------------------------------

void criterion5(Checks& c) {
    const GSurface s = build_surface(P(-0.5, 1, 0.5));
    const AgentState st{1, 1, 1, 0};
    const ValueResult v = value_function(s, st);
    c.expect(v.finite() && std::abs(v.value - 2 * std::sqrt(10.0)) < tol::kSellValue,
             "SellImmediately V = " + fmt(v.value));
    for (const AgentState& a : {st, AgentState{2, 3, 0.5, 0}, AgentState{0.1, 1, 7, 1}}) {
        c.expect(certainty_equivalent(s, a) == a.y * a.theta, "p = y theta");
    }
    // Strictly inside the ill-posed region: infinite for phi below the critical rate.
    const ModelParams strict = P(3.5, 2, 0.5);
    const double crit = strict.beta() * (strict.epsilon() - strict.ill_posed_threshold());
    for (double lam : {0.1, 0.5, 0.9}) {
        c.expect(illposed_utility(strict, lam * crit, st).infinite, "strict case, lambda=" + fmt(lam));
    }
    // On the boundary: finite for each phi, diverging as phi -> 0.
    const ModelParams edge = P(3, 2, 0.5);
    c.expect(classify(edge) == Regime::IllPosed, "boundary classified ill-posed");
    double prev = 0.0;
    for (double phi : {1.0, 0.1, 0.01}) {
        const ValueResult g = illposed_utility(edge, phi, st);
        c.expect(g.finite() && g.value > prev, "boundary G(phi) increasing as phi falls, phi=" + fmt(phi));
        prev = g.value;
    }
}

// ---- 6: Monte Carlo ---------------------------------------------------------

void mc_checks(Checks& c, const ModelParams& p, const char* name) {
    const GSurface s = build_surface(p);
    SimConfig cfg;
    cfg.n_paths = tol::kPaths;
    cfg.dt = tol::kDt;
    const MCReport r = mc_value(s, AgentState{1, 1, 1, 0}, cfg);
    const std::string tag = std::string(" (") + name + ")";
    c.expect(std::abs(r.z_score) < tol::kZScore, "z = " + fmt(r.z_score) + tag);
    c.expect(r.nan_paths == 0 && !r.audit.nan_abort, "NaN paths" + tag);
    c.expect(r.audit.j_excess == 0.0, "J left [0, z*] by " + fmt(r.audit.j_excess) + tag);
    c.expect(r.audit.off_boundary_sales == 0, "sales away from the boundary" + tag);
    c.expect(r.audit.theta_identity_err < tol::kThetaIdentity,
             "Theta-L identity error " + fmt(r.audit.theta_identity_err) + tag);
    c.expect(r.audit.budget_rms_rel < tol::kBudgetPerDt * cfg.dt,
             "budget residual RMS " + fmt(r.audit.budget_rms_rel) + tag);
    std::printf("      %s: estimate %.6f  analytic %.6f  se %.4f  z %+.3f  T %.1f\n", name, r.estimate,
                r.analytic_value, r.std_error, r.z_score, r.horizon_T);
}

void criterion6(Checks& c) {
    mc_checks(c, P(1, 2, 0.5), "ThresholdSale");
    mc_checks(c, P(1, 1, 0.5), "CashFirst");
}

// ---- 7: comparative statics ------------------------------------------------

void criterion7(Checks& c) {
    // Cost of illiquidity in theta: interior minimum in [0.7, 1.2].
    {
        const GSurface s = build_surface(P(1, 2, 0.5));
        double best = HUGE_VAL, arg = 0;
        std::vector<double> vals;
        for (int i = 0; i <= 200; ++i) {
            const double th = 0.05 * i;
            const double v = illiquidity_cost(s, AgentState{1, 1, th, 0});
            vals.push_back(v);
            if (v < best) best = v, arg = th;
        }
        c.expect(arg >= 0.7 && arg <= 1.2, "p* minimum at theta=" + fmt(arg));
        c.expect(best > 0, "p* minimum positive");
        c.expect(vals.front() > best && vals.back() > best, "p* minimum interior");
    }
    // Consumption decreasing in the drift for some theta.
    {
        const GSurface lo = build_surface(P(1.5, 2, 0.5));
        const GSurface hi = build_surface(P(2, 2, 0.5));
        bool found = false;
        for (int i = 0; i <= 100 && !found; ++i) {
            const AgentState st{1, 1, 0.1 * i, 0};
            found = consumption(hi, st) < consumption(lo, st);
        }
        c.expect(found, "no theta with C decreasing in eps");
    }
    // Indifference price increasing in R at large wealth.
    {
        const GSurface lo = build_surface(P(3, 2, 0.5 + 0.25));
        const GSurface hi = build_surface(P(3, 2, 1.2));
        const GSurface r05 = build_surface(P(3, 2, 0.5));
        c.expect(r05.regime == Regime::IllPosed, "R=0.5 lies on the ill-posed boundary");
        bool found = false;
        for (double x : log_grid(1, 1e4, 41)) {
            const AgentState st{x, 1, 1, 0};
            if (certainty_equivalent(hi, st) > certainty_equivalent(lo, st)) found = true;
        }
        c.expect(found, "no x with p increasing in R");
    }
    // g ordered increasing in eps pointwise.
    {
        std::vector<GSurface> gs;
        for (double e : {0.5, 1.0, 1.5, 2.0}) gs.push_back(build_surface(P(e, 2, 0.5)));
        std::size_t bad = 0;
        for (double z : log_grid(1e-3, 1e3, 200)) {
            for (std::size_t k = 1; k < gs.size(); ++k) {
                if (!(eval_g(gs[k], z) > eval_g(gs[k - 1], z))) ++bad;
            }
        }
        c.expect(bad == 0, std::to_string(bad) + " points where g is not increasing in eps");
    }
}

// ---- 8: determinism ---------------------------------------------------------

void criterion8(Checks& c) {
    CommandRequest v;
    v.command = "verify";
    v.config.epsilon = 1;
    v.config.delta = 2;
    v.config.beta = 0.1;
    v.config.R = 0.5;
    v.config.sim.n_paths = 2000;
    v.config.sim.seed = 12345;
    const std::string a = execute(v).artifacts.at(0).content;
    const std::string b = execute(v).artifacts.at(0).content;
    c.expect(a == b, "verify outputs differ");
    v.config.sim.seed = 12346;
    c.expect(execute(v).artifacts.at(0).content != a, "seed has no effect on verify");

    CommandRequest sw;
    sw.command = "sweep";
    SweepSpec spec;
    spec.vary = SweepVar::Epsilon;
    spec.values = {0.5, 1.0, 1.5, 2.0, 3.5};
    spec.quantity = SweepQuantity::GCurve;
    spec.grid_var = SweepVar::Z;
    spec.grid = log_grid(0.01, 100, 25);
    sw.config.sweep = spec;
    const std::string s1 = execute(sw).artifacts.at(0).content;
    const std::string s2 = execute(sw).artifacts.at(0).content;
    c.expect(s1 == s2, "sweep outputs differ");
}

struct Criterion {
    int id;
    const char* title;
    double budget_s;
    std::function<void(Checks&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "regime classification on a 50x50x4 grid", budget::k1, criterion1},
        {2, "n ODE, series start and first crossing", budget::k2, criterion2},
        {3, "value surface: smooth fit, HJB residual, concavity, derivatives", budget::k3, criterion3},
        {4, "cash-first construction: tail limits and boundary consumption", budget::k4, criterion4},
        {5, "degenerate closed forms and ill-posed divergence", budget::k5, criterion5},
        {6, "Monte Carlo cross-validation and path invariants", budget::k6, criterion6},
        {7, "comparative statics", budget::k7, criterion7},
        {8, "determinism of verify and sweep", budget::k8, criterion8},
    };
    std::vector<int> pick;
    for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));

    int failed = 0;
    for (const Criterion& cr : all) {
        if (!pick.empty() && std::find(pick.begin(), pick.end(), cr.id) == pick.end()) continue;
        Checks c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            cr.run(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= cr.budget_s) c.failures.push_back("took " + fmt(secs) + " s, budget " + fmt(cr.budget_s) + " s");
        const bool ok = c.failures.empty();
        std::printf("%s [%d] %s  (%zu checks, %.2f s / %.0f s)\n", ok ? "PASS" : "FAIL", cr.id, cr.title, c.count,
                    secs, cr.budget_s);
        for (std::size_t i = 0; i < c.failures.size() && i < 10; ++i) std::printf("      - %s\n", c.failures[i].c_str());
        if (c.failures.size() > 10) std::printf("      ... %zu more\n", c.failures.size() - 10);
        std::fflush(stdout);
        failed += ok ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
