#include "ocs/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ocs/errors.hpp"
#include "ocs/policy.hpp"
#include "ocs/rng.hpp"

namespace ocs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kBridgeStream = 0x6a09e667f3bcc909ULL;

// Neumaier compensated sum.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

struct NoiseSource {
    PathRng normals;
    PathRng bridge;
    double sign;
    int substeps;
    double inv_sqrt_m;

    NoiseSource(const SimConfig& cfg, std::uint64_t path)
        : normals(cfg.seed, cfg.antithetic ? path / 2 : path),
          bridge(cfg.seed ^ kBridgeStream, path),
          sign(cfg.antithetic && (path % 2 == 1) ? -1.0 : 1.0),
          substeps(cfg.noise_substeps),
          inv_sqrt_m(1.0 / std::sqrt(static_cast<double>(cfg.noise_substeps))) {}

    double normal() {
        if (substeps == 1) return sign * normals.normal();
        double s = 0.0;
        for (int i = 0; i < substeps; ++i) s += normals.normal();
        return sign * s * inv_sqrt_m;
    }
};

std::size_t step_count(double T, double dt) {
    return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

void record(SimPath* rec, std::size_t k, std::size_t stride, double t, double Y, double J, double L,
            double Theta, double X, double C, double U) {
    if (rec == nullptr || k % stride != 0) return;
    rec->t.push_back(t);
    rec->Y.push_back(Y);
    rec->J.push_back(J);
    rec->L.push_back(L);
    rec->Theta.push_back(Theta);
    rec->X.push_back(X);
    rec->C.push_back(C);
    rec->U.push_back(U);
}

// ---- small-argument helpers ----------------------------------------------

// Per-step increments are tiny, so short Taylor series are exact to rounding
// there and much cheaper than the library calls; larger arguments fall back.
inline double exp_small(double x) {
    if (!(std::abs(x) <= 0.25)) return std::exp(x);
    // Remainder below 0.25^13 / 13! < 3e-18.
    double r = 1.0 / 479001600.0;
    r = r * x + 1.0 / 39916800.0;
    r = r * x + 1.0 / 3628800.0;
    r = r * x + 1.0 / 362880.0;
    r = r * x + 1.0 / 40320.0;
    r = r * x + 1.0 / 5040.0;
    r = r * x + 1.0 / 720.0;
    r = r * x + 1.0 / 120.0;
    r = r * x + 1.0 / 24.0;
    r = r * x + 1.0 / 6.0;
    r = r * x + 0.5;
    r = r * x + 1.0;
    return r * x + 1.0;
}

inline double log1p_small(double x) {
    if (!(std::abs(x) <= 0.01)) return std::log1p(x);
    // Remainder below 0.01^10 / 10.
    double r = -1.0 / 9.0;
    r = r * x + 1.0 / 8.0;
    r = r * x - 1.0 / 7.0;
    r = r * x + 1.0 / 6.0;
    r = r * x - 1.0 / 5.0;
    r = r * x + 1.0 / 4.0;
    r = r * x - 1.0 / 3.0;
    r = r * x + 0.5;
    r = r * x - 1.0;
    return -r * x;
}

// ---- coefficient sources -------------------------------------------------

struct CoeffPair {
    double c;       ///< consumption per unit cash
    double weight;  ///< utility weight: (c/z)^{1-R} for threshold, c^{1-R} for CashFirst
};

// Threshold case, direct evaluation on the surface; argument j = z* - z.
struct DirectThreshold {
    const GSurface* s;
    double z_star, one_minus_R;
    CoeffPair operator()(double j) const {
        const double z = z_star - j;
        const double c = consumption_per_cash(*s, z);
        return {c, std::pow(c / z, one_minus_R)};
    }
};

// Linear interpolation on a uniform grid; the caller keeps x inside [lo, hi).
struct PairTable {
    double lo = 0.0;
    double inv_step = 1.0;
    std::vector<CoeffPair> v;

    template <class F>
    PairTable(double lo_, double hi_, std::size_t n, F&& f)
        : lo(lo_), inv_step(static_cast<double>(n) / (hi_ - lo_)), v(n + 1) {
        for (std::size_t i = 0; i <= n; ++i) {
            v[i] = f(lo_ + (hi_ - lo_) * static_cast<double>(i) / static_cast<double>(n));
        }
    }

    CoeffPair operator()(double x) const {
        const double sx = (x - lo) * inv_step;
        const auto i = static_cast<std::size_t>(sx);
        const double f = sx - static_cast<double>(i);
        const CoeffPair& a = v[i];
        const CoeffPair& b = v[i + 1];
        return {a.c + f * (b.c - a.c), a.weight + f * (b.weight - a.weight)};
    }
};

// Threshold case: a table in j away from the cash-exhausted end, a table in
// ln z close to it, direct evaluation for tiny z.
struct TableThreshold {
    DirectThreshold direct;
    PairTable by_j;
    PairTable by_lnz;
    double j_fast, z_fast, z_min;

    CoeffPair operator()(double j) const {
        if (j < j_fast) return by_j(j);
        const double z = direct.z_star - j;
        if (z >= z_min && z < z_fast) return by_lnz(std::log(z));
        return direct(j);
    }
};

TableThreshold make_threshold_tables(const GSurface& s) {
    const double zs = s.z_star;
    const DirectThreshold d{&s, zs, 1.0 - s.params.R()};
    const double j_fast = 0.98 * zs;
    const double z_fast = zs - j_fast;
    const double z_min = 1e-9 * zs;
    PairTable by_j(0.0, j_fast, std::size_t{1} << 15, d);
    PairTable by_lnz(std::log(z_min), std::log(z_fast), std::size_t{1} << 14,
                     [&](double u) { return d(zs - std::exp(u)); });
    return {d, std::move(by_j), std::move(by_lnz), j_fast, z_fast, z_min};
}

// CashFirst case, direct evaluation; argument u = ln z.
struct DirectCash {
    const GSurface* s;
    double one_minus_R;
    CoeffPair operator()(double u) const {
        const double c = consumption_per_cash(*s, std::exp(u));
        return {c, std::pow(c, one_minus_R)};
    }
};

struct TableCash {
    DirectCash direct;
    PairTable tab;
    double lo, hi;
    CoeffPair operator()(double u) const {
        return (u >= lo && u < hi) ? tab(u) : direct(u);
    }
};

TableCash make_cash_tables(const GSurface& s) {
    const DirectCash d{&s, 1.0 - s.params.R()};
    const double lo = -30.0;
    const double hi = 30.0;
    return {d, PairTable(lo, hi, std::size_t{1} << 16, d), lo, hi};
}

// ---- path kernels --------------------------------------------------------

struct PathResult {
    double utility = 0.0;
    PathAudit audit;
};

// Step constants shared by every path of one run.
struct ThresholdSetup {
    double omr, inv_omr, alpha, eta, beta, zs, dt, sdt;
    double sale_scale, j_tol, j_cap, drift_y;
    bool bridge;

    ThresholdSetup(const GSurface& s, const SimConfig& cfg) {
        const ModelParams& p = s.params;
        omr = 1.0 - p.R();
        inv_omr = 1.0 / omr;
        alpha = p.alpha();
        eta = p.eta();
        beta = p.beta();
        zs = s.z_star;
        dt = cfg.dt;
        sdt = std::sqrt(dt);
        sale_scale = 1.0 / (zs * (1.0 + zs));
        j_tol = 10.0 * eta * zs * sdt;
        j_cap = zs * (1.0 - 1e-9);
        drift_y = (alpha - 0.5 * eta * eta) * dt;
        bridge = cfg.bridge_correction;
    }
};

// One ThresholdSale path in J = z* - Z coordinates.
template <class Coeffs>
struct ThresholdLane {
    const ThresholdSetup* c;
    const Coeffs* co;
    NoiseSource noise;
    double theta0;
    double J, L = 0.0, lnY, lnTheta;
    double theta_prod;  // multiplicative track for the identity audit
    double P;           // e^{-beta t} (Y Theta)^{1-R}
    double c_k, f_k, z_k;
    KahanSum U;
    double budget_sq = 0.0;
    double j_excess = 0.0;
    PathAudit au;

    ThresholdLane(const ThresholdSetup& setup, const Coeffs& coeffs, const AgentState& start,
                  const SimConfig& cfg, std::uint64_t path)
        : c(&setup), co(&coeffs), noise(cfg, path), theta0(start.theta) {
        J = std::clamp(setup.zs - start.y * start.theta / start.x, 0.0, setup.j_cap);
        lnY = std::log(start.y);
        lnTheta = std::log(start.theta);
        theta_prod = start.theta;
        const CoeffPair cp = coeffs(J);
        c_k = cp.c;
        z_k = setup.zs - J;
        P = std::exp(setup.omr * (lnY + lnTheta));
        f_k = P * cp.weight * setup.inv_omr;
    }

    bool alive() const { return !au.nan_abort; }

    void step(std::size_t /*k*/) {
        const ThresholdSetup& s = *c;
        const double xi = noise.normal();
        const double a = s.drift_y + s.eta * s.sdt * xi;
        lnY += a;
        P *= exp_small(s.omr * a - s.beta * s.dt);

        const double Lambda = z_k * (s.alpha + c_k);
        const double Gamma = s.eta * z_k;
        const double J_free = J - Lambda * s.dt - Gamma * s.sdt * xi;
        double dL = 0.0;
        if (s.bridge) {
            // Minimum of the Brownian bridge from J to J_free over the step.
            const double var = Gamma * Gamma * s.dt;
            if (J_free <= 0.0 || 2.0 * J * J_free < 36.0 * var) {
                const double u = noise.bridge.uniform();
                const double diff = J_free - J;
                const double m = 0.5 * (J + J_free - std::sqrt(diff * diff - 2.0 * var * std::log(u)));
                dL = std::max(0.0, -m);
            }
        } else {
            dL = std::max(0.0, -J_free);
        }
        const double J_next = std::max(std::min(J_free + dL, s.j_cap), 0.0);

        double eD = 1.0;
        if (dL > 0.0) {
            const double dlnTheta = -dL * s.sale_scale;
            lnTheta += dlnTheta;
            eD = exp_small(dlnTheta);
            P *= exp_small(s.omr * dlnTheta);
            theta_prod *= eD;
            L += dL;
            ++au.sale_steps;
            if (!(J_next < s.j_tol)) ++au.off_boundary_sales;
        }

        const double z_next = s.zs - J_next;
        const CoeffPair cp = (*co)(J_next);
        const double f_next = P * cp.weight * s.inv_omr;
        U.add(0.5 * (f_k + f_next) * s.dt);

        // Budget residual relative to X_k.
        const double E = exp_small(a);
        const double r = E * eD * z_k / z_next - 1.0 + c_k * s.dt + E * z_k * (eD - 1.0);
        budget_sq += r * r;

        j_excess = std::max(j_excess, std::max(-J_next, J_next - s.zs));
        J = J_next;
        z_k = z_next;
        c_k = cp.c;
        f_k = f_next;
        if (!std::isfinite(f_k)) au.nan_abort = true;
    }

    void record_state(SimPath* rec, std::size_t k) const {
        const double X = std::exp(lnY + lnTheta) / z_k;
        rec->t.push_back(static_cast<double>(k) * c->dt);
        rec->Y.push_back(std::exp(lnY));
        rec->J.push_back(J);
        rec->L.push_back(L);
        rec->Theta.push_back(theta_prod);
        rec->X.push_back(X);
        rec->C.push_back(X * c_k);
        rec->U.push_back(U.value());
    }

    PathResult finish(std::size_t K) {
        au.steps = K;
        au.j_excess = j_excess;
        au.budget_rms_rel = std::sqrt(budget_sq / static_cast<double>(std::max<std::size_t>(K, 1)));
        au.theta_identity_err = std::abs(theta_prod / (theta0 * std::exp(-L * c->sale_scale)) - 1.0);
        return {au.nan_abort ? kNaN : U.value(), au};
    }
};

struct CashSetup {
    double omr, inv_omr, eta, beta, b, ln_b, dt, drift_y, sdt, decay_step;

    CashSetup(const GSurface& s, const SimConfig& cfg) {
        const ModelParams& p = s.params;
        omr = 1.0 - p.R();
        inv_omr = 1.0 / omr;
        eta = p.eta();
        beta = p.beta();
        b = beta / p.R() * s.m_one;
        ln_b = std::log(b);
        dt = cfg.dt;
        sdt = std::sqrt(dt);
        drift_y = (p.alpha() - 0.5 * eta * eta) * dt;
        decay_step = std::expm1(-b * dt);
    }
};

// One CashFirst path: consume cash holding theta fixed, then sell at rate b.
template <class Coeffs>
struct CashLane {
    const CashSetup* c;
    const Coeffs* co;
    NoiseSource noise;
    double theta0, lnTheta0;
    double lnY, X, lnX, tau;
    double P;    // phase 1: e^{-beta t} X^{1-R}
    double c_k;  // phase 1 consumption per unit cash
    double f_k;
    KahanSum U;
    double budget_sq = 0.0;
    PathAudit au;

    CashLane(const CashSetup& setup, const Coeffs& coeffs, const AgentState& start,
             const SimConfig& cfg, std::uint64_t path)
        : c(&setup), co(&coeffs), noise(cfg, path), theta0(start.theta),
          lnTheta0(std::log(start.theta)), lnY(std::log(start.y)), X(start.x) {
        if (X > 0.0) {
            tau = -1.0;
            lnX = std::log(X);
            P = std::pow(X, setup.omr);
            const CoeffPair cp = coeffs(lnY + lnTheta0 - lnX);
            c_k = cp.c;
            f_k = P * cp.weight * setup.inv_omr;
        } else {
            tau = 0.0;
            lnX = -std::numeric_limits<double>::infinity();
            P = 0.0;
            c_k = 0.0;
            f_k = std::pow(setup.b * start.y * start.theta, setup.omr) * setup.inv_omr;
        }
    }

    bool alive() const { return !au.nan_abort; }

    // Utility rate after cash runs out: e^{-beta t} (b Y Theta)^{1-R} / (1-R).
    double phase2_f(double t, double ln_y) const {
        return std::exp(-c->beta * t + c->omr * (c->ln_b + ln_y + lnTheta0 - c->b * (t - tau))) *
               c->inv_omr;
    }

    void step(std::size_t k) {
        const CashSetup& s = *c;
        const double xi = noise.normal();
        const double a = s.drift_y + s.eta * s.sdt * xi;
        const double lnY_k = lnY;
        lnY += a;
        double f_next;
        if (tau < 0.0) {
            // Euler cash update X -= C dt satisfies the budget exactly in phase 1.
            const double cdt = c_k * s.dt;
            if (cdt < 1.0) {
                const double l = log1p_small(-cdt);
                X *= 1.0 - cdt;
                lnX += l;
                P *= exp_small(s.omr * l - s.beta * s.dt);
                const CoeffPair cp = (*co)(lnY + lnTheta0 - lnX);
                c_k = cp.c;
                f_next = P * cp.weight * s.inv_omr;
                U.add(0.5 * (f_k + f_next) * s.dt);
            } else {
                const double t_k = static_cast<double>(k) * s.dt;
                const double t_next = static_cast<double>(k + 1) * s.dt;
                tau = t_k + 1.0 / c_k;
                const double frac = (tau - t_k) / s.dt;
                const double f_tau = phase2_f(tau, lnY_k + frac * a);
                X = 0.0;
                f_next = phase2_f(t_next, lnY);
                U.add(0.5 * (f_k + f_tau) * (tau - t_k));
                U.add(0.5 * (f_tau + f_next) * (t_next - tau));
            }
        } else {
            f_next = f_k * exp_small(s.omr * (a - s.b * s.dt) - s.beta * s.dt);
            U.add(0.5 * (f_k + f_next) * s.dt);
            const double r = s.b * s.dt + exp_small(a) * s.decay_step;
            budget_sq += r * r;
        }
        f_k = f_next;
        if (!std::isfinite(f_k)) au.nan_abort = true;
    }

    void record_state(SimPath* rec, std::size_t k) const {
        const double t = static_cast<double>(k) * c->dt;
        double theta = theta0;
        double C = X * c_k;
        if (tau >= 0.0) {
            theta *= std::exp(-c->b * (t - tau));
            C = c->b * std::exp(lnY) * theta;
        }
        rec->t.push_back(t);
        rec->Y.push_back(std::exp(lnY));
        rec->J.push_back(kNaN);
        rec->L.push_back(0.0);
        rec->Theta.push_back(theta);
        rec->X.push_back(X);
        rec->C.push_back(C);
        rec->U.push_back(U.value());
    }

    PathResult finish(std::size_t K) {
        au.steps = K;
        au.budget_rms_rel = std::sqrt(budget_sq / static_cast<double>(std::max<std::size_t>(K, 1)));
        return {au.nan_abort ? kNaN : U.value(), au};
    }
};

// Paths advanced together in lockstep; their independent dependency chains
// overlap in the pipeline.
constexpr std::size_t kLanes = 4;

template <class Lane, class MakeLane>
void run_lanes(std::uint64_t first, std::size_t count, std::size_t K, MakeLane&& make,
               PathResult* out) {
    std::vector<Lane> lanes;
    lanes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) lanes.push_back(make(first + i));
    for (std::size_t k = 0; k < K; ++k) {
        for (Lane& lane : lanes) {
            if (lane.alive()) lane.step(k);
        }
    }
    for (std::size_t i = 0; i < count; ++i) out[i] = lanes[i].finish(K);
}

template <class Lane>
PathResult run_recorded(Lane lane, std::size_t K, std::size_t stride, SimPath* rec) {
    lane.record_state(rec, 0);
    for (std::size_t k = 0; k < K && lane.alive(); ++k) {
        lane.step(k);
        if ((k + 1) % stride == 0) lane.record_state(rec, k + 1);
    }
    return lane.finish(K);
}

// Deterministic consumption C = (beta/R) X of total wealth w0.
PathResult run_deterministic(const ModelParams& p, double w0, double T, double dt, SimPath* rec,
                             std::size_t stride) {
    const double R = p.R();
    const double omr = 1.0 - R;
    const double k_rate = p.beta() / R;
    const std::size_t K = step_count(T, dt);
    KahanSum U;
    auto f = [&](double t) {
        return std::exp(-p.beta() * t) * std::pow(k_rate * w0 * std::exp(-k_rate * t), omr) / omr;
    };
    double f_k = f(0.0);
    record(rec, 0, stride, 0.0, 1.0, kNaN, 0.0, 0.0, w0, k_rate * w0, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double t_next = static_cast<double>(k + 1) * dt;
        const double f_next = f(t_next);
        U.add(0.5 * (f_k + f_next) * dt);
        f_k = f_next;
        if (rec != nullptr && (k + 1) % stride == 0) {
            const double X = w0 * std::exp(-k_rate * t_next);
            record(rec, k + 1, stride, t_next, 1.0, kNaN, 0.0, 0.0, X, k_rate * X, U.value());
        }
    }
    PathResult r;
    r.utility = U.value();
    r.audit.steps = K;
    return r;
}

bool is_deterministic(const GSurface& s, const AgentState& st) {
    return s.regime == Regime::SellImmediately || st.theta == 0.0;
}

void require_simulable(const GSurface& s) {
    if (s.regime == Regime::IllPosed) {
        throw RegimeError(
            "IllPosed parameters: the value is infinite and there is no optimal strategy to "
            "simulate; see the sale-financed strategy diagnostic (illposed_utility)");
    }
}

}  // namespace

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (horizon_T < 0.0 || !std::isfinite(horizon_T)) throw ConfigError("horizon_T must be >= 0");
    if (horizon_T > 0.0 && dt > horizon_T) throw ConfigError("dt must not exceed horizon_T");
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (antithetic && n_paths % 2 != 0) throw ConfigError("antithetic sampling needs an even n_paths");
    if (noise_substeps < 1) throw ConfigError("noise_substeps must be >= 1");
    if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
    if (!(truncation_tol > 0.0 && truncation_tol < 1.0)) {
        throw ConfigError("truncation_tol must lie in (0, 1)");
    }
}

void PathAudit::merge(const PathAudit& o) {
    j_excess = std::max(j_excess, o.j_excess);
    off_boundary_sales += o.off_boundary_sales;
    theta_identity_err = std::max(theta_identity_err, o.theta_identity_err);
    budget_rms_rel = std::max(budget_rms_rel, o.budget_rms_rel);
    steps += o.steps;
    sale_steps += o.sale_steps;
    nan_abort = nan_abort || o.nan_abort;
}

double utility_decay_rate(const GSurface& s) {
    const ModelParams& p = s.params;
    if (s.regime == Regime::SellImmediately) return p.beta() / p.R();
    if (!s.ncurve) throw RegimeError("no decay rate for this regime");
    double n_min = 1.0;
    for (const NCurvePoint& pt : s.ncurve->grid) n_min = std::min(n_min, pt.n);
    if (s.regime == Regime::CashFirst) n_min = std::min(n_min, s.m_one);
    return p.beta() * n_min;
}

double default_horizon(const GSurface& s, double tol) {
    return std::log(1.0 / tol) / utility_decay_rate(s);
}

double resolved_horizon(const GSurface& s, const SimConfig& cfg) {
    return cfg.horizon_T > 0.0 ? cfg.horizon_T : default_horizon(s, cfg.truncation_tol);
}

SimPath simulate_threshold(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                           std::uint64_t path_index) {
    if (s.regime != Regime::ThresholdSale) throw RegimeError("simulate_threshold needs ThresholdSale");
    cfg.validate();
    initial.validate();
    if (initial.theta == 0.0) return simulate_path(s, initial, cfg, path_index);
    const AgentState start = after_initial_sale(s, initial);
    SimPath out;
    out.initial_sale_units = initial.theta - start.theta;
    const DirectThreshold co{&s, s.z_star, 1.0 - s.params.R()};
    const ThresholdSetup setup(s, cfg);
    const std::size_t K = step_count(resolved_horizon(s, cfg), cfg.dt);
    const PathResult r =
        run_recorded(ThresholdLane<DirectThreshold>(setup, co, start, cfg, path_index), K,
                     cfg.record_stride, &out);
    out.utility = r.utility;
    out.audit = r.audit;
    return out;
}

SimPath simulate_cashfirst(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                           std::uint64_t path_index) {
    if (s.regime != Regime::CashFirst) throw RegimeError("simulate_cashfirst needs CashFirst");
    cfg.validate();
    initial.validate();
    if (initial.theta == 0.0) return simulate_path(s, initial, cfg, path_index);
    SimPath out;
    const DirectCash co{&s, 1.0 - s.params.R()};
    const CashSetup setup(s, cfg);
    const std::size_t K = step_count(resolved_horizon(s, cfg), cfg.dt);
    CashLane<DirectCash> lane(setup, co, initial, cfg, path_index);
    lane.record_state(&out, 0);
    for (std::size_t k = 0; k < K && lane.alive(); ++k) {
        lane.step(k);
        if ((k + 1) % cfg.record_stride == 0) lane.record_state(&out, k + 1);
    }
    const PathResult r = lane.finish(K);
    out.tau = lane.tau;
    out.utility = r.utility;
    out.audit = r.audit;
    return out;
}

SimPath simulate_sell_immediately(const GSurface& s, const AgentState& initial, const SimConfig& cfg) {
    if (s.regime != Regime::SellImmediately) {
        throw RegimeError("simulate_sell_immediately needs SellImmediately");
    }
    return simulate_path(s, initial, cfg, 0);
}

SimPath simulate_path(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                      std::uint64_t path_index) {
    require_simulable(s);
    cfg.validate();
    initial.validate();
    if (is_deterministic(s, initial)) {
        SimPath out;
        const double w0 = initial.x + initial.y * initial.theta;
        out.initial_sale_units = initial.theta;
        // The deterministic path is cheap, so the horizon leaves a much smaller tail.
        const double rate = s.params.beta() / s.params.R();
        const double T = cfg.horizon_T > 0.0 ? cfg.horizon_T
                                             : std::log(1.0 / (cfg.truncation_tol * 1e-3)) / rate;
        const PathResult r =
            run_deterministic(s.params, w0, T, cfg.dt, &out, cfg.record_stride);
        out.utility = r.utility;
        out.audit = r.audit;
        return out;
    }
    if (s.regime == Regime::ThresholdSale) return simulate_threshold(s, initial, cfg, path_index);
    return simulate_cashfirst(s, initial, cfg, path_index);
}

int configured_threads() {
    if (const char* env = std::getenv("OCS_NUM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<int>(v);
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

MCReport finish_report(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                       double T, const std::vector<PathResult>& paths, bool deterministic) {
    MCReport rep;
    rep.n_paths = deterministic ? 1 : cfg.n_paths;
    rep.dt = cfg.dt;
    rep.seed = cfg.seed;
    rep.horizon_T = T;
    rep.deterministic = deterministic;
    rep.analytic_value = value_function(s, initial).value;

    // Reduce in path order; antithetic pairs are averaged first.
    const std::size_t group = (!deterministic && cfg.antithetic) ? 2 : 1;
    std::vector<double> samples;
    samples.reserve(paths.size() / group);
    for (std::size_t i = 0; i + group <= paths.size(); i += group) {
        double v = 0.0;
        bool bad = false;
        for (std::size_t g = 0; g < group; ++g) {
            const PathResult& pr = paths[i + g];
            rep.audit.merge(pr.audit);
            if (!std::isfinite(pr.utility)) {
                bad = true;
                ++rep.nan_paths;
            }
            v += pr.utility;
        }
        if (!bad) samples.push_back(v / static_cast<double>(group));
    }
    if (samples.empty()) throw Error("every simulated path was aborted");
    KahanSum sum;
    for (double v : samples) sum.add(v);
    const double n = static_cast<double>(samples.size());
    rep.estimate = sum.value() / n;
    if (samples.size() > 1 && !deterministic) {
        KahanSum sq;
        for (double v : samples) sq.add((v - rep.estimate) * (v - rep.estimate));
        rep.std_error = std::sqrt(sq.value() / (n - 1.0) / n);
    }
    const double rate = deterministic ? s.params.beta() / s.params.R() : utility_decay_rate(s);
    rep.truncation_bound = std::abs(rep.analytic_value) * std::exp(-rate * T);
    if (rep.std_error > 0.0) {
        rep.z_score = (rep.estimate - rep.analytic_value) / rep.std_error;
    } else {
        rep.z_score = 0.0;
    }
    return rep;
}

template <class RunBlock>
MCReport run_mc(const GSurface& s, const AgentState& initial, const SimConfig& cfg, bool parallel,
                RunBlock&& run_block) {
    require_simulable(s);
    cfg.validate();
    initial.validate();
    if (is_deterministic(s, initial)) {
        const SimPath sp = simulate_path(s, initial, cfg, 0);
        PathResult r;
        r.utility = sp.utility;
        r.audit = sp.audit;
        const double T = sp.t.empty() ? 0.0 : sp.t.back();
        return finish_report(s, initial, cfg, T, {r}, true);
    }
    const double T = resolved_horizon(s, cfg);
    const std::size_t K = step_count(T, cfg.dt);
    std::vector<PathResult> paths(cfg.n_paths);
    const auto blocks = static_cast<std::int64_t>((cfg.n_paths + kLanes - 1) / kLanes);
    auto one_block = [&](std::int64_t blk) {
        const auto first = static_cast<std::size_t>(blk) * kLanes;
        const std::size_t count = std::min(kLanes, cfg.n_paths - first);
        run_block(first, count, K, paths.data() + first);
    };
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4) num_threads(configured_threads())
#endif
        for (std::int64_t blk = 0; blk < blocks; ++blk) one_block(blk);
    } else {
        for (std::int64_t blk = 0; blk < blocks; ++blk) one_block(blk);
    }
    return finish_report(s, initial, cfg, T, paths, false);
}

template <class Coeffs>
MCReport mc_threshold(const GSurface& s, const AgentState& initial, const SimConfig& cfg,
                      bool parallel, const Coeffs& co) {
    const ThresholdSetup setup(s, cfg);
    const AgentState start = after_initial_sale(s, initial);
    return run_mc(s, initial, cfg, parallel,
                  [&](std::size_t first, std::size_t count, std::size_t K, PathResult* out) {
                      run_lanes<ThresholdLane<Coeffs>>(
                          first, count, K,
                          [&](std::uint64_t i) { return ThresholdLane<Coeffs>(setup, co, start, cfg, i); },
                          out);
                  });
}

template <class Coeffs>
MCReport mc_cash(const GSurface& s, const AgentState& initial, const SimConfig& cfg, bool parallel,
                 const Coeffs& co) {
    const CashSetup setup(s, cfg);
    return run_mc(s, initial, cfg, parallel,
                  [&](std::size_t first, std::size_t count, std::size_t K, PathResult* out) {
                      run_lanes<CashLane<Coeffs>>(
                          first, count, K,
                          [&](std::uint64_t i) { return CashLane<Coeffs>(setup, co, initial, cfg, i); },
                          out);
                  });
}

}  // namespace

MCReport mc_value(const GSurface& s, const AgentState& initial, const SimConfig& cfg) {
    if (s.regime == Regime::ThresholdSale && !is_deterministic(s, initial)) {
        return mc_threshold(s, initial, cfg, true, make_threshold_tables(s));
    }
    if (s.regime == Regime::CashFirst && !is_deterministic(s, initial)) {
        return mc_cash(s, initial, cfg, true, make_cash_tables(s));
    }
    return run_mc(s, initial, cfg, false, [](std::size_t, std::size_t, std::size_t, PathResult*) {});
}

MCReport mc_value_serial(const GSurface& s, const AgentState& initial, const SimConfig& cfg) {
    if (s.regime == Regime::ThresholdSale && !is_deterministic(s, initial)) {
        return mc_threshold(s, initial, cfg, false, DirectThreshold{&s, s.z_star, 1.0 - s.params.R()});
    }
    if (s.regime == Regime::CashFirst && !is_deterministic(s, initial)) {
        return mc_cash(s, initial, cfg, false, DirectCash{&s, 1.0 - s.params.R()});
    }
    return run_mc(s, initial, cfg, false, [](std::size_t, std::size_t, std::size_t, PathResult*) {});
}

nlohmann::json report_to_json(const MCReport& r) {
    nlohmann::json j;
    j["estimate"] = r.estimate;
    j["std_error"] = r.std_error;
    j["n_paths"] = r.n_paths;
    j["truncation_bound"] = r.truncation_bound;
    j["analytic_value"] = r.analytic_value;
    j["z_score"] = r.z_score;
    j["deterministic"] = r.deterministic;
    j["horizon_T"] = r.horizon_T;
    j["dt"] = r.dt;
    j["seed"] = r.seed;
    j["nan_paths"] = r.nan_paths;
    j["audit"] = {{"j_excess", r.audit.j_excess},
                  {"off_boundary_sales", r.audit.off_boundary_sales},
                  {"theta_identity_err", r.audit.theta_identity_err},
                  {"budget_rms_rel_max", r.audit.budget_rms_rel},
                  {"steps", r.audit.steps},
                  {"sale_steps", r.audit.sale_steps},
                  {"nan_abort", r.audit.nan_abort}};
    return j;
}

}  // namespace ocs
