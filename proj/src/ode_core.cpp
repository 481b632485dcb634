#include "ocs/ode_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ocs/errors.hpp"

namespace ocs {

std::string_view to_string(Termination t) noexcept {
    switch (t) {
        case Termination::CrossedM: return "CrossedM";
        case Termination::ReachedOne: return "ReachedOne";
        case Termination::AbsorbedAtZero: return "AbsorbedAtZero";
    }
    return "Unknown";
}

double initial_slope(const ModelParams& p) {
    const double R = p.R();
    const double b = (1.0 - R) * (0.5 * p.delta_sq() - p.epsilon() + 1.0 / R);
    const double c = -p.epsilon() * (1.0 - R) * (1.0 - R) / R;
    // Phi(chi) = chi^2 - b chi + c; the discriminant is positive because Phi
    // is negative at l'(0). Use the cancellation-free pair of root formulas.
    const double disc = std::sqrt(b * b - 4.0 * c);
    const double big = 0.5 * (b + std::copysign(disc, b));
    double r1 = big;
    double r2 = (big != 0.0) ? c / big : 0.0;
    if (big == 0.0) {
        r1 = 0.5 * disc;
        r2 = -0.5 * disc;
    }
    const double lo = std::min(r1, r2);
    const double hi = std::max(r1, r2);
    return R < 1.0 ? lo : hi;
}

double n_prime(double q, double n, const ModelParams& p) {
    const double R = p.R();
    const double ell = ell_raw(q, p.epsilon(), p.delta_sq(), R);
    const double K = 0.5 * p.delta_sq() * (1.0 - R) * (1.0 - R) / R;
    return n * ((1.0 - R) / (R * (1.0 - q)) - K * q / (ell - n));
}

double N_prime(double q, double n, double N, const ModelParams& p) {
    const double R = p.R();
    const double ell = ell_raw(q, p.epsilon(), p.delta_sq(), R);
    return 0.5 * p.delta_sq() * (1.0 - R) * (1.0 - R) * q * N / (ell - n);
}

double z_from_q(double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("z_from_q requires q in [0,1]");
    if (q == 1.0) return std::numeric_limits<double>::infinity();
    return q / (1.0 - q);
}

namespace {

using State = std::array<double, 3>;  // (l - n, U, S)
constexpr std::size_t kDim = 3;

struct Rhs {
    double eps, dsq, R, K, c, floor;

    // Returns false when the state sits on the wrong side of l.
    bool operator()(double q, const State& y, State& dy) const {
        const double gap = y[0];
        if (!((1.0 - R) * gap > floor) || !(q < 1.0)) return false;
        const double n = ell_raw(q, eps, dsq, R) - gap;
        const double ell_prime = -(eps - 0.5 * dsq) * (1.0 - R) - dsq * (1.0 - R) * (1.0 - R) * q;
        dy[0] = ell_prime - n * ((1.0 - R) / (R * (1.0 - q)) - K * q / gap);
        dy[1] = c / gap;
        dy[2] = (1.0 - q) / gap;
        return std::isfinite(dy[0]) && std::isfinite(dy[1]) && std::isfinite(dy[2]);
    }
};

// Dormand-Prince 5(4) with Hairer's continuous extension.
struct Dopri5Step {
    State y0{}, y1{}, k1{}, k7{};
    std::array<State, 5> rc{};
    double q0 = 0.0, h = 0.0;

    State dense(double q) const {
        const double th = (q - q0) / h;
        const double th1 = 1.0 - th;
        State out{};
        for (std::size_t i = 0; i < kDim; ++i) {
            out[i] = rc[0][i] +
                     th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])));
        }
        return out;
    }
};

constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// One trial step. Returns the scaled error norm, or +inf if any stage left
// the admissible region.
double try_step(const Rhs& f, double q, const State& y, const State& k1, double h, double rtol,
                double atol, Dopri5Step& out) {
    State k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, t{};
    auto stage = [&](double qq, const State& yy, State& kk) { return f(qq, yy, kk); };
    for (std::size_t i = 0; i < kDim; ++i) t[i] = y[i] + h * a21 * k1[i];
    if (!stage(q + h / 5.0, t, k2)) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kDim; ++i) t[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    if (!stage(q + 0.3 * h, t, k3)) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kDim; ++i) t[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    if (!stage(q + 0.8 * h, t, k4)) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kDim; ++i) {
        t[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    }
    if (!stage(q + 8.0 / 9.0 * h, t, k5)) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kDim; ++i) {
        t[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    }
    if (!stage(q + h, t, k6)) return std::numeric_limits<double>::infinity();
    State y1{};
    for (std::size_t i = 0; i < kDim; ++i) {
        y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    }
    if (!stage(q + h, y1, k7)) return std::numeric_limits<double>::infinity();

    double err = 0.0;
    for (std::size_t i = 0; i < kDim; ++i) {
        const double e =
            h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
        err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / static_cast<double>(kDim));

    out.q0 = q;
    out.h = h;
    out.y0 = y;
    out.y1 = y1;
    out.k1 = k1;
    out.k7 = k7;
    for (std::size_t i = 0; i < kDim; ++i) {
        out.rc[0][i] = y[i];
        out.rc[1][i] = y1[i] - y[i];
        out.rc[2][i] = h * k1[i] - out.rc[1][i];
        out.rc[3][i] = out.rc[1][i] - h * k7[i] - out.rc[2][i];
        out.rc[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                            d7 * k7[i]);
    }
    return err;
}

NCurvePoint make_point(double q, const State& y, const ModelParams& p) {
    NCurvePoint pt;
    pt.q = q;
    pt.ell = ell_raw(q, p.epsilon(), p.delta_sq(), p.R());
    pt.n = pt.ell - y[0];
    pt.U = y[1];
    pt.S = y[2];
    pt.m = m_raw(q, p.epsilon(), p.delta_sq(), p.R());
    pt.N = std::pow(pt.n, -p.R()) * std::pow(1.0 - q, p.R() - 1.0);
    return pt;
}

}  // namespace

NCurve integrate_n(const ModelParams& p, const NCurveOptions& opts) {
    if (!(opts.q0 > 0.0 && opts.q0 <= 1e-4)) throw DomainError("q0 must lie in (0, 1e-4]");
    if (!(opts.tol > 0.0)) throw DomainError("tol must be positive");
    if (!(opts.tail_s > 0.0 && opts.tail_s < 0.5)) throw DomainError("tail_s must lie in (0, 0.5)");
    if (!(opts.max_step > 0.0)) throw DomainError("max_step must be positive");

    const Regime regime = classify(p);
    const double R = p.R();

    NCurve curve{p, {}, 0.0, 1.0, 0.0, 0.0, Termination::CrossedM, 0.0, 0.0, 0, 0};
    NCurvePoint origin;
    origin.m = 1.0;
    origin.ell = 1.0;
    curve.grid.push_back(origin);
    curve.chi0 = initial_slope(p);
    curve.kappa = (1.0 - R) - R * curve.chi0;

    if (regime == Regime::SellImmediately) {
        // q* = 0: n falls on the wrong side of m immediately.
        curve.q_star = 0.0;
        curve.h_star = 1.0;
        return curve;
    }

    const Rhs f{p.epsilon(), p.delta_sq(), R, 0.5 * p.delta_sq() * (1.0 - R) * (1.0 - R) / R,
                0.5 * p.delta_sq() * (1.0 - R), opts.denominator_floor};
    const bool detect_crossing = regime != Regime::CashFirst;
    const double q_stop = 1.0 - opts.tail_s;
    const double rtol = opts.tol;
    // The gap l - n is tiny near q = 0 and near q = 1; control it in relative terms.
    const double atol = opts.tol * 1e-6;

    double q = opts.q0;
    State y{ell_raw(q, p.epsilon(), p.delta_sq(), R) - (1.0 + curve.chi0 * q), 0.0, 0.0};
    State k1{};
    if (!f(q, y, k1)) throw StepFailure("n ODE undefined at the series start", q);
    curve.grid.push_back(make_point(q, y, p));

    auto n_of = [&](double qq, const State& yy) {
        return ell_raw(qq, p.epsilon(), p.delta_sq(), R) - yy[0];
    };
    auto crossing_fn = [&](double qq, double nn) {
        return (1.0 - R) * (nn - m_raw(qq, p.epsilon(), p.delta_sq(), R));
    };

    double h = 0.1 * q;
    double q_rec = q;
    Dopri5Step step;
    const double log_spacing = opts.record_spacing;

    while (true) {
        h = std::min({h, opts.max_step, opts.max_log_step * q, q_stop - q});
        if (h <= 1e-15 * std::max(1.0, q)) {
            if (n_of(q, y) < 1e-6) {
                curve.termination = Termination::AbsorbedAtZero;
                break;
            }
            throw StepFailure("step size underflow in n ODE", q);
        }
        const double err = try_step(f, q, y, k1, h, rtol, atol, step);
        if (!(err <= 1.0)) {
            ++curve.rejected_steps;
            const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
            h *= fac;
            continue;
        }
        ++curve.accepted_steps;
        const double q_new = q + h;

        if (detect_crossing && crossing_fn(q_new, n_of(q_new, step.y1)) <= 0.0) {
            // Refine on the dense output until |n - m| is tiny.
            double lo = q;
            double hi = q_new;
            double mid = hi;
            State ym = step.y1;
            for (int it = 0; it < 200; ++it) {
                mid = 0.5 * (lo + hi);
                ym = step.dense(mid);
                const double mm = m_raw(mid, p.epsilon(), p.delta_sq(), R);
                const double nm = n_of(mid, ym);
                const double c = crossing_fn(mid, nm);
                if (std::abs(nm - mm) < 1e-12 * std::max(1.0, std::abs(mm)) ||
                    hi - lo < 1e-16) {
                    break;
                }
                if (c > 0.0) lo = mid; else hi = mid;
            }
            curve.bracket_lo = lo;
            curve.bracket_hi = hi;
            curve.grid.push_back(make_point(mid, ym, p));
            curve.termination = Termination::CrossedM;
            curve.q_star = mid;
            curve.h_star = curve.grid.back().N;
            return curve;
        }
        if (n_of(q_new, step.y1) <= 1e-12) {
            curve.grid.push_back(make_point(q_new, step.y1, p));
            curve.termination = Termination::AbsorbedAtZero;
            curve.q_star = 1.0;
            curve.h_star = curve.grid.back().N;
            return curve;
        }

        q = q_new;
        y = step.y1;
        k1 = step.k7;

        const bool done = q >= q_stop;
        const double s_prev = 1.0 - q_rec;
        const bool record = done || (q - q_rec >= 0.5 * opts.max_step) ||
                            std::log(q / q_rec) >= log_spacing ||
                            std::log(s_prev / (1.0 - q)) >= log_spacing;
        if (record) {
            curve.grid.push_back(make_point(q, y, p));
            q_rec = q;
        }
        if (done) break;

        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    }

    if (curve.termination == Termination::AbsorbedAtZero) {
        curve.grid.push_back(make_point(q, y, p));
        curve.q_star = 1.0;
        curve.h_star = curve.grid.back().N;
        return curve;
    }
    curve.termination = Termination::ReachedOne;
    curve.q_star = 1.0;
    curve.h_star = curve.grid.back().N;
    return curve;
}

CriticalRatio find_qstar(const ModelParams& p, const NCurveOptions& opts) {
    const Regime r = classify(p);
    if (r != Regime::ThresholdSale && r != Regime::CashFirst) {
        throw RegimeError("critical ratio is defined only for ThresholdSale and CashFirst");
    }
    if (r == Regime::CashFirst) return {1.0, std::numeric_limits<double>::infinity()};
    const NCurve c = integrate_n(p, opts);
    if (c.termination != Termination::CrossedM) {
        throw StepFailure("no crossing found for ThresholdSale parameters", c.q_end());
    }
    return {c.q_star, z_from_q(c.q_star)};
}

}  // namespace ocs
