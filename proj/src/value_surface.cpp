#include "ocs/value_surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocs/errors.hpp"

namespace ocs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// (delta^2/2)(1 - R); du/dq = e_star / (l - n).
double e_star(const ModelParams& p) { return 0.5 * p.delta_sq() * (1.0 - p.R()); }

void require_grid(const GSurface& s) {
    if (!s.has_grid()) {
        throw RegimeError("operation needs a ThresholdSale or CashFirst surface, got " +
                          std::string(to_string(s.regime)));
    }
}

// Fills W_interp, h_interp and below-grid data from (u_i, N_i, q_i), i >= 1
// of the curve, plus the exact origin knot for W.
void assemble(GSurface& s, const NCurve& nc, const std::vector<double>& u) {
    const ModelParams& p = s.params;
    const double R = p.R();
    const double es = e_star(p);
    const std::size_t n = nc.grid.size();

    std::vector<double> v(n), q(n), dq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const NCurvePoint& pt = nc.grid[i];
        v[i] = pt.N;
        q[i] = pt.q;
        dq[i] = (i == 0) ? 1.0 / nc.kappa : (pt.ell - pt.n) / (es * (1.0 - R) * pt.q * pt.N);
    }
    if (R > 1.0) {
        std::reverse(v.begin(), v.end());
        std::reverse(q.begin(), q.end());
        std::reverse(dq.begin(), dq.end());
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(v[i + 1] > v[i])) throw SurfaceError("N is not strictly monotone on the n curve");
    }
    s.W_interp = MonotoneCubic(std::move(v), std::move(q), std::move(dq));

    std::vector<double> hu(n - 1), hv(n - 1), hd(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
        const NCurvePoint& pt = nc.grid[i];
        hu[i - 1] = u[i - 1];
        hv[i - 1] = pt.N;
        hd[i - 1] = (1.0 - R) * pt.N * pt.q;
        s.h_grid.emplace_back(u[i - 1], pt.N);
    }
    for (std::size_t i = 0; i + 1 < hu.size(); ++i) {
        if (!(hu[i + 1] > hu[i])) throw SurfaceError("u is not strictly increasing along the n curve");
    }
    s.u_min = hu.front();
    s.u_max = hu.back();
    const NCurvePoint& first = nc.grid[1];
    // Match h' at the bottom knot so the exponential tail joins with C1.
    s.below_rate = (1.0 - R) * first.N * first.q / (first.N - 1.0);
    s.h_interp = MonotoneCubic(std::move(hu), std::move(hv), std::move(hd));
}

HValue closed_form_h(const GSurface& s, double u) {
    // h(u) = m(q*)^{-R} (1 + e^u)^{1-R} above z*.
    const double R = s.params.R();
    const double z = std::exp(u);
    const double q = z / (1.0 + z);
    HValue r;
    r.h = std::pow(s.m_qstar, -R) * std::pow(1.0 + z, 1.0 - R);
    r.h1 = (1.0 - R) * r.h * q;
    r.h2 = r.h1 * ((1.0 - R) * q + (1.0 - q));
    return r;
}

GValue g_from_h(const GSurface& s, double z, const HValue& hv) {
    const double g0 = s.g_at_zero;
    GValue g;
    g.g = g0 * hv.h;
    g.g1 = g0 * hv.h1 / z;
    g.g2 = g0 * (hv.h2 - hv.h1) / (z * z);
    g.extrapolated = hv.extrapolated;
    return g;
}

GValue closed_form_g(const GSurface& s, double z) {
    const double R = s.params.R();
    GValue g;
    g.g = s.g_at_zero * std::pow(s.m_qstar, -R) * std::pow(1.0 + z, 1.0 - R);
    g.g1 = (1.0 - R) * g.g / (1.0 + z);
    g.g2 = -R * (1.0 - R) * g.g / ((1.0 + z) * (1.0 + z));
    return g;
}

// Cash first, above the grid. With the asymptotic 1 - W(v) = a v^{-1/(1-R)},
// a = m(1)^{-R/(1-R)}, the h ODE is linear in y = h^{1/(1-R)}: y' = y - a.
// Starting from the last grid value keeps h and its derivatives continuous.
HValue eval_h_tail(const GSurface& s, double u) {
    const double R = s.params.R();
    const double k = 1.0 / (1.0 - R);
    const double a = std::pow(s.m_one, -R * k);
    const double y0 = std::pow(s.h_interp.values().back(), k);
    const double y = a + (y0 - a) * std::exp(u - s.u_max);
    HValue r;
    r.h = std::pow(y, 1.0 - R);
    const double W = 1.0 - a / y;
    r.h1 = (1.0 - R) * r.h * W;
    r.h2 = (1.0 - R) * (r.h1 * W + r.h * a * (y - a) / (y * y));
    r.extrapolated = true;
    return r;
}

// h branch only, used for the left limit at z*.
HValue eval_h_grid(const GSurface& s, double u) {
    HValue r;
    if (u <= s.u_floor && s.u_floor < s.u_min) {
        r.extrapolated = true;
        return r;
    }
    if (u < s.u_min) {
        const double d = (s.h_interp.values().front() - 1.0) * std::exp(s.below_rate * (u - s.u_min));
        r.h = 1.0 + d;
        r.h1 = s.below_rate * d;
        r.h2 = s.below_rate * r.h1;
        r.extrapolated = true;
        return r;
    }
    if (u <= s.u_max) {
        r.h = s.h_interp.value(u);
        const double w = eval_w(s, r.h);
        r.h1 = w;
        r.h2 = eval_w_prime(s, r.h) * w;
        return r;
    }
    return eval_h_tail(s, u);
}

}  // namespace

double SmoothFit::max_rel_gap() const {
    return std::max({rel_gap(g_left, g_right), rel_gap(g1_left, g1_right), rel_gap(g2_left, g2_right)});
}

GSurface build_case2_surface(const ModelParams& p, const SurfaceOptions& opts) {
    if (classify(p) != Regime::ThresholdSale) throw RegimeError("case-2 surface needs ThresholdSale");
    NCurve nc = integrate_n(p, opts.ode);
    if (nc.termination != Termination::CrossedM) {
        throw SurfaceError("n curve did not cross m for ThresholdSale parameters");
    }
    GSurface s;
    s.regime = Regime::ThresholdSale;
    s.params = p;
    s.q_star = nc.q_star;
    s.z_star = z_from_q(nc.q_star);
    s.u_star = std::log(s.z_star);
    s.h_star = nc.h_star;
    s.m_qstar = eval_m(nc.q_star, p);
    s.m_one = eval_m(1.0, p);
    s.g_at_zero = p.g_zero();

    const double U_star = nc.back().U;
    std::vector<double> u;
    u.reserve(nc.grid.size());
    for (std::size_t i = 1; i < nc.grid.size(); ++i) u.push_back(s.u_star - (U_star - nc.grid[i].U));
    // Pin the top knot exactly at u*.
    u.back() = s.u_star;
    assemble(s, nc, u);
    s.u_floor = std::min(s.u_star - opts.u_span, s.u_min);

    const double lo = std::min(1.0, s.h_star);
    const double hi = std::max(1.0, s.h_star);
    for (const auto& [uu, hh] : s.h_grid) {
        if (!(hh >= lo * (1.0 - 1e-14) && hh <= hi * (1.0 + 1e-14))) throw SurfaceError("h left its admissible interval");
    }

    SmoothFit sf;
    const GValue left = g_from_h(s, s.z_star, eval_h_grid(s, s.u_star));
    const GValue right = closed_form_g(s, s.z_star);
    sf.g_left = left.g;
    sf.g1_left = left.g1;
    sf.g2_left = left.g2;
    sf.g_right = right.g;
    sf.g1_right = right.g1;
    sf.g2_right = right.g2;
    s.smooth_fit = sf;
    s.ncurve = std::move(nc);
    return s;
}

GSurface build_case3_surface(const ModelParams& p, const SurfaceOptions& opts) {
    if (classify(p) != Regime::CashFirst) throw RegimeError("case-3 surface needs CashFirst");
    NCurve nc = integrate_n(p, opts.ode);
    if (nc.termination != Termination::ReachedOne) {
        throw SurfaceError("n curve did not reach q = 1 for CashFirst parameters");
    }
    const double R = p.R();
    const double es = e_star(p);
    const double m1 = eval_m(1.0, p);
    if (!(m1 > 0.0)) throw SurfaceError("m(1) must be positive in CashFirst");

    // The integrand (1-q)/(l-n) tends to 1/e_star as q -> 1.
    const NCurvePoint& end = nc.back();
    const double s_end = 1.0 - end.q;
    const double f_end = s_end / (end.ell - end.n);
    const double mismatch = std::abs(f_end * es - 1.0);
    if (!(mismatch <= opts.tail_match)) {
        throw TailError("integrand has not reached its asymptote at the tail cut (mismatch " +
                        std::to_string(mismatch) + ")");
    }
    const double I_tail = 0.5 * s_end * (f_end + 1.0 / es);

    GSurface s;
    s.regime = Regime::CashFirst;
    s.params = p;
    s.q_star = 1.0;
    s.z_star = kInf;
    s.u_star = kInf;
    s.h_star = nc.h_star;
    s.m_qstar = m1;
    s.m_one = m1;
    s.g_at_zero = p.g_zero();
    s.tail_mismatch = mismatch;

    // u(q) normalised so that (1 - q) e^u -> 1 as q -> 1.
    std::vector<double> u;
    u.reserve(nc.grid.size());
    const double S_end = end.S;
    for (std::size_t i = 1; i < nc.grid.size(); ++i) {
        const NCurvePoint& pt = nc.grid[i];
        const double I = S_end - pt.S + I_tail;
        u.push_back((std::log(pt.N) + R * std::log(m1)) / (1.0 - R) - es * I);
    }
    assemble(s, nc, u);
    s.u_floor = std::min(-opts.u_span, s.u_min);
    for (const auto& [uu, hh] : s.h_grid) s.gamma_grid.emplace_back(hh, uu);
    if (R > 1.0) std::reverse(s.gamma_grid.begin(), s.gamma_grid.end());
    s.ncurve = std::move(nc);
    return s;
}

GSurface build_surface(const ModelParams& p, const SurfaceOptions& opts) {
    const Regime r = classify(p);
    switch (r) {
        case Regime::ThresholdSale: return build_case2_surface(p, opts);
        case Regime::CashFirst: return build_case3_surface(p, opts);
        case Regime::SellImmediately:
        case Regime::IllPosed: break;
    }
    GSurface s;
    s.regime = r;
    s.params = p;
    s.g_at_zero = p.g_zero();
    s.m_one = eval_m(1.0, p);
    if (r == Regime::SellImmediately) {
        s.q_star = 0.0;
        s.z_star = 0.0;
        s.u_star = -kInf;
        s.m_qstar = 1.0;
    } else {
        s.q_star = std::numeric_limits<double>::quiet_NaN();
        s.z_star = std::numeric_limits<double>::quiet_NaN();
        s.u_star = std::numeric_limits<double>::quiet_NaN();
        s.m_qstar = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

double eval_W(const GSurface& s, double v) {
    require_grid(s);
    const double R = s.params.R();
    const double lo = s.W_interp.x_min();
    const double hi = s.W_interp.x_max();
    const double slack = 1e-12 * std::max(std::abs(lo), std::abs(hi));
    if (v >= lo - slack && v <= hi + slack) {
        return std::clamp(s.W_interp.value(std::clamp(v, lo, hi)), 0.0, s.q_star);
    }
    const bool beyond_tail = s.regime == Regime::CashFirst &&
                             ((R < 1.0 && v > hi) || (R > 1.0 && v > 0.0 && v < lo));
    if (beyond_tail) {
        return 1.0 - std::pow(std::pow(s.m_one, R) * v, -1.0 / (1.0 - R));
    }
    throw DomainError("v outside the range of N");
}

double eval_w(const GSurface& s, double v) {
    return v * (1.0 - s.params.R()) * eval_W(s, v);
}

double eval_w_prime(const GSurface& s, double v) {
    require_grid(s);
    const ModelParams& p = s.params;
    const double R = p.R();
    const double q = eval_W(s, v);
    const double kappa = s.ncurve->kappa;
    if (q < 1e-9) return (1.0 - R) / kappa;
    const bool tail = s.regime == Regime::CashFirst &&
                      ((R < 1.0 && v > s.W_interp.x_max()) || (R > 1.0 && v < s.W_interp.x_min()));
    if (tail) return (1.0 - R) * q + (1.0 - q) / q;
    const double n = std::pow(v * std::pow(1.0 - q, 1.0 - R), -1.0 / R);
    const double ell = ell_raw(q, p.epsilon(), p.delta_sq(), R);
    return (1.0 - R) * q + (ell - n) / (e_star(p) * q);
}

HValue eval_h(const GSurface& s, double u) {
    require_grid(s);
    if (s.regime == Regime::ThresholdSale && u > s.u_star) return closed_form_h(s, u);
    return eval_h_grid(s, u);
}

GValue eval_g_all(const GSurface& s, double z) {
    if (!(z > 0.0)) throw DomainError("g is evaluated on z > 0");
    switch (s.regime) {
        case Regime::SellImmediately: {
            // V = (R/beta)^R (x + y theta)^{1-R} / (1-R): g(z) = g0 (1+z)^{1-R}.
            GValue g;
            const double R = s.params.R();
            g.g = s.g_at_zero * std::pow(1.0 + z, 1.0 - R);
            g.g1 = (1.0 - R) * g.g / (1.0 + z);
            g.g2 = -R * g.g1 / (1.0 + z);
            return g;
        }
        case Regime::IllPosed: throw RegimeError("g is infinite in the IllPosed regime");
        case Regime::ThresholdSale:
            if (z >= s.z_star) return closed_form_g(s, z);
            break;
        case Regime::CashFirst: break;
    }
    if (!std::isfinite(z)) throw DomainError("g requires finite z");
    return g_from_h(s, z, eval_h_grid(s, std::log(z)));
}

double eval_g(const GSurface& s, double z) { return eval_g_all(s, z).g; }
double eval_g1(const GSurface& s, double z) { return eval_g_all(s, z).g1; }
double eval_g2(const GSurface& s, double z) { return eval_g_all(s, z).g2; }

double eval_g_reduced(const GSurface& s, double z) {
    if (!(z > 0.0)) throw DomainError("g is evaluated on z > 0");
    const double R = s.params.R();
    if (s.regime == Regime::SellImmediately || (s.regime == Regime::ThresholdSale && z >= s.z_star)) {
        const GValue g = eval_g_all(s, z);
        return g.g / (1.0 + z);
    }
    if (s.regime == Regime::IllPosed) throw RegimeError("g is infinite in the IllPosed regime");
    const double u = std::log(z);
    if (u < s.u_min) {
        const GValue g = eval_g_all(s, z);
        return g.g - z * g.g1 / (1.0 - R);
    }
    if (u <= s.u_max) {
        const double h = s.h_interp.value(u);
        return s.g_at_zero * h * (1.0 - eval_W(s, h));
    }
    // Tail: 1 - W(h) = a / y with y = h^{1/(1-R)}, so h (1 - W) = a h^{-R/(1-R)}.
    const HValue t = eval_h_tail(s, u);
    return s.g_at_zero * std::pow(s.m_one, -R / (1.0 - R)) * std::pow(t.h, -R / (1.0 - R));
}

ValueResult value_function(const GSurface& s, const AgentState& st) {
    st.validate();
    if (s.regime == Regime::IllPosed) return {std::numeric_limits<double>::infinity(), true};
    const ModelParams& p = s.params;
    const double R = p.R();
    const double disc = std::exp(-p.beta() * st.t);
    const double wealth_y = st.y * st.theta;
    if (s.regime == Regime::SellImmediately) {
        return {disc * s.g_at_zero * std::pow(st.x + wealth_y, 1.0 - R) / (1.0 - R), false};
    }
    if (st.theta == 0.0) return {disc * std::pow(st.x, 1.0 - R) * s.g_at_zero / (1.0 - R), false};
    if (st.x == 0.0) {
        return {disc * std::pow(wealth_y, 1.0 - R) * s.g_at_zero * std::pow(s.m_qstar, -R) / (1.0 - R),
                false};
    }
    return {disc * std::pow(st.x, 1.0 - R) * eval_g(s, wealth_y / st.x) / (1.0 - R), false};
}

double hjb_residual(const GSurface& s, double z) {
    require_grid(s);
    const ModelParams& p = s.params;
    const double R = p.R();
    const double g0 = s.g_at_zero;
    const GValue gv = eval_g_all(s, z);
    double d = 1e-5;
    if (s.regime == Regime::ThresholdSale) d = std::min(d, 0.5 * (s.z_star - z) / z);
    const double g2 = (eval_g1(s, z * (1.0 + d)) - eval_g1(s, z * (1.0 - d))) / (2.0 * z * d);
    const double h = gv.g / g0;
    const double w = z * gv.g1 / g0;
    const double zz_g2 = z * z * g2 / g0;
    return std::pow(eval_g_reduced(s, z) / g0, 1.0 - 1.0 / R) - h + p.epsilon() * w +
           0.5 * p.delta_sq() * zz_g2;
}

nlohmann::json surface_to_json(const GSurface& s) {
    using nlohmann::json;
    auto num = [](double v) -> json {
        if (std::isfinite(v)) return v;
        if (std::isnan(v)) return nullptr;
        return v > 0 ? "inf" : "-inf";
    };
    json j;
    j["regime"] = std::string(to_string(s.regime));
    j["params"] = {{"alpha", s.params.alpha()}, {"eta", s.params.eta()}, {"beta", s.params.beta()},
                   {"R", s.params.R()}, {"epsilon", s.params.epsilon()},
                   {"delta_sq", s.params.delta_sq()}};
    j["q_star"] = num(s.q_star);
    j["z_star"] = num(s.z_star);
    j["h_star"] = num(s.h_star);
    j["m_qstar"] = num(s.m_qstar);
    j["m_one"] = num(s.m_one);
    j["g_at_zero"] = s.g_at_zero;
    if (s.ncurve) {
        j["kappa"] = s.ncurve->kappa;
        j["chi0"] = s.ncurve->chi0;
        j["termination"] = std::string(to_string(s.ncurve->termination));
    }
    if (s.smooth_fit) j["smooth_fit_max_rel_gap"] = s.smooth_fit->max_rel_gap();
    json hg = json::array();
    for (const auto& [u, h] : s.h_grid) hg.push_back({u, h});
    j["h_grid"] = std::move(hg);
    json gg = json::array();
    for (const auto& [v, g] : s.gamma_grid) gg.push_back({v, g});
    j["gamma_grid"] = std::move(gg);
    return j;
}

}  // namespace ocs
