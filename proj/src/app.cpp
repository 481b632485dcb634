#include "ocs/app.hpp"

#include <cmath>
#include <initializer_list>
#include <string_view>

#include "ocs/errors.hpp"
#include "ocs/policy.hpp"

namespace ocs {

namespace {

using nlohmann::json;

json num(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

double read_num(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
        throw ConfigError("expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

void reject_unknown(const json& j, const char* section, std::initializer_list<std::string_view> keys) {
    if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (std::string_view k : keys) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + section);
    }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_dbl(const json& j, const char* key, double& out) {
    if (j.contains(key)) out = read_num(j.at(key));
}

void read_dbl(const json& j, const char* key, std::optional<double>& out) {
    if (j.contains(key)) out = read_num(j.at(key));
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(); }

// ---- command bodies ------------------------------------------------------

std::string finish_json(const json& j) { return j.dump(2) + "\n"; }

CommandResult cmd_classify(const CommandRequest& req) {
    const ModelParams p = req.config.params();
    const Regime r = classify(p);
    const bool csv = req.format == OutputFormat::Csv;
    CommandResult out;
    if (csv) {
        std::string s = "# ocs classify\n";
        s += "# columns: regime; epsilon; delta_sq_R = cash-first threshold on epsilon;\n";
        s += "#   ill_posed_threshold = delta^2 R/2 + 1/(1-R) (inf when R > 1)\n";
        s += "regime,epsilon,delta_sq_R,ill_posed_threshold\n";
        s += std::string(to_string(r)) + "," + format_number(p.epsilon()) + "," +
             format_number(p.cash_first_threshold()) + "," + format_number(p.ill_posed_threshold()) + "\n";
        out.artifacts.push_back({"primary", s});
    } else {
        json j{{"regime", std::string(to_string(r))},
               {"epsilon", p.epsilon()},
               {"thresholds",
                {{"delta_sq_R", num(p.cash_first_threshold())},
                 {"ill_posed", num(p.ill_posed_threshold())}}}};
        out.artifacts.push_back({"primary", finish_json(j)});
    }
    return out;
}

std::string ncurve_csv(const NCurve& c) {
    std::string s = "# ocs n-curve\n";
    s += "# termination: " + std::string(to_string(c.termination)) + "\n";
    s += "# q_star=" + format_number(c.q_star) + " h_star=" + format_number(c.h_star) +
         " kappa=" + format_number(c.kappa) + " chi0=" + format_number(c.chi0) + "\n";
    s += "# columns: q; n; m; ell; N = exp integral of the n ODE; U, S = running integrals used by the tail\n";
    s += "q,n,m,ell,N,U,S\n";
    for (const NCurvePoint& pt : c.grid) {
        s += format_number(pt.q) + "," + format_number(pt.n) + "," + format_number(pt.m) + "," +
             format_number(pt.ell) + "," + format_number(pt.N) + "," + format_number(pt.U) + "," +
             format_number(pt.S) + "\n";
    }
    return s;
}

json solve_summary(const GSurface& s) {
    json j{{"regime", std::string(to_string(s.regime))},
           {"epsilon", s.params.epsilon()},
           {"delta_sq", s.params.delta_sq()},
           {"beta", s.params.beta()},
           {"R", s.params.R()},
           {"q_star", num(s.q_star)},
           {"z_star", num(s.z_star)},
           {"g_at_zero", num(s.g_at_zero)}};
    if (s.ncurve) {
        const NCurve& c = *s.ncurve;
        j["chi0"] = c.chi0;
        j["kappa"] = c.kappa;
        j["termination"] = std::string(to_string(c.termination));
        j["accepted_steps"] = c.accepted_steps;
        j["rejected_steps"] = c.rejected_steps;
        j["grid_points"] = c.grid.size();
    }
    if (s.has_grid()) {
        j["h_star"] = num(s.h_star);
        j["m_qstar"] = num(s.m_qstar);
        j["m_one"] = num(s.m_one);
        j["u_grid"] = {num(s.u_min), num(s.u_max)};
    }
    if (s.regime == Regime::ThresholdSale) j["u_star"] = s.u_star;
    if (s.regime == Regime::CashFirst) j["tail_mismatch"] = s.tail_mismatch;
    if (s.smooth_fit) j["smooth_fit_max_rel_gap"] = s.smooth_fit->max_rel_gap();
    return j;
}

CommandResult cmd_solve(const CommandRequest& req) {
    const GSurface s = build_surface(req.config.params(), req.config.solver);
    CommandResult out;
    const json j = solve_summary(s);
    if (req.format == OutputFormat::Csv) {
        std::string csv = "# ocs solve\n# columns: key; value\nkey,value\n";
        for (const auto& [k, v] : j.items()) {
            csv += k + "," + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
        }
        out.artifacts.push_back({"primary", csv});
    } else {
        out.artifacts.push_back({"primary", finish_json(j)});
    }
    if (req.dump_ncurve) {
        if (!s.ncurve) throw RegimeError("no n curve is integrated in the " + std::string(to_string(s.regime)) + " regime");
        out.artifacts.push_back({"ncurve", ncurve_csv(*s.ncurve)});
    }
    if (req.emit_surface) out.artifacts.push_back({"surface", finish_json(surface_to_json(s))});
    return out;
}

CommandResult cmd_evaluate(const CommandRequest& req) {
    const RunConfig& c = req.config;
    const GSurface s = build_surface(c.params(), c.solver);
    c.state.validate();
    const ValueResult v = value_function(s, c.state);
    json j{{"regime", std::string(to_string(s.regime))},
           {"state", {{"x", c.state.x}, {"y", c.state.y}, {"theta", c.state.theta}, {"t", c.state.t}}},
           {"V", v.infinite ? json("inf") : json(v.value)},
           {"z", num(c.state.ratio())},
           {"z_star", num(s.z_star)}};
    if (s.regime == Regime::IllPosed) {
        j.erase("z_star");
        j["note"] = "value is infinite; no optimal strategy exists (see the sale-financed diagnostic)";
    } else {
        const PolicyPoint pp = evaluate_policy(s, c.state);
        j["C"] = pp.consumption;
        j["p"] = pp.certainty_equiv;
        j["p_star"] = pp.illiq_cost ? json(*pp.illiq_cost) : json();
        j["immediate_sale_units"] = pp.immediate_sale_units;
    }
    CommandResult out;
    if (req.format == OutputFormat::Csv) {
        std::string csv = "# ocs evaluate\n# columns: key; value (empty when undefined)\nkey,value\n";
        for (const auto& [k, val] : j.items()) {
            if (k == "state") continue;
            std::string cell;
            if (val.is_string()) {
                cell = val.get<std::string>();
            } else if (val.is_number()) {
                cell = format_number(val.get<double>());
            }
            if (cell.find(',') != std::string::npos) cell = "\"" + cell + "\"";
            csv += k + "," + cell + "\n";
        }
        out.artifacts.push_back({"primary", csv});
    } else {
        out.artifacts.push_back({"primary", finish_json(j)});
    }
    return out;
}

CommandResult cmd_sweep(const CommandRequest& req) {
    if (!req.config.sweep) throw ConfigError("sweep needs a \"sweep\" section in the config");
    const SweepResult r = run_sweep(*req.config.sweep);
    CommandResult out;
    if (req.format == OutputFormat::Json) {
        out.artifacts.push_back({"primary", finish_json(sweep_to_json(r))});
    } else {
        out.artifacts.push_back({"primary", sweep_to_csv(r)});
    }
    return out;
}

CommandResult cmd_simulate(const CommandRequest& req) {
    const RunConfig& c = req.config;
    const GSurface s = build_surface(c.params(), c.solver);
    std::vector<SimPath> paths;
    for (std::size_t i = 0; i < c.record_paths; ++i) paths.push_back(simulate_path(s, c.state, c.sim, i));
    CommandResult out;
    if (req.format == OutputFormat::Json) {
        json arr = json::array();
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const SimPath& p = paths[i];
            json cols;
            auto col = [](const std::vector<double>& v) {
                json a = json::array();
                for (double x : v) a.push_back(num(x));
                return a;
            };
            cols["t"] = col(p.t);
            cols["Y"] = col(p.Y);
            cols["J"] = col(p.J);
            cols["L"] = col(p.L);
            cols["Theta"] = col(p.Theta);
            cols["X"] = col(p.X);
            cols["C"] = col(p.C);
            cols["U"] = col(p.U);
            arr.push_back({{"path", i},
                           {"utility", num(p.utility)},
                           {"tau", p.tau},
                           {"initial_sale_units", p.initial_sale_units},
                           {"columns", cols}});
        }
        out.artifacts.push_back({"primary", finish_json({{"regime", std::string(to_string(s.regime))},
                                                         {"paths", arr}})});
        return out;
    }
    std::string csv = "# ocs simulate\n";
    csv += "# regime: " + std::string(to_string(s.regime)) + "\n";
    csv += "# columns: path id; t; Y price; J = z* - Z (nan outside the threshold regime);\n";
    csv += "#   L cumulative sales driver; Theta units held; X cash; C consumption rate;\n";
    csv += "#   U discounted utility accrued up to t\n";
    for (std::size_t i = 0; i < paths.size(); ++i) {
        csv += "# path " + std::to_string(i) + ": utility=" + format_number(paths[i].utility) +
               " tau=" + format_number(paths[i].tau) +
               " initial_sale_units=" + format_number(paths[i].initial_sale_units) + "\n";
    }
    csv += "path,t,Y,J,L,Theta,X,C,U\n";
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const SimPath& p = paths[i];
        const std::string id = std::to_string(i);
        for (std::size_t k = 0; k < p.t.size(); ++k) {
            csv += id;
            for (double v : {p.t[k], p.Y[k], p.J[k], p.L[k], p.Theta[k], p.X[k], p.C[k], p.U[k]}) {
                csv += ",";
                csv += format_number(v);
            }
            csv += "\n";
        }
    }
    out.artifacts.push_back({"primary", csv});
    return out;
}

CommandResult cmd_verify(const CommandRequest& req) {
    const RunConfig& c = req.config;
    const GSurface s = build_surface(c.params(), c.solver);
    if (s.regime == Regime::IllPosed) {
        throw RegimeError("IllPosed: the value is infinite, so there is nothing to verify; "
                          "the sale-financed utility diagnostic (illposed_utility) shows the divergence");
    }
    const MCReport rep = mc_value(s, c.state, c.sim);
    json j = report_to_json(rep);
    j["regime"] = std::string(to_string(s.regime));
    j["z_limit"] = kVerifyZLimit;
    const bool pass = std::abs(rep.z_score) <= kVerifyZLimit;
    j["pass"] = pass;
    CommandResult out;
    out.artifacts.push_back({"primary", finish_json(j)});
    if (!pass) {
        out.exit_code = kExitCheckFailed;
        out.message = "Monte Carlo estimate disagrees with the analytic value: |z| = " +
                      format_number(std::abs(rep.z_score));
    }
    return out;
}

}  // namespace

ModelParams RunConfig::params() const {
    if (!beta || !R) throw ConfigError("parameters need beta and R");
    const bool normalised = epsilon || delta;
    const bool market = alpha || eta;
    if (normalised && market) throw ConfigError("give either (epsilon, delta) or (alpha, eta), not both");
    if (normalised) {
        if (!epsilon || !delta) throw ConfigError("normalised parameters need both epsilon and delta");
        return ModelParams::from_normalized(*epsilon, *delta, *beta, *R);
    }
    if (!alpha || !eta) throw ConfigError("parameters need (epsilon, delta) or (alpha, eta)");
    return ModelParams::from_market(*alpha, *eta, *beta, *R);
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        reject_unknown(j, "config", {"params", "state", "sim", "solver", "sweep", "record_paths"});
        if (j.contains("params")) {
            const json& p = j.at("params");
            reject_unknown(p, "params", {"epsilon", "delta", "alpha", "eta", "beta", "R"});
            read_dbl(p, "epsilon", c.epsilon);
            read_dbl(p, "delta", c.delta);
            read_dbl(p, "alpha", c.alpha);
            read_dbl(p, "eta", c.eta);
            read_dbl(p, "beta", c.beta);
            read_dbl(p, "R", c.R);
        }
        if (j.contains("state")) {
            const json& s = j.at("state");
            reject_unknown(s, "state", {"x", "y", "theta", "t"});
            read_dbl(s, "x", c.state.x);
            read_dbl(s, "y", c.state.y);
            read_dbl(s, "theta", c.state.theta);
            read_dbl(s, "t", c.state.t);
        }
        if (j.contains("sim")) {
            const json& s = j.at("sim");
            reject_unknown(s, "sim",
                           {"dt", "horizon_T", "n_paths", "seed", "antithetic", "noise_substeps",
                            "truncation_tol", "bridge_correction", "record_stride"});
            read_dbl(s, "dt", c.sim.dt);
            read_dbl(s, "horizon_T", c.sim.horizon_T);
            read_opt(s, "n_paths", c.sim.n_paths);
            read_opt(s, "seed", c.sim.seed);
            read_opt(s, "antithetic", c.sim.antithetic);
            read_opt(s, "noise_substeps", c.sim.noise_substeps);
            read_dbl(s, "truncation_tol", c.sim.truncation_tol);
            read_opt(s, "bridge_correction", c.sim.bridge_correction);
            read_opt(s, "record_stride", c.sim.record_stride);
        }
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            reject_unknown(s, "solver",
                           {"q0", "max_step", "max_log_step", "tol", "tail_s", "record_spacing", "u_span",
                            "tail_match"});
            read_dbl(s, "q0", c.solver.ode.q0);
            read_dbl(s, "max_step", c.solver.ode.max_step);
            read_dbl(s, "max_log_step", c.solver.ode.max_log_step);
            read_dbl(s, "tol", c.solver.ode.tol);
            read_dbl(s, "tail_s", c.solver.ode.tail_s);
            read_dbl(s, "record_spacing", c.solver.ode.record_spacing);
            read_dbl(s, "u_span", c.solver.u_span);
            read_dbl(s, "tail_match", c.solver.tail_match);
        }
        read_opt(j, "record_paths", c.record_paths);
        if (j.contains("sweep")) c.sweep = sweep_spec_from_json(j.at("sweep"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

json config_to_json(const RunConfig& c) {
    json j;
    j["params"] = {{"epsilon", opt_json(c.epsilon)}, {"delta", opt_json(c.delta)},
                   {"alpha", opt_json(c.alpha)},     {"eta", opt_json(c.eta)},
                   {"beta", opt_json(c.beta)},       {"R", opt_json(c.R)}};
    // Drop the unused parameter form so the config reads back unchanged.
    for (const char* k : {"epsilon", "delta", "alpha", "eta", "beta", "R"}) {
        if (j["params"][k].is_null()) j["params"].erase(k);
    }
    j["state"] = {{"x", c.state.x}, {"y", c.state.y}, {"theta", c.state.theta}, {"t", c.state.t}};
    j["sim"] = {{"dt", c.sim.dt},
                {"horizon_T", c.sim.horizon_T},
                {"n_paths", c.sim.n_paths},
                {"seed", c.sim.seed},
                {"antithetic", c.sim.antithetic},
                {"noise_substeps", c.sim.noise_substeps},
                {"truncation_tol", c.sim.truncation_tol},
                {"bridge_correction", c.sim.bridge_correction},
                {"record_stride", c.sim.record_stride}};
    j["solver"] = {{"q0", c.solver.ode.q0},
                   {"max_step", c.solver.ode.max_step},
                   {"max_log_step", c.solver.ode.max_log_step},
                   {"tol", c.solver.ode.tol},
                   {"tail_s", c.solver.ode.tail_s},
                   {"record_spacing", c.solver.ode.record_spacing},
                   {"u_span", c.solver.u_span},
                   {"tail_match", c.solver.tail_match}};
    j["record_paths"] = c.record_paths;
    if (c.sweep) j["sweep"] = sweep_spec_to_json(*c.sweep);
    return j;
}

OutputFormat format_from_string(const std::string& s) {
    if (s == "auto") return OutputFormat::Auto;
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    throw ConfigError("format must be csv or json");
}

std::string to_string(OutputFormat f) {
    switch (f) {
        case OutputFormat::Csv: return "csv";
        case OutputFormat::Json: return "json";
        case OutputFormat::Auto: break;
    }
    return "auto";
}

json request_to_json(const CommandRequest& r) {
    return {{"command", r.command},
            {"format", to_string(r.format)},
            {"dump_ncurve", r.dump_ncurve},
            {"emit_surface", r.emit_surface},
            {"run", config_to_json(r.config)}};
}

CommandRequest request_from_json(const json& j) {
    CommandRequest r;
    try {
        r.command = j.at("command").get<std::string>();
        r.format = format_from_string(j.at("format").get<std::string>());
        r.dump_ncurve = j.value("dump_ncurve", false);
        r.emit_surface = j.value("emit_surface", false);
        r.config = config_from_json(j.at("run"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed request: ") + e.what());
    }
    return r;
}

CommandResult execute(const CommandRequest& req) {
    if (req.command == "classify") return cmd_classify(req);
    if (req.command == "solve") return cmd_solve(req);
    if (req.command == "evaluate") return cmd_evaluate(req);
    if (req.command == "sweep") return cmd_sweep(req);
    if (req.command == "simulate") return cmd_simulate(req);
    if (req.command == "verify") return cmd_verify(req);
    throw ConfigError("unknown command '" + req.command + "'");
}

}  // namespace ocs
