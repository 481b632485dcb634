#include "ocs/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "ocs/errors.hpp"
#include "ocs/policy.hpp"
#include "ocs/sim_engine.hpp"
#include "ocs/value_surface.hpp"

namespace ocs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct VarName {
    SweepVar v;
    std::string_view name;
};
constexpr VarName kVars[] = {{SweepVar::Epsilon, "epsilon"}, {SweepVar::Delta, "delta"},
                             {SweepVar::R, "R"},             {SweepVar::Beta, "beta"},
                             {SweepVar::X, "x"},             {SweepVar::Theta, "theta"},
                             {SweepVar::Z, "z"}};

struct QuantityName {
    SweepQuantity q;
    std::string_view name;
    std::string_view column;
    std::string_view doc;
};
constexpr QuantityName kQuantities[] = {
    {SweepQuantity::ZStar, "z_star", "z_star", "critical ratio (inf when sales wait for cash to run out)"},
    {SweepQuantity::QStar, "q_star", "q_star", "critical wealth fraction z*/(1+z*)"},
    {SweepQuantity::GCurve, "g_curve", "g", "reduced value g(z)"},
    {SweepQuantity::CCurve, "C_curve", "C", "optimal consumption rate C(x,y,theta)"},
    {SweepQuantity::PCurve, "p_curve", "p", "certainty equivalent p(x,y,theta)"},
    {SweepQuantity::PStarCurve, "p_star_curve", "p_star", "cost of illiquidity p*(x,y,theta)"},
};

const QuantityName& quantity_entry(SweepQuantity q) {
    for (const auto& e : kQuantities) {
        if (e.q == q) return e;
    }
    return kQuantities[0];
}

bool is_param(SweepVar v) {
    return v == SweepVar::Epsilon || v == SweepVar::Delta || v == SweepVar::R || v == SweepVar::Beta;
}

bool strictly_monotone(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    if (v.size() < 2) return true;
    const bool up = v[1] > v[0];
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
    }
    return true;
}

std::vector<double> read_points(const nlohmann::json& j, const char* what) {
    if (j.is_array()) return j.get<std::vector<double>>();
    if (j.is_object()) {
        const double from = j.at("from").get<double>();
        const double to = j.at("to").get<double>();
        const auto count = j.at("count").get<std::size_t>();
        if (count < 2) throw ConfigError(std::string(what) + ": count must be at least 2");
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(count - 1);
        }
        out.back() = to;
        return out;
    }
    throw ConfigError(std::string(what) + " must be a list or {from, to, count}");
}

SweepFixed with_value(SweepFixed f, SweepVar v, double value) {
    switch (v) {
        case SweepVar::Epsilon: f.epsilon = value; break;
        case SweepVar::Delta: f.delta = value; break;
        case SweepVar::R: f.R = value; break;
        case SweepVar::Beta: f.beta = value; break;
        case SweepVar::X: f.x = value; break;
        case SweepVar::Theta: f.theta = value; break;
        case SweepVar::Z: break;
    }
    return f;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += (c == '\n') ? ' ' : c;
    }
    return out + "\"";
}

// Surface (or the reason there is none) for one parameter set.
struct SurfaceSlot {
    std::optional<ModelParams> params;
    std::optional<GSurface> surface;
    std::string error;
};

SurfaceSlot build_slot(const SweepFixed& f) {
    SurfaceSlot slot;
    try {
        slot.params = ModelParams::from_normalized(f.epsilon, f.delta, f.beta, f.R);
        slot.surface = build_surface(*slot.params);
    } catch (const Error& e) {
        slot.error = e.what();
    }
    return slot;
}

double evaluate_row(const SweepSpec& spec, const GSurface& s, const SweepFixed& f, double grid_value) {
    if (s.regime == Regime::IllPosed) {
        throw RegimeError("IllPosed: the value is infinite and no optimal strategy exists");
    }
    switch (spec.quantity) {
        case SweepQuantity::ZStar: return s.z_star;
        case SweepQuantity::QStar: return s.q_star;
        case SweepQuantity::GCurve: {
            double z = spec.grid_var == SweepVar::Z ? grid_value : kNaN;
            if (!spec.grid_var) {
                const AgentState st{f.x, f.y, f.theta, 0.0};
                st.validate();
                z = st.ratio();
            }
            return eval_g(s, z);
        }
        default: break;
    }
    const AgentState st{f.x, f.y, f.theta, 0.0};
    st.validate();
    switch (spec.quantity) {
        case SweepQuantity::CCurve: return consumption(s, st);
        case SweepQuantity::PCurve: return certainty_equivalent(s, st);
        case SweepQuantity::PStarCurve: return illiquidity_cost(s, st);
        default: return kNaN;
    }
}

}  // namespace

std::string_view to_string(SweepVar v) noexcept {
    for (const auto& e : kVars) {
        if (e.v == v) return e.name;
    }
    return "?";
}

std::string_view to_string(SweepQuantity q) noexcept { return quantity_entry(q).name; }

SweepVar sweep_var_from_string(std::string_view s) {
    for (const auto& e : kVars) {
        if (e.name == s) return e.v;
    }
    throw ConfigError("unknown sweep variable '" + std::string(s) + "'");
}

SweepQuantity sweep_quantity_from_string(std::string_view s) {
    for (const auto& e : kQuantities) {
        if (e.name == s) return e.q;
    }
    throw ConfigError("unknown sweep quantity '" + std::string(s) + "'");
}

void SweepSpec::validate() const {
    if (vary == SweepVar::Z) throw ConfigError("z can only be a grid variable");
    if (values.empty()) throw ConfigError("sweep values are empty");
    if (!strictly_monotone(values)) throw ConfigError("sweep values must be finite and strictly monotone");
    const bool scalar = quantity == SweepQuantity::ZStar || quantity == SweepQuantity::QStar;
    if (scalar && grid_var) throw ConfigError("z_star and q_star take no grid");
    if (grid_var) {
        if (grid.empty()) throw ConfigError("sweep grid is empty");
        if (!strictly_monotone(grid)) throw ConfigError("sweep grid must be finite and strictly monotone");
        if (*grid_var == vary) throw ConfigError("grid variable must differ from the varied one");
        if (quantity == SweepQuantity::GCurve && *grid_var != SweepVar::Z) {
            throw ConfigError("g_curve runs over a z grid");
        }
        if (!scalar && quantity != SweepQuantity::GCurve && *grid_var != SweepVar::X &&
            *grid_var != SweepVar::Theta) {
            throw ConfigError("consumption and price curves run over an x or theta grid");
        }
    }
}

SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
    SweepSpec s;
    try {
        s.vary = sweep_var_from_string(j.at("vary").get<std::string>());
        s.values = read_points(j.at("values"), "values");
        s.quantity = sweep_quantity_from_string(j.at("quantity").get<std::string>());
        if (j.contains("fixed")) {
            const auto& f = j.at("fixed");
            s.fixed.epsilon = f.value("epsilon", s.fixed.epsilon);
            s.fixed.delta = f.value("delta", s.fixed.delta);
            s.fixed.beta = f.value("beta", s.fixed.beta);
            s.fixed.R = f.value("R", s.fixed.R);
            s.fixed.x = f.value("x", s.fixed.x);
            s.fixed.y = f.value("y", s.fixed.y);
            s.fixed.theta = f.value("theta", s.fixed.theta);
            for (const auto& [key, _] : f.items()) {
                if (key != "epsilon" && key != "delta" && key != "beta" && key != "R" && key != "x" &&
                    key != "y" && key != "theta") {
                    throw ConfigError("unknown fixed entry '" + key + "'");
                }
            }
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            s.grid_var = sweep_var_from_string(g.at("var").get<std::string>());
            s.grid = read_points(g.contains("values") ? g.at("values") : g, "grid");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed sweep spec: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json sweep_spec_to_json(const SweepSpec& s) {
    nlohmann::json j;
    j["vary"] = std::string(to_string(s.vary));
    j["values"] = s.values;
    j["quantity"] = std::string(to_string(s.quantity));
    j["fixed"] = {{"epsilon", s.fixed.epsilon}, {"delta", s.fixed.delta}, {"beta", s.fixed.beta},
                  {"R", s.fixed.R},             {"x", s.fixed.x},         {"y", s.fixed.y},
                  {"theta", s.fixed.theta}};
    if (s.grid_var) j["grid"] = {{"var", std::string(to_string(*s.grid_var))}, {"values", s.grid}};
    return j;
}

SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    SweepResult out;
    out.spec = spec;

    // One surface per varied parameter value, or a single shared one.
    const bool per_value = is_param(spec.vary);
    const std::size_t n_slots = per_value ? spec.values.size() : 1;
    std::vector<SurfaceSlot> slots(n_slots);
    const auto n = static_cast<std::int64_t>(n_slots);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(configured_threads())
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const SweepFixed f = per_value ? with_value(spec.fixed, spec.vary, spec.values[k]) : spec.fixed;
        slots[k] = build_slot(f);
    }

    const std::size_t n_grid = spec.grid_var ? spec.grid.size() : 1;
    out.rows.reserve(spec.values.size() * n_grid);
    for (std::size_t v = 0; v < spec.values.size(); ++v) {
        const SurfaceSlot& slot = slots[per_value ? v : 0];
        const SweepFixed fv = with_value(spec.fixed, spec.vary, spec.values[v]);
        for (std::size_t g = 0; g < n_grid; ++g) {
            SweepRow row;
            row.value = spec.values[v];
            row.result = kNaN;
            SweepFixed f = fv;
            if (spec.grid_var) {
                row.grid = spec.grid[g];
                f = with_value(f, *spec.grid_var, row.grid);
            }
            if (slot.params) row.regime = classify(*slot.params);
            if (!slot.surface) {
                row.error = slot.error;
            } else {
                try {
                    row.result = evaluate_row(spec, *slot.surface, f, row.grid);
                } catch (const Error& e) {
                    row.error = e.what();
                }
            }
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string sweep_to_csv(const SweepResult& r) {
    const SweepSpec& s = r.spec;
    const QuantityName& q = quantity_entry(s.quantity);
    const std::string vary(to_string(s.vary));
    std::string out;
    out += "# ocs sweep\n";
    out += "# quantity: " + std::string(q.name) + "\n";
    out += "# fixed: epsilon=" + format_number(s.fixed.epsilon) + " delta=" + format_number(s.fixed.delta) +
           " beta=" + format_number(s.fixed.beta) + " R=" + format_number(s.fixed.R) +
           " x=" + format_number(s.fixed.x) + " y=" + format_number(s.fixed.y) +
           " theta=" + format_number(s.fixed.theta) + "\n";
    out += "# columns:\n";
    out += "#   " + vary + ": varied value (overrides the fixed entry)\n";
    if (s.grid_var) {
        out += "#   " + std::string(to_string(*s.grid_var)) + ": grid point\n";
    }
    out += "#   regime: regime of the row's parameters (empty when they are invalid)\n";
    out += "#   " + std::string(q.column) + ": " + std::string(q.doc) + "; nan on error\n";
    out += "#   error: failure message, empty on success\n";
    out += vary;
    if (s.grid_var) out += "," + std::string(to_string(*s.grid_var));
    out += ",regime," + std::string(q.column) + ",error\n";
    for (const SweepRow& row : r.rows) {
        out += format_number(row.value);
        if (s.grid_var) out += "," + format_number(row.grid);
        out += ",";
        if (row.regime) out += std::string(to_string(*row.regime));
        out += "," + format_number(row.result) + "," + csv_field(row.error) + "\n";
    }
    return out;
}

nlohmann::json sweep_to_json(const SweepResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    const std::string vary(to_string(r.spec.vary));
    const std::string column(quantity_entry(r.spec.quantity).column);
    for (const SweepRow& row : r.rows) {
        nlohmann::json j;
        j[vary] = row.value;
        if (r.spec.grid_var) j[std::string(to_string(*r.spec.grid_var))] = row.grid;
        j["regime"] = row.regime ? nlohmann::json(std::string(to_string(*row.regime))) : nlohmann::json();
        // JSON has no inf or nan; they are written as strings.
        if (std::isfinite(row.result)) {
            j[column] = row.result;
        } else {
            j[column] = format_number(row.result);
        }
        j["error"] = row.error;
        rows.push_back(std::move(j));
    }
    return {{"spec", sweep_spec_to_json(r.spec)}, {"rows", rows}};
}

}  // namespace ocs
