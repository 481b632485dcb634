#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ocs/model_params.hpp"

namespace ocs {

enum class SweepVar { Epsilon, Delta, R, Beta, X, Theta, Z };
enum class SweepQuantity { ZStar, QStar, GCurve, CCurve, PCurve, PStarCurve };

std::string_view to_string(SweepVar v) noexcept;
std::string_view to_string(SweepQuantity q) noexcept;
SweepVar sweep_var_from_string(std::string_view s);
SweepQuantity sweep_quantity_from_string(std::string_view s);

/// Everything held fixed by a sweep: normalised parameters and the state.
struct SweepFixed {
    double epsilon = 1.0;
    double delta = 2.0;
    double beta = 0.1;
    double R = 0.5;
    double x = 1.0;
    double y = 1.0;
    double theta = 1.0;
};

/// Comparative statics: one parameter or state coordinate takes the listed
/// values; curve quantities may additionally run over a grid in z, x or theta.
struct SweepSpec {
    SweepVar vary = SweepVar::Epsilon;
    std::vector<double> values;
    SweepFixed fixed;
    SweepQuantity quantity = SweepQuantity::QStar;
    std::optional<SweepVar> grid_var;
    std::vector<double> grid;

    /// Throws ConfigError when the spec is inconsistent.
    void validate() const;
};

/// Parses {"vary", "values", "fixed", "quantity", "grid"}; values and grid
/// points are either a list or {"from", "to", "count"}.
SweepSpec sweep_spec_from_json(const nlohmann::json& j);
nlohmann::json sweep_spec_to_json(const SweepSpec& s);

struct SweepRow {
    double value = 0.0;
    double grid = 0.0;                  ///< meaningful when the spec has a grid
    std::optional<Regime> regime;       ///< empty when the parameters were rejected
    double result = 0.0;                ///< NaN on error
    std::string error;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepRow> rows;  ///< in spec order: values outer, grid inner
};

/// Rows are computed concurrently and stored in spec order. Solver failures
/// become rows with a message; the run continues.
SweepResult run_sweep(const SweepSpec& spec);

/// CSV with a commented header that documents the columns.
std::string sweep_to_csv(const SweepResult& r);
nlohmann::json sweep_to_json(const SweepResult& r);

/// Fixed 17-significant-digit rendering used by every CSV writer.
std::string format_number(double v);

}  // namespace ocs
