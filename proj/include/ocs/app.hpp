#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ocs/model_params.hpp"
#include "ocs/ode_core.hpp"
#include "ocs/sim_engine.hpp"
#include "ocs/sweep.hpp"
#include "ocs/value_surface.hpp"

namespace ocs {

/// Everything a CLI run depends on. Parameters come either in normalised
/// form (epsilon, delta) or market form (alpha, eta); beta and R always.
struct RunConfig {
    std::optional<double> epsilon, delta, alpha, eta, beta, R;
    AgentState state{1.0, 1.0, 1.0, 0.0};
    SimConfig sim;
    SurfaceOptions solver;
    std::size_t record_paths = 1;  ///< paths written by `simulate`
    std::optional<SweepSpec> sweep;

    /// Throws ConfigError when the parameters are missing or mixed.
    ModelParams params() const;
};

/// Missing sections keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
/// Fully resolved form, suitable for a manifest.
nlohmann::json config_to_json(const RunConfig& c);

enum class OutputFormat { Auto, Csv, Json };
OutputFormat format_from_string(const std::string& s);
std::string to_string(OutputFormat f);

struct CommandRequest {
    std::string command;  ///< classify | solve | evaluate | sweep | simulate | verify
    RunConfig config;
    OutputFormat format = OutputFormat::Auto;
    bool dump_ncurve = false;   ///< solve: also produce the n-curve table
    bool emit_surface = false;  ///< solve: also produce the surface as JSON
};

nlohmann::json request_to_json(const CommandRequest& r);
CommandRequest request_from_json(const nlohmann::json& j);

struct Artifact {
    std::string role;  ///< primary | ncurve | surface
    std::string content;
};

struct CommandResult {
    std::vector<Artifact> artifacts;  ///< primary first
    int exit_code = 0;
    std::string message;  ///< diagnostic for stderr
};

// Exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  ///< verify |z| > 4, manifest mismatch
inline constexpr int kExitBadInput = 2;     ///< malformed config or invalid parameters
inline constexpr int kExitSolverError = 3;  ///< regime or numerical failure

/// Runs one subcommand entirely in memory; output bytes depend only on the
/// request, never on timing or thread count.
CommandResult execute(const CommandRequest& req);

/// |z| above which `verify` fails.
inline constexpr double kVerifyZLimit = 4.0;

}  // namespace ocs
