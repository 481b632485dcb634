// ocs: command-line front end for the sell-only consumption model.
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ocs/app.hpp"
#include "ocs/errors.hpp"
#include "ocs/manifest.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ocs::ConfigError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ocs::ConfigError("cannot write '" + path + "'");
    out << content;
    if (!out.flush()) throw ocs::ConfigError("write to '" + path + "' failed");
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ocs::ConfigError(what + " is not valid JSON: " + e.what());
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int exit_code_for(const ocs::Error& e) {
    if (dynamic_cast<const ocs::ConfigError*>(&e) || dynamic_cast<const ocs::ParameterError*>(&e) ||
        dynamic_cast<const ocs::DomainError*>(&e)) {
        return ocs::kExitBadInput;
    }
    return ocs::kExitSolverError;
}

int check_manifest(const std::string& path) {
    const ocs::RunManifest m = ocs::manifest_from_json(parse_json(read_file(path), path));
    const ocs::CommandRequest req = ocs::request_from_json(m.config);
    const ocs::CommandResult res = ocs::execute(req);
    int status = ocs::kExitOk;
    if (m.tool_version != ocs::tool_version()) {
        std::cerr << "note: manifest written by version " << m.tool_version << ", running "
                  << ocs::tool_version() << "\n";
    }
    for (const ocs::ManifestFile& f : m.outputs) {
        const ocs::Artifact* art = nullptr;
        for (const ocs::Artifact& a : res.artifacts) {
            if (a.role == f.role) art = &a;
        }
        if (!art) {
            std::cout << "MISSING  " << f.path << " (rerun produced no '" << f.role << "' output)\n";
            status = ocs::kExitCheckFailed;
            continue;
        }
        const std::string rerun = ocs::sha256_hex(art->content);
        const bool rerun_ok = rerun == f.sha256;
        std::string disk = "absent";
        bool disk_ok = false;
        try {
            disk = ocs::sha256_file(f.path);
            disk_ok = disk == f.sha256;
        } catch (const ocs::Error&) {
        }
        std::cout << (rerun_ok && disk_ok ? "OK       " : "MISMATCH ") << f.path << " recorded=" << f.sha256
                  << " rerun=" << rerun << " disk=" << disk << "\n";
        if (!rerun_ok || !disk_ok) status = ocs::kExitCheckFailed;
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal consumption and sale of a non-tradable risky endowment.\n"
                 "Thread count: OCS_NUM_THREADS (default: OpenMP runtime)."};
    app.set_version_flag("--version", std::string(ocs::tool_version()));

    std::string config_path, out_path, format_name = "auto", manifest_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "RNG seed (overrides the config)");
    app.add_option("--out", out_path, "output file; a <out>.manifest.json sidecar is written next to it");
    app.add_option("--format", format_name, "csv | json (default: from --out extension, else per command)")
        ->check(CLI::IsMember({"auto", "csv", "json"}));
    app.add_option("--check-manifest", manifest_path, "rerun a manifest and compare output digests")
        ->check(CLI::ExistingFile);

    std::optional<double> epsilon, delta, alpha, eta, beta, R, x, y, theta, t;
    auto* params = app.add_option_group("parameters");
    params->add_option("--epsilon", epsilon, "alpha / beta");
    params->add_option("--delta", delta, "eta / sqrt(beta)");
    params->add_option("--alpha", alpha, "drift of the endowed asset");
    params->add_option("--eta", eta, "volatility of the endowed asset");
    params->add_option("--beta", beta, "discount rate");
    params->add_option("--R", R, "relative risk aversion");
    params->add_option("--x", x, "cash");
    params->add_option("--y", y, "asset price");
    params->add_option("--theta", theta, "units of the endowed asset");
    params->add_option("--t", t, "current time");

    std::optional<std::size_t> n_paths, record_paths, stride;
    std::optional<double> dt, horizon;
    std::string ncurve_path, surface_path;
    bool antithetic = false;

    app.add_subcommand("classify", "regime and its thresholds")->fallthrough();
    auto* solve = app.add_subcommand("solve", "build the value surface");
    solve->fallthrough();
    solve->add_option("--dump-ncurve", ncurve_path, "also write the n-curve table (CSV)");
    solve->add_option("--emit-surface", surface_path, "also write the value surface (JSON)");
    app.add_subcommand("evaluate", "value and optimal policy at the state")->fallthrough();
    app.add_subcommand("sweep", "comparative statics from the config's sweep section")->fallthrough();
    auto* simulate = app.add_subcommand("simulate", "simulate optimally controlled paths");
    auto* verify = app.add_subcommand("verify", "Monte Carlo check against the analytic value");
    for (CLI::App* sub : {simulate, verify}) {
        sub->fallthrough();
        sub->add_option("--dt", dt, "time step");
        sub->add_option("--horizon", horizon, "horizon T (0 = default from the decay rate)");
        sub->add_flag("--antithetic", antithetic, "antithetic pairs");
    }
    simulate->add_option("--paths", record_paths, "number of paths to write");
    simulate->add_option("--stride", stride, "write every k-th step");
    verify->add_option("--paths", n_paths, "Monte Carlo paths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : ocs::kExitBadInput;
    }

    try {
        if (!manifest_path.empty()) {
            if (!app.get_subcommands().empty()) throw ocs::ConfigError("--check-manifest takes no subcommand");
            return check_manifest(manifest_path);
        }
        if (app.get_subcommands().size() != 1) {
            std::cerr << app.help();
            return ocs::kExitBadInput;
        }

        ocs::CommandRequest req;
        req.command = app.get_subcommands().front()->get_name();
        if (!config_path.empty()) req.config = ocs::config_from_json(parse_json(read_file(config_path), config_path));
        ocs::RunConfig& c = req.config;
        // Parameter flags replace the config's parameter form wholesale when they switch it.
        if (epsilon || delta) c.alpha.reset(), c.eta.reset();
        if (alpha || eta) c.epsilon.reset(), c.delta.reset();
        for (auto [flag, slot] : {std::pair{&epsilon, &c.epsilon}, {&delta, &c.delta}, {&alpha, &c.alpha},
                                  {&eta, &c.eta}, {&beta, &c.beta}, {&R, &c.R}}) {
            if (*flag) *slot = *flag;
        }
        if (x) c.state.x = *x;
        if (y) c.state.y = *y;
        if (theta) c.state.theta = *theta;
        if (t) c.state.t = *t;
        if (seed) c.sim.seed = *seed;
        if (dt) c.sim.dt = *dt;
        if (horizon) c.sim.horizon_T = *horizon;
        if (antithetic) c.sim.antithetic = true;
        if (n_paths) c.sim.n_paths = *n_paths;
        if (record_paths) c.record_paths = *record_paths;
        if (stride) c.sim.record_stride = *stride;
        c.sim.validate();

        req.format = ocs::format_from_string(format_name);
        if (req.format == ocs::OutputFormat::Auto && !out_path.empty()) {
            if (ends_with(out_path, ".csv")) req.format = ocs::OutputFormat::Csv;
            if (ends_with(out_path, ".json")) req.format = ocs::OutputFormat::Json;
        }
        req.dump_ncurve = !ncurve_path.empty();
        req.emit_surface = !surface_path.empty();

        const ocs::CommandResult res = ocs::execute(req);
        ocs::RunManifest m;
        m.tool_version = std::string(ocs::tool_version());
        m.command = req.command;
        m.config = ocs::request_to_json(req);
        m.seed = c.sim.seed;
        m.created_utc = ocs::manifest_timestamp();
        for (const ocs::Artifact& a : res.artifacts) {
            const std::string& path = a.role == "ncurve" ? ncurve_path : a.role == "surface" ? surface_path : out_path;
            if (path.empty()) {
                std::cout << a.content;
                continue;
            }
            write_file(path, a.content);
            m.outputs.push_back({a.role, path, ocs::sha256_hex(a.content), a.content.size()});
        }
        // Each written file gets its own sidecar; they are identical and list every file of the run.
        const std::string manifest = ocs::manifest_to_json(m).dump(2) + "\n";
        for (const ocs::ManifestFile& f : m.outputs) write_file(ocs::sidecar_path(f.path), manifest);
        if (!res.message.empty()) std::cerr << res.message << "\n";
        return res.exit_code;
    } catch (const ocs::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ocs::kExitSolverError;
    }
}
