#include <cmath>
#include <string>

#include "doctest.h"
#include "ocs/app.hpp"
#include "ocs/errors.hpp"
#include "ocs/manifest.hpp"
#include "ocs/sweep.hpp"

using namespace ocs;
using nlohmann::json;

namespace {
SweepSpec spec_of(const std::string& text) { return sweep_spec_from_json(json::parse(text)); }

CommandRequest request(const std::string& cmd, double eps, double delta, double R) {
    CommandRequest r;
    r.command = cmd;
    r.config.epsilon = eps;
    r.config.delta = delta;
    r.config.beta = 0.1;
    r.config.R = R;
    return r;
}
}  // namespace

TEST_CASE("sweep: q* increases with eps") {
    const SweepResult r = run_sweep(spec_of(R"({"vary":"epsilon","values":[0.4,0.6,0.8,1.0,1.2,1.4],
                                               "quantity":"q_star"})"));
    REQUIRE(r.rows.size() == 6);
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].result > r.rows[i - 1].result);
    CHECK(r.rows[3].result == doctest::Approx(0.6224651087963123).epsilon(1e-9));
}

TEST_CASE("sweep: g curves ordered in eps, mixed regimes labelled") {
    const SweepResult r = run_sweep(spec_of(R"({"vary":"epsilon","values":[0.5,1,1.5,2],"quantity":"g_curve",
                                               "grid":{"var":"z","values":{"from":0.01,"to":50,"count":30}}})"));
    REQUIRE(r.rows.size() == 120);
    for (std::size_t k = 0; k < 30; ++k) {
        for (std::size_t v = 1; v < 4; ++v) CHECK(r.rows[30 * v + k].result > r.rows[30 * (v - 1) + k].result);
    }
    CHECK(r.rows.front().regime == Regime::ThresholdSale);
    CHECK(r.rows.back().regime == Regime::CashFirst);
}

TEST_CASE("sweep: p* in theta is U-shaped") {
    const SweepResult r = run_sweep(spec_of(R"({"vary":"theta","values":{"from":0.05,"to":10,"count":200},
                                               "quantity":"p_star_curve"})"));
    std::size_t arg = 0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        if (r.rows[i].result < r.rows[arg].result) arg = i;
    }
    CHECK(r.rows[arg].value >= 0.7);
    CHECK(r.rows[arg].value <= 1.2);
    CHECK(arg > 0);
    CHECK(arg + 1 < r.rows.size());
}

TEST_CASE("sweep: failures become rows") {
    const SweepResult r = run_sweep(spec_of(R"({"vary":"epsilon","values":[1,3.5],"quantity":"z_star"})"));
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].error.empty());
    CHECK(r.rows[1].regime == Regime::IllPosed);
    CHECK(std::isnan(r.rows[1].result));
    CHECK(r.rows[1].error.find("IllPosed") == 0);
    const std::string csv = sweep_to_csv(r);
    CHECK(csv.find("# columns:") != std::string::npos);
    CHECK(csv.find("epsilon,regime,z_star,error\n") != std::string::npos);
    CHECK(csv.find("3.5,IllPosed,nan,") != std::string::npos);
    const json j = sweep_to_json(r);
    CHECK(j.at("rows").at(1).at("z_star") == "nan");
    // R = 1 inside a sweep is a parameter error on that row only.
    const SweepResult bad = run_sweep(spec_of(R"({"vary":"R","values":[0.5,1,2],"quantity":"q_star"})"));
    CHECK(bad.rows[1].error.size() > 0);
    CHECK_FALSE(bad.rows[1].regime.has_value());
    CHECK(bad.rows[2].error.empty());
}

TEST_CASE("sweep: spec validation and round trip") {
    CHECK_THROWS_AS(spec_of(R"({"vary":"epsilon","values":[1,1],"quantity":"q_star"})"), ConfigError);
    CHECK_THROWS_AS(spec_of(R"({"vary":"epsilon","values":[2,1,3],"quantity":"q_star"})"), ConfigError);
    CHECK_THROWS_AS(spec_of(R"({"vary":"z","values":[1,2],"quantity":"q_star"})"), ConfigError);
    CHECK_THROWS_AS(spec_of(R"({"vary":"epsilon","values":[1,2],"quantity":"volume"})"), ConfigError);
    CHECK_THROWS_AS(spec_of(R"({"vary":"epsilon","values":[1,2],"quantity":"q_star","fixed":{"gamma":1}})"),
                    ConfigError);
    CHECK_THROWS_AS(spec_of(R"({"vary":"epsilon","values":[1,2],"quantity":"g_curve",
                               "grid":{"var":"x","values":[1,2]}})"),
                    ConfigError);
    CHECK_THROWS_AS(spec_of(R"({"vary":"epsilon","values":[1,2],"quantity":"q_star",
                               "grid":{"var":"x","values":[1,2]}})"),
                    ConfigError);
    const SweepSpec s = spec_of(R"({"vary":"x","values":[1,2,4],"quantity":"p_curve","fixed":{"R":2},
                                   "grid":{"var":"theta","values":[0.5,1]}})");
    const SweepSpec t = sweep_spec_from_json(sweep_spec_to_json(s));
    CHECK(sweep_spec_to_json(t) == sweep_spec_to_json(s));
    CHECK(t.fixed.R == 2.0);
}

TEST_CASE("number formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 6.730334998939713, 1e-300, -2.5e17}) {
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(HUGE_VAL) == "inf");
    CHECK(format_number(-HUGE_VAL) == "-inf");
    CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("classify command") {
    CommandRequest r = request("classify", 2, 2, 0.5);
    r.format = OutputFormat::Json;
    const json j = json::parse(execute(r).artifacts.at(0).content);
    CHECK(j.at("regime") == "CashFirst");
    CHECK(j.at("thresholds").at("delta_sq_R").get<double>() == doctest::Approx(2.0));
    CHECK(j.at("thresholds").at("ill_posed").get<double>() == doctest::Approx(3.0));
    r.format = OutputFormat::Csv;
    CHECK(execute(r).artifacts.at(0).content.find("CashFirst,2,2,3") != std::string::npos);
    CHECK(json::parse(execute(request("classify", -1, 2, 0.5)).artifacts.at(0).content).at("regime") ==
          "SellImmediately");
    CHECK(json::parse(execute(request("classify", 1, 2, 2)).artifacts.at(0).content)
              .at("thresholds")
              .at("ill_posed") == "inf");
    CHECK_THROWS_AS(execute(request("classify", 1, 2, 1)), ParameterError);
}

TEST_CASE("evaluate and solve commands") {
    const json e = json::parse(execute(request("evaluate", 1, 2, 0.5)).artifacts.at(0).content);
    CHECK(e.at("V").get<double>() == doctest::Approx(6.730335).epsilon(1e-6));
    CHECK(e.at("p_star").get<double>() > 0);
    const json ill = json::parse(execute(request("evaluate", 3.5, 2, 0.5)).artifacts.at(0).content);
    CHECK(ill.at("V") == "inf");
    CommandRequest s = request("solve", 1, 2, 0.5);
    s.dump_ncurve = true;
    s.emit_surface = true;
    const CommandResult res = execute(s);
    REQUIRE(res.artifacts.size() == 3);
    CHECK(res.artifacts[1].role == "ncurve");
    CHECK(res.artifacts[1].content.find("q,n,m,ell,N,U,S\n") != std::string::npos);
    CHECK(res.artifacts[2].role == "surface");
    CHECK(json::parse(res.artifacts[0].content).at("q_star").get<double>() ==
          doctest::Approx(0.6224651087963123).epsilon(1e-9));
    CommandRequest sell = request("solve", -1, 2, 0.5);
    sell.dump_ncurve = true;
    CHECK_THROWS_AS(execute(sell), RegimeError);
}

TEST_CASE("verify command") {
    CommandRequest v = request("verify", -1, 2, 0.5);
    const json j = json::parse(execute(v).artifacts.at(0).content);
    CHECK(j.at("deterministic") == true);
    CHECK(j.at("z_score") == 0.0);
    CHECK(j.at("pass") == true);
    CHECK_THROWS_AS(execute(request("verify", 3.5, 2, 0.5)), RegimeError);
    CommandRequest bad = request("verify", 1, 2, 0.5);
    bad.config.sim.n_paths = 0;
    CHECK_THROWS_AS(execute(bad), ConfigError);
}

TEST_CASE("simulate command") {
    CommandRequest r = request("simulate", 1, 2, 0.5);
    r.config.sim.horizon_T = 0.01;
    r.config.record_paths = 2;
    const std::string csv = execute(r).artifacts.at(0).content;
    CHECK(csv.find("path,t,Y,J,L,Theta,X,C,U\n") != std::string::npos);
    CHECK(csv.find("\n1,0.01,") != std::string::npos);
    r.format = OutputFormat::Json;
    CHECK(json::parse(execute(r).artifacts.at(0).content).at("paths").size() == 2);
}

TEST_CASE("config JSON") {
    const RunConfig c = config_from_json(json::parse(R"({"params":{"alpha":0.1,"eta":0.6,"beta":0.1,"R":2},
        "state":{"x":2},"sim":{"n_paths":10,"seed":5},"solver":{"u_span":30}})"));
    CHECK(c.params().epsilon() == doctest::Approx(1.0));
    CHECK(c.state.x == 2.0);
    CHECK(c.state.theta == 1.0);
    CHECK(c.sim.n_paths == 10);
    CHECK(c.solver.u_span == 30.0);
    const RunConfig d = config_from_json(config_to_json(c));
    CHECK(config_to_json(d) == config_to_json(c));
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"params":{"epsilon":1,"gamma":2}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"extra":{}})")), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"sim":{"n_paths":"many"}})")), ConfigError);
    RunConfig mixed;
    mixed.epsilon = 1;
    mixed.delta = 2;
    mixed.alpha = 0.1;
    mixed.beta = 0.1;
    mixed.R = 0.5;
    CHECK_THROWS_AS(mixed.params(), ConfigError);
    CHECK_THROWS_AS(RunConfig{}.params(), ConfigError);
    CommandRequest r = request("sweep", 1, 2, 0.5);
    r.config.sweep = spec_of(R"({"vary":"epsilon","values":[1,2],"quantity":"q_star"})");
    const CommandRequest back = request_from_json(request_to_json(r));
    CHECK(request_to_json(back) == request_to_json(r));
}

TEST_CASE("manifest") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    RunManifest m;
    m.tool_version = std::string(tool_version());
    m.command = "verify";
    m.config = {{"a", 1}};
    m.seed = 42;
    m.created_utc = "2024-01-01T00:00:00Z";
    m.outputs.push_back({"primary", "out.json", sha256_hex("x"), 1});
    const RunManifest n = manifest_from_json(manifest_to_json(m));
    CHECK(manifest_to_json(n) == manifest_to_json(m));
    CHECK(sidecar_path("a.csv") == "a.csv.manifest.json");
    CHECK_THROWS_AS(manifest_from_json(json::parse("{}")), ConfigError);
}
