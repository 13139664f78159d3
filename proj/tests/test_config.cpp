#include <catch2/catch_amalgamated.hpp>

#include "adko/config.hpp"

using namespace adko;
using nlohmann::json;

namespace {

json minimal_config() {
    return json::parse(R"({
        "method": "ADKO",
        "n_agents": 2,
        "rounds": 10,
        "warmup_rounds": 2,
        "seed": 3,
        "graph": {"kind": "COMPLETE"},
        "objective": {
            "kind": "SYNTHETIC_GP",
            "space": {"dims": [{"kind": "continuous", "low": 0.0, "high": 1.0, "grid": 8}]},
            "correlation": 0.5,
            "noise_std": 0.1,
            "aggregator": {"kind": "MEAN"}
        },
        "gp": {"lengthscale": 0.3},
        "reasoning": {"sim_bandwidth": 0.3}
    })");
}

}  // namespace

TEST_CASE("minimal config parses with defaults applied") {
    const RunConfig c = parse_run_config(minimal_config());
    CHECK(c.method == Method::kAdko);
    CHECK(c.n_agents == 2);
    CHECK(c.token.budget == 16);
    CHECK(c.pool_size == 20);
    CHECK(c.lm.m == 10);
    CHECK(c.gp.lengthscale.has_value());
    CHECK(*c.gp.lengthscale == 0.3);
}

TEST_CASE("unknown keys are rejected with the key named") {
    json j = minimal_config();
    j["surprise"] = 1;
    try {
        parse_run_config(j);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == "config");
        CHECK(e.message().find("surprise") != std::string::npos);
    }

    json nested = minimal_config();
    nested["objective"]["typo_key"] = true;
    try {
        parse_run_config(nested);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.message().find("typo_key") != std::string::npos);
        CHECK(e.message().find("objective") != std::string::npos);
    }
}

TEST_CASE("missing required keys are rejected with a path-precise message") {
    json j = minimal_config();
    j.erase("rounds");
    try {
        parse_run_config(j);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.message().find("rounds") != std::string::npos);
    }
}

TEST_CASE("out-of-range values fail before any computation") {
    json j = minimal_config();
    j["warmup_rounds"] = 0;
    CHECK_THROWS_AS(parse_run_config(j), Error);

    j = minimal_config();
    j["rounds"] = 1;  // below warmup_rounds
    CHECK_THROWS_AS(parse_run_config(j), Error);

    j = minimal_config();
    j["objective"]["correlation"] = 1.5;
    CHECK_THROWS_AS(parse_run_config(j), Error);

    j = minimal_config();
    j["token"] = {{"budget", 0}};
    CHECK_THROWS_AS(parse_run_config(j), Error);

    j = minimal_config();
    j["method"] = "NOT_A_METHOD";
    CHECK_THROWS_AS(parse_run_config(j), Error);
}

TEST_CASE("median heuristics are the string spelling") {
    json j = minimal_config();
    j["gp"]["lengthscale"] = "median";
    j["reasoning"]["sim_bandwidth"] = "median";
    const RunConfig c = parse_run_config(j);
    CHECK(!c.gp.lengthscale.has_value());
    CHECK(!c.reasoning.sim_bandwidth.has_value());

    j["gp"]["lengthscale"] = "bogus";
    CHECK_THROWS_AS(parse_run_config(j), Error);
}

TEST_CASE("config hash is canonical") {
    const RunConfig a = parse_run_config(minimal_config());

    // reordered keys and different whitespace: same semantics, same hash
    json reordered = json::parse(R"({
        "seed": 3,
        "rounds": 10,
        "n_agents": 2,
        "warmup_rounds": 2,
        "reasoning": {"sim_bandwidth": 0.3},
        "gp": {"lengthscale": 0.3},
        "objective": {
            "aggregator": {"kind": "MEAN"},
            "noise_std": 0.1,
            "correlation": 0.5,
            "space": {"dims": [{"grid": 8, "high": 1.0, "low": 0.0, "kind": "continuous"}]},
            "kind": "SYNTHETIC_GP"
        },
        "graph": {"kind": "COMPLETE"},
        "method": "ADKO"
    })");
    const RunConfig b = parse_run_config(reordered);
    CHECK(config_hash(a) == config_hash(b));

    // any semantic change moves the hash
    json changed = minimal_config();
    changed["seed"] = 4;
    CHECK(config_hash(parse_run_config(changed)) != config_hash(a));

    json changed2 = minimal_config();
    changed2["objective"]["noise_std"] = 0.2;
    CHECK(config_hash(parse_run_config(changed2)) != config_hash(a));
}

TEST_CASE("serialization round-trips") {
    json j = minimal_config();
    j["method"] = "ADKO_LM";
    j["lm"] = {{"m", 5}, {"sigma0", 0.7}, {"bias_amplitude", 0.2}, {"d_tv", 0.3}};
    j["token"] = {{"budget", 4},
                  {"baseline", {{"mode", "FIXED"}, {"value", 50.0}}},
                  {"privacy", {{"noise_std", 0.05}, {"levels", 8}}}};
    const RunConfig c = parse_run_config(j);
    const RunConfig back = parse_run_config(to_json(c));
    CHECK(config_hash(c) == config_hash(back));
    CHECK(back.lm.model.sigma0 == 0.7);
    CHECK(back.token.privacy.levels == 8);
    CHECK(back.token.baseline_mode == BaselineState::Mode::kFixed);
}

TEST_CASE("table restriction must assign one level per agent") {
    json j = minimal_config();
    j["objective"] = {{"kind", "TABLE"},
                      {"table_path", "x.csv"},
                      {"objective_column", "yield"},
                      {"restriction", {{"column", "solvent"}, {"assign", {"A", "B", "C"}}}}};
    // n_agents stays 2 but the restriction assigns 3 levels
    CHECK_THROWS_AS(parse_run_config(j), Error);
}
