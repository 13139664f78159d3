#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adko/benchmark.hpp"
#include "adko/design_space.hpp"
#include "adko/error.hpp"
#include "adko/gp.hpp"
#include "adko/graph.hpp"
#include "adko/lm.hpp"
#include "adko/reasoning.hpp"
#include "adko/token.hpp"
#include "json.hpp"

namespace adko {

enum class Method { kAdko, kAdkoLm, kAdkoFifo, kNaiveSharing, kIndependent, kCentralized };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::kAdko: return "ADKO";
        case Method::kAdkoLm: return "ADKO_LM";
        case Method::kAdkoFifo: return "ADKO_FIFO";
        case Method::kNaiveSharing: return "NAIVE_SHARING";
        case Method::kIndependent: return "INDEPENDENT";
        case Method::kCentralized: return "CENTRALIZED";
    }
    return "?";
}

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::kSyntheticGp;
    // synthetic
    std::vector<Dimension> dims;
    double correlation = 0.7;
    double sample_lengthscale = 0.3;
    double sample_signal_variance = 1.0;
    // table
    std::string table_path;
    std::string objective_column;
    std::optional<TableRestriction> restriction;
    // shared
    double noise_std = 0.0;
    AggregatorSpec aggregator;
};

struct TokenConfig {
    int budget = 16;
    double recency_weight = 0.1;
    BaselineState::Mode baseline_mode = BaselineState::Mode::kRunningMedian;
    double baseline_value = 0.0;
    PrivacyConfig privacy;
};

struct GpConfig {
    std::optional<double> lengthscale;  // nullopt = median heuristic over warm-up
    double signal_variance = 1.0;
    double noise_variance = 1e-2;
};

struct ReasoningConfig {
    double beta = 2.0;
    double lambda = 1.0;
    double gamma = 1.5;
    std::optional<double> sim_bandwidth;  // nullopt = median heuristic
};

struct LmConfig {
    int m = 10;
    LmErrorModel model;
    std::string adapter_cmd;  // empty = synthetic; env ADKO_LM_ADAPTER overrides empty
    int adapter_timeout_ms = 10000;
};

struct RunConfig {
    Method method = Method::kAdko;
    int n_agents = 4;
    int rounds = 60;         // total, warm-up included
    int warmup_rounds = 5;
    std::uint64_t seed = 1;
    GraphSpec graph;
    ObjectiveSpec objective;
    TokenConfig token;
    GpConfig gp;
    ReasoningConfig reasoning;
    LmConfig lm;
    int pool_size = 20;
    bool capture_messages = false;
    std::string run_id;

    void validate() const {
        require(n_agents >= 1, "config", "n_agents must be >= 1");
        require(warmup_rounds >= 1, "config", "warmup_rounds must be >= 1");
        require(rounds >= warmup_rounds, "config", "rounds must be >= warmup_rounds");
        require(token.budget >= 1, "config", "token budget must be >= 1");
        require(token.recency_weight > 0.0, "config", "recency_weight must be positive");
        require(pool_size >= 1, "config", "pool_size must be >= 1");
        require(gp.signal_variance > 0.0 && gp.noise_variance > 0.0, "config",
                "gp variances must be positive");
        if (gp.lengthscale) require(*gp.lengthscale > 0.0, "config", "lengthscale must be positive");
        if (reasoning.sim_bandwidth)
            require(*reasoning.sim_bandwidth > 0.0, "config", "sim_bandwidth must be positive");
        require(reasoning.beta >= 0.0 && reasoning.lambda >= 0.0 && reasoning.gamma >= 0.0,
                "config", "reasoning weights must be non-negative");
        require(lm.m >= 1, "config", "lm.m must be >= 1");
        lm.model.validate();
        require(objective.noise_std >= 0.0, "config", "noise_std must be non-negative");
        if (objective.kind == ObjectiveKind::kSyntheticGp) {
            require(!objective.dims.empty(), "config", "synthetic objective needs a space");
            require(objective.correlation >= 0.0 && objective.correlation <= 1.0, "config",
                    "correlation must lie in [0,1]");
        } else {
            require(!objective.table_path.empty(), "config", "table objective needs a path");
            require(!objective.objective_column.empty(), "config",
                    "table objective needs an objective_column");
            if (objective.restriction)
                require(static_cast<int>(objective.restriction->assign.size()) == n_agents,
                        "config", "restriction must assign exactly one level per agent");
        }
        if (token.baseline_mode == BaselineState::Mode::kFixed)
            require(std::isfinite(token.baseline_value), "config",
                    "FIXED baseline needs a finite value");
    }
};

// ---------------------------------------------------------------------------
// Strict JSON parsing: unknown keys, missing required keys and out-of-range
// values all fail before any computation, with a path-precise message.

namespace cfg {

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       const std::set<std::string>& allowed) {
    require(j.is_object(), "config", path + ": expected an object");
    for (const auto& [key, _] : j.items())
        require(allowed.count(key) > 0, "config", path + ": unknown key '" + key + "'");
}

inline const nlohmann::json& get_req(const nlohmann::json& j, const std::string& path,
                                     const char* key) {
    require(j.contains(key), "config", path + ": missing required key '" + key + "'");
    return j.at(key);
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& path, const char* key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error("config", path + ": key '" + key + "' has the wrong type");
    }
}

template <typename T>
T as(const nlohmann::json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error("config", path + ": wrong type");
    }
}

}  // namespace cfg

inline GraphKind graph_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "RING") return GraphKind::kRing;
    if (s == "COMPLETE") return GraphKind::kComplete;
    if (s == "RANDOM_GEOMETRIC") return GraphKind::kRandomGeometric;
    if (s == "PATH") return GraphKind::kPath;
    if (s == "EDGE_LIST") return GraphKind::kEdgeList;
    throw Error("config", path + ": unknown graph kind '" + s + "'");
}

inline Method method_from_string(const std::string& s, const std::string& path) {
    if (s == "ADKO") return Method::kAdko;
    if (s == "ADKO_LM") return Method::kAdkoLm;
    if (s == "ADKO_FIFO") return Method::kAdkoFifo;
    if (s == "NAIVE_SHARING") return Method::kNaiveSharing;
    if (s == "INDEPENDENT") return Method::kIndependent;
    if (s == "CENTRALIZED") return Method::kCentralized;
    throw Error("config", path + ": unknown method '" + s + "'");
}

inline RunConfig parse_run_config(const nlohmann::json& j, const std::string& path = "$") {
    cfg::check_keys(j, path,
                    {"method", "n_agents", "rounds", "warmup_rounds", "seed", "graph",
                     "objective", "token", "gp", "reasoning", "lm", "pool_size",
                     "capture_messages", "run_id"});
    RunConfig c;
    c.method = method_from_string(
        cfg::as<std::string>(cfg::get_req(j, path, "method"), path + ".method"),
        path + ".method");
    c.n_agents = cfg::as<int>(cfg::get_req(j, path, "n_agents"), path + ".n_agents");
    c.rounds = cfg::as<int>(cfg::get_req(j, path, "rounds"), path + ".rounds");
    c.warmup_rounds = cfg::get_or<int>(j, path, "warmup_rounds", 3);
    c.seed = cfg::get_or<std::uint64_t>(j, path, "seed", 1);
    c.pool_size = cfg::get_or<int>(j, path, "pool_size", 20);
    c.capture_messages = cfg::get_or<bool>(j, path, "capture_messages", false);
    c.run_id = cfg::get_or<std::string>(j, path, "run_id", "");

    if (j.contains("graph")) {
        const auto& g = j.at("graph");
        const std::string gp = path + ".graph";
        cfg::check_keys(g, gp, {"kind", "radius", "edge_file", "gossip_relay"});
        c.graph.kind = graph_kind_from_string(
            cfg::as<std::string>(cfg::get_req(g, gp, "kind"), gp + ".kind"), gp + ".kind");
        c.graph.radius = cfg::get_or<double>(g, gp, "radius", 0.6);
        c.graph.edge_file = cfg::get_or<std::string>(g, gp, "edge_file", "");
        c.graph.gossip_relay = cfg::get_or<bool>(g, gp, "gossip_relay", false);
    }

    {
        const auto& o = cfg::get_req(j, path, "objective");
        const std::string op = path + ".objective";
        cfg::check_keys(o, op,
                        {"kind", "space", "correlation", "sample_lengthscale",
                         "sample_signal_variance", "table_path", "objective_column",
                         "restriction", "noise_std", "aggregator"});
        const std::string kind =
            cfg::as<std::string>(cfg::get_req(o, op, "kind"), op + ".kind");
        if (kind == "SYNTHETIC_GP")
            c.objective.kind = ObjectiveKind::kSyntheticGp;
        else if (kind == "TABLE")
            c.objective.kind = ObjectiveKind::kTable;
        else
            throw Error("config", op + ".kind: unknown objective kind '" + kind + "'");
        c.objective.noise_std = cfg::get_or<double>(o, op, "noise_std", 0.0);
        c.objective.correlation = cfg::get_or<double>(o, op, "correlation", 0.7);
        c.objective.sample_lengthscale = cfg::get_or<double>(o, op, "sample_lengthscale", 0.3);
        c.objective.sample_signal_variance =
            cfg::get_or<double>(o, op, "sample_signal_variance", 1.0);
        if (o.contains("space")) {
            const auto& sp = o.at("space");
            const std::string spp = op + ".space";
            cfg::check_keys(sp, spp, {"dims"});
            for (std::size_t d = 0; d < cfg::get_req(sp, spp, "dims").size(); ++d) {
                const auto& dim = sp.at("dims").at(d);
                const std::string dp = spp + ".dims[" + std::to_string(d) + "]";
                cfg::check_keys(dim, dp, {"kind", "low", "high", "grid", "levels"});
                const std::string dkind =
                    cfg::as<std::string>(cfg::get_req(dim, dp, "kind"), dp + ".kind");
                if (dkind == "continuous") {
                    ContinuousDim cd;
                    cd.low = cfg::get_or<double>(dim, dp, "low", 0.0);
                    cd.high = cfg::get_or<double>(dim, dp, "high", 1.0);
                    cd.grid = cfg::as<int>(cfg::get_req(dim, dp, "grid"), dp + ".grid");
                    c.objective.dims.emplace_back(cd);
                } else if (dkind == "categorical") {
                    CategoricalDim cat;
                    cat.levels = cfg::as<std::vector<std::string>>(
                        cfg::get_req(dim, dp, "levels"), dp + ".levels");
                    c.objective.dims.emplace_back(cat);
                } else {
                    throw Error("config", dp + ".kind: unknown dimension kind '" + dkind + "'");
                }
            }
        }
        c.objective.table_path = cfg::get_or<std::string>(o, op, "table_path", "");
        c.objective.objective_column = cfg::get_or<std::string>(o, op, "objective_column", "");
        if (o.contains("restriction")) {
            const auto& r = o.at("restriction");
            const std::string rp = op + ".restriction";
            cfg::check_keys(r, rp, {"column", "assign"});
            TableRestriction tr;
            tr.column = cfg::as<std::string>(cfg::get_req(r, rp, "column"), rp + ".column");
            tr.assign = cfg::as<std::vector<std::string>>(cfg::get_req(r, rp, "assign"),
                                                          rp + ".assign");
            c.objective.restriction = std::move(tr);
        }
        if (o.contains("aggregator")) {
            const auto& a = o.at("aggregator");
            const std::string ap = op + ".aggregator";
            cfg::check_keys(a, ap, {"kind", "weights"});
            const std::string akind =
                cfg::as<std::string>(cfg::get_req(a, ap, "kind"), ap + ".kind");
            if (akind == "MEAN")
                c.objective.aggregator.kind = AggregatorSpec::Kind::kMean;
            else if (akind == "MIN")
                c.objective.aggregator.kind = AggregatorSpec::Kind::kMin;
            else if (akind == "WEIGHTED")
                c.objective.aggregator.kind = AggregatorSpec::Kind::kWeighted;
            else
                throw Error("config", ap + ".kind: unknown aggregator '" + akind + "'");
            c.objective.aggregator.weights =
                cfg::get_or<std::vector<double>>(a, ap, "weights", {});
        }
    }

    if (j.contains("token")) {
        const auto& t = j.at("token");
        const std::string tp = path + ".token";
        cfg::check_keys(t, tp, {"budget", "recency_weight", "baseline", "privacy"});
        c.token.budget = cfg::get_or<int>(t, tp, "budget", 16);
        c.token.recency_weight = cfg::get_or<double>(t, tp, "recency_weight", 0.1);
        if (t.contains("baseline")) {
            const auto& b = t.at("baseline");
            const std::string bp = tp + ".baseline";
            cfg::check_keys(b, bp, {"mode", "value"});
            const std::string mode =
                cfg::as<std::string>(cfg::get_req(b, bp, "mode"), bp + ".mode");
            if (mode == "FIXED")
                c.token.baseline_mode = BaselineState::Mode::kFixed;
            else if (mode == "RUNNING_MEDIAN")
                c.token.baseline_mode = BaselineState::Mode::kRunningMedian;
            else
                throw Error("config", bp + ".mode: unknown baseline mode '" + mode + "'");
            c.token.baseline_value = cfg::get_or<double>(b, bp, "value", 0.0);
        }
        if (t.contains("privacy")) {
            const auto& p = t.at("privacy");
            const std::string pp = tp + ".privacy";
            cfg::check_keys(p, pp, {"noise_std", "levels"});
            c.token.privacy.noise_std = cfg::get_or<double>(p, pp, "noise_std", 0.0);
            c.token.privacy.levels = cfg::get_or<int>(p, pp, "levels", 0);
            require(c.token.privacy.noise_std >= 0.0, "config",
                    pp + ".noise_std: must be non-negative");
            require(c.token.privacy.levels >= 0, "config", pp + ".levels: must be >= 0");
        }
    }

    if (j.contains("gp")) {
        const auto& g = j.at("gp");
        const std::string gp = path + ".gp";
        cfg::check_keys(g, gp, {"lengthscale", "signal_variance", "noise_variance"});
        if (g.contains("lengthscale") && !g.at("lengthscale").is_string())
            c.gp.lengthscale = cfg::as<double>(g.at("lengthscale"), gp + ".lengthscale");
        else if (g.contains("lengthscale"))
            require(g.at("lengthscale").get<std::string>() == "median", "config",
                    gp + ".lengthscale: expected a number or \"median\"");
        c.gp.signal_variance = cfg::get_or<double>(g, gp, "signal_variance", 1.0);
        c.gp.noise_variance = cfg::get_or<double>(g, gp, "noise_variance", 1e-2);
    }

    if (j.contains("reasoning")) {
        const auto& r = j.at("reasoning");
        const std::string rp = path + ".reasoning";
        cfg::check_keys(r, rp, {"beta", "lambda", "gamma", "sim_bandwidth"});
        c.reasoning.beta = cfg::get_or<double>(r, rp, "beta", 2.0);
        c.reasoning.lambda = cfg::get_or<double>(r, rp, "lambda", 1.0);
        c.reasoning.gamma = cfg::get_or<double>(r, rp, "gamma", 1.5);
        if (r.contains("sim_bandwidth") && !r.at("sim_bandwidth").is_string())
            c.reasoning.sim_bandwidth =
                cfg::as<double>(r.at("sim_bandwidth"), rp + ".sim_bandwidth");
        else if (r.contains("sim_bandwidth"))
            require(r.at("sim_bandwidth").get<std::string>() == "median", "config",
                    rp + ".sim_bandwidth: expected a number or \"median\"");
    }

    if (j.contains("lm")) {
        const auto& l = j.at("lm");
        const std::string lp = path + ".lm";
        cfg::check_keys(l, lp,
                        {"m", "sigma0", "alpha_sigma", "bias_amplitude", "bias_field_seed",
                         "d_tv", "bias_kind", "half_space_center", "half_space_direction",
                         "adapter_cmd", "adapter_timeout_ms"});
        c.lm.m = cfg::get_or<int>(l, lp, "m", 10);
        c.lm.model.sigma0 = cfg::get_or<double>(l, lp, "sigma0", 0.5);
        c.lm.model.alpha_sigma = cfg::get_or<double>(l, lp, "alpha_sigma", 1.0);
        c.lm.model.bias_amplitude = cfg::get_or<double>(l, lp, "bias_amplitude", 0.0);
        c.lm.model.bias_field_seed = cfg::get_or<std::uint64_t>(l, lp, "bias_field_seed", 0);
        c.lm.model.d_tv = cfg::get_or<double>(l, lp, "d_tv", 0.0);
        const std::string bk = cfg::get_or<std::string>(l, lp, "bias_kind", "FOURIER");
        if (bk == "FOURIER")
            c.lm.model.bias_kind = BiasKind::kFourier;
        else if (bk == "HALF_SPACE")
            c.lm.model.bias_kind = BiasKind::kHalfSpace;
        else
            throw Error("config", lp + ".bias_kind: unknown bias kind '" + bk + "'");
        c.lm.model.half_space_center =
            cfg::get_or<std::vector<double>>(l, lp, "half_space_center", {});
        c.lm.model.half_space_direction =
            cfg::get_or<std::vector<double>>(l, lp, "half_space_direction", {});
        c.lm.adapter_cmd = cfg::get_or<std::string>(l, lp, "adapter_cmd", "");
        c.lm.adapter_timeout_ms = cfg::get_or<int>(l, lp, "adapter_timeout_ms", 10000);
    }

    c.validate();
    return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["method"] = to_string(c.method);
    j["n_agents"] = c.n_agents;
    j["rounds"] = c.rounds;
    j["warmup_rounds"] = c.warmup_rounds;
    j["seed"] = c.seed;
    j["pool_size"] = c.pool_size;
    j["capture_messages"] = c.capture_messages;
    if (!c.run_id.empty()) j["run_id"] = c.run_id;

    nlohmann::json g;
    g["kind"] = to_string(c.graph.kind);
    g["radius"] = c.graph.radius;
    g["edge_file"] = c.graph.edge_file;
    g["gossip_relay"] = c.graph.gossip_relay;
    j["graph"] = g;

    nlohmann::json o;
    o["kind"] = c.objective.kind == ObjectiveKind::kSyntheticGp ? "SYNTHETIC_GP" : "TABLE";
    o["noise_std"] = c.objective.noise_std;
    if (c.objective.kind == ObjectiveKind::kSyntheticGp) {
        o["correlation"] = c.objective.correlation;
        o["sample_lengthscale"] = c.objective.sample_lengthscale;
        o["sample_signal_variance"] = c.objective.sample_signal_variance;
        nlohmann::json dims = nlohmann::json::array();
        for (const auto& d : c.objective.dims) {
            if (const auto* cd = std::get_if<ContinuousDim>(&d))
                dims.push_back({{"kind", "continuous"},
                                {"low", cd->low},
                                {"high", cd->high},
                                {"grid", cd->grid}});
            else
                dims.push_back({{"kind", "categorical"},
                                {"levels", std::get<CategoricalDim>(d).levels}});
        }
        o["space"] = {{"dims", dims}};
    } else {
        o["table_path"] = c.objective.table_path;
        o["objective_column"] = c.objective.objective_column;
        if (c.objective.restriction)
            o["restriction"] = {{"column", c.objective.restriction->column},
                                {"assign", c.objective.restriction->assign}};
    }
    nlohmann::json a;
    a["kind"] = c.objective.aggregator.kind == AggregatorSpec::Kind::kMean ? "MEAN"
                : c.objective.aggregator.kind == AggregatorSpec::Kind::kMin ? "MIN"
                                                                            : "WEIGHTED";
    if (!c.objective.aggregator.weights.empty()) a["weights"] = c.objective.aggregator.weights;
    o["aggregator"] = a;
    j["objective"] = o;

    nlohmann::json t;
    t["budget"] = c.token.budget;
    t["recency_weight"] = c.token.recency_weight;
    t["baseline"] = {{"mode", c.token.baseline_mode == BaselineState::Mode::kFixed
                                  ? "FIXED"
                                  : "RUNNING_MEDIAN"},
                     {"value", c.token.baseline_value}};
    t["privacy"] = {{"noise_std", c.token.privacy.noise_std},
                    {"levels", c.token.privacy.levels}};
    j["token"] = t;

    nlohmann::json gpj;
    if (c.gp.lengthscale)
        gpj["lengthscale"] = *c.gp.lengthscale;
    else
        gpj["lengthscale"] = "median";
    gpj["signal_variance"] = c.gp.signal_variance;
    gpj["noise_variance"] = c.gp.noise_variance;
    j["gp"] = gpj;

    nlohmann::json r;
    r["beta"] = c.reasoning.beta;
    r["lambda"] = c.reasoning.lambda;
    r["gamma"] = c.reasoning.gamma;
    if (c.reasoning.sim_bandwidth)
        r["sim_bandwidth"] = *c.reasoning.sim_bandwidth;
    else
        r["sim_bandwidth"] = "median";
    j["reasoning"] = r;

    nlohmann::json l;
    l["m"] = c.lm.m;
    l["sigma0"] = c.lm.model.sigma0;
    l["alpha_sigma"] = c.lm.model.alpha_sigma;
    l["bias_amplitude"] = c.lm.model.bias_amplitude;
    l["bias_field_seed"] = c.lm.model.bias_field_seed;
    l["d_tv"] = c.lm.model.d_tv;
    l["bias_kind"] = c.lm.model.bias_kind == BiasKind::kFourier ? "FOURIER" : "HALF_SPACE";
    if (!c.lm.model.half_space_center.empty())
        l["half_space_center"] = c.lm.model.half_space_center;
    if (!c.lm.model.half_space_direction.empty())
        l["half_space_direction"] = c.lm.model.half_space_direction;
    l["adapter_cmd"] = c.lm.adapter_cmd;
    l["adapter_timeout_ms"] = c.lm.adapter_timeout_ms;
    j["lm"] = l;

    return j;
}

/// Canonical 64-bit config hash: parse -> canonical dump (sorted keys, no
/// whitespace) -> FNV-1a. Insensitive to key order and formatting of the
/// source file, sensitive to every semantic field.
inline std::string config_hash(const RunConfig& c) {
    const std::string canon = to_json(c).dump();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canon)));
    return std::string(buf);
}

/// Rebuilds the objective family a config describes; deterministic given
/// (config, seed), which is what makes logs self-describing.
inline ObjectiveFamily build_objective(const RunConfig& c) {
    if (c.objective.kind == ObjectiveKind::kSyntheticGp) {
        DesignSpace space(c.objective.dims);
        const KernelParams kp = KernelParams::isotropic(
            space.dim(), c.objective.sample_lengthscale, c.objective.sample_signal_variance,
            1e-6);
        return ObjectiveFamily::sample_synthetic(std::move(space), kp, c.objective.correlation,
                                                 c.n_agents, c.objective.noise_std,
                                                 derive_seed(c.seed, "objective"));
    }
    return load_table(c.objective.table_path, c.objective.objective_column,
                      c.objective.restriction, c.n_agents, c.objective.noise_std);
}

}  // namespace adko
