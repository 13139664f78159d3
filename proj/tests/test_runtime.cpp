#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <set>

#include "adko/metrics.hpp"
#include "adko/runtime.hpp"

using namespace adko;

namespace {

const std::string kDataDir = ADKO_DATA_DIR;

RunConfig small_config(Method method, std::uint64_t seed) {
    RunConfig c;
    c.method = method;
    c.n_agents = 3;
    c.rounds = 14;
    c.warmup_rounds = 3;
    c.seed = seed;
    c.graph.kind = GraphKind::kComplete;
    c.objective.kind = ObjectiveKind::kSyntheticGp;
    c.objective.dims = {ContinuousDim{0.0, 1.0, 10}, ContinuousDim{0.0, 1.0, 10}};
    c.objective.correlation = 0.7;
    c.objective.noise_std = 0.05;
    c.token.budget = 8;
    c.gp.lengthscale = 0.3;
    c.reasoning.sim_bandwidth = 0.3;
    c.pool_size = 10;
    return c;
}

}  // namespace

TEST_CASE("seeded runs are byte-identical") {
    const RunConfig c = small_config(Method::kAdko, 5);
    const RunLog a = run(c);
    const RunLog b = run(c);
    CHECK(to_csv(a) == to_csv(b));
    CHECK(a.cumulative_regret == b.cumulative_regret);
}

TEST_CASE("round and dataset accounting") {
    const RunConfig c = small_config(Method::kAdko, 6);
    const RunLog log = run(c);
    CHECK(static_cast<int>(log.records.size()) == c.n_agents * c.rounds);
    // per agent: exactly `rounds` records in round order 1..T
    std::map<int, int> per_agent;
    for (const auto& r : log.records) per_agent[r.agent]++;
    for (int a = 0; a < c.n_agents; ++a) CHECK(per_agent[a] == c.rounds);
    CHECK(log.recompute_cumulative_regret() == log.cumulative_regret);
    for (const auto& r : log.records) CHECK(r.simple_regret >= 0.0);
}

TEST_CASE("independent runs never send tokens") {
    const RunConfig c = small_config(Method::kIndependent, 7);
    const RunLog log = run(c);
    for (const auto& r : log.records) {
        CHECK(r.tokens_sent == 0);
        CHECK(r.bytes_sent == 0);
        CHECK(r.memory_mean_fidelity == 0.0);
    }
    CHECK(comm_cost(log).bytes_emitted == 0);
}

TEST_CASE("token budget and one-token-per-round audits") {
    RunConfig c = small_config(Method::kAdko, 8);
    c.token.budget = 4;
    RunHooks hooks;
    const RunLog log = run(c, hooks);
    for (const auto& r : log.records) {
        CHECK(r.tokens_sent <= 1);
        if (r.round > c.warmup_rounds) CHECK(r.tokens_sent == 1);
    }
}

TEST_CASE("centralized with one agent matches independent selections") {
    RunConfig c = small_config(Method::kCentralized, 9);
    c.n_agents = 1;
    const RunLog central = run(c);
    c.method = Method::kIndependent;
    const RunLog indep = run(c);
    REQUIRE(central.records.size() == indep.records.size());
    for (std::size_t i = 0; i < central.records.size(); ++i)
        CHECK(central.records[i].theta_flat == indep.records[i].theta_flat);
}

TEST_CASE("centralized pooling keeps the per-agent dedup filter") {
    RunConfig c = small_config(Method::kCentralized, 10);
    const RunLog log = run(c);
    // each agent never repeats its own evaluations; crowding another
    // agent's point is allowed (the shared surrogate is the privilege)
    std::map<int, std::set<std::int64_t>> own;
    for (const auto& r : log.records) CHECK(own[r.agent].insert(r.theta_flat).second);
    // pooled dataset size equals agents x rounds
    CHECK(static_cast<int>(log.records.size()) == c.n_agents * c.rounds);
}

TEST_CASE("naive sharing zeroes the avoidance term and keeps token bytes") {
    RunConfig c = small_config(Method::kNaiveSharing, 11);
    std::vector<double> avoid_terms;
    RunHooks hooks;
    hooks.on_selection = [&](int, int, const ScoreBreakdown& b) {
        avoid_terms.push_back(b.avoid_term);
    };
    const RunLog naive = run(c, hooks);
    REQUIRE(!avoid_terms.empty());
    for (double v : avoid_terms) CHECK(v == 0.0);

    // same token wire format as ADKO: bytes per emitted token comparable
    c.method = Method::kAdko;
    const RunLog adko_log = run(c);
    auto first_bytes = [](const RunLog& log) {
        for (const auto& r : log.records)
            if (r.bytes_sent > 0) return r.bytes_sent;
        return 0;
    };
    CHECK(std::abs(first_bytes(naive) - first_bytes(adko_log)) < 40);
}

TEST_CASE("warm-up rounds precede any token traffic") {
    const RunConfig c = small_config(Method::kAdko, 12);
    const RunLog log = run(c);
    for (const auto& r : log.records) {
        if (r.round <= c.warmup_rounds) {
            CHECK(r.tokens_sent == 0);
            CHECK(r.bytes_sent == 0);
        }
    }
}

TEST_CASE("candidate pool construction") {
    DesignSpace space({ContinuousDim{0.0, 1.0, 5}, ContinuousDim{0.0, 1.0, 5}});
    RestrictionMask mask;
    const auto feasible = feasible_indices(space, mask);
    std::set<std::int64_t> evaluated;

    SECTION("perturbations of the incumbent are present") {
        PoolContext ctx;
        ctx.space = &space;
        ctx.mask = &mask;
        ctx.feasible = &feasible;
        ctx.evaluated = &evaluated;
        ctx.best = DesignPoint{2, 2};
        ctx.pool_size = 30;  // big enough to keep everything
        Rng rng(1);
        const auto pool = candidate_pool(ctx, {}, rng);
        std::set<std::int64_t> flats;
        for (const auto& p : pool) flats.insert(space.flat_index(p));
        for (const auto& nb : space.axis_neighbors(DesignPoint{2, 2}))
            CHECK(flats.count(space.flat_index(nb)) == 1);
    }

    SECTION("LM picks lead and random fill completes the pool") {
        PoolContext ctx;
        ctx.space = &space;
        ctx.mask = &mask;
        ctx.feasible = &feasible;
        ctx.evaluated = &evaluated;
        ctx.pool_size = 8;
        std::vector<DesignPoint> lm{{0, 0}, {1, 1}, {2, 2}};
        Rng rng(2);
        const auto pool = candidate_pool(ctx, lm, rng);
        REQUIRE(pool.size() == 8);
        CHECK(pool[0] == DesignPoint{0, 0});
        CHECK(pool[1] == DesignPoint{1, 1});
        CHECK(pool[2] == DesignPoint{2, 2});
    }

    SECTION("never-evaluated filter and exhaustion") {
        for (std::int64_t i = 0; i < space.total_points(); ++i) evaluated.insert(i);
        evaluated.erase(13);
        PoolContext ctx;
        ctx.space = &space;
        ctx.mask = &mask;
        ctx.feasible = &feasible;
        ctx.evaluated = &evaluated;
        ctx.pool_size = 10;
        Rng rng(3);
        const auto pool = candidate_pool(ctx, {}, rng);
        REQUIRE(pool.size() == 1);
        CHECK(space.flat_index(pool[0]) == 13);

        evaluated.insert(13);
        Rng rng2(4);
        CHECK(candidate_pool(ctx, {}, rng2).empty());
    }
}

TEST_CASE("exhausting the feasible space terminates early with the optimum found") {
    RunConfig c;
    c.method = Method::kAdko;
    c.n_agents = 2;
    c.rounds = 30;  // far more than the 12-point space allows
    c.warmup_rounds = 2;
    c.seed = 13;
    c.graph.kind = GraphKind::kComplete;
    c.objective.kind = ObjectiveKind::kSyntheticGp;
    c.objective.dims = {ContinuousDim{0.0, 1.0, 12}};
    c.objective.correlation = 1.0;
    c.objective.noise_std = 0.0;  // noiseless so best-so-far is exact
    c.gp.lengthscale = 0.3;
    c.reasoning.sim_bandwidth = 0.3;
    c.pool_size = 6;
    const RunLog log = run(c);
    CHECK(log.completed_early);
    CHECK(static_cast<int>(log.records.size()) < c.n_agents * c.rounds);

    // each agent saw every point, so its best observed value is the optimum
    const ObjectiveFamily family = build_objective(c);
    const GlobalObjective global(family, AggregatorSpec{});
    std::map<int, double> best;
    std::map<int, std::set<std::int64_t>> seen;
    for (const auto& r : log.records) {
        best[r.agent] = std::max(best.count(r.agent) ? best[r.agent] : -1e300, r.y);
        seen[r.agent].insert(r.theta_flat);
    }
    for (int a = 0; a < c.n_agents; ++a) {
        CHECK(static_cast<int>(seen[a].size()) == 12);
        CHECK(best[a] == Catch::Approx(global.optimum_value()).margin(1e-12));
    }
}

TEST_CASE("path-3 relay semantics") {
    RunConfig c = small_config(Method::kAdko, 14);
    c.n_agents = 3;
    c.graph.kind = GraphKind::kPath;
    c.rounds = 16;

    SECTION("without relay, every broadcast is a fresh own token") {
        // tokens of agent 0 reach only agent 1; they never appear in agent
        // 2's memory because nobody forwards foreign tokens
        c.graph.gossip_relay = false;
        c.capture_messages = true;
        const RunLog log = run(c);
        REQUIRE(!log.messages.empty());
        for (const auto& m : log.messages) {
            CHECK(m.sender == m.origin_agent);
            const auto j = nlohmann::json::parse(m.wire);
            CHECK(j.at("round").get<int>() == m.round);
        }
        CHECK(!CommGraph::path(3).adjacent(0, 2));
    }

    SECTION("with relay, origin-0 tokens reach agent 2 no earlier than +2") {
        c.graph.gossip_relay = true;
        c.capture_messages = true;
        const RunLog log = run(c);
        bool saw_cross_relay = false;
        for (const auto& m : log.messages) {
            if (m.sender == m.origin_agent) continue;  // fresh broadcast
            const auto j = nlohmann::json::parse(m.wire);
            const int origin_round = j.at("round").get<int>();
            // the relaying sender received the token at origin_round + 1 at
            // the earliest, so its rebroadcast lands at m.round + 1 >=
            // origin_round + 2
            CHECK(m.round >= origin_round + 1);
            if (m.sender == 1 && m.origin_agent == 0) saw_cross_relay = true;
        }
        CHECK(saw_cross_relay);
    }
}

TEST_CASE("privacy audit passes with noise on and flags identity embeddings") {
    RunConfig c = small_config(Method::kAdko, 15);
    c.token.privacy.noise_std = 0.05;
    c.capture_messages = true;
    const RunLog log = run(c);
    REQUIRE(!log.messages.empty());
    const PrivacyAudit audit = audit_privacy(log);
    CHECK(audit.messages_checked == static_cast<int>(log.messages.size()));
    CHECK(audit.violations == 0);

    // with privacy off the embeddings are exact and the audit would flag them
    RunConfig open_cfg = small_config(Method::kAdko, 15);
    open_cfg.capture_messages = true;
    RunLog open_log = run(open_cfg);
    // force the privacy flag on in the audited config to simulate a leak
    open_log.config.token.privacy.noise_std = 0.05;
    const PrivacyAudit leak = audit_privacy(open_log);
    CHECK(leak.violations > 0);
}

TEST_CASE("gossip relay emits at most two tokens per agent per round") {
    RunConfig c = small_config(Method::kAdko, 16);
    c.graph.gossip_relay = true;
    const RunLog log = run(c);
    bool saw_two = false;
    for (const auto& r : log.records) {
        CHECK(r.tokens_sent <= 2);
        if (r.tokens_sent == 2) saw_two = true;
    }
    CHECK(saw_two);
}

TEST_CASE("per-round noise streams do not shift when the LM toggles") {
    RunConfig c = small_config(Method::kAdko, 17);
    const RunLog without = run(c);
    c.method = Method::kAdkoLm;
    c.lm.model.bias_amplitude = 0.0;
    c.lm.model.sigma0 = 1e-12;  // the calibrated zero-noise limit
    const RunLog with = run(c);
    // same (agent, round) evaluated at the same point must observe the same y
    std::map<std::pair<int, int>, std::pair<std::int64_t, double>> a_map;
    for (const auto& r : without.records) a_map[{r.agent, r.round}] = {r.theta_flat, r.y};
    int shared = 0;
    for (const auto& r : with.records) {
        const auto it = a_map.find({r.agent, r.round});
        if (it != a_map.end() && it->second.first == r.theta_flat) {
            CHECK(it->second.second == r.y);
            ++shared;
        }
    }
    CHECK(shared > 0);  // warm-up rounds are identical by construction
}

TEST_CASE("adko-fifo uses recency pruning") {
    RunConfig c = small_config(Method::kAdkoFifo, 18);
    c.token.budget = 3;
    const RunLog log = run(c);
    CHECK(static_cast<int>(log.records.size()) == c.n_agents * c.rounds);
    for (const auto& r : log.records)
        if (r.round > c.warmup_rounds) CHECK(r.tokens_sent == 1);
}

TEST_CASE("runtime errors carry agent, round and step context") {
    RunConfig c = small_config(Method::kAdko, 19);
    c.objective.noise_std = 0.0;
    // an unsatisfiable pool: feasible space smaller than warm-up budget
    c.objective.dims = {ContinuousDim{0.0, 1.0, 2}};
    c.warmup_rounds = 5;
    c.rounds = 6;
    try {
        run(c);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.message().find("warm-up") != std::string::npos);
    }
}

TEST_CASE("table-mode non-IID run respects masks everywhere") {
    RunConfig c;
    c.method = Method::kAdko;
    c.n_agents = 4;
    c.rounds = 12;
    c.warmup_rounds = 3;
    c.seed = 20;
    c.graph.kind = GraphKind::kComplete;
    c.objective.kind = ObjectiveKind::kTable;
    c.objective.table_path = kDataDir + "/reaction_grid.csv";
    c.objective.objective_column = "yield";
    c.objective.restriction = TableRestriction{"solvent", {"MeOH", "DMF", "THF", "MeCN"}};
    c.token.baseline_mode = BaselineState::Mode::kFixed;
    c.token.baseline_value = 50.0;
    c.gp.lengthscale = 0.4;
    c.reasoning.sim_bandwidth = 0.4;
    c.pool_size = 10;
    const RunLog log = run(c);
    const ObjectiveFamily family = build_objective(c);
    for (const auto& r : log.records) {
        const DesignPoint p = family.space().from_flat(r.theta_flat);
        CHECK(family.mask(r.agent).allows(p));
    }
    // per-agent restricted regret is used in masked mode
    for (const auto& r : log.records) CHECK(r.simple_regret >= 0.0);
}
