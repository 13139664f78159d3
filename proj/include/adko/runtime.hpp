#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adko/benchmark.hpp"
#include "adko/config.hpp"
#include "adko/design_space.hpp"
#include "adko/error.hpp"
#include "adko/gp.hpp"
#include "adko/graph.hpp"
#include "adko/lm.hpp"
#include "adko/lm_adapter.hpp"
#include "adko/metrics.hpp"
#include "adko/reasoning.hpp"
#include "adko/rng.hpp"
#include "adko/token.hpp"

namespace adko {

/// Per-agent private state. The dataset never leaves this struct in any
/// serialized form; only knowledge tokens cross agent boundaries.
struct AgentState {
    int id = 0;
    Dataset dataset;                       // embedded points + observations
    std::vector<DesignPoint> raw_points;   // same order as dataset
    std::set<std::int64_t> evaluated;      // flat indices seen by this agent
    TokenMemory memory;
    BaselineState baseline;
    KernelParams gp_params;
    ReasoningParams reasoning;
    RestrictionMask mask;
    std::vector<std::int64_t> feasible;
    std::int64_t best_flat = -1;
    double best_y = 0.0;
    bool has_best = false;

    void record_observation(const DesignPoint& p, std::vector<double> embedded, double y,
                            std::int64_t flat) {
        dataset.append(std::move(embedded), y);
        raw_points.push_back(p);
        evaluated.insert(flat);
        if (!has_best || y > best_y) {
            has_best = true;
            best_y = y;
            best_flat = flat;
        }
    }
};

/// Computes per-round simple regret. Global mode scores against the
/// aggregated objective's optimum; masked (non-IID) mode scores each agent
/// against the restricted optimum of its own objective, success being
/// defined locally there.
class RegretOracle {
public:
    RegretOracle(const ObjectiveFamily& family, const GlobalObjective& global)
        : family_(&family), global_(&global), per_agent_(family.has_masks()) {
        if (per_agent_) {
            for (int a = 0; a < family.n_agents(); ++a) {
                double best = -std::numeric_limits<double>::infinity();
                for (std::int64_t flat : feasible_indices(family.space(), family.mask(a)))
                    best = std::max(best, family.noiseless(a, flat));
                restricted_opt_.push_back(best);
            }
        }
    }

    bool per_agent() const { return per_agent_; }

    double regret(int agent, std::int64_t flat) const {
        if (per_agent_)
            return restricted_opt_[static_cast<std::size_t>(agent)] -
                   family_->noiseless(agent, flat);
        return global_->optimum_value() - global_->value(flat);
    }

private:
    const ObjectiveFamily* family_;
    const GlobalObjective* global_;
    bool per_agent_ = false;
    std::vector<double> restricted_opt_;
};

struct PoolContext {
    const DesignSpace* space = nullptr;
    const RestrictionMask* mask = nullptr;
    const std::vector<std::int64_t>* feasible = nullptr;
    const std::set<std::int64_t>* evaluated = nullptr;
    std::optional<DesignPoint> best;
    int pool_size = 20;
};

/// Candidate pool for one agent-round: LM picks (when present) come first,
/// then single-step perturbations of the incumbent, then uniform fill from
/// the never-evaluated feasible set. Deduplicated; empty only when the
/// feasible space is exhausted.
inline std::vector<DesignPoint> candidate_pool(const PoolContext& ctx,
                                               const std::vector<DesignPoint>& lm_candidates,
                                               Rng& rng) {
    std::vector<DesignPoint> pool;
    std::set<std::int64_t> used;
    auto push = [&](const DesignPoint& p) {
        if (static_cast<int>(pool.size()) >= ctx.pool_size) return;
        if (!ctx.mask->allows(p)) return;
        const auto flat = ctx.space->flat_index(p);
        if (ctx.evaluated->count(flat) > 0 || used.count(flat) > 0) return;
        used.insert(flat);
        pool.push_back(p);
    };

    for (const auto& p : lm_candidates) push(p);
    if (ctx.best)
        for (const auto& p : ctx.space->axis_neighbors(*ctx.best)) push(p);

    int attempts = 0;
    const int max_attempts = 20 * ctx.pool_size;
    while (static_cast<int>(pool.size()) < ctx.pool_size && attempts < max_attempts) {
        ++attempts;
        push(ctx.space->from_flat((*ctx.feasible)[rng.below(ctx.feasible->size())]));
    }
    if (static_cast<int>(pool.size()) < ctx.pool_size) {
        // deterministic sweep picks up whatever sampling missed
        for (std::int64_t flat : *ctx.feasible) {
            if (static_cast<int>(pool.size()) >= ctx.pool_size) break;
            push(ctx.space->from_flat(flat));
        }
    }
    return pool;
}

namespace detail {

inline bool emits_tokens(Method m) {
    return m == Method::kAdko || m == Method::kAdkoLm || m == Method::kAdkoFifo ||
           m == Method::kNaiveSharing;
}

inline void prune_memory(TokenMemory& memory, Method method, int now, double recency_weight) {
    if (method == Method::kAdkoFifo)
        memory.prune_fifo();
    else
        memory.prune_fidelity_aware(now, recency_weight);
}

}  // namespace detail

struct RunHooks {
    // Test instrumentation: selected-candidate score breakdown per (agent, round).
    std::function<void(int agent, int round, const ScoreBreakdown&)> on_selection;
    // Memory size at each post-merge checkpoint (budget audits).
    std::function<void(int agent, int round, std::size_t size)> on_memory;
};

inline RunLog run(const RunConfig& config, const RunHooks& hooks = {}) {
    config.validate();
    const Method method = config.method;
    const int n = config.n_agents;
    const int total_rounds = config.rounds;
    const int warmup = config.warmup_rounds;
    const std::uint64_t seed = config.seed;

    const ObjectiveFamily family = build_objective(config);
    require(family.n_agents() == n, "config",
            "objective family agent count does not match n_agents");
    const DesignSpace& space = family.space();
    const CommGraph graph = build_graph(config.graph, n, derive_seed(seed, "graph"));
    const GlobalObjective global(family, config.objective.aggregator);
    const RegretOracle regret(family, global);

    RunLog log;
    log.config = config;
    log.config.run_id = config.run_id.empty()
                            ? std::string(to_string(method)) + "_" + std::to_string(seed)
                            : config.run_id;
    const std::string& run_id = log.config.run_id;

    // Agent setup
    std::vector<AgentState> agents(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        auto& ag = agents[static_cast<std::size_t>(a)];
        ag.id = a;
        ag.mask = family.mask(a);
        ag.feasible = feasible_indices(space, ag.mask);
        require(!ag.feasible.empty(), "config", "agent has an empty restricted space");
        ag.memory = TokenMemory(config.token.budget);
        ag.baseline.mode = config.token.baseline_mode;
        ag.baseline.fixed_value = config.token.baseline_value;
    }

    // LM setup (one instance per agent; adapters are serialized channels)
    const bool lm_on = method == Method::kAdkoLm;
    std::string adapter_cmd = config.lm.adapter_cmd;
    if (lm_on && adapter_cmd.empty()) {
        if (const char* env = std::getenv("ADKO_LM_ADAPTER")) adapter_cmd = env;
    }
    std::vector<std::unique_ptr<LmInterface>> lms;
    std::unique_ptr<BiasField> bias_field;
    if (lm_on) {
        bias_field = std::make_unique<BiasField>(config.lm.model, space.dim());
        for (int a = 0; a < n; ++a) {
            if (adapter_cmd.empty())
                lms.push_back(std::make_unique<SyntheticLm>(config.lm.model, space.dim()));
            else
                lms.push_back(std::make_unique<AdapterLm>(adapter_cmd, config.lm.model,
                                                          space.dim(),
                                                          config.lm.adapter_timeout_ms));
        }
    }

    // Pooled state for the centralized baseline. The never-evaluated filter
    // stays per-agent for every method: the shared surrogate is the
    // baseline's privilege, crowding the same optimum is not forbidden.
    const bool centralized = method == Method::kCentralized;
    Dataset pooled;

    // Contiguous per-agent mixing rows for the social terms.
    std::vector<std::vector<double>> mixing_rows(static_cast<std::size_t>(n),
                                                 std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            mixing_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                graph.mixing()(i, j);

    // raw (theta, y) per (agent, round) for the privacy audit
    std::map<std::pair<int, int>, std::pair<std::int64_t, double>> raw_by_origin;

    auto record_row = [&](int a, int round, std::int64_t flat, double y, int tokens_sent,
                          int bytes_sent, double mem_fid, bool lm_fb, double lm_var) {
        RoundRecord r;
        r.run_id = run_id;
        r.method = to_string(method);
        r.seed = seed;
        r.agent = a;
        r.round = round;
        r.theta_flat = flat;
        r.y = y;
        r.simple_regret = regret.regret(a, flat);
        r.tokens_sent = tokens_sent;
        r.bytes_sent = bytes_sent;
        r.memory_mean_fidelity = mem_fid;
        r.lm_fallback = lm_fb;
        r.lm_noise_var = lm_var;
        log.records.push_back(std::move(r));
    };

    // ---- Warm-up: uniform random feasible evaluations before the main loop
    for (int round = 1; round <= warmup; ++round) {
        for (int a = 0; a < n; ++a) {
            auto& ag = agents[static_cast<std::size_t>(a)];
            const std::set<std::int64_t>& dedup = ag.evaluated;
            Rng rng = substream(seed, "warmup", {static_cast<std::uint64_t>(a),
                                                 static_cast<std::uint64_t>(round)});
            std::int64_t flat = -1;
            for (int attempt = 0; attempt < 200 && flat < 0; ++attempt) {
                const auto cand = ag.feasible[rng.below(ag.feasible.size())];
                if (dedup.count(cand) == 0) flat = cand;
            }
            if (flat < 0) {
                for (std::int64_t cand : ag.feasible)
                    if (dedup.count(cand) == 0) {
                        flat = cand;
                        break;
                    }
            }
            require(flat >= 0, "config", "feasible space smaller than warm-up budget");
            const DesignPoint p = space.from_flat(flat);
            Rng eval_rng = substream(seed, "eval", {static_cast<std::uint64_t>(a),
                                                    static_cast<std::uint64_t>(round)});
            const double y = family.evaluate(a, p, eval_rng);
            ag.record_observation(p, space.embed(p), y, flat);
            if (centralized) pooled.append(space.embed(p), y);
            record_row(a, round, flat, y, 0, 0, 0.0, false, 0.0);
        }
    }

    // ---- Post-warm-up initialization: baselines and bandwidth heuristics
    for (int a = 0; a < n; ++a) {
        auto& ag = agents[static_cast<std::size_t>(a)];
        std::vector<double> warm_values(ag.dataset.values.begin(), ag.dataset.values.end());
        ag.baseline.initialize(warm_values);
        const auto& pts = centralized ? pooled.points : ag.dataset.points;
        const double ls = config.gp.lengthscale ? *config.gp.lengthscale
                                                : median_pairwise_distance(pts);
        ag.gp_params = KernelParams::isotropic(space.dim(), ls, config.gp.signal_variance,
                                               config.gp.noise_variance);
        ag.reasoning.beta = config.reasoning.beta;
        ag.reasoning.lambda = config.reasoning.lambda;
        ag.reasoning.gamma = method == Method::kNaiveSharing ? 0.0 : config.reasoning.gamma;
        ag.reasoning.sim_bandwidth = config.reasoning.sim_bandwidth
                                         ? *config.reasoning.sim_bandwidth
                                         : median_pairwise_distance(ag.dataset.points);
    }
    const bool degraded = method != Method::kNaiveSharing;

    // ---- Main rounds
    std::vector<std::vector<StoredToken>> inboxes(static_cast<std::size_t>(n));
    for (int round = warmup + 1; round <= total_rounds; ++round) {
        // Exhaustion check: all agents must still have unevaluated feasible points.
        bool exhausted = false;
        for (const auto& ag : agents) {
            const std::set<std::int64_t>& dedup = ag.evaluated;
            bool remaining = false;
            for (std::int64_t flat : ag.feasible)
                if (dedup.count(flat) == 0) {
                    remaining = true;
                    break;
                }
            if (!remaining) exhausted = true;
        }
        if (exhausted) {
            log.completed_early = true;
            break;
        }

        // Step 1: token aggregation + pruning (barrier-delivered inboxes).
        if (detail::emits_tokens(method)) {
            for (int a = 0; a < n; ++a) {
                auto& ag = agents[static_cast<std::size_t>(a)];
                for (auto& stored : inboxes[static_cast<std::size_t>(a)]) {
                    // weight lookup uses the delivering neighbor when the
                    // origin is not adjacent (gossip relay)
                    const int via = graph.adjacent(a, stored.token.origin_agent) ||
                                            stored.token.origin_agent == a
                                        ? stored.token.origin_agent
                                        : stored.via_agent;
                    ag.memory.insert(stored.token, via);
                }
                detail::prune_memory(ag.memory, method, round, config.token.recency_weight);
                if (hooks.on_memory) hooks.on_memory(a, round, ag.memory.size());
            }
        }
        for (auto& inbox : inboxes) inbox.clear();

        // Shared surrogate for the centralized baseline, fitted once per round.
        std::optional<GpModel> pooled_model;
        if (centralized) pooled_model.emplace(pooled, agents[0].gp_params);

        std::vector<std::vector<KnowledgeToken>> outboxes(static_cast<std::size_t>(n));
        std::vector<std::tuple<int, DesignPoint, double>> new_observations;

        for (int a = 0; a < n; ++a) {
            const char* step = "gp_fit";
            try {
            auto& ag = agents[static_cast<std::size_t>(a)];
            const std::set<std::int64_t>& dedup = ag.evaluated;

            std::optional<GpModel> own_model;
            const GpModel& model =
                centralized ? *pooled_model
                            : own_model.emplace(ag.dataset, ag.gp_params);

            // Step 2: candidate generation (LM proposals or uniform samples)
            // plus exploitation perturbations.
            step = "propose";
            std::vector<DesignPoint> lm_candidates;
            bool lm_fallback = false;
            if (lm_on) {
                ProposeContext pctx;
                pctx.space = &space;
                pctx.mask = ag.mask;
                pctx.feasible = &ag.feasible;
                for (std::size_t i = 0; i < ag.raw_points.size(); ++i)
                    pctx.history.emplace_back(ag.raw_points[i], ag.dataset.values[i]);
                pctx.memory = &ag.memory;
                if (ag.has_best) {
                    pctx.best_point = space.from_flat(ag.best_flat);
                    pctx.has_best = true;
                }
                pctx.surrogate_mean = [&](const DesignPoint& p) {
                    return model.posterior(space.embed(p)).mean;
                };
                pctx.m = config.lm.m;
                pctx.agent = a;
                pctx.round = round;
                Rng propose_rng = substream(seed, "lm-propose",
                                            {static_cast<std::uint64_t>(a),
                                             static_cast<std::uint64_t>(round)});
                auto& lm = *lms[static_cast<std::size_t>(a)];
                const int fallbacks_before = lm.fallback_events();
                lm_candidates = lm.propose(pctx, propose_rng).candidates;
                lm_fallback = lm.fallback_events() > fallbacks_before;
            }

            PoolContext pctx;
            pctx.space = &space;
            pctx.mask = &ag.mask;
            pctx.feasible = &ag.feasible;
            pctx.evaluated = &dedup;
            if (ag.has_best) pctx.best = space.from_flat(ag.best_flat);
            pctx.pool_size = config.pool_size;
            Rng pool_rng = substream(seed, "pool", {static_cast<std::uint64_t>(a),
                                                    static_cast<std::uint64_t>(round)});
            const std::vector<DesignPoint> pool = candidate_pool(pctx, lm_candidates, pool_rng);
            require(!pool.empty(), "runtime",
                    "empty candidate pool despite unexhausted space (agent " +
                        std::to_string(a) + ")");

            // Steps 3-4: reasoning evaluation and self-driven selection.
            step = "score";
            const double lm_var =
                lm_on ? lm_noise_variance(ag.memory, config.lm.model) : 0.0;
            Rng lm_noise_rng = substream(seed, "lm-noise", {static_cast<std::uint64_t>(a),
                                                            static_cast<std::uint64_t>(round)});
            std::vector<ScoreBreakdown> scores;
            scores.reserve(pool.size());
            for (const auto& cand : pool) {
                const std::vector<double> emb = space.embed(cand);
                const Posterior post = model.posterior(emb);
                std::optional<LmAdjust> adjust;
                if (lm_on) {
                    LmAdjust adj;
                    adj.bias = (*bias_field)(emb);
                    adj.noise = std::sqrt(lm_var) * lm_noise_rng.normal();
                    adjust = adj;
                }
                scores.push_back(reasoning_score(emb, post, ag.memory,
                                                 mixing_rows[static_cast<std::size_t>(a)],
                                                 ag.reasoning, degraded, adjust));
            }
            const std::size_t pick = select_candidate(
                pool.size(), [&](std::size_t i) { return scores[i].total; });
            if (hooks.on_selection) hooks.on_selection(a, round, scores[pick]);

            // Step 5: execution.
            step = "evaluate";
            const DesignPoint& theta = pool[pick];
            const std::int64_t flat = space.flat_index(theta);
            Rng eval_rng = substream(seed, "eval", {static_cast<std::uint64_t>(a),
                                                    static_cast<std::uint64_t>(round)});
            const double y = family.evaluate(a, theta, eval_rng);
            raw_by_origin[{a, round}] = {flat, y};

            // Step 6-7: token encoding and broadcast enqueue.
            step = "encode";
            int tokens_sent = 0;
            int bytes_sent = 0;
            if (detail::emits_tokens(method)) {
                const TokenOutcome outcome = token_outcome(y, ag.baseline);
                std::string insight;
                if (lm_on) {
                    EncodeContext ectx;
                    ectx.theta = theta;
                    ectx.y = y;
                    ectx.signal = outcome.signal;
                    ectx.advantage = outcome.advantage;
                    ectx.agent = a;
                    ectx.round = round;
                    auto& lm = *lms[static_cast<std::size_t>(a)];
                    const int fallbacks_before = lm.fallback_events();
                    insight = lm.encode_insight(ectx);
                    lm_fallback = lm_fallback || lm.fallback_events() > fallbacks_before;
                }
                Rng privacy_rng = substream(seed, "privacy", {static_cast<std::uint64_t>(a),
                                                              static_cast<std::uint64_t>(round)});
                KnowledgeToken token = build_token(outcome, theta, space, config.token.privacy,
                                                   std::move(insight), a, round, privacy_rng);
                outboxes[static_cast<std::size_t>(a)].push_back(token);
                if (config.graph.gossip_relay) {
                    const StoredToken* best_foreign = nullptr;
                    double best_score = -1.0;
                    for (const auto& stored : ag.memory.tokens()) {
                        if (stored.token.origin_agent == a) continue;
                        const double s =
                            prune_score(stored.token, round, config.token.recency_weight);
                        if (s > best_score) {
                            best_score = s;
                            best_foreign = &stored;
                        }
                    }
                    if (best_foreign)
                        outboxes[static_cast<std::size_t>(a)].push_back(best_foreign->token);
                }
                for (const auto& t : outboxes[static_cast<std::size_t>(a)]) {
                    ++tokens_sent;
                    bytes_sent += static_cast<int>(t.wire().size());
                }
                // own token enters own memory at encoding time
                ag.memory.insert(token, a);
                detail::prune_memory(ag.memory, method, round, config.token.recency_weight);
                if (hooks.on_memory) hooks.on_memory(a, round, ag.memory.size());
            }

            record_row(a, round, flat, y, tokens_sent, bytes_sent,
                       ag.memory.mean_fidelity(), lm_fallback, lm_var);
            new_observations.emplace_back(a, theta, y);
            } catch (const Error& e) {
                throw Error(e.kind(), "agent " + std::to_string(a) + ", round " +
                                          std::to_string(round) + ", step " + step + ": " +
                                          e.message());
            }
        }

        // Step 8: private GP updates at the round barrier.
        for (auto& [a, theta, y] : new_observations) {
            auto& ag = agents[static_cast<std::size_t>(a)];
            const std::int64_t flat = space.flat_index(theta);
            ag.record_observation(theta, space.embed(theta), y, flat);
            if (centralized) pooled.append(space.embed(theta), y);
        }

        // Broadcast barrier: round-t tokens become visible at round t+1.
        const int max_per_agent = config.graph.gossip_relay ? 2 : 1;
        inboxes = deliver(graph, outboxes, max_per_agent);
        if (config.capture_messages) {
            for (int sender = 0; sender < n; ++sender)
                for (const auto& t : outboxes[static_cast<std::size_t>(sender)]) {
                    MessageRecord m;
                    m.round = round;
                    m.sender = sender;
                    m.origin_agent = t.origin_agent;
                    m.wire = t.wire();
                    const auto raw = raw_by_origin.at({t.origin_agent, t.origin_round});
                    m.theta_flat = raw.first;
                    m.raw_y = raw.second;
                    log.messages.push_back(std::move(m));
                }
        }
    }

    log.cumulative_regret = log.recompute_cumulative_regret();
    return log;
}

inline RunLog run_baseline_centralized(RunConfig config) {
    config.method = Method::kCentralized;
    return run(config);
}

inline RunLog run_naive_sharing(RunConfig config) {
    config.method = Method::kNaiveSharing;
    return run(config);
}

}  // namespace adko
