#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adko/design_space.hpp"
#include "adko/error.hpp"
#include "adko/rng.hpp"
#include "json.hpp"

namespace adko {

enum class Signal { kSuccess, kFail };

inline const char* to_string(Signal s) { return s == Signal::kSuccess ? "SUCCESS" : "FAIL"; }

/// Binary entropy in base-2 bits, so H_b maps [0,1] onto [0,1] with the
/// maximum of exactly 1 at p = 1/2.
inline double binary_entropy(double p) {
    require(p >= 0.0 && p <= 1.0, "range", "binary_entropy argument outside [0,1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

/// Estimated token fidelity from the advantage score alone:
/// eta(c) = c * (1 - H_b((1-c)/2)). Monotone with eta(0)=0, eta(1)=1.
inline double fidelity_estimate(double advantage) {
    require(advantage >= 0.0 && advantage <= 1.0, "range",
            "advantage outside [0,1]");
    return advantage * (1.0 - binary_entropy((1.0 - advantage) / 2.0));
}

/// The only message that ever crosses an agent boundary.
struct KnowledgeToken {
    Signal signal = Signal::kSuccess;
    double advantage = 0.0;     // in [0,1]
    double fidelity_est = 0.0;  // in [0,1]
    std::vector<double> embedding;
    std::string insight;  // opaque text; the numeric pipeline never parses it
    int origin_agent = 0;
    int origin_round = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"signal", to_string(signal)}, {"advantage", advantage},
                              {"fidelity", fidelity_est},    {"embedding", embedding},
                              {"insight", insight},          {"agent", origin_agent},
                              {"round", origin_round}};
    }

    static KnowledgeToken from_json(const nlohmann::json& j) {
        KnowledgeToken t;
        const std::string sig = j.at("signal").get<std::string>();
        require(sig == "SUCCESS" || sig == "FAIL", "token_wire", "unknown signal " + sig);
        t.signal = sig == "SUCCESS" ? Signal::kSuccess : Signal::kFail;
        t.advantage = j.at("advantage").get<double>();
        t.fidelity_est = j.at("fidelity").get<double>();
        t.embedding = j.at("embedding").get<std::vector<double>>();
        t.insight = j.at("insight").get<std::string>();
        t.origin_agent = j.at("agent").get<int>();
        t.origin_round = j.at("round").get<int>();
        return t;
    }

    /// Compact wire form; its byte length is the unit of the
    /// communication-cost metric.
    std::string wire() const { return to_json().dump(); }
};

struct PrivacyConfig {
    double noise_std = 0.0;  // i.i.d. Gaussian noise added to each coordinate
    int levels = 0;          // uniform quantization level count, 0 disables

    bool enabled() const { return noise_std > 0.0 || levels > 0; }
};

inline std::vector<double> privacy_transform(std::vector<double> embedding,
                                             const PrivacyConfig& cfg, Rng& rng) {
    if (cfg.noise_std > 0.0)
        for (double& x : embedding) x += cfg.noise_std * rng.normal();
    if (cfg.levels > 0) {
        const double l = static_cast<double>(cfg.levels - 1);
        for (double& x : embedding) {
            const double clamped = std::clamp(x, 0.0, 1.0);
            x = cfg.levels == 1 ? 0.0 : std::round(clamped * l) / l;
        }
    }
    return embedding;
}

/// Contextual baseline b and advantage normalization scale. FIXED uses a
/// configured threshold (the tau of the table experiments); RUNNING_MEDIAN
/// tracks the median of the agent's own observations. Either way the scale
/// is the running max |y - b| over the agent's private history.
struct BaselineState {
    enum class Mode { kFixed, kRunningMedian };

    Mode mode = Mode::kFixed;
    double fixed_value = 0.0;
    std::vector<double> history;
    double scale = 0.0;
    bool initialized = false;

    static constexpr double kScaleFloor = 1e-9;

    void initialize(const std::vector<double>& warmup_values) {
        require(!warmup_values.empty(), "baseline", "warm-up produced no observations");
        history = warmup_values;
        initialized = true;
        scale = kScaleFloor;
        const double b = value();
        for (double y : warmup_values) scale = std::max(scale, std::abs(y - b));
    }

    /// Current baseline; for RUNNING_MEDIAN the median of history so far.
    double value() const {
        require(initialized, "baseline", "baseline not yet initialized (warm-up incomplete)");
        if (mode == Mode::kFixed) return fixed_value;
        std::vector<double> sorted = history;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }

    /// Folds a new private observation into scale and history and returns
    /// the (baseline, scale) pair the token is computed against. The new
    /// |y - b| participates in the running max, so a record-setting outcome
    /// encodes with advantage exactly 1.
    std::pair<double, double> observe(double y) {
        const double b = value();
        scale = std::max({scale, std::abs(y - b), kScaleFloor});
        history.push_back(y);
        return {b, scale};
    }
};

struct TokenOutcome {
    Signal signal = Signal::kSuccess;
    double advantage = 0.0;
};

/// Quantizes an observation against the agent's baseline state (mutating the
/// running scale and history). Ties at y = b encode SUCCESS.
inline TokenOutcome token_outcome(double y, BaselineState& baseline) {
    const auto [b, scale] = baseline.observe(y);
    TokenOutcome out;
    out.signal = y >= b ? Signal::kSuccess : Signal::kFail;
    out.advantage = std::clamp(std::abs(y - b) / scale, 0.0, 1.0);
    return out;
}

inline KnowledgeToken build_token(const TokenOutcome& outcome, const DesignPoint& theta,
                                  const DesignSpace& space, const PrivacyConfig& privacy,
                                  std::string insight, int agent, int round,
                                  Rng& privacy_rng) {
    KnowledgeToken t;
    t.signal = outcome.signal;
    t.advantage = outcome.advantage;
    t.fidelity_est = fidelity_estimate(t.advantage);
    t.embedding = privacy_transform(space.embed(theta), privacy, privacy_rng);
    t.insight = std::move(insight);
    t.origin_agent = agent;
    t.origin_round = round;
    return t;
}

inline KnowledgeToken encode_token(const DesignPoint& theta, const DesignSpace& space,
                                   double y, BaselineState& baseline,
                                   const PrivacyConfig& privacy, std::string insight,
                                   int agent, int round, Rng& privacy_rng) {
    const TokenOutcome outcome = token_outcome(y, baseline);
    return build_token(outcome, theta, space, privacy, std::move(insight), agent, round,
                       privacy_rng);
}

/// Token plus the neighbor that delivered it (the origin itself for own or
/// directly received tokens). The mixing weight applied in the social terms
/// is looked up by this agent id.
struct StoredToken {
    KnowledgeToken token;
    int via_agent = 0;
};

/// Pruning score of Algorithm "fidelity-aware pruning":
/// eta_hat * c * exp(-alpha * age).
inline double prune_score(const KnowledgeToken& t, int now, double recency_weight) {
    return t.fidelity_est * t.advantage *
           std::exp(-recency_weight * static_cast<double>(now - t.origin_round));
}

/// Bounded per-agent token memory. Merging deduplicates on provenance
/// (origin agent, origin round) so gossip relays cannot double-count.
class TokenMemory {
public:
    TokenMemory() = default;
    explicit TokenMemory(int budget) : budget_(budget) {
        require(budget >= 1, "token_memory", "budget must be >= 1");
    }

    int budget() const { return budget_; }
    std::size_t size() const { return tokens_.size(); }
    bool empty() const { return tokens_.empty(); }
    const std::vector<StoredToken>& tokens() const { return tokens_; }

    void insert(KnowledgeToken token, int via_agent) {
        for (const auto& s : tokens_)
            if (s.token.origin_agent == token.origin_agent &&
                s.token.origin_round == token.origin_round)
                return;
        tokens_.push_back(StoredToken{std::move(token), via_agent});
    }

    double mean_fidelity() const {
        if (tokens_.empty()) return 0.0;
        double sum = 0.0;
        for (const auto& s : tokens_) sum += s.token.fidelity_est;
        return sum / static_cast<double>(tokens_.size());
    }

    /// Drops the minimum-score token until within budget. Ties drop the
    /// older round first, then the larger origin agent id.
    void prune_fidelity_aware(int now, double recency_weight) {
        require(recency_weight > 0.0, "token_memory", "recency weight must be positive");
        while (tokens_.size() > static_cast<std::size_t>(budget_)) {
            std::size_t drop = 0;
            double drop_score = prune_score(tokens_[0].token, now, recency_weight);
            for (std::size_t i = 1; i < tokens_.size(); ++i) {
                const double s = prune_score(tokens_[i].token, now, recency_weight);
                const auto& cand = tokens_[i].token;
                const auto& cur = tokens_[drop].token;
                const bool better = s < drop_score ||
                                    (s == drop_score &&
                                     (cand.origin_round < cur.origin_round ||
                                      (cand.origin_round == cur.origin_round &&
                                       cand.origin_agent > cur.origin_agent)));
                if (better) {
                    drop = i;
                    drop_score = s;
                }
            }
            tokens_.erase(tokens_.begin() + static_cast<std::ptrdiff_t>(drop));
        }
    }

    /// Baseline policy: oldest origin round first, agent id ascending among
    /// equal rounds.
    void prune_fifo() {
        while (tokens_.size() > static_cast<std::size_t>(budget_)) {
            std::size_t drop = 0;
            for (std::size_t i = 1; i < tokens_.size(); ++i) {
                const auto& cand = tokens_[i].token;
                const auto& cur = tokens_[drop].token;
                if (cand.origin_round < cur.origin_round ||
                    (cand.origin_round == cur.origin_round &&
                     cand.origin_agent < cur.origin_agent))
                    drop = i;
            }
            tokens_.erase(tokens_.begin() + static_cast<std::ptrdiff_t>(drop));
        }
    }

private:
    std::vector<StoredToken> tokens_;
    int budget_ = 16;
};

inline TokenMemory merge_and_prune(const TokenMemory& memory,
                                   const std::vector<StoredToken>& incoming, int now,
                                   double recency_weight) {
    TokenMemory merged = memory;
    for (const auto& s : incoming) merged.insert(s.token, s.via_agent);
    merged.prune_fidelity_aware(now, recency_weight);
    return merged;
}

inline TokenMemory fifo_prune(const TokenMemory& memory) {
    TokenMemory pruned = memory;
    pruned.prune_fifo();
    return pruned;
}

}  // namespace adko
