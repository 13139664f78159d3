#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "adko/error.hpp"
#include "adko/gp.hpp"
#include "adko/token.hpp"

namespace adko {

struct ReasoningParams {
    double beta = 2.0;    // private exploration weight
    double lambda = 1.0;  // success attraction weight
    double gamma = 1.5;   // failure avoidance weight
    double sim_bandwidth = 0.3;

    void validate() const {
        require(beta >= 0.0 && lambda >= 0.0 && gamma >= 0.0, "reasoning_params",
                "weights must be non-negative");
        require(sim_bandwidth > 0.0, "reasoning_params", "sim_bandwidth must be positive");
    }
};

/// Similarity kernel S(a,b) = exp(-||a-b||^2 / bandwidth^2), in (0,1].
inline double similarity(std::span<const double> a, std::span<const double> b,
                         double bandwidth) {
    require(a.size() == b.size(), "dimension_mismatch",
            "similarity inputs have different lengths");
    require(bandwidth > 0.0, "reasoning_params", "bandwidth must be positive");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d2 += t * t;
    }
    return std::exp(-d2 / (bandwidth * bandwidth));
}

struct SocialTerms {
    double attract = 0.0;  // success evidence aggregate
    double avoid = 0.0;    // failure evidence aggregate
};

/// Mixing-weighted aggregation of token evidence around theta. With
/// degraded=true each contribution is additionally damped by the token's
/// fidelity estimate, so the degraded terms never exceed the full-fidelity
/// ones token by token.
inline SocialTerms social_terms(std::span<const double> theta_embedding,
                                const TokenMemory& memory,
                                std::span<const double> mixing_row,
                                const ReasoningParams& params, bool degraded) {
    params.validate();
    SocialTerms out;
    for (const auto& stored : memory.tokens()) {
        const auto via = static_cast<std::size_t>(stored.via_agent);
        require(via < mixing_row.size(), "reasoning",
                "token delivered by agent without a mixing weight");
        const double weight = mixing_row[via];
        const double s = similarity(theta_embedding, stored.token.embedding,
                                    params.sim_bandwidth);
        double contribution = weight * stored.token.advantage * s;
        if (degraded) contribution *= stored.token.fidelity_est;
        if (stored.token.signal == Signal::kSuccess)
            out.attract += contribution;
        else
            out.avoid += contribution;
    }
    return out;
}

struct LmAdjust {
    double bias = 0.0;
    double noise = 0.0;
};

struct ScoreBreakdown {
    double mean_term = 0.0;     // posterior mean
    double explore_term = 0.0;  // beta * posterior stddev
    double attract_term = 0.0;  // lambda * G
    double avoid_term = 0.0;    // gamma * Lambda
    double lm_term = 0.0;       // bias + noise when an LM adjusts the score
    double total = 0.0;

    /// Recomputes total in the canonical association order; the stored total
    /// is always produced this way, so the identity is exact.
    double recompute() const {
        return ((mean_term + explore_term) + attract_term) - avoid_term + lm_term;
    }
};

inline ScoreBreakdown reasoning_score(std::span<const double> theta_embedding,
                                      const Posterior& post, const TokenMemory& memory,
                                      std::span<const double> mixing_row,
                                      const ReasoningParams& params, bool degraded,
                                      const std::optional<LmAdjust>& lm_adjust = {}) {
    const SocialTerms social =
        social_terms(theta_embedding, memory, mixing_row, params, degraded);
    ScoreBreakdown b;
    b.mean_term = post.mean;
    b.explore_term = params.beta * post.stddev;
    b.attract_term = params.lambda * social.attract;
    b.avoid_term = params.gamma * social.avoid;
    b.lm_term = lm_adjust ? lm_adjust->bias + lm_adjust->noise : 0.0;
    b.total = b.recompute();
    return b;
}

/// Argmax over a candidate list; ties resolve to the lowest index.
inline std::size_t select_candidate(std::size_t n_candidates,
                                    const std::function<double(std::size_t)>& score) {
    require(n_candidates > 0, "select", "empty candidate list");
    std::size_t best = 0;
    double best_score = score(0);
    for (std::size_t i = 1; i < n_candidates; ++i) {
        const double s = score(i);
        if (s > best_score) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

}  // namespace adko
