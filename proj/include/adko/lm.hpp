#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "adko/design_space.hpp"
#include "adko/error.hpp"
#include "adko/gp.hpp"
#include "adko/rng.hpp"
#include "adko/token.hpp"

namespace adko {

enum class BiasKind { kFourier, kHalfSpace };

/// Synthetic LM error model: a deterministic bounded bias field plus
/// Gaussian noise whose variance decays with accumulated fidelity-weighted
/// evidence. bias_amplitude plays the role of the (Lipschitz bound x total
/// variation distance) product; the two factors are not separately
/// identifiable from behavior, so only d_tv is carried for reporting.
struct LmErrorModel {
    double sigma0 = 0.5;       // base noise standard deviation
    double alpha_sigma = 1.0;  // evidence accumulation rate
    double bias_amplitude = 0.0;
    std::uint64_t bias_field_seed = 0;
    double d_tv = 0.0;  // reported in metrics, never used in computation
    BiasKind bias_kind = BiasKind::kFourier;
    // HALF_SPACE parameters: the field pushes scores up on the side of
    // `center` opposite to `direction` (the wrong half when direction points
    // at the optimum).
    std::vector<double> half_space_center;
    std::vector<double> half_space_direction;

    void validate() const {
        require(sigma0 > 0.0, "lm_model", "sigma0 must be positive");
        require(alpha_sigma > 0.0, "lm_model", "alpha_sigma must be positive");
        require(bias_amplitude >= 0.0, "lm_model", "bias_amplitude must be non-negative");
        require(d_tv >= 0.0 && d_tv <= 1.0, "lm_model", "d_tv must lie in [0,1]");
    }
};

/// LM noise variance sigma0^2 / (1 + alpha * sum_k c_k eta_k). Zero-fidelity
/// tokens leave the denominator untouched: noise does not decay no matter
/// how many of them accumulate.
inline double lm_noise_variance(const TokenMemory& memory, const LmErrorModel& model) {
    model.validate();
    double evidence = 0.0;
    for (const auto& s : memory.tokens())
        evidence += s.token.advantage * s.token.fidelity_est;
    return model.sigma0 * model.sigma0 / (1.0 + model.alpha_sigma * evidence);
}

/// Deterministic smooth bias field with a constructive sup-norm bound equal
/// to bias_amplitude. FOURIER: random cosine expansion normalized by the sum
/// of |coefficients|. HALF_SPACE: amplitude * tanh along a fixed direction.
class BiasField {
public:
    BiasField(const LmErrorModel& model, int dim) : model_(model), dim_(dim) {
        model_.validate();
        if (model_.bias_kind == BiasKind::kFourier) {
            Rng rng = substream(model_.bias_field_seed, "lm-bias-field");
            const int n_features = 32;
            weights_.resize(n_features);
            phases_.resize(n_features);
            freqs_.assign(static_cast<std::size_t>(n_features),
                          std::vector<double>(static_cast<std::size_t>(dim)));
            double weight_mass = 0.0;
            for (int f = 0; f < n_features; ++f) {
                weights_[static_cast<std::size_t>(f)] = rng.normal();
                weight_mass += std::abs(weights_[static_cast<std::size_t>(f)]);
                phases_[static_cast<std::size_t>(f)] =
                    rng.uniform(0.0, 2.0 * std::numbers::pi);
                for (int d = 0; d < dim; ++d)
                    freqs_[static_cast<std::size_t>(f)][static_cast<std::size_t>(d)] =
                        2.0 * std::numbers::pi * rng.normal();
            }
            for (auto& w : weights_) w /= weight_mass;
        } else {
            require(static_cast<int>(model_.half_space_center.size()) == dim &&
                        static_cast<int>(model_.half_space_direction.size()) == dim,
                    "lm_model", "half-space bias needs center/direction of space dimension");
        }
    }

    double operator()(std::span<const double> x) const {
        require(static_cast<int>(x.size()) == dim_, "dimension_mismatch",
                "bias field input dimension mismatch");
        if (model_.bias_amplitude == 0.0) return 0.0;
        if (model_.bias_kind == BiasKind::kFourier) {
            double v = 0.0;
            for (std::size_t f = 0; f < weights_.size(); ++f) {
                double arg = phases_[f];
                for (std::size_t d = 0; d < x.size(); ++d) arg += freqs_[f][d] * x[d];
                v += weights_[f] * std::cos(arg);
            }
            return model_.bias_amplitude * v;
        }
        double proj = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d)
            proj += (x[d] - model_.half_space_center[d]) * model_.half_space_direction[d];
        return model_.bias_amplitude * std::tanh(-4.0 * proj);
    }

private:
    LmErrorModel model_;
    int dim_ = 0;
    std::vector<double> weights_;
    std::vector<double> phases_;
    std::vector<std::vector<double>> freqs_;
};

/// One-round LM score adjustment: systematic bias at theta plus one noise
/// draw at the current memory's variance.
inline std::pair<double, double> synthetic_adjust(std::span<const double> theta_embedding,
                                                  const TokenMemory& memory,
                                                  const BiasField& field,
                                                  const LmErrorModel& model, Rng& rng) {
    const double bias = field(theta_embedding);
    const double noise = std::sqrt(lm_noise_variance(memory, model)) * rng.normal();
    return {bias, noise};
}

struct LmProposal {
    std::vector<DesignPoint> candidates;
    std::vector<std::string> rationales;
};

/// Everything a propose call may see: the agent's own restricted space and
/// private history plus its token memory. Nothing here crosses an agent
/// boundary; the LM acts on behalf of its owning agent.
struct ProposeContext {
    const DesignSpace* space = nullptr;
    RestrictionMask mask;
    const std::vector<std::int64_t>* feasible = nullptr;  // feasible flat indices
    std::vector<std::pair<DesignPoint, double>> history;  // own (theta, y)
    const TokenMemory* memory = nullptr;
    DesignPoint best_point;
    bool has_best = false;
    std::function<double(const DesignPoint&)> surrogate_mean;  // may be empty
    int m = 10;
    int agent = 0;
    int round = 0;
};

struct EncodeContext {
    DesignPoint theta;
    double y = 0.0;
    Signal signal = Signal::kSuccess;
    double advantage = 0.0;
    int agent = 0;
    int round = 0;
};

class LmInterface {
public:
    virtual ~LmInterface() = default;
    virtual LmProposal propose(const ProposeContext& ctx, Rng& rng) = 0;
    virtual std::string encode_insight(const EncodeContext& ctx) = 0;
    /// Count of adapter failures that fell back to the synthetic path.
    virtual int fallback_events() const { return 0; }
    virtual void reset_fallback_count() {}
};

/// Insight text for the synthetic encoder: a template keyed on the signal
/// and the advantage bucket. Near-baseline results are explicitly marked
/// uninformative below the 0.3 advantage threshold.
inline std::string insight_template(Signal signal, double advantage) {
    if (advantage < 0.3) return "near-baseline, uninformative";
    const bool strong = advantage >= 0.9;
    if (signal == Signal::kSuccess)
        return strong ? "strong success far above baseline" : "clear success above baseline";
    return strong ? "strong failure far below baseline" : "clear failure below baseline";
}

/// Synthetic oracle LM. Proposals are half exploitation (axis perturbations
/// around the argmax of the agent's bias-tilted surrogate mean) and half
/// uniform draws from the restricted space; the warm-start behavior of a
/// well- or mis-calibrated prior is controlled entirely by the bias field.
class SyntheticLm : public LmInterface {
public:
    SyntheticLm(LmErrorModel model, int dim) : model_(std::move(model)), field_(model_, dim) {}

    const BiasField& bias_field() const { return field_; }
    const LmErrorModel& model() const { return model_; }

    LmProposal propose(const ProposeContext& ctx, Rng& rng) override {
        require(ctx.m >= 1, "lm_propose", "m must be >= 1");
        require(ctx.space && ctx.feasible && !ctx.feasible->empty(), "lm_propose",
                "propose context has no feasible space");
        LmProposal out;
        auto push = [&](const DesignPoint& p, const char* why) {
            if (static_cast<int>(out.candidates.size()) >= ctx.m) return;
            const auto flat = ctx.space->flat_index(p);
            for (const auto& q : out.candidates)
                if (ctx.space->flat_index(q) == flat) return;
            if (!ctx.mask.allows(p)) return;
            out.candidates.push_back(p);
            out.rationales.emplace_back(why);
        };

        // Exploitation half: perturb around the bias-tilted surrogate argmax.
        DesignPoint anchor;
        if (ctx.surrogate_mean) {
            std::int64_t best_flat = (*ctx.feasible)[0];
            double best_v = -std::numeric_limits<double>::infinity();
            for (std::int64_t flat : *ctx.feasible) {
                const DesignPoint p = ctx.space->from_flat(flat);
                const double v = ctx.surrogate_mean(p) + field_(ctx.space->embed(p));
                if (v > best_v) {
                    best_v = v;
                    best_flat = flat;
                }
            }
            anchor = ctx.space->from_flat(best_flat);
        } else if (ctx.has_best) {
            anchor = ctx.best_point;
        }
        if (!anchor.empty()) {
            push(anchor, "tilted surrogate argmax");
            auto neighbors = ctx.space->axis_neighbors(anchor);
            const int want = ctx.m / 2;
            while (static_cast<int>(out.candidates.size()) < want && !neighbors.empty()) {
                const auto pick = rng.below(neighbors.size());
                push(neighbors[pick], "perturbation of tilted argmax");
                neighbors.erase(neighbors.begin() + static_cast<std::ptrdiff_t>(pick));
            }
        }

        // Exploration half: uniform over the restricted space.
        int attempts = 0;
        while (static_cast<int>(out.candidates.size()) < ctx.m &&
               attempts < 50 * ctx.m) {
            ++attempts;
            const auto flat = (*ctx.feasible)[rng.below(ctx.feasible->size())];
            push(ctx.space->from_flat(flat), "uniform draw");
        }
        // Small spaces may not have m distinct points; deterministic fill.
        for (std::int64_t flat : *ctx.feasible) {
            if (static_cast<int>(out.candidates.size()) >= ctx.m) break;
            push(ctx.space->from_flat(flat), "deterministic fill");
        }
        return out;
    }

    std::string encode_insight(const EncodeContext& ctx) override {
        return insight_template(ctx.signal, ctx.advantage);
    }

private:
    LmErrorModel model_;
    BiasField field_;
};

/// Validates externally supplied candidates: wrong arity or non-integer
/// entries are dropped; out-of-range indices snap to the nearest grid index;
/// mask violations snap onto the restricted level when one exists.
inline std::vector<DesignPoint> sanitize_candidates(
    const std::vector<std::vector<double>>& raw, const DesignSpace& space,
    const RestrictionMask& mask, int limit, int* dropped = nullptr) {
    std::vector<DesignPoint> out;
    int drop_count = 0;
    for (const auto& entry : raw) {
        if (static_cast<int>(out.size()) >= limit) break;
        if (static_cast<int>(entry.size()) != space.dim()) {
            ++drop_count;
            continue;
        }
        DesignPoint p(entry.size());
        bool ok = true;
        for (int d = 0; d < space.dim(); ++d) {
            const double v = std::round(entry[static_cast<std::size_t>(d)]);
            if (!std::isfinite(v)) {
                ok = false;
                break;
            }
            p[static_cast<std::size_t>(d)] = static_cast<std::int32_t>(
                std::clamp<double>(v, 0.0, space.size(d) - 1));
        }
        if (!ok) {
            ++drop_count;
            continue;
        }
        if (!mask.allows(p)) p[static_cast<std::size_t>(mask.dim)] = mask.level;
        bool dup = false;
        for (const auto& q : out)
            if (q == p) {
                dup = true;
                break;
            }
        if (dup) continue;
        out.push_back(std::move(p));
    }
    if (dropped) *dropped = drop_count;
    return out;
}

}  // namespace adko
