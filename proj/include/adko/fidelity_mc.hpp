#pragma once

#include <cmath>
#include <numbers>

#include "adko/error.hpp"
#include "adko/gp.hpp"
#include "adko/rng.hpp"

namespace adko {

struct FidelityEstimate {
    double eta = 0.0;
    double stderr_ = 0.0;
};

namespace detail {
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}
}  // namespace detail

/// Monte-Carlo diagnostic of the mutual-information token fidelity over a
/// discretized outcome. The latent outcome f ~ posterior is binned into
/// `bins` equal-probability bins (entropy log2(bins), sidestepping the sign
/// issues of differential entropy). A token about f carries the exact folded
/// magnitude |f - baseline| plus the directional signal computed from a
/// noisy reading f + eps, eps ~ N(0, (noise_ratio * stddev)^2) -- binary
/// quantization is the lossy channel. The estimate is
///   1 - H(bin | token) / log2(bins),
/// with H(bin | token) evaluated by exact Bayes over the two fold
/// candidates. Near-baseline outcomes lose the sign bit and score lowest;
/// outcomes far from the baseline are nearly lossless.
///
/// Test/verify diagnostic only; the run loop never calls this.
inline FidelityEstimate true_fidelity_mc(const Posterior& post, double baseline, int samples,
                                         Rng& rng, double noise_ratio = 0.5, int bins = 256) {
    require(samples >= 10000, "fidelity_mc", "need at least 1e4 samples");
    require(post.stddev > 0.0, "degenerate_posterior",
            "posterior stddev must be positive for the fidelity diagnostic");
    require(bins >= 2 && noise_ratio > 0.0, "fidelity_mc", "bad discretization parameters");

    const double mu = post.mean;
    const double sigma = post.stddev;
    const double noise = noise_ratio * sigma;
    const double hf = std::log2(static_cast<double>(bins));

    auto bin_of = [&](double z) {
        const double u = detail::std_normal_cdf(z);
        int b = static_cast<int>(u * bins);
        return std::clamp(b, 0, bins - 1);
    };

    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double z = rng.normal();
        const double f = mu + sigma * z;
        const bool success = f + noise * rng.normal() >= baseline;

        // Fold candidates share |f - baseline|; the signal disambiguates.
        const double d = std::abs(f - baseline);
        const double zp = (baseline + d - mu) / sigma;
        const double zm = (baseline - d - mu) / sigma;
        double term = 0.0;
        if (bin_of(zp) != bin_of(zm)) {
            const double p_succ_hi = detail::std_normal_cdf(d / noise);   // P(s=SUCCESS | f+)
            const double p_succ_lo = detail::std_normal_cdf(-d / noise);  // P(s=SUCCESS | f-)
            const double wp = detail::std_normal_pdf(zp) * (success ? p_succ_hi : 1.0 - p_succ_hi);
            const double wm = detail::std_normal_pdf(zm) * (success ? p_succ_lo : 1.0 - p_succ_lo);
            const double wt = f >= baseline ? wp : wm;
            const double denom = wp + wm;
            const double p_true = denom > 0.0 ? wt / denom : 0.5;
            term = -std::log2(std::max(p_true, 1e-300));
        }
        sum += term;
        sum2 += term * term;
    }
    const double n = static_cast<double>(samples);
    const double mean_term = sum / n;
    const double var_term = std::max(0.0, sum2 / n - mean_term * mean_term);
    FidelityEstimate out;
    out.eta = std::clamp(1.0 - mean_term / hf, 0.0, 1.0);
    out.stderr_ = std::sqrt(var_term / n) / hf;
    return out;
}

}  // namespace adko
