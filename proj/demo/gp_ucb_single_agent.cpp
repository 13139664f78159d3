// Minimal single-agent loop: with the social weights at zero the reasoning
// score is plain GP-UCB over the candidate pool.

#include <iostream>

#include "adko/adko.hpp"

int main() {
    adko::RunConfig config;
    config.method = adko::Method::kAdko;
    config.n_agents = 1;
    config.rounds = 25;
    config.warmup_rounds = 3;
    config.seed = 7;
    config.graph.kind = adko::GraphKind::kComplete;
    config.objective.kind = adko::ObjectiveKind::kSyntheticGp;
    config.objective.dims = {adko::ContinuousDim{0.0, 1.0, 24}};
    config.objective.correlation = 1.0;
    config.objective.noise_std = 0.05;
    config.reasoning.lambda = 0.0;
    config.reasoning.gamma = 0.0;
    config.gp.lengthscale = 0.2;
    config.reasoning.sim_bandwidth = 0.3;

    const adko::RunLog log = adko::run(config);
    std::cout << "round,theta,y,simple_regret\n";
    for (const auto& r : log.records)
        std::cout << r.round << "," << r.theta_flat << "," << r.y << "," << r.simple_regret
                  << "\n";
    std::cout << "cumulative regret: " << log.cumulative_regret << "\n";
    return 0;
}
