#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "adko/benchmark.hpp"
#include "adko/config.hpp"
#include "adko/fidelity_mc.hpp"
#include "adko/gp.hpp"
#include "adko/graph.hpp"
#include "adko/metrics.hpp"
#include "adko/reasoning.hpp"
#include "adko/runtime.hpp"
#include "adko/token.hpp"

namespace adko::verify {

struct Invariant {
    std::string name;
    bool full_only = false;
    std::function<void()> check;  // throws adko::Error on violation
};

inline void expect(bool ok, const std::string& name, const std::string& what) {
    if (!ok) throw Error("invariant", name + ": " + what);
}

namespace detail {

inline RunConfig small_synthetic_config(Method method, std::uint64_t seed) {
    RunConfig c;
    c.method = method;
    c.n_agents = 3;
    c.rounds = 14;
    c.warmup_rounds = 3;
    c.seed = seed;
    c.graph.kind = GraphKind::kComplete;
    c.objective.kind = ObjectiveKind::kSyntheticGp;
    c.objective.dims = {ContinuousDim{0.0, 1.0, 12}, ContinuousDim{0.0, 1.0, 12}};
    c.objective.correlation = 0.7;
    c.objective.noise_std = 0.05;
    c.objective.sample_lengthscale = 0.3;
    c.token.budget = 8;
    c.token.recency_weight = 0.1;
    c.token.baseline_mode = BaselineState::Mode::kRunningMedian;
    c.gp.lengthscale = 0.3;
    c.reasoning.sim_bandwidth = 0.3;
    c.pool_size = 12;
    return c;
}

}  // namespace detail

inline std::vector<Invariant> all_invariants() {
    std::vector<Invariant> inv;

    inv.push_back({"gp.kernel_reference_values", false, [] {
        const KernelParams kp = KernelParams::isotropic(1, 1.0, 1.0, 1e-2);
        const std::vector<double> zero{0.0}, one{1.0}, far{100.0};
        expect(std::abs(matern52(zero, zero, kp) - 1.0) < 1e-12,
               "gp.kernel_reference_values", "k(x,x) != signal variance");
        expect(std::abs(matern52(zero, one, kp) - 0.5239941088318203) < 1e-12,
               "gp.kernel_reference_values", "unit-distance value off");
        expect(matern52(zero, far, kp) < 1e-30, "gp.kernel_reference_values",
               "kernel does not decay");
    }});

    inv.push_back({"gp.kernel_psd", false, [] {
        Rng rng(11);
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 5 + static_cast<int>(rng.below(26));
            const int d = 1 + static_cast<int>(rng.below(4));
            const KernelParams kp = KernelParams::isotropic(d, 0.4, 1.0, 1e-2);
            std::vector<std::vector<double>> pts(static_cast<std::size_t>(n));
            for (auto& p : pts) {
                p.resize(static_cast<std::size_t>(d));
                for (auto& x : p) x = rng.uniform01();
            }
            Eigen::MatrixXd g(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    g(i, j) = matern52(pts[static_cast<std::size_t>(i)],
                                       pts[static_cast<std::size_t>(j)], kp);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            expect(es.eigenvalues()(0) >= -1e-10, "gp.kernel_psd",
                   "Gram matrix has eigenvalue below -1e-10");
        }
    }});

    inv.push_back({"gp.posterior_dense_oracle", false, [] {
        Rng rng(12);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + static_cast<int>(rng.below(18));
            const int d = 1 + static_cast<int>(rng.below(3));
            const KernelParams kp = KernelParams::isotropic(d, 0.5, 1.3, 0.05);
            Dataset ds;
            for (int i = 0; i < n; ++i) {
                std::vector<double> x(static_cast<std::size_t>(d));
                for (auto& v : x) v = rng.uniform01();
                ds.append(std::move(x), rng.normal());
            }
            std::vector<double> q(static_cast<std::size_t>(d));
            for (auto& v : q) v = rng.uniform01();
            const Posterior p = posterior(ds, kp, q);
            // dense-inverse reference
            Eigen::MatrixXd g(n, n);
            Eigen::VectorXd kv(n), y(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j)
                    g(i, j) = matern52(ds.points[static_cast<std::size_t>(i)],
                                       ds.points[static_cast<std::size_t>(j)], kp);
                kv(i) = matern52(ds.points[static_cast<std::size_t>(i)], q, kp);
                y(i) = ds.values[static_cast<std::size_t>(i)];
            }
            g.diagonal().array() += kp.noise_variance;
            const Eigen::MatrixXd inv_g = g.inverse();
            const double mean = kv.dot(inv_g * y);
            const double var = matern52(q, q, kp) - kv.dot(inv_g * kv);
            expect(std::abs(p.mean - mean) < 1e-8 &&
                       std::abs(p.stddev - std::sqrt(std::max(0.0, var))) < 1e-8,
                   "gp.posterior_dense_oracle", "posterior deviates from dense solve");
        }
    }});

    inv.push_back({"gp.variance_bounded_by_prior", false, [] {
        Rng rng(13);
        const KernelParams kp = KernelParams::isotropic(2, 0.4, 2.0, 0.1);
        for (int trial = 0; trial < 50; ++trial) {
            Dataset ds;
            const int n = 1 + static_cast<int>(rng.below(20));
            for (int i = 0; i < n; ++i)
                ds.append({rng.uniform01(), rng.uniform01()}, rng.normal());
            const GpModel model(ds, kp);
            for (int q = 0; q < 20; ++q) {
                const std::vector<double> x{rng.uniform01(), rng.uniform01()};
                expect(model.posterior(x).stddev * model.posterior(x).stddev <=
                           kp.signal_variance + 1e-9,
                       "gp.variance_bounded_by_prior", "posterior variance exceeds prior");
            }
        }
    }});

    inv.push_back({"gp.info_gain_monotone", false, [] {
        Rng rng(14);
        const KernelParams kp = KernelParams::isotropic(1, 0.4, 1.0, 1.0);
        Dataset ds;
        double prev = 0.0;
        for (int i = 0; i < 12; ++i) {
            ds.append({rng.uniform01()}, rng.normal());
            const double gain = info_gain(ds, kp);
            expect(gain >= prev - 1e-10, "gp.info_gain_monotone",
                   "information gain decreased under append");
            prev = gain;
        }
    }});

    inv.push_back({"token.entropy_and_fidelity", false, [] {
        expect(binary_entropy(0.0) == 0.0 && binary_entropy(1.0) == 0.0,
               "token.entropy_and_fidelity", "entropy endpoints not zero");
        expect(std::abs(binary_entropy(0.5) - 1.0) < 1e-12, "token.entropy_and_fidelity",
               "entropy maximum not 1 at 1/2");
        double prev = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            const double eta = fidelity_estimate(static_cast<double>(i) / 1000.0);
            expect(eta >= prev - 1e-12, "token.entropy_and_fidelity",
                   "fidelity estimator not monotone in advantage");
            prev = eta;
        }
        expect(fidelity_estimate(0.0) == 0.0 && std::abs(fidelity_estimate(1.0) - 1.0) < 1e-12,
               "token.entropy_and_fidelity", "fidelity endpoints wrong");
    }});

    inv.push_back({"token.prune_budget_and_dominance", false, [] {
        Rng rng(15);
        for (int trial = 0; trial < 30; ++trial) {
            TokenMemory mem(4 + static_cast<int>(rng.below(8)));
            std::vector<StoredToken> incoming;
            const int count = 2 * mem.budget() + static_cast<int>(rng.below(20));
            for (int i = 0; i < count; ++i) {
                KnowledgeToken t;
                t.advantage = rng.uniform01();
                t.fidelity_est = fidelity_estimate(t.advantage);
                t.signal = rng.uniform01() < 0.5 ? Signal::kSuccess : Signal::kFail;
                t.embedding = {rng.uniform01()};
                t.origin_agent = static_cast<int>(rng.below(6));
                t.origin_round = 1 + static_cast<int>(rng.below(30));
                incoming.push_back({t, t.origin_agent});
            }
            const int now = 31;
            const TokenMemory pruned = merge_and_prune(mem, incoming, now, 0.1);
            expect(pruned.size() <= static_cast<std::size_t>(mem.budget()),
                   "token.prune_budget_and_dominance", "memory exceeds budget");
            double min_kept = std::numeric_limits<double>::infinity();
            for (const auto& s : pruned.tokens())
                min_kept = std::min(min_kept, prune_score(s.token, now, 0.1));
            TokenMemory merged_all = mem;
            for (const auto& s : incoming) merged_all.insert(s.token, s.via_agent);
            for (const auto& s : merged_all.tokens()) {
                bool kept = false;
                for (const auto& k : pruned.tokens())
                    if (k.token.origin_agent == s.token.origin_agent &&
                        k.token.origin_round == s.token.origin_round)
                        kept = true;
                if (!kept)
                    expect(prune_score(s.token, now, 0.1) <= min_kept + 1e-12,
                           "token.prune_budget_and_dominance",
                           "dropped a token scoring above a retained one");
            }
        }
    }});

    inv.push_back({"graph.spectra_and_mixing", false, [] {
        expect(std::abs(CommGraph::complete(4).fiedler() - 4.0) < 1e-8,
               "graph.spectra_and_mixing", "K4 Fiedler value not 4");
        expect(std::abs(CommGraph::path(2).fiedler() - 2.0) < 1e-8,
               "graph.spectra_and_mixing", "P2 Fiedler value not 2");
        expect(std::abs(CommGraph::ring(5).fiedler() - 1.3819660112501051) < 1e-8,
               "graph.spectra_and_mixing", "ring-5 Fiedler value off");
        const auto check = spectral_gap_check(CommGraph::ring(6));
        expect(check.regular && check.residual < 1e-8, "graph.spectra_and_mixing",
               "regular-graph spectral relation violated");
        Rng rng(16);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 3 + static_cast<int>(rng.below(10));
            const CommGraph g = CommGraph::random_geometric(n, 0.7, rng.next_u64());
            expect(g.fiedler() > 0.0, "graph.spectra_and_mixing",
                   "connected graph with non-positive Fiedler value");
            for (int i = 0; i < n; ++i) {
                expect(std::abs(g.mixing().row(i).sum() - 1.0) < 1e-12 &&
                           std::abs(g.mixing().col(i).sum() - 1.0) < 1e-12,
                       "graph.spectra_and_mixing", "mixing matrix not doubly stochastic");
            }
        }
    }});

    inv.push_back({"reasoning.compression_gap", false, [] {
        Rng rng(17);
        ReasoningParams params;
        params.sim_bandwidth = 0.4;
        for (int trial = 0; trial < 200; ++trial) {
            TokenMemory mem(64);
            const int count = 1 + static_cast<int>(rng.below(16));
            const int n_agents = 4;
            for (int i = 0; i < count; ++i) {
                KnowledgeToken t;
                t.advantage = rng.uniform01();
                t.fidelity_est = fidelity_estimate(t.advantage);
                t.signal = rng.uniform01() < 0.5 ? Signal::kSuccess : Signal::kFail;
                t.embedding = {rng.uniform01(), rng.uniform01()};
                t.origin_agent = static_cast<int>(rng.below(n_agents));
                t.origin_round = 1 + i;
                mem.insert(t, t.origin_agent);
            }
            const std::vector<double> theta{rng.uniform01(), rng.uniform01()};
            const std::vector<double> row{0.25, 0.25, 0.25, 0.25};
            const SocialTerms full = social_terms(theta, mem, row, params, false);
            const SocialTerms degraded = social_terms(theta, mem, row, params, true);
            expect(full.attract - degraded.attract >= -1e-12 &&
                       full.avoid - degraded.avoid >= -1e-12,
                   "reasoning.compression_gap", "degraded terms exceed oracle terms");
        }
    }});

    inv.push_back({"reasoning.gp_ucb_reduction", false, [] {
        RunConfig c = detail::small_synthetic_config(Method::kAdko, 77);
        c.n_agents = 1;
        c.graph.kind = GraphKind::kComplete;
        c.reasoning.lambda = 0.0;
        c.reasoning.gamma = 0.0;
        const RunLog log = run(c);
        // reference loop: GP-UCB directly on the surrogate over the same pools
        const ObjectiveFamily family = build_objective(c);
        const DesignSpace& space = family.space();
        Dataset ds;
        std::set<std::int64_t> evaluated;
        std::int64_t best_flat = -1;
        double best_y = -std::numeric_limits<double>::infinity();
        std::size_t rec = 0;
        for (int round = 1; round <= c.warmup_rounds; ++round, ++rec) {
            const auto& r = log.records[rec];
            const DesignPoint p = space.from_flat(r.theta_flat);
            ds.append(space.embed(p), r.y);
            evaluated.insert(r.theta_flat);
            if (r.y > best_y) {
                best_y = r.y;
                best_flat = r.theta_flat;
            }
        }
        const auto feasible = feasible_indices(space, family.mask(0));
        const KernelParams kp = KernelParams::isotropic(space.dim(), *c.gp.lengthscale,
                                                        c.gp.signal_variance,
                                                        c.gp.noise_variance);
        for (int round = c.warmup_rounds + 1; round <= c.rounds; ++round, ++rec) {
            PoolContext pc;
            RestrictionMask mask;
            pc.space = &space;
            pc.mask = &mask;
            pc.feasible = &feasible;
            pc.evaluated = &evaluated;
            pc.best = space.from_flat(best_flat);
            pc.pool_size = c.pool_size;
            Rng pool_rng = substream(c.seed, "pool", {0, static_cast<std::uint64_t>(round)});
            const auto pool = candidate_pool(pc, {}, pool_rng);
            const GpModel model(ds, kp);
            std::size_t pick = 0;
            double best_score = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const Posterior p = model.posterior(space.embed(pool[i]));
                const double s = p.mean + c.reasoning.beta * p.stddev;
                if (s > best_score) {
                    best_score = s;
                    pick = i;
                }
            }
            const std::int64_t flat = space.flat_index(pool[pick]);
            expect(flat == log.records[rec].theta_flat, "reasoning.gp_ucb_reduction",
                   "selection diverges from reference GP-UCB at round " +
                       std::to_string(round));
            const double y = log.records[rec].y;
            ds.append(space.embed(pool[pick]), y);
            evaluated.insert(flat);
            if (y > best_y) {
                best_y = y;
                best_flat = flat;
            }
        }
    }});

    inv.push_back({"lm.noise_monotone_and_bias_bound", false, [] {
        LmErrorModel model;
        model.sigma0 = 1.0;
        model.alpha_sigma = 1.0;
        model.bias_amplitude = 0.4;
        model.bias_field_seed = 9;
        TokenMemory mem(64);
        double prev = lm_noise_variance(mem, model);
        expect(std::abs(prev - 1.0) < 1e-12, "lm.noise_monotone_and_bias_bound",
               "empty-memory variance must be sigma0^2");
        for (int i = 0; i < 20; ++i) {
            KnowledgeToken t;
            t.advantage = 0.5;
            t.fidelity_est = fidelity_estimate(0.5);
            t.embedding = {0.5};
            t.origin_agent = 0;
            t.origin_round = i + 1;
            mem.insert(t, 0);
            const double v = lm_noise_variance(mem, model);
            expect(v <= prev + 1e-15, "lm.noise_monotone_and_bias_bound",
                   "noise variance increased under token insertion");
            prev = v;
        }
        const BiasField field(model, 2);
        Rng rng(18);
        for (int i = 0; i < 1000; ++i) {
            const std::vector<double> x{rng.uniform01(), rng.uniform01()};
            expect(std::abs(field(x)) <= model.bias_amplitude + 1e-12,
                   "lm.noise_monotone_and_bias_bound", "bias field exceeds amplitude");
        }
    }});

    inv.push_back({"benchmark.global_optimum_enumeration", false, [] {
        DesignSpace space({ContinuousDim{0, 1, 9}, ContinuousDim{0, 1, 9}});
        const KernelParams kp = KernelParams::isotropic(2, 0.3, 1.0, 1e-6);
        const ObjectiveFamily fam =
            ObjectiveFamily::sample_synthetic(space, kp, 0.5, 3, 0.0, 99);
        const GlobalObjective g(fam, AggregatorSpec{});
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_idx = -1;
        for (std::int64_t i = 0; i < fam.space().total_points(); ++i) {
            double v = 0.0;
            for (int a = 0; a < 3; ++a) v += fam.noiseless(a, i);
            v /= 3.0;
            if (v > best) {
                best = v;
                best_idx = i;
            }
        }
        expect(best_idx == g.optimum_index() && std::abs(best - g.optimum_value()) < 1e-12,
               "benchmark.global_optimum_enumeration",
               "stored optimum disagrees with independent enumeration");
    }});

    inv.push_back({"metrics.csv_roundtrip", false, [] {
        RunConfig c = detail::small_synthetic_config(Method::kAdko, 5);
        const RunLog log = run(c);
        std::stringstream ss(to_csv(log));
        const auto records = parse_records_csv(ss);
        expect(records.size() == log.records.size(), "metrics.csv_roundtrip",
               "record count changed in round-trip");
        for (std::size_t i = 0; i < records.size(); ++i)
            expect(records[i].y == log.records[i].y &&
                       records[i].simple_regret == log.records[i].simple_regret &&
                       records[i].memory_mean_fidelity ==
                           log.records[i].memory_mean_fidelity,
                   "metrics.csv_roundtrip", "numeric field lost precision");
        expect(log.recompute_cumulative_regret() == log.cumulative_regret,
               "metrics.csv_roundtrip", "derived cumulative regret mismatch");
    }});

    inv.push_back({"runtime.determinism_and_budget", false, [] {
        RunConfig c = detail::small_synthetic_config(Method::kAdko, 21);
        const RunLog a = run(c);
        const RunLog b = run(c);
        expect(to_csv(a) == to_csv(b), "runtime.determinism_and_budget",
               "repeated seeded runs differ");
        for (const auto& r : a.records) {
            expect(r.tokens_sent <= 1, "runtime.determinism_and_budget",
                   "more than one token emitted per round");
        }
    }});

    // ---- full level only ----

    inv.push_back({"gp.posterior_dense_oracle_large", true, [] {
        Rng rng(19);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 5 + static_cast<int>(rng.below(46));
            const int d = 1 + static_cast<int>(rng.below(5));
            const KernelParams kp = KernelParams::isotropic(d, 0.5, 1.0, 0.05);
            Dataset ds;
            for (int i = 0; i < n; ++i) {
                std::vector<double> x(static_cast<std::size_t>(d));
                for (auto& v : x) v = rng.uniform01();
                ds.append(std::move(x), rng.normal());
            }
            std::vector<double> q(static_cast<std::size_t>(d));
            for (auto& v : q) v = rng.uniform01();
            const Posterior p = posterior(ds, kp, q);
            Eigen::MatrixXd g(n, n);
            Eigen::VectorXd kv(n), y(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j)
                    g(i, j) = matern52(ds.points[static_cast<std::size_t>(i)],
                                       ds.points[static_cast<std::size_t>(j)], kp);
                kv(i) = matern52(ds.points[static_cast<std::size_t>(i)], q, kp);
                y(i) = ds.values[static_cast<std::size_t>(i)];
            }
            g.diagonal().array() += kp.noise_variance;
            const Eigen::MatrixXd inv_g = g.inverse();
            expect(std::abs(p.mean - kv.dot(inv_g * y)) < 1e-8,
                   "gp.posterior_dense_oracle_large", "posterior mean off oracle");
        }
    }});

    inv.push_back({"token.fidelity_mc_diagnostic", true, [] {
        const Posterior post{0.0, 1.0};
        Rng rng(20);
        const auto at_mean = true_fidelity_mc(post, 0.0, 200000, rng);
        Rng rng2(21);
        const auto far = true_fidelity_mc(post, 5.0, 200000, rng2);
        expect(far.eta > 0.97, "token.fidelity_mc_diagnostic",
               "far-baseline fidelity not near 1");
        for (double b : {-2.0, -1.0, 1.0, 2.0}) {
            Rng r(static_cast<std::uint64_t>(22 + b * 7));
            const auto v = true_fidelity_mc(post, b, 200000, r);
            expect(at_mean.eta <= v.eta + 3.0 * (at_mean.stderr_ + v.stderr_),
                   "token.fidelity_mc_diagnostic",
                   "fidelity at the baseline is not the sweep minimum");
        }
    }});

    inv.push_back({"runtime.collaboration_ordering_20seeds", true, [] {
        double adko_sum = 0.0, indep_sum = 0.0, central_sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            RunConfig c = detail::small_synthetic_config(Method::kAdko, seed);
            c.rounds = 20;
            adko_sum += run(c).cumulative_regret;
            c.method = Method::kIndependent;
            indep_sum += run(c).cumulative_regret;
            c.method = Method::kCentralized;
            central_sum += run(c).cumulative_regret;
        }
        expect(central_sum <= adko_sum && adko_sum <= indep_sum,
               "runtime.collaboration_ordering_20seeds",
               "mean regret ordering CENTRALIZED <= ADKO <= INDEPENDENT violated");
    }});

    inv.push_back({"runtime.privacy_audit", true, [] {
        RunConfig c = detail::small_synthetic_config(Method::kAdko, 31);
        c.token.privacy.noise_std = 0.05;
        c.capture_messages = true;
        const RunLog log = run(c);
        const PrivacyAudit audit = audit_privacy(log);
        expect(audit.messages_checked > 0 && audit.violations == 0,
               "runtime.privacy_audit", "privacy audit found raw-value leaks");
    }});

    return inv;
}

struct VerifyResult {
    int passed = 0;
    int failed = 0;
};

inline VerifyResult run_invariants(bool full, FILE* out = stdout) {
    VerifyResult res;
    for (const auto& inv : all_invariants()) {
        if (inv.full_only && !full) continue;
        const auto start = std::chrono::steady_clock::now();
        try {
            inv.check();
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
            std::fprintf(out, "[ok]   %-45s (%lld ms)\n", inv.name.c_str(),
                         static_cast<long long>(ms));
            ++res.passed;
        } catch (const std::exception& e) {
            std::fprintf(out, "[FAIL] %-45s %s\n", inv.name.c_str(), e.what());
            ++res.failed;
        }
    }
    return res;
}

}  // namespace adko::verify
