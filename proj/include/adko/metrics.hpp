#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "adko/benchmark.hpp"
#include "adko/config.hpp"
#include "adko/error.hpp"
#include "adko/rng.hpp"
#include "json.hpp"

namespace adko {

struct RoundRecord {
    std::string run_id;
    std::string method;
    std::uint64_t seed = 0;
    int agent = 0;
    int round = 0;
    std::int64_t theta_flat = 0;
    double y = 0.0;
    double simple_regret = 0.0;
    int tokens_sent = 0;
    int bytes_sent = 0;
    double memory_mean_fidelity = 0.0;
    bool lm_fallback = false;
    double lm_noise_var = 0.0;
};

/// Serialized inter-agent message captured for the privacy audit, together
/// with the raw private values it was derived from.
struct MessageRecord {
    int round = 0;         // emission round of this broadcast
    int sender = 0;        // broadcasting agent (differs from origin on relays)
    int origin_agent = 0;  // token provenance
    std::string wire;
    std::int64_t theta_flat = 0;
    double raw_y = 0.0;
};

struct RunLog {
    RunConfig config;
    std::vector<RoundRecord> records;
    double cumulative_regret = 0.0;
    bool completed_early = false;
    std::vector<MessageRecord> messages;  // populated when capture_messages

    double recompute_cumulative_regret() const {
        double sum = 0.0;
        for (const auto& r : records) sum += r.simple_regret;
        return sum;
    }
};

// ---------------------------------------------------------------------------
// Per-round regret

inline double simple_regret(const GlobalObjective& global, std::int64_t theta_flat) {
    return global.optimum_value() - global.value(theta_flat);
}

// ---------------------------------------------------------------------------
// CSV persistence (17 significant digits: lossless double round-trip)

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* csv_header() {
    return "run_id,method,seed,agent,round,theta,y,simple_regret,tokens_sent,bytes_sent,"
           "memory_mean_fidelity,lm_fallback,lm_noise_var";
}

inline std::string to_csv(const RunLog& log) {
    std::string out = csv_header();
    out.push_back('\n');
    for (const auto& r : log.records) {
        out += r.run_id;
        out.push_back(',');
        out += r.method;
        out.push_back(',');
        out += std::to_string(r.seed);
        out.push_back(',');
        out += std::to_string(r.agent);
        out.push_back(',');
        out += std::to_string(r.round);
        out.push_back(',');
        out += std::to_string(r.theta_flat);
        out.push_back(',');
        out += format_double(r.y);
        out.push_back(',');
        out += format_double(r.simple_regret);
        out.push_back(',');
        out += std::to_string(r.tokens_sent);
        out.push_back(',');
        out += std::to_string(r.bytes_sent);
        out.push_back(',');
        out += format_double(r.memory_mean_fidelity);
        out.push_back(',');
        out += r.lm_fallback ? "1" : "0";
        out.push_back(',');
        out += format_double(r.lm_noise_var);
        out.push_back('\n');
    }
    return out;
}

inline void write_csv(const RunLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot open " + path + " for writing");
    out << to_csv(log);
}

inline std::vector<RoundRecord> parse_records_csv(std::istream& in) {
    std::vector<RoundRecord> records;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            require(line == csv_header(), "csv", "unexpected CSV header: " + line);
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        require(cells.size() == 13, "csv", "bad CSV row: " + line);
        RoundRecord r;
        r.run_id = cells[0];
        r.method = cells[1];
        r.seed = std::stoull(cells[2]);
        r.agent = std::stoi(cells[3]);
        r.round = std::stoi(cells[4]);
        r.theta_flat = std::stoll(cells[5]);
        r.y = std::strtod(cells[6].c_str(), nullptr);
        r.simple_regret = std::strtod(cells[7].c_str(), nullptr);
        r.tokens_sent = std::stoi(cells[8]);
        r.bytes_sent = std::stoi(cells[9]);
        r.memory_mean_fidelity = std::strtod(cells[10].c_str(), nullptr);
        r.lm_fallback = cells[11] == "1";
        r.lm_noise_var = std::strtod(cells[12].c_str(), nullptr);
        records.push_back(std::move(r));
    }
    return records;
}

inline std::vector<RoundRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io", "cannot open " + path);
    return parse_records_csv(in);
}

// ---------------------------------------------------------------------------
// JSON persistence (full log with config snapshot for provenance)

inline nlohmann::json to_json(const RunLog& log) {
    nlohmann::json j;
    j["config"] = to_json(log.config);
    j["cumulative_regret"] = log.cumulative_regret;
    j["completed_early"] = log.completed_early;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : log.records)
        recs.push_back({{"run_id", r.run_id},
                        {"method", r.method},
                        {"seed", r.seed},
                        {"agent", r.agent},
                        {"round", r.round},
                        {"theta", r.theta_flat},
                        {"y", r.y},
                        {"simple_regret", r.simple_regret},
                        {"tokens_sent", r.tokens_sent},
                        {"bytes_sent", r.bytes_sent},
                        {"memory_mean_fidelity", r.memory_mean_fidelity},
                        {"lm_fallback", r.lm_fallback},
                        {"lm_noise_var", r.lm_noise_var}});
    j["records"] = recs;
    return j;
}

inline void write_json(const RunLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot open " + path + " for writing");
    out << to_json(log).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Hit fraction

/// Per-agent top-k target sets: the k best feasible conditions by the
/// agent's own noiseless objective (ties resolve to the lower grid index).
inline std::vector<std::vector<std::int64_t>> top_k_sets(const ObjectiveFamily& family,
                                                         int top_k) {
    require(top_k >= 1, "hit_fraction", "top_k must be >= 1");
    std::vector<std::vector<std::int64_t>> sets;
    for (int a = 0; a < family.n_agents(); ++a) {
        auto feas = feasible_indices(family.space(), family.mask(a));
        std::stable_sort(feas.begin(), feas.end(), [&](std::int64_t l, std::int64_t r) {
            const double fl = family.noiseless(a, l), fr = family.noiseless(a, r);
            if (fl != fr) return fl > fr;
            return l < r;
        });
        if (static_cast<int>(feas.size()) > top_k)
            feas.resize(static_cast<std::size_t>(top_k));
        std::sort(feas.begin(), feas.end());
        sets.push_back(std::move(feas));
    }
    return sets;
}

/// Fraction of (agent, run) pairs that have evaluated one of their top-k
/// feasible conditions within the first e evaluations; a non-decreasing step
/// curve over e = 1..max rounds.
inline std::vector<double> hit_fraction(const std::vector<RunLog>& logs, int top_k) {
    require(!logs.empty(), "hit_fraction", "no logs");
    int max_round = 0;
    std::vector<int> hit_evals;  // one per (log, agent); INT_MAX = never
    for (const auto& log : logs) {
        const ObjectiveFamily family = build_objective(log.config);
        const auto sets = top_k_sets(family, top_k);
        std::vector<int> first(static_cast<std::size_t>(family.n_agents()),
                               std::numeric_limits<int>::max());
        for (const auto& r : log.records) {
            max_round = std::max(max_round, r.round);
            const auto& set = sets[static_cast<std::size_t>(r.agent)];
            if (std::binary_search(set.begin(), set.end(), r.theta_flat))
                first[static_cast<std::size_t>(r.agent)] =
                    std::min(first[static_cast<std::size_t>(r.agent)], r.round);
        }
        for (int h : first) hit_evals.push_back(h);
    }
    std::vector<double> curve(static_cast<std::size_t>(max_round), 0.0);
    for (int e = 1; e <= max_round; ++e) {
        int hits = 0;
        for (int h : hit_evals)
            if (h <= e) ++hits;
        curve[static_cast<std::size_t>(e - 1)] =
            static_cast<double>(hits) / static_cast<double>(hit_evals.size());
    }
    return curve;
}

/// First-hit evaluation indices per (log, agent); rounds+1 when never hit.
inline std::vector<int> evaluations_to_first_hit(const std::vector<RunLog>& logs, int top_k) {
    std::vector<int> out;
    for (const auto& log : logs) {
        const ObjectiveFamily family = build_objective(log.config);
        const auto sets = top_k_sets(family, top_k);
        std::vector<int> first(static_cast<std::size_t>(family.n_agents()),
                               log.config.rounds + 1);
        for (const auto& r : log.records) {
            const auto& set = sets[static_cast<std::size_t>(r.agent)];
            if (std::binary_search(set.begin(), set.end(), r.theta_flat))
                first[static_cast<std::size_t>(r.agent)] =
                    std::min(first[static_cast<std::size_t>(r.agent)], r.round);
        }
        for (int h : first) out.push_back(h);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Communication cost

struct CommCost {
    std::uint64_t bytes_emitted = 0;    // sum of serialized emitted tokens
    std::uint64_t bytes_delivered = 0;  // emitted bytes times receiver fan-out
    double bytes_per_round_per_agent = 0.0;
};

inline CommCost comm_cost(const RunLog& log) {
    CommCost out;
    const CommGraph graph = build_graph(log.config.graph, log.config.n_agents,
                                        derive_seed(log.config.seed, "graph"));
    int max_round = 0;
    for (const auto& r : log.records) {
        out.bytes_emitted += static_cast<std::uint64_t>(r.bytes_sent);
        out.bytes_delivered += static_cast<std::uint64_t>(r.bytes_sent) *
                               static_cast<std::uint64_t>(graph.degree(r.agent));
        max_round = std::max(max_round, r.round);
    }
    if (max_round > 0)
        out.bytes_per_round_per_agent =
            static_cast<double>(out.bytes_emitted) /
            (static_cast<double>(max_round) * static_cast<double>(log.config.n_agents));
    return out;
}

// ---------------------------------------------------------------------------
// Bootstrap and sweep summaries

struct BootstrapCi {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    double half_width() const { return 0.5 * (hi - lo); }
};

/// 95% percentile bootstrap over the sample, 1000 resamples, fixed internal
/// seed so identical inputs give identical intervals.
inline BootstrapCi bootstrap_ci(const std::vector<double>& values, int resamples = 1000) {
    require(!values.empty(), "bootstrap", "no values");
    BootstrapCi out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
    Rng rng(0xB00757A9ULL);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            sum += values[rng.below(values.size())];
        means[static_cast<std::size_t>(b)] = sum / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    const auto lo_idx = static_cast<std::size_t>(0.025 * (resamples - 1));
    const auto hi_idx = static_cast<std::size_t>(0.975 * (resamples - 1));
    out.lo = means[lo_idx];
    out.hi = means[hi_idx];
    return out;
}

struct SweepRow {
    double factor_value = 0.0;
    int n_runs = 0;
    BootstrapCi final_regret;
    double mean_memory_fidelity = 0.0;  // mean of the final-round memory fidelity
};

struct SweepReport {
    std::string factor;
    std::vector<SweepRow> rows;
    bool regret_monotone_increasing = false;
    bool regret_monotone_decreasing = false;
};

/// Single-factor sweep summary: one row per factor value with the mean final
/// cumulative regret and its bootstrap CI. Sweep points must share the exact
/// seed set (one factor varies at a time, seeds matched).
inline SweepReport regret_decomposition_report(
    const std::string& factor,
    const std::vector<std::pair<double, std::vector<RunLog>>>& points) {
    require(!points.empty(), "sweep", "no sweep points");
    std::vector<std::uint64_t> reference_seeds;
    SweepReport report;
    report.factor = factor;
    for (const auto& [value, logs] : points) {
        require(!logs.empty(), "sweep", "sweep point has no runs");
        std::vector<std::uint64_t> seeds;
        for (const auto& log : logs) seeds.push_back(log.config.seed);
        std::sort(seeds.begin(), seeds.end());
        if (reference_seeds.empty())
            reference_seeds = seeds;
        else
            require(seeds == reference_seeds, "sweep_seeds",
                    "sweep points do not share matched seeds");
        SweepRow row;
        row.factor_value = value;
        row.n_runs = static_cast<int>(logs.size());
        std::vector<double> finals;
        double fid = 0.0;
        int fid_count = 0;
        for (const auto& log : logs) {
            finals.push_back(log.cumulative_regret);
            int last_round = 0;
            for (const auto& r : log.records) last_round = std::max(last_round, r.round);
            for (const auto& r : log.records)
                if (r.round == last_round) {
                    fid += r.memory_mean_fidelity;
                    ++fid_count;
                }
        }
        row.final_regret = bootstrap_ci(finals);
        row.mean_memory_fidelity = fid_count > 0 ? fid / fid_count : 0.0;
        report.rows.push_back(row);
    }
    report.regret_monotone_increasing = true;
    report.regret_monotone_decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (report.rows[i].final_regret.mean < report.rows[i - 1].final_regret.mean)
            report.regret_monotone_increasing = false;
        if (report.rows[i].final_regret.mean > report.rows[i - 1].final_regret.mean)
            report.regret_monotone_decreasing = false;
    }
    return report;
}

inline std::string to_csv(const SweepReport& report) {
    std::string out = "factor,value,n_runs,mean_final_regret,ci_lo,ci_hi,mean_memory_fidelity\n";
    for (const auto& r : report.rows) {
        out += report.factor;
        out.push_back(',');
        out += format_double(r.factor_value);
        out.push_back(',');
        out += std::to_string(r.n_runs);
        out.push_back(',');
        out += format_double(r.final_regret.mean);
        out.push_back(',');
        out += format_double(r.final_regret.lo);
        out.push_back(',');
        out += format_double(r.final_regret.hi);
        out.push_back(',');
        out += format_double(r.mean_memory_fidelity);
        out.push_back('\n');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Privacy audit

struct PrivacyAudit {
    int messages_checked = 0;
    int violations = 0;
    std::vector<std::string> details;
};

/// Scans every captured inter-agent message: under an active privacy
/// transform no message may carry the exact normalized theta embedding, and
/// no numeric field may equal the raw observation.
inline PrivacyAudit audit_privacy(const RunLog& log) {
    PrivacyAudit audit;
    const ObjectiveFamily family = build_objective(log.config);
    const DesignSpace& space = family.space();
    const bool privacy_on = log.config.token.privacy.enabled();
    for (const auto& msg : log.messages) {
        ++audit.messages_checked;
        const nlohmann::json j = nlohmann::json::parse(msg.wire);
        const auto embedding = j.at("embedding").get<std::vector<double>>();
        const auto raw_embed = space.embed(space.from_flat(msg.theta_flat));
        if (privacy_on && embedding == raw_embed) {
            ++audit.violations;
            audit.details.push_back("round " + std::to_string(msg.round) + " agent " +
                                    std::to_string(msg.origin_agent) +
                                    ": embedding equals unnoised theta");
        }
        bool leaks_y = j.at("advantage").get<double>() == msg.raw_y ||
                       j.at("fidelity").get<double>() == msg.raw_y;
        for (double e : embedding) leaks_y = leaks_y || e == msg.raw_y;
        if (leaks_y) {
            ++audit.violations;
            audit.details.push_back("round " + std::to_string(msg.round) + " agent " +
                                    std::to_string(msg.origin_agent) +
                                    ": raw y value present in message");
        }
    }
    return audit;
}

}  // namespace adko
