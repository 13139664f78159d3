// Command-line front end: run / sweep / verify / report.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "adko/adko.hpp"
#include "adko/verify.hpp"
#include "adko/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    adko::require(in.good(), "io", "cannot open " + path);
    json j = json::parse(in, nullptr, false);
    adko::require(!j.is_discarded(), "config", path + ": not valid JSON");
    return j;
}

struct RunArtifacts {
    std::string csv_path;
    std::string json_path;
};

RunArtifacts write_run_outputs(const adko::RunLog& log, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const std::string base = log.config.run_id;
    RunArtifacts art;
    art.csv_path = (out_dir / (base + ".csv")).string();
    art.json_path = (out_dir / (base + ".json")).string();
    adko::write_csv(log, art.csv_path);
    adko::write_json(log, art.json_path);
    return art;
}

void write_manifest(const adko::RunConfig& config, const RunArtifacts& art,
                    double wall_seconds, const fs::path& out_dir) {
    json m;
    m["config_hash"] = adko::config_hash(config);
    m["code_version"] = adko::kVersion;
    m["wall_time_seconds"] = wall_seconds;
    m["seed"] = config.seed;
    m["csv"] = art.csv_path;
    m["json"] = art.json_path;
    std::ofstream out(out_dir / "manifest.json");
    out << m.dump(2) << "\n";
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override) {
    json j = load_json_file(config_path);
    if (seed_override) j["seed"] = *seed_override;
    const adko::RunConfig config = adko::parse_run_config(j);
    const auto start = std::chrono::steady_clock::now();
    const adko::RunLog log = adko::run(config);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const RunArtifacts art = write_run_outputs(log, out_dir);
    write_manifest(log.config, art, wall, out_dir);
    std::cout << "run " << log.config.run_id << ": " << log.records.size()
              << " records, cumulative regret " << log.cumulative_regret
              << (log.completed_early ? " (space exhausted early)" : "") << "\n";
    return 0;
}

// Applies "a.b.c" = value into a config JSON template.
void apply_axis(json& config, const std::string& path, const json& value) {
    json* node = &config;
    std::size_t start = 0;
    std::vector<std::string> parts;
    while (true) {
        const auto dot = path.find('.', start);
        if (dot == std::string::npos) {
            parts.push_back(path.substr(start));
            break;
        }
        parts.push_back(path.substr(start, dot - start));
        start = dot + 1;
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        adko::require(node->is_object(), "sweep", "axis path not addressable: " + path);
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
}

struct SweepPointSpec {
    json config;           // fully substituted template
    std::string label;     // "lm.bias_amplitude=0.25,..."
    double factor = 0.0;   // numeric value of the first axis (for the report)
};

int cmd_sweep(const std::string& spec_path, const std::string& out_dir, int jobs) {
    const json spec = load_json_file(spec_path);
    adko::cfg::check_keys(spec, "$", {"config", "axes", "seeds", "product_cap"});
    const json& tmpl = adko::cfg::get_req(spec, "$", "config");
    const json axes = spec.value("axes", json::array());
    adko::require(axes.is_array(), "sweep", "$.axes: expected an array");
    std::vector<std::uint64_t> seeds;
    for (const auto& s : adko::cfg::get_req(spec, "$", "seeds"))
        seeds.push_back(s.get<std::uint64_t>());
    adko::require(!seeds.empty(), "sweep", "$.seeds: need at least one seed");
    const std::size_t cap = spec.value("product_cap", 512u);

    // Cartesian product of axis values.
    std::vector<SweepPointSpec> points;
    points.push_back({tmpl, "", 0.0});
    bool first_axis = true;
    for (const auto& axis : axes) {
        adko::cfg::check_keys(axis, "$.axes[]", {"path", "values"});
        const std::string path = axis.at("path").get<std::string>();
        const json& values = axis.at("values");
        std::vector<SweepPointSpec> expanded;
        for (const auto& point : points)
            for (const auto& v : values) {
                SweepPointSpec next = point;
                apply_axis(next.config, path, v);
                next.label += (next.label.empty() ? "" : ",") + path + "=" + v.dump();
                if (first_axis && v.is_number()) next.factor = v.get<double>();
                expanded.push_back(std::move(next));
            }
        points = std::move(expanded);
        first_axis = false;
    }
    adko::require(points.size() * seeds.size() <= cap, "sweep",
                  "sweep would launch " + std::to_string(points.size() * seeds.size()) +
                      " runs, above the cap of " + std::to_string(cap));

    // Validate every configuration before any run starts.
    struct Job {
        std::size_t point;
        std::uint64_t seed;
        adko::RunConfig config;
        fs::path dir;
    };
    std::vector<Job> job_list;
    for (std::size_t p = 0; p < points.size(); ++p)
        for (const auto seed : seeds) {
            json cj = points[p].config;
            cj["seed"] = seed;
            Job job;
            job.point = p;
            job.seed = seed;
            job.config = adko::parse_run_config(cj);
            job.dir = fs::path(out_dir) / ("point_" + std::to_string(p)) /
                      ("seed_" + std::to_string(seed));
            job_list.push_back(std::move(job));
        }

    std::vector<adko::RunLog> logs(job_list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= job_list.size()) return;
            const Job& job = job_list[i];
            adko::RunLog log = adko::run(job.config);
            const RunArtifacts art = write_run_outputs(log, job.dir);
            write_manifest(log.config, art, 0.0, job.dir);
            logs[i] = std::move(log);
        }
    };
    const int n_threads = std::max(1, jobs);
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    // Per-point summary; single-axis sweeps also get the trend report.
    fs::create_directories(out_dir);
    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    summary << "point,label,seed,cumulative_regret,bytes_emitted\n";
    for (std::size_t i = 0; i < job_list.size(); ++i) {
        const auto& job = job_list[i];
        summary << job.point << "," << points[job.point].label << "," << job.seed << ","
                << adko::format_double(logs[i].cumulative_regret) << ","
                << adko::comm_cost(logs[i]).bytes_emitted << "\n";
    }
    if (axes.size() == 1) {
        std::vector<std::pair<double, std::vector<adko::RunLog>>> grouped;
        for (std::size_t p = 0; p < points.size(); ++p) {
            std::vector<adko::RunLog> group;
            for (std::size_t i = 0; i < job_list.size(); ++i)
                if (job_list[i].point == p) group.push_back(logs[i]);
            grouped.emplace_back(points[p].factor, std::move(group));
        }
        const auto report = adko::regret_decomposition_report(
            axes[0].at("path").get<std::string>(), grouped);
        std::ofstream rep(fs::path(out_dir) / "sweep_report.csv");
        rep << adko::to_csv(report);
        std::cout << adko::to_csv(report);
        std::cout << "trend: monotone_increasing=" << report.regret_monotone_increasing
                  << " monotone_decreasing=" << report.regret_monotone_decreasing << "\n";
    }
    std::cout << "sweep complete: " << job_list.size() << " runs under " << out_dir << "\n";
    return 0;
}

int cmd_verify(const std::string& level) {
    adko::require(level == "fast" || level == "full", "cli",
                  "--level must be fast or full");
    const auto res = adko::verify::run_invariants(level == "full");
    std::cout << res.passed << " passed, " << res.failed << " failed\n";
    return res.failed == 0 ? 0 : 1;
}

int cmd_report(const std::string& in_dir, const std::string& out_path) {
    std::map<std::string, std::vector<double>> regret_by_method;
    std::map<std::string, std::uint64_t> bytes_by_method;
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        const std::string name = entry.path().filename().string();
        if (name == "summary.csv" || name == "sweep_report.csv") continue;
        const auto records = adko::read_records_csv(entry.path().string());
        if (records.empty()) continue;
        ++files;
        double total = 0.0;
        std::uint64_t bytes = 0;
        for (const auto& r : records) {
            total += r.simple_regret;
            bytes += static_cast<std::uint64_t>(r.bytes_sent);
        }
        regret_by_method[records.front().method].push_back(total);
        bytes_by_method[records.front().method] += bytes;
    }
    adko::require(files > 0, "report", "no run CSVs under " + in_dir);
    std::ofstream out(out_path);
    adko::require(out.good(), "io", "cannot open " + out_path + " for writing");
    out << "method,n_runs,mean_final_regret,ci_lo,ci_hi,total_bytes_emitted\n";
    for (const auto& [method, values] : regret_by_method) {
        const auto ci = adko::bootstrap_ci(values);
        out << method << "," << values.size() << "," << adko::format_double(ci.mean) << ","
            << adko::format_double(ci.lo) << "," << adko::format_double(ci.hi) << ","
            << bytes_by_method[method] << "\n";
    }
    std::cout << "report written to " << out_path << " (" << files << " runs)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized knowledge-token optimization simulator"};
    app.set_version_flag("--version", adko::kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", spec_path, level = "fast", in_dir, out_path;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int jobs = 1;

    auto* run_cmd = app.add_subcommand("run", "Execute one configured run");
    run_cmd->add_option("--config", config_path, "Run configuration JSON")->required();
    run_cmd->add_option("--out", out_dir, "Output directory");
    run_cmd->add_option("--seed", seed, "Override the config seed")
        ->each([&](const std::string&) { has_seed = true; });

    auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment sweep");
    sweep_cmd->add_option("--spec", spec_path, "Sweep specification JSON")->required();
    sweep_cmd->add_option("--out", out_dir, "Output directory");
    sweep_cmd->add_option("--jobs", jobs, "Parallel run workers");

    auto* verify_cmd = app.add_subcommand("verify", "Run invariant health checks");
    verify_cmd->add_option("--level", level, "fast or full");

    auto* report_cmd = app.add_subcommand("report", "Summarize a directory of run CSVs");
    report_cmd->add_option("--in", in_dir, "Directory of run outputs")->required();
    report_cmd->add_option("--out", out_path, "Summary CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return cmd_run(config_path, out_dir,
                           has_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
        if (sweep_cmd->parsed()) return cmd_sweep(spec_path, out_dir, jobs);
        if (verify_cmd->parsed()) return cmd_verify(level);
        if (report_cmd->parsed()) return cmd_report(in_dir, out_path);
    } catch (const adko::Error& e) {
        std::cerr << "error [" << e.kind() << "] " << e.message() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
