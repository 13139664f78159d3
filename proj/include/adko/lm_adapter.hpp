#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "adko/lm.hpp"
#include "json.hpp"

namespace adko {

/// Line-delimited JSON child process channel. One request in flight at a
/// time; requests carry a monotonically increasing id and responses must
/// echo it. Any failure (spawn, timeout, parse, id mismatch) poisons the
/// channel; the process is terminated and respawned on the next request.
class AdapterProcess {
public:
    explicit AdapterProcess(std::string command, int timeout_ms = 10000)
        : command_(std::move(command)), timeout_ms_(timeout_ms) {}

    ~AdapterProcess() { shutdown(); }

    AdapterProcess(const AdapterProcess&) = delete;
    AdapterProcess& operator=(const AdapterProcess&) = delete;

    /// Sends one request line and waits for the matching response line.
    /// Returns empty on any protocol failure.
    std::optional<nlohmann::json> request(nlohmann::json body) {
        if (!alive_ && !spawn()) return std::nullopt;
        const std::uint64_t id = next_id_++;
        body["id"] = id;
        std::string line = body.dump();
        line.push_back('\n');
        if (!write_all(line)) {
            shutdown();
            return std::nullopt;
        }
        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(timeout_ms_);
        while (true) {
            std::string resp_line;
            if (!read_line(resp_line, deadline)) {
                shutdown();
                return std::nullopt;
            }
            nlohmann::json resp = nlohmann::json::parse(resp_line, nullptr, false);
            if (resp.is_discarded() || !resp.is_object()) {
                shutdown();
                return std::nullopt;
            }
            if (!resp.contains("id") || !resp["id"].is_number()) {
                // missing id is a protocol violation -> fallback event
                shutdown();
                return std::nullopt;
            }
            if (resp["id"].get<std::uint64_t>() != id) continue;  // stale line, keep reading
            return resp;
        }
    }

private:
    bool spawn() {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0) return false;
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            return false;
        }
        pid_ = fork();
        if (pid_ < 0) return false;
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
        fcntl(out_fd_, F_SETFL, O_NONBLOCK);
        buffer_.clear();
        alive_ = true;
        return true;
    }

    void shutdown() {
        if (in_fd_ >= 0) close(in_fd_);
        if (out_fd_ >= 0) close(out_fd_);
        in_fd_ = out_fd_ = -1;
        if (pid_ > 0) {
            kill(pid_, SIGTERM);
            int status = 0;
            waitpid(pid_, &status, WNOHANG);
            pid_ = -1;
        }
        alive_ = false;
    }

    bool write_all(const std::string& data) {
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = write(in_fd_, data.data() + off, data.size() - off);
            if (n <= 0) return false;
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    bool read_line(std::string& line, std::chrono::steady_clock::time_point deadline) {
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return true;
            }
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) return false;
            const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     deadline - now)
                                     .count();
            pollfd pfd{out_fd_, POLLIN, 0};
            const int pr = poll(&pfd, 1, static_cast<int>(std::min<long long>(wait_ms, 100)));
            if (pr < 0) return false;
            if (pr == 0) continue;
            char chunk[4096];
            const ssize_t n = read(out_fd_, chunk, sizeof chunk);
            if (n <= 0) return false;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    std::string command_;
    int timeout_ms_;
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    bool alive_ = false;
    std::string buffer_;
    std::uint64_t next_id_ = 1;
};

/// External LM speaking the adapter protocol, with the synthetic oracle as
/// the fallback on every protocol failure. Candidate lists coming back from
/// the adapter are validated and snapped to feasibility before use.
class AdapterLm : public LmInterface {
public:
    AdapterLm(std::string command, LmErrorModel model, int dim, int timeout_ms = 10000)
        : process_(std::move(command), timeout_ms), fallback_(std::move(model), dim) {}

    LmProposal propose(const ProposeContext& ctx, Rng& rng) override {
        nlohmann::json req{{"kind", "propose"},
                           {"agent", ctx.agent},
                           {"round", ctx.round},
                           {"m", ctx.m},
                           {"space", space_json(*ctx.space)},
                           {"history", history_json(ctx)},
                           {"tokens", tokens_json(ctx)}};
        auto resp = process_.request(std::move(req));
        if (!resp || !resp->contains("candidates") || !(*resp)["candidates"].is_array()) {
            ++fallbacks_;
            return fallback_.propose(ctx, rng);
        }
        std::vector<std::vector<double>> raw;
        for (const auto& c : (*resp)["candidates"]) {
            if (!c.is_array()) continue;
            std::vector<double> v;
            for (const auto& x : c)
                v.push_back(x.is_number() ? x.get<double>()
                                          : std::numeric_limits<double>::quiet_NaN());
            raw.push_back(std::move(v));
        }
        int dropped = 0;
        LmProposal out;
        out.candidates = sanitize_candidates(raw, *ctx.space, ctx.mask, ctx.m, &dropped);
        dropped_candidates_ += dropped;
        if (out.candidates.empty()) {
            ++fallbacks_;
            return fallback_.propose(ctx, rng);
        }
        return out;
    }

    std::string encode_insight(const EncodeContext& ctx) override {
        nlohmann::json req{{"kind", "encode"},
                           {"agent", ctx.agent},
                           {"round", ctx.round},
                           {"theta", ctx.theta},
                           {"signal", to_string(ctx.signal)},
                           {"advantage", ctx.advantage}};
        auto resp = process_.request(std::move(req));
        if (!resp || !resp->contains("insight") || !(*resp)["insight"].is_string()) {
            ++fallbacks_;
            return "";  // adapter failure -> empty insight
        }
        std::string insight = (*resp)["insight"].get<std::string>();
        if (insight.size() > 512) insight.resize(512);
        return insight;
    }

    int fallback_events() const override { return fallbacks_; }
    void reset_fallback_count() override { fallbacks_ = 0; }
    int dropped_candidates() const { return dropped_candidates_; }

private:
    static nlohmann::json space_json(const DesignSpace& space) {
        nlohmann::json dims = nlohmann::json::array();
        for (int d = 0; d < space.dim(); ++d) dims.push_back(space.size(d));
        return nlohmann::json{{"sizes", dims}};
    }

    static nlohmann::json history_json(const ProposeContext& ctx) {
        nlohmann::json h = nlohmann::json::array();
        for (const auto& [theta, y] : ctx.history)
            h.push_back(nlohmann::json{{"theta", theta}, {"y", y}});
        return h;
    }

    static nlohmann::json tokens_json(const ProposeContext& ctx) {
        nlohmann::json t = nlohmann::json::array();
        if (ctx.memory)
            for (const auto& s : ctx.memory->tokens()) t.push_back(s.token.to_json());
        return t;
    }

    AdapterProcess process_;
    SyntheticLm fallback_;
    int fallbacks_ = 0;
    int dropped_candidates_ = 0;
};

}  // namespace adko
