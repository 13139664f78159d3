#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adko/error.hpp"
#include "adko/rng.hpp"
#include "adko/token.hpp"

namespace adko {

enum class GraphKind { kRing, kComplete, kRandomGeometric, kPath, kEdgeList };

inline const char* to_string(GraphKind k) {
    switch (k) {
        case GraphKind::kRing: return "RING";
        case GraphKind::kComplete: return "COMPLETE";
        case GraphKind::kRandomGeometric: return "RANDOM_GEOMETRIC";
        case GraphKind::kPath: return "PATH";
        case GraphKind::kEdgeList: return "EDGE_LIST";
    }
    return "?";
}

/// Undirected communication topology. Connectivity is enforced at
/// construction (the algebraic-connectivity assumption is constructive, not
/// checked downstream). Mixing weights are Metropolis-Hastings:
/// pi_ij = 1/(1+max(deg_i,deg_j)) on edges, diagonal absorbs the rest,
/// which is symmetric doubly stochastic and purely local.
class CommGraph {
public:
    static CommGraph ring(int n) {
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
        if (n > 2) e.emplace_back(n - 1, 0);
        return CommGraph(n, std::move(e));
    }

    static CommGraph path(int n) {
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
        return CommGraph(n, std::move(e));
    }

    static CommGraph complete(int n) {
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
        return CommGraph(n, std::move(e));
    }

    static CommGraph random_geometric(int n, double radius, std::uint64_t seed,
                                      int max_retries = 200) {
        require(radius > 0.0, "graph", "geometric radius must be positive");
        Rng rng = substream(seed, "rgg");
        for (int attempt = 0; attempt < max_retries; ++attempt) {
            std::vector<std::pair<double, double>> pos(static_cast<std::size_t>(n));
            for (auto& p : pos) p = {rng.uniform01(), rng.uniform01()};
            std::vector<std::pair<int, int>> e;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    const double dx = pos[static_cast<std::size_t>(i)].first -
                                      pos[static_cast<std::size_t>(j)].first;
                    const double dy = pos[static_cast<std::size_t>(i)].second -
                                      pos[static_cast<std::size_t>(j)].second;
                    if (std::sqrt(dx * dx + dy * dy) <= radius) e.emplace_back(i, j);
                }
            if (connected(n, e)) return CommGraph(n, std::move(e));
        }
        throw Error("graph_disconnected",
                    "random geometric graph stayed disconnected after retries (radius too small?)");
    }

    static CommGraph from_edge_list_file(const std::string& path, int n) {
        std::ifstream in(path);
        require(in.good(), "graph", "cannot open edge list file " + path);
        std::vector<std::pair<int, int>> e;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            int i = -1, j = -1;
            ls >> i >> j;
            require(!ls.fail(), "graph", "bad edge list line: " + line);
            require(i >= 0 && j >= 0 && i < n && j < n, "graph",
                    "edge endpoint out of range in line: " + line);
            require(i != j, "graph", "self-loop in edge list: " + line);
            e.emplace_back(std::min(i, j), std::max(i, j));
        }
        std::sort(e.begin(), e.end());
        e.erase(std::unique(e.begin(), e.end()), e.end());
        return CommGraph(n, std::move(e));
    }

    CommGraph(int n, std::vector<std::pair<int, int>> edges)
        : n_(n), edges_(std::move(edges)) {
        require(n_ >= 1, "graph", "need at least one agent");
        neighbors_.assign(static_cast<std::size_t>(n_), {});
        for (auto& [i, j] : edges_) {
            require(i >= 0 && j >= 0 && i < n_ && j < n_ && i != j, "graph", "bad edge");
            neighbors_[static_cast<std::size_t>(i)].push_back(j);
            neighbors_[static_cast<std::size_t>(j)].push_back(i);
        }
        for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
        require(connected(n_, edges_), "graph_disconnected",
                "communication graph must be connected");

        laplacian_ = Eigen::MatrixXd::Zero(n_, n_);
        for (auto& [i, j] : edges_) {
            laplacian_(i, i) += 1.0;
            laplacian_(j, j) += 1.0;
            laplacian_(i, j) -= 1.0;
            laplacian_(j, i) -= 1.0;
        }

        mixing_ = Eigen::MatrixXd::Zero(n_, n_);
        for (auto& [i, j] : edges_) {
            const double w = 1.0 / (1.0 + std::max(degree(i), degree(j)));
            mixing_(i, j) = w;
            mixing_(j, i) = w;
        }
        for (int i = 0; i < n_; ++i) mixing_(i, i) = 1.0 - mixing_.row(i).sum();

        if (n_ >= 2) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian_);
            fiedler_ = es.eigenvalues()(1);
        }
    }

    int size() const { return n_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int i) const {
        return neighbors_.at(static_cast<std::size_t>(i));
    }
    double degree(int i) const {
        return static_cast<double>(neighbors_[static_cast<std::size_t>(i)].size());
    }
    bool adjacent(int i, int j) const {
        const auto& nb = neighbors(i);
        return std::binary_search(nb.begin(), nb.end(), j);
    }
    const Eigen::MatrixXd& laplacian() const { return laplacian_; }
    const Eigen::MatrixXd& mixing() const { return mixing_; }

    bool regular() const {
        for (int i = 1; i < n_; ++i)
            if (degree(i) != degree(0)) return false;
        return true;
    }

    double fiedler() const {
        require(n_ >= 2, "graph", "Fiedler value undefined for a singleton graph");
        return fiedler_;
    }

    static bool connected(int n, const std::vector<std::pair<int, int>>& edges) {
        if (n <= 1) return true;
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
        for (auto& [i, j] : edges) {
            adj[static_cast<std::size_t>(i)].push_back(j);
            adj[static_cast<std::size_t>(j)].push_back(i);
        }
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : adj[static_cast<std::size_t>(v)])
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    ++count;
                    stack.push_back(w);
                }
        }
        return count == n;
    }

private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> neighbors_;
    Eigen::MatrixXd laplacian_;
    Eigen::MatrixXd mixing_;
    double fiedler_ = 0.0;
};

struct GraphSpec {
    GraphKind kind = GraphKind::kComplete;
    double radius = 0.6;        // RANDOM_GEOMETRIC only
    std::string edge_file;      // EDGE_LIST only
    bool gossip_relay = false;  // rebroadcast the best foreign token each round
};

inline CommGraph build_graph(const GraphSpec& spec, int n, std::uint64_t seed) {
    switch (spec.kind) {
        case GraphKind::kRing: return CommGraph::ring(n);
        case GraphKind::kComplete: return CommGraph::complete(n);
        case GraphKind::kPath: return CommGraph::path(n);
        case GraphKind::kRandomGeometric:
            return CommGraph::random_geometric(n, spec.radius, seed);
        case GraphKind::kEdgeList: return CommGraph::from_edge_list_file(spec.edge_file, n);
    }
    throw Error("graph", "unknown graph kind");
}

inline CommGraph build_graph(GraphKind kind, int n, std::uint64_t seed, double radius = 0.6,
                             const std::string& edge_file = {}) {
    GraphSpec spec;
    spec.kind = kind;
    spec.radius = radius;
    spec.edge_file = edge_file;
    return build_graph(spec, n, seed);
}

struct SpectralGapCheck {
    double lambda2 = 0.0;   // second-smallest Laplacian eigenvalue
    double mu2 = 0.0;       // second-largest random-walk eigenvalue
    double residual = 0.0;  // |lambda2 - e(1-mu2)| for e-regular graphs,
                            // |lambda2_hat - (1-mu2)| via the normalized
                            // Laplacian otherwise
    bool regular = false;
};

/// Checks the linear relation between the Laplacian spectrum and the
/// random-walk mixing spectrum: lambda_i = e(1 - mu_i) on e-regular graphs,
/// and the normalized-Laplacian identity on general graphs.
inline SpectralGapCheck spectral_gap_check(const CommGraph& g) {
    require(g.size() >= 2, "graph", "spectral gap undefined for a singleton graph");
    const int n = g.size();
    Eigen::MatrixXd adjacency = Eigen::MatrixXd::Zero(n, n);
    for (auto& [i, j] : g.edges()) {
        adjacency(i, j) = 1.0;
        adjacency(j, i) = 1.0;
    }
    Eigen::VectorXd deg(n);
    for (int i = 0; i < n; ++i) deg(i) = g.degree(i);

    // D^-1 A is similar to the symmetric D^-1/2 A D^-1/2; solve the latter.
    Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
    Eigen::MatrixXd walk_sym =
        dinv_sqrt.asDiagonal() * adjacency * dinv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> walk_es(walk_sym);
    const double mu2 = walk_es.eigenvalues()(n - 2);

    SpectralGapCheck out;
    out.lambda2 = g.fiedler();
    out.mu2 = mu2;
    out.regular = g.regular();
    if (out.regular) {
        const double e = g.degree(0);
        out.residual = std::abs(out.lambda2 - e * (1.0 - mu2));
    } else {
        Eigen::MatrixXd norm_lap =
            dinv_sqrt.asDiagonal() * g.laplacian() * dinv_sqrt.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> nl_es(norm_lap);
        out.residual = std::abs(nl_es.eigenvalues()(1) - (1.0 - mu2));
    }
    return out;
}

/// Round-synchronous delivery: agent j's inbox receives exactly the tokens
/// its neighbors put in their outboxes this round; never its own. Each agent
/// may emit at most max_per_agent tokens (1 unless gossip relay is on).
inline std::vector<std::vector<StoredToken>> deliver(
    const CommGraph& g, const std::vector<std::vector<KnowledgeToken>>& outboxes,
    int max_per_agent = 1) {
    require(static_cast<int>(outboxes.size()) == g.size(), "deliver",
            "outbox count does not match agent count");
    for (int i = 0; i < g.size(); ++i)
        require(static_cast<int>(outboxes[static_cast<std::size_t>(i)].size()) <=
                    max_per_agent,
                "comm_budget",
                "agent " + std::to_string(i) + " emitted more than " +
                    std::to_string(max_per_agent) + " token(s) in one round");
    std::vector<std::vector<StoredToken>> inboxes(static_cast<std::size_t>(g.size()));
    for (int sender = 0; sender < g.size(); ++sender)
        for (const auto& tok : outboxes[static_cast<std::size_t>(sender)])
            for (int receiver : g.neighbors(sender))
                inboxes[static_cast<std::size_t>(receiver)].push_back(
                    StoredToken{tok, sender});
    return inboxes;
}

}  // namespace adko
