#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adko/design_space.hpp"
#include "adko/error.hpp"
#include "adko/gp.hpp"
#include "adko/lm.hpp"
#include "adko/rng.hpp"

namespace adko {

enum class ObjectiveKind { kSyntheticGp, kTable };

struct AggregatorSpec {
    enum class Kind { kMean, kMin, kWeighted };
    Kind kind = Kind::kMean;
    std::vector<double> weights;  // WEIGHTED only; positive, sums to 1

    void validate(int n_agents) const {
        if (kind != Kind::kWeighted) return;
        require(static_cast<int>(weights.size()) == n_agents, "aggregator",
                "weight count must equal agent count");
        double sum = 0.0;
        for (double w : weights) {
            require(w > 0.0, "aggregator", "weights must be positive");
            sum += w;
        }
        require(std::abs(sum - 1.0) <= 1e-9, "aggregator", "weights must sum to 1");
    }
};

/// A family of per-agent objectives over one finite design space, with
/// optional per-agent restriction masks and observation noise.
class ObjectiveFamily {
public:
    ObjectiveFamily() = default;

    /// Heterogeneous GP-sampled objectives with controllable correlation:
    /// f_i = sqrt(rho) f_shared + sqrt(1-rho) f_private_i, each component an
    /// exact GP sample on the grid, so every f_i keeps the prior marginal
    /// and cross-agent covariance at any point equals rho * g(theta,theta).
    static ObjectiveFamily sample_synthetic(DesignSpace space, const KernelParams& kernel,
                                            double correlation, int n_agents,
                                            double noise_std, std::uint64_t seed) {
        require(correlation >= 0.0 && correlation <= 1.0, "objective",
                "correlation must lie in [0,1]");
        require(n_agents >= 1, "objective", "need at least one agent");
        require(noise_std >= 0.0, "objective", "noise_std must be non-negative");
        const std::int64_t total = space.total_points();
        require(total <= 10000, "objective",
                "grid too large for dense sampling (limit 1e4 points)");
        kernel.validate(space.dim());

        const auto n = static_cast<Eigen::Index>(total);
        Eigen::MatrixXd gram(n, n);
        std::vector<std::vector<double>> embeds(static_cast<std::size_t>(total));
        for (std::int64_t i = 0; i < total; ++i)
            embeds[static_cast<std::size_t>(i)] = space.embed(space.from_flat(i));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double k = matern52(embeds[static_cast<std::size_t>(i)],
                                          embeds[static_cast<std::size_t>(j)], kernel);
                gram(i, j) = k;
                gram(j, i) = k;
            }
        gram.diagonal().array() += 1e-9 * kernel.signal_variance;
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        require(llt.info() == Eigen::Success, "objective",
                "prior covariance factorization failed");
        const Eigen::MatrixXd chol_l = llt.matrixL();

        auto draw = [&](Rng& rng) {
            Eigen::VectorXd z(n);
            for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
            return Eigen::VectorXd(chol_l * z);
        };

        Rng shared_rng = substream(seed, "objective-shared");
        const Eigen::VectorXd shared = draw(shared_rng);
        const double w_shared = std::sqrt(correlation);
        const double w_private = std::sqrt(1.0 - correlation);

        ObjectiveFamily fam;
        fam.kind_ = ObjectiveKind::kSyntheticGp;
        fam.space_ = std::move(space);
        fam.n_agents_ = n_agents;
        fam.correlation_ = correlation;
        fam.noise_std_ = noise_std;
        fam.masks_.assign(static_cast<std::size_t>(n_agents), RestrictionMask{});
        fam.values_.resize(static_cast<std::size_t>(n_agents));
        for (int a = 0; a < n_agents; ++a) {
            Rng priv_rng = substream(seed, "objective-private", {static_cast<std::uint64_t>(a)});
            const Eigen::VectorXd priv = draw(priv_rng);
            auto& v = fam.values_[static_cast<std::size_t>(a)];
            v.resize(static_cast<std::size_t>(total));
            for (std::int64_t i = 0; i < total; ++i)
                v[static_cast<std::size_t>(i)] = w_shared * shared(i) + w_private * priv(i);
        }
        return fam;
    }

    static ObjectiveFamily from_values(DesignSpace space,
                                       std::vector<std::vector<double>> values,
                                       std::vector<RestrictionMask> masks, double noise_std) {
        ObjectiveFamily fam;
        fam.kind_ = ObjectiveKind::kTable;
        fam.space_ = std::move(space);
        fam.n_agents_ = static_cast<int>(values.size());
        fam.noise_std_ = noise_std;
        fam.values_ = std::move(values);
        fam.masks_ = std::move(masks);
        require(fam.masks_.size() == fam.values_.size(), "objective",
                "mask count must equal agent count");
        return fam;
    }

    ObjectiveKind kind() const { return kind_; }
    const DesignSpace& space() const { return space_; }
    int n_agents() const { return n_agents_; }
    double correlation() const { return correlation_; }
    double noise_std() const { return noise_std_; }
    const RestrictionMask& mask(int agent) const {
        return masks_.at(static_cast<std::size_t>(agent));
    }
    bool has_masks() const {
        for (const auto& m : masks_)
            if (m.active()) return true;
        return false;
    }

    double noiseless(int agent, std::int64_t flat) const {
        return values_.at(static_cast<std::size_t>(agent)).at(static_cast<std::size_t>(flat));
    }

    double noiseless(int agent, const DesignPoint& p) const {
        return noiseless(agent, space_.flat_index(p));
    }

    /// Noisy evaluation. The rng is the caller's per-(agent, round) stream,
    /// so parallel agents cannot perturb each other's noise sequences.
    double evaluate(int agent, const DesignPoint& p, Rng& rng) const {
        require(mask(agent).allows(p), "restriction_violated",
                "agent " + std::to_string(agent) + " evaluated outside its mask");
        const double f = noiseless(agent, p);
        require(std::isfinite(f), "missing_cell",
                "objective has no value at the requested condition");
        return noise_std_ > 0.0 ? f + noise_std_ * rng.normal() : f;
    }

private:
    ObjectiveKind kind_ = ObjectiveKind::kSyntheticGp;
    DesignSpace space_;
    int n_agents_ = 1;
    double correlation_ = 1.0;
    double noise_std_ = 0.0;
    std::vector<std::vector<double>> values_;  // [agent][flat index], NaN = missing cell
    std::vector<RestrictionMask> masks_;
};

/// Aggregated global objective F with its exhaustively computed optimum.
class GlobalObjective {
public:
    GlobalObjective(const ObjectiveFamily& family, AggregatorSpec aggregator)
        : aggregator_(std::move(aggregator)) {
        aggregator_.validate(family.n_agents());
        const std::int64_t total = family.space().total_points();
        values_.resize(static_cast<std::size_t>(total));
        for (std::int64_t i = 0; i < total; ++i)
            values_[static_cast<std::size_t>(i)] = aggregate(family, i);
        optimum_index_ = 0;
        for (std::int64_t i = 1; i < total; ++i)
            if (values_[static_cast<std::size_t>(i)] >
                values_[static_cast<std::size_t>(optimum_index_)])
                optimum_index_ = i;
    }

    double value(std::int64_t flat) const {
        return values_.at(static_cast<std::size_t>(flat));
    }
    double optimum_value() const { return value(optimum_index_); }
    std::int64_t optimum_index() const { return optimum_index_; }

private:
    double aggregate(const ObjectiveFamily& family, std::int64_t flat) const {
        double out = 0.0;
        switch (aggregator_.kind) {
            case AggregatorSpec::Kind::kMean: {
                for (int a = 0; a < family.n_agents(); ++a) out += family.noiseless(a, flat);
                out /= static_cast<double>(family.n_agents());
                break;
            }
            case AggregatorSpec::Kind::kMin: {
                out = std::numeric_limits<double>::infinity();
                for (int a = 0; a < family.n_agents(); ++a)
                    out = std::min(out, family.noiseless(a, flat));
                break;
            }
            case AggregatorSpec::Kind::kWeighted: {
                for (int a = 0; a < family.n_agents(); ++a)
                    out += aggregator_.weights[static_cast<std::size_t>(a)] *
                           family.noiseless(a, flat);
                break;
            }
        }
        return out;
    }

    AggregatorSpec aggregator_;
    std::vector<double> values_;
    std::int64_t optimum_index_ = 0;
};

inline double global_value(const GlobalObjective& g, std::int64_t flat) { return g.value(flat); }

inline std::pair<std::int64_t, double> global_optimum(const GlobalObjective& g) {
    return {g.optimum_index(), g.optimum_value()};
}

// ---------------------------------------------------------------------------
// Categorical table loading

struct TableData {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// Comma-delimited UTF-8 with a header row; cells are opaque strings.
inline TableData read_csv_table(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "table", "cannot open table file " + path);
    TableData t;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (header) {
            t.columns = std::move(cells);
            header = false;
        } else {
            require(cells.size() == t.columns.size(), "table",
                    "row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.columns.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    require(!t.columns.empty(), "table", "table file has no header");
    return t;
}

struct TableRestriction {
    std::string column;
    std::vector<std::string> assign;  // one level per agent
};

/// Builds an ObjectiveFamily from a categorical yield table. The design
/// space is the product of observed levels (first-appearance order). In
/// non-IID mode the restriction column pins one level per agent; every
/// agent still shares the same numeric table.
inline ObjectiveFamily load_table(const std::string& path, const std::string& objective_column,
                                  const std::optional<TableRestriction>& restriction,
                                  int n_agents, double noise_std, int* missing_cells = nullptr) {
    const TableData t = read_csv_table(path);
    int obj_col = -1;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (t.columns[c] == objective_column) obj_col = static_cast<int>(c);
    require(obj_col >= 0, "table", "objective column '" + objective_column + "' not found");

    std::vector<int> cat_cols;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (static_cast<int>(c) != obj_col) cat_cols.push_back(static_cast<int>(c));
    require(!cat_cols.empty(), "table", "table needs at least one categorical column");

    // Levels in first-appearance order, deterministic given the file.
    std::vector<std::vector<std::string>> levels(cat_cols.size());
    for (const auto& row : t.rows)
        for (std::size_t k = 0; k < cat_cols.size(); ++k) {
            const auto& cell = row[static_cast<std::size_t>(cat_cols[k])];
            auto& lv = levels[k];
            if (std::find(lv.begin(), lv.end(), cell) == lv.end()) lv.push_back(cell);
        }

    std::vector<Dimension> dims;
    dims.reserve(cat_cols.size());
    for (auto& lv : levels) dims.push_back(CategoricalDim{lv});
    DesignSpace space(std::move(dims));

    const std::int64_t total = space.total_points();
    std::vector<double> table_values(static_cast<std::size_t>(total),
                                     std::numeric_limits<double>::quiet_NaN());
    for (const auto& row : t.rows) {
        DesignPoint p(cat_cols.size());
        for (std::size_t k = 0; k < cat_cols.size(); ++k) {
            const auto& cell = row[static_cast<std::size_t>(cat_cols[k])];
            const auto it = std::find(levels[k].begin(), levels[k].end(), cell);
            p[k] = static_cast<std::int32_t>(it - levels[k].begin());
        }
        const auto flat = static_cast<std::size_t>(space.flat_index(p));
        require(std::isnan(table_values[flat]), "table",
                "duplicate condition row in table");
        const std::string& raw = row[static_cast<std::size_t>(obj_col)];
        char* end = nullptr;
        const double y = std::strtod(raw.c_str(), &end);
        require(end && *end == '\0' && !raw.empty(), "table",
                "non-numeric objective cell '" + raw + "'");
        table_values[flat] = y;
    }
    int missing = 0;
    for (double v : table_values)
        if (std::isnan(v)) ++missing;
    if (missing_cells) *missing_cells = missing;

    std::vector<RestrictionMask> masks;
    if (restriction) {
        int rest_dim = -1;
        for (std::size_t k = 0; k < cat_cols.size(); ++k)
            if (t.columns[static_cast<std::size_t>(cat_cols[k])] == restriction->column)
                rest_dim = static_cast<int>(k);
        require(rest_dim >= 0, "table",
                "restriction column '" + restriction->column + "' not found");
        n_agents = static_cast<int>(restriction->assign.size());
        require(n_agents >= 1, "table", "restriction must assign at least one agent");
        for (const auto& level : restriction->assign) {
            const auto& lv = levels[static_cast<std::size_t>(rest_dim)];
            const auto it = std::find(lv.begin(), lv.end(), level);
            require(it != lv.end(), "table",
                    "restriction level '" + level + "' not present in table");
            masks.push_back(RestrictionMask{rest_dim, static_cast<int>(it - lv.begin())});
        }
    } else {
        require(n_agents >= 1, "objective", "need at least one agent");
        masks.assign(static_cast<std::size_t>(n_agents), RestrictionMask{});
    }

    std::vector<std::vector<double>> values(static_cast<std::size_t>(n_agents), table_values);
    return ObjectiveFamily::from_values(std::move(space), std::move(values), std::move(masks),
                                        noise_std);
}

// ---------------------------------------------------------------------------
// Lower-bound adversarial instances

enum class LowerBoundKind { kBoundaryOptimum, kBiasedPrior };

struct LowerBoundInstance {
    ObjectiveFamily family;
    double fixed_baseline = 0.0;  // BOUNDARY_OPTIMUM: the baseline to run with
    LmErrorModel lm;              // BIASED_PRIOR: half-space bias toward the wrong half
};

/// BOUNDARY_OPTIMUM: identical noiseless objectives with the contextual
/// baseline pinned at F(theta*), so observations near the optimum encode
/// with advantage ~0 and carry essentially no directional information.
inline LowerBoundInstance boundary_optimum_instance(DesignSpace space,
                                                    const KernelParams& kernel, int n_agents,
                                                    std::uint64_t seed) {
    LowerBoundInstance inst;
    inst.family = ObjectiveFamily::sample_synthetic(std::move(space), kernel,
                                                    /*correlation=*/1.0, n_agents,
                                                    /*noise_std=*/0.0, seed);
    GlobalObjective global(inst.family, AggregatorSpec{});
    inst.fixed_baseline = global.optimum_value();
    return inst;
}

/// BIASED_PRIOR: the synthetic LM bias field peaks on the half-space away
/// from theta*, systematically recommending the wrong half. Amplitude 0
/// reduces to the unbiased family.
inline LowerBoundInstance biased_prior_instance(DesignSpace space, const KernelParams& kernel,
                                                int n_agents, double correlation,
                                                double noise_std, std::uint64_t seed,
                                                double bias_amplitude) {
    LowerBoundInstance inst;
    inst.family = ObjectiveFamily::sample_synthetic(std::move(space), kernel, correlation,
                                                    n_agents, noise_std, seed);
    GlobalObjective global(inst.family, AggregatorSpec{});
    const auto& sp = inst.family.space();
    const std::vector<double> star = sp.embed(sp.from_flat(global.optimum_index()));

    inst.lm.bias_kind = BiasKind::kHalfSpace;
    inst.lm.bias_amplitude = bias_amplitude;
    inst.lm.bias_field_seed = seed;
    inst.lm.half_space_center.assign(star.size(), 0.5);
    std::vector<double> dir(star.size());
    double norm = 0.0;
    for (std::size_t d = 0; d < star.size(); ++d) {
        dir[d] = star[d] - 0.5;
        norm += dir[d] * dir[d];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        dir.assign(star.size(), 0.0);
        dir[0] = 1.0;  // optimum at the center: any half is equally wrong
    } else {
        for (double& v : dir) v /= norm;
    }
    inst.lm.half_space_direction = std::move(dir);
    return inst;
}

}  // namespace adko
