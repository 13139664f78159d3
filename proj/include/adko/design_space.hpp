#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "adko/error.hpp"

namespace adko {

/// A point is a vector of per-dimension grid indices.
using DesignPoint = std::vector<std::int32_t>;

struct ContinuousDim {
    double low = 0.0;
    double high = 1.0;
    int grid = 2;  // number of grid points the interval is discretized into
};

struct CategoricalDim {
    std::vector<std::string> levels;
};

using Dimension = std::variant<ContinuousDim, CategoricalDim>;

/// Mixed continuous/categorical search space. Continuous intervals are
/// discretized to per-dimension grids; categorical dimensions map their K
/// levels to K equally spaced points in [0,1], so a single kernel code path
/// serves both. All optimization happens over the resulting finite grid.
class DesignSpace {
public:
    DesignSpace() = default;

    explicit DesignSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
        require(!dims_.empty(), "design_space", "space needs at least one dimension");
        sizes_.reserve(dims_.size());
        for (const auto& d : dims_) {
            int n = 0;
            if (const auto* c = std::get_if<ContinuousDim>(&d)) {
                require(c->grid >= 1, "design_space", "continuous grid must be >= 1");
                require(c->high >= c->low, "design_space", "interval high < low");
                n = c->grid;
            } else {
                const auto& cat = std::get<CategoricalDim>(d);
                require(!cat.levels.empty(), "design_space", "categorical dim has no levels");
                n = static_cast<int>(cat.levels.size());
            }
            sizes_.push_back(n);
        }
    }

    int dim() const { return static_cast<int>(dims_.size()); }
    int size(int d) const { return sizes_.at(static_cast<std::size_t>(d)); }
    const std::vector<int>& sizes() const { return sizes_; }
    const Dimension& dimension(int d) const { return dims_.at(static_cast<std::size_t>(d)); }

    std::int64_t total_points() const {
        std::int64_t total = 1;
        for (int n : sizes_) {
            total *= n;
            require(total > 0 && total < (std::int64_t{1} << 40), "design_space",
                    "grid too large to enumerate");
        }
        return total;
    }

    void check_point(const DesignPoint& p) const {
        require(static_cast<int>(p.size()) == dim(), "design_space",
                "point dimension mismatch");
        for (int d = 0; d < dim(); ++d)
            require(p[static_cast<std::size_t>(d)] >= 0 &&
                        p[static_cast<std::size_t>(d)] < sizes_[static_cast<std::size_t>(d)],
                    "design_space", "point index out of range in dimension " + std::to_string(d));
    }

    /// Normalized coordinates in [0,1]^d; the shared representation used by
    /// the surrogate kernel, token embeddings and similarity computations.
    std::vector<double> embed(const DesignPoint& p) const {
        check_point(p);
        std::vector<double> x(p.size());
        for (std::size_t d = 0; d < p.size(); ++d) {
            const int n = sizes_[d];
            x[d] = n <= 1 ? 0.0 : static_cast<double>(p[d]) / static_cast<double>(n - 1);
        }
        return x;
    }

    std::int64_t flat_index(const DesignPoint& p) const {
        check_point(p);
        std::int64_t idx = 0;
        for (std::size_t d = 0; d < p.size(); ++d) idx = idx * sizes_[d] + p[d];
        return idx;
    }

    DesignPoint from_flat(std::int64_t idx) const {
        require(idx >= 0 && idx < total_points(), "design_space", "flat index out of range");
        DesignPoint p(dims_.size());
        for (int d = dim() - 1; d >= 0; --d) {
            const auto sz = static_cast<std::int64_t>(sizes_[static_cast<std::size_t>(d)]);
            p[static_cast<std::size_t>(d)] = static_cast<std::int32_t>(idx % sz);
            idx /= sz;
        }
        return p;
    }

    /// Actual coordinate value of dimension d at grid index i (continuous
    /// dims interpolate the interval, categorical dims return the index).
    double coordinate_value(int d, int i) const {
        const auto& dm = dims_.at(static_cast<std::size_t>(d));
        if (const auto* c = std::get_if<ContinuousDim>(&dm)) {
            if (c->grid <= 1) return c->low;
            return c->low + (c->high - c->low) * static_cast<double>(i) /
                                static_cast<double>(c->grid - 1);
        }
        return static_cast<double>(i);
    }

    /// Single-step axis neighbors (the exploitation perturbations of the
    /// candidate pool).
    std::vector<DesignPoint> axis_neighbors(const DesignPoint& p) const {
        check_point(p);
        std::vector<DesignPoint> out;
        for (int d = 0; d < dim(); ++d) {
            for (int step : {-1, +1}) {
                const int v = p[static_cast<std::size_t>(d)] + step;
                if (v < 0 || v >= sizes_[static_cast<std::size_t>(d)]) continue;
                DesignPoint q = p;
                q[static_cast<std::size_t>(d)] = v;
                out.push_back(std::move(q));
            }
        }
        return out;
    }

private:
    std::vector<Dimension> dims_;
    std::vector<int> sizes_;
};

/// Per-agent feasibility restriction: one dimension pinned to one level
/// (the non-IID table mode). Inactive mask allows everything.
struct RestrictionMask {
    int dim = -1;
    int level = -1;

    bool active() const { return dim >= 0; }

    bool allows(const DesignPoint& p) const {
        return !active() || p[static_cast<std::size_t>(dim)] == level;
    }
};

inline std::vector<std::int64_t> feasible_indices(const DesignSpace& space,
                                                  const RestrictionMask& mask) {
    std::vector<std::int64_t> out;
    const std::int64_t total = space.total_points();
    for (std::int64_t i = 0; i < total; ++i) {
        if (mask.allows(space.from_flat(i))) out.push_back(i);
    }
    return out;
}

}  // namespace adko
