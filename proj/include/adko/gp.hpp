#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "adko/error.hpp"

namespace adko {

namespace testhook {
/// Multiplicative skew applied to one Matern polynomial coefficient.
/// Only the verify command's negative control sets this (via
/// ADKO_TEST_KERNEL_SKEW); it must stay 0 in real use.
inline double kernel_skew() {
    static const double v = [] {
        const char* e = std::getenv("ADKO_TEST_KERNEL_SKEW");
        return e ? std::strtod(e, nullptr) : 0.0;
    }();
    return v;
}
}  // namespace testhook

struct KernelParams {
    std::vector<double> lengthscale;  // one per embedded dimension
    double signal_variance = 1.0;
    double noise_variance = 1e-2;

    void validate(int dim) const {
        require(signal_variance > 0.0, "kernel_params", "signal_variance must be positive");
        require(noise_variance > 0.0, "kernel_params", "noise_variance must be positive");
        require(static_cast<int>(lengthscale.size()) == dim, "kernel_params",
                "lengthscale length " + std::to_string(lengthscale.size()) +
                    " does not match dimension " + std::to_string(dim));
        for (double l : lengthscale)
            require(l > 0.0, "kernel_params", "lengthscale entries must be positive");
    }

    static KernelParams isotropic(int dim, double lengthscale, double signal_variance,
                                  double noise_variance) {
        KernelParams p;
        p.lengthscale.assign(static_cast<std::size_t>(dim), lengthscale);
        p.signal_variance = signal_variance;
        p.noise_variance = noise_variance;
        return p;
    }
};

/// Matern-5/2 covariance on lengthscale-standardized distance r:
/// k = sigma_f^2 (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r).
inline double matern52(std::span<const double> x1, std::span<const double> x2,
                       const KernelParams& params) {
    require(x1.size() == x2.size(), "dimension_mismatch",
            "kernel inputs have different dimensions");
    require(x1.size() == params.lengthscale.size(), "dimension_mismatch",
            "kernel inputs do not match lengthscale dimension");
    double r2 = 0.0;
    for (std::size_t d = 0; d < x1.size(); ++d) {
        const double t = (x1[d] - x2[d]) / params.lengthscale[d];
        r2 += t * t;
    }
    const double r = std::sqrt(r2);
    const double s5r = std::sqrt(5.0) * r;
    const double poly = 1.0 + s5r + (5.0 / 3.0) * (1.0 + testhook::kernel_skew()) * r2;
    return params.signal_variance * poly * std::exp(-s5r);
}

struct Dataset {
    std::vector<std::vector<double>> points;  // embedded coordinates
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    void append(std::vector<double> x, double y) {
        points.push_back(std::move(x));
        values.push_back(y);
    }

    void validate() const {
        require(points.size() == values.size(), "dataset", "points/values length mismatch");
    }
};

struct Posterior {
    double mean = 0.0;
    double stddev = 0.0;
};

namespace detail {

/// Cholesky with escalating diagonal jitter. Starts at 1e-10 * signal_variance
/// and multiplies by 10 until 1e-4 * signal_variance, then reports the
/// conditioning problem.
inline Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd m,
                                                        double signal_variance) {
    double jitter = 1e-10 * signal_variance;
    const double max_jitter = 1e-4 * signal_variance;
    const Eigen::MatrixXd base = m;
    while (true) {
        m = base;
        m.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) return llt;
        if (jitter >= max_jitter)
            throw Error("gp_conditioning",
                        "Gram matrix not positive definite after escalating jitter to " +
                            std::to_string(jitter));
        jitter *= 10.0;
    }
}

}  // namespace detail

/// Exact GP regression state: one Cholesky factorization of
/// (G + sigma^2 I), reused for every posterior query this round.
class GpModel {
public:
    GpModel(const Dataset& ds, KernelParams params) : params_(std::move(params)) {
        ds.validate();
        const auto n = static_cast<Eigen::Index>(ds.size());
        if (n == 0) {
            dim_ = static_cast<int>(params_.lengthscale.size());
            return;
        }
        dim_ = static_cast<int>(ds.points.front().size());
        params_.validate(dim_);
        x_ = ds.points;
        gram_.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double k = matern52(x_[static_cast<std::size_t>(i)],
                                          x_[static_cast<std::size_t>(j)], params_);
                gram_(i, j) = k;
                gram_(j, i) = k;
            }
        Eigen::MatrixXd sys = gram_;
        sys.diagonal().array() += params_.noise_variance;
        llt_ = detail::cholesky_with_jitter(sys, params_.signal_variance);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y(i) = ds.values[static_cast<std::size_t>(i)];
        alpha_ = llt_.solve(y);
    }

    std::size_t size() const { return x_.size(); }
    const KernelParams& params() const { return params_; }

    Posterior posterior(std::span<const double> query) const {
        if (x_.empty()) {
            // prior: mean 0, variance = signal variance
            return Posterior{0.0, std::sqrt(params_.signal_variance)};
        }
        require(static_cast<int>(query.size()) == dim_, "dimension_mismatch",
                "query dimension does not match dataset");
        const auto n = static_cast<Eigen::Index>(x_.size());
        Eigen::VectorXd kv(n);
        for (Eigen::Index i = 0; i < n; ++i)
            kv(i) = matern52(x_[static_cast<std::size_t>(i)], query, params_);
        const double mean = kv.dot(alpha_);
        const Eigen::VectorXd w = llt_.solve(kv);
        double var = matern52(query, query, params_) - kv.dot(w);
        if (var < 0.0) var = 0.0;
        return Posterior{mean, std::sqrt(var)};
    }

    /// Realized information gain of the observed design:
    /// 0.5 * ln det(I + sigma^-2 G). Diagnostic only.
    double info_gain() const {
        if (x_.empty()) return 0.0;
        Eigen::MatrixXd m = gram_ / params_.noise_variance;
        m.diagonal().array() += 1.0;
        const auto llt = detail::cholesky_with_jitter(m, 1.0);
        const Eigen::MatrixXd& l = llt.matrixLLT();
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
        return 0.5 * logdet;
    }

private:
    KernelParams params_;
    int dim_ = 0;
    std::vector<std::vector<double>> x_;
    Eigen::MatrixXd gram_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
};

inline Posterior posterior(const Dataset& ds, const KernelParams& params,
                           std::span<const double> query) {
    return GpModel(ds, params).posterior(query);
}

inline double info_gain(const Dataset& ds, const KernelParams& params) {
    return GpModel(ds, params).info_gain();
}

/// Median pairwise distance over a set of embedded points; the default
/// bandwidth heuristic for both kernel lengthscale and token similarity.
inline double median_pairwise_distance(const std::vector<std::vector<double>>& pts,
                                       double fallback = 0.3) {
    std::vector<double> dists;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < pts[i].size(); ++k) {
                const double t = pts[i][k] - pts[j][k];
                d2 += t * t;
            }
            dists.push_back(std::sqrt(d2));
        }
    if (dists.empty()) return fallback;
    std::sort(dists.begin(), dists.end());
    const double med = dists[dists.size() / 2];
    return med > 0.0 ? med : fallback;
}

}  // namespace adko
