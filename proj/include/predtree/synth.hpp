#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "predtree/dataset.hpp"
#include "predtree/rng.hpp"

namespace predtree {

struct Lognormal {
    double meanlog;
    double sdlog;
};

struct Gaussian {
    double mean;
    double sd;
};

struct Exponential {
    double rate;
};

using RegionDist = std::variant<Lognormal, Gaussian, Exponential>;

/// One x-subregion of a piecewise generator and the response
/// distribution attached to it.
struct RegionSpec {
    double lower;
    double upper;
    RegionDist dist;
};

/// Piecewise response generator on a contiguous x-interval. Regions tile
/// the interval; membership is left-open/right-closed except the first
/// region, which includes its lower bound.
struct PiecewiseSpec {
    std::vector<RegionSpec> regions;

    void validate() const {
        if (regions.empty()) throw std::invalid_argument("piecewise spec has no regions");
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const auto& r = regions[i];
            if (!(r.lower < r.upper)) {
                throw std::invalid_argument("region bounds must satisfy lower < upper");
            }
            if (i > 0 && regions[i - 1].upper != r.lower) {
                throw std::invalid_argument("regions must tile the interval without gaps");
            }
            std::visit(
                [](const auto& d) {
                    using T = std::decay_t<decltype(d)>;
                    if constexpr (std::is_same_v<T, Lognormal>) {
                        if (!(d.sdlog > 0)) throw std::invalid_argument("sdlog must be positive");
                    } else if constexpr (std::is_same_v<T, Gaussian>) {
                        if (!(d.sd > 0)) throw std::invalid_argument("sd must be positive");
                    } else {
                        if (!(d.rate > 0)) throw std::invalid_argument("rate must be positive");
                    }
                },
                r.dist);
        }
    }

    double x_min() const { return regions.front().lower; }
    double x_max() const { return regions.back().upper; }

    /// Region containing x: first region is [lower, upper], the rest
    /// (lower, upper].
    std::size_t region_of(double x) const {
        if (x >= regions.front().lower && x <= regions.front().upper) return 0;
        for (std::size_t i = 1; i < regions.size(); ++i) {
            if (x > regions[i].lower && x <= regions[i].upper) return i;
        }
        throw std::invalid_argument("x outside generator interval");
    }

    /// Four lognormal regions with well-separated moments.
    static PiecewiseSpec easy() {
        return PiecewiseSpec{{
            {-1.0, -0.5, Lognormal{2.0, 1.0 / 2.0}},
            {-0.5, 0.0, Lognormal{3.0, 1.0 / 3.0}},
            {0.0, 0.5, Lognormal{4.0, 1.0 / 4.0}},
            {0.5, 1.0, Lognormal{5.0, 1.0 / 5.0}},
        }};
    }

    /// Four lognormal regions with nearly matching low-order moments.
    static PiecewiseSpec hard() {
        return PiecewiseSpec{{
            {-1.0, -0.5, Lognormal{1.0 / 2.0, 0.5}},
            {-0.5, 0.0, Lognormal{1.0 / 3.0, 0.6}},
            {0.0, 0.5, Lognormal{1.0 / 4.0, 0.3}},
            {0.5, 1.0, Lognormal{1.0 / 5.0, 0.3}},
        }};
    }

    /// Two regions with equal means but different shape: Normal(1, 2) on
    /// [-1, 0], Exponential(1) on (0, 1].
    static PiecewiseSpec toy() {
        return PiecewiseSpec{{
            {-1.0, 0.0, Gaussian{1.0, 2.0}},
            {0.0, 1.0, Exponential{1.0}},
        }};
    }

    static PiecewiseSpec preset(const std::string& name) {
        if (name == "easy") return easy();
        if (name == "hard") return hard();
        if (name == "toy") return toy();
        throw std::invalid_argument("unknown preset '" + name + "' (expected easy|hard|toy)");
    }
};

namespace detail {

inline double draw_from(const RegionDist& dist, Rng& rng) {
    return std::visit(
        [&rng](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Lognormal>) {
                return rng.lognormal(d.meanlog, d.sdlog);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return rng.normal(d.mean, d.sd);
            } else {
                return rng.exponential(d.rate);
            }
        },
        dist);
}

}  // namespace detail

/// Draw n rows: x uniform over the spec's full interval, y from the
/// region containing x. Fully reproducible from the seed; distinct seeds
/// give independent streams.
inline Dataset generate(const PiecewiseSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw std::invalid_argument("sample count must be positive");
    Rng rng(seed);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(spec.x_min(), spec.x_max());
        y[i] = detail::draw_from(spec.regions[spec.region_of(x[i])].dist, rng);
    }
    std::vector<Column> cols;
    cols.push_back(numeric_column("x", std::move(x)));
    return Dataset(std::move(cols), std::move(y), "y");
}

/// Monte Carlo estimates of E[y], E[y^2], E[y^3] for one region, with
/// standard errors. Used to audit the generator's parameterization.
struct MomentEstimate {
    double mean[3];  // E[y], E[y^2], E[y^3]
    double se[3];
    std::size_t n_mc;
};

inline MomentEstimate moment_oracle(const PiecewiseSpec& spec, std::size_t region,
                                    std::size_t n_mc, std::uint64_t seed) {
    spec.validate();
    if (region >= spec.regions.size()) throw std::invalid_argument("region index out of range");
    if (n_mc < 2) throw std::invalid_argument("n_mc too small");
    Rng rng(seed);
    double sum[3] = {0, 0, 0};
    double sumsq[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n_mc; ++i) {
        const double y = detail::draw_from(spec.regions[region].dist, rng);
        double p = y;
        for (int k = 0; k < 3; ++k) {
            sum[k] += p;
            sumsq[k] += p * p;
            p *= y;
        }
    }
    MomentEstimate est{};
    est.n_mc = n_mc;
    const double nd = static_cast<double>(n_mc);
    for (int k = 0; k < 3; ++k) {
        est.mean[k] = sum[k] / nd;
        const double var = (sumsq[k] - nd * est.mean[k] * est.mean[k]) / (nd - 1.0);
        est.se[k] = std::sqrt(std::max(var, 0.0) / nd);
    }
    return est;
}

/// Analytic lognormal raw moment E[y^k] = exp(k mu + k^2 sigma^2 / 2).
inline double lognormal_moment(double meanlog, double sdlog, int k) {
    return std::exp(k * meanlog + 0.5 * k * k * sdlog * sdlog);
}

}  // namespace predtree
