#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace predtree {

inline double sample_mean(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

inline double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("sample variance needs n >= 2");
    const double mu = sample_mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(values.size() - 1);
}

struct TTestResult {
    double t_stat = 0.0;
    double p_value = 1.0;
    bool zero_variance = false;
};

/// One-sided paired t-test on precomputed differences d_b. Small p
/// rejects H0: mean(d) <= 0, i.e. p = P(T_{r-1} >= t_obs). Degenerate
/// zero-variance inputs return p = 1 with a flag.
inline TTestResult one_sided_t_test(std::span<const double> diffs) {
    const std::size_t r = diffs.size();
    if (r < 2) throw std::invalid_argument("t-test needs at least 2 replicates");
    const double var = sample_variance(diffs);
    if (var <= 0.0) return TTestResult{0.0, 1.0, true};
    const double mu = sample_mean(diffs);
    const double t = mu / std::sqrt(var / static_cast<double>(r));
    boost::math::students_t_distribution<double> dist(static_cast<double>(r - 1));
    return TTestResult{t, boost::math::cdf(boost::math::complement(dist, t)), false};
}

struct MeanInterval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
};

/// Student-t confidence interval for the mean with r - 1 degrees of
/// freedom.
inline MeanInterval t_confidence_interval(std::span<const double> values, double level = 0.95) {
    const std::size_t r = values.size();
    if (r < 2) throw std::invalid_argument("confidence interval needs n >= 2");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
    const double mu = sample_mean(values);
    const double se = std::sqrt(sample_variance(values) / static_cast<double>(r));
    boost::math::students_t_distribution<double> dist(static_cast<double>(r - 1));
    const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
    return MeanInterval{mu, mu - q * se, mu + q * se, level};
}

}  // namespace predtree
