#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace predtree {

/// Quantile of a sorted, non-empty range under the inf rule
/// inf{z : p <= F(z)}. Index comparisons use the same i/n arithmetic as
/// cdf(), so the result agrees with a brute-force scan bit for bit.
inline double sorted_quantile(std::span<const double> sorted, double p) {
    const auto n = sorted.size();
    const auto nd = static_cast<double>(n);
    auto i = static_cast<std::size_t>(std::ceil(p * nd));
    if (i < 1) i = 1;
    if (i > n) i = n;
    while (i > 1 && static_cast<double>(i - 1) / nd >= p) --i;
    while (i < n && static_cast<double>(i) / nd < p) ++i;
    return sorted[i - 1];
}

/// Empirical distribution of a set of response values, used as a
/// nonparametric predictive distribution. Samples are stored sorted
/// ascending with duplicates preserved; the object is immutable after
/// construction and safe to share across threads.
class Ecdf {
public:
    explicit Ecdf(std::vector<double> values) : samples_(std::move(values)) {
        if (samples_.empty()) throw std::invalid_argument("empty sample set");
        for (double v : samples_) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample value");
        }
        std::sort(samples_.begin(), samples_.end());
        double sum = 0.0;
        for (double v : samples_) sum += v;
        mean_ = sum / static_cast<double>(samples_.size());
        double ss = 0.0;
        for (double v : samples_) ss += (v - mean_) * (v - mean_);
        variance_ = ss / static_cast<double>(samples_.size());
    }

    const std::vector<double>& samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double min() const noexcept { return samples_.front(); }
    double max() const noexcept { return samples_.back(); }

    double mean() const noexcept { return mean_; }

    /// Population variance (divide by n).
    double variance() const noexcept { return variance_; }

    /// Fraction of samples <= z; right-continuous, 0 before min, 1 at
    /// and after max.
    double cdf(double z) const {
        auto it = std::upper_bound(samples_.begin(), samples_.end(), z);
        return static_cast<double>(it - samples_.begin()) /
               static_cast<double>(samples_.size());
    }

    /// Smallest sample z with cdf(z) >= p. p must lie in (0, 1]; p = 1
    /// returns the maximum sample. p = 0 is rejected (the inf rule is
    /// undefined there for an ECDF).
    double quantile(double p) const {
        if (!(p > 0.0) || !(p <= 1.0)) {
            throw std::invalid_argument("quantile level must lie in (0, 1]");
        }
        return sorted_quantile(samples_, p);
    }

private:
    std::vector<double> samples_;
    double mean_ = 0.0;
    double variance_ = 0.0;
};

inline Ecdf ecdf_from_samples(std::vector<double> values) { return Ecdf(std::move(values)); }

}  // namespace predtree
