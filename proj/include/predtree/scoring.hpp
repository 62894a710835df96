#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "predtree/ecdf.hpp"

namespace predtree {

enum class ScoreKind { Sse, Crps, Dss, Is1, Is2 };

inline std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::Sse: return "sse";
        case ScoreKind::Crps: return "crps";
        case ScoreKind::Dss: return "dss";
        case ScoreKind::Is1: return "is1";
        case ScoreKind::Is2: return "is2";
    }
    throw std::logic_error("unreachable score kind");
}

inline ScoreKind parse_score_kind(const std::string& name) {
    if (name == "sse") return ScoreKind::Sse;
    if (name == "crps") return ScoreKind::Crps;
    if (name == "dss") return ScoreKind::Dss;
    if (name == "is1") return ScoreKind::Is1;
    if (name == "is2") return ScoreKind::Is2;
    throw std::invalid_argument("unknown score '" + name + "' (expected sse|crps|dss|is1|is2)");
}

/// Negatively oriented scoring rule S(F, y): smaller is better. alpha is
/// the interval level for Is1/Is2 and is ignored by the other kinds.
struct ScoringRule {
    ScoreKind kind = ScoreKind::Sse;
    double alpha = 0.2;

    void validate() const {
        if ((kind == ScoreKind::Is1 || kind == ScoreKind::Is2) &&
            !(alpha > 0.0 && alpha < 1.0)) {
            throw std::invalid_argument("interval score alpha must lie in (0, 1)");
        }
    }

    std::string name() const { return to_string(kind); }

    static ScoringRule sse() { return {ScoreKind::Sse, 0.2}; }
    static ScoringRule crps() { return {ScoreKind::Crps, 0.2}; }
    static ScoringRule dss() { return {ScoreKind::Dss, 0.2}; }
    static ScoringRule is1(double alpha = 0.2) {
        ScoringRule r{ScoreKind::Is1, alpha};
        r.validate();
        return r;
    }
    static ScoringRule is2(double alpha = 0.2) {
        ScoringRule r{ScoreKind::Is2, alpha};
        r.validate();
        return r;
    }

    static ScoringRule from_name(const std::string& name, double alpha = 0.2) {
        ScoringRule r{parse_score_kind(name), alpha};
        r.validate();
        return r;
    }
};

inline constexpr double kDssRelativeVarianceFloor = 1e-9;
inline constexpr double kDssAbsoluteVarianceFloor = 1e-12;

/// Variance floor applied before taking log(variance) in DSS, derived
/// from a reference (root-node) variance. Keeps constant nodes finite.
inline double dss_variance_floor(double reference_variance) {
    return std::max(kDssRelativeVarianceFloor * reference_variance, kDssAbsoluteVarianceFloor);
}

namespace detail {

inline void require_finite_observation(double y) {
    if (!std::isfinite(y)) throw std::invalid_argument("non-finite observation");
}

inline void require_samples(std::span<const double> samples) {
    if (samples.empty()) throw std::invalid_argument("empty sample set");
    for (double v : samples) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample value");
    }
}

inline double mean_of(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

/// Population variance (divide by n), two-pass for stability.
inline double population_variance(std::span<const double> values) {
    const double mu = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(values.size());
}

}  // namespace detail

/// CRPS by its two-expectation definition, evaluated with an O(n^2)
/// double loop. Oracle for crps_fast.
inline double crps_naive(const Ecdf& f, double y) {
    detail::require_finite_observation(y);
    const auto& s = f.samples();
    const double n = static_cast<double>(s.size());
    double deviation = 0.0;
    for (double z : s) deviation += std::abs(z - y);
    double spread = 0.0;
    for (double a : s) {
        for (double b : s) spread += std::abs(a - b);
    }
    return deviation / n - 0.5 * spread / (n * n);
}

/// Exact CRPS in one pass over the sorted samples:
///   (2/n^2) * sum_i (z_(i) - y) * (n * 1{y < z_(i)} - i + 1/2).
/// The indicator is strict; agreement with crps_naive on tied inputs is
/// covered by tests.
inline double crps_fast(const Ecdf& f, double y) {
    detail::require_finite_observation(y);
    const auto& s = f.samples();
    const double n = static_cast<double>(s.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double indicator = (y < s[i]) ? n : 0.0;
        acc += (s[i] - y) * (indicator - static_cast<double>(i + 1) + 0.5);
    }
    return 2.0 * acc / (n * n);
}

/// S(F, y) for one observation. The DSS variance is floored at dss_floor
/// before the log; use the two-argument overload when no tree-level
/// reference variance exists.
inline double score(const ScoringRule& rule, const Ecdf& f, double y, double dss_floor) {
    rule.validate();
    detail::require_finite_observation(y);
    switch (rule.kind) {
        case ScoreKind::Sse: {
            const double d = f.mean() - y;
            return d * d;
        }
        case ScoreKind::Crps:
            return crps_fast(f, y);
        case ScoreKind::Dss: {
            const double v = std::max(f.variance(), dss_floor);
            const double d = f.mean() - y;
            return d * d / v + std::log(v);
        }
        case ScoreKind::Is1: {
            const double q = f.quantile(1.0 - rule.alpha);
            return y > q ? q + (y - q) / rule.alpha : q;
        }
        case ScoreKind::Is2: {
            const double lo = f.quantile(rule.alpha / 2.0);
            const double hi = f.quantile(1.0 - rule.alpha / 2.0);
            double s = hi - lo;
            if (y < lo) {
                s += 2.0 / rule.alpha * (lo - y);
            } else if (y > hi) {
                s += 2.0 / rule.alpha * (y - hi);
            }
            return s;
        }
    }
    throw std::logic_error("unreachable score kind");
}

inline double score(const ScoringRule& rule, const Ecdf& f, double y) {
    return score(rule, f, y, dss_variance_floor(f.variance()));
}

/// Total and per-point self-score of a node: total = sum_i S(F_hat, y_i)
/// with F_hat the ECDF of the same samples.
struct ScoreSummary {
    double total = 0.0;
    double per_point_mean = 0.0;
    std::size_t n = 0;
};

namespace detail {

/// node_total_score on samples already sorted ascending. Closed forms:
///   SSE  : n * var
///   CRPS : (1/n) * sum_i (2i - 1 - n) * z_(i)    (pairwise-distance identity)
///   DSS  : n * (var/floored_var + log(floored_var))
///   IS1  : n * q_{1-a} + (1/a) * sum_{z > q} (z - q)
///   IS2  : n * (q_hi - q_lo) + (2/a) * (sum below q_lo + sum above q_hi)
inline ScoreSummary node_total_score_sorted(const ScoringRule& rule,
                                            std::span<const double> sorted,
                                            double dss_floor) {
    rule.validate();
    const std::size_t n = sorted.size();
    const double nd = static_cast<double>(n);
    double total = 0.0;
    switch (rule.kind) {
        case ScoreKind::Sse:
            total = nd * population_variance(sorted);
            break;
        case ScoreKind::Crps: {
            for (std::size_t i = 0; i < n; ++i) {
                total += (2.0 * static_cast<double>(i + 1) - 1.0 - nd) * sorted[i];
            }
            total /= nd;
            break;
        }
        case ScoreKind::Dss: {
            const double vt = population_variance(sorted);
            const double v = std::max(vt, dss_floor);
            total = nd * (vt / v + std::log(v));
            break;
        }
        case ScoreKind::Is1: {
            const double q = sorted_quantile(sorted, 1.0 - rule.alpha);
            double excess = 0.0;
            for (auto it = std::upper_bound(sorted.begin(), sorted.end(), q);
                 it != sorted.end(); ++it) {
                excess += *it - q;
            }
            total = nd * q + excess / rule.alpha;
            break;
        }
        case ScoreKind::Is2: {
            const double lo = sorted_quantile(sorted, rule.alpha / 2.0);
            const double hi = sorted_quantile(sorted, 1.0 - rule.alpha / 2.0);
            double outside = 0.0;
            for (auto it = sorted.begin();
                 it != std::lower_bound(sorted.begin(), sorted.end(), lo); ++it) {
                outside += lo - *it;
            }
            for (auto it = std::upper_bound(sorted.begin(), sorted.end(), hi);
                 it != sorted.end(); ++it) {
                outside += *it - hi;
            }
            total = nd * (hi - lo) + 2.0 / rule.alpha * outside;
            break;
        }
    }
    return ScoreSummary{total, total / nd, n};
}

}  // namespace detail

/// Total self-score sum_i S(F_hat, y_i) of one node's samples, where
/// F_hat is built from those same samples. For DSS a zero sample
/// variance is floored rather than rejected.
inline ScoreSummary node_total_score(const ScoringRule& rule, std::span<const double> samples,
                                     double dss_floor) {
    detail::require_samples(samples);
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    return detail::node_total_score_sorted(rule, sorted, dss_floor);
}

inline ScoreSummary node_total_score(const ScoringRule& rule, std::span<const double> samples) {
    detail::require_samples(samples);
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    return detail::node_total_score_sorted(
        rule, sorted, dss_variance_floor(detail::population_variance(sorted)));
}

/// Minimum node size guaranteeing an epsilon-accurate ECDF with
/// confidence 1 - alpha, by inverting the Dvoretzky-Kiefer-Wolfowitz
/// bound: ceil((ln 2 - ln alpha) / (2 eps^2)).
inline std::size_t dkw_min_node_size(double epsilon, double alpha) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::invalid_argument("dkw epsilon must lie in (0, 1)");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("dkw alpha must lie in (0, 1)");
    }
    const double bound = (std::log(2.0) - std::log(alpha)) / (2.0 * epsilon * epsilon);
    return static_cast<std::size_t>(std::ceil(bound));
}

}  // namespace predtree
