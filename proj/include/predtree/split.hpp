#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "predtree/dataset.hpp"
#include "predtree/scoring.hpp"

namespace predtree {

struct ThresholdSplit {
    double value;
};

/// Binary partition of a categorical column; rows whose category is in
/// left_categories route left. Names are kept sorted.
struct CategorySplit {
    std::vector<std::string> left_categories;

    bool sends_left(const std::string& category) const {
        return std::binary_search(left_categories.begin(), left_categories.end(), category);
    }
};

/// (k, s) split rule: rows go left iff x^k <= s for thresholds, or iff
/// the category is in the left set for categorical columns.
struct SplitRule {
    std::size_t feature = 0;
    std::variant<ThresholdSplit, CategorySplit> rule;

    bool is_threshold() const { return std::holds_alternative<ThresholdSplit>(rule); }
    double threshold() const { return std::get<ThresholdSplit>(rule).value; }
    const CategorySplit& category_split() const { return std::get<CategorySplit>(rule); }
};

/// Left routing for one row of a column. Unseen categories route right.
inline bool routes_left(const SplitRule& split, const Column& column, std::size_t row) {
    if (split.is_threshold()) {
        if (column.kind != ColumnKind::Numeric) {
            throw std::runtime_error("threshold split on non-numeric column '" + column.name + "'");
        }
        const double v = column.numeric[row];
        if (!std::isfinite(v)) {
            throw std::runtime_error("missing value in column '" + column.name + "'");
        }
        return v <= split.threshold();
    }
    if (column.kind != ColumnKind::Categorical) {
        throw std::runtime_error("category split on non-categorical column '" + column.name + "'");
    }
    return split.category_split().sends_left(column.category_of_row(row));
}

namespace detail {

inline std::vector<SplitRule> numeric_candidates(const Column& column,
                                                 std::span<const std::size_t> rows,
                                                 std::size_t feature, double quantile_step,
                                                 std::size_t cutoff) {
    std::vector<double> values;
    values.reserve(rows.size());
    for (auto r : rows) values.push_back(column.numeric[r]);
    std::sort(values.begin(), values.end());

    std::vector<double> uniques(values);
    uniques.erase(std::unique(uniques.begin(), uniques.end()), uniques.end());

    std::vector<double> thresholds;
    if (uniques.size() <= cutoff) {
        // Low-cardinality column: every unique value except the maximum.
        thresholds.assign(uniques.begin(), uniques.end() - 1);
    } else {
        // Probabilities j * step strictly below 1. The product is nudged a
        // couple of ulps downward so that grid points landing exactly on a
        // sample-rank boundary (e.g. 19 * 0.05 at n = 1000) select the
        // mathematically intended inf-quantile despite rounding.
        for (int j = 1;; ++j) {
            const double raw = static_cast<double>(j) * quantile_step;
            if (!(raw < 1.0 - 4e-16)) break;
            thresholds.push_back(sorted_quantile(values, raw * (1.0 - 4e-16)));
        }
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    }

    std::vector<SplitRule> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) out.push_back(SplitRule{feature, ThresholdSplit{t}});
    return out;
}

inline std::vector<SplitRule> categorical_candidates(const Column& column,
                                                     std::span<const std::size_t> rows,
                                                     std::size_t feature, std::size_t cutoff) {
    std::vector<std::int32_t> codes;
    codes.reserve(rows.size());
    for (auto r : rows) codes.push_back(column.codes[r]);
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());

    const std::size_t m = codes.size();
    if (m > cutoff) throw std::runtime_error("categorical cardinality exceeds cutoff");

    std::vector<SplitRule> out;
    if (m < 2) return out;

    // All 2^(m-1) - 1 unordered binary partitions, represented once each:
    // the left set is the minority side, ties resolved toward the side
    // containing the smallest observed category.
    for (std::uint32_t mask = 1; mask + 1 < (1u << m); ++mask) {
        const auto size = static_cast<std::size_t>(std::popcount(mask));
        const bool canonical =
            2 * size < m || (2 * size == m && (mask & 1u) != 0);
        if (!canonical) continue;
        CategorySplit split;
        for (std::size_t i = 0; i < m; ++i) {
            if (mask & (1u << i)) {
                split.left_categories.push_back(
                    column.categories[static_cast<std::size_t>(codes[i])]);
            }
        }
        out.push_back(SplitRule{feature, std::move(split)});
    }
    std::sort(out.begin(), out.end(), [](const SplitRule& a, const SplitRule& b) {
        return a.category_split().left_categories < b.category_split().left_categories;
    });
    return out;
}

}  // namespace detail

/// Candidate splits for one feature at a node, in deterministic order
/// (ascending thresholds; lexicographically ascending left category
/// sets). Numeric columns with more than `cutoff` unique values use the
/// quantile grid {step, 2*step, ...} strictly below 1, deduplicated;
/// low-cardinality numeric columns use every unique value except the
/// maximum; categorical columns enumerate all binary partitions.
inline std::vector<SplitRule> candidate_splits(const Dataset& ds,
                                               std::span<const std::size_t> rows,
                                               std::size_t feature, double quantile_step,
                                               std::size_t cutoff) {
    if (rows.empty()) throw std::invalid_argument("candidate_splits: empty node");
    if (!(quantile_step > 0.0 && quantile_step <= 0.5)) {
        throw std::invalid_argument("quantile step must lie in (0, 0.5]");
    }
    const Column& column = ds.predictor(feature);
    if (column.kind == ColumnKind::Numeric) {
        return detail::numeric_candidates(column, rows, feature, quantile_step, cutoff);
    }
    return detail::categorical_candidates(column, rows, feature, cutoff);
}

/// Split objective C = total(left) + total(right) under the given rule.
inline double split_objective(const ScoringRule& rule, std::span<const double> left,
                              std::span<const double> right, double dss_floor) {
    if (left.empty() || right.empty()) {
        throw std::invalid_argument("split objective requires non-empty children");
    }
    return node_total_score(rule, left, dss_floor).total +
           node_total_score(rule, right, dss_floor).total;
}

inline double split_objective(const ScoringRule& rule, std::span<const double> left,
                              std::span<const double> right) {
    if (left.empty() || right.empty()) {
        throw std::invalid_argument("split objective requires non-empty children");
    }
    return node_total_score(rule, left).total + node_total_score(rule, right).total;
}

}  // namespace predtree
