#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "predtree/dataset.hpp"
#include "predtree/ecdf.hpp"
#include "predtree/scoring.hpp"
#include "predtree/split.hpp"

namespace predtree {

/// Tree-growth parameters. `seed` is reserved for stochastic
/// tie-resolution and unused by the default deterministic build.
struct TreeConfig {
    ScoringRule rule;
    std::size_t max_depth = 4;             // D
    std::size_t min_node_size = 50;        // N
    double quantile_step = 0.05;           // candidate grid step
    double kappa = 0.0;                    // pruning threshold in [0, 1]
    std::size_t discrete_unique_cutoff = 10;
    std::uint64_t seed = 0;

    void validate() const {
        rule.validate();
        if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
        if (min_node_size < 1) throw std::invalid_argument("min_node_size must be >= 1");
        if (!(quantile_step > 0.0 && quantile_step <= 0.5)) {
            throw std::invalid_argument("quantile_step must lie in (0, 0.5]");
        }
        if (!(kappa >= 0.0 && kappa <= 1.0)) {
            throw std::invalid_argument("kappa must lie in [0, 1]");
        }
        if (discrete_unique_cutoff < 1) {
            throw std::invalid_argument("discrete_unique_cutoff must be >= 1");
        }
    }
};

struct InternalNode {
    SplitRule split;
    double delta = 0.0;  // score reduction achieved by this split
    std::size_t n = 0;   // training points that reached the node
};

struct LeafNode {
    Ecdf ecdf;
};

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
};

/// Fitted binary tree. Nodes are keyed by the breadth-first index t with
/// children 2t+1 (left) and 2t+2 (right); internal nodes carry split
/// rules, leaves carry the ECDF of their training responses. Immutable
/// and safe to share across threads.
class PredictiveTree {
public:
    using NodeId = std::uint64_t;
    using Node = std::variant<InternalNode, LeafNode>;

    PredictiveTree(std::map<NodeId, Node> nodes, TreeConfig config,
                   std::vector<ColumnSchema> schema, std::string response_name,
                   double root_delta, std::size_t root_n)
        : nodes_(std::move(nodes)),
          config_(std::move(config)),
          schema_(std::move(schema)),
          response_name_(std::move(response_name)),
          root_delta_(root_delta),
          root_n_(root_n) {
        validate_structure();
    }

    const std::map<NodeId, Node>& nodes() const noexcept { return nodes_; }
    const TreeConfig& config() const noexcept { return config_; }
    const std::vector<ColumnSchema>& predictor_schema() const noexcept { return schema_; }
    const std::string& response_name() const noexcept { return response_name_; }
    double root_delta() const noexcept { return root_delta_; }
    std::size_t root_n() const noexcept { return root_n_; }

    const Node& node(NodeId id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw std::out_of_range("no node with id " + std::to_string(id));
        return it->second;
    }

    bool is_leaf(NodeId id) const { return std::holds_alternative<LeafNode>(node(id)); }

    const Ecdf& leaf_ecdf(NodeId id) const { return std::get<LeafNode>(node(id)).ecdf; }

    static std::size_t depth_of(NodeId id) {
        return static_cast<std::size_t>(std::bit_width(id + 1) - 1);
    }

private:
    void validate_structure() const {
        if (nodes_.find(0) == nodes_.end()) throw std::invalid_argument("tree has no root node");
        for (const auto& [id, node] : nodes_) {
            const bool internal = std::holds_alternative<InternalNode>(node);
            const bool has_left = nodes_.count(2 * id + 1) > 0;
            const bool has_right = nodes_.count(2 * id + 2) > 0;
            if (internal && !(has_left && has_right)) {
                throw std::invalid_argument("internal node " + std::to_string(id) +
                                            " is missing a child");
            }
            if (!internal && (has_left || has_right)) {
                throw std::invalid_argument("leaf node " + std::to_string(id) + " has children");
            }
            if (internal) {
                const auto& split = std::get<InternalNode>(node).split;
                if (split.feature >= schema_.size()) {
                    throw std::invalid_argument("split feature index out of schema range");
                }
            }
        }
    }

    std::map<NodeId, Node> nodes_;
    TreeConfig config_;
    std::vector<ColumnSchema> schema_;
    std::string response_name_;
    double root_delta_ = 0.0;
    std::size_t root_n_ = 0;
};

/// Pruning acceptance: the split at a node is kept iff its point-average
/// score reduction exceeds kappa times the root's point-average
/// reduction, i.e. delta/n_t > kappa * delta_0/n.
inline bool kappa_accepts(double delta, std::size_t node_n, double root_delta,
                          std::size_t root_n, double kappa) {
    return delta / static_cast<double>(node_n) >
           kappa * (root_delta / static_cast<double>(root_n));
}

struct SplitSearchResult {
    SplitRule rule;
    double objective = 0.0;
};

/// Minimizing admissible split over all candidates of all features.
/// Candidates that would leave a child empty are discarded; only the
/// parent's size is checked against min_node_size, so children smaller
/// than N can exist and simply stop growing. Ties resolve to the
/// earliest candidate in the deterministic enumeration order (smallest
/// feature index, then smallest threshold or lexicographically smallest
/// left category set).
inline std::optional<SplitSearchResult> best_split(const Dataset& ds,
                                                   std::span<const std::size_t> rows,
                                                   const TreeConfig& config, double dss_floor) {
    const auto& y = ds.response();
    std::optional<SplitSearchResult> best;
    std::vector<double> left_y, right_y;
    for (std::size_t k = 0; k < ds.n_predictors(); ++k) {
        const Column& column = ds.predictor(k);
        const auto candidates =
            candidate_splits(ds, rows, k, config.quantile_step, config.discrete_unique_cutoff);
        for (const auto& candidate : candidates) {
            left_y.clear();
            right_y.clear();
            for (auto r : rows) {
                (routes_left(candidate, column, r) ? left_y : right_y).push_back(y[r]);
            }
            if (left_y.empty() || right_y.empty()) continue;
            std::sort(left_y.begin(), left_y.end());
            std::sort(right_y.begin(), right_y.end());
            const double objective =
                detail::node_total_score_sorted(config.rule, left_y, dss_floor).total +
                detail::node_total_score_sorted(config.rule, right_y, dss_floor).total;
            if (!best || objective < best->objective) {
                best = SplitSearchResult{candidate, objective};
            }
        }
    }
    return best;
}

namespace detail {

/// Breadth-first growth. A node becomes a leaf when the depth limit is
/// reached, it holds at most min_node_size points, no admissible split
/// exists, or the split is rejected (zero gain, or the kappa rule when
/// apply_kappa is set).
inline PredictiveTree grow(const Dataset& ds, const TreeConfig& config, bool apply_kappa) {
    config.validate();
    const auto& y = ds.response();
    const std::size_t n = ds.n_rows();
    const double dss_floor = dss_variance_floor(population_variance(y));

    std::map<PredictiveTree::NodeId, PredictiveTree::Node> nodes;
    double root_delta = 0.0;

    struct Task {
        PredictiveTree::NodeId id;
        std::vector<std::size_t> rows;
        std::size_t depth;
    };
    std::deque<Task> frontier;
    {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        frontier.push_back(Task{0, std::move(all), 0});
    }

    while (!frontier.empty()) {
        Task task = std::move(frontier.front());
        frontier.pop_front();

        std::vector<double> node_y;
        node_y.reserve(task.rows.size());
        for (auto r : task.rows) node_y.push_back(y[r]);

        auto make_leaf = [&] {
            nodes.emplace(task.id, LeafNode{Ecdf(std::move(node_y))});
        };

        if (task.depth >= config.max_depth || task.rows.size() <= config.min_node_size) {
            make_leaf();
            continue;
        }
        auto best = best_split(ds, task.rows, config, dss_floor);
        if (!best) {
            make_leaf();
            continue;
        }
        std::vector<double> sorted_y(node_y);
        std::sort(sorted_y.begin(), sorted_y.end());
        const double total =
            node_total_score_sorted(config.rule, sorted_y, dss_floor).total;
        const double delta = total - best->objective;
        if (task.id == 0) root_delta = delta;

        bool accept = delta > 0.0;
        if (accept && apply_kappa) {
            accept = kappa_accepts(delta, task.rows.size(), root_delta, n, config.kappa);
        }
        if (!accept) {
            make_leaf();
            continue;
        }

        const Column& column = ds.predictor(best->rule.feature);
        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : task.rows) {
            (routes_left(best->rule, column, r) ? left_rows : right_rows).push_back(r);
        }
        nodes.emplace(task.id, InternalNode{best->rule, delta, task.rows.size()});
        frontier.push_back(Task{2 * task.id + 1, std::move(left_rows), task.depth + 1});
        frontier.push_back(Task{2 * task.id + 2, std::move(right_rows), task.depth + 1});
    }

    std::vector<ColumnSchema> schema;
    schema.reserve(ds.n_predictors());
    for (const auto& col : ds.predictors()) schema.push_back(ColumnSchema{col.name, col.kind});
    return PredictiveTree(std::move(nodes), config, std::move(schema), ds.response_name(),
                          root_delta, n);
}

}  // namespace detail

/// Fit a tree on the dataset with kappa pre-pruning.
inline PredictiveTree fit(const Dataset& ds, const TreeConfig& config) {
    return detail::grow(ds, config, true);
}

/// Fit ignoring the kappa acceptance rule (zero-gain splits are still
/// rejected). Equivalent to kappa = 0 by construction; kept as an
/// independent growth path for verification.
inline PredictiveTree fit_unpruned(const Dataset& ds, const TreeConfig& config) {
    return detail::grow(ds, config, false);
}

/// Maps a tree's feature indices onto a dataset's columns by name and
/// checks column kinds; built once per dataset and reused across rows.
class SchemaBinding {
public:
    SchemaBinding(const PredictiveTree& tree, const Dataset& ds) {
        const auto& schema = tree.predictor_schema();
        columns_.reserve(schema.size());
        for (const auto& col : schema) {
            const std::size_t idx = ds.predictor_index(col.name);
            if (idx == Dataset::npos) {
                throw std::runtime_error("schema mismatch: missing column '" + col.name + "'");
            }
            if (ds.predictor(idx).kind != col.kind) {
                throw std::runtime_error("schema mismatch: column '" + col.name + "' must be " +
                                         to_string(col.kind));
            }
            columns_.push_back(idx);
        }
    }

    std::size_t column(std::size_t feature) const { return columns_.at(feature); }

private:
    std::vector<std::size_t> columns_;
};

/// Deterministic descent to the leaf containing the row. Thresholds send
/// x^k <= s left; unseen categories route right; missing values are an
/// error.
inline PredictiveTree::NodeId route(const PredictiveTree& tree, const SchemaBinding& binding,
                                    const Dataset& ds, std::size_t row) {
    PredictiveTree::NodeId id = 0;
    while (!tree.is_leaf(id)) {
        const auto& internal = std::get<InternalNode>(tree.node(id));
        const Column& column = ds.predictor(binding.column(internal.split.feature));
        id = routes_left(internal.split, column, row) ? 2 * id + 1 : 2 * id + 2;
    }
    return id;
}

inline PredictiveTree::NodeId route(const PredictiveTree& tree, const Dataset& ds,
                                    std::size_t row) {
    return route(tree, SchemaBinding(tree, ds), ds, row);
}

/// Leaf ECDF for the row (shared, immutable).
inline const Ecdf& predict_distribution(const PredictiveTree& tree, const Dataset& ds,
                                        std::size_t row) {
    return tree.leaf_ecdf(route(tree, ds, row));
}

struct PointSummary {
    enum class Kind { Mean, Quantile };
    Kind kind = Kind::Mean;
    double level = 0.5;

    static PointSummary mean() { return {Kind::Mean, 0.0}; }
    static PointSummary quantile(double p) { return {Kind::Quantile, p}; }
};

inline double predict_point(const PredictiveTree& tree, const Dataset& ds, std::size_t row,
                            const PointSummary& summary) {
    const Ecdf& f = predict_distribution(tree, ds, row);
    return summary.kind == PointSummary::Kind::Mean ? f.mean() : f.quantile(summary.level);
}

/// Sum of per-point scores of the rows under the tree's predictive
/// distributions. The empty subset sums to zero.
inline double evaluate(const PredictiveTree& tree, const Dataset& ds, const ScoringRule& rule,
                       std::span<const std::size_t> rows) {
    const auto& y = ds.response();
    if (rows.empty()) return 0.0;
    SchemaBinding binding(tree, ds);
    double total = 0.0;
    for (auto r : rows) {
        const Ecdf& f = tree.leaf_ecdf(route(tree, binding, ds, r));
        total += score(rule, f, y[r]);
    }
    return total;
}

inline double evaluate(const PredictiveTree& tree, const Dataset& ds, const ScoringRule& rule) {
    std::vector<std::size_t> rows(ds.n_rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return evaluate(tree, ds, rule, rows);
}

struct TreeStats {
    std::size_t depth = 0;  // 0 for a single-leaf tree
    std::size_t leaf_count = 0;
    std::vector<std::pair<PredictiveTree::NodeId, SplitRule>> splits;
    std::map<PredictiveTree::NodeId, double> deltas;
};

inline TreeStats tree_stats(const PredictiveTree& tree) {
    TreeStats stats;
    for (const auto& [id, node] : tree.nodes()) {
        if (std::holds_alternative<LeafNode>(node)) {
            ++stats.leaf_count;
            stats.depth = std::max(stats.depth, PredictiveTree::depth_of(id));
        } else {
            const auto& internal = std::get<InternalNode>(node);
            stats.splits.emplace_back(id, internal.split);
            stats.deltas.emplace(id, internal.delta);
        }
    }
    return stats;
}

}  // namespace predtree
