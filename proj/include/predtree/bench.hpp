#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <variant>
#include <vector>

#include <json.hpp>

#include "predtree/csv.hpp"
#include "predtree/dataset.hpp"
#include "predtree/model_io.hpp"
#include "predtree/rng.hpp"
#include "predtree/stats.hpp"
#include "predtree/synth.hpp"
#include "predtree/tree.hpp"

namespace predtree {

/// Fresh synthetic training draws per replicate, one shared test set.
struct SyntheticSource {
    PiecewiseSpec spec;
    std::vector<std::size_t> train_sizes;
    std::size_t test_size = 1000;
};

/// Resamples of a CSV. By default each replicate trains on a bootstrap
/// resample and tests on the out-of-bag rows; with train_fraction set,
/// each replicate instead trains on a random without-replacement subset
/// of that fraction and tests on the complement.
struct BootstrapSource {
    std::string csv_path;
    std::string response = "y";
    std::optional<double> train_fraction;
};

struct ExperimentConfig {
    std::vector<ScoringRule> build_scores;
    std::vector<ScoringRule> eval_scores;
    std::vector<double> kappas;
    std::size_t replicates = 1;
    std::variant<SyntheticSource, BootstrapSource> source;
    std::size_t max_depth = 4;
    std::size_t min_node_size = 50;
    double quantile_step = 0.05;
    std::size_t discrete_unique_cutoff = 10;
    std::uint64_t base_seed = 0;
    std::size_t threads = 1;

    void validate() const {
        if (build_scores.empty()) throw std::invalid_argument("build_scores is empty");
        if (eval_scores.empty()) throw std::invalid_argument("eval_scores is empty");
        if (kappas.empty()) throw std::invalid_argument("kappas is empty");
        for (double k : kappas) {
            if (!(k >= 0.0 && k <= 1.0)) throw std::invalid_argument("kappa outside [0, 1]");
        }
        if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
        for (const auto& s : build_scores) s.validate();
        for (const auto& s : eval_scores) s.validate();
        if (const auto* syn = std::get_if<SyntheticSource>(&source)) {
            syn->spec.validate();
            if (syn->train_sizes.empty()) throw std::invalid_argument("train_sizes is empty");
            if (syn->test_size < 1) throw std::invalid_argument("test_size must be >= 1");
        } else {
            const auto& boot = std::get<BootstrapSource>(source);
            if (boot.train_fraction && !(*boot.train_fraction > 0.0 && *boot.train_fraction < 1.0)) {
                throw std::invalid_argument("train_fraction must lie in (0, 1)");
            }
        }
        TreeConfig probe{build_scores.front(), max_depth,
                         min_node_size,        quantile_step,
                         kappas.front(),       discrete_unique_cutoff};
        probe.validate();
    }

    TreeConfig tree_config(const ScoringRule& rule, double kappa) const {
        return TreeConfig{rule,  max_depth, min_node_size, quantile_step,
                          kappa, discrete_unique_cutoff};
    }
};

/// One (replicate, build, kappa, eval) cell of the experiment grid.
struct ResultRecord {
    std::size_t train_size = 0;
    std::size_t replicate = 0;  // b, 1-based
    std::string build;
    std::string eval;
    double kappa = 0.0;
    double in_sample = 0.0;
    double out_sample = 0.0;
};

class ExperimentResults {
public:
    ExperimentResults() = default;
    explicit ExperimentResults(std::vector<ResultRecord> records,
                               std::string config_hash = "", std::uint64_t base_seed = 0,
                               std::uint64_t test_seed = 0)
        : records_(std::move(records)),
          config_hash_(std::move(config_hash)),
          base_seed_(base_seed),
          test_seed_(test_seed) {
        for (std::size_t i = 0; i < records_.size(); ++i) index_.emplace(key_of(records_[i]), i);
    }

    const std::vector<ResultRecord>& records() const noexcept { return records_; }
    const std::string& config_hash() const noexcept { return config_hash_; }
    std::uint64_t base_seed() const noexcept { return base_seed_; }
    std::uint64_t test_seed() const noexcept { return test_seed_; }

    const ResultRecord& at(std::size_t train_size, std::size_t replicate,
                           const std::string& build, double kappa,
                           const std::string& eval) const {
        auto it = index_.find(std::make_tuple(train_size, replicate, build, kappa, eval));
        if (it == index_.end()) {
            std::ostringstream msg;
            msg << "missing result cell (n=" << train_size << ", b=" << replicate
                << ", build=" << build << ", kappa=" << kappa << ", eval=" << eval << ")";
            throw std::out_of_range(msg.str());
        }
        return records_[it->second];
    }

    std::vector<std::size_t> train_sizes() const {
        std::set<std::size_t> sizes;
        for (const auto& r : records_) sizes.insert(r.train_size);
        return {sizes.begin(), sizes.end()};
    }

    std::vector<std::size_t> replicates() const {
        std::set<std::size_t> reps;
        for (const auto& r : records_) reps.insert(r.replicate);
        return {reps.begin(), reps.end()};
    }

private:
    using Key = std::tuple<std::size_t, std::size_t, std::string, double, std::string>;
    static Key key_of(const ResultRecord& r) {
        return std::make_tuple(r.train_size, r.replicate, r.build, r.kappa, r.eval);
    }

    std::vector<ResultRecord> records_;
    std::map<Key, std::size_t> index_;
    std::string config_hash_;
    std::uint64_t base_seed_ = 0;
    std::uint64_t test_seed_ = 0;
};

struct FittedModel {
    std::size_t train_size = 0;
    std::size_t replicate = 0;
    std::string build;
    double kappa = 0.0;
    PredictiveTree tree;
};

struct ExperimentRun {
    ExperimentResults results;
    std::vector<FittedModel> models;  // populated only when requested
};

namespace detail {

inline void parallel_tasks(std::size_t count, std::size_t threads,
                           const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(threads, count);
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

inline std::string config_hash(const ExperimentConfig& config) {
    return detail::hex64(detail::fnv1a64(experiment_config_to_json(config).dump()));
}

/// Run the full experiment grid. Within a replicate every (build, kappa)
/// cell sees byte-identical training and test data (common random
/// numbers): replicate b draws from seed base_seed + b, the shared
/// synthetic test set from base_seed itself. Cells run in parallel up to
/// config.threads; output is identical at any thread count.
inline ExperimentRun run_experiment_full(const ExperimentConfig& config, bool keep_models) {
    config.validate();

    const auto* synthetic = std::get_if<SyntheticSource>(&config.source);
    std::optional<Dataset> csv_data;
    std::optional<Dataset> test_data;
    std::vector<std::size_t> train_sizes;
    if (synthetic) {
        train_sizes = synthetic->train_sizes;
        test_data = generate(synthetic->spec, synthetic->test_size, config.base_seed);
    } else {
        const auto& bootstrap = std::get<BootstrapSource>(config.source);
        csv_data = load_csv(bootstrap.csv_path, bootstrap.response);
        train_sizes = {csv_data->n_rows()};
    }

    struct Task {
        std::size_t size_idx, replicate, build_idx, kappa_idx;
    };
    std::vector<Task> tasks;
    for (std::size_t si = 0; si < train_sizes.size(); ++si) {
        for (std::size_t b = 1; b <= config.replicates; ++b) {
            for (std::size_t bi = 0; bi < config.build_scores.size(); ++bi) {
                for (std::size_t ki = 0; ki < config.kappas.size(); ++ki) {
                    tasks.push_back(Task{si, b, bi, ki});
                }
            }
        }
    }

    struct CellOut {
        std::vector<double> in_sample, out_sample;  // per eval score
        std::optional<PredictiveTree> model;
    };
    std::vector<CellOut> cells(tasks.size());
    std::vector<std::string> errors(tasks.size());

    auto run_task = [&](std::size_t ti) {
        const Task& task = tasks[ti];
        const auto& build = config.build_scores[task.build_idx];
        const double kappa = config.kappas[task.kappa_idx];
        try {
            std::optional<Dataset> train;
            std::vector<std::size_t> oob_rows;
            if (synthetic) {
                train = generate(synthetic->spec, train_sizes[task.size_idx],
                                 config.base_seed + task.replicate);
            } else {
                const auto& bootstrap = std::get<BootstrapSource>(config.source);
                const std::size_t n = csv_data->n_rows();
                Rng rng(config.base_seed + task.replicate);
                std::vector<bool> in_train(n, false);
                if (bootstrap.train_fraction) {
                    // Holdout: a without-replacement subset of the given
                    // fraction trains, the complement tests.
                    if (n < 2) throw std::runtime_error("holdout split needs at least 2 rows");
                    std::vector<std::size_t> order(n);
                    for (std::size_t i = 0; i < n; ++i) order[i] = i;
                    for (std::size_t i = n - 1; i > 0; --i) {
                        std::swap(order[i], order[rng.below(i + 1)]);
                    }
                    auto k = static_cast<std::size_t>(
                        std::ceil(*bootstrap.train_fraction * static_cast<double>(n)));
                    k = std::min(std::max<std::size_t>(k, 1), n - 1);
                    order.resize(k);
                    train = csv_data->select_rows(order);
                    for (auto r : order) in_train[r] = true;
                } else {
                    std::vector<std::size_t> picks(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        picks[i] = static_cast<std::size_t>(rng.below(n));
                        in_train[picks[i]] = true;
                    }
                    train = csv_data->select_rows(picks);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    if (!in_train[i]) oob_rows.push_back(i);
                }
            }
            const PredictiveTree tree = fit(*train, config.tree_config(build, kappa));
            CellOut& cell = cells[ti];
            cell.in_sample.reserve(config.eval_scores.size());
            cell.out_sample.reserve(config.eval_scores.size());
            for (const auto& eval : config.eval_scores) {
                cell.in_sample.push_back(evaluate(tree, *train, eval));
                if (synthetic) {
                    cell.out_sample.push_back(evaluate(tree, *test_data, eval));
                } else {
                    cell.out_sample.push_back(evaluate(tree, *csv_data, eval, oob_rows));
                }
            }
            if (keep_models) cell.model = tree;
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "replicate " << task.replicate << " build=" << build.name()
                << " kappa=" << kappa << ": " << e.what();
            errors[ti] = msg.str();
        }
    };
    detail::parallel_tasks(tasks.size(), config.threads, run_task);

    for (const auto& err : errors) {
        if (!err.empty()) throw std::runtime_error(err);
    }

    std::vector<ResultRecord> records;
    records.reserve(tasks.size() * config.eval_scores.size());
    std::vector<FittedModel> models;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const Task& task = tasks[ti];
        for (std::size_t ei = 0; ei < config.eval_scores.size(); ++ei) {
            ResultRecord rec;
            rec.train_size = train_sizes[task.size_idx];
            rec.replicate = task.replicate;
            rec.build = config.build_scores[task.build_idx].name();
            rec.eval = config.eval_scores[ei].name();
            rec.kappa = config.kappas[task.kappa_idx];
            rec.in_sample = cells[ti].in_sample[ei];
            rec.out_sample = cells[ti].out_sample[ei];
            if (!std::isfinite(rec.in_sample) || !std::isfinite(rec.out_sample)) {
                throw std::runtime_error("non-finite score in experiment results");
            }
            records.push_back(std::move(rec));
        }
        if (keep_models) {
            models.push_back(FittedModel{train_sizes[task.size_idx], task.replicate,
                                         config.build_scores[task.build_idx].name(),
                                         config.kappas[task.kappa_idx],
                                         std::move(*cells[ti].model)});
        }
    }
    ExperimentRun run{ExperimentResults(std::move(records), config_hash(config),
                                        config.base_seed, config.base_seed),
                      std::move(models)};
    return run;
}

inline ExperimentResults run_experiment(const ExperimentConfig& config) {
    return run_experiment_full(config, false).results;
}

/// Out-of-sample paired differences OD_b = O_b^eval(eval, kappa) -
/// O_b^eval(build, kappa); negative values mean the eval-built tree wins
/// under its own score.
inline std::vector<double> paired_differences(const ExperimentResults& results,
                                              const std::string& eval, const std::string& build,
                                              double kappa, std::size_t train_size) {
    std::vector<double> diffs;
    for (std::size_t b : results.replicates()) {
        const double self = results.at(train_size, b, eval, kappa, eval).out_sample;
        const double other = results.at(train_size, b, build, kappa, eval).out_sample;
        diffs.push_back(self - other);
    }
    return diffs;
}

struct KappaSelection {
    double kappa_star = 0.0;
    std::vector<std::pair<double, double>> mean_table;  // (kappa, mean out-of-sample)
};

/// kappa* = argmin over the kappa grid of the mean out-of-sample
/// self-score; ties break toward the larger kappa (smaller tree).
inline KappaSelection tune_kappa(const ExperimentResults& results, const std::string& score,
                                 std::size_t train_size) {
    const auto replicates = results.replicates();
    std::set<double> kappas;
    for (const auto& r : results.records()) {
        if (r.train_size == train_size) kappas.insert(r.kappa);
    }
    if (kappas.empty()) throw std::out_of_range("no records for requested train size");
    KappaSelection sel;
    bool first = true;
    double best_mean = 0.0;
    for (double kappa : kappas) {
        double sum = 0.0;
        for (std::size_t b : replicates) {
            sum += results.at(train_size, b, score, kappa, score).out_sample;
        }
        const double mean = sum / static_cast<double>(replicates.size());
        sel.mean_table.emplace_back(kappa, mean);
        if (first || mean <= best_mean) {  // <= ties toward larger kappa
            best_mean = mean;
            sel.kappa_star = kappa;
            first = false;
        }
    }
    return sel;
}

struct OdStarSummary {
    std::vector<double> diffs;  // OD*_b per replicate
    MeanInterval interval;
    double success_probability = 0.0;
    double kappa_star_eval = 0.0;
    double kappa_star_build = 0.0;
};

/// Paired difference of optimally pruned trees, OD*_b = O_b^eval(eval,
/// kappa*(eval)) - O_b^eval(build, kappa*(build)), with a Student-t
/// interval and the fraction of replicates where the eval tree scores no
/// worse.
inline OdStarSummary optimal_paired_differences(const ExperimentResults& results,
                                                const std::string& eval,
                                                const std::string& build,
                                                std::size_t train_size) {
    OdStarSummary summary;
    summary.kappa_star_eval = tune_kappa(results, eval, train_size).kappa_star;
    summary.kappa_star_build = tune_kappa(results, build, train_size).kappa_star;
    std::size_t successes = 0;
    for (std::size_t b : results.replicates()) {
        const double self =
            results.at(train_size, b, eval, summary.kappa_star_eval, eval).out_sample;
        const double other =
            results.at(train_size, b, build, summary.kappa_star_build, eval).out_sample;
        summary.diffs.push_back(self - other);
        if (self <= other) ++successes;
    }
    summary.success_probability =
        static_cast<double>(successes) / static_cast<double>(summary.diffs.size());
    if (summary.diffs.size() >= 2) {
        summary.interval = t_confidence_interval(summary.diffs);
    } else {
        summary.interval = MeanInterval{summary.diffs.front(), summary.diffs.front(),
                                        summary.diffs.front(), 0.95};
    }
    return summary;
}

/// One-sided paired t-test of H0 "the eval-built tree is at least as
/// good as the build-built tree under the eval score"; small p rejects
/// H0, i.e. says the eval tree did worse.
inline TTestResult hypothesis_test(const ExperimentResults& results, const std::string& eval,
                                   const std::string& build, double kappa,
                                   std::size_t train_size) {
    return one_sided_t_test(paired_differences(results, eval, build, kappa, train_size));
}

struct RecoveryReport {
    std::vector<double> true_splits;
    std::vector<double> recovery_rate;  // per true split, fraction of trees
    double mean_incorrect_splits = 0.0;
    std::size_t tree_count = 0;
};

/// Split audit for single-predictor trees: a tree recovers a true split
/// v when any internal threshold lies within [v - margin, v + margin];
/// thresholds near no true split count as incorrect.
inline RecoveryReport split_recovery_audit(std::span<const PredictiveTree> trees,
                                           std::span<const double> true_splits, double margin) {
    if (trees.empty()) throw std::invalid_argument("no trees to audit");
    RecoveryReport report;
    report.true_splits.assign(true_splits.begin(), true_splits.end());
    report.recovery_rate.assign(true_splits.size(), 0.0);
    report.tree_count = trees.size();
    std::size_t total_incorrect = 0;
    for (const auto& tree : trees) {
        if (tree.predictor_schema().size() != 1) {
            throw std::invalid_argument("split recovery audit requires single-predictor trees");
        }
        std::vector<double> thresholds;
        for (const auto& [id, node] : tree.nodes()) {
            if (const auto* internal = std::get_if<InternalNode>(&node)) {
                if (!internal->split.is_threshold()) {
                    throw std::invalid_argument(
                        "split recovery audit requires threshold splits");
                }
                thresholds.push_back(internal->split.threshold());
            }
        }
        for (std::size_t s = 0; s < true_splits.size(); ++s) {
            for (double t : thresholds) {
                if (std::abs(t - true_splits[s]) <= margin) {
                    report.recovery_rate[s] += 1.0;
                    break;
                }
            }
        }
        for (double t : thresholds) {
            bool matched = false;
            for (double v : true_splits) {
                if (std::abs(t - v) <= margin) {
                    matched = true;
                    break;
                }
            }
            if (!matched) ++total_incorrect;
        }
    }
    for (auto& rate : report.recovery_rate) rate /= static_cast<double>(trees.size());
    report.mean_incorrect_splits =
        static_cast<double>(total_incorrect) / static_cast<double>(trees.size());
    return report;
}

struct ScanPoint {
    double split = 0.0;
    double objective = 0.0;
};

struct ScanResult {
    std::vector<ScanPoint> points;
    double argmin = 0.0;
    double min_objective = 0.0;
};

inline std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-12)) + 1;
    grid.reserve(count);
    for (std::size_t j = 0; j < count; ++j) grid.push_back(lo + static_cast<double>(j) * step);
    return grid;
}

/// Split objective swept over a grid of thresholds on the single numeric
/// predictor. Grid points that leave a side empty are skipped.
inline ScanResult criterion_scan(const Dataset& ds, const ScoringRule& rule,
                                 std::span<const double> grid) {
    if (ds.n_predictors() != 1 || ds.predictor(0).kind != ColumnKind::Numeric) {
        throw std::invalid_argument("criterion scan requires a single numeric predictor");
    }
    const auto& x = ds.predictor(0).numeric;
    const auto& y = ds.response();
    ScanResult result;
    std::vector<double> left, right;
    for (double s : grid) {
        left.clear();
        right.clear();
        for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= s ? left : right).push_back(y[i]);
        if (left.empty() || right.empty()) continue;
        const double objective = split_objective(rule, left, right);
        if (result.points.empty() || objective < result.min_objective) {
            result.argmin = s;
            result.min_objective = objective;
        }
        result.points.push_back(ScanPoint{s, objective});
    }
    if (result.points.empty()) {
        throw std::invalid_argument("criterion scan grid produced no admissible split");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Experiment configuration JSON (the bench config file format).
// ---------------------------------------------------------------------------

namespace detail {

inline RegionDist region_dist_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("dist").get<std::string>();
    if (kind == "lognormal") {
        return Lognormal{j.at("meanlog").get<double>(), j.at("sdlog").get<double>()};
    }
    if (kind == "normal") {
        return Gaussian{j.at("mean").get<double>(), j.at("sd").get<double>()};
    }
    if (kind == "exponential") {
        return Exponential{j.at("rate").get<double>()};
    }
    throw std::invalid_argument("unknown region dist '" + kind + "'");
}

inline nlohmann::json region_dist_to_json(const RegionDist& dist) {
    return std::visit(
        [](const auto& d) -> nlohmann::json {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Lognormal>) {
                return {{"dist", "lognormal"}, {"meanlog", d.meanlog}, {"sdlog", d.sdlog}};
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return {{"dist", "normal"}, {"mean", d.mean}, {"sd", d.sd}};
            } else {
                return {{"dist", "exponential"}, {"rate", d.rate}};
            }
        },
        dist);
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    const double alpha = j.value("alpha", 0.2);
    for (const auto& name : j.at("build_scores").get<std::vector<std::string>>()) {
        config.build_scores.push_back(ScoringRule::from_name(name, alpha));
    }
    for (const auto& name : j.at("eval_scores").get<std::vector<std::string>>()) {
        config.eval_scores.push_back(ScoringRule::from_name(name, alpha));
    }
    config.kappas = j.at("kappas").get<std::vector<double>>();
    config.replicates = j.at("replicates").get<std::size_t>();
    const auto& data = j.at("data");
    const std::string mode = data.at("mode").get<std::string>();
    if (mode == "synthetic") {
        SyntheticSource src;
        if (data.contains("preset")) {
            src.spec = PiecewiseSpec::preset(data.at("preset").get<std::string>());
        } else {
            for (const auto& jr : data.at("regions")) {
                src.spec.regions.push_back(RegionSpec{jr.at("lower").get<double>(),
                                                      jr.at("upper").get<double>(),
                                                      detail::region_dist_from_json(jr)});
            }
        }
        src.train_sizes = data.at("train_sizes").get<std::vector<std::size_t>>();
        src.test_size = data.value("test_size", std::size_t{1000});
        config.source = std::move(src);
    } else if (mode == "bootstrap") {
        BootstrapSource src;
        src.csv_path = data.at("csv").get<std::string>();
        src.response = data.value("response", std::string("y"));
        if (data.contains("train_fraction")) {
            src.train_fraction = data.at("train_fraction").get<double>();
        }
        config.source = std::move(src);
    } else {
        throw std::invalid_argument("unknown data mode '" + mode + "'");
    }
    if (j.contains("tree")) {
        const auto& tree = j.at("tree");
        config.max_depth = tree.value("max_depth", std::size_t{4});
        config.min_node_size = tree.value("min_node_size", std::size_t{50});
        config.quantile_step = tree.value("quantile_step", 0.05);
        config.discrete_unique_cutoff = tree.value("discrete_unique_cutoff", std::size_t{10});
    }
    config.base_seed = j.at("base_seed").get<std::uint64_t>();
    config.threads = j.value("threads", std::size_t{1});
    config.validate();
    return config;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["alpha"] = config.build_scores.front().alpha;
    j["build_scores"] = nlohmann::json::array();
    for (const auto& s : config.build_scores) j["build_scores"].push_back(s.name());
    j["eval_scores"] = nlohmann::json::array();
    for (const auto& s : config.eval_scores) j["eval_scores"].push_back(s.name());
    j["kappas"] = config.kappas;
    j["replicates"] = config.replicates;
    if (const auto* syn = std::get_if<SyntheticSource>(&config.source)) {
        nlohmann::json data;
        data["mode"] = "synthetic";
        data["regions"] = nlohmann::json::array();
        for (const auto& r : syn->spec.regions) {
            auto jr = detail::region_dist_to_json(r.dist);
            jr["lower"] = r.lower;
            jr["upper"] = r.upper;
            data["regions"].push_back(std::move(jr));
        }
        data["train_sizes"] = syn->train_sizes;
        data["test_size"] = syn->test_size;
        j["data"] = std::move(data);
    } else {
        const auto& boot = std::get<BootstrapSource>(config.source);
        j["data"] = {{"mode", "bootstrap"}, {"csv", boot.csv_path}, {"response", boot.response}};
        if (boot.train_fraction) j["data"]["train_fraction"] = *boot.train_fraction;
    }
    j["tree"] = {{"max_depth", config.max_depth},
                 {"min_node_size", config.min_node_size},
                 {"quantile_step", config.quantile_step},
                 {"discrete_unique_cutoff", config.discrete_unique_cutoff}};
    j["base_seed"] = config.base_seed;
    return j;
}

// ---------------------------------------------------------------------------
// Results and summary CSV files.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string provenance_line(const ExperimentResults& results) {
    std::ostringstream out;
    out << "# predtree bench config_hash=" << results.config_hash()
        << " base_seed=" << results.base_seed() << " test_seed=" << results.test_seed();
    return out.str();
}

inline std::string format_kappa(double kappa) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", kappa);
    return buf;
}

}  // namespace detail

inline void write_results_csv(const ExperimentResults& results, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    out << detail::provenance_line(results) << '\n';
    out << "replicate,train_size,build,eval,kappa,in_sample,out_sample\n";
    for (const auto& r : results.records()) {
        out << r.replicate << ',' << r.train_size << ',' << r.build << ',' << r.eval << ','
            << format_double(r.kappa) << ',' << format_double(r.in_sample) << ','
            << format_double(r.out_sample) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline ExperimentResults read_results_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    std::string line;
    std::vector<ResultRecord> records;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        std::istringstream fields(line);
        std::string cell;
        ResultRecord rec;
        auto next = [&](const char* what) {
            if (!std::getline(fields, cell, ',')) {
                throw std::runtime_error("results file '" + path + "' line " +
                                         std::to_string(line_no) + ": missing " + what);
            }
            return cell;
        };
        rec.replicate = std::stoull(next("replicate"));
        rec.train_size = std::stoull(next("train_size"));
        rec.build = next("build");
        rec.eval = next("eval");
        rec.kappa = std::stod(next("kappa"));
        rec.in_sample = std::stod(next("in_sample"));
        rec.out_sample = std::stod(next("out_sample"));
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw std::runtime_error("no records in results file '" + path + "'");
    return ExperimentResults(std::move(records));
}

inline void write_scan_csv(const ScanResult& scan, const std::string& path,
                           const std::string& provenance = "") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << '\n';
    out << "split,objective\n";
    for (const auto& p : scan.points) {
        out << format_double(p.split) << ',' << format_double(p.objective) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

/// Scores usable for self-evaluated summaries (present in both the build
/// and eval lists).
inline std::vector<std::string> self_scores(const ExperimentConfig& config) {
    std::vector<std::string> out;
    for (const auto& b : config.build_scores) {
        for (const auto& e : config.eval_scores) {
            if (b.name() == e.name()) {
                out.push_back(b.name());
                break;
            }
        }
    }
    return out;
}

/// Write the full bench output set under out_dir: results.csv plus the
/// kappa_star.csv / odstar.csv / pvalues.csv summaries and, when models
/// are present, one model JSON per fitted tree under models/.
inline void write_bench_outputs(const ExperimentRun& run, const ExperimentConfig& config,
                                const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto& results = run.results;
    write_results_csv(results, (fs::path(out_dir) / "results.csv").string());

    const auto scores = self_scores(config);
    {
        std::ofstream out(fs::path(out_dir) / "kappa_star.csv", std::ios::binary);
        out << detail::provenance_line(results) << '\n';
        out << "train_size,score,kappa,mean_out_sample,is_star\n";
        for (std::size_t n : results.train_sizes()) {
            for (const auto& score : scores) {
                const auto sel = tune_kappa(results, score, n);
                for (const auto& [kappa, mean] : sel.mean_table) {
                    out << n << ',' << score << ',' << format_double(kappa) << ','
                        << format_double(mean) << ',' << (kappa == sel.kappa_star ? 1 : 0)
                        << '\n';
                }
            }
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "odstar.csv", std::ios::binary);
        out << detail::provenance_line(results) << '\n';
        out << "train_size,eval,build,kappa_star_eval,kappa_star_build,mean_diff,"
               "ci_lower,ci_upper,success_probability\n";
        for (std::size_t n : results.train_sizes()) {
            for (const auto& eval : scores) {
                for (const auto& build : scores) {
                    if (eval == build) continue;
                    const auto od = optimal_paired_differences(results, eval, build, n);
                    out << n << ',' << eval << ',' << build << ','
                        << format_double(od.kappa_star_eval) << ','
                        << format_double(od.kappa_star_build) << ','
                        << format_double(od.interval.mean) << ','
                        << format_double(od.interval.lower) << ','
                        << format_double(od.interval.upper) << ','
                        << format_double(od.success_probability) << '\n';
                }
            }
        }
    }
    if (config.replicates >= 2) {
        std::ofstream out(fs::path(out_dir) / "pvalues.csv", std::ios::binary);
        out << detail::provenance_line(results) << '\n';
        out << "train_size,eval,build,kappa,p_value,t_stat,zero_variance\n";
        // The eval score needs its own self-built cells; the build side
        // only needs to have been built.
        for (std::size_t n : results.train_sizes()) {
            for (const auto& eval : scores) {
                for (const auto& build_rule : config.build_scores) {
                    const std::string build = build_rule.name();
                    if (eval == build) continue;
                    for (double kappa : config.kappas) {
                        const auto test = hypothesis_test(results, eval, build, kappa, n);
                        out << n << ',' << eval << ',' << build << ','
                            << format_double(kappa) << ',' << format_double(test.p_value)
                            << ',' << format_double(test.t_stat) << ','
                            << (test.zero_variance ? 1 : 0) << '\n';
                    }
                }
            }
        }
    }
    if (!run.models.empty()) {
        const fs::path model_dir = fs::path(out_dir) / "models";
        fs::create_directories(model_dir);
        for (const auto& m : run.models) {
            std::ostringstream name;
            name << "n" << m.train_size << "_b" << m.replicate << "_" << m.build << "_k"
                 << detail::format_kappa(m.kappa) << ".json";
            save_model(m.tree, (model_dir / name.str()).string());
        }
    }
}

}  // namespace predtree
