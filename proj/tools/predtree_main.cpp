#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "predtree/bench.hpp"
#include "predtree/csv.hpp"
#include "predtree/model_io.hpp"
#include "predtree/synth.hpp"
#include "predtree/tree.hpp"

namespace {

using namespace predtree;

std::string describe_split(const PredictiveTree& tree, const SplitRule& split) {
    const auto& name = tree.predictor_schema().at(split.feature).name;
    if (split.is_threshold()) {
        return name + " <= " + format_double(split.threshold());
    }
    std::string out = name + " in {";
    const auto& cats = split.category_split().left_categories;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        if (i) out += ",";
        out += cats[i];
    }
    return out + "}";
}

void print_tree_summary(const PredictiveTree& tree) {
    const auto stats = tree_stats(tree);
    std::cout << "depth: " << stats.depth << "\n";
    std::cout << "leaves: " << stats.leaf_count << "\n";
    std::cout << "root_n: " << tree.root_n() << "\n";
    std::cout << "root_delta: " << format_double(tree.root_delta()) << "\n";
    std::cout << "splits: " << stats.splits.size() << "\n";
    for (const auto& [id, split] : stats.splits) {
        std::cout << "  node " << id << ": " << describe_split(tree, split)
                  << "  delta=" << format_double(stats.deltas.at(id)) << "\n";
    }
}

std::map<std::string, ColumnKind> kind_overrides(const std::vector<std::string>& categorical,
                                                 const std::vector<std::string>& numeric) {
    std::map<std::string, ColumnKind> overrides;
    for (const auto& name : categorical) overrides[name] = ColumnKind::Categorical;
    for (const auto& name : numeric) overrides[name] = ColumnKind::Numeric;
    return overrides;
}

/// Column kinds recorded at training time, applied when loading data for
/// prediction or evaluation so that numeric-looking categorical columns
/// keep their kind.
std::map<std::string, ColumnKind> schema_overrides(const PredictiveTree& tree) {
    std::map<std::string, ColumnKind> overrides;
    for (const auto& col : tree.predictor_schema()) overrides[col.name] = col.kind;
    return overrides;
}

struct SummarySpec {
    enum class Mode { Mean, Quantile, Samples };
    Mode mode = Mode::Mean;
    double level = 0.5;
};

SummarySpec parse_summary(const std::string& text) {
    SummarySpec spec;
    if (text == "mean") {
        spec.mode = SummarySpec::Mode::Mean;
    } else if (text == "samples") {
        spec.mode = SummarySpec::Mode::Samples;
    } else if (text.rfind("quantile:", 0) == 0) {
        spec.mode = SummarySpec::Mode::Quantile;
        spec.level = std::stod(text.substr(9));
        if (!(spec.level > 0.0 && spec.level <= 1.0)) {
            throw CLI::ValidationError("--summary", "quantile level must lie in (0, 1]");
        }
    } else {
        throw CLI::ValidationError("--summary",
                                   "expected mean, quantile:<p>, or samples");
    }
    return spec;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, ',')) {
        if (!cell.empty()) values.push_back(std::stod(cell));
    }
    if (values.empty()) throw CLI::ValidationError("expected a comma-separated list of numbers");
    return values;
}

int run(int argc, char** argv) {
    CLI::App app{"Probabilistic regression trees built with proper scoring rules"};
    app.require_subcommand(1);

    // ---- fit ----------------------------------------------------------
    auto* fit_cmd = app.add_subcommand("fit", "Fit a tree and write the model as JSON");
    std::string fit_data, fit_response = "y", fit_score, fit_out = "model.json";
    double fit_alpha = 0.2, fit_step = 0.05, fit_kappa = 0.0;
    std::size_t fit_depth = 4, fit_min_node = 50, fit_cutoff = 10;
    std::vector<std::string> fit_categorical, fit_numeric;
    fit_cmd->add_option("--data", fit_data, "Training CSV")->required();
    fit_cmd->add_option("--response", fit_response, "Response column name");
    fit_cmd->add_option("--score", fit_score, "Build score: sse|crps|dss|is1|is2")->required();
    fit_cmd->add_option("--alpha", fit_alpha, "Interval level for is1/is2");
    fit_cmd->add_option("--depth", fit_depth, "Maximum tree depth D");
    fit_cmd->add_option("--min-node", fit_min_node, "Minimum node size N");
    fit_cmd->add_option("--quantile-step", fit_step, "Candidate quantile step");
    fit_cmd->add_option("--kappa", fit_kappa, "Pruning threshold in [0, 1]");
    fit_cmd->add_option("--discrete-cutoff", fit_cutoff,
                        "Unique-value cutoff for exhaustive thresholds");
    fit_cmd->add_option("--categorical", fit_categorical, "Force a column to be categorical");
    fit_cmd->add_option("--numeric", fit_numeric, "Force a column to be numeric");
    fit_cmd->add_option("--out", fit_out, "Output model path");
    fit_cmd->callback([&] {
        const Dataset ds =
            load_csv(fit_data, fit_response, kind_overrides(fit_categorical, fit_numeric));
        TreeConfig config{ScoringRule::from_name(fit_score, fit_alpha),
                          fit_depth,
                          fit_min_node,
                          fit_step,
                          fit_kappa,
                          fit_cutoff};
        const auto tree = fit(ds, config);
        save_model(tree, fit_out);
        print_tree_summary(tree);
        std::cout << "model: " << fit_out << "\n";
    });

    // ---- predict ------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "Predict rows of a CSV with a model");
    std::string predict_model, predict_data, predict_out = "predictions.csv";
    std::string predict_summary = "mean";
    predict_cmd->add_option("--model", predict_model, "Model JSON")->required();
    predict_cmd->add_option("--data", predict_data, "Input CSV")->required();
    predict_cmd->add_option("--summary", predict_summary,
                            "mean | quantile:<p> | samples");
    predict_cmd->add_option("--out", predict_out, "Output CSV");
    predict_cmd->callback([&] {
        const SummarySpec summary = parse_summary(predict_summary);
        const auto tree = load_model(predict_model);
        const Dataset ds =
            load_predictors_csv(predict_data, tree.response_name(), schema_overrides(tree));
        const SchemaBinding binding(tree, ds);
        std::ofstream out(predict_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write file '" + predict_out + "'");
        out << (summary.mode == SummarySpec::Mode::Samples ? "row,n,samples"
                                                           : "row,prediction")
            << "\n";
        for (std::size_t i = 0; i < ds.n_rows(); ++i) {
            const Ecdf& f = tree.leaf_ecdf(route(tree, binding, ds, i));
            out << i << ',';
            switch (summary.mode) {
                case SummarySpec::Mode::Mean:
                    out << format_double(f.mean());
                    break;
                case SummarySpec::Mode::Quantile:
                    out << format_double(f.quantile(summary.level));
                    break;
                case SummarySpec::Mode::Samples: {
                    out << f.size() << ",\"";
                    for (std::size_t j = 0; j < f.size(); ++j) {
                        if (j) out << ';';
                        out << format_double(f.samples()[j]);
                    }
                    out << '"';
                    break;
                }
            }
            out << '\n';
        }
        std::cout << "predictions: " << predict_out << " (" << ds.n_rows() << " rows)\n";
    });

    // ---- eval ---------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Score a model on a labelled CSV");
    std::string eval_model, eval_data, eval_score;
    double eval_alpha = 0.2;
    eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
    eval_cmd->add_option("--data", eval_data, "CSV with the response column")->required();
    eval_cmd->add_option("--score", eval_score, "Evaluation score")->required();
    eval_cmd->add_option("--alpha", eval_alpha, "Interval level for is1/is2");
    eval_cmd->callback([&] {
        const auto tree = load_model(eval_model);
        const Dataset ds = load_csv(eval_data, tree.response_name(), schema_overrides(tree));
        const auto rule = ScoringRule::from_name(eval_score, eval_alpha);
        const double total = evaluate(tree, ds, rule);
        std::cout << "score=" << rule.name() << " total=" << format_double(total)
                  << " per_point_mean="
                  << format_double(total / static_cast<double>(ds.n_rows()))
                  << " n=" << ds.n_rows() << "\n";
    });

    // ---- synth --------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
    std::string synth_preset = "toy", synth_out = "synth.csv";
    std::size_t synth_n = 1000;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--preset", synth_preset, "easy | hard | toy")->required();
    synth_cmd->add_option("--n", synth_n, "Rows to generate")->required();
    synth_cmd->add_option("--seed", synth_seed, "Generator seed")->required();
    synth_cmd->add_option("--out", synth_out, "Output CSV");
    synth_cmd->callback([&] {
        const Dataset ds = generate(PiecewiseSpec::preset(synth_preset), synth_n, synth_seed);
        save_csv(ds, synth_out);
        std::cout << "dataset: " << synth_out << " (" << ds.n_rows() << " rows)\n";
    });

    // ---- scan ---------------------------------------------------------
    auto* scan_cmd = app.add_subcommand(
        "scan", "Sweep the split criterion over a threshold grid (one numeric predictor)");
    std::string scan_data, scan_response = "y", scan_score, scan_out = "scan.csv";
    double scan_alpha = 0.2, scan_step = 0.01;
    scan_cmd->add_option("--data", scan_data, "CSV with one numeric predictor")->required();
    scan_cmd->add_option("--response", scan_response, "Response column name");
    scan_cmd->add_option("--score", scan_score, "Criterion score")->required();
    scan_cmd->add_option("--alpha", scan_alpha, "Interval level for is1/is2");
    scan_cmd->add_option("--grid-step", scan_step, "Grid step over the predictor range");
    scan_cmd->add_option("--out", scan_out, "Output CSV");
    scan_cmd->callback([&] {
        const Dataset ds = load_csv(scan_data, scan_response);
        if (ds.n_predictors() != 1 || ds.predictor(0).kind != ColumnKind::Numeric) {
            throw std::runtime_error("scan requires a single numeric predictor");
        }
        const auto& x = ds.predictor(0).numeric;
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        const auto rule = ScoringRule::from_name(scan_score, scan_alpha);
        const auto scan = criterion_scan(ds, rule, uniform_grid(*lo, *hi, scan_step));
        write_scan_csv(scan, scan_out,
                       "criterion scan score=" + rule.name() + " data=" + scan_data +
                           " grid_step=" + format_double(scan_step));
        std::cout << "argmin=" << format_double(scan.argmin)
                  << " objective=" << format_double(scan.min_objective) << " points="
                  << scan.points.size() << "\n";
        std::cout << "scan: " << scan_out << "\n";
    });

    // ---- bench --------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "Run the replicated experiment grid");
    std::string bench_config, bench_out_dir = "bench_out";
    std::size_t bench_threads = 0;
    bool bench_no_models = false;
    bench_cmd->add_option("--config", bench_config, "Experiment config JSON")->required();
    bench_cmd->add_option("--out-dir", bench_out_dir, "Output directory");
    bench_cmd->add_option("--threads", bench_threads,
                          "Worker threads (default: value from config, else 1)");
    bench_cmd->add_flag("--no-models", bench_no_models, "Skip writing fitted models");
    bench_cmd->callback([&] {
        std::ifstream in(bench_config);
        if (!in) throw std::runtime_error("cannot open file '" + bench_config + "'");
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("malformed config '" + bench_config + "': " + e.what());
        }
        ExperimentConfig config = experiment_config_from_json(doc);
        if (bench_threads > 0) config.threads = bench_threads;
        const auto run = run_experiment_full(config, !bench_no_models);
        write_bench_outputs(run, config, bench_out_dir);
        std::cout << "records: " << run.results.records().size() << "\n";
        std::cout << "results: " << (std::filesystem::path(bench_out_dir) / "results.csv").string()
                  << "\n";
    });

    // ---- tune ---------------------------------------------------------
    auto* tune_cmd = app.add_subcommand("tune", "Select kappa* from a results CSV");
    std::string tune_results, tune_score;
    tune_cmd->add_option("--results", tune_results, "results.csv from bench")->required();
    tune_cmd->add_option("--score", tune_score, "Score whose kappa* to select")->required();
    tune_cmd->callback([&] {
        const auto results = read_results_csv(tune_results);
        for (std::size_t n : results.train_sizes()) {
            const auto sel = tune_kappa(results, tune_score, n);
            std::cout << "train_size=" << n << " kappa_star=" << format_double(sel.kappa_star)
                      << "\n";
            for (const auto& [kappa, mean] : sel.mean_table) {
                std::cout << "  kappa=" << format_double(kappa)
                          << " mean_out_sample=" << format_double(mean) << "\n";
            }
        }
    });

    // ---- audit --------------------------------------------------------
    auto* audit_cmd = app.add_subcommand("audit", "Split-recovery audit of saved models");
    std::string audit_dir, audit_splits = "-0.5,0,0.5", audit_filter;
    double audit_margin = 0.02;
    audit_cmd->add_option("--models", audit_dir, "Directory of model JSONs")->required();
    audit_cmd->add_option("--true-splits", audit_splits, "Comma-separated true split values");
    audit_cmd->add_option("--margin", audit_margin, "Recovery margin around each true split");
    audit_cmd->add_option("--filter", audit_filter, "Only audit filenames containing this text");
    audit_cmd->callback([&] {
        namespace fs = std::filesystem;
        std::vector<fs::path> paths;
        for (const auto& entry : fs::directory_iterator(audit_dir)) {
            if (entry.path().extension() != ".json") continue;
            if (!audit_filter.empty() &&
                entry.path().filename().string().find(audit_filter) == std::string::npos) {
                continue;
            }
            paths.push_back(entry.path());
        }
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) throw std::runtime_error("no model files matched in '" + audit_dir + "'");
        std::vector<PredictiveTree> trees;
        trees.reserve(paths.size());
        for (const auto& p : paths) trees.push_back(load_model(p.string()));
        const auto splits = parse_double_list(audit_splits);
        const auto report = split_recovery_audit(trees, splits, audit_margin);
        std::cout << "trees: " << report.tree_count << "\n";
        for (std::size_t i = 0; i < splits.size(); ++i) {
            std::cout << "recovery[" << format_double(splits[i])
                      << "]=" << format_double(report.recovery_rate[i]) << "\n";
        }
        std::cout << "mean_incorrect_splits=" << format_double(report.mean_incorrect_splits)
                  << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
