#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string cli = PREDTREE_CLI_PATH;

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / "predtree_cli_ws";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string run_capture(const Workspace& ws, const std::string& args) {
    const std::string out_path = ws.path("stdout.txt");
    const std::string cmd = cli + " " + args + " >" + out_path + " 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    std::ifstream in(out_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("cli pipeline: synth, fit, predict, eval, scan") {
    Workspace ws;

    // synth is deterministic for a fixed seed
    REQUIRE(run("synth --preset easy --n 400 --seed 5 --out " + ws.path("train.csv")) == 0);
    REQUIRE(run("synth --preset easy --n 400 --seed 5 --out " + ws.path("train2.csv")) == 0);
    CHECK(slurp(ws.path("train.csv")) == slurp(ws.path("train2.csv")));
    REQUIRE(run("synth --preset easy --n 300 --seed 6 --out " + ws.path("test.csv")) == 0);

    // fit prints a summary and writes the model
    const auto fit_out = run_capture(
        ws, "fit --data " + ws.path("train.csv") +
                " --response y --score crps --min-node 50 --out " + ws.path("model.json"));
    CHECK(fit_out.find("leaves:") != std::string::npos);
    CHECK(fs::exists(ws.path("model.json")));

    // predict in all three summary modes
    REQUIRE(run("predict --model " + ws.path("model.json") + " --data " + ws.path("test.csv") +
                " --summary mean --out " + ws.path("pred_mean.csv")) == 0);
    REQUIRE(run("predict --model " + ws.path("model.json") + " --data " + ws.path("test.csv") +
                " --summary quantile:0.8 --out " + ws.path("pred_q.csv")) == 0);
    REQUIRE(run("predict --model " + ws.path("model.json") + " --data " + ws.path("test.csv") +
                " --summary samples --out " + ws.path("pred_s.csv")) == 0);
    CHECK(slurp(ws.path("pred_mean.csv")).rfind("row,prediction", 0) == 0);
    CHECK(slurp(ws.path("pred_s.csv")).rfind("row,n,samples", 0) == 0);
    CHECK(run("predict --model " + ws.path("model.json") + " --data " + ws.path("test.csv") +
              " --summary median --out " + ws.path("nope.csv")) != 0);

    // eval reports a total
    const auto eval_out = run_capture(ws, "eval --model " + ws.path("model.json") + " --data " +
                                              ws.path("test.csv") + " --score crps");
    CHECK(eval_out.find("score=crps total=") != std::string::npos);

    // scan emits the criterion curve
    const auto scan_out =
        run_capture(ws, "scan --data " + ws.path("train.csv") +
                            " --response y --score sse --grid-step 0.05 --out " +
                            ws.path("scan.csv"));
    CHECK(scan_out.find("argmin=") != std::string::npos);
    CHECK(slurp(ws.path("scan.csv")).find("split,objective") != std::string::npos);
}

TEST_CASE("cli pipeline: bench, tune, audit") {
    Workspace ws;
    {
        std::ofstream cfg(ws.path("bench.json"));
        cfg << R"({
            "build_scores": ["sse", "crps"],
            "eval_scores": ["sse", "crps"],
            "alpha": 0.2,
            "kappas": [0.0, 0.5],
            "replicates": 3,
            "data": {"mode": "synthetic", "preset": "hard",
                     "train_sizes": [200], "test_size": 300},
            "tree": {"max_depth": 3, "min_node_size": 30, "quantile_step": 0.05},
            "base_seed": 99
        })";
    }
    REQUIRE(run("bench --config " + ws.path("bench.json") + " --out-dir " + ws.path("out1") +
                " --threads 1") == 0);
    REQUIRE(run("bench --config " + ws.path("bench.json") + " --out-dir " + ws.path("out2") +
                " --threads 2") == 0);
    CHECK(slurp(ws.path("out1/results.csv")) == slurp(ws.path("out2/results.csv")));
    CHECK(fs::exists(ws.path("out1/kappa_star.csv")));
    CHECK(fs::exists(ws.path("out1/odstar.csv")));
    CHECK(fs::exists(ws.path("out1/pvalues.csv")));

    const auto tune_out =
        run_capture(ws, "tune --results " + ws.path("out1/results.csv") + " --score crps");
    CHECK(tune_out.find("kappa_star=") != std::string::npos);

    const auto audit_out = run_capture(
        ws, "audit --models " + ws.path("out1/models") +
                " --true-splits -0.5,0,0.5 --margin 0.02 --filter _crps_k0.5");
    CHECK(audit_out.find("mean_incorrect_splits=") != std::string::npos);
    CHECK(audit_out.find("recovery[-0.5]=") != std::string::npos);
}

TEST_CASE("cli kind overrides reach the loader") {
    Workspace ws;
    {
        std::ofstream out(ws.path("codes.csv"));
        out << "code,y\n";
        for (int i = 0; i < 80; ++i) out << (i % 2 + 1) << ',' << (i % 2 ? 5.0 : -5.0) << '\n';
    }
    const auto fit_out = run_capture(
        ws, "fit --data " + ws.path("codes.csv") +
                " --score sse --min-node 10 --categorical code --out " + ws.path("m.json"));
    CHECK(fit_out.find("code in {1}") != std::string::npos);

    // Prediction data uses the same column; unseen codes route right.
    {
        std::ofstream out(ws.path("probe.csv"));
        out << "code\n1\n2\n3\n";
    }
    REQUIRE(run("predict --model " + ws.path("m.json") + " --data " + ws.path("probe.csv") +
                " --out " + ws.path("p.csv")) == 0);
    const auto body = slurp(ws.path("p.csv"));
    CHECK(body.find("0,-5") != std::string::npos);
    CHECK(body.find("1,5") != std::string::npos);
    CHECK(body.find("2,5") != std::string::npos);
}

TEST_CASE("cli rejects bad invocations with nonzero exit") {
    Workspace ws;
    CHECK(run("fit --score sse") != 0);                         // missing --data
    CHECK(run("synth --preset nope --n 10 --seed 1") != 0);     // unknown preset
    CHECK(run("frobnicate") != 0);                              // unknown subcommand
    CHECK(run("eval --model missing.json --data missing.csv --score sse") != 0);
    CHECK(run("audit --models " + ws.path("empty_dir")) != 0);  // nonexistent dir
}
