#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "predtree/csv.hpp"
#include "predtree/dataset.hpp"

using namespace predtree;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("predtree_io_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("load a small numeric csv") {
    TempDir tmp;
    const auto path = tmp.file("small.csv");
    write_file(path, "x,y\n1,2\n3,4\n5,6\n");
    const Dataset ds = load_csv(path, "y");
    CHECK(ds.n_rows() == 3);
    CHECK(ds.n_predictors() == 1);
    CHECK(ds.predictor(0).kind == ColumnKind::Numeric);
    CHECK(ds.predictor(0).numeric == std::vector<double>{1.0, 3.0, 5.0});
    CHECK(ds.response() == std::vector<double>{2.0, 4.0, 6.0});
}

TEST_CASE("mixed column types are inferred") {
    TempDir tmp;
    const auto path = tmp.file("mixed.csv");
    write_file(path, "name,x,y\na,1.5,1\nb,2.5,2\na,3.5,3\n");
    const Dataset ds = load_csv(path, "y");
    REQUIRE(ds.n_predictors() == 2);
    const auto& cat = ds.predictor(ds.predictor_index("name"));
    CHECK(cat.kind == ColumnKind::Categorical);
    CHECK(cat.categories == std::vector<std::string>{"a", "b"});
    CHECK(cat.category_of_row(0) == "a");
    CHECK(cat.category_of_row(1) == "b");
}

TEST_CASE("loader error cases") {
    TempDir tmp;
    write_file(tmp.file("bad_resp.csv"), "x,y\n1,abc\n");
    CHECK_THROWS_WITH(load_csv(tmp.file("bad_resp.csv"), "y"),
                      Catch::Matchers::ContainsSubstring("non-numeric response"));

    write_file(tmp.file("no_resp.csv"), "x,z\n1,2\n");
    CHECK_THROWS_WITH(load_csv(tmp.file("no_resp.csv"), "y"),
                      Catch::Matchers::ContainsSubstring("missing response column"));

    write_file(tmp.file("empty.csv"), "");
    CHECK_THROWS_WITH(load_csv(tmp.file("empty.csv"), "y"),
                      Catch::Matchers::ContainsSubstring("empty file"));

    write_file(tmp.file("ragged.csv"), "x,y\n1,2\n3\n");
    CHECK_THROWS_WITH(load_csv(tmp.file("ragged.csv"), "y"),
                      Catch::Matchers::ContainsSubstring("ragged row"));

    write_file(tmp.file("missing_num.csv"), "x,y\n1,2\n,4\n");
    CHECK_THROWS_WITH(load_csv(tmp.file("missing_num.csv"), "y"),
                      Catch::Matchers::ContainsSubstring("missing value in numeric column"));

    CHECK_THROWS_WITH(load_csv(tmp.file("does_not_exist.csv"), "y"),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("schema overrides force column kinds") {
    TempDir tmp;
    const auto path = tmp.file("codes.csv");
    write_file(path, "code,y\n1,10\n2,20\n1,30\n");
    const Dataset inferred = load_csv(path, "y");
    CHECK(inferred.predictor(0).kind == ColumnKind::Numeric);
    const Dataset forced = load_csv(path, "y", {{"code", ColumnKind::Categorical}});
    CHECK(forced.predictor(0).kind == ColumnKind::Categorical);
    CHECK(forced.predictor(0).categories == std::vector<std::string>{"1", "2"});
}

TEST_CASE("quoted fields round-trip") {
    TempDir tmp;
    const auto path = tmp.file("quoted.csv");
    write_file(path, "label,y\n\"a,b\",1\n\"say \"\"hi\"\"\",2\n");
    const Dataset ds = load_csv(path, "y");
    const auto& col = ds.predictor(0);
    CHECK(col.category_of_row(0) == "a,b");
    CHECK(col.category_of_row(1) == "say \"hi\"");

    const auto out = tmp.file("quoted_out.csv");
    save_csv(ds, out);
    const Dataset again = load_csv(out, "y");
    CHECK(again.predictor(0).category_of_row(0) == "a,b");
    CHECK(again.predictor(0).category_of_row(1) == "say \"hi\"");
}

TEST_CASE("load-save-load is idempotent") {
    TempDir tmp;
    const auto path = tmp.file("orig.csv");
    write_file(path,
               "x,tag,y\n0.125,red,1.5\n-3.25,blue,2.25\n7.75,red,-0.5\n0.0625,green,9.0\n");
    const Dataset first = load_csv(path, "y");
    const auto saved = tmp.file("saved.csv");
    save_csv(first, saved);
    const Dataset second = load_csv(saved, "y");
    REQUIRE(second.n_rows() == first.n_rows());
    REQUIRE(second.n_predictors() == first.n_predictors());
    CHECK(second.response() == first.response());
    for (std::size_t k = 0; k < first.n_predictors(); ++k) {
        CHECK(second.predictor(k).name == first.predictor(k).name);
        CHECK(second.predictor(k).kind == first.predictor(k).kind);
        CHECK(second.predictor(k).numeric == first.predictor(k).numeric);
        CHECK(second.predictor(k).codes == first.predictor(k).codes);
        CHECK(second.predictor(k).categories == first.predictor(k).categories);
    }
}

TEST_CASE("dataset validation") {
    CHECK_THROWS_AS(Dataset({numeric_column("x", {1.0})}, {}, "y"), std::invalid_argument);
    CHECK_THROWS_AS(Dataset({numeric_column("x", {1.0, std::nan("")})}, {1.0, 2.0}, "y"),
                    std::invalid_argument);
    CHECK_THROWS_AS(Dataset({numeric_column("x", {1.0})}, {1.0, 2.0}, "y"),
                    std::invalid_argument);

    const Dataset ds({numeric_column("x", {1.0, 2.0, 3.0})}, {4.0, 5.0, 6.0}, "y");
    const std::vector<std::size_t> rows{2, 0, 2};
    const Dataset sub = ds.select_rows(rows);
    CHECK(sub.predictor(0).numeric == std::vector<double>{3.0, 1.0, 3.0});
    CHECK(sub.response() == std::vector<double>{6.0, 4.0, 6.0});
}
