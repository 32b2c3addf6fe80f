#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpm/bench.hpp"
#include "rpm/error.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rpm;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "rpm_bench_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("csv format") {
    const auto p = scratch("one.csv");
    emit_csv({{"id100", {1.234e-3, 5.6e-4, 7.8e-4, 2.3e-2}, {}}}, p);
    CHECK(slurp(p) == "Matrix,Base,PartFive,PartTen,Comp\nid100,1.23e-03,5.60e-04,7.80e-04,2.30e-02\n");
    CHECK_FALSE(std::filesystem::exists(p.string() + ".tmp"));

    emit_csv({{"slow", {kBenchSentinel, 1.0, 2.0, 3.0}, {}}}, p);
    CHECK(slurp(p) == "Matrix,Base,PartFive,PartTen,Comp\nslow,1.0e99,1.00e+00,2.00e+00,3.00e+00\n");

    emit_csv({}, p);
    CHECK(slurp(p) == "Matrix,Base,PartFive,PartTen,Comp\n");

    CHECK_THROWS_AS(emit_csv({}, "/nonexistent/dir/x.csv"), IoError);
    CHECK(bench_file_name("MatrixMarket", "CountSketch") == "MatrixMarket_CountSketch_10x-Improve-Time.csv");
}

TEST_CASE("column names") {
    CHECK(bench_column_name(Method::base()) == "Base");
    CHECK(bench_column_name(Method::partial(5)) == "PartFive");
    CHECK(bench_column_name(Method::partial(10)) == "PartTen");
    CHECK(bench_column_name(Method::complete()) == "Comp");
}

TEST_CASE("identity grid") {
    BenchConfig cfg;
    cfg.systems = {{"id100", "identity:100"}};
    cfg.strategies = {"cyclic"};
    const auto res = run_grid(cfg);
    REQUIRE(res.tables.size() == 1);
    CHECK(res.tables[0].strategy_name == "KaczmarzCyc");
    CHECK(res.tables[0].rows[0].values[0] <= 100.0);
}

TEST_CASE("timeouts map to the sentinel") {
    BenchConfig cfg;
    cfg.systems = {{"svd50_c1e6", "svd:50:50:1e6"}};
    cfg.strategies = {"gaussian"};
    cfg.methods = {Method::base(), Method::complete()};
    cfg.iteration_budget = 100;
    const auto row = run_grid(cfg).tables[0].rows[0];
    CHECK(row.values[0] == kBenchSentinel);
    CHECK(row.values[1] < kBenchSentinel);
    CHECK(row.values[1] <= 50.0);
}

TEST_CASE("iteration grids are reproducible") {
    BenchConfig cfg;
    cfg.systems = {{"a", "svd:30:30:1e3"}, {"b", "gaussian:30"}};
    cfg.strategies = {"countsketch:10", "uniform"};
    cfg.repetitions = 3;
    cfg.seed = 5;
    const auto p1 = scratch("r1.csv");
    const auto p2 = scratch("r2.csv");
    const auto r1 = run_grid(cfg);
    cfg.threads = 4;
    const auto r2 = run_grid(cfg);
    for (std::size_t t = 0; t < 2; ++t) {
        emit_csv(r1.tables[t].rows, p1);
        emit_csv(r2.tables[t].rows, p2);
        CHECK(slurp(p1) == slurp(p2));
    }
}

TEST_CASE("unresolvable systems are skipped") {
    BenchConfig cfg;
    cfg.systems = {{"missing", "/nonexistent/file.mtx"}, {"ok", "identity:5"}};
    cfg.strategies = {"cyclic"};
    const auto res = run_grid(cfg);
    CHECK(res.skipped.size() == 1);
    CHECK(res.systems_run == 1);
    CHECK(res.tables[0].rows.size() == 1);

    cfg.systems = {{"bad", "nonsense:3"}};
    CHECK(run_grid(cfg).systems_run == 0);
}

TEST_CASE("config validation") {
    BenchConfig cfg;
    cfg.systems = {{"a", "identity:3"}};
    cfg.strategies = {"cyclic"};
    cfg.improvement_factor = 1.5;
    CHECK_THROWS_AS(run_grid(cfg), InvalidArgument);
    cfg.improvement_factor = 0.1;
    cfg.strategies = {"bogus"};
    CHECK_THROWS_AS(run_grid(cfg), InvalidArgument);
    CHECK(default_bench_systems(false).size() == 10);
    CHECK(default_bench_systems(true)[0].source.rfind("svd:500:500:", 0) == 0);
}
