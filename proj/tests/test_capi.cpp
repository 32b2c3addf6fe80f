// Exercises the shared library through rpm.h only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpm/rpm.h"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace {

nlohmann::json take(char* s) {
    REQUIRE(s != nullptr);
    auto j = nlohmann::json::parse(s);
    rpm_string_free(s);
    return j;
}

} // namespace

TEST_CASE("status names and errors") {
    CHECK(std::string(rpm_status_name(RPM_ERR_PARSE)) == "parse");
    rpm_system* sys = nullptr;
    CHECK(rpm_system_generate("nonsense:3", 0, &sys) == RPM_ERR_INVALID_ARGUMENT);
    CHECK(std::string(rpm_last_error()).find("nonsense") != std::string::npos);
    CHECK(rpm_system_generate(nullptr, 0, &sys) == RPM_ERR_INVALID_ARGUMENT);
    CHECK(rpm_system_from_mtx("/nonexistent.mtx", 0, &sys) == RPM_ERR_IO);
    CHECK(sys == nullptr);
    CHECK(rpm_system_generate("identity:2", 0, &sys) == RPM_OK);
    CHECK(std::string(rpm_last_error()).empty());
    rpm_system_free(sys);
    rpm_system_free(nullptr);
}

TEST_CASE("dense system and solve") {
    const double a[] = {1, 0, 1, 1};
    const double b[] = {1, 3};
    rpm_system* sys = nullptr;
    REQUIRE(rpm_system_from_dense(2, 2, a, b, nullptr, &sys) == RPM_OK);
    size_t n = 0, d = 0;
    CHECK(rpm_system_dims(sys, &n, &d) == RPM_OK);
    CHECK(n == 2);
    CHECK(d == 2);

    rpm_solve_options o;
    rpm_solve_options_init(&o);
    o.strategy = "cyclic";
    o.method = "complete";
    o.residual_factor = 1e-12;
    o.check_every = 1;
    double x[2] = {0, 0};
    char* report = nullptr;
    REQUIRE(rpm_solve(sys, &o, x, &report) == RPM_OK);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
    const auto j = take(report);
    CHECK(j["converged"] == true);
    CHECK(j["advanced_steps"] == 2);

    o.strategy = "bogus";
    CHECK(rpm_solve(sys, &o, x, nullptr) == RPM_ERR_INVALID_ARGUMENT);
    o.strategy = "grk";
    o.method = "base";
    CHECK(rpm_solve(sys, &o, x, nullptr) == RPM_OK);
    rpm_system_free(sys);

    const double bad_b[] = {1, 2};
    const double col[] = {1, 1};
    REQUIRE(rpm_system_from_dense(2, 1, col, bad_b, nullptr, &sys) == RPM_OK);
    rpm_solve_options_init(&o);
    o.strategy = "grk";
    o.method = "base";
    o.max_iterations = 10;
    CHECK(rpm_diagnose(sys, &o, nullptr) == RPM_ERR_INFEASIBLE);
    rpm_system_free(sys);
}

TEST_CASE("diagnostics json") {
    rpm_system* sys = nullptr;
    REQUIRE(rpm_system_generate("identity:3", 0, &sys) == RPM_OK);
    rpm_solve_options o;
    rpm_solve_options_init(&o);
    o.strategy = "cyclic";
    o.method = "base";
    o.residual_factor = 0;
    o.max_iterations = 9;
    char* log = nullptr;
    REQUIRE(rpm_diagnose(sys, &o, &log) == RPM_OK);
    const auto j = take(log);
    CHECK(j["T"] == 2);
    CHECK(j["taus"] == nlohmann::json::array({2, 5, 8}));
    CHECK(j["gammas"][0] == 0.0);

    o.strategy = "maxres";
    o.residual_factor = 1e-12;
    o.max_iterations = 50;
    REQUIRE(rpm_diagnose(sys, &o, &log) == RPM_OK);
    CHECK(take(log).contains("adaptive_taus"));
    rpm_system_free(sys);
}

TEST_CASE("distributed solve") {
    rpm_system* sys = nullptr;
    REQUIRE(rpm_system_generate("banded:20:2", 3, &sys) == RPM_OK);
    rpm_solve_options o;
    rpm_solve_options_init(&o);
    o.strategy = "cyclic";
    o.residual_factor = 1e-8;
    o.max_iterations = 100000;
    rpm_distributed_options dist;
    rpm_distributed_options_init(&dist);
    dist.nodes = 5;
    dist.m = 2;
    const auto ledger = std::filesystem::temp_directory_path() / "rpm_capi_ledger.csv";
    const std::string ledger_path = ledger.string();
    dist.ledger_csv = ledger_path.c_str();
    char* report = nullptr;
    REQUIRE(rpm_solve_distributed(sys, &o, &dist, nullptr, &report) == RPM_OK);
    const auto j = take(report);
    CHECK(j["converged"] == true);
    CHECK(j["Q"] == 4);
    CHECK(j["F"] == 3);
    CHECK(j["comm_bound_per_iteration"] == 56);
    CHECK(j["comm_values_max_per_iteration"] <= 56);
    CHECK(std::filesystem::exists(ledger));
    std::filesystem::remove(ledger);

    o.strategy = "grk";
    CHECK(rpm_solve_distributed(sys, &o, &dist, nullptr, nullptr) == RPM_ERR_INVALID_ARGUMENT);
    rpm_system_free(sys);
}

TEST_CASE("bench through the C interface") {
    const auto dir = std::filesystem::temp_directory_path() / "rpm_capi_bench";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string out = dir.string();
    rpm_bench_options o;
    rpm_bench_options_init(&o);
    o.strategies = "cyclic,countsketch:10";
    o.systems = "id20=identity:20,missing=/nonexistent.mtx";
    o.out_dir = out.c_str();
    o.tag = "Test";
    char* summary = nullptr;
    REQUIRE(rpm_bench_run(&o, &summary) == RPM_OK);
    const auto j = take(summary);
    CHECK(j["files"].size() == 2);
    CHECK(j["skipped"].size() == 1);
    CHECK(std::filesystem::exists(dir / "Test_KaczmarzCyc_10x-Improve-Time.csv"));
    CHECK(std::filesystem::exists(dir / "Test_CountSketch_10x-Improve-Time.csv"));

    o.systems = "missing=/nonexistent.mtx";
    CHECK(rpm_bench_run(&o, &summary) == RPM_ERR_NO_SYSTEMS);
    rpm_string_free(summary);

    o.systems = "id20=identity:20";
    o.wall_clock = 1;
    o.budget_seconds = 0.5;
    REQUIRE(rpm_bench_run(&o, &summary) == RPM_OK);
    CHECK(take(summary).contains("host_metadata"));
    std::filesystem::remove_all(dir);
}
