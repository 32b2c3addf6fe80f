// Command-line front end. Links only the C interface in rpm/rpm.h.
#include "rpm/rpm.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitFailure = 1;
constexpr int kExitNoSystems = 2;

struct SystemArgs {
    std::string mtx;
    std::string system;
    std::optional<int> bandwidth;
    int n = 20;
};

struct Owned {
    char* s = nullptr;
    ~Owned() { rpm_string_free(s); }
};

struct SystemHandle {
    rpm_system* p = nullptr;
    ~SystemHandle() { rpm_system_free(p); }
};

int fail(rpm_status st) {
    nlohmann::json j{{"error", rpm_status_name(st)}, {"message", rpm_last_error()}};
    std::cout << j.dump() << '\n';
    return kExitFailure;
}

void add_system_flags(CLI::App* cmd, SystemArgs& a) {
    cmd->add_option("--mtx", a.mtx, "MatrixMarket file; b = A x* with x* drawn from --seed");
    cmd->add_option("--system", a.system,
                    "generator: identity:N | gaussian:N[:D] | svd:N:D:COND | banded:N:HBW");
    cmd->add_option("--bandwidth", a.bandwidth, "generate a banded N x N system with this half bandwidth");
    cmd->add_option("--n", a.n, "size for --bandwidth and the default system")->check(CLI::PositiveNumber);
}

rpm_status open_system(const SystemArgs& a, std::uint64_t seed, SystemHandle& out) {
    if (!a.mtx.empty()) {
        return rpm_system_from_mtx(a.mtx.c_str(), seed, &out.p);
    }
    std::string spec = a.system;
    if (spec.empty()) {
        spec = a.bandwidth ? "banded:" + std::to_string(a.n) + ":" + std::to_string(*a.bandwidth)
                           : "gaussian:" + std::to_string(a.n);
    }
    return rpm_system_generate(spec.c_str(), seed, &out.p);
}

std::string method_token(const std::string& method, std::optional<unsigned> m) {
    if (method == "partial") {
        return "partial:" + std::to_string(m.value_or(5));
    }
    return method;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        out += (out.empty() ? "" : ",") + s;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized projection solvers for consistent linear systems"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;

    // gen
    auto* gen = app.add_subcommand("gen", "generate a system and write its matrix");
    SystemArgs gen_sys;
    std::string gen_out;
    add_system_flags(gen, gen_sys);
    gen->add_option("--seed", seed);
    gen->add_option("--out", gen_out, "output .mtx path")->required();

    // solve
    auto* solve = app.add_subcommand("solve", "solve a system and print the report as JSON");
    SystemArgs solve_sys;
    std::string strategy = "gaussian";
    std::string method = "complete";
    std::optional<unsigned> m;
    double factor = 1e-6;
    double budget_ms = 0.0;
    std::uint64_t max_iters = 0;
    std::uint64_t check_every = 1;
    bool tigs = false;
    bool distributed = false;
    std::size_t nodes = 2;
    bool weighted = false;
    std::string ledger;
    bool print_x = false;
    add_system_flags(solve, solve_sys);
    solve->add_option("--seed", seed);
    solve->add_option("--strategy", strategy, "sketch token")->capture_default_str();
    solve->add_option("--method", method, "base | partial[:M] | complete")->capture_default_str();
    solve->add_option("--m", m, "buffer size for partial and distributed runs");
    solve->add_option("--factor", factor, "stop at ||r|| <= factor ||r0||; 0 disables")->capture_default_str();
    solve->add_option("--budget-ms", budget_ms, "wall clock budget; 0 disables");
    solve->add_option("--max-iters", max_iters, "iteration cap; 0 disables");
    solve->add_option("--check-every", check_every, "residual check period")->check(CLI::PositiveNumber);
    solve->add_flag("--tigs", tigs, "twice-iterated Gram-Schmidt for partial orthogonalization");
    solve->add_flag("--distributed", distributed, "simulate the limited-communication variant");
    solve->add_option("--nodes", nodes, "node count for --distributed")->check(CLI::PositiveNumber);
    solve->add_flag("--weighted", weighted, "draw nodes with probability proportional to row count");
    solve->add_option("--ledger", ledger, "write the communication ledger CSV here");
    solve->add_flag("--print-x", print_x, "include the final iterate in the report");

    // diag
    auto* diag = app.add_subcommand("diag", "log stopping times and rate bounds as JSON");
    SystemArgs diag_sys;
    std::string diag_strategy = "cyclic";
    std::string diag_method = "base";
    std::optional<unsigned> diag_m;
    double diag_factor = 0.0;
    std::optional<std::uint64_t> diag_iters;
    add_system_flags(diag, diag_sys);
    diag->add_option("--seed", seed);
    diag->add_option("--strategy", diag_strategy)->capture_default_str();
    diag->add_option("--method", diag_method)->capture_default_str();
    diag->add_option("--m", diag_m);
    diag->add_option("--factor", diag_factor, "0 disables the residual criterion")->capture_default_str();
    diag->add_option("--max-iters", diag_iters, "default 10 d");

    // bench
    auto* bench = app.add_subcommand("bench", "time-to-improvement grid, one CSV per strategy");
    std::vector<std::string> bench_strategies;
    std::vector<std::string> bench_methods;
    std::vector<std::string> bench_systems;
    std::vector<std::string> bench_mtx;
    std::string metric = "iters";
    double bench_factor = 0.1;
    std::optional<double> bench_budget_ms;
    std::uint64_t bench_iters = 200000;
    unsigned repetitions = 1;
    unsigned threads = 1;
    bool full_scale = false;
    std::string out_dir = ".";
    std::string tag = "Synthetic";
    bench->add_option("--seed", seed);
    bench->add_option("--strategy", bench_strategies, "sketch tokens (repeatable)")->delimiter(',');
    bench->add_option("--method", bench_methods, "methods (repeatable); default base, partial:5, partial:10, complete");
    bench->add_option("--system", bench_systems, "name=source (repeatable)");
    bench->add_option("--mtx", bench_mtx, "MatrixMarket files (repeatable)");
    bench->add_option("--metric", metric, "iters | wall")
        ->check(CLI::IsMember({"iters", "wall"}))
        ->capture_default_str();
    bench->add_option("--factor", bench_factor)->capture_default_str();
    bench->add_option("--budget-ms", bench_budget_ms, "wall clock budget per cell (default 3000)");
    bench->add_option("--max-iters", bench_iters, "iteration budget per cell")->capture_default_str();
    bench->add_option("--repetitions", repetitions)->check(CLI::PositiveNumber);
    bench->add_option("--threads", threads)->check(CLI::PositiveNumber);
    bench->add_flag("--paper-scale", full_scale, "500 x 500 default grid");
    bench->add_option("--out", out_dir, "output directory")->capture_default_str();
    bench->add_option("--tag", tag, "file name prefix")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }

    if (gen->parsed()) {
        SystemHandle sys;
        if (auto st = open_system(gen_sys, seed, sys); st != RPM_OK) return fail(st);
        if (auto st = rpm_system_write_mtx(sys.p, gen_out.c_str()); st != RPM_OK) return fail(st);
        return 0;
    }

    if (solve->parsed()) {
        SystemHandle sys;
        if (auto st = open_system(solve_sys, seed, sys); st != RPM_OK) return fail(st);
        const std::string mtok = method_token(method, m);
        rpm_solve_options opts;
        rpm_solve_options_init(&opts);
        opts.strategy = strategy.c_str();
        opts.method = mtok.c_str();
        opts.residual_factor = factor;
        opts.max_iterations = max_iters;
        opts.budget_seconds = budget_ms / 1000.0;
        opts.check_every = check_every;
        opts.seed = seed;
        opts.use_tigs = tigs ? 1 : 0;
        Owned report;
        rpm_status st;
        if (distributed) {
            rpm_distributed_options dist;
            rpm_distributed_options_init(&dist);
            dist.nodes = nodes;
            dist.m = m.value_or(2);
            dist.weighted_schedule = weighted ? 1 : 0;
            dist.ledger_csv = ledger.empty() ? nullptr : ledger.c_str();
            st = rpm_solve_distributed(sys.p, &opts, &dist, nullptr, &report.s);
        } else {
            st = rpm_solve(sys.p, &opts, nullptr, &report.s);
        }
        if (st != RPM_OK) return fail(st);
        auto j = nlohmann::json::parse(report.s);
        if (!print_x) {
            j.erase("x");
        }
        std::cout << j.dump(2) << '\n';
        return 0;
    }

    if (diag->parsed()) {
        SystemHandle sys;
        if (auto st = open_system(diag_sys, seed, sys); st != RPM_OK) return fail(st);
        std::size_t n = 0;
        std::size_t d = 0;
        rpm_system_dims(sys.p, &n, &d);
        const std::string mtok = method_token(diag_method, diag_m);
        rpm_solve_options opts;
        rpm_solve_options_init(&opts);
        opts.strategy = diag_strategy.c_str();
        opts.method = mtok.c_str();
        opts.residual_factor = diag_factor;
        opts.max_iterations = diag_iters.value_or(10 * d);
        opts.check_every = 1;
        opts.seed = seed;
        Owned log;
        if (auto st = rpm_diagnose(sys.p, &opts, &log.s); st != RPM_OK) return fail(st);
        std::cout << nlohmann::json::parse(log.s).dump(2) << '\n';
        return 0;
    }

    if (bench_strategies.empty()) {
        bench_strategies.push_back("countsketch:10");
    }
    std::vector<std::string> systems = bench_systems;
    for (const auto& path : bench_mtx) {
        systems.push_back(std::filesystem::path(path).stem().string() + "=" + path);
    }
    const std::string strategies_arg = join(bench_strategies);
    const std::string methods_arg = join(bench_methods);
    const std::string systems_arg = join(systems);
    rpm_bench_options opts;
    rpm_bench_options_init(&opts);
    opts.strategies = strategies_arg.c_str();
    opts.methods = bench_methods.empty() ? nullptr : methods_arg.c_str();
    opts.systems = systems.empty() ? nullptr : systems_arg.c_str();
    opts.full_scale = full_scale ? 1 : 0;
    opts.wall_clock = metric == "wall" ? 1 : 0;
    opts.factor = bench_factor;
    if (bench_budget_ms) {
        opts.budget_seconds = *bench_budget_ms / 1000.0;
    }
    opts.iteration_budget = bench_iters;
    opts.seed = seed;
    opts.repetitions = repetitions;
    opts.threads = threads;
    opts.out_dir = out_dir.c_str();
    opts.tag = tag.c_str();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    Owned summary;
    const rpm_status st = rpm_bench_run(&opts, &summary.s);
    if (summary.s != nullptr) {
        const auto j = nlohmann::json::parse(summary.s);
        for (const auto& w : j.value("skipped", nlohmann::json::array())) {
            std::cerr << "warning: " << w.get<std::string>() << '\n';
        }
        if (st == RPM_OK) {
            std::cout << j.dump(2) << '\n';
        }
    }
    if (st == RPM_ERR_NO_SYSTEMS) {
        std::cerr << "error: " << rpm_last_error() << '\n';
        return kExitNoSystems;
    }
    if (st != RPM_OK) return fail(st);
    return 0;
}
