#include "rpm/bench.hpp"

#include "rpm/error.hpp"
#include "rpm/linear_system.hpp"
#include "rpm/matrix_market.hpp"
#include "rpm/random.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <thread>

namespace rpm {

void BenchConfig::validate() const {
    if (systems.empty() || strategies.empty() || methods.empty()) {
        throw InvalidArgument("bench: systems, strategies and methods must be nonempty");
    }
    if (!(improvement_factor > 0.0 && improvement_factor < 1.0)) {
        throw InvalidArgument("bench: improvement factor must lie in (0, 1)");
    }
    if (time_budget.count() <= 0 || iteration_budget == 0) {
        throw InvalidArgument("bench: budgets must be positive");
    }
    if (repetitions < 1) {
        throw InvalidArgument("bench: repetitions must be >= 1");
    }
    for (const auto& s : strategies) {
        parse_sketch_spec(s);
    }
}

std::vector<BenchSystem> default_bench_systems(bool full_scale) {
    const int size = full_scale ? 500 : 200;
    std::vector<BenchSystem> out;
    for (int i = 0; i < 10; ++i) {
        const double cond = std::pow(10.0, 3.0 + 5.0 * i / 9.0);
        char name[64];
        char source[96];
        std::snprintf(name, sizeof name, "svd%d_c%.1e", size, cond);
        std::snprintf(source, sizeof source, "svd:%d:%d:%.17g", size, size, cond);
        out.push_back({name, source});
    }
    return out;
}

std::string bench_column_name(const Method& method) {
    static const char* const kWords[] = {"Zero", "One", "Two",   "Three",  "Four",  "Five",  "Six",
                                         "Seven", "Eight", "Nine", "Ten",   "Eleven", "Twelve"};
    switch (method.kind) {
    case MethodKind::Base:
        return "Base";
    case MethodKind::Complete:
        return "Comp";
    case MethodKind::Partial:
        if (method.m < std::size(kWords)) {
            return std::string("Part") + kWords[method.m];
        }
        return "Part" + std::to_string(method.m);
    }
    return "Unknown";
}

std::string format_bench_value(double value) {
    if (value >= kBenchSentinel) {
        return "1.0e99";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", value);
    return buf;
}

void emit_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path,
              const std::vector<std::string>& columns) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out << "Matrix";
        for (const auto& c : columns) {
            out << ',' << c;
        }
        out << '\n';
        for (const auto& row : rows) {
            if (row.values.size() != columns.size()) {
                throw InvalidArgument("emit_csv: row '" + row.matrix + "' has the wrong number of values");
            }
            out << row.matrix;
            for (double v : row.values) {
                out << ',' << format_bench_value(v);
            }
            out << '\n';
        }
        out.flush();
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move results into " + path.string() + ": " + ec.message());
    }
}

std::string bench_file_name(const std::string& tag, const std::string& strategy_name) {
    return tag + "_" + strategy_name + "_10x-Improve-Time.csv";
}

namespace {

struct Cell {
    std::size_t system = 0;
    std::size_t strategy = 0;
    std::size_t method = 0;
    unsigned rep = 0;
    double value = 0.0;
    std::uint64_t advanced = 0;
    bool timed_out = false;
};

void run_cell(const BenchConfig& cfg, const LinearSystem& system, Cell& cell) {
    const SketchSpec spec = parse_sketch_spec(cfg.strategies[cell.strategy]);
    const std::uint64_t sketch_seed =
        Rng(cfg.seed).split(cell.system + 1).split(cell.strategy + 1).split(cell.rep + 1)();
    SketchSource source(spec, system, sketch_seed);
    const Method& method = cfg.methods[cell.method];

    TerminationCriteria criteria;
    criteria.residual_factor = cfg.improvement_factor;
    criteria.check_every = method.kind == MethodKind::Base ? 10 : 1;
    if (cfg.metric == BenchMetric::WallClock) {
        criteria.wall_clock_budget = cfg.time_budget;
    } else {
        criteria.max_iterations = cfg.iteration_budget;
    }
    SolveOptions options;
    options.seed = sketch_seed;
    const SolveReport report = solve(system, source, method, criteria, options);
    cell.timed_out = report.timed_out;
    cell.advanced = report.advanced_steps;
    cell.value = cfg.metric == BenchMetric::WallClock ? report.elapsed_seconds
                                                       : static_cast<double>(report.advanced_steps);
}

} // namespace

BenchResult run_grid(const BenchConfig& cfg) {
    cfg.validate();
    BenchResult result;

    std::vector<std::optional<LinearSystem>> systems(cfg.systems.size());
    for (std::size_t s = 0; s < cfg.systems.size(); ++s) {
        const auto& src = cfg.systems[s];
        try {
            const std::uint64_t seed = Rng(cfg.seed).split(0x5157u + s)();
            const bool is_file = src.source.size() > 4 &&
                                 src.source.compare(src.source.size() - 4, 4, ".mtx") == 0;
            Matrix a = is_file ? load_matrix_market(src.source) : generate_matrix(src.source, seed);
            systems[s].emplace(make_consistent_system(std::move(a), seed ^ 0xb5u));
            ++result.systems_run;
        } catch (const Error& e) {
            result.skipped.push_back("skipping system '" + src.name + "': " + e.what());
        }
    }

    std::vector<Cell> cells;
    for (std::size_t s = 0; s < systems.size(); ++s) {
        if (!systems[s]) {
            continue;
        }
        for (std::size_t t = 0; t < cfg.strategies.size(); ++t) {
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                for (unsigned r = 0; r < cfg.repetitions; ++r) {
                    cells.push_back({s, t, m, r, 0.0, 0, false});
                }
            }
        }
    }

    // Wall-clock cells run one at a time so timers do not compete.
    const unsigned workers = cfg.metric == BenchMetric::WallClock
                                 ? 1u
                                 : std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cells.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::string> failures(cells.size());
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                run_cell(cfg, *systems[cells[i].system], cells[i]);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!failures[i].empty()) {
            throw Error("bench cell failed on system '" + cfg.systems[cells[i].system].name +
                        "': " + failures[i]);
        }
    }

    std::vector<std::string> columns;
    for (const auto& m : cfg.methods) {
        columns.push_back(bench_column_name(m));
    }
    for (std::size_t t = 0; t < cfg.strategies.size(); ++t) {
        BenchTable table;
        const SketchSpec spec = parse_sketch_spec(cfg.strategies[t]);
        table.strategy_token = sketch_token(spec);
        table.strategy_name = sketch_display_name(spec);
        table.columns = columns;
        for (std::size_t s = 0; s < systems.size(); ++s) {
            if (!systems[s]) {
                continue;
            }
            BenchRow row;
            row.matrix = cfg.systems[s].name;
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                double sum = 0.0;
                std::uint64_t advanced = 0;
                bool timed_out = false;
                for (const auto& c : cells) {
                    if (c.system == s && c.strategy == t && c.method == m) {
                        sum += c.value;
                        advanced += c.advanced;
                        timed_out = timed_out || c.timed_out;
                    }
                }
                row.values.push_back(timed_out ? kBenchSentinel : sum / cfg.repetitions);
                row.advanced_steps.push_back(advanced / cfg.repetitions);
            }
            table.rows.push_back(std::move(row));
        }
        result.tables.push_back(std::move(table));
    }
    return result;
}

} // namespace rpm
