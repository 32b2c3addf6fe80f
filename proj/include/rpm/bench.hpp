#pragma once

#include "rpm/solver.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rpm {

enum class BenchMetric { AdvancedIterations, WallClock };

/// A named system: `source` is a generator token (see generate_matrix) or a
/// path ending in ".mtx". b is always A x* with x* ~ N(0, I).
struct BenchSystem {
    std::string name;
    std::string source;
};

struct BenchConfig {
    std::vector<BenchSystem> systems;
    std::vector<std::string> strategies;
    std::vector<Method> methods{Method::base(), Method::partial(5), Method::partial(10),
                                Method::complete()};
    double improvement_factor = 0.1;
    std::chrono::nanoseconds time_budget = std::chrono::seconds(3);
    std::uint64_t iteration_budget = 200000;
    BenchMetric metric = BenchMetric::AdvancedIterations;
    std::uint64_t seed = 0;
    unsigned repetitions = 1;
    unsigned threads = 1;

    void validate() const;
};

/// Ten prescribed-SVD systems with condition numbers spaced geometrically in
/// [1e3, 1e8]; 200 x 200 by default, 500 x 500 at full scale.
std::vector<BenchSystem> default_bench_systems(bool full_scale);

inline constexpr double kBenchSentinel = 1.0e99;

struct BenchRow {
    std::string matrix;
    std::vector<double> values; // kBenchSentinel on timeout
    std::vector<std::uint64_t> advanced_steps;
};

struct BenchTable {
    std::string strategy_token;
    std::string strategy_name; // used in the file name
    std::vector<std::string> columns;
    std::vector<BenchRow> rows;
};

struct BenchResult {
    std::vector<BenchTable> tables;
    std::vector<std::string> skipped; // warnings for unresolvable systems
    std::size_t systems_run = 0;
};

BenchResult run_grid(const BenchConfig& cfg);

/// "Base", "PartFive", "PartTen", "Comp", ...
std::string bench_column_name(const Method& method);

/// Scientific notation with three significant digits; the sentinel prints as
/// "1.0e99".
std::string format_bench_value(double value);

/// Writes `Matrix,<columns>` and one line per row through a temporary file
/// renamed into place.
void emit_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path,
              const std::vector<std::string>& columns = {"Base", "PartFive", "PartTen", "Comp"});

/// "<tag>_<Strategy>_10x-Improve-Time.csv".
std::string bench_file_name(const std::string& tag, const std::string& strategy_name);

} // namespace rpm
