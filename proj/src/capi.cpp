#include "rpm/rpm.h"

#include "rpm/bench.hpp"
#include "rpm/distributed.hpp"
#include "rpm/error.hpp"
#include "rpm/linear_system.hpp"
#include "rpm/matrix_market.hpp"
#include "rpm/solver.hpp"
#include "rpm/theory.hpp"

#include <json.hpp>

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>
#include <unistd.h>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>

struct rpm_system {
    rpm::LinearSystem system;
};

namespace {

thread_local std::string g_last_error;

rpm_status status_of(const rpm::Error& e) {
    if (dynamic_cast<const rpm::DimensionError*>(&e)) return RPM_ERR_DIMENSION;
    if (dynamic_cast<const rpm::ParseError*>(&e)) return RPM_ERR_PARSE;
    if (dynamic_cast<const rpm::IoError*>(&e)) return RPM_ERR_IO;
    if (dynamic_cast<const rpm::InfeasibleError*>(&e)) return RPM_ERR_INFEASIBLE;
    if (dynamic_cast<const rpm::DegenerateError*>(&e)) return RPM_ERR_DEGENERATE;
    if (dynamic_cast<const rpm::CapacityError*>(&e)) return RPM_ERR_CAPACITY;
    if (dynamic_cast<const rpm::PreconditionError*>(&e)) return RPM_ERR_PRECONDITION;
    if (dynamic_cast<const rpm::ProtocolError*>(&e)) return RPM_ERR_PROTOCOL;
    if (dynamic_cast<const rpm::IncompleteLogError*>(&e)) return RPM_ERR_INCOMPLETE_LOG;
    if (dynamic_cast<const rpm::InvalidArgument*>(&e)) return RPM_ERR_INVALID_ARGUMENT;
    return RPM_ERR_INTERNAL;
}

template <class F>
rpm_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return RPM_OK;
    } catch (const rpm::Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return RPM_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RPM_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) {
        throw rpm::InvalidArgument(std::string(what) + " must not be null");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void publish(char** out, const std::string& s) {
    if (out != nullptr) {
        *out = dup_string(s);
    }
}

void copy_x(double* x_out, const rpm::Vector& x) {
    if (x_out != nullptr) {
        std::memcpy(x_out, x.data(), static_cast<std::size_t>(x.size()) * sizeof(double));
    }
}

rpm::TerminationCriteria criteria_of(const rpm_solve_options& o) {
    rpm::TerminationCriteria c;
    if (o.residual_factor > 0.0) {
        c.residual_factor = o.residual_factor;
    }
    if (o.max_iterations > 0) {
        c.max_iterations = o.max_iterations;
    }
    if (o.budget_seconds > 0.0) {
        c.wall_clock_budget = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::duration<double>(o.budget_seconds));
    }
    c.check_every = o.check_every;
    return c;
}

std::vector<std::string> split_commas(const char* s) {
    std::vector<std::string> out;
    if (s == nullptr) {
        return out;
    }
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

rpm::Vector reference_solution(const rpm::LinearSystem& sys) {
    return sys.x_star() ? *sys.x_star() : rpm::min_norm_solution(sys);
}

} // namespace

extern "C" {

const char* rpm_version(void) { return "1.0.0"; }

const char* rpm_status_name(rpm_status status) {
    switch (status) {
    case RPM_OK: return "ok";
    case RPM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RPM_ERR_DIMENSION: return "dimension";
    case RPM_ERR_PARSE: return "parse";
    case RPM_ERR_IO: return "io";
    case RPM_ERR_INFEASIBLE: return "infeasible";
    case RPM_ERR_DEGENERATE: return "degenerate";
    case RPM_ERR_CAPACITY: return "capacity";
    case RPM_ERR_PRECONDITION: return "precondition";
    case RPM_ERR_PROTOCOL: return "protocol";
    case RPM_ERR_INCOMPLETE_LOG: return "incomplete_log";
    case RPM_ERR_NO_SYSTEMS: return "no_systems";
    case RPM_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* rpm_last_error(void) { return g_last_error.c_str(); }

void rpm_string_free(char* s) { std::free(s); }

rpm_status rpm_system_from_mtx(const char* path, uint64_t seed, rpm_system** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new rpm_system{rpm::make_consistent_system(rpm::load_matrix_market(path), seed)};
    });
}

rpm_status rpm_system_generate(const char* spec, uint64_t seed, rpm_system** out) {
    return guarded([&] {
        require(spec, "spec");
        require(out, "out");
        *out = new rpm_system{rpm::make_consistent_system(rpm::generate_matrix(spec, seed), seed ^ 0xb5u)};
    });
}

rpm_status rpm_system_from_dense(size_t n, size_t d, const double* a, const double* b,
                                 const double* x_star, rpm_system** out) {
    return guarded([&] {
        require(a, "a");
        require(b, "b");
        require(out, "out");
        if (n == 0 || d == 0) {
            throw rpm::DimensionError("system dimensions must be positive");
        }
        const auto rows = static_cast<rpm::Index>(n);
        const auto cols = static_cast<rpm::Index>(d);
        rpm::Matrix m = Eigen::Map<const rpm::Matrix>(a, rows, cols);
        rpm::Vector rhs = Eigen::Map<const rpm::Vector>(b, rows);
        std::optional<rpm::Vector> xs;
        if (x_star != nullptr) {
            xs = Eigen::Map<const rpm::Vector>(x_star, cols);
        }
        *out = new rpm_system{rpm::LinearSystem(std::move(m), std::move(rhs), std::move(xs))};
    });
}

void rpm_system_free(rpm_system* system) { delete system; }

rpm_status rpm_system_dims(const rpm_system* system, size_t* n, size_t* d) {
    return guarded([&] {
        require(system, "system");
        if (n != nullptr) *n = static_cast<size_t>(system->system.rows());
        if (d != nullptr) *d = static_cast<size_t>(system->system.cols());
    });
}

rpm_status rpm_system_write_mtx(const rpm_system* system, const char* path) {
    return guarded([&] {
        require(system, "system");
        require(path, "path");
        rpm::write_matrix_market(std::filesystem::path(path), system->system.a());
    });
}

void rpm_solve_options_init(rpm_solve_options* options) {
    if (options == nullptr) {
        return;
    }
    options->strategy = "gaussian";
    options->method = "complete";
    options->residual_factor = 1e-6;
    options->max_iterations = 0;
    options->budget_seconds = 0.0;
    options->check_every = 10;
    options->seed = 0;
    options->use_tigs = 0;
}

rpm_status rpm_solve(const rpm_system* system, const rpm_solve_options* options, double* x_out,
                     char** report_json) {
    return guarded([&] {
        require(system, "system");
        require(options, "options");
        require(options->strategy, "options->strategy");
        require(options->method, "options->method");
        const auto& sys = system->system;
        rpm::SketchSource source(rpm::parse_sketch_spec(options->strategy), sys, options->seed);
        rpm::SolveOptions so;
        so.seed = options->seed;
        so.gs = options->use_tigs ? rpm::GsKind::Tigs : rpm::GsKind::Mgs;
        const auto report =
            rpm::solve(sys, source, rpm::parse_method(options->method), criteria_of(*options), so);
        copy_x(x_out, report.x);
        publish(report_json, rpm::to_json(report));
    });
}

rpm_status rpm_diagnose(const rpm_system* system, const rpm_solve_options* options, char** log_json) {
    return guarded([&] {
        require(system, "system");
        require(options, "options");
        require(options->strategy, "options->strategy");
        require(options->method, "options->method");
        const auto& sys = system->system;
        const rpm::SketchSpec spec = rpm::parse_sketch_spec(options->strategy);
        rpm::SketchSource source(spec, sys, options->seed);
        rpm::SolveOptions so;
        so.seed = options->seed;
        so.gs = options->use_tigs ? rpm::GsKind::Tigs : rpm::GsKind::Mgs;
        const bool column = rpm::is_column_action(spec.kind);
        const rpm::Method method = rpm::parse_method(options->method);
        so.stopping_target = column && method.kind == rpm::MethodKind::Base ? rpm::column_space(sys.a())
                                                                            : rpm::row_space(sys.a());
        const bool adaptive = rpm::is_adaptive(spec.kind);
        so.record_trace = adaptive;
        auto report = rpm::solve(sys, source, method, criteria_of(*options), so);
        rpm::StoppingTimeLog log = *report.stopping_log;
        rpm::attach_gammas(log);

        nlohmann::json j = nlohmann::json::parse(rpm::to_json(log));
        nlohmann::json bounds = nlohmann::json::array();
        for (const auto& epoch : log.epoch_directions) {
            try {
                const auto mb = rpm::meany_bound(epoch);
                bounds.push_back({{"log10_min_det", mb.log10_min_det}, {"rank", mb.rank}});
            } catch (const rpm::CapacityError&) {
                bounds.push_back(nullptr);
            }
        }
        j["meany"] = bounds;
        if (adaptive) {
            const rpm::SubspaceBasis rs = rpm::row_space(sys.a());
            const rpm::Vector xs = reference_solution(sys);
            std::vector<rpm::Vector> errors;
            for (const auto& x : report.trace->iterates) {
                errors.push_back(rs.project(x - xs));
            }
            const auto epochs = rpm::adaptive_stopping_times(errors);
            j["adaptive_taus"] = epochs.taus;
            j["adaptive_terminated"] = epochs.terminated;
        }
        report.stopping_log.reset();
        report.trace.reset();
        nlohmann::json rj = nlohmann::json::parse(rpm::to_json(report));
        rj.erase("x");
        j["report"] = rj;
        publish(log_json, j.dump());
    });
}

void rpm_distributed_options_init(rpm_distributed_options* options) {
    if (options == nullptr) {
        return;
    }
    options->nodes = 2;
    options->m = 2;
    options->weighted_schedule = 0;
    options->ledger_csv = nullptr;
}

rpm_status rpm_solve_distributed(const rpm_system* system, const rpm_solve_options* options,
                                 const rpm_distributed_options* dist, double* x_out, char** report_json) {
    return guarded([&] {
        require(system, "system");
        require(options, "options");
        require(dist, "dist");
        require(options->strategy, "options->strategy");
        const auto& sys = system->system;
        const rpm::Partition part = rpm::partition_by_support(sys.a(), static_cast<rpm::Index>(dist->nodes));
        rpm::DistributedOptions dopt;
        dopt.m = dist->m;
        dopt.sketch = rpm::parse_local_sketch(options->strategy);
        dopt.schedule = dist->weighted_schedule ? rpm::NodeSchedule::WeightedRandom
                                                : rpm::NodeSchedule::RoundRobin;
        dopt.seed = options->seed;
        const auto result = rpm::sim_solve(sys, part, criteria_of(*options), dopt);
        if (dist->ledger_csv != nullptr) {
            result.ledger.write_csv(dist->ledger_csv);
        }
        nlohmann::json j = nlohmann::json::parse(rpm::to_json(result.report));
        const auto stats = rpm::overlap_stats(part);
        std::uint64_t max_total = 0;
        std::uint64_t values = 0;
        std::uint64_t extra = 0;
        for (const auto& e : result.ledger.entries) {
            max_total = std::max(max_total, e.total());
            values += e.total();
            extra += e.extra_sync;
        }
        j["nodes"] = part.p;
        j["Q"] = stats.q;
        j["F"] = stats.f;
        j["comm_values_total"] = values;
        j["comm_values_max_per_iteration"] = max_total;
        j["comm_bound_per_iteration"] = rpm::comm_cost_bound(part, dist->m);
        j["extra_sync_total"] = extra;
        copy_x(x_out, result.report.x);
        publish(report_json, j.dump());
    });
}

void rpm_bench_options_init(rpm_bench_options* options) {
    if (options == nullptr) {
        return;
    }
    options->strategies = "countsketch:10";
    options->methods = nullptr;
    options->systems = nullptr;
    options->full_scale = 0;
    options->wall_clock = 0;
    options->factor = 0.1;
    options->budget_seconds = 3.0;
    options->iteration_budget = 200000;
    options->seed = 0;
    options->repetitions = 1;
    options->threads = 1;
    options->out_dir = ".";
    options->tag = "Synthetic";
}

rpm_status rpm_bench_run(const rpm_bench_options* options, char** summary_json) {
    bool no_systems = false;
    const rpm_status st = guarded([&] {
        require(options, "options");
        rpm::BenchConfig cfg;
        cfg.strategies = split_commas(options->strategies);
        if (options->methods != nullptr) {
            cfg.methods.clear();
            for (const auto& m : split_commas(options->methods)) {
                cfg.methods.push_back(rpm::parse_method(m));
            }
        }
        if (options->systems != nullptr) {
            for (const auto& item : split_commas(options->systems)) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) {
                    cfg.systems.push_back({item, item});
                } else {
                    cfg.systems.push_back({item.substr(0, eq), item.substr(eq + 1)});
                }
            }
        } else {
            cfg.systems = rpm::default_bench_systems(options->full_scale != 0);
        }
        cfg.metric = options->wall_clock ? rpm::BenchMetric::WallClock : rpm::BenchMetric::AdvancedIterations;
        cfg.improvement_factor = options->factor;
        cfg.time_budget = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::duration<double>(options->budget_seconds));
        cfg.iteration_budget = options->iteration_budget;
        cfg.seed = options->seed;
        cfg.repetitions = options->repetitions;
        cfg.threads = options->threads;

        const auto result = rpm::run_grid(cfg);
        nlohmann::json j;
        j["skipped"] = result.skipped;
        j["files"] = nlohmann::json::array();
        j["metric"] = options->wall_clock ? "wall_clock" : "advanced_iterations";
        if (result.systems_run == 0) {
            no_systems = true;
            publish(summary_json, j.dump());
            return;
        }
        const std::filesystem::path dir = options->out_dir != nullptr ? options->out_dir : ".";
        const std::string tag = options->tag != nullptr ? options->tag : "Synthetic";
        for (const auto& table : result.tables) {
            const auto path = dir / rpm::bench_file_name(tag, table.strategy_name);
            rpm::emit_csv(table.rows, path, table.columns);
            j["files"].push_back(path.string());
        }
        if (options->wall_clock) {
            // Timings are host specific; record where they came from.
            char host[256] = {0};
            gethostname(host, sizeof host - 1);
            nlohmann::json meta{{"host", host},
                                {"hardware_threads", std::thread::hardware_concurrency()},
                                {"compiler", __VERSION__},
                                {"budget_seconds", options->budget_seconds},
                                {"timestamp", static_cast<long long>(std::time(nullptr))}};
            const auto path = dir / (tag + "_host.json");
            std::ofstream(path) << meta.dump(2) << '\n';
            j["host_metadata"] = path.string();
        }
        publish(summary_json, j.dump());
    });
    if (st == RPM_OK && no_systems) {
        g_last_error = "every benchmark system was skipped";
        return RPM_ERR_NO_SYSTEMS;
    }
    return st;
}

} // extern "C"
