#ifndef RPM_RPM_H
#define RPM_RPM_H

/* C interface to the rpm solver library. Every function returns a status
 * code; on failure rpm_last_error() describes the problem for the calling
 * thread. Strings returned through char** are owned by the caller and must be
 * released with rpm_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RPM_BUILDING_LIBRARY)
#    define RPM_API __declspec(dllexport)
#  else
#    define RPM_API __declspec(dllimport)
#  endif
#else
#  define RPM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct rpm_system rpm_system;

typedef enum rpm_status {
    RPM_OK = 0,
    RPM_ERR_INVALID_ARGUMENT = 1,
    RPM_ERR_DIMENSION = 2,
    RPM_ERR_PARSE = 3,
    RPM_ERR_IO = 4,
    RPM_ERR_INFEASIBLE = 5,
    RPM_ERR_DEGENERATE = 6,
    RPM_ERR_CAPACITY = 7,
    RPM_ERR_PRECONDITION = 8,
    RPM_ERR_PROTOCOL = 9,
    RPM_ERR_INCOMPLETE_LOG = 10,
    RPM_ERR_NO_SYSTEMS = 11,
    RPM_ERR_INTERNAL = 99
} rpm_status;

RPM_API const char* rpm_version(void);
RPM_API const char* rpm_status_name(rpm_status status);
/* Message for the most recent failure on this thread; empty after success. */
RPM_API const char* rpm_last_error(void);
RPM_API void rpm_string_free(char* s);

/* b = A x* with x* ~ N(0, I) drawn from seed. */
RPM_API rpm_status rpm_system_from_mtx(const char* path, uint64_t seed, rpm_system** out);
/* spec: identity:N | gaussian:N[:D] | svd:N:D:COND | banded:N:HBW */
RPM_API rpm_status rpm_system_generate(const char* spec, uint64_t seed, rpm_system** out);
/* a is n x d row-major; x_star may be NULL. */
RPM_API rpm_status rpm_system_from_dense(size_t n, size_t d, const double* a, const double* b,
                                         const double* x_star, rpm_system** out);
RPM_API void rpm_system_free(rpm_system* system);
RPM_API rpm_status rpm_system_dims(const rpm_system* system, size_t* n, size_t* d);
RPM_API rpm_status rpm_system_write_mtx(const rpm_system* system, const char* path);

typedef struct rpm_solve_options {
    const char* strategy;     /* sketch token, e.g. "gaussian", "countsketch:10" */
    const char* method;       /* "base", "partial:M", "complete" */
    double residual_factor;   /* stop at ||r|| <= factor ||r0||; <= 0 disables */
    uint64_t max_iterations;  /* 0 disables */
    double budget_seconds;    /* <= 0 disables */
    uint64_t check_every;     /* residual check period, >= 1 */
    uint64_t seed;
    int use_tigs;             /* nonzero: twice-iterated Gram-Schmidt for partial */
} rpm_solve_options;

RPM_API void rpm_solve_options_init(rpm_solve_options* options);

/* x_out (length d) may be NULL; report_json may be NULL. */
RPM_API rpm_status rpm_solve(const rpm_system* system, const rpm_solve_options* options,
                             double* x_out, char** report_json);

/* Runs the solver while logging stopping times of A'w_k against row(A)
 * (column space for column-action strategies) and the per-epoch rate bounds. */
RPM_API rpm_status rpm_diagnose(const rpm_system* system, const rpm_solve_options* options,
                                char** log_json);

typedef struct rpm_distributed_options {
    size_t nodes;             /* row blocks; index sets follow the nonzero support */
    size_t m;                 /* direction buffer capacity */
    int weighted_schedule;    /* nonzero: nodes drawn with probability ~ row count */
    const char* ledger_csv;   /* optional path for the communication ledger */
} rpm_distributed_options;

RPM_API void rpm_distributed_options_init(rpm_distributed_options* options);

/* options->strategy must be node-local: cyclic, uniform or gaussian. */
RPM_API rpm_status rpm_solve_distributed(const rpm_system* system, const rpm_solve_options* options,
                                         const rpm_distributed_options* dist, double* x_out,
                                         char** report_json);

typedef struct rpm_bench_options {
    const char* strategies;   /* comma-separated tokens */
    const char* methods;      /* comma-separated; NULL = base,partial:5,partial:10,complete */
    const char* systems;      /* comma-separated name=source; NULL = default grid */
    int full_scale;           /* default grid at 500 x 500 */
    int wall_clock;           /* metric: wall clock instead of advanced iterations */
    double factor;
    double budget_seconds;
    uint64_t iteration_budget;
    uint64_t seed;
    unsigned repetitions;
    unsigned threads;
    const char* out_dir;
    const char* tag;
} rpm_bench_options;

RPM_API void rpm_bench_options_init(rpm_bench_options* options);

/* Writes one CSV per strategy. RPM_ERR_NO_SYSTEMS when every system was
 * skipped; summary_json lists files and warnings either way. */
RPM_API rpm_status rpm_bench_run(const rpm_bench_options* options, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
