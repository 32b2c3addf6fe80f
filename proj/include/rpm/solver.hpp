#pragma once

#include "rpm/linear_system.hpp"
#include "rpm/sketch_source.hpp"
#include "rpm/sketch_vector.hpp"
#include "rpm/theory.hpp"
#include "rpm/types.hpp"

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rpm {

enum class GsKind { Mgs, Tigs };

using DirectionBuffer = std::deque<Vector>;

/// Sequential t_j = t_{j-1} - (z_j' t_{j-1}) z_j.
Vector modified_gram_schmidt(const Vector& q, const DirectionBuffer& z);

/// Two passes of classical Gram-Schmidt against all of z.
Vector twice_iterated_gram_schmidt(const Vector& q, const DirectionBuffer& z);

Vector gram_schmidt(GsKind kind, const Vector& q, const DirectionBuffer& z);

/// Left-to-right sum of a[i] * b[i]. The step kernels use this instead of
/// Eigen's vectorized dot so that results do not depend on how a sum is split
/// into blocks.
double ordered_dot(const Vector& a, const Vector& b);

struct NoMemory {};

struct FullProjector {
    Matrix s;
    std::uint64_t since_resymmetrize = 0;
};

struct PartialBuffer {
    DirectionBuffer z;
    std::size_t capacity = 0;
    GsKind gs = GsKind::Mgs;
};

struct SolverState {
    Vector x;
    std::variant<NoMemory, FullProjector, PartialBuffer> memory;
    std::uint64_t k = 0;
    std::uint64_t skip_count = 0;
    std::uint64_t advanced = 0;

    static SolverState base(Vector x0);
    static SolverState complete(Vector x0);
    static SolverState partial(Vector x0, std::size_t capacity, GsKind gs = GsKind::Mgs);
};

enum class StepKind { Advanced, SkippedDegenerate };

struct StepOutcome {
    StepKind kind = StepKind::SkippedDegenerate;
    double direction_norm = 0.0; // ||u_k||
    double alpha = 0.0;          // coefficient on u_k in the iterate update
};

/// Skip threshold: ||u|| <= 1e-12 * max(1, ||q||).
bool is_degenerate(double u_norm, double q_norm) noexcept;

/// x += A'w w'(b - Ax) / ||A'w||^2.
StepOutcome base_row_step(SolverState& state, const LinearSystem& system, const SketchVector& w);

/// x += w (Aw)'(b - Ax) / ||Aw||^2.
StepOutcome base_column_step(SolverState& state, const LinearSystem& system, const SketchVector& w);

/// Block step with sketch V (r x n). Requires FullProjector memory.
StepOutcome general_rpm_step(SolverState& state, const LinearSystem& system,
                             const Eigen::MatrixXd& v);

/// Rank-one step with the dense projector S. Requires FullProjector memory.
StepOutcome full_ortho_step(SolverState& state, const LinearSystem& system, const SketchVector& w);

/// Rank-one step against the last m stored directions. Requires PartialBuffer.
StepOutcome partial_ortho_step(SolverState& state, const LinearSystem& system, const SketchVector& w);

/// Dispatches on the state's memory kind.
StepOutcome row_step(SolverState& state, const LinearSystem& system, const SketchVector& w);

enum class MethodKind { Base, Partial, Complete };

struct Method {
    MethodKind kind = MethodKind::Base;
    std::size_t m = 0;

    static Method base() { return {MethodKind::Base, 0}; }
    static Method partial(std::size_t m) { return {MethodKind::Partial, m}; }
    static Method complete() { return {MethodKind::Complete, 0}; }
};

/// "base", "partial:M", "complete".
Method parse_method(std::string_view token);
std::string method_token(const Method& method);

struct TerminationCriteria {
    std::optional<double> residual_factor;
    std::optional<std::uint64_t> max_iterations;
    std::optional<std::chrono::nanoseconds> wall_clock_budget;
    std::uint64_t check_every = 10;

    void validate() const;
};

struct SolveOptions {
    std::uint64_t seed = 0;
    std::optional<Vector> x0;
    GsKind gs = GsKind::Mgs;
    bool record_trace = false;
    /// When set, stopping times of A'w_k against this subspace are logged.
    std::optional<SubspaceBasis> stopping_target;
};

struct ResidualSample {
    std::uint64_t iteration = 0;
    double norm = 0.0;
};

struct SolveTrace {
    std::vector<Vector> iterates;   // x_0, x_1, ..., x_K
    std::vector<Vector> directions; // A'w_k (row side) or A w_k (column side)
    std::vector<StepKind> steps;
};

struct SolveReport {
    std::string method;
    std::string strategy;
    Index n = 0;
    Index d = 0;
    std::uint64_t seed = 0;
    Vector x;
    std::uint64_t iterations = 0;
    std::uint64_t advanced_steps = 0;
    std::uint64_t skipped_steps = 0;
    double elapsed_seconds = 0.0;
    double initial_residual_norm = 0.0;
    double final_residual_norm = 0.0;
    double final_relative_residual = 0.0;
    bool converged = false;
    bool timed_out = false;
    std::vector<ResidualSample> residual_history;
    std::optional<StoppingTimeLog> stopping_log;
    std::optional<SolveTrace> trace;
};

std::string to_json(const SolveReport& report);

/// Runs `method` with sketches from `strategy` until the first criterion
/// fires. Hitting a budget before the residual criterion is a normal return
/// with timed_out set. Column-action strategies drive base_column_step under
/// Base and are mapped to the row sketch A f under Partial and Complete.
SolveReport solve(const LinearSystem& system, SketchSource& strategy, const Method& method,
                  const TerminationCriteria& criteria, const SolveOptions& options = {});

} // namespace rpm
