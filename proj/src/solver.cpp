#include "rpm/solver.hpp"

#include "rpm/error.hpp"

#include <json.hpp>

#include <cmath>

namespace rpm {

double ordered_dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

namespace {

void axpy(Vector& y, double alpha, const Vector& x) {
    for (Index i = 0; i < y.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

void check_buffer(const Vector& q, const DirectionBuffer& z) {
    for (const auto& v : z) {
        if (v.size() != q.size()) {
            throw DimensionError("Gram-Schmidt: stored direction length differs from q");
        }
    }
}

void check_row_sketch(const LinearSystem& system, const SketchVector& w) {
    if (w.dim() != system.rows()) {
        throw DimensionError("row step: sketch length " + std::to_string(w.dim()) +
                             " does not match n = " + std::to_string(system.rows()));
    }
}

// w'b - q'x, the sketched residual w'(b - Ax) without forming Ax.
double sketched_residual(const LinearSystem& system, const SketchVector& w, const Vector& q,
                         const Vector& x) {
    return w.dot(system.b()) - ordered_dot(q, x);
}

} // namespace

Vector modified_gram_schmidt(const Vector& q, const DirectionBuffer& z) {
    check_buffer(q, z);
    Vector t = q;
    for (const auto& v : z) {
        axpy(t, -ordered_dot(v, t), v);
    }
    return t;
}

Vector twice_iterated_gram_schmidt(const Vector& q, const DirectionBuffer& z) {
    check_buffer(q, z);
    Vector t = q;
    std::vector<double> c(z.size());
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < z.size(); ++j) {
            c[j] = ordered_dot(z[j], t);
        }
        for (std::size_t j = 0; j < z.size(); ++j) {
            axpy(t, -c[j], z[j]);
        }
    }
    return t;
}

Vector gram_schmidt(GsKind kind, const Vector& q, const DirectionBuffer& z) {
    return kind == GsKind::Tigs ? twice_iterated_gram_schmidt(q, z) : modified_gram_schmidt(q, z);
}

SolverState SolverState::base(Vector x0) {
    SolverState s;
    s.x = std::move(x0);
    s.memory = NoMemory{};
    return s;
}

SolverState SolverState::complete(Vector x0) {
    SolverState s;
    const Index d = x0.size();
    s.x = std::move(x0);
    s.memory = FullProjector{Matrix::Identity(d, d), 0};
    return s;
}

SolverState SolverState::partial(Vector x0, std::size_t capacity, GsKind gs) {
    SolverState s;
    s.x = std::move(x0);
    s.memory = PartialBuffer{{}, capacity, gs};
    return s;
}

bool is_degenerate(double u_norm, double q_norm) noexcept {
    return !(u_norm > 1e-12 * std::max(1.0, q_norm));
}

StepOutcome base_row_step(SolverState& state, const LinearSystem& system, const SketchVector& w) {
    check_row_sketch(system, w);
    if (state.x.size() != system.cols()) {
        throw DimensionError("row step: iterate length does not match d");
    }
    ++state.k;
    const Vector q = w.transpose_apply(system.a());
    const double q_norm = std::sqrt(ordered_dot(q, q));
    StepOutcome out;
    out.direction_norm = q_norm;
    if (is_degenerate(q_norm, q_norm)) {
        ++state.skip_count;
        return out;
    }
    const double gamma = ordered_dot(q, q);
    out.alpha = sketched_residual(system, w, q, state.x) / gamma;
    axpy(state.x, out.alpha, q);
    out.kind = StepKind::Advanced;
    ++state.advanced;
    return out;
}

StepOutcome base_column_step(SolverState& state, const LinearSystem& system, const SketchVector& w) {
    if (w.dim() != system.cols()) {
        throw DimensionError("column step: sketch length " + std::to_string(w.dim()) +
                             " does not match d = " + std::to_string(system.cols()));
    }
    if (state.x.size() != system.cols()) {
        throw DimensionError("column step: iterate length does not match d");
    }
    ++state.k;
    const Vector v = w.apply(system.a());
    const double v_norm = std::sqrt(ordered_dot(v, v));
    const Vector wd = w.to_dense();
    StepOutcome out;
    out.direction_norm = v_norm;
    if (is_degenerate(v_norm, std::sqrt(ordered_dot(wd, wd)))) {
        ++state.skip_count;
        return out;
    }
    const Vector r = residual(system, state.x);
    out.alpha = ordered_dot(v, r) / ordered_dot(v, v);
    const auto& idx = w.indices();
    const auto& val = w.values();
    for (std::size_t t = 0; t < idx.size(); ++t) {
        state.x[idx[t]] += out.alpha * val[t];
    }
    out.kind = StepKind::Advanced;
    ++state.advanced;
    return out;
}

namespace {

FullProjector& projector_of(SolverState& state, const char* op) {
    auto* p = std::get_if<FullProjector>(&state.memory);
    if (p == nullptr) {
        throw PreconditionError(std::string(op) + " requires full projector memory");
    }
    return *p;
}

void upkeep(FullProjector& p) {
    if (++p.since_resymmetrize >= 50) {
        p.s = 0.5 * (p.s + p.s.transpose()).eval();
        p.since_resymmetrize = 0;
    }
}

} // namespace

StepOutcome general_rpm_step(SolverState& state, const LinearSystem& system,
                             const Eigen::MatrixXd& v) {
    if (v.cols() != system.rows()) {
        throw DimensionError("general step: sketch must have n columns");
    }
    if (state.x.size() != system.cols()) {
        throw DimensionError("general step: iterate length does not match d");
    }
    FullProjector& p = projector_of(state, "general_rpm_step");
    ++state.k;
    const Eigen::MatrixXd y = system.a().transpose() * v.transpose(); // d x r
    const Eigen::MatrixXd sy = p.s * y;
    StepOutcome out;
    out.direction_norm = sy.norm();
    if (is_degenerate(out.direction_norm, y.norm())) {
        ++state.skip_count;
        return out;
    }
    const Eigen::MatrixXd g = y.transpose() * sy;
    const Matrix g_pinv = pseudo_inverse(Matrix(g), 1e-12);
    const Vector sketched = v * residual(system, state.x);
    state.x += sy * (g_pinv * sketched);
    p.s -= Matrix(sy * g_pinv * sy.transpose());
    upkeep(p);
    out.kind = StepKind::Advanced;
    out.alpha = 1.0;
    ++state.advanced;
    return out;
}

StepOutcome full_ortho_step(SolverState& state, const LinearSystem& system, const SketchVector& w) {
    check_row_sketch(system, w);
    if (state.x.size() != system.cols()) {
        throw DimensionError("row step: iterate length does not match d");
    }
    FullProjector& p = projector_of(state, "full_ortho_step");
    ++state.k;
    const Vector q = w.transpose_apply(system.a());
    const Vector u = p.s * q;
    StepOutcome out;
    out.direction_norm = std::sqrt(ordered_dot(u, u));
    if (is_degenerate(out.direction_norm, std::sqrt(ordered_dot(q, q)))) {
        ++state.skip_count;
        return out;
    }
    const double gamma = ordered_dot(u, q);
    out.alpha = sketched_residual(system, w, q, state.x) / gamma;
    axpy(state.x, out.alpha, u);
    // (I - u q'/gamma) S equals S - u u'/gamma for symmetric S; the latter
    // keeps S exactly symmetric.
    p.s.noalias() -= (u / gamma) * u.transpose();
    upkeep(p);
    out.kind = StepKind::Advanced;
    ++state.advanced;
    return out;
}

StepOutcome partial_ortho_step(SolverState& state, const LinearSystem& system, const SketchVector& w) {
    check_row_sketch(system, w);
    if (state.x.size() != system.cols()) {
        throw DimensionError("row step: iterate length does not match d");
    }
    auto* buf = std::get_if<PartialBuffer>(&state.memory);
    if (buf == nullptr) {
        throw PreconditionError("partial_ortho_step requires partial buffer memory");
    }
    ++state.k;
    const Vector q = w.transpose_apply(system.a());
    const Vector u = gram_schmidt(buf->gs, q, buf->z);
    StepOutcome out;
    out.direction_norm = std::sqrt(ordered_dot(u, u));
    if (is_degenerate(out.direction_norm, std::sqrt(ordered_dot(q, q)))) {
        ++state.skip_count;
        return out;
    }
    const double gamma = ordered_dot(u, q);
    out.alpha = sketched_residual(system, w, q, state.x) / gamma;
    axpy(state.x, out.alpha, u);
    if (buf->capacity > 0) {
        if (buf->z.size() == buf->capacity) {
            buf->z.pop_front();
        }
        buf->z.push_back(u / out.direction_norm);
    }
    out.kind = StepKind::Advanced;
    ++state.advanced;
    return out;
}

StepOutcome row_step(SolverState& state, const LinearSystem& system, const SketchVector& w) {
    if (std::holds_alternative<FullProjector>(state.memory)) {
        return full_ortho_step(state, system, w);
    }
    if (std::holds_alternative<PartialBuffer>(state.memory)) {
        return partial_ortho_step(state, system, w);
    }
    return base_row_step(state, system, w);
}

Method parse_method(std::string_view token) {
    if (token == "base") {
        return Method::base();
    }
    if (token == "complete") {
        return Method::complete();
    }
    constexpr std::string_view prefix = "partial:";
    if (token.substr(0, prefix.size()) == prefix) {
        const std::string digits(token.substr(prefix.size()));
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos ||
            digits.size() > 9) {
            throw InvalidArgument("bad memory size in method '" + std::string(token) + "'");
        }
        return Method::partial(static_cast<std::size_t>(std::stoul(digits)));
    }
    throw InvalidArgument("unknown method '" + std::string(token) +
                          "' (expected base, partial:M or complete)");
}

std::string method_token(const Method& method) {
    switch (method.kind) {
    case MethodKind::Base:
        return "base";
    case MethodKind::Partial:
        return "partial:" + std::to_string(method.m);
    case MethodKind::Complete:
        return "complete";
    }
    return "unknown";
}

void TerminationCriteria::validate() const {
    if (!residual_factor && !max_iterations && !wall_clock_budget) {
        throw InvalidArgument("termination criteria: set at least one bound");
    }
    if (residual_factor && !(*residual_factor > 0.0)) {
        throw InvalidArgument("termination criteria: residual factor must be positive");
    }
    if (check_every < 1) {
        throw InvalidArgument("termination criteria: check_every must be >= 1");
    }
    if (wall_clock_budget && wall_clock_budget->count() < 0) {
        throw InvalidArgument("termination criteria: negative wall-clock budget");
    }
}

std::string to_json(const SolveReport& report) {
    nlohmann::json j;
    j["method"] = report.method;
    j["strategy"] = report.strategy;
    j["n"] = report.n;
    j["d"] = report.d;
    j["seed"] = report.seed;
    j["iterations"] = report.iterations;
    j["advanced_steps"] = report.advanced_steps;
    j["skipped_steps"] = report.skipped_steps;
    j["elapsed_seconds"] = report.elapsed_seconds;
    j["initial_residual_norm"] = report.initial_residual_norm;
    j["final_residual_norm"] = report.final_residual_norm;
    j["final_relative_residual"] = report.final_relative_residual;
    j["converged"] = report.converged;
    j["timed_out"] = report.timed_out;
    j["x"] = std::vector<double>(report.x.data(), report.x.data() + report.x.size());
    if (report.stopping_log) {
        j["stopping_log"] = nlohmann::json::parse(to_json(*report.stopping_log));
    }
    return j.dump();
}

SolveReport solve(const LinearSystem& system, SketchSource& strategy, const Method& method,
                  const TerminationCriteria& criteria, const SolveOptions& options) {
    criteria.validate();
    const Index d = system.cols();
    Vector x0 = options.x0 ? *options.x0 : Vector::Zero(d);
    if (x0.size() != d) {
        throw DimensionError("solve: x0 length does not match d");
    }

    SolverState state;
    switch (method.kind) {
    case MethodKind::Base:
        state = SolverState::base(std::move(x0));
        break;
    case MethodKind::Partial:
        state = SolverState::partial(std::move(x0), method.m, options.gs);
        break;
    case MethodKind::Complete:
        state = SolverState::complete(std::move(x0));
        break;
    }

    const bool column = strategy.column_action();
    const bool column_base = column && method.kind == MethodKind::Base;

    SolveReport report;
    report.method = method_token(method);
    report.strategy = sketch_token(strategy.spec());
    report.n = system.rows();
    report.d = d;
    report.seed = options.seed;

    std::optional<StoppingTimeTracker> tracker;
    if (options.stopping_target) {
        tracker.emplace(*options.stopping_target);
    }
    if (options.record_trace) {
        report.trace.emplace();
        report.trace->iterates.push_back(state.x);
    }

    const auto start = std::chrono::steady_clock::now();
    auto out_of_time = [&] {
        return criteria.wall_clock_budget &&
               std::chrono::steady_clock::now() - start >= *criteria.wall_clock_budget;
    };

    const double r0 = residual(system, state.x).norm();
    report.initial_residual_norm = r0;
    report.residual_history.push_back({0, r0});
    auto satisfied = [&](double rn) {
        return criteria.residual_factor && rn <= *criteria.residual_factor * r0;
    };

    bool converged = satisfied(r0);
    bool budget_hit = false;
    while (!converged) {
        if ((criteria.max_iterations && state.k >= *criteria.max_iterations) || out_of_time()) {
            budget_hit = true;
            break;
        }
        const SketchContext ctx{system, state.x, state.k};
        const SketchVector w = strategy.next(ctx);

        StepOutcome outcome;
        std::optional<Vector> direction;
        if (column_base) {
            outcome = base_column_step(state, system, w);
            if (tracker || report.trace) {
                direction = w.apply(system.a());
            }
        } else if (column) {
            const SketchVector row_sketch = SketchVector::from_dense(w.apply(system.a()));
            outcome = row_step(state, system, row_sketch);
            if (tracker || report.trace) {
                direction = row_sketch.transpose_apply(system.a());
            }
        } else {
            outcome = row_step(state, system, w);
            if (tracker || report.trace) {
                direction = w.transpose_apply(system.a());
            }
        }

        if (tracker) {
            tracker->observe(*direction);
        }
        if (report.trace) {
            report.trace->iterates.push_back(state.x);
            report.trace->directions.push_back(std::move(*direction));
            report.trace->steps.push_back(outcome.kind);
        }
        if (state.k % criteria.check_every == 0) {
            const double rn = residual(system, state.x).norm();
            report.residual_history.push_back({state.k, rn});
            converged = satisfied(rn);
        }
    }

    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.final_residual_norm = residual(system, state.x).norm();
    report.final_relative_residual = r0 > 0.0 ? report.final_residual_norm / r0 : 0.0;
    if (budget_hit && satisfied(report.final_residual_norm)) {
        converged = true;
    }
    if (report.residual_history.back().iteration != state.k) {
        report.residual_history.push_back({state.k, report.final_residual_norm});
    }
    report.converged = converged;
    report.timed_out = !converged;
    report.iterations = state.k;
    report.advanced_steps = state.advanced;
    report.skipped_steps = state.skip_count;
    report.x = std::move(state.x);
    if (tracker) {
        report.stopping_log = tracker->log();
    }
    return report;
}

} // namespace rpm
