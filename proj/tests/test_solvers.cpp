#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpm/error.hpp"
#include "rpm/linear_system.hpp"
#include "rpm/solver.hpp"

#include <json.hpp>

using namespace rpm;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Index>(v.size()));
    Index i = 0;
    for (double e : v) x(i++) = e;
    return x;
}

Matrix mat(Index n, Index d, std::initializer_list<double> v) {
    Matrix a(n, d);
    auto it = v.begin();
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) a(i, j) = *it++;
    return a;
}

SketchVector e(Index n, Index i) { return SketchVector::basis(n, i); }

// Dense orthogonal projector onto the complement of span(cols), from an SVD.
Eigen::MatrixXd complement_projector(const Eigen::MatrixXd& cols) {
    const Index d = cols.rows();
    if (cols.cols() == 0) return Eigen::MatrixXd::Identity(d, d);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cols, Eigen::ComputeThinU);
    const Index r = svd.rank();
    const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
    return Eigen::MatrixXd::Identity(d, d) - u * u.transpose();
}

} // namespace

TEST_CASE("base row step") {
    const LinearSystem id(Matrix::Identity(2, 2), vec({1, 2}));
    auto st = SolverState::base(Vector::Zero(2));
    CHECK(base_row_step(st, id, e(2, 0)).kind == StepKind::Advanced);
    CHECK(st.x == vec({1, 0}));

    const LinearSystem s(mat(2, 2, {1, 0, 1, 1}), vec({1, 3}));
    auto t = SolverState::base(Vector::Zero(2));
    base_row_step(t, s, e(2, 1));
    CHECK(t.x(0) == doctest::Approx(1.5));
    CHECK(t.x(1) == doctest::Approx(1.5));

    const LinearSystem z(mat(2, 2, {1, 0, 0, 0}), vec({1, 0}));
    auto u = SolverState::base(vec({3, 4}));
    CHECK(base_row_step(u, z, e(2, 1)).kind == StepKind::SkippedDegenerate);
    CHECK(u.x == vec({3, 4}));
    CHECK(u.skip_count == 1);
}

TEST_CASE("base column step") {
    const LinearSystem id(Matrix::Identity(2, 2), vec({1, 2}));
    auto st = SolverState::base(Vector::Zero(2));
    base_column_step(st, id, e(2, 1));
    CHECK(st.x == vec({0, 2}));

    const LinearSystem col(mat(2, 1, {1, 1}), vec({1, 1}));
    auto t = SolverState::base(Vector::Zero(1));
    base_column_step(t, col, e(1, 0));
    CHECK(t.x(0) == doctest::Approx(1.0));

    auto u = SolverState::base(Vector::Zero(2));
    CHECK(base_column_step(u, id, SketchVector(2)).kind == StepKind::SkippedDegenerate);
}

TEST_CASE("block step") {
    const auto sys = make_consistent_system(gen_gaussian(6, 4, 1), 2);
    auto st = SolverState::complete(Vector::Zero(4));
    general_rpm_step(st, sys, Eigen::MatrixXd::Identity(6, 6));
    const Vector dense = sys.a().colPivHouseholderQr().solve(sys.b());
    CHECK((st.x - dense).norm() <= 1e-8 * dense.norm());

    // A row selector behaves like the rank-one step.
    auto a = SolverState::complete(Vector::Zero(4));
    auto b = SolverState::complete(Vector::Zero(4));
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(1, 6);
    sel(0, 3) = 1.0;
    general_rpm_step(a, sys, sel);
    full_ortho_step(b, sys, e(6, 3));
    CHECK((a.x - b.x).norm() <= 1e-12);
    CHECK((std::get<FullProjector>(a.memory).s - std::get<FullProjector>(b.memory).s).norm() <= 1e-12);

    auto z = SolverState::complete(vec({1, 2, 3, 4}));
    general_rpm_step(z, sys, Eigen::MatrixXd::Zero(2, 6));
    CHECK(z.x == vec({1, 2, 3, 4}));
    CHECK(std::get<FullProjector>(z.memory).s == Matrix::Identity(4, 4));

    auto wrong = SolverState::base(Vector::Zero(4));
    CHECK_THROWS_AS(general_rpm_step(wrong, sys, sel), PreconditionError);
}

TEST_CASE("full orthogonalization step") {
    const auto sys = make_consistent_system(gen_gaussian(5, 5, 3), 4);
    auto full = SolverState::complete(Vector::Zero(5));
    auto base = SolverState::base(Vector::Zero(5));
    full_ortho_step(full, sys, e(5, 2));
    base_row_step(base, sys, e(5, 2));
    CHECK((full.x - base.x).norm() <= 1e-14);

    const LinearSystem id(Matrix::Identity(2, 2), vec({1, 2}));
    auto st = SolverState::complete(Vector::Zero(2));
    full_ortho_step(st, id, e(2, 0));
    full_ortho_step(st, id, e(2, 1));
    CHECK(st.x == vec({1, 2}));
    CHECK(std::get<FullProjector>(st.memory).s.norm() <= 1e-15);
    CHECK(full_ortho_step(st, id, e(2, 0)).kind == StepKind::SkippedDegenerate);
    CHECK(st.x == vec({1, 2}));
}

TEST_CASE("gram-schmidt kernels") {
    const Vector q = vec({1, 1});
    CHECK(modified_gram_schmidt(q, {}) == q);
    CHECK(twice_iterated_gram_schmidt(q, {}) == q);
    const Vector r = modified_gram_schmidt(q, {vec({1, 0})});
    CHECK(r.isApprox(vec({0, 1})));

    Rng rng(3);
    Eigen::MatrixXd g(20, 5);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Eigen::MatrixXd z = g.householderQr().householderQ() * Eigen::MatrixXd::Identity(20, 5);
    DirectionBuffer buf;
    for (Index j = 0; j < 5; ++j) buf.push_back(z.col(j));

    const Vector inside = z * vec({1, -2, 0.5, 3, 1});
    CHECK(modified_gram_schmidt(inside, buf).norm() <= 1e-8 * inside.norm());
    CHECK(twice_iterated_gram_schmidt(inside, buf).norm() <= 1e-8 * inside.norm());

    Vector rnd(20);
    for (Index i = 0; i < 20; ++i) rnd(i) = rng.normal();
    const Vector perp = rnd - z * (z.transpose() * rnd);
    CHECK((twice_iterated_gram_schmidt(perp, buf) - perp).norm() <= 1e-12 * perp.norm());

    const Vector oracle = (Eigen::MatrixXd::Identity(20, 20) - z * z.transpose()) * rnd;
    CHECK((twice_iterated_gram_schmidt(rnd, buf) - oracle).norm() <= 1e-10);
    CHECK((modified_gram_schmidt(rnd, buf) - oracle).norm() <= 1e-10);
}

TEST_CASE("partial orthogonalization") {
    const auto sys = make_consistent_system(gen_gaussian(10, 10, 5), 6);
    Rng pick(2);
    std::vector<Index> rows;
    for (int k = 0; k < 60; ++k) rows.push_back(static_cast<Index>(pick.below(10)));

    // m = 0 matches the base step bit for bit.
    auto p0 = SolverState::partial(Vector::Zero(10), 0);
    auto b0 = SolverState::base(Vector::Zero(10));
    for (Index r : rows) {
        partial_ortho_step(p0, sys, e(10, r));
        base_row_step(b0, sys, e(10, r));
        CHECK((p0.x - b0.x).cwiseAbs().maxCoeff() <= 1e-14);
    }

    // m >= d never evicts, so it reproduces the full projector.
    auto pm = SolverState::partial(Vector::Zero(10), 10);
    auto cm = SolverState::complete(Vector::Zero(10));
    for (Index i = 0; i < 10; ++i) {
        partial_ortho_step(pm, sys, e(10, (3 * i) % 10));
        full_ortho_step(cm, sys, e(10, (3 * i) % 10));
        CHECK((pm.x - cm.x).norm() <= 1e-8);
    }

    // FIFO eviction: the buffer keeps the two newest directions.
    auto f = SolverState::partial(Vector::Zero(10), 2);
    for (Index i = 0; i < 3; ++i) partial_ortho_step(f, sys, e(10, i));
    const auto& buf = std::get<PartialBuffer>(f.memory).z;
    CHECK(buf.size() == 2);
    const Vector a2 = sys.a().row(2).transpose();
    CHECK(std::abs(buf.back().dot(a2) / a2.norm()) > 0.5);
    CHECK(std::abs(buf.front().dot(a2) / a2.norm()) < 1.0);

    // Stored directions are orthonormal.
    CHECK(std::abs(buf.front().norm() - 1.0) <= 1e-12);
    CHECK(std::abs(buf.front().dot(buf.back())) <= 1e-12);
}

TEST_CASE("solve driver") {
    const auto id = make_consistent_system(Matrix::Identity(5, 5), 3);
    SketchSource cyc(parse_sketch_spec("cyclic"), id, 1);
    TerminationCriteria c;
    c.residual_factor = 1e-8;
    c.check_every = 1;
    const auto r = solve(id, cyc, Method::base(), c);
    CHECK(r.converged);
    CHECK(r.advanced_steps == 5);

    const auto g = make_consistent_system(gen_gaussian(20, 20, 7), 8);
    SketchSource gs(parse_sketch_spec("gaussian"), g, 2);
    const auto rc = solve(g, gs, Method::complete(), c);
    CHECK(rc.advanced_steps == 20);
    CHECK(rc.final_residual_norm <= 1e-8 * rc.initial_residual_norm);
    const Vector dense = g.a().colPivHouseholderQr().solve(g.b());
    CHECK((rc.x - dense).norm() <= 1e-6 * dense.norm());

    TerminationCriteria zero;
    zero.max_iterations = 0;
    zero.residual_factor = 0.5;
    SolveOptions o;
    o.x0 = vec({1, 1, 1, 1, 1});
    SketchSource cyc2(parse_sketch_spec("cyclic"), id, 1);
    const auto rz = solve(id, cyc2, Method::base(), zero, o);
    CHECK(rz.timed_out);
    CHECK_FALSE(rz.converged);
    CHECK(rz.x == *o.x0);

    TerminationCriteria none;
    CHECK_THROWS_AS(none.validate(), InvalidArgument);
}

TEST_CASE("column-action strategy under every method") {
    const auto sys = make_consistent_system(gen_gaussian(8, 8, 1), 2);
    TerminationCriteria c;
    c.residual_factor = 1e-6;
    c.max_iterations = 20000;
    c.check_every = 1;
    for (const auto& m : {Method::base(), Method::partial(3), Method::complete()}) {
        SketchSource col(parse_sketch_spec("colcyclic"), sys, 4);
        const auto r = solve(sys, col, m, c);
        CHECK(r.converged);
    }
}

TEST_CASE("method tokens and report json") {
    CHECK(parse_method("partial:5").m == 5);
    CHECK(parse_method("complete").kind == MethodKind::Complete);
    CHECK(method_token(Method::partial(10)) == "partial:10");
    CHECK_THROWS_AS(parse_method("partial"), InvalidArgument);
    CHECK_THROWS_AS(parse_method("full"), InvalidArgument);

    const auto sys = make_consistent_system(Matrix::Identity(3, 3), 3);
    SketchSource cyc(parse_sketch_spec("cyclic"), sys, 1);
    TerminationCriteria c;
    c.residual_factor = 1e-8;
    c.check_every = 1;
    const auto j = nlohmann::json::parse(to_json(solve(sys, cyc, Method::base(), c)));
    CHECK(j["advanced_steps"] == 3);
    CHECK(j["method"] == "base");
    CHECK(j["x"].size() == 3);
}

TEST_CASE("projector stays idempotent and annihilates past directions") {
    const auto sys = make_consistent_system(gen_gaussian(12, 8, 9), 1);
    SketchSource gs(parse_sketch_spec("gaussian"), sys, 5);
    auto st = SolverState::complete(Vector::Zero(8));
    Eigen::MatrixXd seen(8, 0);
    const Vector x = Vector::Zero(8);
    for (int k = 0; k < 7; ++k) {
        const SketchVector w = gs.next({sys, x, 0});
        full_ortho_step(st, sys, w);
        seen.conservativeResize(Eigen::NoChange, seen.cols() + 1);
        seen.col(seen.cols() - 1) = w.transpose_apply(sys.a());
        const Matrix& s = std::get<FullProjector>(st.memory).s;
        CHECK((s - complement_projector(seen)).norm() <= 1e-8);
    }
}
