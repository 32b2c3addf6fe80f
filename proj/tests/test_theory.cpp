#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpm/error.hpp"
#include "rpm/linear_system.hpp"
#include "rpm/solver.hpp"
#include "rpm/theory.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>

using namespace rpm;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Index>(v.size()));
    Index i = 0;
    for (double e : v) x(i++) = e;
    return x;
}

Vector unit(Index d, Index i) { return Vector::Unit(d, i); }

} // namespace

TEST_CASE("finite population subspaces") {
    const Matrix id = Matrix::Identity(3, 3);
    CHECK(finite_population_R(id, {unit(3, 0), unit(3, 1), unit(3, 2)}).rank() == 3);

    Matrix row(1, 2);
    row << 1, 1;
    const auto r = finite_population_R(row, {unit(1, 0)});
    REQUIRE(r.rank() == 1);
    CHECK(std::abs(std::abs(r.basis(0, 0)) - 1.0 / std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(r.basis(0, 0) - r.basis(1, 0)) <= 1e-12);

    Matrix a = Matrix::Zero(2, 3);
    a(0, 0) = 1.0;
    CHECK(finite_population_R(a, {unit(2, 1)}).empty());

    const auto l = finite_population_L(id, {unit(3, 2)});
    CHECK(l.side == Side::Column);
    CHECK(l.rank() == 1);
}

TEST_CASE("restricted row space") {
    const auto sys = make_consistent_system(gen_gaussian(4, 4, 2), 3);
    CHECK(restricted_row_space(sys.a(), sys.b(), *sys.x_star()).empty());

    const Matrix id = Matrix::Identity(2, 2);
    const auto r = restricted_row_space(id, vec({1, 2}), vec({1, 0}));
    REQUIRE(r.rank() == 1);
    CHECK(std::abs(std::abs(r.basis(1, 0)) - 1.0) <= 1e-12);

    const Vector far = *sys.x_star() + Vector::Constant(4, 1.0);
    const Vector res = sys.a() * far - sys.b();
    REQUIRE((res.array().abs() > 1e-6).all());
    CHECK(restricted_row_space(sys.a(), sys.b(), far).rank() == numerical_rank(sys.a()));
}

TEST_CASE("stopping times") {
    const auto id = row_space(Matrix::Identity(3, 3));
    std::vector<Vector> dirs;
    for (int k = 0; k < 9; ++k) dirs.push_back(unit(3, k % 3));
    const auto log = stopping_times(dirs, id);
    REQUIRE(log.first_spanning_time);
    CHECK(*log.first_spanning_time == 2);
    CHECK(log.taus == std::vector<std::uint64_t>{2, 5, 8});
    CHECK_FALSE(log.incomplete);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix a = gen_gaussian(5, 5, seed);
        Rng rng(seed + 100);
        std::vector<Vector> g;
        for (int k = 0; k < 5; ++k) {
            Vector w(5);
            for (Index i = 0; i < 5; ++i) w(i) = rng.normal();
            g.push_back(a.transpose() * w);
        }
        const auto lg = stopping_times(g, row_space(a));
        REQUIRE(lg.first_spanning_time);
        CHECK(*lg.first_spanning_time == 4);
    }

    Matrix two = Matrix::Identity(2, 2);
    const auto stuck = stopping_times({unit(2, 0), unit(2, 0), unit(2, 0)}, row_space(two));
    CHECK_FALSE(stuck.first_spanning_time);
    CHECK(stuck.incomplete);

    const auto j = nlohmann::json::parse(to_json(log));
    CHECK(j["T"] == 2);
    CHECK(j["taus"].size() == 3);
}

TEST_CASE("zero directions advance time but are not stored") {
    const auto id = row_space(Matrix::Identity(2, 2));
    const auto log = stopping_times({unit(2, 0), Vector::Zero(2), unit(2, 1)}, id);
    CHECK(log.taus == std::vector<std::uint64_t>{2});
    CHECK(log.epoch_directions[0].size() == 2);
}

TEST_CASE("meany bound") {
    CHECK(meany_gamma({unit(3, 1)}) == 0.0);
    CHECK(meany_gamma({unit(3, 0), unit(3, 1), unit(3, 2)}) == doctest::Approx(0.0).epsilon(1e-14));
    const double c = std::cos(std::numbers::pi / 3);
    const double s = std::sin(std::numbers::pi / 3);
    const auto mb = meany_bound({vec({1, 0}), vec({c, s})});
    CHECK(mb.min_det == doctest::Approx(0.75));
    CHECK(mb.gamma == doctest::Approx(0.25));

    // Three unit vectors in a plane: worst pair has the smallest angle.
    const double t = 0.3;
    const auto three = meany_bound({vec({1, 0}), vec({std::cos(t), std::sin(t)}), vec({0, 1})});
    CHECK(three.rank == 2);
    CHECK(three.subsets_checked == 3);
    CHECK(three.min_det == doctest::Approx(std::sin(t) * std::sin(t)));

    CHECK_THROWS_AS(meany_bound({vec({2, 0})}), InvalidArgument);
    std::vector<Vector> many;
    for (int k = 0; k < 17; ++k) {
        const double a = 0.1 * k;
        many.push_back(vec({std::cos(a), std::sin(a), 0.0}));
    }
    CHECK_THROWS_AS(meany_bound(many), CapacityError);
}

TEST_CASE("product projection norm") {
    CHECK(product_projection_norm({unit(3, 0), unit(3, 1)}) <= 1e-15);
    CHECK(product_projection_norm({unit(4, 2)}) <= 1e-15);
    for (double theta : {0.1, 0.7, 1.2, 2.5}) {
        const double n = product_projection_norm({vec({1, 0}), vec({std::cos(theta), std::sin(theta)})});
        CHECK(n <= std::abs(std::cos(theta)) + 1e-10);
    }
}

TEST_CASE("limit point characterization") {
    Rng rng(4);
    const auto sys = make_consistent_system(gen_gaussian(4, 6, 1), 2);
    const auto r = row_space(sys.a());
    const Vector x0 = Vector::Zero(6);
    const Vector xmin = min_norm_solution(sys);
    CHECK(verify_limit_point(xmin, x0, *sys.x_star(), r).ok);

    const auto full = row_space(Matrix::Identity(6, 6));
    Vector any(6);
    for (Index i = 0; i < 6; ++i) any(i) = rng.normal();
    CHECK(verify_limit_point(*sys.x_star(), any, *sys.x_star(), full).ok);
    CHECK(verify_limit_point(*sys.x_star(), *sys.x_star(), *sys.x_star(), r).ok);
    CHECK_FALSE(verify_limit_point(xmin + Vector::Constant(6, 1e-3), x0, *sys.x_star(), r).ok);
}

TEST_CASE("epoch rate inequality") {
    // Identity: first epoch is orthonormal so the error vanishes after it.
    const auto id = make_consistent_system(Matrix::Identity(3, 3), 5);
    SketchSource cyc(parse_sketch_spec("cyclic"), id, 1);
    TerminationCriteria c;
    c.max_iterations = 9;
    SolveOptions o;
    o.record_trace = true;
    o.stopping_target = row_space(id.a());
    const auto rep = solve(id, cyc, Method::base(), c, o);
    auto log = *rep.stopping_log;
    attach_gammas(log);
    std::vector<double> err;
    for (const auto& x : rep.trace->iterates) err.push_back((x - *id.x_star()).squaredNorm());
    const auto res = epoch_rate_check(log, err);
    CHECK(res.ok);
    CHECK(res.observed[0] == 0.0);

    // Rows at prescribed angles.
    Matrix a(3, 3);
    a << 1, 0, 0, std::cos(0.4), std::sin(0.4), 0, 0, std::cos(1.0), std::sin(1.0);
    const auto tri = make_consistent_system(a, 7);
    SketchSource cyc3(parse_sketch_spec("cyclic"), tri, 3);
    TerminationCriteria c30;
    c30.max_iterations = 31;
    o.stopping_target = row_space(a);
    const auto rt = solve(tri, cyc3, Method::base(), c30, o);
    auto lt = *rt.stopping_log;
    attach_gammas(lt);
    std::vector<double> et;
    for (const auto& x : rt.trace->iterates) et.push_back((x - *tri.x_star()).squaredNorm());
    const auto chk = epoch_rate_check(lt, et);
    CHECK(chk.ok);
    CHECK(chk.bounds.size() >= 10);

    StoppingTimeLog missing = lt;
    missing.gammas[0].reset();
    CHECK_THROWS_AS(epoch_rate_check(missing, et), IncompleteLogError);
}

TEST_CASE("single epoch property test") {
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto sys = make_consistent_system(gen_gaussian(4, 4, seed), seed + 1);
        SketchSource src(parse_sketch_spec("uniform"), sys, seed);
        TerminationCriteria c;
        c.max_iterations = 30;
        SolveOptions o;
        o.record_trace = true;
        o.stopping_target = row_space(sys.a());
        const auto rep = solve(sys, src, Method::base(), c, o);
        auto log = *rep.stopping_log;
        if (log.taus.empty() || log.epoch_directions[0].size() > 15) continue;
        log.taus.resize(1);
        log.gammas.resize(1);
        log.epoch_directions.resize(1);
        attach_gammas(log);
        std::vector<double> err;
        for (const auto& x : rep.trace->iterates) err.push_back((x - *sys.x_star()).squaredNorm());
        if (!epoch_rate_check(log, err).ok) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("adaptive stopping times") {
    // Errors along orthogonal axes shrink one coordinate at a time.
    std::vector<Vector> e{vec({1, 1, 1}), vec({0, 1, 1}), vec({0, 0, 1}), vec({0, 0, 0})};
    const auto ep = adaptive_stopping_times(e);
    CHECK(ep.terminated);

    // Two dimensional error ping-pong: e2 lies in span{e0, e1}.
    std::vector<Vector> p{vec({1, 0.5}), vec({0.2, 0.4}), vec({0.1, 0.05}), vec({0.02, 0.04})};
    const auto pp = adaptive_stopping_times(p);
    REQUIRE_FALSE(pp.taus.empty());
    CHECK(pp.taus[0] == 1);
}
