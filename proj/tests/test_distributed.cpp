#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpm/distributed.hpp"
#include "rpm/error.hpp"
#include "rpm/linear_system.hpp"

#include <sstream>

using namespace rpm;

namespace {

IndexSet range(Index lo, Index hi) { // 1-based inclusive -> 0-based
    IndexSet s;
    for (Index i = lo; i <= hi; ++i) s.push_back(i - 1);
    return s;
}

LinearSystem band_system(std::uint64_t seed) {
    return make_consistent_system(gen_banded(20, 2, seed), seed + 1);
}

DistributedOptions replay_options(std::size_t m, std::uint64_t seed) {
    DistributedOptions o;
    o.m = m;
    o.seed = seed;
    o.record_sketches = true;
    o.check_support = true;
    return o;
}

TerminationCriteria iterations(std::uint64_t k) {
    TerminationCriteria c;
    c.max_iterations = k;
    c.check_every = 1;
    return c;
}

} // namespace

TEST_CASE("five node band partition") {
    const auto part = partition_banded(20, 2, 5);
    REQUIRE(part.index_sets.size() == 5);
    CHECK(part.index_sets[0] == range(1, 6));
    CHECK(part.index_sets[1] == range(3, 10));
    CHECK(part.index_sets[2] == range(7, 14));
    CHECK(part.index_sets[3] == range(11, 18));
    CHECK(part.index_sets[4] == range(15, 20));
    CHECK(part.rows[1] == range(5, 8));

    const auto one = partition_banded(20, 2, 1);
    CHECK(one.index_sets[0] == range(1, 20));

    const auto diag = partition_banded(6, 0, 6);
    for (Index j = 0; j < 6; ++j) CHECK(diag.index_sets[static_cast<std::size_t>(j)] == IndexSet{j});
    CHECK(overlap_stats(diag).q == 0);
    CHECK(overlap_stats(diag).f == 1);

    CHECK_THROWS_AS(partition_banded(4, 1, 5), InvalidArgument);
}

TEST_CASE("partition from matrix support matches the band") {
    const auto part = partition_by_support(gen_banded(20, 2, 3), 5);
    CHECK(part.index_sets[1] == range(3, 10));
}

TEST_CASE("overlap statistics") {
    const auto fig = overlap_stats(partition_banded(20, 2, 5));
    CHECK(fig.q == 4);
    CHECK(fig.f == 3);

    Partition same;
    same.p = 2;
    same.n = 2;
    same.d = 3;
    same.index_sets = {range(1, 3), range(1, 3)};
    same.rows = {{0}, {1}};
    same.row_owner = {0, 1};
    const auto s = overlap_stats(same);
    CHECK(s.q == 3);
    CHECK(s.f == 2);
}

TEST_CASE("communication cost") {
    const auto fig = partition_banded(20, 2, 5);
    CHECK(iteration_comm_cost(fig, 1, 2) == 56);
    CHECK(comm_cost_bound(fig, 2) == 56);
    CHECK(iteration_comm_cost(partition_banded(6, 0, 6), 2, 0) == 0);
    const auto one = partition_banded(20, 2, 1);
    for (std::uint64_t m : {0, 2, 7}) CHECK(iteration_comm_cost(one, 0, m) == 0);
}

TEST_CASE("single node equals sequential TIGS partial orthogonalization") {
    const auto sys = band_system(4);
    const auto part = partition_banded(20, 2, 1);
    const auto res = sim_solve(sys, part, iterations(60), replay_options(3, 5));
    auto st = SolverState::partial(Vector::Zero(20), 3, GsKind::Tigs);
    for (const auto& w : res.sketches) partial_ortho_step(st, sys, w);
    CHECK((res.report.x - st.x).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("five node band ledger") {
    const auto sys = band_system(7);
    const auto part = partition_banded(20, 2, 5);
    const auto res = sim_solve(sys, part, iterations(200), replay_options(2, 8));
    std::size_t checked = 0;
    for (const auto& e : res.ledger.entries) {
        if (e.node == 1 && e.advanced) {
            CHECK(e.total() == 56);
            ++checked;
        }
        CHECK(e.total() <= comm_cost_bound(part, 2));
    }
    CHECK(checked > 10);
    CHECK(res.support_checks == res.ledger.entries.size());

    std::istringstream csv(res.ledger.to_csv());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "iteration,node,overlap_values,first_pass_ip,second_pass_ip,total");
    std::string first;
    std::getline(csv, first);
    CHECK(first.rfind("0,1,", 0) == 0);
}

TEST_CASE("empty buffer reduces to the base method") {
    const auto sys = band_system(9);
    const auto part = partition_banded(20, 2, 5);
    const auto res = sim_solve(sys, part, iterations(100), replay_options(0, 3));
    auto st = SolverState::base(Vector::Zero(20));
    for (const auto& w : res.sketches) base_row_step(st, sys, w);
    CHECK((res.report.x - st.x).cwiseAbs().maxCoeff() <= 1e-12);
    for (const auto& e : res.ledger.entries) {
        CHECK(e.first_pass_ip == 0);
        CHECK(e.second_pass_ip == 0);
        CHECK(e.overlap_values == iteration_comm_cost(part, e.node, 0));
    }
}

TEST_CASE("simulation converges") {
    const auto sys = band_system(11);
    const auto part = partition_banded(20, 2, 5);
    TerminationCriteria c;
    c.residual_factor = 1e-3;
    c.max_iterations = 100000;
    for (auto sketch : {LocalSketch::Cyclic, LocalSketch::Uniform, LocalSketch::Gaussian}) {
        DistributedOptions o;
        o.sketch = sketch;
        o.m = 4;
        o.seed = 2;
        CHECK(sim_solve(sys, part, c, o).report.converged);
    }
    DistributedOptions w;
    w.schedule = NodeSchedule::WeightedRandom;
    CHECK(sim_solve(sys, part, c, w).report.converged);
}

TEST_CASE("custom sketches must stay on the node's rows") {
    const auto sys = band_system(2);
    const auto part = partition_banded(20, 2, 5);
    DistributedOptions o;
    o.custom_sketch = [](Index node, std::uint64_t) {
        return SketchVector::basis(20, node == 0 ? 19 : 0);
    };
    CHECK_THROWS_AS(sim_solve(sys, part, iterations(3), o), ProtocolError);
}

TEST_CASE("support containment check") {
    CHECK(support_bound_check({1, 2}, {{5, 6}}, {1, 2}));
    CHECK_FALSE(support_bound_check({1, 2}, {{5, 6}}, {1, 5}));
    CHECK(support_bound_check({1, 2}, {{2, 3, 4}}, {1, 3, 4}));
    Vector v(4);
    v << 1.0, 1e-20, 0.0, -2.0;
    CHECK(support_of(v) == IndexSet{0, 3});
}

TEST_CASE("local sketch tokens") {
    CHECK(parse_local_sketch("cyclic") == LocalSketch::Cyclic);
    CHECK(local_sketch_token(LocalSketch::Gaussian) == "gaussian");
    CHECK_THROWS_AS(parse_local_sketch("grk"), InvalidArgument);
}
