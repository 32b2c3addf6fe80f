#pragma once

#include "rpm/linear_system.hpp"
#include "rpm/solver.hpp"
#include "rpm/sketch_vector.hpp"
#include "rpm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rpm {

/// Row partition over p nodes. Indices are 0-based internally; node j of the
/// printed output is node j-1 here.
struct Partition {
    Index p = 0;
    Index n = 0;
    Index d = 0;
    std::vector<IndexSet> index_sets; // X_j, sorted column indices
    std::vector<IndexSet> rows;       // rows owned by node j, sorted
    std::vector<Index> row_owner;     // row -> node

    void validate() const;
};

/// Contiguous near-equal row blocks; X_j is the band support of the block.
Partition partition_banded(Index n, Index half_bandwidth, Index p);

/// Contiguous near-equal row blocks; X_j is the nonzero support of the block's
/// rows in `a`.
Partition partition_by_support(const Matrix& a, Index p);

struct OverlapStats {
    Index q = 0; // max_{i != j} |X_i n X_j|
    Index f = 0; // max_j |{i : X_i n X_j nonempty}|, counting j itself
    Eigen::MatrixXi pairwise;
};

OverlapStats overlap_stats(const Partition& part);

/// Values exchanged when `origin` generates the direction:
/// sum_{i != origin, X_i n X_origin nonempty} |X_origin n X_i| + m(p-1) + m p(p-1).
std::uint64_t iteration_comm_cost(const Partition& part, Index origin, std::uint64_t m);

/// Q(F-1) + m(p^2 - 1).
std::uint64_t comm_cost_bound(const Partition& part, std::uint64_t m);

struct CommEntry {
    std::uint64_t iteration = 0;
    Index node = 0; // 0-based origin
    std::uint64_t overlap_values = 0;
    std::uint64_t first_pass_ip = 0;
    std::uint64_t second_pass_ip = 0;
    /// ||u|| partial sums and the step-size broadcast; kept out of total().
    std::uint64_t extra_sync = 0;
    bool advanced = false;

    std::uint64_t total() const noexcept { return overlap_values + first_pass_ip + second_pass_ip; }
};

struct CommLedger {
    std::vector<CommEntry> entries;

    /// `iteration,node,overlap_values,first_pass_ip,second_pass_ip,total` with
    /// 1-based node ids.
    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

enum class LocalSketch {
    Cyclic,   // permutation of the node's rows, refreshed per pass
    Uniform,  // uniform row of the node, with replacement
    Gaussian, // Gaussian combination of the node's rows
};

enum class NodeSchedule { RoundRobin, WeightedRandom };

LocalSketch parse_local_sketch(std::string_view token);
std::string local_sketch_token(LocalSketch kind);

struct DistributedOptions {
    std::size_t m = 2;
    LocalSketch sketch = LocalSketch::Cyclic;
    NodeSchedule schedule = NodeSchedule::RoundRobin;
    std::vector<double> node_weights; // WeightedRandom; empty means row counts
    std::uint64_t seed = 0;
    std::optional<Vector> x0;
    bool record_sketches = false;
#ifdef NDEBUG
    bool check_support = false;
#else
    bool check_support = true;
#endif
    /// Replaces the built-in node-local sketches; the output must be
    /// supported on the node's rows.
    std::function<SketchVector(Index node, std::uint64_t iteration)> custom_sketch;
};

struct DistributedResult {
    SolveReport report;
    CommLedger ledger;
    std::vector<SketchVector> sketches; // w_k when record_sketches is set
    std::vector<Index> schedule;        // origin node per iteration
    std::uint64_t support_checks = 0;
};

/// Node-by-node simulation of the limited-communication rank-one method with
/// twice-iterated Gram-Schmidt and a FIFO buffer of m directions.
DistributedResult sim_solve(const LinearSystem& system, const Partition& part,
                            const TerminationCriteria& criteria, const DistributedOptions& options);

/// Gram-Schmidt support containment: u_support lies inside
/// (union of Z_j with Z_j n q_support nonempty) u q_support.
bool support_bound_check(const IndexSet& q_support, const std::vector<IndexSet>& z_supports,
                         const IndexSet& u_support);

/// Indices with |v_i| > rel_tol * max|v|.
IndexSet support_of(const Vector& v, double rel_tol = 1e-14);

} // namespace rpm
