#include "rpm/distributed.hpp"

#include "rpm/error.hpp"
#include "rpm/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rpm {

void Partition::validate() const {
    if (p < 1 || static_cast<Index>(index_sets.size()) != p || static_cast<Index>(rows.size()) != p) {
        throw InvalidArgument("partition: node count does not match its index sets");
    }
    if (static_cast<Index>(row_owner.size()) != n) {
        throw InvalidArgument("partition: row owner map does not cover every row");
    }
    for (Index j = 0; j < p; ++j) {
        const auto& xs = index_sets[static_cast<std::size_t>(j)];
        if (!std::is_sorted(xs.begin(), xs.end()) ||
            std::adjacent_find(xs.begin(), xs.end()) != xs.end()) {
            throw InvalidArgument("partition: index sets must be sorted and duplicate-free");
        }
        if (!xs.empty() && (xs.front() < 0 || xs.back() >= d)) {
            throw InvalidArgument("partition: column index out of range");
        }
        for (Index r : rows[static_cast<std::size_t>(j)]) {
            if (r < 0 || r >= n || row_owner[static_cast<std::size_t>(r)] != j) {
                throw InvalidArgument("partition: row ownership is inconsistent");
            }
        }
    }
}

namespace {

// Splits n rows into p contiguous blocks whose sizes differ by at most one.
void assign_row_blocks(Partition& part) {
    part.rows.assign(static_cast<std::size_t>(part.p), {});
    part.row_owner.assign(static_cast<std::size_t>(part.n), 0);
    const Index base = part.n / part.p;
    const Index extra = part.n % part.p;
    Index row = 0;
    for (Index j = 0; j < part.p; ++j) {
        const Index size = base + (j < extra ? 1 : 0);
        for (Index t = 0; t < size; ++t, ++row) {
            part.rows[static_cast<std::size_t>(j)].push_back(row);
            part.row_owner[static_cast<std::size_t>(row)] = j;
        }
    }
}

} // namespace

Partition partition_banded(Index n, Index half_bandwidth, Index p) {
    if (n < 1) {
        throw InvalidArgument("partition_banded: n must be positive");
    }
    if (p < 1 || p > n) {
        throw InvalidArgument("partition_banded: need 1 <= p <= n");
    }
    if (half_bandwidth < 0 || half_bandwidth >= n) {
        throw InvalidArgument("partition_banded: half bandwidth must lie in [0, n)");
    }
    Partition part;
    part.p = p;
    part.n = n;
    part.d = n;
    assign_row_blocks(part);
    for (Index j = 0; j < p; ++j) {
        const auto& rows = part.rows[static_cast<std::size_t>(j)];
        const Index lo = std::max<Index>(0, rows.front() - half_bandwidth);
        const Index hi = std::min<Index>(n - 1, rows.back() + half_bandwidth);
        IndexSet xs;
        for (Index c = lo; c <= hi; ++c) {
            xs.push_back(c);
        }
        part.index_sets.push_back(std::move(xs));
    }
    return part;
}

Partition partition_by_support(const Matrix& a, Index p) {
    if (p < 1 || p > a.rows()) {
        throw InvalidArgument("partition_by_support: need 1 <= p <= n");
    }
    Partition part;
    part.p = p;
    part.n = a.rows();
    part.d = a.cols();
    assign_row_blocks(part);
    for (Index j = 0; j < p; ++j) {
        IndexSet xs;
        for (Index c = 0; c < a.cols(); ++c) {
            for (Index r : part.rows[static_cast<std::size_t>(j)]) {
                if (a(r, c) != 0.0) {
                    xs.push_back(c);
                    break;
                }
            }
        }
        part.index_sets.push_back(std::move(xs));
    }
    return part;
}

namespace {

Index intersection_size(const IndexSet& a, const IndexSet& b) {
    Index count = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

} // namespace

OverlapStats overlap_stats(const Partition& part) {
    part.validate();
    OverlapStats out;
    out.pairwise = Eigen::MatrixXi::Zero(part.p, part.p);
    for (Index i = 0; i < part.p; ++i) {
        for (Index j = 0; j < part.p; ++j) {
            out.pairwise(i, j) = static_cast<int>(intersection_size(
                part.index_sets[static_cast<std::size_t>(i)], part.index_sets[static_cast<std::size_t>(j)]));
        }
    }
    for (Index j = 0; j < part.p; ++j) {
        Index neighbours = 0;
        for (Index i = 0; i < part.p; ++i) {
            if (i != j) {
                out.q = std::max<Index>(out.q, out.pairwise(i, j));
            }
            if (out.pairwise(i, j) > 0 || i == j) {
                ++neighbours;
            }
        }
        out.f = std::max(out.f, neighbours);
    }
    return out;
}

std::uint64_t iteration_comm_cost(const Partition& part, Index origin, std::uint64_t m) {
    if (origin < 0 || origin >= part.p) {
        throw InvalidArgument("iteration_comm_cost: origin node out of range");
    }
    const auto& xo = part.index_sets[static_cast<std::size_t>(origin)];
    std::uint64_t overlap = 0;
    for (Index i = 0; i < part.p; ++i) {
        if (i != origin) {
            overlap += static_cast<std::uint64_t>(
                intersection_size(xo, part.index_sets[static_cast<std::size_t>(i)]));
        }
    }
    const auto p = static_cast<std::uint64_t>(part.p);
    return overlap + m * (p - 1) + m * p * (p - 1);
}

std::uint64_t comm_cost_bound(const Partition& part, std::uint64_t m) {
    const OverlapStats stats = overlap_stats(part);
    const auto p = static_cast<std::uint64_t>(part.p);
    return static_cast<std::uint64_t>(stats.q) * static_cast<std::uint64_t>(stats.f - 1) +
           m * (p * p - 1);
}

std::string CommLedger::to_csv() const {
    std::ostringstream out;
    out << "iteration,node,overlap_values,first_pass_ip,second_pass_ip,total\n";
    for (const auto& e : entries) {
        out << e.iteration << ',' << (e.node + 1) << ',' << e.overlap_values << ',' << e.first_pass_ip
            << ',' << e.second_pass_ip << ',' << e.total() << '\n';
    }
    return out.str();
}

void CommLedger::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << to_csv();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

LocalSketch parse_local_sketch(std::string_view token) {
    if (token == "cyclic") {
        return LocalSketch::Cyclic;
    }
    if (token == "uniform") {
        return LocalSketch::Uniform;
    }
    if (token == "gaussian") {
        return LocalSketch::Gaussian;
    }
    throw InvalidArgument("strategy '" + std::string(token) +
                          "' is not node-local (use cyclic, uniform or gaussian)");
}

std::string local_sketch_token(LocalSketch kind) {
    switch (kind) {
    case LocalSketch::Cyclic:
        return "cyclic";
    case LocalSketch::Uniform:
        return "uniform";
    case LocalSketch::Gaussian:
        return "gaussian";
    }
    return "unknown";
}

IndexSet support_of(const Vector& v, double rel_tol) {
    IndexSet out;
    const double scale = v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0;
    for (Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > rel_tol * scale) {
            out.push_back(i);
        }
    }
    return out;
}

bool support_bound_check(const IndexSet& q_support, const std::vector<IndexSet>& z_supports,
                         const IndexSet& u_support) {
    std::vector<Index> allowed(q_support);
    for (const auto& z : z_supports) {
        if (intersection_size(q_support, z) > 0) {
            allowed.insert(allowed.end(), z.begin(), z.end());
        }
    }
    std::sort(allowed.begin(), allowed.end());
    allowed.erase(std::unique(allowed.begin(), allowed.end()), allowed.end());
    return std::includes(allowed.begin(), allowed.end(), u_support.begin(), u_support.end());
}

namespace {

// State private to one simulated node: local slices over X_j only.
struct Node {
    IndexSet xs;
    IndexSet rows;
    std::vector<bool> owns; // per local slot: lowest node holding the index
    Vector x;
    std::deque<Vector> z;
    Rng rng;
    std::vector<Index> remaining;
};

class Simulation {
public:
    Simulation(const LinearSystem& system, const Partition& part, const DistributedOptions& options)
        : system_(system), part_(part), options_(options), schedule_rng_(Rng(options.seed).split(0)) {
        part_.validate();
        if (part_.n != system.rows() || part_.d != system.cols()) {
            throw DimensionError("sim_solve: partition does not match the system dimensions");
        }
        check_supports();
        x_ = options.x0 ? *options.x0 : Vector::Zero(system.cols());
        if (x_.size() != system.cols()) {
            throw DimensionError("sim_solve: x0 length does not match d");
        }
        build_nodes();
        if (options_.schedule == NodeSchedule::WeightedRandom) {
            weights_ = options_.node_weights;
            if (weights_.empty()) {
                for (const auto& node : nodes_) {
                    weights_.push_back(static_cast<double>(node.rows.size()));
                }
            }
            if (static_cast<Index>(weights_.size()) != part_.p ||
                std::any_of(weights_.begin(), weights_.end(), [](double w) { return !(w >= 0.0); }) ||
                !(std::accumulate(weights_.begin(), weights_.end(), 0.0) > 0.0)) {
                throw InvalidArgument("sim_solve: node weights must be p nonnegative values, not all zero");
            }
        }
    }

    Index next_origin(std::uint64_t k) {
        if (options_.schedule == NodeSchedule::RoundRobin) {
            return static_cast<Index>(k % static_cast<std::uint64_t>(part_.p));
        }
        const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
        double target = schedule_rng_.uniform() * total;
        for (Index j = 0; j < part_.p; ++j) {
            target -= weights_[static_cast<std::size_t>(j)];
            if (target < 0.0) {
                return j;
            }
        }
        return part_.p - 1;
    }

    SketchVector sketch(Index j, std::uint64_t k) {
        Node& node = nodes_[static_cast<std::size_t>(j)];
        SketchVector w(system_.rows());
        if (options_.custom_sketch) {
            w = options_.custom_sketch(j, k);
            if (w.dim() != system_.rows()) {
                throw DimensionError("sim_solve: custom sketch must have length n");
            }
            for (Index i : w.indices()) {
                if (i < 0 || i >= system_.rows() ||
                    part_.row_owner[static_cast<std::size_t>(i)] != j) {
                    throw ProtocolError("node " + std::to_string(j + 1) +
                                        " emitted a sketch touching row " + std::to_string(i + 1) +
                                        " it does not own");
                }
            }
            return w;
        }
        if (node.rows.empty()) {
            return w;
        }
        switch (options_.sketch) {
        case LocalSketch::Cyclic:
            if (node.remaining.empty()) {
                node.remaining = node.rows;
                for (std::size_t i = node.remaining.size(); i > 1; --i) {
                    std::swap(node.remaining[i - 1], node.remaining[node.rng.below(i)]);
                }
            }
            w.push(node.remaining.back(), 1.0);
            node.remaining.pop_back();
            break;
        case LocalSketch::Uniform:
            w.push(node.rows[node.rng.below(node.rows.size())], 1.0);
            break;
        case LocalSketch::Gaussian:
            for (Index r : node.rows) {
                w.push(r, node.rng.normal());
            }
            break;
        }
        return w;
    }

    // One iteration originating at node j. Returns true when the step advanced.
    bool iterate(Index j, std::uint64_t k, const SketchVector& w, CommLedger& ledger,
                 std::uint64_t& support_checks) {
        const Node& origin = nodes_[static_cast<std::size_t>(j)];
        const Vector q = w.transpose_apply(system_.a());
        Vector q_local(static_cast<Index>(origin.xs.size()));
        for (std::size_t s = 0; s < origin.xs.size(); ++s) {
            q_local[static_cast<Index>(s)] = q[origin.xs[s]];
        }
        std::vector<bool> inside(static_cast<std::size_t>(q.size()), false);
        for (Index c : origin.xs) {
            inside[static_cast<std::size_t>(c)] = true;
        }
        for (Index c = 0; c < q.size(); ++c) {
            if (!inside[static_cast<std::size_t>(c)] && q[c] != 0.0) {
                throw ProtocolError("direction A'w leaves the index set of node " + std::to_string(j + 1));
            }
        }

        const double r = w.dot(system_.b()) - local_dot(q_local, origin.x);
        const std::size_t stored = origin.z.size();

        // First pass: inner products on the origin node, broadcast to all.
        std::vector<double> c1(stored);
        for (std::size_t t = 0; t < stored; ++t) {
            c1[t] = local_dot(origin.z[t], q_local);
        }

        CommEntry entry;
        entry.iteration = k;
        entry.node = j;
        const auto p = static_cast<std::uint64_t>(part_.p);
        const auto m = static_cast<std::uint64_t>(options_.m);
        for (Index i = 0; i < part_.p; ++i) {
            if (i != j) {
                entry.overlap_values += overlap_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            }
        }
        entry.first_pass_ip = m * (p - 1);
        entry.second_pass_ip = m * p * (p - 1);

        // t1 on every node from its slice of q and the broadcast products.
        std::vector<Vector> t1(nodes_.size());
        for (std::size_t l = 0; l < nodes_.size(); ++l) {
            const Node& node = nodes_[l];
            Vector t(static_cast<Index>(node.xs.size()));
            for (std::size_t s = 0; s < node.xs.size(); ++s) {
                t[static_cast<Index>(s)] = q[node.xs[s]];
            }
            for (std::size_t c = 0; c < stored; ++c) {
                axpy(t, -c1[c], node.z[c]);
            }
            t1[l] = std::move(t);
        }

        // Second pass: partial sums over owned indices, combined in node order.
        std::vector<double> c2(stored, 0.0);
        for (std::size_t c = 0; c < stored; ++c) {
            for (std::size_t l = 0; l < nodes_.size(); ++l) {
                c2[c] += owned_dot(nodes_[l], nodes_[l].z[c], t1[l]);
            }
        }
        std::vector<Vector> u(nodes_.size());
        double u2 = 0.0;
        for (std::size_t l = 0; l < nodes_.size(); ++l) {
            u[l] = t1[l];
            for (std::size_t c = 0; c < stored; ++c) {
                axpy(u[l], -c2[c], nodes_[l].z[c]);
            }
            u2 += owned_dot(nodes_[l], u[l], u[l]);
        }
        const double u_norm = std::sqrt(u2);
        const double q_norm = std::sqrt(local_dot(q_local, q_local));
        entry.extra_sync = p * (p - 1);

        if (options_.check_support) {
            check_support_bound(q, u);
            ++support_checks;
        }

        if (is_degenerate(u_norm, q_norm)) {
            ledger.entries.push_back(entry);
            return false;
        }

        for (std::size_t l = 0; l < nodes_.size(); ++l) {
            Node& node = nodes_[l];
            if (options_.m > 0) {
                if (node.z.size() == options_.m) {
                    node.z.pop_front();
                }
                node.z.push_back(u[l] / u_norm);
            }
        }
        const double alpha = r / local_dot(u[static_cast<std::size_t>(j)], q_local);
        entry.extra_sync += p - 1;
        for (std::size_t l = 0; l < nodes_.size(); ++l) {
            axpy(nodes_[l].x, alpha, u[l]);
        }
        entry.advanced = true;
        ledger.entries.push_back(entry);
        return true;
    }

    Vector gather() const {
        Vector x = x_;
        for (const auto& node : nodes_) {
            for (std::size_t s = 0; s < node.xs.size(); ++s) {
                if (node.owns[s]) {
                    x[node.xs[s]] = node.x[static_cast<Index>(s)];
                }
            }
        }
        return x;
    }

private:
    static void axpy(Vector& y, double alpha, const Vector& x) {
        for (Index i = 0; i < y.size(); ++i) {
            y[i] += alpha * x[i];
        }
    }

    static double local_dot(const Vector& a, const Vector& b) {
        double s = 0.0;
        for (Index i = 0; i < a.size(); ++i) {
            s += a[i] * b[i];
        }
        return s;
    }

    static double owned_dot(const Node& node, const Vector& a, const Vector& b) {
        double s = 0.0;
        for (Index i = 0; i < a.size(); ++i) {
            if (node.owns[static_cast<std::size_t>(i)]) {
                s += a[i] * b[i];
            }
        }
        return s;
    }

    void check_supports() const {
        const Matrix& a = system_.a();
        for (Index j = 0; j < part_.p; ++j) {
            const auto& xs = part_.index_sets[static_cast<std::size_t>(j)];
            for (Index r : part_.rows[static_cast<std::size_t>(j)]) {
                for (Index c = 0; c < a.cols(); ++c) {
                    if (a(r, c) != 0.0 && !std::binary_search(xs.begin(), xs.end(), c)) {
                        throw InvalidArgument("partition: row " + std::to_string(r + 1) +
                                              " has a nonzero outside the index set of node " +
                                              std::to_string(j + 1));
                    }
                }
            }
        }
    }

    void build_nodes() {
        const Index d = system_.cols();
        std::vector<bool> claimed(static_cast<std::size_t>(d), false);
        const Rng root(options_.seed);
        for (Index j = 0; j < part_.p; ++j) {
            Node node;
            node.xs = part_.index_sets[static_cast<std::size_t>(j)];
            node.rows = part_.rows[static_cast<std::size_t>(j)];
            node.x = Vector(static_cast<Index>(node.xs.size()));
            node.owns.resize(node.xs.size());
            for (std::size_t s = 0; s < node.xs.size(); ++s) {
                const Index c = node.xs[s];
                node.x[static_cast<Index>(s)] = x_[c];
                node.owns[s] = !claimed[static_cast<std::size_t>(c)];
                claimed[static_cast<std::size_t>(c)] = true;
            }
            node.rng = root.split(static_cast<std::uint64_t>(j) + 1);
            nodes_.push_back(std::move(node));
        }
        overlap_.assign(nodes_.size(), std::vector<std::uint64_t>(nodes_.size(), 0));
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            for (std::size_t l = 0; l < nodes_.size(); ++l) {
                overlap_[i][l] = static_cast<std::uint64_t>(intersection_size(nodes_[i].xs, nodes_[l].xs));
            }
        }
    }

    Vector expand(const std::vector<Vector>& slices) const {
        Vector out = Vector::Zero(system_.cols());
        for (std::size_t l = 0; l < nodes_.size(); ++l) {
            for (std::size_t s = 0; s < nodes_[l].xs.size(); ++s) {
                if (nodes_[l].owns[s]) {
                    out[nodes_[l].xs[s]] = slices[l][static_cast<Index>(s)];
                }
            }
        }
        return out;
    }

    void check_support_bound(const Vector& q, const std::vector<Vector>& u_slices) const {
        std::vector<IndexSet> z_supports;
        const std::size_t stored = nodes_.front().z.size();
        for (std::size_t c = 0; c < stored; ++c) {
            std::vector<Vector> slices;
            for (const auto& node : nodes_) {
                slices.push_back(node.z[c]);
            }
            z_supports.push_back(support_of(expand(slices)));
        }
        if (!support_bound_check(support_of(q), z_supports, support_of(expand(u_slices)))) {
            throw ProtocolError("Gram-Schmidt output left the predicted support");
        }
    }

    const LinearSystem& system_;
    const Partition& part_;
    const DistributedOptions& options_;
    Rng schedule_rng_;
    std::vector<double> weights_;
    Vector x_;
    std::vector<Node> nodes_;
    std::vector<std::vector<std::uint64_t>> overlap_;
};

} // namespace

DistributedResult sim_solve(const LinearSystem& system, const Partition& part,
                            const TerminationCriteria& criteria, const DistributedOptions& options) {
    criteria.validate();
    Simulation sim(system, part, options);

    DistributedResult result;
    SolveReport& report = result.report;
    report.method = "partial:" + std::to_string(options.m);
    report.strategy = options.custom_sketch ? "node-custom" : "node-" + local_sketch_token(options.sketch);
    report.n = system.rows();
    report.d = system.cols();
    report.seed = options.seed;

    const auto start = std::chrono::steady_clock::now();
    auto out_of_time = [&] {
        return criteria.wall_clock_budget &&
               std::chrono::steady_clock::now() - start >= *criteria.wall_clock_budget;
    };
    const double r0 = residual(system, sim.gather()).norm();
    report.initial_residual_norm = r0;
    report.residual_history.push_back({0, r0});
    auto satisfied = [&](double rn) {
        return criteria.residual_factor && rn <= *criteria.residual_factor * r0;
    };

    std::uint64_t k = 0;
    bool converged = satisfied(r0);
    bool budget_hit = false;
    while (!converged) {
        if ((criteria.max_iterations && k >= *criteria.max_iterations) || out_of_time()) {
            budget_hit = true;
            break;
        }
        const Index j = sim.next_origin(k);
        const SketchVector w = sim.sketch(j, k);
        if (sim.iterate(j, k, w, result.ledger, result.support_checks)) {
            ++report.advanced_steps;
        } else {
            ++report.skipped_steps;
        }
        result.schedule.push_back(j);
        if (options.record_sketches) {
            result.sketches.push_back(w);
        }
        ++k;
        if (k % criteria.check_every == 0) {
            const double rn = residual(system, sim.gather()).norm();
            report.residual_history.push_back({k, rn});
            converged = satisfied(rn);
        }
    }

    report.x = sim.gather();
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.final_residual_norm = residual(system, report.x).norm();
    report.final_relative_residual = r0 > 0.0 ? report.final_residual_norm / r0 : 0.0;
    if (budget_hit && satisfied(report.final_residual_norm)) {
        converged = true;
    }
    if (report.residual_history.back().iteration != k) {
        report.residual_history.push_back({k, report.final_residual_norm});
    }
    report.iterations = k;
    report.converged = converged;
    report.timed_out = !converged;
    return result;
}

} // namespace rpm
