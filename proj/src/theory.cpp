#include "rpm/theory.hpp"

#include "rpm/error.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rpm {

Vector SubspaceBasis::project(const Vector& v) const {
    if (v.size() != basis.rows()) {
        throw DimensionError("projection: vector length does not match the ambient dimension");
    }
    if (empty()) {
        return Vector::Zero(v.size());
    }
    return basis * (basis.transpose() * v);
}

Vector SubspaceBasis::project_complement(const Vector& v) const { return v - project(v); }

SubspaceBasis orthonormal_basis(const Eigen::MatrixXd& columns, Side side, double rel_tol) {
    SubspaceBasis out;
    out.side = side;
    if (columns.cols() == 0 || columns.rows() == 0) {
        out.basis = Eigen::MatrixXd(columns.rows(), 0);
        return out;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(columns, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    const double smax = s.size() > 0 ? s[0] : 0.0;
    Index rank = 0;
    if (smax > 0.0) {
        while (rank < s.size() && s[rank] > rel_tol * smax) {
            ++rank;
        }
    }
    out.basis = svd.matrixU().leftCols(rank);
    return out;
}

namespace {

Eigen::MatrixXd stack_columns(const std::vector<Vector>& vs, Index dim) {
    Eigen::MatrixXd m(dim, static_cast<Index>(vs.size()));
    for (std::size_t j = 0; j < vs.size(); ++j) {
        if (vs[j].size() != dim) {
            throw DimensionError("vector length mismatch while stacking columns");
        }
        m.col(static_cast<Index>(j)) = vs[j];
    }
    return m;
}

} // namespace

SubspaceBasis finite_population_R(const Matrix& a, const std::vector<Vector>& population) {
    if (population.empty()) {
        throw InvalidArgument("finite_population_R needs at least one vector");
    }
    Eigen::MatrixXd images(a.cols(), static_cast<Index>(population.size()));
    for (std::size_t j = 0; j < population.size(); ++j) {
        if (population[j].size() != a.rows()) {
            throw DimensionError("population vectors must have length n");
        }
        images.col(static_cast<Index>(j)) = a.transpose() * population[j];
    }
    return orthonormal_basis(images, Side::Row);
}

SubspaceBasis finite_population_L(const Matrix& a, const std::vector<Vector>& population) {
    if (population.empty()) {
        throw InvalidArgument("finite_population_L needs at least one vector");
    }
    Eigen::MatrixXd images(a.rows(), static_cast<Index>(population.size()));
    for (std::size_t j = 0; j < population.size(); ++j) {
        if (population[j].size() != a.cols()) {
            throw DimensionError("column population vectors must have length d");
        }
        images.col(static_cast<Index>(j)) = a * population[j];
    }
    return orthonormal_basis(images, Side::Column);
}

SubspaceBasis row_space(const Matrix& a) { return orthonormal_basis(a.transpose(), Side::Row); }

SubspaceBasis column_space(const Matrix& a) { return orthonormal_basis(a, Side::Column); }

SubspaceBasis restricted_row_space(const Matrix& a, const Vector& b, const Vector& x0) {
    if (b.size() != a.rows() || x0.size() != a.cols()) {
        throw DimensionError("restricted_row_space: dimension mismatch");
    }
    const double xnorm = x0.norm();
    std::vector<Vector> rows;
    for (Index i = 0; i < a.rows(); ++i) {
        const double violation = std::abs(a.row(i).dot(x0) - b[i]);
        if (violation > 1e-10 * (a.row(i).norm() * xnorm + std::abs(b[i]))) {
            rows.emplace_back(a.row(i).transpose());
        }
    }
    return orthonormal_basis(stack_columns(rows, a.cols()), Side::Row);
}

std::string to_json(const StoppingTimeLog& log) {
    nlohmann::json j;
    j["T"] = log.first_spanning_time ? nlohmann::json(*log.first_spanning_time) : nlohmann::json();
    j["taus"] = log.taus;
    nlohmann::json gammas = nlohmann::json::array();
    for (const auto& g : log.gammas) {
        gammas.push_back(g ? nlohmann::json(*g) : nlohmann::json());
    }
    j["gammas"] = gammas;
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& e : log.epoch_directions) {
        sizes.push_back(e.size());
    }
    j["epoch_sizes"] = sizes;
    j["observed"] = log.observed;
    j["incomplete"] = log.incomplete;
    j["target_rank"] = log.target_rank;
    return j.dump();
}

StoppingTimeTracker::StoppingTimeTracker(SubspaceBasis target, double rel_tol)
    : target_(std::move(target)), rel_tol_(rel_tol) {
    if (target_.empty()) {
        throw PreconditionError("stopping times need a nonempty target subspace");
    }
    epoch_basis_ = Eigen::MatrixXd(target_.ambient_dim(), target_.rank());
    log_.target_rank = target_.rank();
}

void StoppingTimeTracker::observe(const Vector& direction) {
    const std::uint64_t k = log_.observed++;
    const double norm = direction.norm();
    if (!(norm > 0.0)) {
        return;
    }
    const Vector unit = direction / norm;
    epoch_.push_back(unit);

    // Rank growth inside the target, with one reorthogonalization pass.
    Vector t = target_.project(unit);
    for (int pass = 0; pass < 2; ++pass) {
        if (epoch_rank_ > 0) {
            const auto q = epoch_basis_.leftCols(epoch_rank_);
            t -= q * (q.transpose() * t);
        }
    }
    const double tn = t.norm();
    if (tn > rel_tol_ && epoch_rank_ < target_.rank()) {
        epoch_basis_.col(epoch_rank_++) = t / tn;
    }

    if (epoch_rank_ == target_.rank()) {
        if (!log_.first_spanning_time) {
            log_.first_spanning_time = k;
        }
        log_.taus.push_back(k);
        log_.gammas.emplace_back();
        log_.epoch_directions.push_back(std::move(epoch_));
        epoch_.clear();
        epoch_rank_ = 0;
    }
}

StoppingTimeLog StoppingTimeTracker::log() const {
    StoppingTimeLog out = log_;
    out.incomplete = epoch_rank_ > 0 || !epoch_.empty() || out.taus.empty();
    return out;
}

StoppingTimeLog stopping_times(const std::vector<Vector>& directions, const SubspaceBasis& target) {
    StoppingTimeTracker tracker(target);
    for (const auto& d : directions) {
        tracker.observe(d);
    }
    return tracker.log();
}

namespace {

Index numerical_rank_of(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.cols() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || !(s[0] > 0.0)) {
        return 0;
    }
    Index r = 0;
    while (r < s.size() && s[r] > rel_tol * s[0]) {
        ++r;
    }
    return r;
}

// log of det(F'F) from a QR factorization, or nullopt when F is rank deficient.
std::optional<double> log_gram_det(const Eigen::MatrixXd& f, double rel_tol) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(f);
    qr.setThreshold(rel_tol);
    if (qr.rank() < f.cols()) {
        return std::nullopt;
    }
    double log_det = 0.0;
    for (Index i = 0; i < f.cols(); ++i) {
        log_det += 2.0 * std::log(std::abs(qr.matrixR()(i, i)));
    }
    return log_det;
}

} // namespace

MeanyBound meany_bound(const std::vector<Vector>& units, std::size_t cap) {
    MeanyBound out;
    if (units.empty()) {
        return out;
    }
    const Index dim = units.front().size();
    for (const auto& u : units) {
        if (u.size() != dim) {
            throw DimensionError("meany_bound: vectors of different lengths");
        }
        if (std::abs(u.norm() - 1.0) > 1e-10) {
            throw InvalidArgument("meany_bound: vectors must have unit norm");
        }
    }
    constexpr double kRankTol = 1e-10;
    const Eigen::MatrixXd all = stack_columns(units, dim);
    const Index rank = numerical_rank_of(all, kRankTol);
    out.rank = rank;
    if (rank == 0) {
        return out;
    }
    const auto count = static_cast<Index>(units.size());
    if (count > rank && units.size() > cap) {
        throw CapacityError("meany_bound: " + std::to_string(units.size()) +
                            " vectors exceed the exhaustive cap of " + std::to_string(cap) +
                            "; use a sampling-based bound instead");
    }

    double min_log = std::numeric_limits<double>::infinity();
    std::vector<Index> pick(static_cast<std::size_t>(rank));
    for (Index i = 0; i < rank; ++i) {
        pick[static_cast<std::size_t>(i)] = i;
    }
    Eigen::MatrixXd f(dim, rank);
    while (true) {
        for (Index c = 0; c < rank; ++c) {
            f.col(c) = units[static_cast<std::size_t>(pick[static_cast<std::size_t>(c)])];
        }
        ++out.subsets_checked;
        if (const auto ld = log_gram_det(f, kRankTol)) {
            min_log = std::min(min_log, *ld);
        }
        // Next combination in lexicographic order.
        Index pos = rank - 1;
        while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == count - rank + pos) {
            --pos;
        }
        if (pos < 0) {
            break;
        }
        ++pick[static_cast<std::size_t>(pos)];
        for (Index c = pos + 1; c < rank; ++c) {
            pick[static_cast<std::size_t>(c)] = pick[static_cast<std::size_t>(c - 1)] + 1;
        }
    }
    if (!std::isfinite(min_log)) {
        throw DegenerateError("meany_bound: no full-rank subset found");
    }
    // Hadamard: det(F'F) <= 1 for unit columns.
    min_log = std::min(min_log, 0.0);
    out.min_det = std::exp(min_log);
    out.log10_min_det = min_log / std::log(10.0);
    out.gamma = 0.0 - std::expm1(min_log); // no negative zero when every det is 1
    return out;
}

double meany_gamma(const std::vector<Vector>& units, std::size_t cap) {
    return meany_bound(units, cap).gamma;
}

void attach_gammas(StoppingTimeLog& log, std::size_t cap) {
    log.gammas.assign(log.epoch_directions.size(), std::nullopt);
    for (std::size_t l = 0; l < log.epoch_directions.size(); ++l) {
        try {
            log.gammas[l] = meany_gamma(log.epoch_directions[l], cap);
        } catch (const CapacityError&) {
            // Left empty; epoch_rate_check reports it.
        }
    }
}

double product_projection_norm(const std::vector<Vector>& units) {
    if (units.empty()) {
        return 0.0;
    }
    const Index dim = units.front().size();
    const SubspaceBasis span = orthonormal_basis(stack_columns(units, dim), Side::Row);
    if (span.empty()) {
        return 0.0;
    }
    Eigen::MatrixXd qb = span.basis;
    for (const auto& v : units) {
        qb -= v * (v.transpose() * qb);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(qb);
    return svd.singularValues()(0);
}

LimitCheck verify_limit_point(const Vector& x_final, const Vector& x0, const Vector& x_star,
                              const SubspaceBasis& r) {
    if (x_final.size() != x0.size() || x0.size() != x_star.size() || r.ambient_dim() != x0.size()) {
        throw DimensionError("verify_limit_point: dimension mismatch");
    }
    const Vector expected = r.project_complement(x0) + r.project(x_star);
    LimitCheck out;
    out.defect = (x_final - expected).norm();
    out.ok = out.defect <= 1e-8 * (1.0 + x_star.norm());
    return out;
}

EpochRateResult epoch_rate_check(const StoppingTimeLog& log, const std::vector<double>& squared_errors,
                                 double slack) {
    if (squared_errors.empty()) {
        throw InvalidArgument("epoch_rate_check needs at least the initial error");
    }
    EpochRateResult out;
    double product = 1.0;
    for (std::size_t l = 0; l < log.taus.size(); ++l) {
        const std::uint64_t at = log.taus[l] + 1;
        if (at >= squared_errors.size()) {
            break;
        }
        if (l >= log.gammas.size() || !log.gammas[l]) {
            throw IncompleteLogError("epoch " + std::to_string(l) + " has no rate bound");
        }
        product *= *log.gammas[l];
        const double bound = product * squared_errors.front();
        const double seen = squared_errors[at];
        out.bounds.push_back(bound);
        out.observed.push_back(seen);
        if (seen > bound + slack && !out.first_violation) {
            out.ok = false;
            out.first_violation = l;
        }
    }
    return out;
}

AdaptiveEpochs adaptive_stopping_times(const std::vector<Vector>& errors, double rel_tol) {
    AdaptiveEpochs out;
    if (errors.empty()) {
        return out;
    }
    const std::size_t last = errors.size() - 1;
    const double scale = errors.front().norm();
    if (!(scale > 0.0)) {
        out.terminated = true;
        return out;
    }
    const Index dim = errors.front().size();

    std::size_t xi = 0;
    while (xi < last) {
        if (errors[xi].norm() <= 1e-14 * scale) {
            out.terminated = true;
            return out;
        }
        Eigen::MatrixXd v(dim, dim);
        Index rank = 1;
        v.col(0) = errors[xi].normalized();
        bool closed = false;
        for (std::size_t idx = xi; idx < last; ++idx) {
            const Vector& next = errors[idx + 1];
            const double next_norm = next.norm();
            const bool moved = (next - errors[idx]).norm() > 1e-14 * scale;
            Vector t = next;
            for (int pass = 0; pass < 2; ++pass) {
                const auto q = v.leftCols(rank);
                t -= q * (q.transpose() * t);
            }
            const bool inside = t.norm() <= rel_tol * next_norm || next_norm <= 1e-14 * scale;
            if (moved && inside) {
                out.taus.push_back(idx);
                xi = idx + 1;
                closed = true;
                break;
            }
            if (!inside && rank < dim) {
                v.col(rank++) = t.normalized();
            }
        }
        if (!closed) {
            out.incomplete = true;
            return out;
        }
    }
    if (xi == last && errors[xi].norm() <= 1e-14 * scale) {
        out.terminated = true;
    }
    return out;
}

} // namespace rpm
