#pragma once

#include "rpm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rpm {

enum class Side {
    Row,    // subspace of R^d
    Column, // subspace of R^n
};

/// Orthonormal basis stored as the columns of `basis`.
struct SubspaceBasis {
    Eigen::MatrixXd basis;
    Side side = Side::Row;

    Index ambient_dim() const noexcept { return basis.rows(); }
    Index rank() const noexcept { return basis.cols(); }
    bool empty() const noexcept { return basis.cols() == 0; }

    Vector project(const Vector& v) const;
    Vector project_complement(const Vector& v) const;
};

/// Orthonormal basis for the span of `columns`; directions whose singular
/// value falls below rel_tol * sigma_max are dropped.
SubspaceBasis orthonormal_basis(const Eigen::MatrixXd& columns, Side side, double rel_tol = 1e-10);

/// span{A'W_1, ..., A'W_N}.
SubspaceBasis finite_population_R(const Matrix& a, const std::vector<Vector>& population);

/// span{A f_1, ..., A f_N} for column-side populations of length d.
SubspaceBasis finite_population_L(const Matrix& a, const std::vector<Vector>& population);

SubspaceBasis row_space(const Matrix& a);
SubspaceBasis column_space(const Matrix& a);

/// Span of the rows with |A_i x0 - b_i| > 1e-10 (||A_i|| ||x0|| + |b_i|).
SubspaceBasis restricted_row_space(const Matrix& a, const Vector& b, const Vector& x0);

struct StoppingTimeLog {
    std::optional<std::uint64_t> first_spanning_time; // T
    std::vector<std::uint64_t> taus;
    std::vector<std::optional<double>> gammas; // one per completed epoch
    std::vector<std::vector<Vector>> epoch_directions;
    std::uint64_t observed = 0;
    bool incomplete = false;
    Index target_rank = 0;
};

std::string to_json(const StoppingTimeLog& log);

/// Consumes the stream A'w_0, A'w_1, ... and records every time the current
/// epoch's directions span `target`. Zero directions advance the counter but
/// are not stored.
class StoppingTimeTracker {
public:
    explicit StoppingTimeTracker(SubspaceBasis target, double rel_tol = 1e-10);

    void observe(const Vector& direction);

    /// Snapshot of the log; an unfinished epoch marks it incomplete.
    StoppingTimeLog log() const;

    const SubspaceBasis& target() const noexcept { return target_; }

private:
    SubspaceBasis target_;
    double rel_tol_;
    Eigen::MatrixXd epoch_basis_;
    Index epoch_rank_ = 0;
    std::vector<Vector> epoch_;
    StoppingTimeLog log_;
};

StoppingTimeLog stopping_times(const std::vector<Vector>& directions, const SubspaceBasis& target);

struct MeanyBound {
    double gamma = 0.0;
    double min_det = 1.0;
    double log10_min_det = 0.0;
    Index rank = 0;
    std::size_t subsets_checked = 0;
};

/// 1 - min det(F'F) over maximal linearly independent subsets F of the unit
/// vectors U. Exhaustive; throws CapacityError when |U| exceeds `cap` and
/// enumeration is needed (|U| > rank). Determinants come from R of a QR
/// factorization, so min_det stays accurate for ill-conditioned sets where
/// gamma itself rounds to 1.
MeanyBound meany_bound(const std::vector<Vector>& units, std::size_t cap = 15);

double meany_gamma(const std::vector<Vector>& units, std::size_t cap = 15);

/// Fills log.gammas for every epoch whose size allows exhaustive enumeration.
void attach_gammas(StoppingTimeLog& log, std::size_t cap = 15);

/// sigma_max of (I - v_k v_k') ... (I - v_1 v_1') restricted to span(U).
double product_projection_norm(const std::vector<Vector>& units);

struct LimitCheck {
    bool ok = false;
    double defect = 0.0;
};

/// ||x_final - (P_N x0 + P_R x*)|| <= 1e-8 (1 + ||x*||).
LimitCheck verify_limit_point(const Vector& x_final, const Vector& x0, const Vector& x_star,
                              const SubspaceBasis& r);

struct EpochRateResult {
    bool ok = true;
    std::vector<double> bounds;   // (prod gamma_j) * e_0
    std::vector<double> observed; // e_{tau_l + 1}
    std::optional<std::size_t> first_violation;
};

/// Checks e[tau_l + 1] <= (prod_{j<=l} gamma_j) e[0] + slack for every epoch
/// whose tau_l + 1 lies inside `squared_errors`. Throws IncompleteLogError when
/// a needed gamma is missing.
EpochRateResult epoch_rate_check(const StoppingTimeLog& log, const std::vector<double>& squared_errors,
                                 double slack = 1e-10);

struct AdaptiveEpochs {
    std::vector<std::uint64_t> taus;
    bool terminated = false; // reached the solution exactly
    bool incomplete = false; // ran out of iterates mid-epoch
};

/// Stopping times of the adaptive convergence argument: starting from xi, nu
/// is the first k with e_{xi+k+1} inside span{e_xi..e_{xi+k}} and a nonzero
/// move; tau = xi + nu and the next epoch starts at xi = tau + 1. `errors`
/// holds e_k = P_row(x_k - x*).
AdaptiveEpochs adaptive_stopping_times(const std::vector<Vector>& errors, double rel_tol = 1e-8);

} // namespace rpm
