#pragma once

#include "rpm/types.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace rpm {

/// A x = b with A of shape n x d. Immutable after construction.
class LinearSystem {
public:
    LinearSystem(Matrix a, Vector b, std::optional<Vector> x_star = std::nullopt);

    const Matrix& a() const noexcept { return a_; }
    const Vector& b() const noexcept { return b_; }
    const std::optional<Vector>& x_star() const noexcept { return x_star_; }

    Index rows() const noexcept { return a_.rows(); }
    Index cols() const noexcept { return a_.cols(); }

private:
    Matrix a_;
    Vector b_;
    std::optional<Vector> x_star_;
};

/// b - A x.
Vector residual(const LinearSystem& system, const Vector& x);

/// A x - b.
Vector signed_residual(const LinearSystem& system, const Vector& x);

/// Draws x* ~ N(0, I_d) from `seed` and sets b = A x*.
LinearSystem make_consistent_system(Matrix a, std::uint64_t seed);

struct SpectrumSpec {
    std::vector<double> singular_values; // non-increasing, at least one positive
    std::uint64_t seed = 0;
};

/// U diag(sigma) V^T with U, V Haar-distributed (QR of Gaussian matrices,
/// sign-corrected).
Matrix gen_prescribed_svd(Index n, Index d, const SpectrumSpec& spec);

/// Geometrically spaced singular values from 1 down to 1/condition.
std::vector<double> geometric_spectrum(Index count, double condition);

/// Square banded matrix: A_ij ~ N(0,1) for |i - j| <= half_bandwidth, else 0.
Matrix gen_banded(Index n, Index half_bandwidth, std::uint64_t seed);

/// Gaussian n x d matrix with i.i.d. N(0,1) entries.
Matrix gen_gaussian(Index n, Index d, std::uint64_t seed);

/// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const Matrix& a, double rel_tol = 1e-8);

/// A^+ b via SVD with cutoff 1e-12 * sigma_max. Throws InfeasibleError when
/// ||A A^+ b - b|| > 1e-8 ||b|| (feasibility judged at rank threshold
/// 1e-8 * sigma_max).
Vector min_norm_solution(const LinearSystem& system);

/// Moore-Penrose pseudoinverse with the given relative cutoff.
Matrix pseudo_inverse(const Matrix& a, double rel_cutoff = 1e-12);

} // namespace rpm

namespace rpm {

/// Builds a matrix from a generator token:
///   identity:N | gaussian:N[:D] | svd:N:D:COND | banded:N:HBW
/// `svd` uses a geometric spectrum from 1 down to 1/COND.
Matrix generate_matrix(std::string_view spec, std::uint64_t seed);

} // namespace rpm
