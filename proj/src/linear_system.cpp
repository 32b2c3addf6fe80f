#include "rpm/linear_system.hpp"

#include "rpm/error.hpp"
#include "rpm/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace rpm {

LinearSystem::LinearSystem(Matrix a, Vector b, std::optional<Vector> x_star)
    : a_(std::move(a)), b_(std::move(b)), x_star_(std::move(x_star)) {
    if (a_.rows() < 1 || a_.cols() < 1) {
        throw DimensionError("coefficient matrix must have at least one row and one column");
    }
    if (b_.size() != a_.rows()) {
        throw DimensionError("constant vector has " + std::to_string(b_.size()) +
                             " entries, expected " + std::to_string(a_.rows()));
    }
    if (x_star_ && x_star_->size() != a_.cols()) {
        throw DimensionError("solution vector has " + std::to_string(x_star_->size()) +
                             " entries, expected " + std::to_string(a_.cols()));
    }
}

namespace {

void check_iterate(const LinearSystem& system, const Vector& x) {
    if (x.size() != system.cols()) {
        throw DimensionError("iterate has " + std::to_string(x.size()) + " entries, expected " +
                             std::to_string(system.cols()));
    }
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
    Matrix g(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            g(i, j) = rng.normal();
        }
    }
    return g;
}

// First `k` columns of a Haar-distributed orthogonal matrix of order `n`.
Matrix haar_columns(Index n, Index k, Rng& rng) {
    const Matrix g = gaussian_matrix(n, n, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix& r = qr.matrixQR();
    for (Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    return q.leftCols(k);
}

} // namespace

Vector residual(const LinearSystem& system, const Vector& x) {
    check_iterate(system, x);
    return system.b() - system.a() * x;
}

Vector signed_residual(const LinearSystem& system, const Vector& x) {
    check_iterate(system, x);
    return system.a() * x - system.b();
}

LinearSystem make_consistent_system(Matrix a, std::uint64_t seed) {
    if (a.rows() < 1 || a.cols() < 1) {
        throw DimensionError("coefficient matrix must be nonempty");
    }
    Rng rng(seed);
    Vector x_star(a.cols());
    for (Index j = 0; j < x_star.size(); ++j) {
        x_star[j] = rng.normal();
    }
    Vector b = a * x_star;
    return LinearSystem(std::move(a), std::move(b), std::move(x_star));
}

Matrix gen_prescribed_svd(Index n, Index d, const SpectrumSpec& spec) {
    if (n < 1 || d < 1) {
        throw DimensionError("prescribed-SVD matrix needs positive dimensions");
    }
    const Index k = std::min(n, d);
    const auto& sigma = spec.singular_values;
    if (static_cast<Index>(sigma.size()) != k) {
        throw InvalidArgument("spectrum has " + std::to_string(sigma.size()) +
                              " values, expected min(n, d) = " + std::to_string(k));
    }
    if (!std::is_sorted(sigma.rbegin(), sigma.rend())) {
        throw InvalidArgument("singular values must be non-increasing");
    }
    if (sigma.back() < 0.0 || !(sigma.front() > 0.0)) {
        throw InvalidArgument("singular values must be nonnegative with at least one positive");
    }
    Rng rng(spec.seed);
    Rng left = rng.split(1);
    Rng right = rng.split(2);
    const Matrix u = haar_columns(n, k, left);
    const Matrix v = haar_columns(d, k, right);
    const Vector s = Eigen::Map<const Vector>(sigma.data(), k);
    return u * s.asDiagonal() * v.transpose();
}

std::vector<double> geometric_spectrum(Index count, double condition) {
    if (count < 1 || !(condition >= 1.0)) {
        throw InvalidArgument("geometric spectrum needs count >= 1 and condition >= 1");
    }
    std::vector<double> sigma(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        sigma[static_cast<std::size_t>(i)] = std::pow(condition, -t);
    }
    return sigma;
}

Matrix gen_banded(Index n, Index half_bandwidth, std::uint64_t seed) {
    if (n < 1) {
        throw DimensionError("banded matrix needs n >= 1");
    }
    if (half_bandwidth < 0 || half_bandwidth >= n) {
        throw InvalidArgument("half bandwidth must lie in [0, n)");
    }
    Rng rng(seed);
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - half_bandwidth);
        const Index hi = std::min<Index>(n - 1, i + half_bandwidth);
        for (Index j = lo; j <= hi; ++j) {
            double v = 0.0;
            while (v == 0.0) {
                v = rng.normal();
            }
            a(i, j) = v;
        }
    }
    return a;
}

Matrix gen_gaussian(Index n, Index d, std::uint64_t seed) {
    if (n < 1 || d < 1) {
        throw DimensionError("Gaussian matrix needs positive dimensions");
    }
    Rng rng(seed);
    return gaussian_matrix(n, d, rng);
}

Index numerical_rank(const Matrix& a, double rel_tol) {
    if (a.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Matrix> svd(a);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) {
        return 0;
    }
    const double cutoff = rel_tol * s[0];
    return static_cast<Index>((s.array() > cutoff).count());
}

Matrix pseudo_inverse(const Matrix& a, double rel_cutoff) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    Matrix result = Matrix::Zero(a.cols(), a.rows());
    if (s.size() == 0 || s[0] == 0.0) {
        return result;
    }
    const double cutoff = rel_cutoff * s[0];
    for (Index i = 0; i < s.size(); ++i) {
        if (s[i] > cutoff) {
            result.noalias() += svd.matrixV().col(i) * (svd.matrixU().col(i).transpose() / s[i]);
        }
    }
    return result;
}

Vector min_norm_solution(const LinearSystem& system) {
    const Matrix& a = system.a();
    const Vector& b = system.b();
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double sigma_max = s.size() > 0 ? s[0] : 0.0;

    Vector projected = Vector::Zero(b.size());
    Vector x = Vector::Zero(a.cols());
    for (Index i = 0; i < s.size(); ++i) {
        if (sigma_max > 0.0 && s[i] > 1e-8 * sigma_max) {
            projected += svd.matrixU().col(i) * svd.matrixU().col(i).dot(b);
        }
        if (sigma_max > 0.0 && s[i] > 1e-12 * sigma_max) {
            x += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(b) / s[i]);
        }
    }
    const double defect = (projected - b).norm();
    if (defect > 1e-8 * b.norm()) {
        throw InfeasibleError("system is inconsistent: ||A A^+ b - b|| = " + std::to_string(defect),
                              defect);
    }
    return x;
}

} // namespace rpm

namespace rpm {

namespace {

std::vector<std::string> split_colon(std::string_view s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(':', start);
        parts.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) {
            return parts;
        }
        start = pos + 1;
    }
}

Index parse_dim(const std::string& text, std::string_view spec) {
    if (text.empty() || text.size() > 7 || text.find_first_not_of("0123456789") != std::string::npos) {
        throw InvalidArgument("bad dimension '" + text + "' in generator '" + std::string(spec) + "'");
    }
    return static_cast<Index>(std::stol(text));
}

} // namespace

Matrix generate_matrix(std::string_view spec, std::uint64_t seed) {
    const auto parts = split_colon(spec);
    const std::string& kind = parts.front();
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (parts.size() < lo || parts.size() > hi) {
            throw InvalidArgument("wrong number of fields in generator '" + std::string(spec) + "'");
        }
    };
    if (kind == "identity") {
        need(2, 2);
        const Index n = parse_dim(parts[1], spec);
        if (n < 1) {
            throw InvalidArgument("identity needs N >= 1");
        }
        return Matrix::Identity(n, n);
    }
    if (kind == "gaussian") {
        need(2, 3);
        const Index n = parse_dim(parts[1], spec);
        const Index d = parts.size() == 3 ? parse_dim(parts[2], spec) : n;
        if (n < 1 || d < 1) {
            throw InvalidArgument("gaussian needs positive dimensions");
        }
        return gen_gaussian(n, d, seed);
    }
    if (kind == "svd") {
        need(4, 4);
        const Index n = parse_dim(parts[1], spec);
        const Index d = parse_dim(parts[2], spec);
        double cond = 0.0;
        try {
            cond = std::stod(parts[3]);
        } catch (const std::exception&) {
            throw InvalidArgument("bad condition number in generator '" + std::string(spec) + "'");
        }
        if (n < 1 || d < 1 || !(cond >= 1.0) || !std::isfinite(cond)) {
            throw InvalidArgument("svd needs positive dimensions and COND >= 1");
        }
        return gen_prescribed_svd(n, d, {geometric_spectrum(std::min(n, d), cond), seed});
    }
    if (kind == "banded") {
        need(3, 3);
        return gen_banded(parse_dim(parts[1], spec), parse_dim(parts[2], spec), seed);
    }
    throw InvalidArgument("unknown generator '" + std::string(spec) +
                          "' (expected identity, gaussian, svd or banded)");
}

} // namespace rpm
