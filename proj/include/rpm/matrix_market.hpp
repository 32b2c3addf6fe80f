#pragma once

#include "rpm/types.hpp"

#include <filesystem>
#include <iosfwd>

namespace rpm {

enum class MatrixMarketFormat { Array, Coordinate };

/// Reads a real (or integer/pattern) Matrix Market file into a dense matrix.
/// Symmetric and skew-symmetric files are mirrored. Complex and Hermitian
/// fields are rejected. Errors carry the offending line number.
Matrix load_matrix_market(const std::filesystem::path& path);
Matrix read_matrix_market(std::istream& in);

/// Writes `a` with 17 significant digits so a reload is exact.
void write_matrix_market(const std::filesystem::path& path, const Matrix& a,
                         MatrixMarketFormat format = MatrixMarketFormat::Coordinate);
void write_matrix_market(std::ostream& out, const Matrix& a,
                         MatrixMarketFormat format = MatrixMarketFormat::Coordinate);

} // namespace rpm
