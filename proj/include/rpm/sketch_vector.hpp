#pragma once

#include "rpm/types.hpp"

#include <vector>

namespace rpm {

/// A sketch vector w stored by its nonzeros. Basis vectors and count-sketch
/// rows stay cheap; Gaussian sketches simply list every coordinate.
class SketchVector {
public:
    SketchVector() = default;
    explicit SketchVector(Index dim) : dim_(dim) {}

    static SketchVector basis(Index dim, Index i);
    static SketchVector from_dense(const Vector& w);

    void push(Index i, double v) {
        idx_.push_back(i);
        val_.push_back(v);
    }

    Index dim() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return idx_.size(); }
    const std::vector<Index>& indices() const noexcept { return idx_; }
    const std::vector<double>& values() const noexcept { return val_; }

    Vector to_dense() const;

    /// A' w for a row-side sketch (dim == A.rows()).
    Vector transpose_apply(const Matrix& a) const;

    /// A w for a column-side sketch (dim == A.cols()).
    Vector apply(const Matrix& a) const;

    /// v' w.
    double dot(const Vector& v) const;

private:
    Index dim_ = 0;
    std::vector<Index> idx_;
    std::vector<double> val_;
};

} // namespace rpm
