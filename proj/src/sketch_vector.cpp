#include "rpm/sketch_vector.hpp"

#include "rpm/error.hpp"

namespace rpm {

SketchVector SketchVector::basis(Index dim, Index i) {
    SketchVector w(dim);
    w.push(i, 1.0);
    return w;
}

SketchVector SketchVector::from_dense(const Vector& w) {
    SketchVector s(w.size());
    for (Index i = 0; i < w.size(); ++i) {
        if (w[i] != 0.0) {
            s.push(i, w[i]);
        }
    }
    return s;
}

Vector SketchVector::to_dense() const {
    Vector w = Vector::Zero(dim_);
    for (std::size_t k = 0; k < idx_.size(); ++k) {
        w[idx_[k]] += val_[k];
    }
    return w;
}

Vector SketchVector::transpose_apply(const Matrix& a) const {
    if (dim_ != a.rows()) {
        throw DimensionError("row sketch length does not match the number of equations");
    }
    Vector q = Vector::Zero(a.cols());
    for (std::size_t k = 0; k < idx_.size(); ++k) {
        q.noalias() += val_[k] * a.row(idx_[k]).transpose();
    }
    return q;
}

Vector SketchVector::apply(const Matrix& a) const {
    if (dim_ != a.cols()) {
        throw DimensionError("column sketch length does not match the number of unknowns");
    }
    Vector v = Vector::Zero(a.rows());
    for (std::size_t k = 0; k < idx_.size(); ++k) {
        v.noalias() += val_[k] * a.col(idx_[k]);
    }
    return v;
}

double SketchVector::dot(const Vector& v) const {
    if (dim_ != v.size()) {
        throw DimensionError("sketch length mismatch in inner product");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < idx_.size(); ++k) {
        s += val_[k] * v[idx_[k]];
    }
    return s;
}

} // namespace rpm
