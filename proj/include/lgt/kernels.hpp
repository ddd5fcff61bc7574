#pragma once

#include <Eigen/Core>

#include "lgt/dense.hpp"
#include "lgt/sparse.hpp"

// Raw products used by the tape and by inference code. No gradient logic.
namespace lgt::kernels {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMajor<T>> as_eigen(DenseMatrix<T>& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

template <typename T>
Eigen::Map<const RowMajor<T>> as_eigen(const DenseMatrix<T>& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

/// out = S * x
template <typename T>
DenseMatrix<T> spmm(const SparseMatrix& s, const DenseMatrix<T>& x) {
    if (s.n_cols != x.rows())
        throw ShapeError("spmm: sparse " + shape_str(s.n_rows, s.n_cols) + " times dense " + shape_str(x));
    DenseMatrix<T> out(s.n_rows, x.cols());
    const std::size_t width = x.cols();
    for (std::size_t r = 0; r < s.n_rows; ++r) {
        T* dst = out.data() + r * width;
        for (std::size_t k = s.row_offsets[r]; k < s.row_offsets[r + 1]; ++k) {
            const T v = static_cast<T>(s.values[k]);
            const T* src = x.data() + static_cast<std::size_t>(s.col_indices[k]) * width;
            for (std::size_t c = 0; c < width; ++c) dst[c] += v * src[c];
        }
    }
    return out;
}

/// a * b
template <typename T>
DenseMatrix<T> matmul(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_str(a) + " times " + shape_str(b));
    DenseMatrix<T> out(a.rows(), b.cols());
    if (out.empty() || a.cols() == 0) return out;
    as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
    return out;
}

/// a * b^T
template <typename T>
DenseMatrix<T> matmul_nt(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape_str(a) + " times T(" + shape_str(b) + ")");
    DenseMatrix<T> out(a.rows(), b.rows());
    if (out.empty() || a.cols() == 0) return out;
    as_eigen(out).noalias() = as_eigen(a) * as_eigen(b).transpose();
    return out;
}

/// a^T * b
template <typename T>
DenseMatrix<T> matmul_tn(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: T(" + shape_str(a) + ") times " + shape_str(b));
    DenseMatrix<T> out(a.cols(), b.cols());
    if (out.empty() || a.rows() == 0) return out;
    as_eigen(out).noalias() = as_eigen(a).transpose() * as_eigen(b);
    return out;
}

/// dst += alpha * src
template <typename T>
void axpy(DenseMatrix<T>& dst, const DenseMatrix<T>& src, T alpha = T{1}) {
    if (!dst.same_shape(src)) throw ShapeError("axpy: " + shape_str(dst) + " vs " + shape_str(src));
    T* d = dst.data();
    const T* s = src.data();
    for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += alpha * s[i];
}

}  // namespace lgt::kernels
