#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lgt/dense.hpp"

namespace lgt {

/// Compressed sparse row matrix with double-precision values.
///
/// Invariants (checked by validate()): row_offsets is non-decreasing, starts
/// at 0 and ends at nnz; column indices are strictly increasing within a row
/// and inside [0, n_cols); no stored value is zero.
struct SparseMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets{0};
    std::vector<std::uint32_t> col_indices;
    std::vector<double> values;

    std::size_t nnz() const noexcept { return values.size(); }
    std::size_t row_nnz(std::size_t r) const noexcept { return row_offsets[r + 1] - row_offsets[r]; }

    /// Returns the stored value at (r, c) or 0.
    double at(std::size_t r, std::size_t c) const;

    /// Throws ShapeError describing the first violated invariant.
    void validate() const;

    bool is_symmetric() const;

    SparseMatrix transposed() const;
    MatrixD to_dense() const;

    static SparseMatrix identity(std::size_t n);
    /// Drops exact zeros.
    static SparseMatrix from_dense(const MatrixD& dense);

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;
};

/// Gustavson sparse-sparse product.
SparseMatrix sparse_multiply(const SparseMatrix& a, const SparseMatrix& b);

/// A sparse operator paired with its transpose, for products whose backward
/// pass needs S^T. Symmetric inputs share storage.
class SparseOperator {
public:
    SparseOperator() = default;
    explicit SparseOperator(SparseMatrix m);

    const SparseMatrix& matrix() const noexcept { return forward_; }
    const SparseMatrix& transposed() const noexcept { return symmetric_ ? forward_ : transpose_; }
    bool symmetric() const noexcept { return symmetric_; }
    std::size_t rows() const noexcept { return forward_.n_rows; }
    std::size_t cols() const noexcept { return forward_.n_cols; }

private:
    SparseMatrix forward_;
    SparseMatrix transpose_;
    bool symmetric_ = false;
};

}  // namespace lgt
