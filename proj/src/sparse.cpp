#include "lgt/sparse.hpp"

#include <algorithm>
#include <string>

namespace lgt {

double SparseMatrix::at(std::size_t r, std::size_t c) const {
    const auto begin = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[r]);
    const auto end = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[r + 1]);
    const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(c));
    if (it == end || *it != c) return 0.0;
    return values[static_cast<std::size_t>(it - col_indices.begin())];
}

void SparseMatrix::validate() const {
    if (row_offsets.size() != n_rows + 1) throw ShapeError("csr: row_offsets length must be n_rows + 1");
    if (row_offsets.front() != 0) throw ShapeError("csr: row_offsets[0] must be 0");
    if (row_offsets.back() != values.size() || col_indices.size() != values.size())
        throw ShapeError("csr: row_offsets[n_rows] must equal nnz");
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (row_offsets[r] > row_offsets[r + 1]) throw ShapeError("csr: row_offsets decreasing at row " + std::to_string(r));
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            if (col_indices[k] >= n_cols) throw ShapeError("csr: column out of range in row " + std::to_string(r));
            if (k > row_offsets[r] && col_indices[k] <= col_indices[k - 1])
                throw ShapeError("csr: columns not strictly increasing in row " + std::to_string(r));
            if (values[k] == 0.0) throw ShapeError("csr: explicit zero in row " + std::to_string(r));
        }
    }
}

bool SparseMatrix::is_symmetric() const {
    if (n_rows != n_cols) return false;
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
            if (at(col_indices[k], r) != values[k]) return false;
    return true;
}

SparseMatrix SparseMatrix::transposed() const {
    SparseMatrix t;
    t.n_rows = n_cols;
    t.n_cols = n_rows;
    t.row_offsets.assign(n_cols + 1, 0);
    for (auto c : col_indices) ++t.row_offsets[c + 1];
    for (std::size_t i = 0; i < n_cols; ++i) t.row_offsets[i + 1] += t.row_offsets[i];
    t.col_indices.resize(nnz());
    t.values.resize(nnz());
    std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
    // Rows are visited in order, so each transposed row comes out sorted.
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            const std::size_t dst = cursor[col_indices[k]]++;
            t.col_indices[dst] = static_cast<std::uint32_t>(r);
            t.values[dst] = values[k];
        }
    }
    return t;
}

MatrixD SparseMatrix::to_dense() const {
    MatrixD out(n_rows, n_cols);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) out(r, col_indices[k]) = values[k];
    return out;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    SparseMatrix m;
    m.n_rows = m.n_cols = n;
    m.row_offsets.resize(n + 1);
    m.col_indices.resize(n);
    m.values.assign(n, 1.0);
    for (std::size_t i = 0; i <= n; ++i) m.row_offsets[i] = i;
    for (std::size_t i = 0; i < n; ++i) m.col_indices[i] = static_cast<std::uint32_t>(i);
    return m;
}

SparseMatrix SparseMatrix::from_dense(const MatrixD& dense) {
    SparseMatrix m;
    m.n_rows = dense.rows();
    m.n_cols = dense.cols();
    m.row_offsets.reserve(m.n_rows + 1);
    for (std::size_t r = 0; r < dense.rows(); ++r) {
        for (std::size_t c = 0; c < dense.cols(); ++c) {
            if (dense(r, c) != 0.0) {
                m.col_indices.push_back(static_cast<std::uint32_t>(c));
                m.values.push_back(dense(r, c));
            }
        }
        m.row_offsets.push_back(m.values.size());
    }
    return m;
}

SparseMatrix sparse_multiply(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.n_cols != b.n_rows)
        throw ShapeError("sparse_multiply: " + shape_str(a.n_rows, a.n_cols) + " times " + shape_str(b.n_rows, b.n_cols));
    SparseMatrix out;
    out.n_rows = a.n_rows;
    out.n_cols = b.n_cols;
    out.row_offsets.reserve(a.n_rows + 1);
    std::vector<double> acc(b.n_cols, 0.0);
    std::vector<char> touched(b.n_cols, 0);
    std::vector<std::uint32_t> cols;
    for (std::size_t r = 0; r < a.n_rows; ++r) {
        cols.clear();
        for (std::size_t ka = a.row_offsets[r]; ka < a.row_offsets[r + 1]; ++ka) {
            const double av = a.values[ka];
            const std::size_t mid = a.col_indices[ka];
            for (std::size_t kb = b.row_offsets[mid]; kb < b.row_offsets[mid + 1]; ++kb) {
                const auto c = b.col_indices[kb];
                if (!touched[c]) {
                    touched[c] = 1;
                    cols.push_back(c);
                }
                acc[c] += av * b.values[kb];
            }
        }
        std::sort(cols.begin(), cols.end());
        for (auto c : cols) {
            if (acc[c] != 0.0) {
                out.col_indices.push_back(c);
                out.values.push_back(acc[c]);
            }
            acc[c] = 0.0;
            touched[c] = 0;
        }
        out.row_offsets.push_back(out.values.size());
    }
    return out;
}

SparseOperator::SparseOperator(SparseMatrix m) : forward_(std::move(m)) {
    symmetric_ = forward_.is_symmetric();
    if (!symmetric_) transpose_ = forward_.transposed();
}

}  // namespace lgt
