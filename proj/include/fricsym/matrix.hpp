#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace fricsym {

// Column-major sample matrix: rows are samples, columns are input variables.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static Matrix from_columns(const std::vector<std::vector<double>>& columns);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

    std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }
    std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }

    std::vector<double> row(std::size_t r) const;
    Matrix select_rows(std::span<const std::size_t> indices) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix Matrix::from_columns(const std::vector<std::vector<double>>& columns) {
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    Matrix m(rows, columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        assert(columns[c].size() == rows);
        for (std::size_t r = 0; r < rows; ++r) m(r, c) = columns[c][r];
    }
    return m;
}

inline Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        assert(rows[r].size() == cols);
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

inline std::vector<double> Matrix::row(std::size_t r) const {
    std::vector<double> out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
    return out;
}

inline Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix m(indices.size(), cols_);
    for (std::size_t c = 0; c < cols_; ++c)
        for (std::size_t i = 0; i < indices.size(); ++i) m(i, c) = (*this)(indices[i], c);
    return m;
}

} // namespace fricsym
