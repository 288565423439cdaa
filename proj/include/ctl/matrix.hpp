#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctl {

// Dense row-major matrix of doubles. Used for posterior grids (frames x
// classes), CTC symbol grids (frames x 2n+1), boundary grids and gradients.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        const int r = static_cast<int>(rows.size());
        const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
        Matrix m(r, c);
        for (int i = 0; i < r; ++i) {
            if (static_cast<int>(rows[i].size()) != c)
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            for (int j = 0; j < c; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline void check_shape(const Matrix& m, int rows, int cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols)
        throw std::invalid_argument(what + ": expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                    "x" + std::to_string(m.cols()));
}

}  // namespace ctl
