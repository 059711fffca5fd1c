#pragma once

#include <cstddef>
#include <vector>

namespace ag {

/// Dense row-major matrix of doubles, the carrier for hidden states,
/// projection weights, attention maps, and reduced attention matrices.
/// Constructors taking explicit values reject NaN/Inf; arithmetic helpers
/// assume finite inputs and do not re-check.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const std::vector<double>& values() const { return data_; }

    // Reshapes and zero-fills; keeps capacity so steady-state reuse does not allocate.
    void resize(std::size_t rows, std::size_t cols);
    void set_zero();

    bool all_finite() const;
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = a * b, out += a * b when accumulate is set. Shapes are checked.
void matmul(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate = false);
// out = a * b^T
void matmul_nt(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate = false);
// out = a^T * b
void matmul_tn(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate = false);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

void add_inplace(Matrix& a, const Matrix& b);           // a += b
void add_scaled(Matrix& a, const Matrix& b, double s);  // a += s * b
void scale_inplace(Matrix& a, double s);

double dot(const double* a, const double* b, std::size_t n);
double frobenius_norm_sq(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace ag
