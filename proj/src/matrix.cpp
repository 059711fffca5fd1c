#include "ag/matrix.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ag/errors.hpp"

namespace ag {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) {
        throw std::invalid_argument("Matrix: non-finite fill value");
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("Matrix: value count does not match rows*cols");
    }
    if (!all_finite()) {
        throw std::invalid_argument("Matrix: non-finite value in construction");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, 0.0);
}

void Matrix::set_zero() {
    std::memset(data_.data(), 0, data_.size() * sizeof(double));
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string("matmul: inner dimension mismatch in ") + what);
}

}  // namespace

void matmul(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate) {
    check_inner(a.cols(), b.rows(), "a*b");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (out.rows() != m || out.cols() != n) out.resize(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out.row(i);
        if (!accumulate) std::memset(out_row, 0, n * sizeof(double));
        const double* a_row = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a_row[p];
            if (av == 0.0) continue;
            const double* b_row = b.row(p);
            for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
        }
    }
}

void matmul_nt(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate) {
    check_inner(a.cols(), b.cols(), "a*b^T");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (out.rows() != m || out.cols() != n) out.resize(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out.row(i);
        const double* a_row = a.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot(a_row, b.row(j), k);
            out_row[j] = accumulate ? out_row[j] + v : v;
        }
    }
}

void matmul_tn(Matrix& out, const Matrix& a, const Matrix& b, bool accumulate) {
    check_inner(a.rows(), b.rows(), "a^T*b");
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    if (out.rows() != m || out.cols() != n) out.resize(m, n);
    if (!accumulate) out.set_zero();
    for (std::size_t p = 0; p < k; ++p) {
        const double* a_row = a.row(p);
        const double* b_row = b.row(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a_row[i];
            if (av == 0.0) continue;
            double* out_row = out.row(i);
            for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    matmul(out, a, b);
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void add_scaled(Matrix& a, const Matrix& b, double s) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_scaled: shape mismatch");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

void scale_inplace(Matrix& a, double s) {
    double* pa = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] *= s;
}

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double frobenius_norm_sq(const Matrix& m) {
    return dot(m.data(), m.data(), m.size());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(a.data()[i] - b.data()[i]);
        if (d > worst) worst = d;
    }
    return worst;
}

}  // namespace ag
