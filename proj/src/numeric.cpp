#include "ag/numeric.hpp"

#include <cmath>
#include <stdexcept>

#include "ag/errors.hpp"

namespace ag {

Matrix softmax_rows(const Matrix& m, double temperature) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("softmax_rows: temperature must be positive");
    }
    if (!m.all_finite()) {
        throw std::invalid_argument("softmax_rows: non-finite input");
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* in_row = m.row(i);
        double* out_row = out.row(i);
        double max_v = in_row[0];
        for (std::size_t j = 1; j < m.cols(); ++j) max_v = std::max(max_v, in_row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out_row[j] = std::exp((in_row[j] - max_v) / temperature);
            sum += out_row[j];
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out_row[j] /= sum;
    }
    return out;
}

double log_sum_exp(const double* x, std::size_t n) {
    double max_v = x[0];
    for (std::size_t i = 1; i < n; ++i) max_v = std::max(max_v, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - max_v);
    return max_v + std::log(sum);
}

namespace {

// Continued fraction for the incomplete beta, modified Lentz.
double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw numerical_error("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("regularized_incomplete_beta: a and b must be positive");
    }
    if (x < 0.0 || x > 1.0) {
        throw std::invalid_argument("regularized_incomplete_beta: x must be in [0, 1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace ag
