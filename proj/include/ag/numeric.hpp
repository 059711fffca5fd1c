#pragma once

#include <cstddef>

#include "ag/matrix.hpp"

namespace ag {

/// Row-wise softmax of m / temperature, computed with max-subtraction.
/// Every output row sums to 1 and all entries lie in (0, 1).
Matrix softmax_rows(const Matrix& m, double temperature = 1.0);

// log(sum_i exp(x_i)) with max-subtraction.
double log_sum_exp(const double* x, std::size_t n);

// Regularized incomplete beta I_x(a, b), continued fraction (Lentz).
// Backs the Student-t CDF used by the paired t-test.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace ag
