#include "ag/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ag/errors.hpp"

namespace ag {

SymmetricEigen symmetric_eigen(const Matrix& s) {
    if (s.rows() != s.cols()) throw std::invalid_argument("symmetric_eigen: matrix not square");
    const std::size_t n = s.rows();
    Matrix a = s;
    Matrix v = Matrix::identity(n);

    constexpr int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - sn * aiq;
                    a(i, q) = sn * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const double apj = a(p, j), aqj = a(q, j);
                    a(p, j) = c * apj - sn * aqj;
                    a(q, j) = sn * apj + c * aqj;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - sn * viq;
                    v(i, q) = sn * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

PcaResult pca_fit_transform(const Matrix& data, std::size_t k) {
    const std::size_t n = data.rows(), d = data.cols();
    if (n < 2) throw std::invalid_argument("pca_fit_transform: need at least 2 rows");
    if (k > d) throw std::invalid_argument("pca_fit_transform: k exceeds input dimension");
    if (k == 0) throw std::invalid_argument("pca_fit_transform: k must be positive");

    Matrix centered(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += data(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered(i, j) = data(i, j) - mean;
    }

    Matrix cov;
    matmul_tn(cov, centered, centered);
    scale_inplace(cov, 1.0 / static_cast<double>(n - 1));

    SymmetricEigen eig = symmetric_eigen(cov);

    double total = 0.0;
    for (double lambda : eig.values) total += std::max(lambda, 0.0);

    PcaResult out;
    out.components.resize(k, d);
    out.eigenvalues.assign(eig.values.begin(), eig.values.begin() + k);
    out.explained_variance_ratio.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        // Flip so the largest-magnitude entry is positive.
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            if (std::fabs(eig.vectors(i, c)) > best) {
                best = std::fabs(eig.vectors(i, c));
                arg = i;
            }
        }
        const double sign = eig.vectors(arg, c) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i) out.components(c, i) = sign * eig.vectors(i, c);
        out.explained_variance_ratio[c] =
            total > 0.0 ? std::max(eig.values[c], 0.0) / total : 0.0;
    }

    matmul_nt(out.projections, centered, out.components);
    return out;
}

}  // namespace ag
