#pragma once

#include <cstddef>
#include <vector>

#include "ag/matrix.hpp"

namespace ag {

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // column j is the eigenvector of values[j]
};

// Cyclic Jacobi rotation for a symmetric matrix; exact enough for the small
// covariance matrices this project produces.
SymmetricEigen symmetric_eigen(const Matrix& s);

struct PcaResult {
    Matrix projections;                           // n x k
    std::vector<double> explained_variance_ratio; // k entries
    Matrix components;                            // k x d, orthonormal rows
    std::vector<double> eigenvalues;              // k entries, descending
};

/// PCA by eigendecomposition of the sample covariance of mean-centered data.
/// Sign convention: each component's largest-magnitude entry is positive, so
/// outputs are deterministic.
PcaResult pca_fit_transform(const Matrix& data, std::size_t k);

}  // namespace ag
