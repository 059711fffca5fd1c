#pragma once

#include <functional>
#include <vector>

namespace ag {

/// Central-difference gradient estimate (f(x+h·e_i) - f(x-h·e_i)) / (2h),
/// the oracle used to certify every analytic gradient in this project.
std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h = 1e-5);

// |a - b| / max(1e-6, |a|, |b|); the floor keeps noise on near-zero
// gradients from blowing up the ratio.
double relative_error(double a, double b);

}  // namespace ag
