#include "ag/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "ag/errors.hpp"

namespace ag {

std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
    std::vector<double> grad(x.size());
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw numerical_error("finite_difference_gradient: non-finite function value");
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(double a, double b) {
    const double denom = std::max({1e-6, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) / denom;
}

}  // namespace ag
